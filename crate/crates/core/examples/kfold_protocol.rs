//! Five-fold cross-validation over a dataset described by a manifest.
//!
//! cargo run --release --example kfold_protocol -- [manifest.json]
//!
//! Without an argument the synthetic dataset is written to a temporary
//! directory first, so the example also shows the manifest round trip.

use std::path::PathBuf;

use ithp::data::{self, kfold, synth_make, Dtype, LabelKind, SynthSpec};
use ithp::metrics::WeightedPrf;
use ithp::model::IthpConfig;
use ithp::train::{evaluate, fit, TrainConfig};

fn main() -> ithp::Result<()> {
    let tmp = std::env::temp_dir().join("ithp-kfold-example");
    let manifest = match std::env::args().nth(1) {
        Some(p) => PathBuf::from(p),
        None => {
            let synth = synth_make(&SynthSpec { n: 500, ..SynthSpec::default_spec() })?;
            data::write_dataset(&synth, &tmp, "synthetic", Dtype::F32le, LabelKind::Binary)?
        }
    };
    let (dataset, meta) = data::load_dataset_with_manifest(&manifest)?;
    println!("{}: {} samples, dims {:?}", meta.name, dataset.len(), meta.dims());

    let mut cfg = IthpConfig::sarcasm_defaults(dataset.dims());
    cfg.latent_dims = vec![32, 16];
    cfg.hidden_dims = vec![64, 32];
    let folds = kfold(dataset.len(), 5, 0)?;
    let mut scores = Vec::new();
    for f in 0..folds.k() {
        let (tr, te) = folds.train_test(f);
        let tc = TrainConfig { epochs: 30, seed: f as u64, ..TrainConfig::default() };
        let (params, _) = fit(&cfg, &tc, &dataset.select(&tr))?;
        let w = evaluate(&cfg, &params, &dataset.select(&te))?.weighted.unwrap();
        println!("fold {f}: P {:.3}  R {:.3}  F {:.3}", w.precision, w.recall, w.fscore);
        scores.push(w);
    }
    let mean = |g: fn(&WeightedPrf) -> f64| scores.iter().map(g).sum::<f64>() / scores.len() as f64;
    println!("mean:   P {:.3}  R {:.3}  F {:.3}", mean(|w| w.precision), mean(|w| w.recall), mean(|w| w.fscore));
    Ok(())
}
