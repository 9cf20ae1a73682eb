//! Train ITHP on the built-in synthetic dataset and report held-out metrics.
//!
//! cargo run --release --example train_synthetic

use ithp::data::{kfold, synth_make, SynthSpec};
use ithp::model::IthpConfig;
use ithp::train::{evaluate, fit, TrainConfig};

fn main() -> ithp::Result<()> {
    let data = synth_make(&SynthSpec::default_spec())?;
    let (train_idx, test_idx) = kfold(data.len(), 5, 0)?.train_test(0);
    let (train, test) = (data.select(&train_idx), data.select(&test_idx));

    let mut cfg = IthpConfig::sarcasm_defaults(data.dims());
    cfg.latent_dims = vec![64, 32];
    cfg.hidden_dims = vec![128, 64];
    let tc = TrainConfig { epochs: 60, ..TrainConfig::default() };

    let (params, history) = fit(&cfg, &tc, &train)?;
    for rec in history.epochs.iter().step_by(10) {
        println!(
            "epoch {:>3}  total {:.4}  task {:.4}  kl0 {:.3}  det0 {:.3}",
            rec.epoch, rec.mean.total, rec.mean.task_term, rec.mean.kl_terms[0], rec.mean.detector_terms[0]
        );
    }
    let report = evaluate(&cfg, &params, &test)?;
    let (w, b) = (report.weighted.unwrap(), report.binary.unwrap());
    println!("test: accuracy {:.3}  F1 {:.3}  weighted P/R/F {:.3}/{:.3}/{:.3}", b.accuracy, b.f1, w.precision, w.recall, w.fscore);
    Ok(())
}
