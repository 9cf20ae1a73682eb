//! Compare ITHP against an MLP that sees only the prime modality.
//!
//! cargo run --release --example fusion_gain -- [seeds]

use ithp::data::{kfold, synth_make, SynthSpec};
use ithp::model::{IthpConfig, TaskKind};
use ithp::train::{evaluate, fit, fit_baseline, TrainConfig};

fn main() -> ithp::Result<()> {
    let seeds: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let spec = SynthSpec::default_spec();
    for s in 0..seeds {
        let data = synth_make(&SynthSpec { seed: spec.seed + s, ..spec.clone() })?;
        let (tr, te) = kfold(data.len(), 5, s)?.train_test(0);
        let (train, test) = (data.select(&tr), data.select(&te));

        let mut cfg = IthpConfig::sarcasm_defaults(data.dims());
        cfg.latent_dims = vec![64, 32];
        cfg.hidden_dims = vec![128, 64];
        let tc = TrainConfig { epochs: 100, seed: s, ..TrainConfig::default() };
        let (params, _) = fit(&cfg, &tc, &train)?;
        let ithp_acc = evaluate(&cfg, &params, &test)?.binary.unwrap().accuracy;

        let btc = TrainConfig { epochs: 50, batch_size: 128, learning_rate: 1e-4, seed: s, ..TrainConfig::default() };
        let (base, _) = fit_baseline(&[0], 256, TaskKind::BinaryClassification, &btc, &train)?;
        let base_acc = base.evaluate(&test)?.binary.unwrap().accuracy;
        println!("seed {s}: ITHP {ithp_acc:.3}  prime-only MLP {base_acc:.3}");
    }
    Ok(())
}
