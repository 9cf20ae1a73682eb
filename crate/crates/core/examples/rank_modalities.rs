//! Order modalities by sample entropy and by greedy held-out selection.
//!
//! cargo run --release --example rank_modalities

use ithp::data::{kfold, synth_make, SynthSpec};
use ithp::model::TaskKind;
use ithp::ranking::{greedy_rank, rank_by_sampen};
use ithp::train::{fit_baseline, TrainConfig};

fn main() -> ithp::Result<()> {
    let data = synth_make(&SynthSpec { n: 600, ..SynthSpec::default_spec() })?;
    for e in &rank_by_sampen(&data.modalities)?.entries {
        println!("sampen  modality {}  score {:.4}", e.modality, e.score);
    }

    let (tr, te) = kfold(data.len(), 4, 0)?.train_test(0);
    let (train, test) = (data.select(&tr), data.select(&te));
    let tc = TrainConfig { epochs: 20, ..TrainConfig::default() };
    let all: Vec<usize> = (0..data.modalities.len()).collect();
    let ranked = greedy_rank(&all, |subset| {
        if subset.is_empty() {
            return Ok(0.5);
        }
        let (m, _) = fit_baseline(subset, 16, TaskKind::BinaryClassification, &tc, &train).map_err(|e| e.to_string())?;
        Ok(m.evaluate(&test).map_err(|e| e.to_string())?.binary.unwrap().accuracy)
    })?;
    for e in &ranked.entries {
        println!("greedy  modality {}  gain {:+.4}", e.modality, e.score);
    }
    Ok(())
}
