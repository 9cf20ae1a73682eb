//! Save a trained model, reload it and time single-sample prediction.
//!
//! cargo run --release --example inference_latency

use std::time::Instant;

use ithp::checkpoint;
use ithp::data::{synth_make, SynthSpec};
use ithp::model::{self, IthpConfig};
use ithp::train::{fit, TrainConfig};

fn main() -> ithp::Result<()> {
    let data = synth_make(&SynthSpec { n: 400, ..SynthSpec::default_spec() })?;
    let cfg = IthpConfig::sarcasm_defaults(data.dims());
    let tc = TrainConfig { epochs: 3, ..TrainConfig::default() };
    let (params, _) = fit(&cfg, &tc, &data)?;

    let path = std::env::temp_dir().join("ithp-latency-example.ithp");
    checkpoint::save(&path, &cfg, Some(&tc), &params)?;
    let ck = checkpoint::load(&path)?;
    assert_eq!(ck.params, params);

    // only the prime modality is needed at inference time
    let x0 = &data.modalities[0];
    let calls = 2000;
    let start = Instant::now();
    let mut checksum = 0.0;
    for i in 0..calls {
        checksum += model::predict(&ck.config, &ck.params, &x0.select_rows(&[i % data.len()]))?[0];
    }
    let per_call = start.elapsed().as_secs_f64() * 1e3 / calls as f64;
    println!("{calls} calls, {per_call:.4} ms per sample (checksum {checksum:.3})");
    Ok(())
}
