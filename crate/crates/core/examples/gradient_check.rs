//! Compare the analytic gradient of the full loss with central differences.
//!
//! cargo run --release --example gradient_check

use ithp::model::{self, Batch, DetectorKind, IthpConfig, IthpParams};
use ithp::numerics::Matrix;
use ithp::oracle::{finite_diff, relative_error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Matrix {
    Matrix::from_vec(r, c, (0..r * c).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn main() -> ithp::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut cfg = IthpConfig::sarcasm_defaults(vec![6, 4, 3]);
    cfg.latent_dims = vec![4, 3];
    cfg.hidden_dims = vec![5, 4];
    cfg.predictor_hidden = 4;
    cfg.detector_kinds = vec![DetectorKind::Continuous; 2];
    let params = IthpParams::init(&cfg, &mut rng)?;
    let n = 4;
    let x0 = random(&mut rng, n, 6);
    let targets = vec![random(&mut rng, n, 4), random(&mut rng, n, 3)];
    let labels: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
    let noise = model::draw_chain_noise(&cfg, &mut rng, n);
    let batch = Batch { x0: &x0, targets: &targets, labels: &labels };

    let (breakdown, analytic) = model::loss_and_grad(&cfg, &params, batch, &noise)?;
    let numeric = finite_diff(|p: &IthpParams| model::loss(&cfg, p, batch, &noise).unwrap().total, &params, 1e-5);
    println!("total loss {:.6}", breakdown.total);
    println!("relative error {:.3e}", relative_error(&analytic, &numeric));
    Ok(())
}
