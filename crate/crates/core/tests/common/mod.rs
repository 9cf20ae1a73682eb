#![allow(dead_code)]

use ithp::model::{self, Batch, DetectorKind, IthpConfig, IthpParams, TaskKind};
use ithp::oracle::{finite_diff, relative_error};
use ithp::{Matrix, Parameters};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.5..1.5)).collect()).unwrap()
}

pub fn one_hot(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    for r in 0..rows {
        m.set(r, rng.random_range(0..cols), 1.0);
    }
    m
}

/// A small random problem: config, parameters, batch contents and a fixed noise draw.
pub struct Problem {
    pub cfg: IthpConfig,
    pub params: IthpParams,
    pub x0: Matrix,
    pub targets: Vec<Matrix>,
    pub labels: Vec<f64>,
    pub noise: Vec<ithp::gaussian::NoiseDraw>,
}

impl Problem {
    pub fn random(seed: u64, dims: Vec<usize>, kinds: Vec<DetectorKind>, task: TaskKind, n: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let levels = dims.len() - 1;
        let mut cfg = IthpConfig::with_multipliers(dims.clone(), rng.random_range(1.0..8.0), 1.0, 1.0);
        cfg.gammas = (0..levels - 1).map(|_| rng.random_range(1.0..8.0)).collect();
        cfg.latent_dims = (0..levels).map(|_| rng.random_range(2..=6)).collect();
        cfg.hidden_dims = (0..levels).map(|_| rng.random_range(3..=8)).collect();
        cfg.predictor_hidden = rng.random_range(2..=8);
        cfg.lambdas = (0..levels - 1).map(|_| rng.random_range(0.5..2.0)).collect();
        cfg.alpha = rng.random_range(0.2..2.0);
        cfg.detector_kinds = kinds;
        cfg.task_kind = task;
        let params = IthpParams::init(&cfg, &mut rng).unwrap();
        let x0 = random_matrix(&mut rng, n, dims[0]);
        let targets = (1..dims.len())
            .map(|k| match cfg.detector_kinds[k - 1] {
                DetectorKind::Continuous => random_matrix(&mut rng, n, dims[k]),
                DetectorKind::Categorical => one_hot(&mut rng, n, dims[k]),
            })
            .collect();
        let labels = (0..n)
            .map(|i| match task {
                TaskKind::BinaryClassification => (i % 2) as f64,
                TaskKind::Regression => rng.random_range(-3.0..3.0),
            })
            .collect();
        let noise = model::draw_chain_noise(&cfg, &mut rng, n);
        Problem { cfg, params, x0, targets, labels, noise }
    }

    pub fn batch(&self) -> Batch<'_> {
        Batch { x0: &self.x0, targets: &self.targets, labels: &self.labels }
    }

    /// Norm-relative error between the analytic gradient and central differences.
    pub fn gradient_error(&self) -> f64 {
        let (_, analytic) = model::loss_and_grad(&self.cfg, &self.params, self.batch(), &self.noise).unwrap();
        let numeric = finite_diff(
            |p: &IthpParams| model::loss(&self.cfg, p, self.batch(), &self.noise).unwrap().total,
            &self.params,
            1e-5,
        );
        assert_eq!(analytic.num_params(), numeric.num_params());
        relative_error(&analytic, &numeric)
    }
}
