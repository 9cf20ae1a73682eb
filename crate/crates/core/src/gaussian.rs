//! Diagonal-Gaussian latent states.
//!
//! Encoders emit a mean and a log-variance per latent dimension. Samples are
//! drawn with the reparameterization `z = μ + ε ⊙ exp(½·log_var)` so the sample
//! stays differentiable in both outputs, and the prior is the fixed standard
//! normal.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const LOG_VAR_MIN: f64 = -10.0;
pub const LOG_VAR_MAX: f64 = 10.0;

/// A batch of diagonal Gaussians, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian {
    pub mean: Matrix,
    pub log_var: Matrix,
}

/// Standard-normal draws shaped like the latent batch they perturb.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDraw {
    pub eps: Matrix,
}

impl NoiseDraw {
    /// All-zero noise: sampling returns the mean.
    pub fn zeros(n: usize, dim: usize) -> Self {
        NoiseDraw {
            eps: Matrix::zeros(n, dim),
        }
    }
}

impl DiagGaussian {
    pub fn new(mean: Matrix, log_var: Matrix) -> Result<Self> {
        if mean.shape() != log_var.shape() {
            return Err(Error::dim("DiagGaussian log_var cols", mean.cols(), log_var.cols()));
        }
        Ok(DiagGaussian { mean, log_var })
    }

    /// Builds the Gaussian from raw encoder outputs, clamping log-variance into
    /// `[LOG_VAR_MIN, LOG_VAR_MAX]`.
    pub fn from_raw(mean: Matrix, raw_log_var: &Matrix) -> Result<Self> {
        DiagGaussian::new(mean, raw_log_var.map(clamp_log_var))
    }

    pub fn batch(&self) -> usize {
        self.mean.rows()
    }

    pub fn dim(&self) -> usize {
        self.mean.cols()
    }
}

#[inline]
pub fn clamp_log_var(x: f64) -> f64 {
    x.clamp(LOG_VAR_MIN, LOG_VAR_MAX)
}

/// Zeroes gradient entries whose raw log-variance was clamped.
pub fn clamp_backward(raw_log_var: &Matrix, grad: &Matrix) -> Matrix {
    let mut out = grad.clone();
    for (g, &x) in out.data_mut().iter_mut().zip(raw_log_var.data()) {
        if !(LOG_VAR_MIN..=LOG_VAR_MAX).contains(&x) {
            *g = 0.0;
        }
    }
    out
}

/// `KL(g ‖ N(0, I))` summed over latent dimensions and averaged over the batch.
pub fn kl_std_normal(g: &DiagGaussian) -> f64 {
    let n = g.batch();
    if n == 0 {
        return 0.0;
    }
    let total: f64 = g
        .mean
        .data()
        .iter()
        .zip(g.log_var.data())
        .map(|(&mu, &lv)| mu * mu + lv.exp() - lv - 1.0)
        .sum();
    0.5 * total / n as f64
}

/// Gradient of `upstream · kl_std_normal(g)` with respect to `(mean, log_var)`.
pub fn kl_std_normal_backward(g: &DiagGaussian, upstream: f64) -> (Matrix, Matrix) {
    let n = g.batch().max(1) as f64;
    let scale = upstream / n;
    let d_mean = g.mean.map(|mu| scale * mu);
    let d_lv = g.log_var.map(|lv| scale * 0.5 * (lv.exp() - 1.0));
    (d_mean, d_lv)
}

pub fn reparameterize(g: &DiagGaussian, noise: &NoiseDraw) -> Result<Matrix> {
    if noise.eps.shape() != g.mean.shape() {
        return Err(Error::dim("reparameterize noise cols", g.dim(), noise.eps.cols()));
    }
    let mut z = g.mean.clone();
    for ((z_i, &lv), &e) in z
        .data_mut()
        .iter_mut()
        .zip(g.log_var.data())
        .zip(noise.eps.data())
    {
        *z_i += e * (0.5 * lv).exp();
    }
    Ok(z)
}

/// Pulls `d z` back to `(d mean, d log_var)`.
pub fn reparameterize_backward(g: &DiagGaussian, noise: &NoiseDraw, grad_z: &Matrix) -> (Matrix, Matrix) {
    let d_mean = grad_z.clone();
    let mut d_lv = grad_z.clone();
    for ((d, &lv), &e) in d_lv
        .data_mut()
        .iter_mut()
        .zip(g.log_var.data())
        .zip(noise.eps.data())
    {
        *d *= 0.5 * e * (0.5 * lv).exp();
    }
    (d_mean, d_lv)
}

pub fn draw_noise<R: Rng + ?Sized>(rng: &mut R, n: usize, dim: usize) -> NoiseDraw {
    let data = (0..n * dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    NoiseDraw {
        eps: Matrix::from_vec(n, dim, data).expect("length matches"),
    }
}
