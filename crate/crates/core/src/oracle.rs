//! Reference computations that share no code path with the quantities they check.
//!
//! - [`finite_diff`]: central-difference gradients of any scalar function of a
//!   [`Parameters`] value.
//! - [`mc_kl`]: Monte-Carlo KL of a diagonal Gaussian to the standard normal.
//! - [`discrete_mi`]: mutual information of a finite joint table.
//! - [`bound_check_level0`] / [`bound_check_decoder`]: grid-integrated
//!   one-dimensional channels with a binary source, used to confirm that the
//!   KL term upper-bounds `I(X₀; B₀)` and that a decoder's expected
//!   log-likelihood plus `H(X₁)` lower-bounds `I(B₀; X₁)`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gaussian::DiagGaussian;
use crate::numerics::Parameters;

impl Parameters for Vec<f64> {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![self.as_slice()]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.as_mut_slice()]
    }
}

/// Central differences `(f(p + h·e_i) − f(p − h·e_i)) / 2h` for every entry.
pub fn finite_diff<P, F>(loss_fn: F, params: &P, h: f64) -> P
where
    P: Parameters,
    F: Fn(&P) -> f64,
{
    let base = params.flatten();
    let mut grad = vec![0.0; base.len()];
    let mut probe = params.clone();
    let mut shifted = base.clone();
    for i in 0..base.len() {
        shifted[i] = base[i] + h;
        probe.assign_flat(&shifted);
        let up = loss_fn(&probe);
        shifted[i] = base[i] - h;
        probe.assign_flat(&shifted);
        let down = loss_fn(&probe);
        shifted[i] = base[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    let mut out = params.zeros_like();
    out.assign_flat(&grad);
    out
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)` over all entries; 0 when both are zero.
pub fn relative_error<P: Parameters>(a: &P, b: &P) -> f64 {
    let (fa, fb) = (a.flatten(), b.flatten());
    let diff = fa.iter().zip(&fb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = fa.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = fb.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Mean over `n_draws` samples `z ~ g` of `log g(z) − log N(z; 0, I)`,
/// averaged over the rows of the batch.
pub fn mc_kl<R: Rng + ?Sized>(g: &DiagGaussian, n_draws: usize, rng: &mut R) -> f64 {
    let n_draws = n_draws.max(1);
    let rows = g.batch().max(1);
    let mut total = 0.0;
    for r in 0..g.batch() {
        let mu = g.mean.row(r);
        let lv = g.log_var.row(r);
        let mut acc = 0.0;
        for _ in 0..n_draws {
            for (&m, &l) in mu.iter().zip(lv) {
                let eps: f64 = rng.sample(StandardNormal);
                let z = m + eps * (0.5 * l).exp();
                // log N(z; m, e^l) - log N(z; 0, 1), constants cancel
                acc += -0.5 * l - 0.5 * eps * eps + 0.5 * z * z;
            }
        }
        total += acc / n_draws as f64;
    }
    total / rows as f64
}

/// Joint probability table `p(x, y)` over two finite alphabets.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteJoint {
    table: Vec<Vec<f64>>,
}

impl DiscreteJoint {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let cols = table.first().map_or(0, Vec::len);
        if table.is_empty() || cols == 0 {
            return Err(Error::Empty("joint table"));
        }
        if table.iter().any(|r| r.len() != cols) {
            return Err(Error::Config("joint table rows differ in length".into()));
        }
        if table.iter().flatten().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Config("joint probabilities must be finite and >= 0".into()));
        }
        let sum: f64 = table.iter().flatten().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("joint table sums to {sum}, not 1")));
        }
        Ok(DiscreteJoint { table })
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }

    pub fn transpose(&self) -> DiscreteJoint {
        let cols = self.table[0].len();
        let table = (0..cols)
            .map(|c| self.table.iter().map(|r| r[c]).collect())
            .collect();
        DiscreteJoint { table }
    }

    pub fn marginal_x(&self) -> Vec<f64> {
        self.table.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn marginal_y(&self) -> Vec<f64> {
        (0..self.table[0].len())
            .map(|c| self.table.iter().map(|r| r[c]).sum())
            .collect()
    }
}

/// `Σ p(x,y) · ln(p(x,y) / (p(x) p(y)))` in nats; zero cells contribute nothing.
pub fn discrete_mi(j: &DiscreteJoint) -> f64 {
    let px = j.marginal_x();
    let py = j.marginal_y();
    let mut mi = 0.0;
    for (x, row) in j.table.iter().enumerate() {
        for (y, &p) in row.iter().enumerate() {
            if p > 0.0 {
                mi += p * (p / (px[x] * py[y])).ln();
            }
        }
    }
    mi
}

/// Uniform integration grid on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            lo: -10.0,
            hi: 10.0,
            points: 10_000,
        }
    }
}

impl Grid {
    fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        // trapezoid weights
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(move |i| {
            let w = if i == 0 || i + 1 == self.points { 0.5 * step } else { step };
            (self.lo + i as f64 * step, w)
        })
    }
}

/// Gaussian channel `B | X = x ~ N(mean[x], std[x]²)` for a uniform binary `X`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryChannel {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

fn normal_pdf(b: f64, mean: f64, std: f64) -> f64 {
    let u = (b - mean) / std;
    (-0.5 * u * u).exp() / (std * (2.0 * std::f64::consts::PI).sqrt())
}

fn kl_1d_std_normal(mean: f64, std: f64) -> f64 {
    let var = std * std;
    0.5 * (mean * mean + var - var.ln() - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelZeroBound {
    /// Grid-integrated `I(X₀; B₀)`.
    pub mi_estimate: f64,
    /// `E_x KL(q(B|x) ‖ N(0,1))`, closed form.
    pub avg_kl: f64,
}

/// Grid-integrated `I(X; B) = ½ Σ_x ∫ q(b|x) ln(q(b|x)/q(b)) db` next to the
/// closed-form average KL that the training loss uses in its place.
pub fn bound_check_level0(channel: &BinaryChannel, grid: Grid) -> LevelZeroBound {
    let mut mi = 0.0;
    for (b, w) in grid.nodes() {
        let q = [
            normal_pdf(b, channel.mean[0], channel.std[0]),
            normal_pdf(b, channel.mean[1], channel.std[1]),
        ];
        let marginal = 0.5 * (q[0] + q[1]);
        for &qx in &q {
            if qx > 0.0 {
                mi += w * 0.5 * qx * (qx / marginal).ln();
            }
        }
    }
    let avg_kl = 0.5
        * (kl_1d_std_normal(channel.mean[0], channel.std[0])
            + kl_1d_std_normal(channel.mean[1], channel.std[1]));
    LevelZeroBound {
        mi_estimate: mi,
        avg_kl,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderBound {
    /// Grid-integrated `I(B₀; X₁)`.
    pub mi_estimate: f64,
    /// `E[ln q(X₁|B₀)] + H(X₁)` for the given decoder.
    pub decoder_bound: f64,
}

/// Binary `X₁` with `P(X₁ = 1 | X₀ = x) = p_x1_given_x0[x]`, encoded through the
/// channel's `B₀`, and a logistic decoder `q(X₁ = 1 | b) = σ(w·b + c)`.
pub fn bound_check_decoder(
    channel: &BinaryChannel,
    p_x1_given_x0: [f64; 2],
    decoder: (f64, f64),
    grid: Grid,
) -> DecoderBound {
    let p_x1 = 0.5 * (p_x1_given_x0[0] + p_x1_given_x0[1]);
    let entropy = |p: f64| {
        let mut h = 0.0;
        for q in [p, 1.0 - p] {
            if q > 0.0 {
                h -= q * q.ln();
            }
        }
        h
    };
    let mut mi = 0.0;
    let mut expected_ll = 0.0;
    for (b, w) in grid.nodes() {
        let q = [
            normal_pdf(b, channel.mean[0], channel.std[0]),
            normal_pdf(b, channel.mean[1], channel.std[1]),
        ];
        // p(b, x1=1) and p(b, x1=0) after marginalizing X0
        let joint1 = 0.5 * (q[0] * p_x1_given_x0[0] + q[1] * p_x1_given_x0[1]);
        let joint0 = 0.5 * (q[0] * (1.0 - p_x1_given_x0[0]) + q[1] * (1.0 - p_x1_given_x0[1]));
        let pb = joint0 + joint1;
        if pb <= 0.0 {
            continue;
        }
        for (joint, px) in [(joint1, p_x1), (joint0, 1.0 - p_x1)] {
            if joint > 0.0 && px > 0.0 {
                mi += w * joint * (joint / (pb * px)).ln();
            }
        }
        let logit = decoder.0 * b + decoder.1;
        // ln σ(t) = -ln(1+e^{-t})
        let log_q1 = -(-logit).exp().ln_1p();
        let log_q0 = -(logit).exp().ln_1p();
        expected_ll += w * (joint1 * log_q1 + joint0 * log_q0);
    }
    DecoderBound {
        mi_estimate: mi,
        decoder_bound: expected_ll + entropy(p_x1),
    }
}
