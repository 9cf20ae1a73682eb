//! The hierarchical bottleneck chain.
//!
//! Only the prime modality `X₀` is fed to the network. Level 0 encodes `X₀`
//! into a Gaussian latent `B₀`; every later level `k` encodes the sample
//! `z_{k-1}` drawn from the previous latent. Each level carries a detector
//! head that predicts the next modality `X_{k+1}` from its own sample, and a
//! task predictor reads the last latent.
//!
//! The per-level objective is `KL(q(B_k|·) ‖ N(0, I)) + m_k · det_k` where
//! `m_0 = β`, `m_k = γ_{k-1}` and `det_k` is the detector's cross-entropy
//! (categorical targets) or summed squared error (continuous targets). Levels
//! are combined as `L₀ + Σ λ_{k-1}·L_k`, and the trained objective is
//! `levels / (β + Σγ) · overall + α · task`.
//!
//! Detectors exist for training only; [`predict`] never evaluates them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{
    clamp_backward, draw_noise, kl_std_normal, kl_std_normal_backward, reparameterize,
    reparameterize_backward, DiagGaussian, NoiseDraw,
};
use crate::numerics::{
    activation_backward, activation_forward, Activation, AffineLayer, Matrix, MlpCache,
    Parameters, TwoLayerMlp,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// One-hot targets, softmax cross-entropy.
    Categorical,
    /// Real targets, per-sample summed squared error.
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    BinaryClassification,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IthpConfig {
    /// Feature dims of `X₀ … X_N`, prime modality first.
    pub modality_dims: Vec<usize>,
    /// One latent size per level.
    pub latent_dims: Vec<usize>,
    /// Encoder hidden width per level; detectors reuse the same width.
    pub hidden_dims: Vec<usize>,
    pub predictor_hidden: usize,
    pub beta: f64,
    /// Relevance multipliers for levels `1..`.
    pub gammas: Vec<f64>,
    /// Weights of levels `1..` in the overall loss.
    pub lambdas: Vec<f64>,
    pub alpha: f64,
    pub detector_kinds: Vec<DetectorKind>,
    pub task_kind: TaskKind,
}

impl IthpConfig {
    /// Builds a config with the given multipliers and default sizes: latent
    /// dims 128, 64, 32, … (floored at 8), hidden width twice the latent size,
    /// continuous detectors, a 64-unit predictor and `α = 1`.
    pub fn with_multipliers(modality_dims: Vec<usize>, beta: f64, gamma: f64, lambda: f64) -> Self {
        let levels = modality_dims.len().saturating_sub(1);
        let latent_dims: Vec<usize> = (0..levels).map(|k| (128usize >> k).max(8)).collect();
        let hidden_dims = latent_dims.iter().map(|d| d * 2).collect();
        IthpConfig {
            modality_dims,
            hidden_dims,
            latent_dims,
            predictor_hidden: 64,
            beta,
            gammas: vec![gamma; levels.saturating_sub(1)],
            lambdas: vec![lambda; levels.saturating_sub(1)],
            alpha: 1.0,
            detector_kinds: vec![DetectorKind::Continuous; levels],
            task_kind: TaskKind::BinaryClassification,
        }
    }

    /// `β = 32, γ = 8, λ = 1`.
    pub fn sarcasm_defaults(modality_dims: Vec<usize>) -> Self {
        Self::with_multipliers(modality_dims, 32.0, 8.0, 1.0)
    }

    /// `β = 8, γ = 32, λ = 1`.
    pub fn sentiment_defaults(modality_dims: Vec<usize>) -> Self {
        let mut cfg = Self::with_multipliers(modality_dims, 8.0, 32.0, 1.0);
        cfg.task_kind = TaskKind::Regression;
        cfg
    }

    pub fn n_modalities(&self) -> usize {
        self.modality_dims.len()
    }

    pub fn levels(&self) -> usize {
        self.latent_dims.len()
    }

    /// Relevance multiplier of level `k`: `β` for the input level, `γ_{k-1}` after.
    pub fn multiplier(&self, k: usize) -> f64 {
        if k == 0 {
            self.beta
        } else {
            self.gammas[k - 1]
        }
    }

    /// Weight of level `k` in the overall loss.
    pub fn level_weight(&self, k: usize) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.lambdas[k - 1]
        }
    }

    /// Factor applied to the overall loss in the trained objective:
    /// the number of levels over the sum of all relevance multipliers.
    pub fn overall_scale(&self) -> f64 {
        let denom = self.beta + self.gammas.iter().sum::<f64>();
        self.levels() as f64 / denom
    }

    pub fn input_dim(&self, k: usize) -> usize {
        if k == 0 {
            self.modality_dims[0]
        } else {
            self.latent_dims[k - 1]
        }
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.n_modalities();
        if m < 2 {
            return Err(Error::Config(format!("need at least 2 modalities, got {m}")));
        }
        let levels = m - 1;
        let check_len = |name: &str, got: usize, want: usize| {
            if got == want {
                Ok(())
            } else {
                Err(Error::Config(format!("{name}: expected {want} entries, got {got}")))
            }
        };
        check_len("latent_dims", self.latent_dims.len(), levels)?;
        check_len("hidden_dims", self.hidden_dims.len(), levels)?;
        check_len("detector_kinds", self.detector_kinds.len(), levels)?;
        check_len("gammas", self.gammas.len(), levels - 1)?;
        check_len("lambdas", self.lambdas.len(), levels - 1)?;
        let dims = self
            .modality_dims
            .iter()
            .chain(&self.latent_dims)
            .chain(&self.hidden_dims)
            .chain(std::iter::once(&self.predictor_hidden));
        if dims.into_iter().any(|&d| d == 0) {
            return Err(Error::Config("all dimensions must be positive".into()));
        }
        let positive = std::iter::once(self.beta)
            .chain(self.gammas.iter().copied())
            .chain(self.lambdas.iter().copied());
        for v in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("multipliers must be finite and > 0, got {v}")));
            }
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Encoder and detector of one hierarchy level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub encoder_l1: AffineLayer,
    pub encoder_mu: AffineLayer,
    pub encoder_logvar: AffineLayer,
    pub detector: TwoLayerMlp,
}

impl LevelParams {
    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, latent: usize, target: usize, rng: &mut R) -> Self {
        LevelParams {
            encoder_l1: AffineLayer::glorot(input, hidden, rng),
            encoder_mu: AffineLayer::glorot(hidden, latent, rng),
            encoder_logvar: AffineLayer::glorot(hidden, latent, rng),
            detector: TwoLayerMlp::glorot(latent, hidden, target, rng),
        }
    }
}

impl Parameters for LevelParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v = self.encoder_l1.tensors();
        v.extend(self.encoder_mu.tensors());
        v.extend(self.encoder_logvar.tensors());
        v.extend(self.detector.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.encoder_l1.tensors_mut();
        v.extend(self.encoder_mu.tensors_mut());
        v.extend(self.encoder_logvar.tensors_mut());
        v.extend(self.detector.tensors_mut());
        v
    }
}

/// All trainable parameters. Gradients are returned in the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IthpParams {
    pub levels: Vec<LevelParams>,
    pub predictor: TwoLayerMlp,
}

impl IthpParams {
    pub fn init<R: Rng + ?Sized>(cfg: &IthpConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let levels = (0..cfg.levels())
            .map(|k| {
                LevelParams::init(
                    cfg.input_dim(k),
                    cfg.hidden_dims[k],
                    cfg.latent_dims[k],
                    cfg.modality_dims[k + 1],
                    rng,
                )
            })
            .collect();
        let last = *cfg.latent_dims.last().expect("validated");
        Ok(IthpParams {
            levels,
            predictor: TwoLayerMlp::glorot(last, cfg.predictor_hidden, 1, rng),
        })
    }

    /// `(name, shape, values)` for every tensor, in [`Parameters::tensors`] order.
    pub fn named_tensors(&self) -> Vec<(String, (usize, usize), &[f64])> {
        fn layer<'a>(out: &mut Vec<(String, (usize, usize), &'a [f64])>, prefix: &str, l: &'a AffineLayer) {
            out.push((format!("{prefix}.weight"), l.weights.shape(), l.weights.data()));
            out.push((format!("{prefix}.bias"), (1, l.bias.len()), &l.bias));
        }
        let mut out = Vec::new();
        for (k, lp) in self.levels.iter().enumerate() {
            layer(&mut out, &format!("level{k}.encoder_l1"), &lp.encoder_l1);
            layer(&mut out, &format!("level{k}.encoder_mu"), &lp.encoder_mu);
            layer(&mut out, &format!("level{k}.encoder_logvar"), &lp.encoder_logvar);
            layer(&mut out, &format!("level{k}.detector.hidden"), &lp.detector.hidden);
            layer(&mut out, &format!("level{k}.detector.output"), &lp.detector.output);
        }
        layer(&mut out, "predictor.hidden", &self.predictor.hidden);
        layer(&mut out, "predictor.output", &self.predictor.output);
        out
    }

    /// Flattened detector parameters only.
    pub fn detector_tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.levels
            .iter_mut()
            .flat_map(|l| l.detector.tensors_mut())
            .collect()
    }
}

impl Parameters for IthpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = self.levels.iter().flat_map(|l| l.tensors()).collect();
        v.extend(self.predictor.tensors());
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = self.levels.iter_mut().flat_map(|l| l.tensors_mut()).collect();
        v.extend(self.predictor.tensors_mut());
        v
    }
}

/// What one level produced on a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelOutput {
    pub gaussian: DiagGaussian,
    pub z: Matrix,
    /// Detector output: logits for categorical detectors, the prediction itself
    /// for continuous ones.
    pub detector_pred: Matrix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelLoss {
    pub kl: f64,
    pub det: f64,
}

impl LevelLoss {
    pub fn contribution(&self, multiplier: f64) -> f64 {
        self.kl + multiplier * self.det
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub kl_terms: Vec<f64>,
    pub detector_terms: Vec<f64>,
    pub overall: f64,
    pub task_term: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
struct EncoderCache {
    pre_hidden: Matrix,
    hidden: Matrix,
    raw_log_var: Matrix,
}

fn encode_with_cache(p: &LevelParams, input: &Matrix) -> Result<(DiagGaussian, EncoderCache)> {
    let pre_hidden = p.encoder_l1.forward(input)?;
    let hidden = activation_forward(Activation::Relu, &pre_hidden);
    let mean = p.encoder_mu.forward(&hidden)?;
    let raw_log_var = p.encoder_logvar.forward(&hidden)?;
    let g = DiagGaussian::from_raw(mean, &raw_log_var)?;
    Ok((
        g,
        EncoderCache {
            pre_hidden,
            hidden,
            raw_log_var,
        },
    ))
}

/// `hidden = ReLU(W₁x + b₁)`, `μ = W_μ·hidden + b_μ`, `log σ² = clamp(W_σ·hidden + b_σ)`.
pub fn encode_level(p: &LevelParams, input: &Matrix) -> Result<DiagGaussian> {
    encode_with_cache(p, input).map(|(g, _)| g)
}

/// One standard-normal draw per sample and latent dimension, for every level.
pub fn draw_chain_noise<R: Rng + ?Sized>(cfg: &IthpConfig, rng: &mut R, n: usize) -> Vec<NoiseDraw> {
    cfg.latent_dims.iter().map(|&d| draw_noise(rng, n, d)).collect()
}

pub fn zero_chain_noise(cfg: &IthpConfig, n: usize) -> Vec<NoiseDraw> {
    cfg.latent_dims.iter().map(|&d| NoiseDraw::zeros(n, d)).collect()
}

#[derive(Debug, Clone)]
struct LevelCache {
    input: Matrix,
    enc: EncoderCache,
    det: MlpCache,
}

fn check_chain(cfg: &IthpConfig, params: &IthpParams, x0: &Matrix, noise: &[NoiseDraw]) -> Result<()> {
    if params.levels.len() != cfg.levels() {
        return Err(Error::dim("forward_chain levels", cfg.levels(), params.levels.len()));
    }
    if x0.cols() != cfg.modality_dims[0] {
        return Err(Error::dim("forward_chain x0 cols", cfg.modality_dims[0], x0.cols()));
    }
    if noise.len() != cfg.levels() {
        return Err(Error::dim("forward_chain noise levels", cfg.levels(), noise.len()));
    }
    Ok(())
}

fn forward_with_cache(
    cfg: &IthpConfig,
    params: &IthpParams,
    x0: &Matrix,
    noise: &[NoiseDraw],
) -> Result<(Vec<LevelOutput>, Vec<LevelCache>)> {
    check_chain(cfg, params, x0, noise)?;
    let mut outputs: Vec<LevelOutput> = Vec::with_capacity(cfg.levels());
    let mut caches = Vec::with_capacity(cfg.levels());
    for (k, lp) in params.levels.iter().enumerate() {
        let input = match outputs.last() {
            None => x0.clone(),
            Some(prev) => prev.z.clone(),
        };
        let (gaussian, enc) = encode_with_cache(lp, &input)?;
        let z = reparameterize(&gaussian, &noise[k])?;
        let (detector_pred, det) = lp.detector.forward(&z)?;
        outputs.push(LevelOutput {
            gaussian,
            z,
            detector_pred,
        });
        caches.push(LevelCache { input, enc, det });
    }
    Ok((outputs, caches))
}

/// Runs every level on `x0` with the given per-level noise (zero noise gives
/// the deterministic chain).
pub fn forward_chain(
    cfg: &IthpConfig,
    params: &IthpParams,
    x0: &Matrix,
    noise: &[NoiseDraw],
) -> Result<Vec<LevelOutput>> {
    forward_with_cache(cfg, params, x0, noise).map(|(o, _)| o)
}

fn validate_one_hot(target: &Matrix) -> Result<()> {
    for (r, row) in target.iter_rows().enumerate() {
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(Error::Target(format!("row {r} is not one-hot")));
        }
    }
    Ok(())
}

fn log_softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    logits.iter().map(|&l| l - lse).collect()
}

/// Batch-mean detector loss and its gradient with respect to the detector output.
fn detector_loss(pred: &Matrix, target: &Matrix, kind: DetectorKind) -> Result<(f64, Matrix)> {
    if pred.shape() != target.shape() {
        return Err(Error::dim("detector target cols", pred.cols(), target.cols()));
    }
    let n = pred.rows().max(1) as f64;
    let mut grad = Matrix::zeros(pred.rows(), pred.cols());
    let mut total = 0.0;
    match kind {
        DetectorKind::Continuous => {
            for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(target.data()) {
                let d = p - t;
                total += d * d;
                *g = 2.0 * d / n;
            }
        }
        DetectorKind::Categorical => {
            validate_one_hot(target)?;
            for r in 0..pred.rows() {
                let logp = log_softmax_row(pred.row(r));
                let t = target.row(r);
                total -= logp.iter().zip(t).map(|(lp, ti)| ti * lp).sum::<f64>();
                for (c, g) in grad.row_mut(r).iter_mut().enumerate() {
                    *g = (logp[c].exp() - t[c]) / n;
                }
            }
        }
    }
    Ok((total / n, grad))
}

/// KL of the level's latent to the prior and the batch-mean detector loss.
/// The level's contribution to the overall loss is `kl + multiplier · det`.
pub fn level_loss(out: &LevelOutput, target: &Matrix, kind: DetectorKind) -> Result<LevelLoss> {
    let (det, _) = detector_loss(&out.detector_pred, target, kind)?;
    Ok(LevelLoss {
        kl: kl_std_normal(&out.gaussian),
        det,
    })
}

/// `L₀ + Σ_k λ_k · L_{k+1}` with `L_k = kl_k + m_k · det_k`.
pub fn overall_loss(levels: &[LevelLoss], cfg: &IthpConfig) -> f64 {
    levels
        .iter()
        .enumerate()
        .map(|(k, l)| cfg.level_weight(k) * l.contribution(cfg.multiplier(k)))
        .sum()
}

pub fn total_loss(overall: f64, task: f64, cfg: &IthpConfig) -> f64 {
    cfg.overall_scale() * overall + cfg.alpha * task
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Batch-mean task loss on the predictor's single output column, with gradient.
pub(crate) fn task_loss(output: &Matrix, y: &[f64], kind: TaskKind) -> Result<(f64, Matrix)> {
    if output.rows() != y.len() {
        return Err(Error::dim("task labels", output.rows(), y.len()));
    }
    let n = y.len().max(1) as f64;
    let mut grad = Matrix::zeros(output.rows(), 1);
    let mut total = 0.0;
    for (r, &t) in y.iter().enumerate() {
        let o = output.get(r, 0);
        match kind {
            TaskKind::BinaryClassification => {
                // log(1 + e^o) - t·o, computed stably
                total += o.max(0.0) - o * t + (-o.abs()).exp().ln_1p();
                grad.set(r, 0, (sigmoid(o) - t) / n);
            }
            TaskKind::Regression => {
                let d = o - t;
                total += d * d;
                grad.set(r, 0, 2.0 * d / n);
            }
        }
    }
    Ok((total / n, grad))
}

/// Minibatch inputs for [`loss_and_grad`].
#[derive(Debug, Clone, Copy)]
pub struct Batch<'a> {
    pub x0: &'a Matrix,
    /// `X₁ … X_N`, the detector targets.
    pub targets: &'a [Matrix],
    pub labels: &'a [f64],
}

/// Evaluates the full training objective and its exact gradient with respect
/// to every parameter, for a fixed noise draw.
pub fn loss_and_grad(
    cfg: &IthpConfig,
    params: &IthpParams,
    batch: Batch<'_>,
    noise: &[NoiseDraw],
) -> Result<(LossBreakdown, IthpParams)> {
    if batch.targets.len() != cfg.levels() {
        return Err(Error::dim("detector targets", cfg.levels(), batch.targets.len()));
    }
    let (outputs, caches) = forward_with_cache(cfg, params, batch.x0, noise)?;

    let mut level_losses = Vec::with_capacity(cfg.levels());
    let mut det_grads = Vec::with_capacity(cfg.levels());
    for (k, out) in outputs.iter().enumerate() {
        out.gaussian.mean.check_finite(&format!("level{k}.mean"))?;
        out.detector_pred.check_finite(&format!("level{k}.detector"))?;
        let (det, g) = detector_loss(&out.detector_pred, &batch.targets[k], cfg.detector_kinds[k])?;
        level_losses.push(LevelLoss {
            kl: kl_std_normal(&out.gaussian),
            det,
        });
        det_grads.push(g);
    }
    let last = outputs.last().expect("at least one level");
    let (pred_out, pred_cache) = params.predictor.forward(&last.z)?;
    pred_out.check_finite("predictor")?;
    let (task, d_task_out) = task_loss(&pred_out, batch.labels, cfg.task_kind)?;

    let overall = overall_loss(&level_losses, cfg);
    let total = total_loss(overall, task, cfg);
    if !total.is_finite() {
        return Err(Error::NonFinite { node: "total".into() });
    }

    let scale = cfg.overall_scale();
    let mut grads = params.zeros_like();

    let d_task_out = d_task_out.map(|g| g * cfg.alpha);
    let (mut d_z, g_pred) = params.predictor.backward(&last.z, &pred_cache, &d_task_out);
    grads.predictor = g_pred;

    for k in (0..cfg.levels()).rev() {
        let lp = &params.levels[k];
        let out = &outputs[k];
        let cache = &caches[k];
        let w = scale * cfg.level_weight(k);

        let d_det = det_grads[k].map(|g| g * w * cfg.multiplier(k));
        let (d_z_det, g_det) = lp.detector.backward(&out.z, &cache.det, &d_det);
        d_z.add_assign(&d_z_det);

        let (mut d_mean, mut d_lv) = reparameterize_backward(&out.gaussian, &noise[k], &d_z);
        let (kl_mean, kl_lv) = kl_std_normal_backward(&out.gaussian, w);
        d_mean.add_assign(&kl_mean);
        d_lv.add_assign(&kl_lv);
        let d_raw_lv = clamp_backward(&cache.enc.raw_log_var, &d_lv);

        let (mut d_hidden, g_mu) = lp.encoder_mu.backward(&cache.enc.hidden, &d_mean);
        let (d_hidden_lv, g_lv) = lp.encoder_logvar.backward(&cache.enc.hidden, &d_raw_lv);
        d_hidden.add_assign(&d_hidden_lv);
        let d_pre = activation_backward(Activation::Relu, &cache.enc.pre_hidden, &d_hidden);
        let (d_input, g_l1) = lp.encoder_l1.backward(&cache.input, &d_pre);

        grads.levels[k] = LevelParams {
            encoder_l1: g_l1,
            encoder_mu: g_mu,
            encoder_logvar: g_lv,
            detector: g_det,
        };
        d_z = d_input;
    }

    for (name, _, t) in grads.named_tensors() {
        if t.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                node: format!("grad {name}"),
            });
        }
    }

    let breakdown = LossBreakdown {
        kl_terms: level_losses.iter().map(|l| l.kl).collect(),
        detector_terms: level_losses.iter().map(|l| l.det).collect(),
        overall,
        task_term: task,
        total,
    };
    Ok((breakdown, grads))
}

/// Loss only; same value as [`loss_and_grad`] without the backward pass.
pub fn loss(cfg: &IthpConfig, params: &IthpParams, batch: Batch<'_>, noise: &[NoiseDraw]) -> Result<LossBreakdown> {
    if batch.targets.len() != cfg.levels() {
        return Err(Error::dim("detector targets", cfg.levels(), batch.targets.len()));
    }
    let outputs = forward_chain(cfg, params, batch.x0, noise)?;
    let mut level_losses = Vec::with_capacity(outputs.len());
    for (k, out) in outputs.iter().enumerate() {
        level_losses.push(level_loss(out, &batch.targets[k], cfg.detector_kinds[k])?);
    }
    let (pred_out, _) = params.predictor.forward(&outputs.last().expect("levels").z)?;
    let (task, _) = task_loss(&pred_out, batch.labels, cfg.task_kind)?;
    let overall = overall_loss(&level_losses, cfg);
    Ok(LossBreakdown {
        kl_terms: level_losses.iter().map(|l| l.kl).collect(),
        detector_terms: level_losses.iter().map(|l| l.det).collect(),
        overall,
        task_term: task,
        total: total_loss(overall, task, cfg),
    })
}

/// Inference path: means instead of samples, no detectors. Binary tasks
/// return probabilities, regression tasks raw values.
pub fn predict(cfg: &IthpConfig, params: &IthpParams, x0: &Matrix) -> Result<Vec<f64>> {
    if x0.cols() != cfg.modality_dims[0] {
        return Err(Error::dim("predict x0 cols", cfg.modality_dims[0], x0.cols()));
    }
    if params.levels.len() != cfg.levels() {
        return Err(Error::dim("predict levels", cfg.levels(), params.levels.len()));
    }
    let mut h = x0.clone();
    for lp in &params.levels {
        h = encode_level(lp, &h)?.mean;
    }
    let (out, _) = params.predictor.forward(&h)?;
    Ok(out
        .data()
        .iter()
        .map(|&o| match cfg.task_kind {
            TaskKind::BinaryClassification => sigmoid(o),
            TaskKind::Regression => o,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_cfg(dims: Vec<usize>) -> IthpConfig {
        let levels = dims.len() - 1;
        let mut cfg = IthpConfig::with_multipliers(dims, 8.0, 32.0, 1.0);
        cfg.latent_dims = (0..levels).map(|k| 4 - k.min(2)).collect();
        cfg.hidden_dims = vec![5; levels];
        cfg.predictor_hidden = 3;
        cfg
    }

    fn zero_level(input: usize, hidden: usize, latent: usize, target: usize) -> LevelParams {
        LevelParams {
            encoder_l1: AffineLayer::zeros(input, hidden),
            encoder_mu: AffineLayer::zeros(hidden, latent),
            encoder_logvar: AffineLayer::zeros(hidden, latent),
            detector: TwoLayerMlp {
                hidden: AffineLayer::zeros(latent, hidden),
                output: AffineLayer::zeros(hidden, target),
                activation: Activation::Relu,
            },
        }
    }

    fn level_out(pred: Vec<f64>, cols: usize) -> LevelOutput {
        let g = DiagGaussian::new(Matrix::zeros(1, 2), Matrix::zeros(1, 2)).unwrap();
        LevelOutput {
            z: g.mean.clone(),
            gaussian: g,
            detector_pred: Matrix::from_vec(pred.len() / cols, cols, pred).unwrap(),
        }
    }

    #[test]
    fn zero_params_encode_to_prior() {
        let p = zero_level(3, 4, 2, 1);
        let x = Matrix::filled(4, 3, 0.7);
        let g = encode_level(&p, &x).unwrap();
        assert_eq!(g.mean, Matrix::zeros(4, 2));
        assert_eq!(g.log_var, Matrix::zeros(4, 2));
        assert_eq!(kl_std_normal(&g), 0.0);
    }

    #[test]
    fn encode_matches_hand_rolled_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let p = LevelParams::init(3, 4, 2, 2, &mut rng);
        let x = Matrix::from_rows(&[vec![0.2, -0.5, 1.1], vec![-1.0, 0.3, 0.0]]).unwrap();
        let g = encode_level(&p, &x).unwrap();
        for r in 0..2 {
            let hidden: Vec<f64> = (0..4)
                .map(|h| {
                    let s: f64 = (0..3).map(|i| p.encoder_l1.weights.get(h, i) * x.get(r, i)).sum::<f64>()
                        + p.encoder_l1.bias[h];
                    if s > 0.0 { s } else { 0.0 }
                })
                .collect();
            for d in 0..2 {
                let mu: f64 = (0..4).map(|h| p.encoder_mu.weights.get(d, h) * hidden[h]).sum::<f64>() + p.encoder_mu.bias[d];
                let lv: f64 = (0..4).map(|h| p.encoder_logvar.weights.get(d, h) * hidden[h]).sum::<f64>()
                    + p.encoder_logvar.bias[d];
                assert!((g.mean.get(r, d) - mu).abs() < 1e-12);
                assert!((g.log_var.get(r, d) - lv.clamp(-10.0, 10.0)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chain_has_one_level_per_secondary_modality() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dims in [vec![6, 3], vec![6, 3, 2]] {
            let cfg = small_cfg(dims.clone());
            let params = IthpParams::init(&cfg, &mut rng).unwrap();
            let x = Matrix::filled(4, 6, 0.1);
            let outs = forward_chain(&cfg, &params, &x, &zero_chain_noise(&cfg, 4)).unwrap();
            assert_eq!(outs.len(), dims.len() - 1);
            for (k, o) in outs.iter().enumerate() {
                assert_eq!(o.z.shape(), (4, cfg.latent_dims[k]));
                assert_eq!(o.detector_pred.cols(), dims[k + 1]);
            }
            let again = forward_chain(&cfg, &params, &x, &zero_chain_noise(&cfg, 4)).unwrap();
            assert_eq!(outs, again);
        }
    }

    #[test]
    fn level_loss_continuous_cases() {
        let out = level_out(vec![0.5, 0.5], 2);
        let t = Matrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap();
        let l = level_loss(&out, &t, DetectorKind::Continuous).unwrap();
        assert_eq!((l.kl, l.det, l.contribution(8.0)), (0.0, 0.0, 0.0));

        let t = Matrix::from_vec(1, 2, vec![1.5, -0.5]).unwrap();
        let l = level_loss(&out, &t, DetectorKind::Continuous).unwrap();
        assert!((l.det - 2.0).abs() < 1e-15);
    }

    #[test]
    fn level_loss_categorical_uniform_is_ln2() {
        let out = level_out(vec![0.0, 0.0], 2);
        let t = Matrix::from_vec(1, 2, vec![0.0, 1.0]).unwrap();
        let l = level_loss(&out, &t, DetectorKind::Categorical).unwrap();
        assert!((l.det - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn categorical_rejects_non_one_hot() {
        let out = level_out(vec![0.0, 0.0], 2);
        let t = Matrix::from_vec(1, 2, vec![0.5, 0.5]).unwrap();
        assert!(matches!(level_loss(&out, &t, DetectorKind::Categorical), Err(Error::Target(_))));
    }

    #[test]
    fn overall_loss_examples() {
        let flat = |v: f64| LevelLoss { kl: v, det: 0.0 };
        let mut cfg = IthpConfig::with_multipliers(vec![4, 3, 2], 8.0, 32.0, 1.0);
        assert!((overall_loss(&[flat(0.3), flat(0.7)], &cfg) - 1.0).abs() < 1e-15);
        cfg.lambdas = vec![2.0];
        assert!((overall_loss(&[flat(0.3), flat(0.7)], &cfg) - 1.7).abs() < 1e-15);

        let mut cfg = IthpConfig::with_multipliers(vec![4, 3, 2, 2], 8.0, 32.0, 1.0);
        cfg.lambdas = vec![0.5, 0.25];
        assert_eq!(overall_loss(&[flat(1.0), flat(2.0), flat(4.0)], &cfg), 3.0);
    }

    #[test]
    fn total_loss_examples() {
        let mut cfg = IthpConfig::sentiment_defaults(vec![4, 3, 2]);
        assert!((total_loss(4.0, 0.5, &cfg) - 0.7).abs() < 1e-15);
        cfg.alpha = 0.0;
        assert!((total_loss(4.0, 0.5, &cfg) - 0.2).abs() < 1e-15);
        let cfg = IthpConfig::sarcasm_defaults(vec![4, 3, 2]);
        assert!((cfg.overall_scale() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn predict_ignores_detectors_and_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let cfg = small_cfg(vec![5, 3, 2]);
        let mut params = IthpParams::init(&cfg, &mut rng).unwrap();
        let x = Matrix::from_vec(3, 5, (0..15).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let a = predict(&cfg, &params, &x).unwrap();
        assert_eq!(a, predict(&cfg, &params, &x).unwrap());
        for t in params.detector_tensors_mut() {
            for v in t.iter_mut() {
                *v = *v * -3.0 + 1.0;
            }
        }
        assert_eq!(a, predict(&cfg, &params, &x).unwrap());
        assert!(a.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg(vec![5, 3, 2]);
        assert!(cfg.validate().is_ok());
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg(vec![5, 3, 2]);
        cfg.gammas.push(1.0);
        assert!(cfg.validate().is_err());
        assert!(IthpConfig::with_multipliers(vec![5], 1.0, 1.0, 1.0).validate().is_err());
    }
}
