//! Minibatch training with Adam, evaluation, and a plain MLP baseline.
//!
//! All randomness in a run (initialization, shuffling, reparameterization
//! noise) is derived from the single `seed` in [`TrainConfig`], so a run is a
//! pure function of `(seed, configs, dataset)`.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::model::{self, Batch, IthpConfig, IthpParams, LossBreakdown, TaskKind};
use crate::numerics::{Matrix, Parameters, TwoLayerMlp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_eps")]
    pub adam_eps: f64,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 32,
            learning_rate: 1e-3,
            seed: 0,
            adam_beta1: default_beta1(),
            adam_beta2: default_beta2(),
            adam_eps: default_eps(),
        }
    }
}

impl TrainConfig {
    /// 200 epochs at `η = 10⁻³`.
    pub fn sarcasm_defaults() -> Self {
        TrainConfig {
            epochs: 200,
            ..Self::default()
        }
    }

    /// 40 epochs at `η = 10⁻⁵`.
    pub fn sentiment_defaults() -> Self {
        TrainConfig {
            epochs: 40,
            learning_rate: 1e-5,
            ..Self::default()
        }
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        let in_unit = |b: f64| (0.0..1.0).contains(&b);
        if !in_unit(self.adam_beta1) || !in_unit(self.adam_beta2) || !(self.adam_eps > 0.0) {
            return Err(Error::Config("Adam betas must lie in [0, 1) and eps must be > 0".into()));
        }
        Ok(())
    }
}

/// Independent sub-seed for one random stream of a run (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_INIT: u64 = 1;
const STREAM_SHUFFLE: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<P> {
    pub m: P,
    pub v: P,
    pub step: u64,
}

impl<P: Parameters> AdamState<P> {
    pub fn new(params: &P) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step<P: Parameters>(state: &mut AdamState<P>, params: &mut P, grads: &P, cfg: &TrainConfig) {
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let g_all = grads.tensors();
    let m_all = state.m.tensors_mut();
    let v_all = state.v.tensors_mut();
    for (((p, g), m), v) in params.tensors_mut().into_iter().zip(g_all).zip(m_all).zip(v_all) {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

/// Sample-weighted means of one epoch's minibatch losses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean: LossBreakdown,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub validation: Option<MetricReport>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// `epoch, mean_total, mean_overall, mean_task, kl0, det0, kl1, det1, …`,
    /// followed by `val_*` columns when validation snapshots were taken.
    pub fn to_csv(&self) -> String {
        let Some(first) = self.epochs.first() else {
            return String::new();
        };
        let levels = first.mean.kl_terms.len();
        let mut header = vec!["epoch".to_string(), "mean_total".into(), "mean_overall".into(), "mean_task".into()];
        for k in 0..levels {
            header.push(format!("kl{k}"));
            header.push(format!("det{k}"));
        }
        if let Some(v) = &first.validation {
            header.extend(v.columns().iter().map(|(name, _)| format!("val_{name}")));
        }
        let mut out = header.join(",");
        out.push('\n');
        for rec in &self.epochs {
            let b = &rec.mean;
            let mut row = vec![rec.epoch.to_string(), b.total.to_string(), b.overall.to_string(), b.task_term.to_string()];
            for (kl, det) in b.kl_terms.iter().zip(&b.detector_terms) {
                row.push(kl.to_string());
                row.push(det.to_string());
            }
            if let Some(v) = &rec.validation {
                row.extend(v.columns().iter().map(|(_, x)| x.to_string()));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

fn check_dataset(cfg: &IthpConfig, data: &Dataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::Empty("dataset has no samples"));
    }
    if data.dims() != cfg.modality_dims {
        return Err(Error::Config(format!(
            "dataset dims {:?} do not match config {:?}",
            data.dims(),
            cfg.modality_dims
        )));
    }
    Ok(())
}

fn accumulate(acc: &mut Option<LossBreakdown>, b: &LossBreakdown, w: f64) {
    let acc = acc.get_or_insert_with(|| LossBreakdown {
        kl_terms: vec![0.0; b.kl_terms.len()],
        detector_terms: vec![0.0; b.detector_terms.len()],
        overall: 0.0,
        task_term: 0.0,
        total: 0.0,
    });
    acc.kl_terms.iter_mut().zip(&b.kl_terms).for_each(|(a, x)| *a += w * x);
    acc.detector_terms.iter_mut().zip(&b.detector_terms).for_each(|(a, x)| *a += w * x);
    acc.overall += w * b.overall;
    acc.task_term += w * b.task_term;
    acc.total += w * b.total;
}

fn diverged(epoch: usize, step: usize, source: Error) -> Error {
    Error::Diverged {
        epoch,
        step,
        source: Box::new(source),
    }
}

/// Trains ITHP for a fixed epoch budget.
///
/// Each epoch visits every sample once in a freshly shuffled order, in
/// batches of `batch_size` with the final short batch kept.
pub fn fit(model_cfg: &IthpConfig, train_cfg: &TrainConfig, data: &Dataset) -> Result<(IthpParams, TrainHistory)> {
    fit_with_validation(model_cfg, train_cfg, data, None)
}

/// [`fit`] with a metric snapshot on `validation` after every epoch.
pub fn fit_with_validation(
    model_cfg: &IthpConfig,
    train_cfg: &TrainConfig,
    data: &Dataset,
    validation: Option<&Dataset>,
) -> Result<(IthpParams, TrainHistory)> {
    model_cfg.validate()?;
    train_cfg.validate()?;
    check_dataset(model_cfg, data)?;
    if let Some(v) = validation {
        check_dataset(model_cfg, v)?;
    }
    let seed = train_cfg.seed;
    let mut params = IthpParams::init(model_cfg, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT)))?;
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SHUFFLE));
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_NOISE));
    let mut adam = AdamState::new(&params);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..train_cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut acc = None;
        for (step, idx) in order.chunks(train_cfg.batch_size).enumerate() {
            let x0 = data.modalities[0].select_rows(idx);
            let targets: Vec<Matrix> = data.modalities[1..].iter().map(|m| m.select_rows(idx)).collect();
            let labels: Vec<f64> = idx.iter().map(|&i| data.labels[i]).collect();
            let noise = model::draw_chain_noise(model_cfg, &mut noise_rng, idx.len());
            let batch = Batch {
                x0: &x0,
                targets: &targets,
                labels: &labels,
            };
            let (breakdown, grads) = model::loss_and_grad(model_cfg, &params, batch, &noise).map_err(|e| match e {
                Error::NonFinite { .. } => diverged(epoch, step, e),
                other => other,
            })?;
            adam_step(&mut adam, &mut params, &grads, train_cfg);
            if !params.all_finite() {
                return Err(diverged(epoch, step, Error::NonFinite { node: "parameters".into() }));
            }
            accumulate(&mut acc, &breakdown, idx.len() as f64);
        }
        let mut mean = acc.expect("at least one batch");
        let n = data.len() as f64;
        mean.kl_terms.iter_mut().for_each(|x| *x /= n);
        mean.detector_terms.iter_mut().for_each(|x| *x /= n);
        mean.overall /= n;
        mean.task_term /= n;
        mean.total /= n;
        let validation = validation.map(|v| evaluate(model_cfg, &params, v)).transpose()?;
        history.epochs.push(EpochRecord {
            epoch,
            mean,
            validation,
        });
    }
    Ok((params, history))
}

fn report(task: TaskKind, preds: &[f64], labels: &[f64]) -> Result<MetricReport> {
    match task {
        TaskKind::BinaryClassification => {
            let p: Vec<usize> = preds.iter().map(|&x| usize::from(x >= 0.5)).collect();
            let t: Vec<usize> = labels.iter().map(|&y| usize::from(y >= 0.5)).collect();
            MetricReport::classification(&p, &t)
        }
        TaskKind::Regression => MetricReport::regression(preds, labels),
    }
}

/// Predicts every sample of `data` and scores the result. Binary tasks
/// threshold the probability at 0.5.
pub fn evaluate(cfg: &IthpConfig, params: &IthpParams, data: &Dataset) -> Result<MetricReport> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation dataset"));
    }
    let preds = model::predict(cfg, params, &data.modalities[0])?;
    report(cfg.task_kind, &preds, &data.labels)
}

/// Two-layer MLP on one modality or the concatenation of several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpBaseline {
    /// Dataset modality indices, concatenated in this order.
    pub inputs: Vec<usize>,
    pub task_kind: TaskKind,
    pub mlp: TwoLayerMlp,
}

impl MlpBaseline {
    fn features(&self, data: &Dataset) -> Result<Matrix> {
        let parts: Vec<&Matrix> = self
            .inputs
            .iter()
            .map(|&i| {
                data.modalities
                    .get(i)
                    .ok_or_else(|| Error::Config(format!("baseline input {i} out of range")))
            })
            .collect::<Result<_>>()?;
        Matrix::hconcat(&parts)
    }

    pub fn predict(&self, data: &Dataset) -> Result<Vec<f64>> {
        self.predict_features(&self.features(data)?)
    }

    /// Same output convention as [`model::predict`].
    pub fn predict_features(&self, x: &Matrix) -> Result<Vec<f64>> {
        let (out, _) = self.mlp.forward(x)?;
        Ok(out
            .data()
            .iter()
            .map(|&o| match self.task_kind {
                TaskKind::BinaryClassification => model::sigmoid(o),
                TaskKind::Regression => o,
            })
            .collect())
    }

    pub fn evaluate(&self, data: &Dataset) -> Result<MetricReport> {
        if data.is_empty() {
            return Err(Error::Empty("evaluation dataset"));
        }
        report(self.task_kind, &self.predict(data)?, &data.labels)
    }
}

/// Trains an [`MlpBaseline`] with the same batching, optimizer and seeding as [`fit`].
/// Returns the model and the per-epoch mean task loss.
pub fn fit_baseline(
    inputs: &[usize],
    hidden: usize,
    task_kind: TaskKind,
    train_cfg: &TrainConfig,
    data: &Dataset,
) -> Result<(MlpBaseline, Vec<f64>)> {
    train_cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("dataset has no samples"));
    }
    if inputs.is_empty() || hidden == 0 {
        return Err(Error::Config("baseline needs at least one input and a positive hidden width".into()));
    }
    let seed = train_cfg.seed;
    let probe = MlpBaseline {
        inputs: inputs.to_vec(),
        task_kind,
        mlp: TwoLayerMlp::glorot(1, 1, 1, &mut ChaCha8Rng::seed_from_u64(0)),
    };
    let x = probe.features(data)?;
    let mut model = MlpBaseline {
        mlp: TwoLayerMlp::glorot(x.cols(), hidden, 1, &mut ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_INIT))),
        ..probe
    };
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, STREAM_SHUFFLE));
    let mut adam = AdamState::new(&model.mlp);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut losses = Vec::with_capacity(train_cfg.epochs);
    for epoch in 0..train_cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        for (step, idx) in order.chunks(train_cfg.batch_size).enumerate() {
            let xb = x.select_rows(idx);
            let yb: Vec<f64> = idx.iter().map(|&i| data.labels[i]).collect();
            let (out, cache) = model.mlp.forward(&xb)?;
            let (loss, d_out) = model::task_loss(&out, &yb, task_kind)?;
            if !loss.is_finite() {
                return Err(diverged(epoch, step, Error::NonFinite { node: "baseline loss".into() }));
            }
            let (_, grads) = model.mlp.backward(&xb, &cache, &d_out);
            adam_step(&mut adam, &mut model.mlp, &grads, train_cfg);
            sum += loss * idx.len() as f64;
        }
        losses.push(sum / data.len() as f64);
    }
    Ok((model, losses))
}
