//! The `ithp` command-line front end.
//!
//! Every subcommand writes `runspec.json` into its output directory. It holds
//! the exact argument vector plus the resolved configurations, and
//! `ithp replay <runspec.json>` re-executes it.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint;
use crate::data::{self, Dataset, Dtype, LabelKind, SynthSpec};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::model::{self, IthpConfig, IthpParams, TaskKind};
use crate::numerics::{Matrix, Parameters};
use crate::ranking::{self, RankedModalities};
use crate::train::{self, derive_seed, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "ithp", version, about = "Hierarchical information-bottleneck fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model; with --folds, run k-fold cross-validation instead.
    Train(TrainArgs),
    /// Score a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Order modalities by sample entropy or greedy selection.
    Rank(RankArgs),
    /// Train one model per grid cell and tabulate held-out metrics.
    Sweep(SweepArgs),
    /// Write a synthetic dataset as manifest plus files.
    Synth(SynthArgs),
    /// Time single-sample inference against a concatenation MLP.
    Bench(BenchArgs),
    /// Re-run the command recorded in a runspec.json.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
#[group(required = true, multiple = false)]
struct DataArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Synthetic spec: `default` or a JSON file.
    #[arg(long)]
    synth: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum TaskArg {
    Binary,
    Regression,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ModelArgs {
    #[arg(long)]
    beta: Option<f64>,
    /// One value per level after the first, comma separated; a single value is broadcast.
    #[arg(long, value_delimiter = ',')]
    gamma: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    latent_dims: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    hidden_dims: Option<Vec<usize>>,
    /// Defaults to the manifest's label kind (binary for synthetic data).
    #[arg(long, value_enum)]
    task: Option<TaskArg>,
    /// Modality order, e.g. the output of `rank`; prime modality first.
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Args, Serialize)]
struct OptimArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<usize>>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum MethodArg {
    Sampen,
    Greedy,
}

#[derive(Debug, Args, Serialize)]
struct RankArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Sampen)]
    method: MethodArg,
    /// Probe training settings for the greedy method.
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
enum GridArg {
    #[value(name = "beta,gamma")]
    BetaGamma,
    Latent,
}

#[derive(Debug, Args, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    optim: OptimArgs,
    #[arg(long, value_enum)]
    grid: GridArg,
    /// Run grid cells on all cores.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
enum FormatArg {
    Csv,
    F32,
}

#[derive(Debug, Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value = "default")]
    synth: String,
    #[arg(long, value_enum, default_value_t = FormatArg::F32)]
    format: FormatArg,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Trained checkpoint; freshly initialized parameters otherwise.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    calls: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct ReplayArgs {
    runspec: PathBuf,
    /// Write into this directory instead of the recorded one.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// What `runspec.json` records.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSpec {
    pub argv: Vec<String>,
    pub subcommand: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model: Option<IthpConfig>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub train: Option<TrainConfig>,
    pub args: serde_json::Value,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, &argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(&a, argv),
        Command::Eval(a) => cmd_eval(&a, argv),
        Command::Rank(a) => cmd_rank(&a, argv),
        Command::Sweep(a) => cmd_sweep(&a, argv),
        Command::Synth(a) => cmd_synth(&a, argv),
        Command::Bench(a) => cmd_bench(&a, argv),
        Command::Replay(a) => cmd_replay(&a),
    }
}

fn load_data(d: &DataArgs) -> Result<(Dataset, LabelKind)> {
    match (&d.manifest, &d.synth) {
        (Some(path), None) => {
            let (data, manifest) = data::load_dataset_with_manifest(path)?;
            Ok((data, manifest.labels.kind))
        }
        (None, Some(spec)) => Ok((data::synth_make(&SynthSpec::resolve(spec)?)?, LabelKind::Binary)),
        _ => Err(Error::Config("exactly one of --manifest and --synth is required".into())),
    }
}

fn apply_order(data: Dataset, order: &Option<Vec<usize>>) -> Result<Dataset> {
    match order {
        Some(o) => data.reorder(o),
        None => Ok(data),
    }
}

fn broadcast<T: Copy>(name: &str, values: &[T], len: usize) -> Result<Vec<T>> {
    match values.len() {
        n if n == len => Ok(values.to_vec()),
        1 => Ok(vec![values[0]; len]),
        n => Err(Error::Config(format!("--{name}: expected 1 or {len} values, got {n}"))),
    }
}

fn task_kind(m: &ModelArgs, labels: LabelKind) -> TaskKind {
    match (m.task, labels) {
        (Some(TaskArg::Binary), _) | (None, LabelKind::Binary) => TaskKind::BinaryClassification,
        (Some(TaskArg::Regression), _) | (None, LabelKind::Real) => TaskKind::Regression,
    }
}

/// Preset for the task kind, then any explicit overrides.
fn build_model_config(m: &ModelArgs, dims: Vec<usize>, task: TaskKind) -> Result<IthpConfig> {
    let mut cfg = match task {
        TaskKind::BinaryClassification => IthpConfig::sarcasm_defaults(dims),
        TaskKind::Regression => IthpConfig::sentiment_defaults(dims),
    };
    let levels = cfg.levels();
    if let Some(b) = m.beta {
        cfg.beta = b;
    }
    if let Some(g) = &m.gamma {
        cfg.gammas = broadcast("gamma", g, levels.saturating_sub(1))?;
    }
    if let Some(l) = &m.lambda {
        cfg.lambdas = broadcast("lambda", l, levels.saturating_sub(1))?;
    }
    if let Some(a) = m.alpha {
        cfg.alpha = a;
    }
    if let Some(d) = &m.latent_dims {
        cfg.latent_dims = broadcast("latent-dims", d, levels)?;
        if m.hidden_dims.is_none() {
            cfg.hidden_dims = cfg.latent_dims.iter().map(|d| 2 * d).collect();
        }
    }
    if let Some(h) = &m.hidden_dims {
        cfg.hidden_dims = broadcast("hidden-dims", h, levels)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn build_train_config(o: &OptimArgs, task: TaskKind) -> Result<TrainConfig> {
    let mut tc = match task {
        TaskKind::BinaryClassification => TrainConfig::sarcasm_defaults(),
        TaskKind::Regression => TrainConfig::sentiment_defaults(),
    };
    if let Some(e) = o.epochs {
        tc.epochs = e;
    }
    if let Some(b) = o.batch {
        tc.batch_size = b;
    }
    if let Some(lr) = o.lr {
        tc.learning_rate = lr;
    }
    tc.seed = o.seed;
    tc.validate()?;
    Ok(tc)
}

fn prepare_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::load(out, format!("cannot create output directory: {e}")))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn write_runspec<A: Serialize>(
    out: &Path,
    argv: &[String],
    subcommand: &str,
    model: Option<&IthpConfig>,
    train: Option<&TrainConfig>,
    args: &A,
) -> Result<()> {
    let spec = RunSpec {
        argv: argv.to_vec(),
        subcommand: subcommand.into(),
        model: model.cloned(),
        train: train.cloned(),
        args: serde_json::to_value(args)?,
    };
    write_json(&out.join("runspec.json"), &spec)
}

#[derive(Debug, Serialize)]
struct FoldMetrics {
    folds: Vec<MetricReport>,
    mean: MetricReport,
}

fn cmd_train(a: &TrainArgs, argv: &[String]) -> Result<()> {
    let (data, labels) = load_data(&a.data)?;
    let data = apply_order(data, &a.model.order)?;
    let task = task_kind(&a.model, labels);
    let cfg = build_model_config(&a.model, data.dims(), task)?;
    let tc = build_train_config(&a.optim, task)?;
    prepare_out(&a.out)?;
    write_runspec(&a.out, argv, "train", Some(&cfg), Some(&tc), a)?;

    match a.folds {
        None => {
            let (params, history) = train::fit(&cfg, &tc, &data)?;
            checkpoint::save(&a.out.join("checkpoint.ithp"), &cfg, Some(&tc), &params)?;
            fs::write(a.out.join("history.csv"), history.to_csv())?;
            let last = history.last().expect("epochs >= 1");
            println!("trained {} epochs, final mean loss {:.6}", history.len(), last.mean.total);
        }
        Some(k) => {
            let split = data::kfold(data.len(), k, derive_seed(tc.seed, 100))?;
            let mut reports = Vec::with_capacity(k);
            for f in 0..k {
                let (tr, te) = split.train_test(f);
                let fold_tc = TrainConfig {
                    seed: derive_seed(tc.seed, 200 + f as u64),
                    ..tc.clone()
                };
                let (params, history) = train::fit(&cfg, &fold_tc, &data.select(&tr))?;
                fs::write(a.out.join(format!("history_fold{f}.csv")), history.to_csv())?;
                let report = train::evaluate(&cfg, &params, &data.select(&te))?;
                println!("fold {f}: {}", summary(&report));
                reports.push(report);
            }
            let mean = MetricReport::mean(&reports)?;
            println!("mean: {}", summary(&mean));
            fs::write(a.out.join("metrics.csv"), mean.to_csv())?;
            write_json(&a.out.join("metrics.json"), &FoldMetrics { folds: reports, mean })?;
        }
    }
    Ok(())
}

fn summary(r: &MetricReport) -> String {
    r.columns()
        .iter()
        .map(|(k, v)| format!("{k}={v:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_eval(a: &EvalArgs, argv: &[String]) -> Result<()> {
    let ck = checkpoint::load(&a.checkpoint)?;
    let (data, _) = load_data(&a.data)?;
    let data = apply_order(data, &a.order)?;
    prepare_out(&a.out)?;
    write_runspec(&a.out, argv, "eval", Some(&ck.config), ck.train.as_ref(), a)?;
    let report = train::evaluate(&ck.config, &ck.params, &data)?;
    println!("{}", summary(&report));
    write_json(&a.out.join("metrics.json"), &report)?;
    fs::write(a.out.join("metrics.csv"), report.to_csv())?;
    Ok(())
}

fn cmd_rank(a: &RankArgs, argv: &[String]) -> Result<()> {
    let (data, labels) = load_data(&a.data)?;
    prepare_out(&a.out)?;
    let ranked = match a.method {
        MethodArg::Sampen => ranking::rank_by_sampen(&data.modalities)?,
        MethodArg::Greedy => {
            let task = match labels {
                LabelKind::Binary => TaskKind::BinaryClassification,
                LabelKind::Real => TaskKind::Regression,
            };
            let mut tc = build_train_config(&a.optim, task)?;
            if a.optim.epochs.is_none() {
                tc.epochs = 20;
            }
            greedy_probe_rank(&data, task, &tc)?
        }
    };
    write_runspec(&a.out, argv, "rank", None, None, a)?;
    write_json(&a.out.join("ranking.json"), &ranked)?;
    println!("order: {:?}", ranked.order());
    Ok(())
}

/// Greedy ranking scored by a held-out MLP probe on the concatenated subset:
/// accuracy for binary labels, negative MAE for real labels.
fn greedy_probe_rank(data: &Dataset, task: TaskKind, tc: &TrainConfig) -> Result<RankedModalities> {
    let split = data::kfold(data.len(), 5, derive_seed(tc.seed, 300))?;
    let (tr, te) = split.train_test(0);
    let (train_set, test_set) = (data.select(&tr), data.select(&te));
    let score = |r: &MetricReport| match task {
        TaskKind::BinaryClassification => r.binary.map(|b| b.accuracy).unwrap_or(0.0),
        TaskKind::Regression => -r.regression.map(|m| m.mae).unwrap_or(f64::INFINITY),
    };
    let ids: Vec<usize> = (0..data.modalities.len()).collect();
    ranking::greedy_rank(&ids, |subset| {
        if subset.is_empty() {
            let constant = match task {
                TaskKind::BinaryClassification => {
                    let pos = train_set.labels.iter().filter(|&&y| y >= 0.5).count() as f64 / train_set.len() as f64;
                    f64::from(u8::from(pos >= 0.5))
                }
                TaskKind::Regression => train_set.labels.iter().sum::<f64>() / train_set.len() as f64,
            };
            let preds = vec![constant; test_set.len()];
            let report = match task {
                TaskKind::BinaryClassification => MetricReport::classification(
                    &preds.iter().map(|&p| p as usize).collect::<Vec<_>>(),
                    &test_set.labels.iter().map(|&y| usize::from(y >= 0.5)).collect::<Vec<_>>(),
                ),
                TaskKind::Regression => MetricReport::regression(&preds, &test_set.labels),
            };
            return report.map(|r| score(&r)).map_err(|e| e.to_string());
        }
        let (probe, _) = train::fit_baseline(subset, 16, task, tc, &train_set).map_err(|e| e.to_string())?;
        probe.evaluate(&test_set).map(|r| score(&r)).map_err(|e| e.to_string())
    })
}

/// `(β, γ)` cells of the multiplier grid.
pub const BETA_GAMMA_GRID: [f64; 6] = [2.0, 4.0, 8.0, 16.0, 32.0, 64.0];
/// Latent sizes of the bottleneck-size grid; cells keep `B₁ ≤ B₀`.
pub const LATENT_GRID: [usize; 6] = [8, 16, 32, 64, 128, 256];

fn cmd_sweep(a: &SweepArgs, argv: &[String]) -> Result<()> {
    let (data, labels) = load_data(&a.data)?;
    let data = apply_order(data, &a.model.order)?;
    let task = task_kind(&a.model, labels);
    let base = build_model_config(&a.model, data.dims(), task)?;
    let tc = build_train_config(&a.optim, task)?;
    if base.levels() != 2 && a.grid == GridArg::Latent {
        return Err(Error::Config("the latent grid needs exactly three modalities".into()));
    }
    prepare_out(&a.out)?;
    write_runspec(&a.out, argv, "sweep", Some(&base), Some(&tc), a)?;

    let (keys, cells): ([&str; 2], Vec<IthpConfig>) = match a.grid {
        GridArg::BetaGamma => {
            let mut cells = Vec::new();
            for &b in &BETA_GAMMA_GRID {
                for &g in &BETA_GAMMA_GRID {
                    cells.push(IthpConfig {
                        beta: b,
                        gammas: vec![g; base.gammas.len()],
                        ..base.clone()
                    });
                }
            }
            (["beta", "gamma"], cells)
        }
        GridArg::Latent => {
            let mut cells = Vec::new();
            for &b0 in &LATENT_GRID {
                for &b1 in LATENT_GRID.iter().filter(|&&b1| b1 <= b0) {
                    cells.push(IthpConfig {
                        latent_dims: vec![b0, b1],
                        hidden_dims: vec![2 * b0, 2 * b1],
                        ..base.clone()
                    });
                }
            }
            (["latent0", "latent1"], cells)
        }
    };
    let split = data::kfold(data.len(), 5, derive_seed(tc.seed, 100))?;
    let (tr, te) = split.train_test(0);
    let (train_set, test_set) = (data.select(&tr), data.select(&te));
    let run_cell = |cfg: &IthpConfig| -> Result<MetricReport> {
        let (params, _) = train::fit(cfg, &tc, &train_set)?;
        train::evaluate(cfg, &params, &test_set)
    };
    let reports: Vec<MetricReport> = if a.parallel {
        cells.par_iter().map(run_cell).collect::<Result<_>>()?
    } else {
        cells.iter().map(run_cell).collect::<Result<_>>()?
    };

    let cell_keys = |cfg: &IthpConfig| -> [String; 2] {
        match a.grid {
            GridArg::BetaGamma => [cfg.beta.to_string(), cfg.gammas.first().copied().unwrap_or(0.0).to_string()],
            GridArg::Latent => [cfg.latent_dims[0].to_string(), cfg.latent_dims[1].to_string()],
        }
    };
    let mut w = csv::Writer::from_path(a.out.join("sweep.csv"))?;
    let mut header: Vec<String> = keys.iter().map(|s| s.to_string()).collect();
    header.extend(reports[0].columns().iter().map(|(k, _)| k.to_string()));
    w.write_record(&header)?;
    for (cfg, r) in cells.iter().zip(&reports) {
        let mut row: Vec<String> = cell_keys(cfg).to_vec();
        row.extend(r.columns().iter().map(|(_, v)| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    println!("{} cells written to {}", cells.len(), a.out.join("sweep.csv").display());
    Ok(())
}

fn cmd_synth(a: &SynthArgs, argv: &[String]) -> Result<()> {
    let spec = SynthSpec::resolve(&a.synth)?;
    let data = data::synth_make(&spec)?;
    prepare_out(&a.out)?;
    let dtype = match a.format {
        FormatArg::Csv => Dtype::Csv,
        FormatArg::F32 => Dtype::F32le,
    };
    let path = data::write_dataset(&data, &a.out, "synthetic", dtype, LabelKind::Binary)?;
    write_runspec(&a.out, argv, "synth", None, None, a)?;
    write_json(&a.out.join("synth_spec.json"), &spec)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Mean milliseconds per call of `f` over `calls` calls.
fn time_per_call(calls: usize, mut f: impl FnMut(usize) -> Result<()>) -> Result<f64> {
    let start = Instant::now();
    for i in 0..calls {
        f(i)?;
    }
    Ok(start.elapsed().as_secs_f64() * 1e3 / calls as f64)
}

#[derive(Debug, Serialize)]
struct BenchReport {
    calls: usize,
    ithp_ms_per_sample: f64,
    baseline_ms_per_sample: f64,
    ithp_params: usize,
    baseline_params: usize,
}

/// Errors unless predictions are bitwise unchanged after perturbing every detector weight.
pub fn assert_detectors_inactive(cfg: &IthpConfig, params: &IthpParams, x0: &Matrix) -> Result<()> {
    let before = model::predict(cfg, params, x0)?;
    let mut perturbed = params.clone();
    for t in perturbed.detector_tensors_mut() {
        t.iter_mut().for_each(|v| *v = *v * -3.0 + 1.0);
    }
    let after = model::predict(cfg, &perturbed, x0)?;
    let same = before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits());
    if same {
        Ok(())
    } else {
        Err(Error::Degenerate("predictions depend on detector parameters".into()))
    }
}

fn cmd_bench(a: &BenchArgs, argv: &[String]) -> Result<()> {
    if a.calls == 0 {
        return Err(Error::Config("--calls must be >= 1".into()));
    }
    let (data, labels) = load_data(&a.data)?;
    let data = apply_order(data, &a.model.order)?;
    let (cfg, params) = match &a.checkpoint {
        Some(path) => {
            let ck = checkpoint::load(path)?;
            (ck.config, ck.params)
        }
        None => {
            let cfg = build_model_config(&a.model, data.dims(), task_kind(&a.model, labels))?;
            let params = IthpParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(derive_seed(a.seed, 1)))?;
            (cfg, params)
        }
    };
    if data.dims() != cfg.modality_dims {
        return Err(Error::Config("dataset dims do not match the model".into()));
    }
    prepare_out(&a.out)?;
    write_runspec(&a.out, argv, "bench", Some(&cfg), None, a)?;
    assert_detectors_inactive(&cfg, &params, &data.modalities[0])?;

    let all: Vec<usize> = (0..data.modalities.len()).collect();
    let baseline = train::MlpBaseline {
        inputs: all.clone(),
        task_kind: cfg.task_kind,
        mlp: crate::numerics::TwoLayerMlp::glorot(
            data.dims().iter().sum(),
            cfg.predictor_hidden,
            1,
            &mut ChaCha8Rng::seed_from_u64(derive_seed(a.seed, 2)),
        ),
    };
    let n = data.len();
    let x0_rows: Vec<Matrix> = (0..n).map(|i| data.modalities[0].select_rows(&[i])).collect();
    let parts: Vec<&Matrix> = data.modalities.iter().collect();
    let concat = Matrix::hconcat(&parts)?;
    let concat_rows: Vec<Matrix> = (0..n).map(|i| concat.select_rows(&[i])).collect();

    let ithp_ms = time_per_call(a.calls, |i| model::predict(&cfg, &params, &x0_rows[i % n]).map(drop))?;
    let base_ms = time_per_call(a.calls, |i| baseline.predict_features(&concat_rows[i % n]).map(drop))?;
    let report = BenchReport {
        calls: a.calls,
        ithp_ms_per_sample: ithp_ms,
        baseline_ms_per_sample: base_ms,
        ithp_params: params.num_params(),
        baseline_params: baseline.mlp.num_params(),
    };
    println!(
        "ithp {:.5} ms/sample, concat MLP {:.5} ms/sample over {} calls",
        report.ithp_ms_per_sample, report.baseline_ms_per_sample, report.calls
    );
    write_json(&a.out.join("bench.json"), &report)
}

fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let text = fs::read_to_string(&a.runspec).map_err(|e| Error::load(&a.runspec, e.to_string()))?;
    let spec: RunSpec = serde_json::from_str(&text).map_err(|e| Error::load(&a.runspec, e.to_string()))?;
    let mut argv = spec.argv;
    if let Some(out) = &a.out {
        let out = out.to_string_lossy().into_owned();
        match argv.iter().position(|s| s == "--out") {
            Some(i) if i + 1 < argv.len() => argv[i + 1] = out,
            _ => {
                if let Some(i) = argv.iter().position(|s| s.starts_with("--out=")) {
                    argv[i] = format!("--out={out}");
                } else {
                    argv.extend(["--out".to_string(), out]);
                }
            }
        }
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| Error::Config(format!("recorded argv no longer parses: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(Error::Config("refusing to replay a replay".into()));
    }
    dispatch(cli.command, &argv)
}
