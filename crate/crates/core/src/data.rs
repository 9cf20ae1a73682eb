//! Datasets of pre-extracted embeddings.
//!
//! A dataset on disk is a JSON manifest plus one file per modality and one
//! label file. Modality files are either header-less CSV or raw little-endian
//! `f32`, row-major, with the shape taken from the manifest. Relative paths in
//! the manifest are resolved against the manifest's directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    Csv,
    F32le,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelKind {
    Binary,
    Real,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalityEntry {
    pub id: String,
    pub dim: usize,
    pub file: PathBuf,
    pub dtype: Dtype,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub file: PathBuf,
    pub kind: LabelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub modalities: Vec<ModalityEntry>,
    pub labels: LabelEntry,
    pub sample_count: usize,
}

impl DatasetManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| Error::load(path, format!("invalid manifest: {e}")))?;
        if manifest.modalities.is_empty() {
            return Err(Error::load(path, "manifest lists no modalities"));
        }
        if let Some(m) = manifest.modalities.iter().find(|m| m.dim == 0) {
            return Err(Error::load(path, format!("modality {} has dim 0", m.id)));
        }
        Ok(manifest)
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modalities.iter().map(|m| m.dim).collect()
    }
}

/// Modality matrices in manifest order plus one label per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub modalities: Vec<Matrix>,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(modalities: Vec<Matrix>, labels: Vec<f64>) -> Result<Self> {
        if modalities.is_empty() {
            return Err(Error::Empty("dataset has no modalities"));
        }
        for m in &modalities {
            if m.rows() != labels.len() {
                return Err(Error::dim("dataset modality rows", labels.len(), m.rows()));
            }
        }
        if let Some(i) = labels.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFinite {
                node: format!("label {i}"),
            });
        }
        Ok(Dataset { modalities, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.modalities.iter().map(|m| m.cols()).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            modalities: self.modalities.iter().map(|m| m.select_rows(indices)).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    /// Reorders modalities, e.g. after ranking.
    pub fn reorder(&self, order: &[usize]) -> Result<Dataset> {
        let mut seen = vec![false; self.modalities.len()];
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::Config(format!("invalid modality order {order:?}")));
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config(format!("modality order {order:?} is incomplete")));
        }
        Ok(Dataset {
            modalities: order.iter().map(|&i| self.modalities[i].clone()).collect(),
            labels: self.labels.clone(),
        })
    }
}

fn resolve(base: &Path, file: &Path) -> PathBuf {
    if file.is_absolute() {
        file.to_path_buf()
    } else {
        base.join(file)
    }
}

fn read_csv_matrix(path: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::load(path, e.to_string()))?;
    let mut data = Vec::with_capacity(rows * cols);
    let mut count = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::load(path, format!("row {r}: {e}")))?;
        if record.len() != cols {
            return Err(Error::load(path, format!("row {r}: expected {cols} columns, found {}", record.len())));
        }
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::load(path, format!("row {r}: cannot parse {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::load(path, format!("row {r}: non-finite value")));
            }
            data.push(v);
        }
        count += 1;
    }
    if count != rows {
        return Err(Error::load(path, format!("expected {rows} rows, found {count}")));
    }
    Matrix::from_vec(rows, cols, data)
}

fn read_f32_matrix(path: &Path, rows: usize, cols: usize) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::load(path, e.to_string()))?;
    let expected = rows * cols * 4;
    if bytes.len() != expected {
        return Err(Error::load(
            path,
            format!("expected {expected} bytes for {rows}x{cols} f32, found {}", bytes.len()),
        ));
    }
    let data: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::load(path, format!("row {}: non-finite value", i / cols)));
    }
    Matrix::from_vec(rows, cols, data)
}

fn read_labels(path: &Path, rows: usize, kind: LabelKind) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
    let mut labels = Vec::with_capacity(rows);
    for (r, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: f64 = line
            .trim()
            .parse()
            .map_err(|_| Error::load(path, format!("row {r}: cannot parse {line:?}")))?;
        if !v.is_finite() {
            return Err(Error::load(path, format!("row {r}: non-finite label")));
        }
        if kind == LabelKind::Binary && v != 0.0 && v != 1.0 {
            return Err(Error::load(path, format!("row {r}: binary label must be 0 or 1, got {v}")));
        }
        labels.push(v);
    }
    if labels.len() != rows {
        return Err(Error::load(path, format!("expected {rows} labels, found {}", labels.len())));
    }
    Ok(labels)
}

pub fn load_dataset(manifest_path: &Path) -> Result<Dataset> {
    load_dataset_with_manifest(manifest_path).map(|(d, _)| d)
}

/// Loads the dataset and returns the parsed manifest alongside it.
/// Modality files are read in parallel.
pub fn load_dataset_with_manifest(manifest_path: &Path) -> Result<(Dataset, DatasetManifest)> {
    let manifest = DatasetManifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let n = manifest.sample_count;
    let modalities = manifest
        .modalities
        .par_iter()
        .map(|m| {
            let path = resolve(base, &m.file);
            match m.dtype {
                Dtype::Csv => read_csv_matrix(&path, n, m.dim),
                Dtype::F32le => read_f32_matrix(&path, n, m.dim),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = read_labels(&resolve(base, &manifest.labels.file), n, manifest.labels.kind)?;
    Ok((Dataset::new(modalities, labels)?, manifest))
}

fn write_matrix(path: &Path, m: &Matrix, dtype: Dtype) -> Result<()> {
    match dtype {
        Dtype::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
            for row in m.iter_rows() {
                w.write_record(row.iter().map(|v| v.to_string()))?;
            }
            w.flush()?;
        }
        Dtype::F32le => {
            let bytes: Vec<u8> = m.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
            fs::write(path, bytes)?;
        }
    }
    Ok(())
}

/// Writes `dataset` into `dir` as `manifest.json`, `modality{i}.{csv|f32}` and
/// `labels.txt`; returns the manifest path. The `f32` path rounds values to
/// single precision.
pub fn write_dataset(dataset: &Dataset, dir: &Path, name: &str, dtype: Dtype, label_kind: LabelKind) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let ext = match dtype {
        Dtype::Csv => "csv",
        Dtype::F32le => "f32",
    };
    let mut modalities = Vec::with_capacity(dataset.modalities.len());
    for (i, m) in dataset.modalities.iter().enumerate() {
        let file = PathBuf::from(format!("modality{i}.{ext}"));
        write_matrix(&dir.join(&file), m, dtype)?;
        modalities.push(ModalityEntry {
            id: format!("m{i}"),
            dim: m.cols(),
            file,
            dtype,
        });
    }
    let mut f = fs::File::create(dir.join("labels.txt"))?;
    for y in &dataset.labels {
        writeln!(f, "{y}")?;
    }
    let manifest = DatasetManifest {
        name: name.to_string(),
        modalities,
        labels: LabelEntry {
            file: PathBuf::from("labels.txt"),
            kind: label_kind,
        },
        sample_count: dataset.len(),
    };
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

/// `k` disjoint index lists covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
}

impl FoldSplit {
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    /// `(train, test)` indices with fold `i` held out.
    pub fn train_test(&self, i: usize) -> (Vec<usize>, Vec<usize>) {
        let train = self
            .folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        (train, self.folds[i].clone())
    }
}

/// Seeded shuffle, then contiguous chunks; the first `n mod k` folds get one extra sample.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!("k-fold needs k >= 2, got {k}")));
    }
    if n < k {
        return Err(Error::Config(format!("k-fold needs n >= k, got n={n}, k={k}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(idx[start..start + size].to_vec());
        start += size;
    }
    Ok(FoldSplit { folds })
}

/// Parameters of the planted-signal generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    /// Feature dims per modality, prime modality first.
    pub dims: Vec<usize>,
    pub signal_strength: f64,
    pub noise: f64,
    pub seed: u64,
}

const DEFAULT_SYNTH: &str = include_str!("../data/synth_default.json");

impl SynthSpec {
    /// The checked-in default: 2000 samples, dims 32/16/8.
    pub fn default_spec() -> Self {
        serde_json::from_str(DEFAULT_SYNTH).expect("bundled synth spec parses")
    }

    /// `"default"` or a path to a JSON spec.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        if name_or_path == "default" {
            return Ok(Self::default_spec());
        }
        let path = Path::new(name_or_path);
        let text = fs::read_to_string(path).map_err(|e| Error::load(path, e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| Error::load(path, format!("invalid synth spec: {e}")))
    }
}

/// Number of planted signal coordinates.
const SIGNAL_DIM: usize = PARITY_BITS + 1;
/// Number of signed coordinates whose sign parity is the label.
const PARITY_BITS: usize = 3;
/// Nuisance scale in the prime modality, relative to `noise`.
const PRIME_NUISANCE: f64 = 2.0;
/// Extra corruption of the product coordinate in the prime modality.
const PRIME_PRODUCT_NOISE: f64 = 3.0;
/// Noise on the two signal coordinates of the prime modality, relative to `noise`.
const PRIME_SIGNAL_NOISE: f64 = 0.15;

fn orthogonal<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Matrix {
    let mut q = Matrix::zeros(d, d);
    for r in 0..d {
        loop {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            for p in 0..r {
                let prev = q.row(p);
                let dot: f64 = v.iter().zip(prev).map(|(a, b)| a * b).sum();
                for (vi, pi) in v.iter_mut().zip(prev) {
                    *vi -= dot * pi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                q.row_mut(r).iter_mut().zip(&v).for_each(|(qi, vi)| *qi = vi / norm);
                break;
            }
        }
    }
    q
}

fn mix(q: &Matrix, raw: &[f64]) -> Vec<f64> {
    q.iter_rows().map(|row| row.iter().zip(raw).map(|(a, b)| a * b).sum()).collect()
}

/// Planted-signal three-(or more-)modality dataset.
///
/// The binary label picks one of two diagonal quadrant pairs for a 2-D signal
/// `s`, so the label is the sign of `s₁·s₂`. The signal features are
/// `(s₁, s₂, s₁s₂/a)` with `a = signal_strength`.
///
/// - Modality 0 holds the signal features plus nuisance coordinates, rotated by
///   a random orthogonal matrix. The product coordinate is heavily corrupted,
///   so with noise the label is mostly recoverable only through the XOR
///   structure of `s₁, s₂`.
/// - Modality `k ≥ 1` is a random linear projection of the signal features plus
///   noise whose scale grows with `k`, with its last quarter of columns pure
///   nuisance.
///
/// With `noise = 0` the prime modality takes four distinct values and the
/// product coordinate separates the classes linearly.
pub fn synth_make(spec: &SynthSpec) -> Result<Dataset> {
    if spec.dims.len() < 2 || spec.dims.contains(&0) {
        return Err(Error::Config(format!("synth dims must be >= 1 for at least 2 modalities, got {:?}", spec.dims)));
    }
    if spec.dims[0] < SIGNAL_DIM {
        return Err(Error::Config(format!("prime modality needs >= {SIGNAL_DIM} dims")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let a = spec.signal_strength;
    let d0 = spec.dims[0];
    let q0 = orthogonal(&mut rng, d0);
    let projections: Vec<Matrix> = spec.dims[1..]
        .iter()
        .map(|&d| {
            let data = (0..d * SIGNAL_DIM)
                .map(|_| rng.sample::<f64, _>(StandardNormal) / (SIGNAL_DIM as f64).sqrt())
                .collect();
            Matrix::from_vec(d, SIGNAL_DIM, data).expect("sized")
        })
        .collect();

    let mut labels = Vec::with_capacity(spec.n);
    let mut mods: Vec<Vec<f64>> = spec.dims.iter().map(|&d| Vec::with_capacity(spec.n * d)).collect();
    let normal = |rng: &mut ChaCha8Rng| rng.sample::<f64, _>(StandardNormal);
    for _ in 0..spec.n {
        let y = rng.random_bool(0.5);
        let mut signs = [1.0; PARITY_BITS];
        for sign in signs.iter_mut().skip(1) {
            *sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        }
        // the first sign fixes the parity: product of signs is +1 iff y
        let rest: f64 = signs[1..].iter().product();
        signs[0] = if y { rest } else { -rest };
        let mut signal = [0.0; SIGNAL_DIM];
        for (j, sign) in signs.iter().enumerate() {
            signal[j] = a * sign * (1.0 + 0.3 * spec.noise * normal(&mut rng).abs());
        }
        signal[PARITY_BITS] = if a > 0.0 {
            signal[..PARITY_BITS].iter().product::<f64>() / a.powi(PARITY_BITS as i32 - 1)
        } else {
            0.0
        };
        labels.push(f64::from(u8::from(y)));

        let mut raw = Vec::with_capacity(d0);
        for &v in &signal[..PARITY_BITS] {
            raw.push(v + PRIME_SIGNAL_NOISE * spec.noise * normal(&mut rng));
        }
        raw.push(signal[PARITY_BITS] + PRIME_PRODUCT_NOISE * spec.noise * normal(&mut rng));
        for _ in SIGNAL_DIM..d0 {
            raw.push(PRIME_NUISANCE * spec.noise * normal(&mut rng));
        }
        mods[0].extend(mix(&q0, &raw));

        for (k, proj) in projections.iter().enumerate() {
            let level = (k + 1) as f64;
            let d = proj.rows();
            let unique = d / 4;
            let clean = mix(proj, &signal);
            for (j, v) in clean.into_iter().enumerate() {
                let x = if j >= d - unique {
                    spec.noise * normal(&mut rng)
                } else {
                    v + 0.25 * level * spec.noise * normal(&mut rng)
                };
                mods[k + 1].push(x);
            }
        }
    }
    let modalities = mods
        .into_iter()
        .zip(&spec.dims)
        .map(|(data, &d)| Matrix::from_vec(spec.n, d, data))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(modalities, labels)
}
