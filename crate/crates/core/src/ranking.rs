//! Ordering modalities by information richness.
//!
//! Two strategies are provided:
//!
//! - [`sample_entropy`] / [`rank_by_sampen`]: every sample (row) of a modality
//!   is read as a sequence over its features. For each position `i` the
//!   length-`m` template starting at `i` is compared with the template starting
//!   at `i + 1` only, not with every other template as in the classical
//!   time-series definition. Matches (Euclidean distance `< r`) are counted as
//!   `B`, and matches that persist when both templates are extended to length
//!   `m + 1` are counted as `A`. Counts are pooled over all rows before the
//!   score `−ln(A / B)` is taken, with `r = r_factor · std` of the whole matrix.
//! - [`greedy_rank`]: forward selection on a caller-supplied set function,
//!   which carries the `1 − 1/e` guarantee when that function is monotone
//!   submodular.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankMethod {
    Sampen,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub modality: usize,
    /// SampEn value, or the marginal improvement at selection time for greedy.
    pub score: f64,
    pub method: RankMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankedModalities {
    pub entries: Vec<RankedEntry>,
}

impl RankedModalities {
    pub fn order(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.modality).collect()
    }
}

/// Raw template-match counts; exposed so callers can inspect both terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchCounts {
    pub b: u64,
    pub a: u64,
}

fn population_std(data: &[f64]) -> f64 {
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn adjacent_distance(row: &[f64], i: usize, len: usize) -> f64 {
    row[i..i + len]
        .iter()
        .zip(&row[i + 1..i + 1 + len])
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Adjacent-template match counts pooled over every row.
pub fn match_counts(data: &Matrix, m: usize, r: f64) -> MatchCounts {
    let d = data.cols();
    let mut counts = MatchCounts { b: 0, a: 0 };
    if d < m + 1 {
        return counts;
    }
    for row in data.iter_rows() {
        for i in 0..d - m {
            if adjacent_distance(row, i, m) < r {
                counts.b += 1;
                if i + 1 < d - m && adjacent_distance(row, i, m + 1) < r {
                    counts.a += 1;
                }
            }
        }
    }
    counts
}

/// Sample entropy of a modality matrix.
///
/// Returns 0 for constant data and `+∞` when either count is zero.
pub fn sample_entropy(data: &Matrix, m: usize, r_factor: f64) -> Result<f64> {
    if m == 0 {
        return Err(Error::Config("embedding dimension must be >= 1".into()));
    }
    if data.cols() < m + 2 {
        return Err(Error::dim("sample_entropy feature count (min)", m + 2, data.cols()));
    }
    if data.rows() == 0 {
        return Err(Error::Empty("sample_entropy data"));
    }
    let std = population_std(data.data());
    if std == 0.0 {
        return Ok(0.0);
    }
    let counts = match_counts(data, m, r_factor * std);
    if counts.a == 0 || counts.b == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(-(counts.a as f64 / counts.b as f64).ln())
}

/// Descending by sample entropy (`m = 2`, `r = 0.2·std`); ties keep input order.
pub fn rank_by_sampen(modalities: &[Matrix]) -> Result<RankedModalities> {
    rank_by_sampen_with(modalities, 2, 0.2)
}

pub fn rank_by_sampen_with(modalities: &[Matrix], m: usize, r_factor: f64) -> Result<RankedModalities> {
    if modalities.is_empty() {
        return Err(Error::Empty("no modalities to rank"));
    }
    let mut entries = modalities
        .iter()
        .enumerate()
        .map(|(i, x)| {
            Ok(RankedEntry {
                modality: i,
                score: sample_entropy(x, m, r_factor)?,
                method: RankMethod::Sampen,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    // stable sort keeps input order among equal scores
    entries.sort_by(|a, b| b.score.total_cmp(&a.score));
    Ok(RankedModalities { entries })
}

/// Greedy forward selection over `modalities`.
///
/// At each round every unselected modality is scored by
/// `evaluate(S ∪ {x}) − evaluate(S)`; the first strict maximum is appended.
/// The loop stops early if no candidate produced an improvement above `−∞`.
pub fn greedy_rank<F>(modalities: &[usize], mut evaluate: F) -> Result<RankedModalities>
where
    F: FnMut(&[usize]) -> std::result::Result<f64, String>,
{
    let mut eval = |subset: &[usize]| {
        evaluate(subset).map_err(|message| Error::Evaluate {
            subset: subset.to_vec(),
            message,
        })
    };
    let mut selected: Vec<usize> = Vec::with_capacity(modalities.len());
    let mut entries = Vec::with_capacity(modalities.len());
    while selected.len() < modalities.len() {
        let base = eval(&selected)?;
        let mut best: Option<(usize, f64)> = None;
        let mut best_improvement = f64::NEG_INFINITY;
        for &candidate in modalities.iter().filter(|m| !selected.contains(m)) {
            let mut with = selected.clone();
            with.push(candidate);
            let improvement = eval(&with)? - base;
            if improvement > best_improvement {
                best_improvement = improvement;
                best = Some((candidate, improvement));
            }
        }
        let Some((modality, score)) = best else {
            break;
        };
        selected.push(modality);
        entries.push(RankedEntry {
            modality,
            score,
            method: RankMethod::Greedy,
        });
    }
    Ok(RankedModalities { entries })
}
