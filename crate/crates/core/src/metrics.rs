//! Classification and regression scores.
//!
//! Per-class rates with a zero denominator are taken as 0 before weighting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One-vs-rest counts for every class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: Vec<u64>,
    pub fp: Vec<u64>,
    pub fn_: Vec<u64>,
    pub tn: Vec<u64>,
}

impl ConfusionCounts {
    pub fn from_predictions(preds: &[usize], labels: &[usize], n_classes: usize) -> Result<Self> {
        check_len(preds.len(), labels.len())?;
        let mut c = ConfusionCounts {
            tp: vec![0; n_classes],
            fp: vec![0; n_classes],
            fn_: vec![0; n_classes],
            tn: vec![0; n_classes],
        };
        for (&p, &t) in preds.iter().zip(labels) {
            if p >= n_classes || t >= n_classes {
                return Err(Error::Config(format!("class index out of range: {p}/{t} with {n_classes} classes")));
            }
            for k in 0..n_classes {
                match (p == k, t == k) {
                    (true, true) => c.tp[k] += 1,
                    (true, false) => c.fp[k] += 1,
                    (false, true) => c.fn_[k] += 1,
                    (false, false) => c.tn[k] += 1,
                }
            }
        }
        Ok(c)
    }

    /// Binary counts given the positive class's TP/FP/FN/TN.
    pub fn binary(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionCounts {
            tp: vec![tn, tp],
            fp: vec![fn_, fp],
            fn_: vec![fp, fn_],
            tn: vec![tp, tn],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.tp.len()
    }

    /// True instances of class `k`.
    pub fn support(&self, k: usize) -> u64 {
        self.tp[k] + self.fn_[k]
    }

    pub fn total(&self) -> u64 {
        (0..self.n_classes()).map(|k| self.support(k)).sum()
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPrf {
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

/// Support-weighted precision, recall and F-score.
pub fn weighted_prf(c: &ConfusionCounts) -> Result<WeightedPrf> {
    let total = c.total();
    if total == 0 {
        return Err(Error::Empty("confusion counts have no support"));
    }
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for k in 0..c.n_classes() {
        let s = c.support(k) as f64;
        let pk = ratio(c.tp[k], c.tp[k] + c.fp[k]);
        let rk = ratio(c.tp[k], c.tp[k] + c.fn_[k]);
        p += s * pk;
        r += s * rk;
        f += s * harmonic(pk, rk);
    }
    let t = total as f64;
    Ok(WeightedPrf {
        precision: p / t,
        recall: r / t,
        fscore: f / t,
    })
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::dim("metric inputs", a, b));
    }
    Ok(())
}

fn check_nonempty(a: usize, b: usize) -> Result<()> {
    check_len(a, b)?;
    if a == 0 {
        return Err(Error::Empty("metric inputs"));
    }
    Ok(())
}

/// `(TP + TN) / total` for 0/1 predictions and labels.
pub fn binary_accuracy(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_nonempty(preds.len(), labels.len())?;
    let correct = preds.iter().zip(labels).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / preds.len() as f64)
}

/// F1 of the positive class (label 1).
pub fn f1_binary(preds: &[usize], labels: &[usize]) -> Result<f64> {
    check_len(preds.len(), labels.len())?;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &t) in preds.iter().zip(labels) {
        match (p == 1, t == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    Ok(harmonic(ratio(tp, tp + fp), ratio(tp, tp + fn_)))
}

pub fn mae(preds: &[f64], targets: &[f64]) -> Result<f64> {
    check_nonempty(preds.len(), targets.len())?;
    Ok(preds.iter().zip(targets).map(|(p, t)| (p - t).abs()).sum::<f64>() / preds.len() as f64)
}

pub fn pearson_corr(x: &[f64], y: &[f64]) -> Result<f64> {
    check_len(x.len(), y.len())?;
    if x.len() < 2 {
        return Err(Error::Empty("pearson_corr needs at least 2 points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate("pearson_corr input has zero variance".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinaryScores {
    pub accuracy: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionScores {
    pub mae: f64,
    pub corr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weighted: Option<WeightedPrf>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub binary: Option<BinaryScores>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regression: Option<RegressionScores>,
}

impl MetricReport {
    /// Classification report from predicted and true 0/1 labels.
    pub fn classification(preds: &[usize], labels: &[usize]) -> Result<Self> {
        let counts = ConfusionCounts::from_predictions(preds, labels, 2)?;
        Ok(MetricReport {
            weighted: Some(weighted_prf(&counts)?),
            binary: Some(BinaryScores {
                accuracy: binary_accuracy(preds, labels)?,
                f1: f1_binary(preds, labels)?,
            }),
            regression: None,
        })
    }

    /// Regression report; binary scores compare signs (`≥ 0` is positive).
    pub fn regression(preds: &[f64], targets: &[f64]) -> Result<Self> {
        let to_class = |v: &[f64]| v.iter().map(|&x| usize::from(x >= 0.0)).collect::<Vec<_>>();
        let (pc, tc) = (to_class(preds), to_class(targets));
        let corr = pearson_corr(preds, targets).unwrap_or(0.0);
        Ok(MetricReport {
            weighted: None,
            binary: Some(BinaryScores {
                accuracy: binary_accuracy(&pc, &tc)?,
                f1: f1_binary(&pc, &tc)?,
            }),
            regression: Some(RegressionScores {
                mae: mae(preds, targets)?,
                corr,
            }),
        })
    }

    /// Field-wise mean of per-fold reports; a field is kept only when every report has it.
    pub fn mean(reports: &[MetricReport]) -> Result<MetricReport> {
        if reports.is_empty() {
            return Err(Error::Empty("no reports to average"));
        }
        let n = reports.len() as f64;
        let avg = |f: &dyn Fn(&MetricReport) -> Option<f64>| -> Option<f64> {
            reports.iter().map(f).sum::<Option<f64>>().map(|s| s / n)
        };
        let weighted = match (
            avg(&|r| r.weighted.map(|w| w.precision)),
            avg(&|r| r.weighted.map(|w| w.recall)),
            avg(&|r| r.weighted.map(|w| w.fscore)),
        ) {
            (Some(precision), Some(recall), Some(fscore)) => Some(WeightedPrf { precision, recall, fscore }),
            _ => None,
        };
        let binary = match (avg(&|r| r.binary.map(|b| b.accuracy)), avg(&|r| r.binary.map(|b| b.f1))) {
            (Some(accuracy), Some(f1)) => Some(BinaryScores { accuracy, f1 }),
            _ => None,
        };
        let regression = match (avg(&|r| r.regression.map(|b| b.mae)), avg(&|r| r.regression.map(|b| b.corr))) {
            (Some(mae), Some(corr)) => Some(RegressionScores { mae, corr }),
            _ => None,
        };
        Ok(MetricReport { weighted, binary, regression })
    }

    /// `(column, value)` pairs for every present metric, in a fixed order.
    pub fn columns(&self) -> Vec<(&'static str, f64)> {
        let mut out = Vec::new();
        if let Some(w) = self.weighted {
            out.extend([("precision", w.precision), ("recall", w.recall), ("fscore", w.fscore)]);
        }
        if let Some(b) = self.binary {
            out.extend([("accuracy", b.accuracy), ("f1", b.f1)]);
        }
        if let Some(r) = self.regression {
            out.extend([("mae", r.mae), ("corr", r.corr)]);
        }
        out
    }

    /// Header line and one data line.
    pub fn to_csv(&self) -> String {
        let cols = self.columns();
        let header: Vec<&str> = cols.iter().map(|(k, _)| *k).collect();
        let values: Vec<String> = cols.iter().map(|(_, v)| v.to_string()).collect();
        format!("{}\n{}\n", header.join(","), values.join(","))
    }
}
