//! Weighted precision/recall/F-score and regression metrics on small inputs.
//!
//! cargo run --example metrics_report

use ithp::metrics::{self, ConfusionCounts, MetricReport};

fn main() -> ithp::Result<()> {
    let preds = [1, 1, 1, 0, 0, 0, 0, 0, 1, 0];
    let labels = [1, 1, 1, 0, 0, 0, 0, 0, 0, 1];
    let counts = ConfusionCounts::from_predictions(&preds, &labels, 2)?;
    let w = metrics::weighted_prf(&counts)?;
    println!("weighted P {:.3}  R {:.3}  F {:.3}", w.precision, w.recall, w.fscore);
    println!("{}", serde_json::to_string_pretty(&MetricReport::classification(&preds, &labels)?).unwrap());

    let y_hat = [0.4, -1.2, 2.0, 0.1, -0.3];
    let y = [0.6, -1.0, 1.5, -0.2, -0.1];
    println!("MAE {:.3}  Corr {:.3}", metrics::mae(&y_hat, &y)?, metrics::pearson_corr(&y_hat, &y)?);
    Ok(())
}
