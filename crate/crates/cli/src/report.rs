//! Side-by-side comparison of filtering regimes on one detection set.

use cooclabel::cooccurrence::CooccurrenceMatrix;
use cooclabel::detections::DetectionSet;
use cooclabel::eval::{predictions_from_detections, Prediction, Protocol};
use cooclabel::pseudolabel::Labeler;
use cooclabel::{evaluate, Dataset, FilterConfig};
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct RegimeRow {
    pub regime: String,
    pub rho: Option<f64>,
    pub rho_co: Option<f64>,
    pub labels: usize,
    pub precision: f64,
    pub recall: f64,
    pub map_50: f64,
    pub map_sweep: f64,
}

fn score(regime: &str, rho: Option<f64>, rho_co: Option<f64>, preds: &[Prediction<f64>], gt: &Dataset) -> Result<RegimeRow, CliError> {
    let report = evaluate(preds, gt, &Protocol::default())?;
    Ok(RegimeRow {
        regime: regime.to_string(),
        rho,
        rho_co,
        labels: preds.len(),
        precision: report.pseudo.precision,
        recall: report.pseudo.recall,
        map_50: report.map_50,
        map_sweep: report.map_sweep,
    })
}

/// Unfiltered detections, then one-hot per `rho`, then co-occurrence per
/// (`rho`, `rho_co`).
pub fn regime_rows(
    set: &DetectionSet<f64>,
    matrix: &CooccurrenceMatrix<f64>,
    gt: &Dataset,
    rho_values: &[f64],
    rho_co_values: &[f64],
) -> Result<Vec<RegimeRow>, CliError> {
    let mut rows = vec![score("unfiltered", None, None, &predictions_from_detections(set)?, gt)?];
    for &rho in rho_values {
        let (labels, _) = Labeler::new(FilterConfig::one_hot(rho), None)?.label(set)?;
        let preds: Vec<_> = labels.iter().map(Prediction::from).collect();
        rows.push(score("one-hot", Some(rho), None, &preds, gt)?);
    }
    for &rho in rho_values {
        for &rho_co in rho_co_values {
            let (labels, _) = Labeler::new(FilterConfig::cooccurrence(rho, rho_co), Some(matrix))?.label(set)?;
            let preds: Vec<_> = labels.iter().map(Prediction::from).collect();
            rows.push(score("co-occurrence", Some(rho), Some(rho_co), &preds, gt)?);
        }
    }
    Ok(rows)
}

pub fn render_table(rows: &[RegimeRow]) -> String {
    let cell = |v: Option<f64>| v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "-".into());
    let mut out = format!(
        "{:<14} {:>5} {:>6} {:>7} {:>9} {:>7} {:>7} {:>13}\n",
        "regime", "rho", "rho_co", "labels", "precision", "recall", "mAP@.5", "mAP@[.5:.95]"
    );
    out.push_str(&"-".repeat(out.len() - 1));
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:>5} {:>6} {:>7} {:>9.4} {:>7.4} {:>7.4} {:>13.4}\n",
            r.regime,
            cell(r.rho),
            cell(r.rho_co),
            r.labels,
            r.precision,
            r.recall,
            r.map_50,
            r.map_sweep
        ));
    }
    out
}
