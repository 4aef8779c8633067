//! Metric summaries per model and their CSV files.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::harness::Predictions;
use crate::metrics::{drift_curve, horizon_rmse, weighted_score, Summary, WeightProfile};
use crate::sweep::SweepRecord;
use crate::uq::UqReport;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub name: String,
    pub rows: usize,
    pub drift: Vec<f64>,
    pub rmse: Vec<(usize, Summary)>,
    pub scores: Vec<(WeightProfile, f64)>,
}

impl ModelReport {
    pub fn compute(name: &str, p: &Predictions, ks: &[usize], profiles: &[WeightProfile]) -> Result<Self> {
        let drift = drift_curve(&p.truth, &p.mean)?;
        let rmse =
            ks.iter().map(|&k| Ok((k, Summary::of(&horizon_rmse(&p.truth, &p.mean, k)?)?))).collect::<Result<_>>()?;
        let scores = profiles.iter().map(|&w| (w, weighted_score(&drift, w))).collect();
        Ok(Self { name: name.to_string(), rows: p.rows(), drift, rmse, scores })
    }

    pub fn drift_mean(&self) -> f64 {
        weighted_score(&self.drift, WeightProfile::Unweighted)
    }
}

fn summary_fields(s: &Summary) -> [String; 5] {
    [s.median, s.q25, s.q75, s.q2_5, s.q97_5].map(|v| v.to_string())
}

const SUMMARY_HEADER: [&str; 5] = ["median", "q25", "q75", "q2_5", "q97_5"];

/// `rmse_K{k}.csv` for every K, one row per model.
pub fn write_rmse(dir: &Path, reports: &[ModelReport]) -> Result<()> {
    let Some(first) = reports.first() else { return Ok(()) };
    for (idx, &(k, _)) in first.rmse.iter().enumerate() {
        let mut w = csv::Writer::from_path(dir.join(format!("rmse_K{k}.csv")))?;
        let mut header = vec!["model"];
        header.extend(SUMMARY_HEADER);
        w.write_record(&header)?;
        for r in reports {
            let mut row = vec![r.name.clone()];
            row.extend(summary_fields(&r.rmse[idx].1));
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(())
}

/// `drift.csv`: one row per step, one column per model.
pub fn write_drift(dir: &Path, reports: &[ModelReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("drift.csv"))?;
    let mut header = vec!["step".to_string()];
    header.extend(reports.iter().map(|r| r.name.clone()));
    w.write_record(&header)?;
    let h = reports.first().map_or(0, |r| r.drift.len());
    for j in 0..h {
        let mut row = vec![(j + 1).to_string()];
        row.extend(reports.iter().map(|r| r.drift[j].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `scores.csv`: one row per model, one column per weight profile.
pub fn write_scores(dir: &Path, reports: &[ModelReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("scores.csv"))?;
    let mut header = vec!["model".to_string()];
    if let Some(r) = reports.first() {
        header.extend(r.scores.iter().map(|(p, _)| p.label()));
    }
    w.write_record(&header)?;
    for r in reports {
        let mut row = vec![r.name.clone()];
        row.extend(r.scores.iter().map(|(_, s)| s.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `uq_bins.csv` for every model with predictive spread.
pub fn write_uq(dir: &Path, reports: &[(String, UqReport)]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("uq_bins.csv"))?;
    w.write_record(["model", "bin", "lower", "upper", "mean_std", "mean_abs_error", "count", "spearman", "p_value"])?;
    for (model, report) in reports {
        for (i, b) in report.bins.iter().enumerate() {
            w.write_record([
                model.clone(),
                (i + 1).to_string(),
                b.lower.to_string(),
                b.upper.to_string(),
                b.mean_std.to_string(),
                b.mean_abs_error.to_string(),
                b.count.to_string(),
                report.spearman.to_string(),
                report.p_value.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `prior_sweep.csv`: one row per (prior, seed).
pub fn write_sweep(dir: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("prior_sweep.csv"))?;
    let mut header = vec!["prior_variance".to_string(), "seed".into(), "kl".into()];
    if let Some(r) = records.first() {
        for (k, _) in &r.rmse {
            header.extend(SUMMARY_HEADER.map(|s| format!("rmse_K{k}_{s}")));
        }
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.prior_variance.to_string(), r.seed.to_string(), r.kl.to_string()];
        for (_, s) in &r.rmse {
            row.extend(summary_fields(s));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
