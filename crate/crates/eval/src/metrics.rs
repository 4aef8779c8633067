use serde::{Deserialize, Serialize};
use statrs::statistics::{Data, OrderStatistics};

use crate::error::{EvalError, Result};
use crate::matrix::PredictionMatrix;

/// Per-row RMSE over the first `k` steps.
pub fn horizon_rmse(truth: &PredictionMatrix, pred: &PredictionMatrix, k: usize) -> Result<Vec<f64>> {
    truth.check_paired(pred)?;
    if k == 0 || k > truth.horizon() {
        return Err(EvalError::Shape(format!("K = {k} outside 1..={}", truth.horizon())));
    }
    Ok((0..truth.rows())
        .map(|i| {
            let sq: f64 = truth.row(i)[..k].iter().zip(&pred.row(i)[..k]).map(|(y, p)| (y - p).powi(2)).sum();
            (sq / k as f64).sqrt()
        })
        .collect())
}

/// RMSE across rows for every step of the horizon.
pub fn drift_curve(truth: &PredictionMatrix, pred: &PredictionMatrix) -> Result<Vec<f64>> {
    truth.check_paired(pred)?;
    let n = truth.rows() as f64;
    Ok((0..truth.horizon())
        .map(|j| {
            let sq: f64 = truth.column(j).zip(pred.column(j)).map(|(y, p)| (y - p).powi(2)).sum();
            (sq / n).sqrt()
        })
        .collect())
}

/// Step weights for summarizing a drift curve, normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightProfile {
    Unweighted,
    /// `w(j) ∝ H − j + 1`.
    Linear,
    /// `w(j) ∝ 1 / (1 + exp((j − midpoint) / steepness))`.
    Sigmoid {
        midpoint: f64,
        steepness: f64,
    },
}

impl WeightProfile {
    pub const SIGMOID: WeightProfile = WeightProfile::Sigmoid { midpoint: 12.0, steepness: 3.0 };

    /// Unweighted, linear and the default sigmoid.
    pub fn standard() -> [WeightProfile; 3] {
        [WeightProfile::Unweighted, WeightProfile::Linear, WeightProfile::SIGMOID]
    }

    pub fn label(&self) -> String {
        match self {
            WeightProfile::Unweighted => "unweighted".into(),
            WeightProfile::Linear => "linear".into(),
            WeightProfile::Sigmoid { midpoint, steepness } => format!("sigmoid(j0={midpoint};k={steepness})"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let WeightProfile::Sigmoid { midpoint, steepness } = self {
            if !(midpoint.is_finite() && *steepness > 0.0 && steepness.is_finite()) {
                return Err(EvalError::Config("sigmoid profile needs finite midpoint and positive steepness".into()));
            }
        }
        Ok(())
    }

    /// Weights for steps `j = 1..=h`.
    pub fn weights(&self, h: usize) -> Vec<f64> {
        let raw: Vec<f64> = (1..=h)
            .map(|j| match self {
                WeightProfile::Unweighted => 1.0,
                WeightProfile::Linear => (h - j + 1) as f64,
                WeightProfile::Sigmoid { midpoint, steepness } => {
                    1.0 / (1.0 + ((j as f64 - midpoint) / steepness).exp())
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / total).collect()
    }
}

pub fn weighted_score(drift: &[f64], profile: WeightProfile) -> f64 {
    profile.weights(drift.len()).iter().zip(drift).map(|(w, d)| w * d).sum()
}

/// Median and central 50% / 95% intervals of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub q2_5: f64,
    pub q97_5: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::InsufficientData("summary needs finite values".into()));
        }
        let mut d = Data::new(values.to_vec());
        Ok(Self {
            median: d.quantile(0.5),
            q25: d.quantile(0.25),
            q75: d.quantile(0.75),
            q2_5: d.quantile(0.025),
            q97_5: d.quantile(0.975),
        })
    }
}
