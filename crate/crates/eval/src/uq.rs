use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{EvalError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UqBin {
    /// Smallest and largest predictive std in the bin.
    pub lower: f64,
    pub upper: f64,
    pub mean_std: f64,
    pub mean_abs_error: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UqReport {
    pub bins: Vec<UqBin>,
    /// Spearman rank correlation between std and absolute error.
    pub spearman: f64,
    /// Two-sided p-value of the rank correlation (t approximation).
    pub p_value: f64,
    pub n: usize,
}

/// Average ranks (1-based), ties sharing the mean of their positions.
pub fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxx > 0.0 && syy > 0.0).then(|| (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Two-sided p-value for a correlation `r` from `n` pairs.
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    2.0 * dist.sf(t.abs())
}

/// Equal-count bins by predictive std with the mean absolute error per bin.
pub fn uncertainty_error_bins(step_std: &[f64], abs_err: &[f64], bins: usize) -> Result<UqReport> {
    if step_std.len() != abs_err.len() {
        return Err(EvalError::Shape(format!("{} std values, {} errors", step_std.len(), abs_err.len())));
    }
    if bins < 2 {
        return Err(EvalError::Config("at least two bins are required".into()));
    }
    let n = step_std.len();
    if n < bins.max(3) {
        return Err(EvalError::InsufficientData(format!("{n} samples for {bins} bins")));
    }
    if step_std.iter().chain(abs_err).any(|v| !v.is_finite() || *v < 0.0) {
        return Err(EvalError::InsufficientData("std and errors must be finite and non-negative".into()));
    }
    let rho = spearman(step_std, abs_err).ok_or_else(|| {
        EvalError::InsufficientData("predictive std or error is constant; quantile bins are undefined".into())
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| step_std[a].total_cmp(&step_std[b]).then(a.cmp(&b)));
    let bins = (0..bins)
        .map(|b| {
            let members = &order[b * n / bins..(b + 1) * n / bins];
            let m = members.len() as f64;
            UqBin {
                lower: step_std[members[0]],
                upper: step_std[members[members.len() - 1]],
                mean_std: members.iter().map(|&i| step_std[i]).sum::<f64>() / m,
                mean_abs_error: members.iter().map(|&i| abs_err[i]).sum::<f64>() / m,
                count: members.len(),
            }
        })
        .collect();
    Ok(UqReport { bins, spearman: rho, p_value: correlation_p_value(rho, n), n })
}
