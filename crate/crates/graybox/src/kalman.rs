//! Scalar-state Kalman filter and Rauch–Tung–Striebel smoother.
//!
//! The chain is `x_0 ~ N(m0, v0)`, `x_t = a x_{t-1} + u_t + w_t` with
//! `w_t ~ N(0, q)`, and each step may carry one Gaussian evidence factor
//! `N(z_t | x_t, r_t)`.

use serde::{Deserialize, Serialize};

use crate::error::{GrayboxError, Result};
use crate::model::{InputRow, LssmParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gaussian {
    pub mean: f64,
    pub variance: f64,
}

impl Gaussian {
    pub fn new(mean: f64, variance: f64) -> Self {
        Self { mean, variance }
    }

    pub fn second_moment(&self) -> f64 {
        self.variance + self.mean * self.mean
    }

    pub fn std(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Evidence about `x_t`: a value and its noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub value: f64,
    pub variance: f64,
}

/// Generic chain description used by both the public filter and the
/// variational state update.
#[derive(Debug, Clone)]
pub(crate) struct Chain<'a> {
    pub transition: f64,
    /// `u_t`; entry 0 is unused.
    pub offsets: &'a [f64],
    pub process_var: f64,
    pub prior: Gaussian,
    pub evidence: &'a [Option<Evidence>],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// One-step predictions `p(x_t | z_<t)`; entry 0 is the prior.
    pub predicted: Vec<Gaussian>,
    /// `p(x_t | z_<=t)`.
    pub filtered: Vec<Gaussian>,
    /// `log p(z_0..z_{T-1})`.
    pub log_likelihood: f64,
    pub transition: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherOutput {
    pub smoothed: Vec<Gaussian>,
    /// `Cov(x_t, x_{t-1} | all evidence)`; entry 0 is zero.
    pub cross_cov: Vec<f64>,
}

fn check_var(v: f64, what: &str, t: usize) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GrayboxError::Numerical(format!("{what} variance {v} at step {t}")))
    }
}

pub(crate) fn filter_chain(chain: &Chain<'_>) -> Result<FilterOutput> {
    let n = chain.evidence.len();
    debug_assert_eq!(chain.offsets.len(), n);
    let mut predicted = Vec::with_capacity(n);
    let mut filtered = Vec::with_capacity(n);
    let mut loglik = 0.0;
    let mut cur = chain.prior;
    for t in 0..n {
        let pred = if t == 0 {
            chain.prior
        } else {
            Gaussian::new(
                chain.transition * cur.mean + chain.offsets[t],
                chain.transition * chain.transition * cur.variance + chain.process_var,
            )
        };
        check_var(pred.variance, "predicted", t)?;
        predicted.push(pred);
        cur = match chain.evidence[t] {
            Some(ev) => {
                let s = pred.variance + ev.variance;
                let k = pred.variance / s;
                let resid = ev.value - pred.mean;
                loglik += -0.5 * ((2.0 * std::f64::consts::PI * s).ln() + resid * resid / s);
                // Joseph-free scalar form: P (1 - K) = P r / (P + r)
                Gaussian::new(pred.mean + k * resid, pred.variance * ev.variance / s)
            }
            None => pred,
        };
        check_var(cur.variance, "filtered", t)?;
        filtered.push(cur);
    }
    Ok(FilterOutput { predicted, filtered, log_likelihood: loglik, transition: chain.transition })
}

pub(crate) fn smooth_chain(f: &FilterOutput) -> Result<SmootherOutput> {
    let n = f.filtered.len();
    let mut smoothed = f.filtered.clone();
    let mut cross_cov = vec![0.0; n];
    for t in (0..n.saturating_sub(1)).rev() {
        let pred_next = f.predicted[t + 1];
        let filt = f.filtered[t];
        let gain = filt.variance * f.transition / pred_next.variance;
        let next = smoothed[t + 1];
        let mean = filt.mean + gain * (next.mean - pred_next.mean);
        let variance = filt.variance + gain * gain * (next.variance - pred_next.variance);
        check_var(variance, "smoothed", t)?;
        smoothed[t] = Gaussian::new(mean, variance);
        cross_cov[t + 1] = gain * next.variance;
    }
    Ok(SmootherOutput { smoothed, cross_cov })
}

/// Offsets `u_t = θ1 T_sup + θ2 T_out + θ3 Φ + ψ(slot)` for every row.
pub(crate) fn offsets_for(inputs: &[InputRow], params: &LssmParams) -> Vec<f64> {
    inputs.iter().map(|row| params.drive(row)).collect()
}

/// Filter the observed indoor temperature sequence under point parameters.
/// Missing observations skip the update step.
pub fn kalman_filter(observations: &[Option<f64>], inputs: &[InputRow], params: &LssmParams) -> Result<FilterOutput> {
    if observations.len() != inputs.len() {
        return Err(GrayboxError::Input(format!(
            "{} observations but {} input rows",
            observations.len(),
            inputs.len()
        )));
    }
    params.validate()?;
    let a = params.transition();
    if !(a > -1.0 && a < 1.0) {
        return Err(GrayboxError::Input(format!("transition coefficient {a} outside (-1, 1)")));
    }
    let offsets = offsets_for(inputs, params);
    let evidence: Vec<Option<Evidence>> =
        observations.iter().map(|o| o.map(|value| Evidence { value, variance: params.obs_var })).collect();
    filter_chain(&Chain {
        transition: a,
        offsets: &offsets,
        process_var: params.process_var,
        prior: params.initial,
        evidence: &evidence,
    })
}

/// Backward pass over a [`kalman_filter`] result.
pub fn rts_smoother(filtered: &FilterOutput, params: &LssmParams) -> Result<SmootherOutput> {
    debug_assert!((filtered.transition - params.transition()).abs() < 1e-12);
    smooth_chain(filtered)
}
