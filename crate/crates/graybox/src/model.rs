use heatcast_core::calendar::HOUR_SLOTS;
use heatcast_core::{hour_of_week_index, HourlyRecord, SiteMeta};
use serde::{Deserialize, Serialize};

use crate::error::{GrayboxError, Result};
use crate::kalman::Gaussian;

/// θ1, θ2, θ3 followed by the 48 profile parameters.
pub const NUM_COEFFS: usize = 3 + HOUR_SLOTS;
/// Coefficients plus process and observation precision.
pub const NUM_PARAMS: usize = NUM_COEFFS + 2;

/// Exogenous drivers of one hourly step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputRow {
    pub t_sup: f64,
    pub t_out: f64,
    pub ghi: f64,
    /// Hour-of-week slot in 1..=48.
    pub slot: u8,
}

impl InputRow {
    pub fn from_record(record: &HourlyRecord, site: &SiteMeta) -> Self {
        Self {
            t_sup: record.t_sup,
            t_out: record.t_out,
            ghi: record.ghi,
            slot: hour_of_week_index(record.timestamp, site),
        }
    }

    pub(crate) fn slot_index(&self) -> usize {
        debug_assert!((1..=HOUR_SLOTS as u8).contains(&self.slot));
        self.slot as usize - 1
    }

    /// Indices and values of the non-zero regressors.
    pub(crate) fn regressors(&self) -> [(usize, f64); 4] {
        [(0, self.t_sup), (1, self.t_out), (2, self.ghi), (3 + self.slot_index(), 1.0)]
    }
}

pub fn input_rows(records: &[HourlyRecord], site: &SiteMeta) -> Vec<InputRow> {
    records.iter().map(|r| InputRow::from_record(r, site)).collect()
}

/// Point values of the state-space parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LssmParams {
    pub theta: [f64; 3],
    pub profile: Vec<f64>,
    pub process_var: f64,
    pub obs_var: f64,
    /// Prior on the first state.
    pub initial: Gaussian,
}

impl LssmParams {
    pub fn validate(&self) -> Result<()> {
        if self.profile.len() != HOUR_SLOTS {
            return Err(GrayboxError::Input(format!(
                "profile has {} entries, expected {HOUR_SLOTS}",
                self.profile.len()
            )));
        }
        let finite = self.theta.iter().chain(&self.profile).all(|v| v.is_finite()) && self.initial.mean.is_finite();
        if !finite {
            return Err(GrayboxError::Input("non-finite parameter".into()));
        }
        if !(self.process_var >= 0.0 && self.obs_var >= 0.0 && self.initial.variance >= 0.0) {
            return Err(GrayboxError::Input("variances must be non-negative".into()));
        }
        Ok(())
    }

    /// `1 - θ1 - θ2`.
    pub fn transition(&self) -> f64 {
        1.0 - self.theta[0] - self.theta[1]
    }

    /// Input-driven part of the recurrence for one step.
    pub fn drive(&self, row: &InputRow) -> f64 {
        self.theta[0] * row.t_sup + self.theta[1] * row.t_out + self.theta[2] * row.ghi + self.profile[row.slot_index()]
    }

    /// Noise-free one-step recurrence.
    pub fn step(&self, x: f64, row: &InputRow) -> f64 {
        self.transition() * x + self.drive(row)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFactor {
    pub mean: f64,
    pub variance: f64,
}

/// Gamma distribution in shape/rate form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaFactor {
    pub shape: f64,
    pub rate: f64,
}

impl GammaFactor {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        if shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite() {
            Ok(Self { shape, rate })
        } else {
            Err(GrayboxError::Numerical(format!("gamma shape {shape}, rate {rate}")))
        }
    }

    pub fn mean(&self) -> f64 {
        self.shape / self.rate
    }

    pub fn mean_ln(&self) -> f64 {
        statrs::function::gamma::digamma(self.shape) - self.rate.ln()
    }

    pub fn entropy(&self) -> f64 {
        let a = self.shape;
        a - self.rate.ln() + statrs::function::gamma::ln_gamma(a) + (1.0 - a) * statrs::function::gamma::digamma(a)
    }

    /// `E_q[ln p(τ)]` under a `Gamma(prior.shape, prior.rate)` prior.
    pub fn expected_log_prior(&self, prior: &GammaFactor) -> f64 {
        let (a0, b0) = (prior.shape, prior.rate);
        a0 * b0.ln() - statrs::function::gamma::ln_gamma(a0) + (a0 - 1.0) * self.mean_ln() - b0 * self.mean()
    }

    /// Conjugate update after `n` Gaussian residuals with sum of expected squares `ss`.
    pub fn posterior(prior: &GammaFactor, n: f64, ss: f64) -> Result<Self> {
        Self::new(prior.shape + 0.5 * n, prior.rate + 0.5 * ss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_moments_against_sampling_free_identities() {
        let g = GammaFactor::new(3.0, 2.0).unwrap();
        assert_eq!(g.mean(), 1.5);
        // ψ(3) = 1 + 1/2 - γ
        let euler = 0.577_215_664_901_532_9;
        assert!((g.mean_ln() - (1.5 - euler - 2f64.ln())).abs() < 1e-12);
        // Exponential(rate 2): entropy 1 - ln 2
        let e = GammaFactor::new(1.0, 2.0).unwrap();
        assert!((e.entropy() - (1.0 - 2f64.ln())).abs() < 1e-12);
        assert!(GammaFactor::new(0.0, 1.0).is_err());
    }

    #[test]
    fn gamma_bookkeeping_is_exact() {
        let prior = GammaFactor::new(1e-3, 1e-3).unwrap();
        let post = GammaFactor::posterior(&prior, 17.0, 4.0).unwrap();
        assert_eq!(post.shape, 1e-3 + 8.5);
        assert_eq!(post.rate, 1e-3 + 2.0);
    }

    #[test]
    fn drive_uses_slot_profile() {
        let mut profile = vec![0.0; HOUR_SLOTS];
        profile[30] = 0.25;
        let p = LssmParams {
            theta: [0.1, 0.2, 0.01],
            profile,
            process_var: 0.0,
            obs_var: 0.0,
            initial: Gaussian::new(0.0, 1.0),
        };
        let row = InputRow { t_sup: 40.0, t_out: 5.0, ghi: 100.0, slot: 31 };
        assert!((p.drive(&row) - (4.0 + 1.0 + 1.0 + 0.25)).abs() < 1e-12);
        assert!((p.step(20.0, &row) - (0.7 * 20.0 + 6.25)).abs() < 1e-12);
    }
}
