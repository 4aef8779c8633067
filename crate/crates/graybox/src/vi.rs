//! Mean-field variational Bayes for the gray-box state-space model.
//!
//! The recurrence is rewritten as a regression of the increment
//! `d_t = x_t - x_{t-1}` on `φ_t = c_t + g x_{t-1}`, where
//! `c_t = [T_sup, T_out, Φ, onehot(slot)]` and `g = [-1, -1, 0, ...]`, so
//! that all 51 coefficients share one Gaussian block.

use std::f64::consts::PI;
use std::path::Path;

use chrono::{DateTime, Utc};
use heatcast_core::{BuildingDataset, SiteMeta};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{GrayboxError, Result};
use crate::kalman::{filter_chain, kalman_filter, smooth_chain, Chain, Evidence, Gaussian};
use crate::model::{input_rows, GammaFactor, GaussianFactor, InputRow, LssmParams, NUM_COEFFS};

/// Hyperparameters and data handling for [`fit_variational`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    pub gamma_shape: f64,
    pub gamma_rate: f64,
    /// Variance of the first-state prior, centred on the first observation.
    pub initial_state_variance: f64,
    /// Most recent heating-season days used for training.
    pub training_days: usize,
    pub min_rows: usize,
}

impl Default for Priors {
    fn default() -> Self {
        Self { gamma_shape: 1e-3, gamma_rate: 1e-3, initial_state_variance: 1.0, training_days: 500, min_rows: 100 }
    }
}

impl Priors {
    fn gamma(&self) -> Result<GammaFactor> {
        GammaFactor::new(self.gamma_shape, self.gamma_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMarginal {
    pub timestamp: DateTime<Utc>,
    pub filtered: Gaussian,
    pub smoothed: Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrayboxPosterior {
    /// Marginals of θ1, θ2, θ3 and the 48 profile parameters.
    pub coeffs: Vec<GaussianFactor>,
    /// Joint covariance of `coeffs`, row-major.
    pub coeff_cov: Vec<f64>,
    pub process_precision: GammaFactor,
    pub obs_precision: GammaFactor,
    pub ard: Vec<GammaFactor>,
    pub state: Vec<StateMarginal>,
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
    pub priors: Priors,
    pub n_rows: usize,
}

impl GrayboxPosterior {
    pub fn coeff_means(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.mean).collect()
    }

    pub fn theta_means(&self) -> [f64; 3] {
        [self.coeffs[0].mean, self.coeffs[1].mean, self.coeffs[2].mean]
    }

    pub fn iterations(&self) -> usize {
        self.elbo_trace.len()
    }

    /// Posterior means, with noise variances `1 / E[τ]`.
    pub fn expected_params(&self, initial: Gaussian) -> LssmParams {
        let m = self.coeff_means();
        LssmParams {
            theta: [m[0], m[1], m[2]],
            profile: m[3..].to_vec(),
            process_var: 1.0 / self.process_precision.mean(),
            obs_var: 1.0 / self.obs_precision.mean(),
            initial,
        }
    }

    /// Filtered state at record `index`, running the filter over at most
    /// `warmup` hours of the contiguous run that ends there.
    pub fn state_at(&self, dataset: &BuildingDataset, index: usize, warmup: usize) -> Result<Gaussian> {
        if index >= dataset.len() {
            return Err(GrayboxError::Input(format!("index {index} out of range")));
        }
        let run = dataset.run_length_ending_at(index).min(warmup.max(1));
        let records = &dataset.records()[index + 1 - run..=index];
        let obs: Vec<Option<f64>> = records.iter().map(|r| Some(r.t_in)).collect();
        let rows = input_rows(records, dataset.site());
        let initial = Gaussian::new(records[0].t_in, self.priors.initial_state_variance);
        let out = kalman_filter(&obs, &rows, &self.expected_params(initial))?;
        Ok(*out.filtered.last().expect("non-empty run"))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        if p.coeffs.len() != NUM_COEFFS || p.ard.len() != NUM_COEFFS || p.coeff_cov.len() != NUM_COEFFS * NUM_COEFFS {
            return Err(GrayboxError::Input("checkpoint has wrong parameter counts".into()));
        }
        Ok(p)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

struct Data {
    y: Vec<f64>,
    rows: Vec<InputRow>,
    /// `(start, len)` of gap-free runs.
    segments: Vec<(usize, usize)>,
    timestamps: Vec<DateTime<Utc>>,
}

impl Data {
    fn new(dataset: &BuildingDataset, site: &SiteMeta) -> Self {
        let records = dataset.records();
        let mut segments = Vec::new();
        let mut start = 0;
        for i in 1..=records.len() {
            if i == records.len() || !dataset.follows_contiguously(i) {
                segments.push((start, i - start));
                start = i;
            }
        }
        Self {
            y: records.iter().map(|r| r.t_in).collect(),
            rows: input_rows(records, site),
            segments,
            timestamps: records.iter().map(|r| r.timestamp).collect(),
        }
    }

    fn n_transitions(&self) -> usize {
        self.segments.iter().map(|&(_, n)| n - 1).sum()
    }
}

struct StateMoments {
    mean: Vec<f64>,
    second: Vec<f64>,
    /// `E[x_t x_{t-1}]`, zero at segment starts.
    cross: Vec<f64>,
    filtered: Vec<Gaussian>,
    smoothed: Vec<Gaussian>,
    entropy: f64,
}

struct CoeffPosterior {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    ln_det_precision: f64,
}

struct SuffStats {
    a: DMatrix<f64>,
    b: DVector<f64>,
    d_sum: f64,
}

fn g_cov_terms(cov: &DMatrix<f64>, row: &InputRow) -> (f64, f64) {
    // gᵀ S g and gᵀ S c for g = [-1, -1, 0, ...].
    let g_s_g = cov[(0, 0)] + cov[(1, 1)] + 2.0 * cov[(0, 1)];
    let g_s_c: f64 = row.regressors().iter().map(|&(k, v)| -(cov[(0, k)] + cov[(1, k)]) * v).sum();
    (g_s_g, g_s_c)
}

fn update_state(data: &Data, theta: &CoeffPosterior, tau_p: f64, tau_o: f64, v0: f64) -> Result<StateMoments> {
    let n = data.y.len();
    let mut mom = StateMoments {
        mean: vec![0.0; n],
        second: vec![0.0; n],
        cross: vec![0.0; n],
        filtered: Vec::with_capacity(n),
        smoothed: Vec::with_capacity(n),
        entropy: 0.0,
    };
    let m = &theta.mean;
    let transition = 1.0 - m[0] - m[1];
    for &(start, len) in &data.segments {
        let rows = &data.rows[start..start + len];
        let y = &data.y[start..start + len];
        let offsets: Vec<f64> = rows
            .iter()
            .enumerate()
            .map(|(t, row)| if t == 0 { 0.0 } else { row.regressors().iter().map(|&(k, v)| m[k] * v).sum() })
            .collect();
        let evidence: Vec<Option<Evidence>> = (0..len)
            .map(|t| {
                // Coefficient uncertainty in the next transition acts as an
                // extra Gaussian factor on this state.
                let (lambda, eta) = if t + 1 < len {
                    let (gsg, gsc) = g_cov_terms(&theta.cov, &rows[t + 1]);
                    (tau_p * gsg, -tau_p * gsc)
                } else {
                    (0.0, 0.0)
                };
                let precision = tau_o + lambda;
                (precision > 0.0)
                    .then(|| Evidence { value: (tau_o * y[t] + eta) / precision, variance: 1.0 / precision })
            })
            .collect();
        let filt = filter_chain(&Chain {
            transition,
            offsets: &offsets,
            process_var: 1.0 / tau_p,
            prior: Gaussian::new(y[0], v0),
            evidence: &evidence,
        })?;
        let smooth = smooth_chain(&filt)?;
        for t in 0..len {
            let s = smooth.smoothed[t];
            mom.mean[start + t] = s.mean;
            mom.second[start + t] = s.second_moment();
            if t == 0 {
                mom.entropy += 0.5 * (2.0 * PI * std::f64::consts::E * s.variance).ln();
            } else {
                let prev = smooth.smoothed[t - 1];
                let c = smooth.cross_cov[t];
                mom.cross[start + t] = c + s.mean * prev.mean;
                let cond = s.variance - c * c / prev.variance;
                if !(cond > 0.0) {
                    return Err(GrayboxError::Numerical(format!("conditional state variance {cond}")));
                }
                mom.entropy += 0.5 * (2.0 * PI * std::f64::consts::E * cond).ln();
            }
        }
        mom.filtered.extend(filt.filtered);
        mom.smoothed.extend(smooth.smoothed);
    }
    Ok(mom)
}

fn sufficient_stats(data: &Data, mom: &StateMoments) -> SuffStats {
    let mut a = DMatrix::zeros(NUM_COEFFS, NUM_COEFFS);
    let mut b = DVector::zeros(NUM_COEFFS);
    let mut d_sum = 0.0;
    for &(start, len) in &data.segments {
        for i in start + 1..start + len {
            let (m_prev, e2_prev) = (mom.mean[i - 1], mom.second[i - 1]);
            let cross = mom.cross[i];
            let c = data.rows[i].regressors();
            for &(p, cp) in &c {
                for &(q, cq) in &c {
                    a[(p, q)] += cp * cq;
                }
                for g in 0..2 {
                    a[(p, g)] -= cp * m_prev;
                    a[(g, p)] -= cp * m_prev;
                }
                b[p] += cp * (mom.mean[i] - m_prev);
            }
            for p in 0..2 {
                for q in 0..2 {
                    a[(p, q)] += e2_prev;
                }
                b[p] -= cross - e2_prev;
            }
            d_sum += mom.second[i] - 2.0 * cross + e2_prev;
        }
    }
    SuffStats { a, b, d_sum }
}

fn update_coeffs(stats: &SuffStats, ard_means: &[f64], tau_p: f64) -> Result<CoeffPosterior> {
    let mut precision = &stats.a * tau_p;
    for (i, alpha) in ard_means.iter().enumerate() {
        precision[(i, i)] += alpha;
    }
    let chol = precision
        .cholesky()
        .ok_or_else(|| GrayboxError::Numerical("coefficient precision not positive definite".into()))?;
    let ln_det_precision = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let mean = chol.solve(&(&stats.b * tau_p));
    let cov = chol.inverse();
    Ok(CoeffPosterior { mean, cov, ln_det_precision })
}

/// `Σ_t E[(d_t - φ_tᵀθ)²]` under the current state and coefficient factors.
fn expected_sq_residual(stats: &SuffStats, theta: &CoeffPosterior) -> f64 {
    let m = &theta.mean;
    let trace: f64 = stats.a.component_mul(&theta.cov).sum();
    stats.d_sum - 2.0 * stats.b.dot(m) + trace + m.dot(&(&stats.a * m))
}

/// Coordinate-ascent variational inference over states, coefficients, noise
/// precisions and ARD precisions.
pub fn fit_variational(
    dataset: &BuildingDataset,
    priors: &Priors,
    max_iters: usize,
    tol: f64,
) -> Result<GrayboxPosterior> {
    if max_iters == 0 {
        return Err(GrayboxError::Input("max_iters must be at least 1".into()));
    }
    if !(priors.initial_state_variance > 0.0) {
        return Err(GrayboxError::Input("initial_state_variance must be positive".into()));
    }
    let prior = priors.gamma()?;
    let train = dataset.last_heating_days(priors.training_days);
    if train.len() < priors.min_rows {
        return Err(GrayboxError::InsufficientData(format!("{} usable rows, need {}", train.len(), priors.min_rows)));
    }
    let data = Data::new(&train, dataset.site());
    let n_obs = data.y.len() as f64;
    let n_trans = data.n_transitions() as f64;
    let v0 = priors.initial_state_variance;
    let ln2pi = (2.0 * PI).ln();

    let mut theta = CoeffPosterior {
        mean: DVector::zeros(NUM_COEFFS),
        cov: DMatrix::identity(NUM_COEFFS, NUM_COEFFS) * 1e-6,
        ln_det_precision: 0.0,
    };
    let mut tau_p = prior;
    let mut tau_o = prior;
    let mut ard = vec![prior; NUM_COEFFS];
    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    let mut moments;

    loop {
        moments = update_state(&data, &theta, tau_p.mean(), tau_o.mean(), v0)?;
        let stats = sufficient_stats(&data, &moments);
        let ard_means: Vec<f64> = ard.iter().map(GammaFactor::mean).collect();
        theta = update_coeffs(&stats, &ard_means, tau_p.mean())?;

        let er2 = expected_sq_residual(&stats, &theta).max(0.0);
        let obs_ss: f64 = data
            .y
            .iter()
            .zip(&moments.mean)
            .zip(&moments.second)
            .map(|((y, m), s)| y * y - 2.0 * y * m + s)
            .sum::<f64>()
            .max(0.0);
        tau_p = GammaFactor::posterior(&prior, n_trans, er2)?;
        tau_o = GammaFactor::posterior(&prior, n_obs, obs_ss)?;
        for (i, a) in ard.iter_mut().enumerate() {
            *a = GammaFactor::posterior(&prior, 1.0, theta.mean[i].powi(2) + theta.cov[(i, i)])?;
        }

        let mut elbo = 0.5 * n_obs * (tau_o.mean_ln() - ln2pi) - 0.5 * tau_o.mean() * obs_ss;
        elbo += 0.5 * n_trans * (tau_p.mean_ln() - ln2pi) - 0.5 * tau_p.mean() * er2;
        for &(start, _) in &data.segments {
            let dev = moments.second[start] - 2.0 * moments.mean[start] * data.y[start] + data.y[start].powi(2);
            elbo += -0.5 * (2.0 * PI * v0).ln() - 0.5 * dev / v0;
        }
        for (i, a) in ard.iter().enumerate() {
            let e_sq = theta.mean[i].powi(2) + theta.cov[(i, i)];
            elbo += 0.5 * (a.mean_ln() - ln2pi) - 0.5 * a.mean() * e_sq;
        }
        for g in ard.iter().chain([&tau_p, &tau_o]) {
            elbo += g.expected_log_prior(&prior) + g.entropy();
        }
        elbo += moments.entropy;
        elbo += 0.5 * (NUM_COEFFS as f64 * (2.0 * PI * std::f64::consts::E).ln() - theta.ln_det_precision);
        if !elbo.is_finite() {
            return Err(GrayboxError::Numerical("ELBO is not finite".into()));
        }

        let change = match trace.last() {
            None => f64::MAX,
            Some(&prev) => {
                if elbo < prev - 1e-6 * prev.abs() {
                    return Err(GrayboxError::Convergence(format!(
                        "ELBO decreased from {prev} to {elbo} at iteration {}",
                        trace.len() + 1
                    )));
                }
                (elbo - prev).abs() / prev.abs().max(1e-300)
            }
        };
        trace.push(elbo);
        if change < tol {
            converged = true;
            break;
        }
        if trace.len() >= max_iters {
            break;
        }
    }

    let coeffs = (0..NUM_COEFFS).map(|i| GaussianFactor { mean: theta.mean[i], variance: theta.cov[(i, i)] }).collect();
    let coeff_cov = (0..NUM_COEFFS * NUM_COEFFS).map(|k| theta.cov[(k / NUM_COEFFS, k % NUM_COEFFS)]).collect();
    let state = (0..data.y.len())
        .map(|t| StateMarginal {
            timestamp: data.timestamps[t],
            filtered: moments.filtered[t],
            smoothed: moments.smoothed[t],
        })
        .collect();
    Ok(GrayboxPosterior {
        coeffs,
        coeff_cov,
        process_precision: tau_p,
        obs_precision: tau_o,
        ard,
        state,
        elbo_trace: trace,
        converged,
        priors: priors.clone(),
        n_rows: data.y.len(),
    })
}
