use serde::{Deserialize, Serialize};

/// Multi-step indoor temperature forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    /// Predictive mean per step, °C.
    pub mean: Vec<f64>,
    /// Predictive standard deviation per step, °C.
    pub step_std: Vec<f64>,
    /// Running sum of `step_std`.
    pub cum_std: Vec<f64>,
    pub n_samples: usize,
}

impl ForecastResult {
    pub fn new(mean: Vec<f64>, step_std: Vec<f64>, n_samples: usize) -> Self {
        let cum_std = step_std
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s;
                Some(*acc)
            })
            .collect();
        Self { mean, step_std, cum_std, n_samples }
    }

    /// Summarize equally weighted sample trajectories (`paths[s][step]`).
    pub fn from_paths(paths: &[Vec<f64>]) -> Self {
        let n = paths.len();
        let h = paths.first().map_or(0, |p| p.len());
        let mut mean = vec![0.0; h];
        let mut std = vec![0.0; h];
        for j in 0..h {
            // Deviations from the first path, so identical paths give exactly zero spread.
            let origin = paths[0][j];
            let shift = paths.iter().map(|p| p[j] - origin).sum::<f64>() / n as f64;
            let var = if n > 1 {
                paths.iter().map(|p| (p[j] - origin - shift).powi(2)).sum::<f64>() / (n - 1) as f64
            } else {
                0.0
            };
            mean[j] = origin + shift;
            std[j] = var.sqrt();
        }
        Self::new(mean, std, n)
    }

    pub fn horizon(&self) -> usize {
        self.mean.len()
    }
}
