use heatcast_core::{AlmanacSolar, BuildingDataset, ForecastResult, WINDOW_LEN};
use heatcast_dl::{rollout, NeuralModel};
use heatcast_graybox::{forecast, input_rows, GrayboxPosterior};
use rand::Rng;

use crate::error::{EvalError, Result};
use crate::instants::is_valid_instant;
use crate::matrix::PredictionMatrix;

/// Hours of measurements the graybox filter sees before a forecast origin.
pub const GRAYBOX_WARMUP_HOURS: usize = 168;

/// A trained model that can forecast from any valid origin of a dataset.
#[derive(Debug, Clone, Copy)]
pub enum Forecaster<'a> {
    Graybox(&'a GrayboxPosterior),
    Neural(&'a NeuralModel),
}

impl Forecaster<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Forecaster::Graybox(_) => "graybox",
            Forecaster::Neural(m) => m.kind().name(),
        }
    }

    /// Forecast the `horizon` hours after record `index`, using measured
    /// indoor temperatures up to and including it.
    pub fn forecast_at<R: Rng + ?Sized>(
        &self,
        dataset: &BuildingDataset,
        index: usize,
        horizon: usize,
        n_samples: usize,
        rng: &mut R,
    ) -> Result<ForecastResult> {
        if !is_valid_instant(dataset, index, horizon, WINDOW_LEN) {
            return Err(EvalError::InsufficientData(format!("record {index} is not a valid forecast origin")));
        }
        let records = dataset.records();
        let future = &records[index + 1..=index + horizon];
        Ok(match self {
            Forecaster::Graybox(post) => {
                let state = post.state_at(dataset, index, GRAYBOX_WARMUP_HOURS)?;
                forecast(post, state, &input_rows(future, dataset.site()))?
            }
            Forecaster::Neural(model) => {
                let history = &records[index - WINDOW_LEN..=index];
                rollout(model, history, future, dataset.site(), &AlmanacSolar, n_samples, rng)?
            }
        })
    }
}

/// Paired forecasts and measurements, one row per forecast origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictions {
    pub truth: PredictionMatrix,
    pub mean: PredictionMatrix,
    pub step_std: PredictionMatrix,
}

impl Predictions {
    pub fn new(horizon: usize) -> Result<Self> {
        Ok(Self {
            truth: PredictionMatrix::new(horizon)?,
            mean: PredictionMatrix::new(horizon)?,
            step_std: PredictionMatrix::new(horizon)?,
        })
    }

    pub fn extend(&mut self, other: &Predictions) -> Result<()> {
        self.truth.extend(&other.truth)?;
        self.mean.extend(&other.mean)?;
        self.step_std.extend(&other.step_std)
    }

    pub fn rows(&self) -> usize {
        self.truth.rows()
    }

    /// Predictive std of the first step, per origin.
    pub fn first_step_std(&self) -> Vec<f64> {
        self.step_std.column(0).collect()
    }

    /// Absolute error of the first step, per origin.
    pub fn first_step_abs_error(&self) -> Vec<f64> {
        self.truth.column(0).zip(self.mean.column(0)).map(|(y, p)| (y - p).abs()).collect()
    }
}

/// Forecasts from each origin in `instants` (record indices).
pub fn predict_instants<R: Rng + ?Sized>(
    forecaster: Forecaster<'_>,
    dataset: &BuildingDataset,
    instants: &[usize],
    horizon: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<Predictions> {
    let mut out = Predictions::new(horizon)?;
    for &i in instants {
        let f = forecaster.forecast_at(dataset, i, horizon, n_samples, rng)?;
        let truth: Vec<f64> = dataset.records()[i + 1..=i + horizon].iter().map(|r| r.t_in).collect();
        out.truth.push_row(&truth)?;
        out.mean.push_row(&f.mean)?;
        out.step_std.push_row(&f.step_std)?;
    }
    Ok(out)
}
