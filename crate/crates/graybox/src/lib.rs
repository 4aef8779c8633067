//! Bayesian linear state-space model of indoor temperature: Kalman
//! filtering/smoothing, variational fitting and multi-step forecasts.

pub mod error;
pub mod forecast;
pub mod kalman;
pub mod model;
pub mod vi;

pub use error::{GrayboxError, Result};
pub use forecast::{forecast, forecast_with};
pub use kalman::{kalman_filter, rts_smoother, FilterOutput, Gaussian, SmootherOutput};
pub use model::{input_rows, GammaFactor, GaussianFactor, InputRow, LssmParams, NUM_COEFFS, NUM_PARAMS};
pub use vi::{fit_variational, GrayboxPosterior, Priors, StateMarginal};
