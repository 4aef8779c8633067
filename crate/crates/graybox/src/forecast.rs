use heatcast_core::ForecastResult;

use crate::error::{GrayboxError, Result};
use crate::kalman::Gaussian;
use crate::model::{InputRow, LssmParams};
use crate::vi::GrayboxPosterior;

/// Roll the expected-coefficient recurrence forward from `last_state`.
pub fn forecast(
    posterior: &GrayboxPosterior,
    last_state: Gaussian,
    future_inputs: &[InputRow],
) -> Result<ForecastResult> {
    forecast_with(&posterior.expected_params(last_state), future_inputs)
}

/// Forecast under point parameters; `params.initial` is the current state.
pub fn forecast_with(params: &LssmParams, future_inputs: &[InputRow]) -> Result<ForecastResult> {
    if future_inputs.is_empty() {
        return Err(GrayboxError::Input("forecast horizon must be at least 1".into()));
    }
    params.validate()?;
    let a = params.transition();
    let mut state = params.initial;
    let mut mean = Vec::with_capacity(future_inputs.len());
    let mut std = Vec::with_capacity(future_inputs.len());
    for row in future_inputs {
        state = Gaussian::new(a * state.mean + params.drive(row), a * a * state.variance + params.process_var);
        mean.push(state.mean);
        std.push((state.variance + params.obs_var).sqrt());
    }
    Ok(ForecastResult::new(mean, std, 1))
}
