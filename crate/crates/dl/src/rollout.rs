use heatcast_core::features::feature_row;
use heatcast_core::{ForecastResult, HourlyRecord, SiteMeta, SolarProvider, NUM_FEATURES, WINDOW_LEN};
use rand::Rng;

use crate::error::{DlError, Result};
use crate::model::{ModelKind, NeuralModel};

/// Autoregressive multi-step forecast.
///
/// `history` ends at the forecast origin and must hold at least
/// `WINDOW_LEN + 1` contiguous records. `future` holds the `H` following
/// hours; their `t_in` is ignored. Each trajectory feeds its own predictions
/// back into the window; BNN trajectories draw fresh weights at every step.
/// Deterministic models always produce a single trajectory.
pub fn rollout<R: Rng + ?Sized>(
    model: &NeuralModel,
    history: &[HourlyRecord],
    future: &[HourlyRecord],
    site: &SiteMeta,
    solar: &dyn SolarProvider,
    n_samples: usize,
    rng: &mut R,
) -> Result<ForecastResult> {
    if history.len() < WINDOW_LEN + 1 {
        return Err(DlError::InsufficientHistory(format!("{} records, need {}", history.len(), WINDOW_LEN + 1)));
    }
    if future.is_empty() {
        return Err(DlError::Config("forecast horizon must be at least 1".into()));
    }
    let n = match model.kind() {
        ModelKind::LstmMlp => 1,
        ModelKind::LstmBnn => n_samples.max(1),
    };
    let h = future.len();
    let stats = &model.norm_stats;
    let normalized = |mut row: [f64; NUM_FEATURES]| {
        stats.normalize_row(&mut row);
        row
    };

    let mut windows: Vec<Vec<[f64; NUM_FEATURES]>> = vec![
        history[history.len() - WINDOW_LEN..]
            .iter()
            .map(|r| normalized(feature_row(r.timestamp, r.t_in, r.t_sup, r.t_out, r.ghi, site, solar)))
            .collect();
        n
    ];
    let mut level = vec![history.last().unwrap().t_in; n];
    let mut paths = vec![Vec::with_capacity(h); n];
    let mut flat = Vec::with_capacity(n * WINDOW_LEN * NUM_FEATURES);
    for (j, next) in future.iter().enumerate() {
        flat.clear();
        for w in &windows {
            flat.extend(w.iter().flatten());
        }
        let delta = model.predict_normalized(&flat, n, rng)?;
        for s in 0..n {
            level[s] += delta[s];
            paths[s].push(level[s]);
        }
        if j + 1 < h {
            for s in 0..n {
                let row = feature_row(next.timestamp, level[s], next.t_sup, next.t_out, next.ghi, site, solar);
                windows[s].remove(0);
                windows[s].push(normalized(row));
            }
        }
    }
    Ok(ForecastResult::from_paths(&paths))
}
