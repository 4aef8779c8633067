use chrono::{DateTime, Duration, Utc};
use heatcast_core::BuildingDataset;

use crate::error::{EvalError, Result};

/// Whether record `i` has `window + 1` contiguous records ending at it and
/// `horizon` contiguous records after it.
pub fn is_valid_instant(dataset: &BuildingDataset, i: usize, horizon: usize, window: usize) -> bool {
    let r = dataset.records();
    i + horizon < r.len()
        && dataset.run_length_ending_at(i) > window
        && r[i + horizon].timestamp - r[i].timestamp == Duration::hours(horizon as i64)
}

/// `count` forecast origins spread evenly in time over `dataset`.
///
/// Targets are evenly spaced between the first and last hour that could be
/// valid; each target is moved to the nearest valid, not yet chosen hour
/// (earlier wins ties). A single instant sits at the midpoint.
pub fn select_test_instants(
    dataset: &BuildingDataset,
    count: usize,
    horizon: usize,
    window: usize,
) -> Result<Vec<DateTime<Utc>>> {
    if count == 0 {
        return Err(EvalError::Config("test instant count must be positive".into()));
    }
    let records = dataset.records();
    let valid: Vec<usize> = (0..records.len()).filter(|&i| is_valid_instant(dataset, i, horizon, window)).collect();
    if valid.len() < count {
        return Err(EvalError::InsufficientData(format!("{} valid forecast origins, {count} requested", valid.len())));
    }
    let first = records[0].timestamp + Duration::hours(window as i64);
    let last = records[records.len() - 1].timestamp - Duration::hours(horizon as i64);
    let span = (last - first).num_seconds().max(0) as f64;
    let ts = |k: usize| records[valid[k]].timestamp;

    let mut taken = vec![false; valid.len()];
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let frac = if count == 1 { 0.5 } else { k as f64 / (count - 1) as f64 };
        let target = first + Duration::seconds((frac * span).round() as i64);
        let split = valid.partition_point(|&i| records[i].timestamp < target);
        let below = (0..split).rev().find(|&j| !taken[j]);
        let above = (split..valid.len()).find(|&j| !taken[j]);
        let chosen = match (below, above) {
            (Some(b), Some(a)) if target - ts(b) <= ts(a) - target => b,
            (_, Some(a)) => a,
            (Some(b), None) => b,
            (None, None) => unreachable!("fewer free origins than requested"),
        };
        taken[chosen] = true;
        out.push(ts(chosen));
    }
    out.sort();
    Ok(out)
}
