//! Windowed supervised samples for the sequence models.
//!
//! Column order of every feature row:
//! `t_sup - t_in`, `t_out - t_in`, `ghi`, sun elevation, sun azimuth, hour-of-week slot.

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::calendar::hour_of_week_index;
use crate::error::{CoreError, Result};
use crate::record::{BuildingDataset, HourlyRecord, SiteMeta};
use crate::solar::SolarProvider;

/// Hours of history in one input window.
pub const WINDOW_LEN: usize = 7;
/// Features per hour.
pub const NUM_FEATURES: usize = 6;
/// Column of the hour-of-week slot; it is passed through without scaling.
pub const SLOT_COLUMN: usize = 5;

pub type FeatureRow = [f64; NUM_FEATURES];

/// Assemble one feature row. `t_in` may be a measurement or a model prediction.
pub fn feature_row(
    timestamp: DateTime<Utc>,
    t_in: f64,
    t_sup: f64,
    t_out: f64,
    ghi: f64,
    site: &SiteMeta,
    solar: &dyn SolarProvider,
) -> FeatureRow {
    let sun = solar.position(timestamp, site.latitude, site.longitude);
    [t_sup - t_in, t_out - t_in, ghi, sun.elevation, sun.azimuth, hour_of_week_index(timestamp, site) as f64]
}

pub fn record_features(r: &HourlyRecord, site: &SiteMeta, solar: &dyn SolarProvider) -> FeatureRow {
    feature_row(r.timestamp, r.t_in, r.t_sup, r.t_out, r.ghi, site, solar)
}

/// Per-column z-score parameters. The slot column always has mean 0, std 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: [f64; NUM_FEATURES],
    pub std: [f64; NUM_FEATURES],
}

impl Default for NormStats {
    fn default() -> Self {
        Self { mean: [0.0; NUM_FEATURES], std: [1.0; NUM_FEATURES] }
    }
}

impl NormStats {
    /// Statistics over the rows of a flat N × L × M array.
    pub fn from_flat(values: &[f64]) -> Self {
        let n = values.len() / NUM_FEATURES;
        if n == 0 {
            return Self::default();
        }
        let mut mean = [0.0; NUM_FEATURES];
        let mut std = [1.0; NUM_FEATURES];
        for row in values.chunks_exact(NUM_FEATURES) {
            for c in 0..NUM_FEATURES {
                mean[c] += row[c];
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = [0.0; NUM_FEATURES];
        for row in values.chunks_exact(NUM_FEATURES) {
            for c in 0..NUM_FEATURES {
                var[c] += (row[c] - mean[c]).powi(2);
            }
        }
        for c in 0..NUM_FEATURES {
            let s = (var[c] / n as f64).sqrt();
            std[c] = if s > 1e-12 { s } else { 1.0 };
        }
        mean[SLOT_COLUMN] = 0.0;
        std[SLOT_COLUMN] = 1.0;
        Self { mean, std }
    }

    pub fn normalize_row(&self, row: &mut [f64]) {
        for c in 0..NUM_FEATURES {
            row[c] = (row[c] - self.mean[c]) / self.std[c];
        }
    }

    pub fn denormalize_row(&self, row: &mut [f64]) {
        for c in 0..NUM_FEATURES {
            row[c] = row[c] * self.std[c] + self.mean[c];
        }
    }
}

/// Windowed samples: `inputs` is N × L × M (row-major, unscaled), `targets`
/// the next-hour indoor temperature change in °C/h.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedSet {
    inputs: Vec<f64>,
    targets: Vec<f64>,
    norm_stats: NormStats,
    index: Vec<DateTime<Utc>>,
    /// Indoor temperature at each prediction instant.
    t_in: Vec<f64>,
}

impl SupervisedSet {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let w = WINDOW_LEN * NUM_FEATURES;
        &self.inputs[i * w..(i + 1) * w]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn norm_stats(&self) -> &NormStats {
        &self.norm_stats
    }

    pub fn index(&self) -> &[DateTime<Utc>] {
        &self.index
    }

    pub fn t_in(&self) -> &[f64] {
        &self.t_in
    }

    /// Inputs z-scored with this set's statistics.
    pub fn normalized_inputs(&self) -> Vec<f64> {
        let mut out = self.inputs.clone();
        for row in out.chunks_exact_mut(NUM_FEATURES) {
            self.norm_stats.normalize_row(row);
        }
        out
    }

    pub fn with_norm_stats(mut self, stats: NormStats) -> Self {
        self.norm_stats = stats;
        self
    }

    fn subset(&self, range: std::ops::Range<usize>, stats: NormStats) -> Self {
        let w = WINDOW_LEN * NUM_FEATURES;
        Self {
            inputs: self.inputs[range.start * w..range.end * w].to_vec(),
            targets: self.targets[range.clone()].to_vec(),
            norm_stats: stats,
            index: self.index[range.clone()].to_vec(),
            t_in: self.t_in[range].to_vec(),
        }
    }
}

/// One sample per hour `t` with seven contiguous records ending at `t` and a
/// record at `t + 1h`. Normalization statistics cover all samples; use
/// [`chronological_split`] to restrict them to a training partition.
pub fn build_supervised(dataset: &BuildingDataset, solar: &dyn SolarProvider) -> Result<SupervisedSet> {
    let records = dataset.records();
    let site = dataset.site();
    let rows: Vec<FeatureRow> = records.iter().map(|r| record_features(r, site, solar)).collect();

    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    let mut index = Vec::new();
    let mut t_in = Vec::new();
    let mut run = 0usize;
    for i in 0..records.len() {
        run = if dataset.follows_contiguously(i) { run + 1 } else { 1 };
        if run < WINDOW_LEN || i + 1 >= records.len() {
            continue;
        }
        if records[i + 1].timestamp - records[i].timestamp != Duration::hours(1) {
            continue;
        }
        for row in &rows[i + 1 - WINDOW_LEN..=i] {
            inputs.extend_from_slice(row);
        }
        targets.push(records[i + 1].t_in - records[i].t_in);
        index.push(records[i].timestamp);
        t_in.push(records[i].t_in);
    }
    if targets.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let norm_stats = NormStats::from_flat(&inputs);
    Ok(SupervisedSet { inputs, targets, norm_stats, index, t_in })
}

/// Earliest `floor(ratio * N)` samples and the remainder; both carry
/// statistics computed from the first partition.
pub fn chronological_split(set: &SupervisedSet, ratio: f64) -> Result<(SupervisedSet, SupervisedSet)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CoreError::InsufficientData(format!("split ratio {ratio} outside (0, 1)")));
    }
    let n = set.len();
    let n_first = (ratio * n as f64).floor() as usize;
    if n_first == 0 || n_first >= n {
        return Err(CoreError::InsufficientData(format!(
            "split of {n} samples at ratio {ratio} leaves an empty partition"
        )));
    }
    let w = WINDOW_LEN * NUM_FEATURES;
    let stats = NormStats::from_flat(&set.inputs[..n_first * w]);
    Ok((set.subset(0..n_first, stats.clone()), set.subset(n_first..n, stats)))
}
