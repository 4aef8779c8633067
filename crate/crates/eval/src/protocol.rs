use heatcast_core::{build_supervised, chronological_split, BuildingDataset, SolarProvider, SupervisedSet, WINDOW_LEN};
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};
use crate::instants::select_test_instants;
use crate::matrix::HORIZON;

/// Data split and forecast settings shared by every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Protocol {
    /// Trailing heating-season days held out for testing.
    pub test_days: usize,
    /// Fraction of the remaining supervised samples used for training; the
    /// rest is the validation set.
    pub train_ratio: f64,
    /// Forecast origins per building.
    pub instants: usize,
    pub horizon: usize,
    /// Trajectories per BNN forecast.
    pub n_samples: usize,
}

impl Default for Protocol {
    fn default() -> Self {
        Self { test_days: 30, train_ratio: 0.9, instants: 100, horizon: HORIZON, n_samples: 10 }
    }
}

/// One building split for fitting and testing.
#[derive(Debug, Clone)]
pub struct PreparedBuilding {
    pub dataset: BuildingDataset,
    /// Records before the test period.
    pub fit: BuildingDataset,
    pub train: SupervisedSet,
    pub val: SupervisedSet,
    /// Forecast origins as indices into `dataset`.
    pub instants: Vec<usize>,
}

impl Protocol {
    pub fn validate(&self) -> Result<()> {
        if self.test_days == 0 || self.instants == 0 || self.horizon == 0 || self.n_samples == 0 {
            return Err(EvalError::Config("test_days, instants, horizon and n_samples must be positive".into()));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return Err(EvalError::Config(format!("train_ratio {} outside (0, 1)", self.train_ratio)));
        }
        Ok(())
    }

    pub fn prepare(&self, dataset: BuildingDataset, solar: &dyn SolarProvider) -> Result<PreparedBuilding> {
        self.validate()?;
        let test_len = self.test_days * 24;
        if dataset.len() <= test_len {
            return Err(EvalError::InsufficientData(format!(
                "{} records cannot hold a {}-day test period",
                dataset.len(),
                self.test_days
            )));
        }
        let cut = dataset.len() - test_len;
        let test_start = dataset.records()[cut].timestamp;
        let fit = dataset.slice_time(dataset.records()[0].timestamp, test_start);
        let test = dataset.last_heating_days(self.test_days);
        let (train, val) = chronological_split(&build_supervised(&fit, solar)?, self.train_ratio)?;
        let instants = select_test_instants(&test, self.instants, self.horizon, WINDOW_LEN)?
            .into_iter()
            .map(|ts| dataset.position(ts).expect("test records come from the dataset"))
            .collect();
        Ok(PreparedBuilding { dataset, fit, train, val, instants })
    }
}
