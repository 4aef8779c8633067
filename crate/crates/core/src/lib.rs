//! Shared data model for hourly indoor-temperature forecasting.
//!
//! - [`record`]: hourly measurements, site metadata and the heating-season dataset.
//! - [`calendar`]: the 48-slot hour-of-week index.
//! - [`features`]: windowed supervised samples for the neural models.
//! - [`solar`]: sun elevation/azimuth from site coordinates.
//! - [`sim`]: synthetic building generator with known ground-truth dynamics.
//! - [`io`]: CSV/JSON readers and writers for datasets and site metadata.

pub mod calendar;
pub mod error;
pub mod features;
pub mod forecast;
pub mod io;
pub mod record;
pub mod sim;
pub mod solar;

pub use calendar::hour_of_week_index;
pub use error::{CoreError, Result};
pub use features::{
    build_supervised, chronological_split, FeatureRow, NormStats, SupervisedSet, NUM_FEATURES, WINDOW_LEN,
};
pub use forecast::ForecastResult;
pub use record::{BuildingDataset, HourlyRecord, SiteMeta};
pub use sim::{simulate_building, SimConfig, SimTruth};
pub use solar::{solar_position, AlmanacSolar, SolarPosition, SolarProvider};
