//! Evaluation protocol: forecast origins, horizon RMSE, drift curves,
//! weighted scores, uncertainty diagnostics and the prior-variance sweep.

pub mod error;
pub mod harness;
pub mod instants;
pub mod matrix;
pub mod metrics;
pub mod protocol;
pub mod report;
pub mod sweep;
pub mod uq;

pub use error::{EvalError, Result};
pub use harness::{predict_instants, Forecaster, Predictions, GRAYBOX_WARMUP_HOURS};
pub use instants::{is_valid_instant, select_test_instants};
pub use matrix::{PredictionMatrix, HORIZON};
pub use metrics::{drift_curve, horizon_rmse, weighted_score, Summary, WeightProfile};
pub use protocol::{PreparedBuilding, Protocol};
pub use report::ModelReport;
pub use sweep::{prior_sweep, SweepRecord};
pub use uq::{uncertainty_error_bins, UqBin, UqReport};
