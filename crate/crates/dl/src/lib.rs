//! LSTM+MLP and partially stochastic LSTM+BNN indoor temperature models.
//!
//! Both models map a window of the last seven hourly feature rows to the
//! next-hour indoor temperature change. In the BNN only the first head layer
//! is stochastic, with a factorized Gaussian posterior.

pub mod error;
pub mod forward;
pub mod graph;
pub mod model;
pub mod params;
pub mod rollout;
pub mod train;

pub use error::{DlError, Result};
pub use forward::{forward_deterministic, forward_stochastic, lstm_forward};
pub use model::{Checkpoint, Head, ModelKind, NeuralModel};
pub use params::{kl_gaussian, Gate, Linear, LstmParams, MlpParams, VariationalLayer};
pub use rollout::rollout;
pub use train::{train, train_from, TrainConfig, TrainOutput};
