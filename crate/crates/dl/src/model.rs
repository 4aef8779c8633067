use std::path::Path;

use heatcast_core::NormStats;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DlError, Result};
use crate::forward::{lstm_forward_batch, mlp_batch, stochastic_head_batch};
use crate::params::{hidden_mid, kl_gaussian, Linear, LstmParams, MlpParams, VariationalLayer};
use crate::train::TrainConfig;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LstmMlp,
    LstmBnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LstmMlp => "lstm-mlp",
            ModelKind::LstmBnn => "lstm-bnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Head {
    Deterministic(MlpParams),
    Bayesian { layer1: VariationalLayer, layer2: Linear },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralModel {
    pub lstm: LstmParams,
    pub head: Head,
    pub norm_stats: NormStats,
}

impl NeuralModel {
    /// Fresh parameters. BNN means start at zero with `sigma = sigma_init`.
    pub fn init<R: Rng + ?Sized>(
        kind: ModelKind,
        hidden: usize,
        norm_stats: NormStats,
        sigma_init: f64,
        prior_variance: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if hidden == 0 {
            return Err(DlError::Config("hidden size must be positive".into()));
        }
        let lstm = LstmParams::init(hidden, rng);
        let mlp = MlpParams::init(hidden, rng);
        let head = match kind {
            ModelKind::LstmMlp => Head::Deterministic(mlp),
            ModelKind::LstmBnn => Head::Bayesian {
                layer1: VariationalLayer::at_zero(hidden, hidden_mid(hidden), sigma_init, prior_variance)?,
                layer2: mlp.layer2,
            },
        };
        Ok(Self { lstm, head, norm_stats })
    }

    /// A BNN whose first-layer means are this deterministic model's weights.
    pub fn to_bayesian(&self, sigma: f64, prior_variance: f64) -> Result<Self> {
        match &self.head {
            Head::Deterministic(mlp) => Ok(Self {
                lstm: self.lstm.clone(),
                head: Head::Bayesian {
                    layer1: VariationalLayer::new(mlp.layer1.clone(), sigma, prior_variance)?,
                    layer2: mlp.layer2.clone(),
                },
                norm_stats: self.norm_stats.clone(),
            }),
            Head::Bayesian { .. } => Err(DlError::Config("model is already Bayesian".into())),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self.head {
            Head::Deterministic(_) => ModelKind::LstmMlp,
            Head::Bayesian { .. } => ModelKind::LstmBnn,
        }
    }

    pub fn hidden(&self) -> usize {
        self.lstm.hidden()
    }

    pub fn validate(&self) -> Result<()> {
        self.lstm.validate()?;
        let d = self.hidden();
        match &self.head {
            Head::Deterministic(mlp) => mlp.validate(d),
            Head::Bayesian { layer1, layer2 } => {
                layer1.validate()?;
                MlpParams { layer1: layer1.mu.clone(), layer2: layer2.clone() }.validate(d)
            }
        }
    }

    /// KL term of the variational layer; zero for deterministic models.
    pub fn kl(&self) -> Result<f64> {
        match &self.head {
            Head::Deterministic(_) => Ok(0.0),
            Head::Bayesian { layer1, .. } => kl_gaussian(layer1),
        }
    }

    /// `Δŷ` for `n` normalized windows; BNNs draw one weight sample per window.
    pub fn predict_normalized<R: Rng + ?Sized>(&self, windows: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
        let h = lstm_forward_batch(&self.lstm, windows, n)?;
        match &self.head {
            Head::Deterministic(mlp) => mlp_batch(&h, mlp),
            Head::Bayesian { layer1, layer2 } => stochastic_head_batch(&h, layer1, layer2, rng),
        }
    }

    /// `Δŷ` with the BNN collapsed onto its posterior means.
    pub fn predict_mean_weights(&self, windows: &[f64], n: usize) -> Result<Vec<f64>> {
        let h = lstm_forward_batch(&self.lstm, windows, n)?;
        match &self.head {
            Head::Deterministic(mlp) => mlp_batch(&h, mlp),
            Head::Bayesian { layer1, layer2 } => {
                mlp_batch(&h, &MlpParams { layer1: layer1.mu.clone(), layer2: layer2.clone() })
            }
        }
    }
}

/// Persisted model with training metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: ModelKind,
    pub hidden: usize,
    pub model: NeuralModel,
    pub config: TrainConfig,
    pub best_val_loss: f64,
    pub best_epoch: usize,
}

impl Checkpoint {
    pub fn new(model: NeuralModel, config: TrainConfig, best_val_loss: f64, best_epoch: usize) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            kind: model.kind(),
            hidden: model.hidden(),
            model,
            config,
            best_val_loss,
            best_epoch,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        if c.format_version != CHECKPOINT_VERSION {
            return Err(DlError::Config(format!(
                "checkpoint format {} is not supported (expected {CHECKPOINT_VERSION})",
                c.format_version
            )));
        }
        c.model.validate()?;
        if c.model.kind() != c.kind || c.model.hidden() != c.hidden {
            return Err(DlError::Config("checkpoint header does not match its parameters".into()));
        }
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
