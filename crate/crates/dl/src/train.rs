use heatcast_autograd::{Adam, Tensor};
use heatcast_core::SupervisedSet;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DlError, Result};
use crate::graph::{flatten, loss_and_gradients, unflatten, Batch, Noise, Objective};
use crate::model::{Head, ModelKind, NeuralModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    /// Epochs (0-based) at which the learning rate halves; defaults to
    /// 50%, 75% and 90% of the budget (fewer when the budget is too small
    /// to keep them distinct).
    pub lr_halvings: Option<Vec<usize>>,
    pub kl_weight: f64,
    pub prior_variance: f64,
    pub sigma_init: f64,
    pub hidden: usize,
    pub seed: u64,
    /// Keep sigma fixed at its initial value (BNN only).
    pub freeze_sigma: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 400,
            learning_rate: 1e-4,
            lr_halvings: None,
            kl_weight: 1e-3,
            prior_variance: 1e-3,
            sigma_init: 1e-3,
            hidden: 64,
            seed: 0,
            freeze_sigma: false,
        }
    }
}

impl TrainConfig {
    /// Defaults per model kind: 400 epochs deterministic, 800 for the BNN.
    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::LstmMlp => Self::default(),
            ModelKind::LstmBnn => Self { epochs: 800, ..Self::default() },
        }
    }

    /// The full-width 1024-unit network.
    pub fn full_width(kind: ModelKind) -> Self {
        Self { hidden: 1024, ..Self::for_kind(kind) }
    }

    pub fn halvings(&self) -> Vec<usize> {
        self.lr_halvings.clone().unwrap_or_else(|| {
            let mut h: Vec<usize> =
                [0.5, 0.75, 0.9].iter().map(|f| (f * self.epochs as f64).floor() as usize).filter(|&e| e > 0).collect();
            h.dedup();
            h
        })
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let n = self.halvings().iter().filter(|&&e| e <= epoch).count();
        self.learning_rate * 0.5f64.powi(n as i32)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(DlError::Config(m.into()));
        if self.epochs == 0 || self.hidden == 0 {
            return bad("epochs and hidden must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.kl_weight >= 0.0 && self.prior_variance > 0.0 && self.sigma_init > 0.0) {
            return bad("kl_weight must be >= 0, prior_variance and sigma_init > 0");
        }
        let h = self.halvings();
        if h.windows(2).any(|w| w[0] >= w[1]) || h.first() == Some(&0) {
            return bad("learning-rate halving epochs must be positive and strictly increasing");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    /// Snapshot with the lowest validation loss.
    pub model: NeuralModel,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

/// Initialize from `config.seed` and train.
pub fn train(
    kind: ModelKind,
    train_set: &SupervisedSet,
    val_set: &SupervisedSet,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = NeuralModel::init(
        kind,
        config.hidden,
        train_set.norm_stats().clone(),
        config.sigma_init,
        config.prior_variance,
        &mut rng,
    )?;
    train_from(init, train_set, val_set, config)
}

fn normalized_with(set: &SupervisedSet, model: &NeuralModel) -> Vec<f64> {
    set.clone().with_norm_stats(model.norm_stats.clone()).normalized_inputs()
}

/// Full-batch Adam from the given starting point. Noise draws come from a
/// stream seeded by `config.seed`, separate from initialization.
pub fn train_from(
    init: NeuralModel,
    train_set: &SupervisedSet,
    val_set: &SupervisedSet,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate()?;
    init.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(DlError::Config("training and validation sets must be non-empty".into()));
    }
    let kind = init.kind();
    let batch = Batch::new(&normalized_with(train_set, &init), train_set.targets())?;
    let val_x = normalized_with(val_set, &init);
    let objective = Objective {
        kl_weight: if kind == ModelKind::LstmBnn { config.kl_weight } else { 0.0 },
        prior_variance: match &init.head {
            Head::Bayesian { layer1, .. } => layer1.prior_variance,
            Head::Deterministic(_) => config.prior_variance,
        },
        freeze_sigma: config.freeze_sigma,
    };
    let (d_in, d_out) = match &init.head {
        Head::Bayesian { layer1, .. } => (layer1.mu.inputs(), layer1.mu.outputs()),
        Head::Deterministic(m) => (m.layer1.inputs(), m.layer1.outputs()),
    };

    let mut noise_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0xA076_1D64_78BD_642F);
    let mut params = flatten(&init);
    let shapes: Vec<Vec<usize>> = params.iter().map(|t| t.shape().to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
    let mut adam = Adam::new(&shape_refs);
    let mut train_loss = Vec::with_capacity(config.epochs);
    let mut val_loss = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, f64, NeuralModel)> = None;
    for epoch in 0..config.epochs {
        let noise = (kind == ModelKind::LstmBnn).then(|| Noise::sample(batch.len(), d_in, d_out, &mut noise_rng));
        let (loss, grads) =
            loss_and_gradients(kind, &params, &batch, noise.as_ref(), objective).map_err(|e| match e {
                DlError::Divergence(m) => DlError::Divergence(format!("epoch {epoch}: {m}")),
                other => other,
            })?;
        if !loss.is_finite() {
            return Err(DlError::Divergence(format!("training loss {loss} at epoch {epoch}")));
        }
        train_loss.push(loss);

        // Frozen tensors are tape constants with zero gradient, so their
        // Adam moments stay zero and the update is exactly zero.
        let mut refs: Vec<&mut Tensor> = params.iter_mut().collect();
        adam.step(&mut refs, &grads, config.learning_rate_at(epoch))?;

        let model = unflatten(&init, params.clone()).map_err(|e| match e {
            DlError::Domain(m) => DlError::Divergence(m),
            other => other,
        })?;
        let pred = model.predict_normalized(&val_x, val_set.len(), &mut noise_rng)?;
        let mae = pred.iter().zip(val_set.targets()).map(|(p, y)| (p - y).abs()).sum::<f64>() / val_set.len() as f64;
        let v = mae + objective.kl_weight * model.kl()?;
        if !v.is_finite() {
            return Err(DlError::Divergence(format!("validation loss {v} at epoch {epoch}")));
        }
        val_loss.push(v);
        if best.as_ref().is_none_or(|(_, b, _)| v < *b) {
            best = Some((epoch, v, model));
        }
    }
    let (best_epoch, best_val_loss, model) = best.expect("at least one epoch");
    Ok(TrainOutput { model, train_loss, val_loss, best_epoch, best_val_loss })
}
