use heatcast_dl::{train, ModelKind, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{EvalError, Result};
use crate::harness::{predict_instants, Forecaster, Predictions};
use crate::metrics::{horizon_rmse, Summary};
use crate::protocol::{PreparedBuilding, Protocol};

/// Result of training BNNs with one prior variance and seed on every fixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub prior_variance: f64,
    pub seed: u64,
    /// KL term of the returned models, averaged over fixtures.
    pub kl: f64,
    /// `(K, summary of per-origin RMSE over the first K hours)`.
    pub rmse: Vec<(usize, Summary)>,
}

/// Train one LSTM+BNN per (prior, seed, fixture) and summarize its test
/// RMSE and converged KL. `base` supplies everything except the prior and
/// seed.
pub fn prior_sweep(
    priors: &[f64],
    seeds: &[u64],
    fixtures: &[PreparedBuilding],
    base: &TrainConfig,
    protocol: &Protocol,
    ks: &[usize],
) -> Result<Vec<SweepRecord>> {
    if priors.is_empty() || seeds.is_empty() || fixtures.is_empty() {
        return Err(EvalError::Config("prior sweep needs priors, seeds and at least one fixture".into()));
    }
    let mut out = Vec::with_capacity(priors.len() * seeds.len());
    for &prior_variance in priors {
        for &seed in seeds {
            let cfg = TrainConfig { prior_variance, seed, ..base.clone() };
            let mut pooled = Predictions::new(protocol.horizon)?;
            let mut kl = 0.0;
            for fx in fixtures {
                let trained = train(ModelKind::LstmBnn, &fx.train, &fx.val, &cfg)?;
                kl += trained.model.kl()?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let p = predict_instants(
                    Forecaster::Neural(&trained.model),
                    &fx.dataset,
                    &fx.instants,
                    protocol.horizon,
                    protocol.n_samples,
                    &mut rng,
                )?;
                pooled.extend(&p)?;
            }
            let rmse = ks
                .iter()
                .map(|&k| Ok((k, Summary::of(&horizon_rmse(&pooled.truth, &pooled.mean, k)?)?)))
                .collect::<Result<_>>()?;
            out.push(SweepRecord { prior_variance, seed, kl: kl / fixtures.len() as f64, rmse });
        }
    }
    Ok(out)
}
