//! Training objectives built on the autodiff tape.
//!
//! Parameters travel as a flat tensor list:
//! deterministic `[w_x, w_h, b, w1, b1, w2, b2]`,
//! Bayesian `[w_x, w_h, b, mu_w1, mu_b1, rho_w1, rho_b1, w2, b2]`
//! with `sigma = softplus(rho)`.

use heatcast_autograd::{Tape, Tensor, Var};
use heatcast_core::NUM_FEATURES;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DlError, Result};
use crate::model::{Head, ModelKind, NeuralModel};
use crate::params::{Linear, LstmParams, MlpParams, VariationalLayer};

/// Full-batch inputs split by time step.
#[derive(Debug, Clone)]
pub struct Batch {
    /// `L` tensors of shape `[N, M]`.
    pub steps: Vec<Tensor>,
    /// `[N, 1]`.
    pub targets: Tensor,
}

impl Batch {
    /// From `[N, L, M]` normalized windows and `N` targets.
    pub fn new(windows: &[f64], targets: &[f64]) -> Result<Self> {
        let n = targets.len();
        if n == 0 || !windows.len().is_multiple_of(n * NUM_FEATURES) {
            return Err(DlError::Shape(format!("{} window values for {n} targets", windows.len())));
        }
        let len = windows.len() / (n * NUM_FEATURES);
        let steps = (0..len)
            .map(|t| {
                let mut xt = Vec::with_capacity(n * NUM_FEATURES);
                for i in 0..n {
                    let at = (i * len + t) * NUM_FEATURES;
                    xt.extend_from_slice(&windows[at..at + NUM_FEATURES]);
                }
                Tensor::new(&[n, NUM_FEATURES], xt)
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { steps, targets: Tensor::new(&[n, 1], targets.to_vec())? })
    }

    pub fn len(&self) -> usize {
        self.targets.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Standard-normal draws for the variational layer, one set per sample.
#[derive(Debug, Clone)]
pub struct Noise {
    /// `[N, in, out]`.
    pub w: Tensor,
    /// `[N, out]`.
    pub b: Tensor,
}

impl Noise {
    pub fn sample<R: Rng + ?Sized>(n: usize, inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let w = Tensor::from_fn(&[n, inputs, outputs], |_| rng.sample(StandardNormal));
        let b = Tensor::from_fn(&[n, outputs], |_| rng.sample(StandardNormal));
        Self { w, b }
    }
}

pub fn flatten(model: &NeuralModel) -> Vec<Tensor> {
    let l = &model.lstm;
    let mut out = vec![l.w_x.clone(), l.w_h.clone(), l.b.clone()];
    match &model.head {
        Head::Deterministic(mlp) => {
            out.extend([mlp.layer1.w.clone(), mlp.layer1.b.clone(), mlp.layer2.w.clone(), mlp.layer2.b.clone()])
        }
        Head::Bayesian { layer1, layer2 } => {
            let (rw, rb) = layer1.rho();
            out.extend([layer1.mu.w.clone(), layer1.mu.b.clone(), rw, rb, layer2.w.clone(), layer2.b.clone()]);
        }
    }
    out
}

/// Inverse of [`flatten`]; `template` supplies the kind, prior and norm stats.
pub fn unflatten(template: &NeuralModel, mut p: Vec<Tensor>) -> Result<NeuralModel> {
    let expected = match template.kind() {
        ModelKind::LstmMlp => 7,
        ModelKind::LstmBnn => 9,
    };
    if p.len() != expected {
        return Err(DlError::Shape(format!("{} parameter tensors, expected {expected}", p.len())));
    }
    let mut next = || p.remove(0);
    let lstm = LstmParams { w_x: next(), w_h: next(), b: next() };
    let head = match &template.head {
        Head::Deterministic(_) => Head::Deterministic(MlpParams {
            layer1: Linear { w: next(), b: next() },
            layer2: Linear { w: next(), b: next() },
        }),
        Head::Bayesian { layer1, .. } => {
            let mu = Linear { w: next(), b: next() };
            let sp = heatcast_autograd::tensor::softplus;
            let sigma = Linear { w: next().map(sp), b: next().map(sp) };
            let layer2 = Linear { w: next(), b: next() };
            Head::Bayesian { layer1: VariationalLayer { mu, sigma, prior_variance: layer1.prior_variance }, layer2 }
        }
    };
    let model = NeuralModel { lstm, head, norm_stats: template.norm_stats.clone() };
    model.validate()?;
    Ok(model)
}

fn lstm_graph(tape: &mut Tape, p: &[Var], steps: &[Tensor]) -> Result<Var> {
    let (w_x, w_h, b) = (p[0], p[1], p[2]);
    let mut state: Option<(Var, Var)> = None;
    for xt in steps {
        let x = tape.constant(xt.clone());
        let mut g = tape.matmul(x, w_x)?;
        if let Some((h, _)) = state {
            let gh = tape.matmul(h, w_h)?;
            g = tape.add(g, gh)?;
        }
        let g = tape.add(g, b)?;
        // A missing previous cell drops the forget-gate term at the first step.
        let c = tape.lstm_cell(g, state.map(|(_, c)| c))?;
        let h = tape.lstm_output(g, c)?;
        state = Some((h, c));
    }
    state.map(|(h, _)| h).ok_or_else(|| DlError::Shape("empty window".into()))
}

fn affine(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let xw = tape.matmul(x, w)?;
    Ok(tape.add(xw, b)?)
}

/// `KL(N(mu, sigma²) || N(0, β²))` summed over weights and biases.
fn kl_graph(tape: &mut Tape, mus: [Var; 2], sigmas: [Var; 2], prior_variance: f64) -> Result<Var> {
    let n: usize = mus.iter().map(|&m| tape.value(m).len()).sum();
    let mut ln_sum = None;
    let mut sq_sum = None;
    let acc = |tape: &mut Tape, total: Option<Var>, v: Var| -> Result<Option<Var>> {
        let s = tape.sum(v)?;
        Ok(Some(match total {
            None => s,
            Some(t) => tape.add(t, s)?,
        }))
    };
    for &s in &sigmas {
        let l = tape.ln(s)?;
        ln_sum = acc(tape, ln_sum, l)?;
        let sq = tape.square(s)?;
        sq_sum = acc(tape, sq_sum, sq)?;
    }
    for &m in &mus {
        let sq = tape.square(m)?;
        sq_sum = acc(tape, sq_sum, sq)?;
    }
    let quad = tape.scale(sq_sum.unwrap(), 1.0 / (2.0 * prior_variance))?;
    let neg_ln = tape.scale(ln_sum.unwrap(), -1.0)?;
    let kl = tape.add(quad, neg_ln)?;
    let constant = tape.constant(Tensor::scalar(n as f64 * (0.5 * prior_variance.ln() - 0.5)));
    Ok(tape.add(kl, constant)?)
}

/// Options for [`loss_and_gradients`].
#[derive(Debug, Clone, Copy)]
pub struct Objective {
    pub kl_weight: f64,
    pub prior_variance: f64,
    /// Treat `rho` as a constant (BNN only).
    pub freeze_sigma: bool,
}

/// Mean absolute error (plus `kl_weight · KL` for BNNs) and its gradient
/// with respect to every tensor of `params`.
pub fn loss_and_gradients(
    kind: ModelKind,
    params: &[Tensor],
    batch: &Batch,
    noise: Option<&Noise>,
    objective: Objective,
) -> Result<(f64, Vec<Tensor>)> {
    let mut tape = Tape::new();
    let frozen = |i: usize| kind == ModelKind::LstmBnn && objective.freeze_sigma && (i == 5 || i == 6);
    let vars: Vec<Var> = params
        .iter()
        .enumerate()
        .map(|(i, t)| if frozen(i) { tape.constant(t.clone()) } else { tape.param(t.clone()) })
        .collect();
    let h = lstm_graph(&mut tape, &vars[..3], &batch.steps)?;
    let n = batch.len();
    let (out, kl) = match kind {
        ModelKind::LstmMlp => {
            let z = affine(&mut tape, h, vars[3], vars[4])?;
            let z = tape.relu(z)?;
            (affine(&mut tape, z, vars[5], vars[6])?, None)
        }
        ModelKind::LstmBnn => {
            let noise = noise.ok_or_else(|| DlError::Config("BNN objective needs noise".into()))?;
            let (mu_w, mu_b, rho_w, rho_b) = (vars[3], vars[4], vars[5], vars[6]);
            let sig_w = tape.softplus(rho_w)?;
            let sig_b = tape.softplus(rho_b)?;
            let mean_part = affine(&mut tape, h, mu_w, mu_b)?;
            let w_noise = tape.perturbed_matmul(h, sig_w, noise.w.clone())?;
            let eb = tape.constant(noise.b.clone());
            let b_noise = tape.mul(eb, sig_b)?;
            let pre = tape.add(mean_part, w_noise)?;
            let pre = tape.add(pre, b_noise)?;
            let z = tape.relu(pre)?;
            let out = affine(&mut tape, z, vars[7], vars[8])?;
            let kl = if objective.kl_weight != 0.0 {
                Some(kl_graph(&mut tape, [mu_w, mu_b], [sig_w, sig_b], objective.prior_variance)?)
            } else {
                None
            };
            (out, kl)
        }
    };
    let y = tape.constant(batch.targets.clone());
    let diff = tape.sub(out, y)?;
    let l1 = tape.abs_sum(diff)?;
    let mut loss = tape.scale(l1, 1.0 / n as f64)?;
    if let Some(kl) = kl {
        let weighted = tape.scale(kl, objective.kl_weight)?;
        loss = tape.add(loss, weighted)?;
    }
    let value = tape.value(loss).item();
    let mut grads = tape.backward(loss)?;
    Ok((value, vars.iter().map(|&v| grads.take(v)).collect()))
}
