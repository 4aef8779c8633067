use heatcast_autograd::tensor::softplus_inv;
use heatcast_autograd::Tensor;
use heatcast_core::NUM_FEATURES;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DlError, Result};

/// LSTM weights with the four gates packed column-wise in the order
/// forget, input, candidate, output: `w_x` is `[M, 4D]`, `w_h` is
/// `[D, 4D]` and `b` is `[4D]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Forget = 0,
    Input = 1,
    Candidate = 2,
    Output = 3,
}

fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-bound..bound))
}

impl LstmParams {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            w_x: Tensor::zeros(&[NUM_FEATURES, 4 * hidden]),
            w_h: Tensor::zeros(&[hidden, 4 * hidden]),
            b: Tensor::zeros(&[4 * hidden]),
        }
    }

    /// Uniform in ±1/sqrt(fan-in), fan-in being `M + D` per gate unit.
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let bound = 1.0 / ((NUM_FEATURES + hidden) as f64).sqrt();
        Self {
            w_x: uniform(&[NUM_FEATURES, 4 * hidden], bound, rng),
            w_h: uniform(&[hidden, 4 * hidden], bound, rng),
            b: uniform(&[4 * hidden], bound, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.w_h.shape()[0]
    }

    /// Input weights of one gate as a `[M, D]` matrix.
    pub fn input_weights(&self, gate: Gate) -> Tensor {
        let d = self.hidden();
        heatcast_autograd::tensor::slice_cols(&self.w_x, gate as usize * d, (gate as usize + 1) * d)
            .expect("packed layout")
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.hidden();
        if self.w_x.shape() != [NUM_FEATURES, 4 * d] || self.w_h.shape() != [d, 4 * d] || self.b.shape() != [4 * d] {
            return Err(DlError::Shape(format!(
                "LSTM shapes {:?} {:?} {:?} for hidden size {d}",
                self.w_x.shape(),
                self.w_h.shape(),
                self.b.shape()
            )));
        }
        if !(self.w_x.all_finite() && self.w_h.all_finite() && self.b.all_finite()) {
            return Err(DlError::Domain("non-finite LSTM weight".into()));
        }
        Ok(())
    }
}

/// Affine layer `x w + b` with `w` stored `[in, out]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: Tensor,
    pub b: Tensor,
}

impl Linear {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { w: Tensor::zeros(&[inputs, outputs]), b: Tensor::zeros(&[outputs]) }
    }

    pub fn init<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inputs as f64).sqrt();
        Self { w: uniform(&[inputs, outputs], bound, rng), b: uniform(&[outputs], bound, rng) }
    }

    pub fn inputs(&self) -> usize {
        self.w.shape()[0]
    }

    pub fn outputs(&self) -> usize {
        self.w.shape()[1]
    }

    fn validate(&self, inputs: usize, outputs: usize) -> Result<()> {
        if self.w.shape() != [inputs, outputs] || self.b.shape() != [outputs] {
            return Err(DlError::Shape(format!(
                "layer {:?} + {:?}, expected [{inputs}, {outputs}]",
                self.w.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }
}

/// Two-layer head: `D -> D/2` with ReLU, then `D/2 -> 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer1: Linear,
    pub layer2: Linear,
}

impl MlpParams {
    pub fn init<R: Rng + ?Sized>(hidden: usize, rng: &mut R) -> Self {
        let mid = hidden_mid(hidden);
        Self { layer1: Linear::init(hidden, mid, rng), layer2: Linear::init(mid, 1, rng) }
    }

    pub fn validate(&self, hidden: usize) -> Result<()> {
        self.layer1.validate(hidden, hidden_mid(hidden))?;
        self.layer2.validate(hidden_mid(hidden), 1)
    }
}

pub(crate) fn hidden_mid(hidden: usize) -> usize {
    (hidden / 2).max(1)
}

/// Factorized Gaussian over the first head layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalLayer {
    pub mu: Linear,
    pub sigma: Linear,
    /// Prior variance β² of the zero-mean isotropic prior.
    pub prior_variance: f64,
}

impl VariationalLayer {
    pub fn new(mu: Linear, sigma: f64, prior_variance: f64) -> Result<Self> {
        let sigma_layer = Linear { w: Tensor::full(mu.w.shape(), sigma), b: Tensor::full(mu.b.shape(), sigma) };
        let layer = Self { mu, sigma: sigma_layer, prior_variance };
        layer.validate()?;
        Ok(layer)
    }

    /// Zero means and constant `sigma`.
    pub fn at_zero(inputs: usize, outputs: usize, sigma: f64, prior_variance: f64) -> Result<Self> {
        Self::new(Linear::zeros(inputs, outputs), sigma, prior_variance)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.w.shape() != self.sigma.w.shape() || self.mu.b.shape() != self.sigma.b.shape() {
            return Err(DlError::Shape("mu and sigma shapes differ".into()));
        }
        let positive = self.sigma.w.data().iter().chain(self.sigma.b.data()).all(|&s| s > 0.0 && s.is_finite());
        if !positive {
            return Err(DlError::Domain("sigma must be positive and finite".into()));
        }
        if !(self.prior_variance > 0.0 && self.prior_variance.is_finite()) {
            return Err(DlError::Domain(format!("prior variance {}", self.prior_variance)));
        }
        Ok(())
    }

    /// One draw `mu + sigma ⊙ ε` of the layer weights.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Linear {
        let mut draw = |mu: &Tensor, sigma: &Tensor| {
            Tensor::from_fn(mu.shape(), |i| {
                let e: f64 = rng.sample(rand_distr::StandardNormal);
                mu.data()[i] + sigma.data()[i] * e
            })
        };
        Linear { w: draw(&self.mu.w, &self.sigma.w), b: draw(&self.mu.b, &self.sigma.b) }
    }

    pub fn num_weights(&self) -> usize {
        self.mu.w.len() + self.mu.b.len()
    }

    /// Unconstrained parameters with `softplus(rho) = sigma`.
    pub(crate) fn rho(&self) -> (Tensor, Tensor) {
        (self.sigma.w.map(softplus_inv), self.sigma.b.map(softplus_inv))
    }
}

/// Closed-form `KL(q || p)` for `q = N(mu, diag(sigma²))`, `p = N(0, β² I)`.
pub fn kl_gaussian(layer: &VariationalLayer) -> Result<f64> {
    layer.validate()?;
    let beta2 = layer.prior_variance;
    let mut kl = 0.0;
    let mus = layer.mu.w.data().iter().chain(layer.mu.b.data());
    let sigmas = layer.sigma.w.data().iter().chain(layer.sigma.b.data());
    for (&m, &s) in mus.zip(sigmas) {
        // ln(β/σ) + σ²/2β² - 1/2 = (r - 1 - ln r)/2 with r = σ²/β²;
        // ln_1p keeps q = p exact, but underflows once r - 1 rounds to -1.
        let r = s * s / beta2;
        let ln_r = if r > 0.5 { (r - 1.0).ln_1p() } else { 2.0 * s.ln() - beta2.ln() };
        kl += 0.5 * ((r - 1.0) - ln_r) + m * m / (2.0 * beta2);
    }
    Ok(kl)
}
