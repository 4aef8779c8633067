//! Tape-free forward passes used for inference.

use heatcast_autograd::tensor::{matmul, sigmoid, tanh};
use heatcast_autograd::Tensor;
use heatcast_core::NUM_FEATURES;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DlError, Result};
use crate::params::{Linear, LstmParams, MlpParams, VariationalLayer};

/// Final hidden states `[N, D]` for `n` windows stored as `[N, L, M]`.
pub fn lstm_forward_batch(params: &LstmParams, windows: &[f64], n: usize) -> Result<Tensor> {
    params.validate()?;
    if n == 0 || !windows.len().is_multiple_of(n * NUM_FEATURES) {
        return Err(DlError::Shape(format!("{} values do not form {n} windows", windows.len())));
    }
    let len = windows.len() / (n * NUM_FEATURES);
    let d = params.hidden();
    let mut h = Tensor::zeros(&[n, d]);
    let mut c = vec![0.0; n * d];
    for t in 0..len {
        let mut xt = Vec::with_capacity(n * NUM_FEATURES);
        for i in 0..n {
            let at = (i * len + t) * NUM_FEATURES;
            xt.extend_from_slice(&windows[at..at + NUM_FEATURES]);
        }
        let xt = Tensor::new(&[n, NUM_FEATURES], xt)?;
        let gx = matmul(&xt, &params.w_x)?;
        let gh = matmul(&h, &params.w_h)?;
        let (gx, gh, b) = (gx.data(), gh.data(), params.b.data());
        let hd = h.data_mut();
        for i in 0..n {
            for j in 0..d {
                let pre = |k: usize| gx[i * 4 * d + k * d + j] + gh[i * 4 * d + k * d + j] + b[k * d + j];
                let f = sigmoid(pre(0));
                let ig = sigmoid(pre(1));
                let q = tanh(pre(2));
                let o = sigmoid(pre(3));
                let cell = f * c[i * d + j] + ig * q;
                c[i * d + j] = cell;
                hd[i * d + j] = o * tanh(cell);
            }
        }
    }
    Ok(h)
}

/// Final hidden state for one `L × M` window.
pub fn lstm_forward(window: &[f64], params: &LstmParams) -> Result<Vec<f64>> {
    Ok(lstm_forward_batch(params, window, 1)?.into_data())
}

fn affine(x: &Tensor, layer: &Linear) -> Result<Tensor> {
    Ok(heatcast_autograd::tensor::add(&matmul(x, &layer.w)?, &layer.b)?)
}

pub(crate) fn mlp_batch(h: &Tensor, mlp: &MlpParams) -> Result<Vec<f64>> {
    let z = affine(h, &mlp.layer1)?.map(|v| v.max(0.0));
    Ok(affine(&z, &mlp.layer2)?.into_data())
}

/// Head output with first-layer weights `mu + sigma ⊙ ε`, one draw per row.
pub(crate) fn stochastic_head_batch<R: Rng + ?Sized>(
    h: &Tensor,
    layer1: &VariationalLayer,
    layer2: &Linear,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (n, d) = (h.shape()[0], h.shape()[1]);
    let out = layer1.mu.outputs();
    let mut pre = affine(h, &layer1.mu)?.into_data();
    let (sw, sb) = (layer1.sigma.w.data(), layer1.sigma.b.data());
    for i in 0..n {
        let row = &mut pre[i * out..(i + 1) * out];
        for k in 0..d {
            let x = h.data()[i * d + k];
            for (j, r) in row.iter_mut().enumerate() {
                let e: f64 = rng.sample(StandardNormal);
                *r += x * sw[k * out + j] * e;
            }
        }
        for (j, r) in row.iter_mut().enumerate() {
            let e: f64 = rng.sample(StandardNormal);
            *r += sb[j] * e;
        }
    }
    let z = Tensor::new(&[n, out], pre)?.map(|v| v.max(0.0));
    Ok(affine(&z, layer2)?.into_data())
}

/// `Δŷ` for one normalized window.
pub fn forward_deterministic(window: &[f64], lstm: &LstmParams, mlp: &MlpParams) -> Result<f64> {
    let h = lstm_forward_batch(lstm, window, 1)?;
    mlp.validate(lstm.hidden())?;
    Ok(mlp_batch(&h, mlp)?[0])
}

/// `Δŷ` for one normalized window under a fresh draw of the first head layer.
pub fn forward_stochastic<R: Rng + ?Sized>(
    window: &[f64],
    lstm: &LstmParams,
    layer1: &VariationalLayer,
    layer2: &Linear,
    rng: &mut R,
) -> Result<f64> {
    layer1.validate()?;
    let h = lstm_forward_batch(lstm, window, 1)?;
    if layer1.mu.inputs() != lstm.hidden() || layer2.inputs() != layer1.mu.outputs() || layer2.outputs() != 1 {
        return Err(DlError::Shape("head does not match the LSTM".into()));
    }
    Ok(stochastic_head_batch(&h, layer1, layer2, rng)?[0])
}
