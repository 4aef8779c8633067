//! Reverse-mode differentiation over a per-step tape.
//!
//! Nodes are appended in evaluation order, so the tape is already
//! topologically sorted and acyclic; [`Tape::backward`] walks it in reverse.

use crate::error::{AutogradError, Result};
use crate::tensor::{self, broadcastable, gemm, sigmoid, softplus, tanh, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sigmoid(Var),
    Tanh(Var),
    Relu(Var),
    Softplus(Var),
    Ln(Var),
    Square(Var),
    AbsSum(Var),
    Sum(Var),
    SliceCols(Var, usize, usize),
    Concat(Vec<Var>),
    /// `out[i, j] = Σ_k input[i, k] · scale[k, j] · noise[i, k, j]`.
    PerturbedMatMul {
        input: Var,
        scale: Var,
        noise: Tensor,
    },
    /// `c = σ(f) ⊙ c_prev + σ(i) ⊙ tanh(q)` from packed `[f | i | q | o]` gates.
    /// `act` holds `[σ(f) | σ(i) | tanh(q)]` for the backward pass.
    LstmCell {
        gates: Var,
        prev: Option<Var>,
        act: Vec<f64>,
    },
    /// `h = σ(o) ⊙ tanh(c)`; `act` holds `[σ(o) | tanh(c)]`.
    LstmOutput {
        gates: Var,
        cell: Var,
        act: Vec<f64>,
    },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Softplus(_) => "softplus",
            Op::Ln(_) => "ln",
            Op::Square(_) => "square",
            Op::AbsSum(_) => "abs_sum",
            Op::Sum(_) => "sum",
            Op::SliceCols(..) => "slice",
            Op::Concat(_) => "concat",
            Op::PerturbedMatMul { .. } => "perturbed_matmul",
            Op::LstmCell { .. } => "lstm_cell",
            Op::LstmOutput { .. } => "lstm_output",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.all_finite() {
            return Err(AutogradError::NonFinite(format!("output of {}", op.name())));
        }
        self.nodes.push(Node { value, op, requires_grad });
        Ok(Var(self.nodes.len() - 1))
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// A trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: true });
        Var(self.nodes.len() - 1)
    }

    /// An input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad: false });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::matmul(self.value(a), self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        self.push(out, Op::MatMul(a, b), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::add(self.value(a), self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        self.push(out, Op::Add(a, b), rg)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::sub(self.value(a), self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        self.push(out, Op::Sub(a, b), rg)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = tensor::mul(self.value(a), self.value(b))?;
        let rg = self.needs(a) || self.needs(b);
        self.push(out, Op::Mul(a, b), rg)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Result<Var> {
        let out = self.value(a).map(|x| k * x);
        let rg = self.needs(a);
        self.push(out, Op::Scale(a, k), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(sigmoid);
        let rg = self.needs(a);
        self.push(out, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(tanh);
        let rg = self.needs(a);
        self.push(out, Op::Tanh(a), rg)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x.max(0.0));
        let rg = self.needs(a);
        self.push(out, Op::Relu(a), rg)
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(softplus);
        let rg = self.needs(a);
        self.push(out, Op::Softplus(a), rg)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data().iter().any(|&x| x <= 0.0) {
            return Err(AutogradError::Domain("ln of non-positive value".into()));
        }
        let out = self.value(a).map(f64::ln);
        let rg = self.needs(a);
        self.push(out, Op::Ln(a), rg)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        let out = self.value(a).map(|x| x * x);
        let rg = self.needs(a);
        self.push(out, Op::Square(a), rg)
    }

    /// `Σ |x|` as a scalar.
    pub fn abs_sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().map(|x| x.abs()).sum();
        let rg = self.needs(a);
        self.push(Tensor::scalar(s), Op::AbsSum(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        let rg = self.needs(a);
        self.push(Tensor::scalar(s), Op::Sum(a), rg)
    }

    /// Columns `[start, end)` over the last axis.
    pub fn slice(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let out = tensor::slice_cols(self.value(a), start, end)?;
        let rg = self.needs(a);
        self.push(out, Op::SliceCols(a, start, end), rg)
    }

    /// Concatenation over the last axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let vals: Vec<&Tensor> = parts.iter().map(|&p| self.value(p)).collect();
        let out = tensor::concat_cols(&vals)?;
        let rg = parts.iter().any(|&p| self.needs(p));
        self.push(out, Op::Concat(parts.to_vec()), rg)
    }

    /// Product of `input` `[N, I]` with per-row weights `scale ⊙ noise[i]`,
    /// where `scale` is `[I, O]` and `noise` is `[N, I, O]`.
    pub fn perturbed_matmul(&mut self, input: Var, scale: Var, noise: Tensor) -> Result<Var> {
        let (x, s) = (self.value(input), self.value(scale));
        if x.shape().len() != 2 || s.shape().len() != 2 || x.shape()[1] != s.shape()[0] {
            return Err(AutogradError::Shape(format!("perturbed_matmul {:?} x {:?}", x.shape(), s.shape())));
        }
        let (n, i_dim, o_dim) = (x.shape()[0], s.shape()[0], s.shape()[1]);
        if noise.shape() != [n, i_dim, o_dim] {
            return Err(AutogradError::Shape(format!("noise {:?}, expected {:?}", noise.shape(), [n, i_dim, o_dim])));
        }
        let (xd, sd, ed) = (x.data(), s.data(), noise.data());
        let mut out = vec![0.0; n * o_dim];
        for r in 0..n {
            let row = &mut out[r * o_dim..(r + 1) * o_dim];
            for k in 0..i_dim {
                let xk = xd[r * i_dim + k];
                let srow = &sd[k * o_dim..(k + 1) * o_dim];
                let erow = &ed[(r * i_dim + k) * o_dim..(r * i_dim + k + 1) * o_dim];
                for j in 0..o_dim {
                    row[j] += xk * srow[j] * erow[j];
                }
            }
        }
        let rg = self.needs(input) || self.needs(scale);
        self.push(Tensor::new(&[n, o_dim], out)?, Op::PerturbedMatMul { input, scale, noise }, rg)
    }

    fn gate_shape(&self, gates: Var, state: Option<Var>) -> Result<(usize, usize)> {
        let g = self.value(gates).shape();
        if g.len() != 2 || !g[1].is_multiple_of(4) || g[1] == 0 {
            return Err(AutogradError::Shape(format!("packed gates {g:?}")));
        }
        let (n, d) = (g[0], g[1] / 4);
        if let Some(s) = state {
            if self.value(s).shape() != [n, d] {
                return Err(AutogradError::Shape(format!("state {:?} for gates {g:?}", self.value(s).shape())));
            }
        }
        Ok((n, d))
    }

    /// LSTM cell update from pre-activation gates `[N, 4D]` ordered
    /// forget, input, candidate, output. A missing `prev` is a zero cell.
    pub fn lstm_cell(&mut self, gates: Var, prev: Option<Var>) -> Result<Var> {
        let (n, d) = self.gate_shape(gates, prev)?;
        let gv = self.value(gates).data();
        let pv = prev.map(|p| self.value(p).data());
        let mut out = vec![0.0; n * d];
        let mut act = vec![0.0; 3 * n * d];
        for r in 0..n {
            let row = &gv[r * 4 * d..(r + 1) * 4 * d];
            let a = &mut act[r * 3 * d..(r + 1) * 3 * d];
            for j in 0..d {
                let (si, tq) = (sigmoid(row[d + j]), tanh(row[2 * d + j]));
                a[d + j] = si;
                a[2 * d + j] = tq;
                out[r * d + j] = match pv {
                    Some(p) => {
                        let sf = sigmoid(row[j]);
                        a[j] = sf;
                        sf * p[r * d + j] + si * tq
                    }
                    None => si * tq,
                };
            }
        }
        let rg = self.needs(gates) || prev.is_some_and(|p| self.needs(p));
        self.push(Tensor::new(&[n, d], out)?, Op::LstmCell { gates, prev, act }, rg)
    }

    /// Hidden state `σ(o) ⊙ tanh(c)` for packed gates and cell `[N, D]`.
    pub fn lstm_output(&mut self, gates: Var, cell: Var) -> Result<Var> {
        let (n, d) = self.gate_shape(gates, Some(cell))?;
        let (gv, cv) = (self.value(gates).data(), self.value(cell).data());
        let mut out = vec![0.0; n * d];
        let mut act = vec![0.0; 2 * n * d];
        for r in 0..n {
            for j in 0..d {
                let (so, tc) = (sigmoid(gv[r * 4 * d + 3 * d + j]), tanh(cv[r * d + j]));
                act[r * 2 * d + j] = so;
                act[r * 2 * d + d + j] = tc;
                out[r * d + j] = so * tc;
            }
        }
        let rg = self.needs(gates) || self.needs(cell);
        self.push(Tensor::new(&[n, d], out)?, Op::LstmOutput { gates, cell, act }, rg)
    }

    /// Gradients of a scalar node with respect to every leaf on the tape.
    /// Intermediate gradients are released as soon as they are propagated.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(AutogradError::Graph(format!("loss must be scalar, has shape {:?}", self.value(loss).shape())));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::full(self.value(loss).shape(), 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let y = &node.value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                    if self.needs(*a) {
                        // dA = G · Bᵀ
                        let mut da = Tensor::zeros(&[m, k]);
                        gemm(m, n, k, g.data(), n as isize, 1, bv.data(), 1, n as isize, da.data_mut(), 0.0);
                        accumulate(&mut grads, *a, da)?;
                    }
                    if self.needs(*b) {
                        // dB = Aᵀ · G
                        let mut db = Tensor::zeros(&[k, n]);
                        gemm(k, m, n, av.data(), 1, k as isize, g.data(), n as isize, 1, db.data_mut(), 0.0);
                        accumulate(&mut grads, *b, db)?;
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads, *b, reduce_to(&g, self.value(*b).shape()))?;
                    }
                    if self.needs(*a) {
                        let da =
                            if self.value(*a).shape() == g.shape() { g } else { reduce_to(&g, self.value(*a).shape()) };
                        accumulate(&mut grads, *a, da)?;
                    }
                    continue;
                }
                Op::Sub(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads, *a, reduce_to(&g, self.value(*a).shape()))?;
                    }
                    if self.needs(*b) {
                        let neg = g.map(|v| -v);
                        accumulate(&mut grads, *b, reduce_to(&neg, self.value(*b).shape()))?;
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    if self.needs(*a) {
                        let ga = tensor::mul(&g, bv)?;
                        accumulate(&mut grads, *a, reduce_to(&ga, av.shape()))?;
                    }
                    if self.needs(*b) {
                        let gb = tensor::mul(&g, av)?;
                        accumulate(&mut grads, *b, reduce_to(&gb, bv.shape()))?;
                    }
                }
                Op::Scale(a, k) => accumulate(&mut grads, *a, g.map(|v| k * v))?,
                Op::Sigmoid(a) => {
                    let d = zip(&g, y, |gv, s| gv * s * (1.0 - s));
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Tanh(a) => {
                    let d = zip(&g, y, |gv, t| gv * (1.0 - t * t));
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Relu(a) => {
                    let d = zip(&g, self.value(*a), |gv, x| if x > 0.0 { gv } else { 0.0 });
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Softplus(a) => {
                    let d = zip(&g, self.value(*a), |gv, x| gv * sigmoid(x));
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Ln(a) => {
                    let d = zip(&g, self.value(*a), |gv, x| gv / x);
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Square(a) => {
                    let d = zip(&g, self.value(*a), |gv, x| 2.0 * gv * x);
                    accumulate(&mut grads, *a, d)?;
                }
                Op::AbsSum(a) => {
                    let gs = g.item();
                    let d = self.value(*a).map(|x| gs * sign(x));
                    accumulate(&mut grads, *a, d)?;
                }
                Op::Sum(a) => {
                    let d = Tensor::full(self.value(*a).shape(), g.item());
                    accumulate(&mut grads, *a, d)?;
                }
                Op::SliceCols(a, start, end) => {
                    let av = self.value(*a);
                    let (rows, cols) = av.as_matrix();
                    let w = end - start;
                    let slot = grads[a.0].get_or_insert_with(|| Tensor::zeros(av.shape()));
                    let dd = slot.data_mut();
                    for r in 0..rows {
                        let dst = &mut dd[r * cols + start..r * cols + end];
                        for (d, v) in dst.iter_mut().zip(&g.data()[r * w..(r + 1) * w]) {
                            *d += v;
                        }
                    }
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let c = *self.value(p).shape().last().unwrap();
                        if self.needs(p) {
                            let d = tensor::slice_cols(&g, offset, offset + c)?;
                            accumulate(&mut grads, p, d)?;
                        }
                        offset += c;
                    }
                }
                Op::PerturbedMatMul { input, scale, noise } => {
                    let (x, s) = (self.value(*input), self.value(*scale));
                    let (n, i_dim, o_dim) = (x.shape()[0], s.shape()[0], s.shape()[1]);
                    let (xd, sd, ed, gd) = (x.data(), s.data(), noise.data(), g.data());
                    let mut dx = vec![0.0; n * i_dim];
                    let mut ds = vec![0.0; i_dim * o_dim];
                    for r in 0..n {
                        let grow = &gd[r * o_dim..(r + 1) * o_dim];
                        for k in 0..i_dim {
                            let xk = xd[r * i_dim + k];
                            let srow = &sd[k * o_dim..(k + 1) * o_dim];
                            let erow = &ed[(r * i_dim + k) * o_dim..(r * i_dim + k + 1) * o_dim];
                            let dsrow = &mut ds[k * o_dim..(k + 1) * o_dim];
                            let mut acc = 0.0;
                            for j in 0..o_dim {
                                let ge = grow[j] * erow[j];
                                acc += ge * srow[j];
                                dsrow[j] += ge * xk;
                            }
                            dx[r * i_dim + k] = acc;
                        }
                    }
                    if self.needs(*input) {
                        accumulate(&mut grads, *input, Tensor::new(&[n, i_dim], dx)?)?;
                    }
                    if self.needs(*scale) {
                        accumulate(&mut grads, *scale, Tensor::new(&[i_dim, o_dim], ds)?)?;
                    }
                }
                Op::LstmCell { gates, prev, act } => {
                    let gv = self.value(*gates);
                    let (n, d) = (gv.shape()[0], gv.shape()[1] / 4);
                    let gd = g.data();
                    let pv = prev.map(|p| self.value(p).data());
                    if self.needs(*gates) {
                        let slot = grads[gates.0].get_or_insert_with(|| Tensor::zeros(gv.shape()));
                        let dd = slot.data_mut();
                        for r in 0..n {
                            let a = &act[r * 3 * d..(r + 1) * 3 * d];
                            let drow = &mut dd[r * 4 * d..(r + 1) * 4 * d];
                            for j in 0..d {
                                let gc = gd[r * d + j];
                                let (si, tq) = (a[d + j], a[2 * d + j]);
                                drow[d + j] += gc * tq * si * (1.0 - si);
                                drow[2 * d + j] += gc * si * (1.0 - tq * tq);
                                if let Some(p) = pv {
                                    drow[j] += gc * p[r * d + j] * a[j] * (1.0 - a[j]);
                                }
                            }
                        }
                    }
                    if let Some(p) = prev.filter(|&p| self.needs(p)) {
                        let mut dp = vec![0.0; n * d];
                        for r in 0..n {
                            for j in 0..d {
                                dp[r * d + j] = gd[r * d + j] * act[r * 3 * d + j];
                            }
                        }
                        accumulate(&mut grads, p, Tensor::new(&[n, d], dp)?)?;
                    }
                }
                Op::LstmOutput { gates, cell, act } => {
                    let gv = self.value(*gates);
                    let (n, d) = (gv.shape()[0], gv.shape()[1] / 4);
                    let gd = g.data();
                    if self.needs(*gates) {
                        let slot = grads[gates.0].get_or_insert_with(|| Tensor::zeros(gv.shape()));
                        let dd = slot.data_mut();
                        for r in 0..n {
                            for j in 0..d {
                                let (so, tc) = (act[r * 2 * d + j], act[r * 2 * d + d + j]);
                                dd[r * 4 * d + 3 * d + j] += gd[r * d + j] * tc * so * (1.0 - so);
                            }
                        }
                    }
                    if self.needs(*cell) {
                        let mut dc = vec![0.0; n * d];
                        for r in 0..n {
                            for j in 0..d {
                                let (so, tc) = (act[r * 2 * d + j], act[r * 2 * d + d + j]);
                                dc[r * d + j] = gd[r * d + j] * so * (1.0 - tc * tc);
                            }
                        }
                        accumulate(&mut grads, *cell, Tensor::new(&[n, d], dc)?)?;
                    }
                }
            }
            if matches!(node.op, Op::Leaf) {
                grads[idx] = Some(g);
            }
        }
        Ok(Gradients { grads, shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect() })
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data).expect("same shape")
}

/// Sum a broadcast gradient back down to `shape`.
fn reduce_to(g: &Tensor, shape: &[usize]) -> Tensor {
    if g.shape() == shape {
        return g.clone();
    }
    debug_assert!(broadcastable(g.shape(), shape));
    let mut out = Tensor::zeros(shape);
    let inner = out.len();
    let od = out.data_mut();
    for chunk in g.data().chunks_exact(inner) {
        for (o, v) in od.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    out
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, d: Tensor) -> Result<()> {
    match &mut grads[v.0] {
        Some(existing) => {
            if existing.shape() != d.shape() {
                return Err(AutogradError::Graph("gradient shape mismatch".into()));
            }
            for (e, x) in existing.data_mut().iter_mut().zip(d.data()) {
                *e += x;
            }
        }
        slot => *slot = Some(d),
    }
    Ok(())
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; zeros when `v` does not influence the loss.
    pub fn get(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }

    pub fn take(&mut self, v: Var) -> Tensor {
        match self.grads[v.0].take() {
            Some(g) => g,
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }
}
