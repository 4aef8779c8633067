use heatcast_autograd::check::{central_difference, max_relative_error};
use heatcast_autograd::{AutogradError, Tape, Tensor, Var};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const TOL: f64 = 1e-4;
const FLOOR: f64 = 1e-3;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], away_from_zero: bool) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let v: f64 = rng.random_range(-1.5..1.5);
        if away_from_zero && v.abs() < 0.05 {
            v.signum() * 0.05 + v
        } else {
            v
        }
    })
}

/// Compare tape gradients of `build` against central differences.
fn check(params: Vec<Tensor>, build: impl Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = build(&mut tape, &vars);
    let grads = tape.backward(loss).unwrap();
    let analytic: Vec<Tensor> = vars.iter().map(|&v| grads.get(v)).collect();
    let numeric = central_difference(&params, H, |ps| {
        let mut t = Tape::new();
        let vs: Vec<Var> = ps.iter().map(|p| t.param(p.clone())).collect();
        let l = build(&mut t, &vs);
        t.value(l).item()
    });
    max_relative_error(&analytic, &numeric, FLOOR)
}

/// Weighted sum so that every output entry gets a distinct upstream gradient.
fn weighted_sum(tape: &mut Tape, v: Var) -> Var {
    let shape = tape.value(v).shape().to_vec();
    let w = Tensor::from_fn(&shape, |i| 0.3 + 0.17 * ((i * 7) % 11) as f64);
    let w = tape.constant(w);
    let p = tape.mul(v, w).unwrap();
    tape.sum(p).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn matmul_grad(seed in 0u64..10_000, m in 1usize..=8, k in 1usize..=8, n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = vec![random(&mut rng, &[m, k], false), random(&mut rng, &[k, n], false)];
        let err = check(ps, |t, v| { let y = t.matmul(v[0], v[1]).unwrap(); weighted_sum(t, y) });
        prop_assert!(err < TOL, "{err}");
    }

    #[test]
    fn broadcast_add_and_mul_grad(seed in 0u64..10_000, m in 1usize..=8, n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = vec![random(&mut rng, &[m, n], false), random(&mut rng, &[n], false)];
        let err = check(ps.clone(), |t, v| { let y = t.add(v[0], v[1]).unwrap(); weighted_sum(t, y) });
        prop_assert!(err < TOL, "add {err}");
        let err = check(ps.clone(), |t, v| { let y = t.mul(v[0], v[1]).unwrap(); weighted_sum(t, y) });
        prop_assert!(err < TOL, "mul {err}");
        let err = check(ps, |t, v| { let y = t.sub(v[1], v[0]).unwrap(); weighted_sum(t, y) });
        prop_assert!(err < TOL, "sub {err}");
    }

    #[test]
    fn unary_grads(seed in 0u64..10_000, m in 1usize..=8, n in 1usize..=8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&mut rng, &[m, n], true);
        type Unary = fn(&mut Tape, Var) -> Var;
        let ops: [(&str, Unary); 6] = [
            ("sigmoid", |t, v| t.sigmoid(v).unwrap()),
            ("tanh", |t, v| t.tanh(v).unwrap()),
            ("relu", |t, v| t.relu(v).unwrap()),
            ("softplus", |t, v| t.softplus(v).unwrap()),
            ("square", |t, v| t.square(v).unwrap()),
            ("scale", |t, v| t.scale(v, -2.5).unwrap()),
        ];
        for (name, op) in ops {
            let err = check(vec![x.clone()], |t, v| { let y = op(t, v[0]); weighted_sum(t, y) });
            prop_assert!(err < TOL, "{name}: {err}");
        }
        let pos = x.map(|v| v.abs() + 0.1);
        let err = check(vec![pos], |t, v| { let y = t.ln(v[0]).unwrap(); weighted_sum(t, y) });
        prop_assert!(err < TOL, "ln: {err}");
        let err = check(vec![x], |t, v| t.abs_sum(v[0]).unwrap());
        prop_assert!(err < TOL, "abs_sum: {err}");
    }

    #[test]
    fn slice_concat_grad(seed in 0u64..10_000, m in 1usize..=8, n in 2usize..=8, cut in 1usize..8) {
        let cut = cut.min(n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = vec![random(&mut rng, &[m, n], false), random(&mut rng, &[m, 3], false)];
        let err = check(ps, |t, v| {
            let a = t.slice(v[0], 0, cut).unwrap();
            let b = t.slice(v[0], cut, n).unwrap();
            let c = t.concat(&[b, v[1], a]).unwrap();
            weighted_sum(t, c)
        });
        prop_assert!(err < TOL, "{err}");
    }

    #[test]
    fn perturbed_matmul_grad(seed in 0u64..10_000, n in 1usize..=6, i in 1usize..=6, o in 1usize..=6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = random(&mut rng, &[n, i, o], false);
        let ps = vec![random(&mut rng, &[n, i], false), random(&mut rng, &[i, o], false)];
        let err = check(ps, move |t, v| {
            let y = t.perturbed_matmul(v[0], v[1], noise.clone()).unwrap();
            weighted_sum(t, y)
        });
        prop_assert!(err < TOL, "{err}");
    }

    #[test]
    fn lstm_cell_grads(seed in 0u64..10_000, n in 1usize..=5, d in 1usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ps = vec![random(&mut rng, &[n, 4 * d], false), random(&mut rng, &[n, d], false)];
        let err = check(ps.clone(), |t, v| {
            let c = t.lstm_cell(v[0], Some(v[1])).unwrap();
            let h = t.lstm_output(v[0], c).unwrap();
            let a = weighted_sum(t, c);
            let b = weighted_sum(t, h);
            t.add(a, b).unwrap()
        });
        prop_assert!(err < TOL, "{err}");
        let err = check(ps[..1].to_vec(), |t, v| {
            let c = t.lstm_cell(v[0], None).unwrap();
            let h = t.lstm_output(v[0], c).unwrap();
            weighted_sum(t, h)
        });
        prop_assert!(err < TOL, "{err}");
    }
}

#[test]
fn two_layer_network() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let x = random(&mut rng, &[5, 4], false);
    let y = random(&mut rng, &[5, 1], false);
    let ps = vec![
        random(&mut rng, &[4, 6], false),
        random(&mut rng, &[6], false),
        random(&mut rng, &[6, 1], false),
        random(&mut rng, &[1], false),
    ];
    let err = check(ps, |t, v| {
        let xc = t.constant(x.clone());
        let yc = t.constant(y.clone());
        let h = t.matmul(xc, v[0]).unwrap();
        let h = t.add(h, v[1]).unwrap();
        let h = t.tanh(h).unwrap();
        let o = t.matmul(h, v[2]).unwrap();
        let o = t.add(o, v[3]).unwrap();
        let e = t.sub(o, yc).unwrap();
        let l = t.abs_sum(e).unwrap();
        t.scale(l, 1.0 / 5.0).unwrap()
    });
    assert!(err < TOL, "{err}");
}

#[test]
fn sigmoid_at_zero() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::scalar(0.0));
    let y = t.sigmoid(x).unwrap();
    assert_eq!(t.value(y).item(), 0.5);
}

#[test]
fn abs_sum_subgradient() {
    let mut t = Tape::new();
    let x = t.param(Tensor::new(&[3], vec![1.5, -2.0, 0.0]).unwrap());
    let l = t.abs_sum(x).unwrap();
    assert_eq!(t.backward(l).unwrap().get(x).data(), &[1.0, -1.0, 0.0]);
}

#[test]
fn linear_map_gradient_is_outer_product() {
    // loss = Σ (W x): dL/dW[i, j] = x[i] for W laid out as [in, out].
    let mut t = Tape::new();
    let x = t.constant(Tensor::new(&[1, 3], vec![0.5, -1.0, 2.0]).unwrap());
    let w = t.param(Tensor::from_fn(&[3, 2], |i| i as f64));
    let y = t.matmul(x, w).unwrap();
    let l = t.sum(y).unwrap();
    let g = t.backward(l).unwrap().get(w);
    assert_eq!(g.data(), &[0.5, 0.5, -1.0, -1.0, 2.0, 2.0]);
}

#[test]
fn disconnected_parameter_gets_zero() {
    let mut t = Tape::new();
    let a = t.param(Tensor::full(&[2, 2], 1.0));
    let b = t.param(Tensor::full(&[3], 4.0));
    let sq = t.square(a).unwrap();
    let l = t.sum(sq).unwrap();
    let grads = t.backward(l).unwrap();
    assert_eq!(grads.get(b), Tensor::zeros(&[3]));
    assert_eq!(grads.get(a).data(), &[2.0; 4]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut t = Tape::new();
    let a = t.param(Tensor::zeros(&[2]));
    assert!(matches!(t.backward(a), Err(AutogradError::Graph(_))));
}

#[test]
fn shape_errors() {
    let mut t = Tape::new();
    let a = t.param(Tensor::zeros(&[2, 3]));
    let b = t.param(Tensor::zeros(&[2, 3]));
    assert!(matches!(t.matmul(a, b), Err(AutogradError::Shape(_))));
    let c = t.param(Tensor::zeros(&[4]));
    assert!(matches!(t.add(a, c), Err(AutogradError::Shape(_))));
}

#[test]
fn forward_is_bitwise_deterministic() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut t = Tape::new();
        let a = t.param(random(&mut rng, &[8, 8], false));
        let b = t.param(random(&mut rng, &[8, 8], false));
        let c = t.matmul(a, b).unwrap();
        let d = t.tanh(c).unwrap();
        t.value(d).clone()
    };
    assert_eq!(run().data(), run().data());
}

#[test]
fn fused_cell_matches_primitives() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (n, d) = (3, 2);
    let g = random(&mut rng, &[n, 4 * d], false);
    let c0 = random(&mut rng, &[n, d], false);
    let mut t = Tape::new();
    let (gv, cv) = (t.param(g), t.param(c0));
    let c = t.lstm_cell(gv, Some(cv)).unwrap();
    let h = t.lstm_output(gv, c).unwrap();
    let gate = |t: &mut Tape, k: usize| t.slice(gv, k * d, (k + 1) * d).unwrap();
    let (f, i, q, o) = (gate(&mut t, 0), gate(&mut t, 1), gate(&mut t, 2), gate(&mut t, 3));
    let (f, i, q, o) = (t.sigmoid(f).unwrap(), t.sigmoid(i).unwrap(), t.tanh(q).unwrap(), t.sigmoid(o).unwrap());
    let fc = t.mul(f, cv).unwrap();
    let iq = t.mul(i, q).unwrap();
    let c2 = t.add(fc, iq).unwrap();
    let tc = t.tanh(c2).unwrap();
    let h2 = t.mul(o, tc).unwrap();
    for (a, b) in
        t.value(c).data().iter().zip(t.value(c2).data()).chain(t.value(h).data().iter().zip(t.value(h2).data()))
    {
        assert!((a - b).abs() < 1e-15);
    }
    let mut bad = Tape::new();
    let gv = bad.param(Tensor::zeros(&[2, 6]));
    assert!(matches!(bad.lstm_cell(gv, None), Err(AutogradError::Shape(_))));
}
