use heatcast_autograd::Tensor;
use heatcast_core::NUM_FEATURES;
use heatcast_dl::{
    forward_deterministic, forward_stochastic, kl_gaussian, lstm_forward, Linear, LstmParams, MlpParams,
    VariationalLayer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Per-gate weights as written in the textbook recursion: `wx[g][unit][feature]`,
/// `wh[g][unit][prev unit]`, `b[g][unit]`, gates ordered f, i, q, o.
struct Gates {
    wx: Vec<Vec<Vec<f64>>>,
    wh: Vec<Vec<Vec<f64>>>,
    b: Vec<Vec<f64>>,
}

impl Gates {
    fn random(d: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut r = || rng.random_range(-0.6..0.6);
        Self {
            wx: (0..4).map(|_| (0..d).map(|_| (0..NUM_FEATURES).map(|_| r()).collect()).collect()).collect(),
            wh: (0..4).map(|_| (0..d).map(|_| (0..d).map(|_| r()).collect()).collect()).collect(),
            b: (0..4).map(|_| (0..d).map(|_| r()).collect()).collect(),
        }
    }

    fn packed(&self) -> LstmParams {
        let d = self.b[0].len();
        let mut p = LstmParams::zeros(d);
        for g in 0..4 {
            for u in 0..d {
                for m in 0..NUM_FEATURES {
                    p.w_x.data_mut()[m * 4 * d + g * d + u] = self.wx[g][u][m];
                }
                for k in 0..d {
                    p.w_h.data_mut()[k * 4 * d + g * d + u] = self.wh[g][u][k];
                }
                p.b.data_mut()[g * d + u] = self.b[g][u];
            }
        }
        p
    }

    fn run(&self, window: &[f64]) -> Vec<f64> {
        let d = self.b[0].len();
        let mut h = vec![0.0; d];
        let mut c = vec![0.0; d];
        for x in window.chunks(NUM_FEATURES) {
            let pre = |g: usize, u: usize| {
                let a: f64 = self.wx[g][u].iter().zip(x).map(|(w, v)| w * v).sum();
                let r: f64 = self.wh[g][u].iter().zip(&h).map(|(w, v)| w * v).sum();
                a + r + self.b[g][u]
            };
            let mut next_h = vec![0.0; d];
            for u in 0..d {
                let f = sigmoid(pre(0, u));
                let i = sigmoid(pre(1, u));
                let q = pre(2, u).tanh();
                let o = sigmoid(pre(3, u));
                c[u] = f * c[u] + i * q;
                next_h[u] = o * c[u].tanh();
            }
            h = next_h;
        }
        h
    }
}

fn window(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len * NUM_FEATURES).map(|_| rng.random_range(-2.0..2.0)).collect()
}

#[test]
fn lstm_bias_only_closed_form() {
    // f = o = 1/2, i = 3/4, q = 1/2: c1 = 3/8, c2 = c1/2 + 3/8 = 9/16
    let mut p = LstmParams::zeros(2);
    for u in 0..2 {
        p.b.data_mut()[2 + u] = 3f64.ln();
        p.b.data_mut()[4 + u] = 0.5f64.atanh();
    }
    let h = lstm_forward(&[0.3; 2 * NUM_FEATURES], &p).unwrap();
    for v in h {
        assert!((v - 0.5 * (9.0f64 / 16.0).tanh()).abs() < 1e-10);
    }
}

#[test]
fn lstm_matches_reference_recursion() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (d, len) in [(2, 2), (3, 7), (5, 4)] {
        let gates = Gates::random(d, &mut rng);
        let w = window(len, &mut rng);
        let got = lstm_forward(&w, &gates.packed()).unwrap();
        for (a, b) in got.iter().zip(gates.run(&w)) {
            assert!((a - b).abs() < 1e-10, "D={d} L={len}: {a} vs {b}");
        }
    }
}

#[test]
fn lstm_zero_params_and_bad_shapes() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    assert_eq!(lstm_forward(&window(7, &mut rng), &LstmParams::zeros(4)).unwrap(), vec![0.0; 4]);
    assert!(lstm_forward(&[0.0; NUM_FEATURES + 2], &LstmParams::zeros(4)).is_err());
}

#[test]
fn composition_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let gates = Gates::random(4, &mut rng);
    let lstm = gates.packed();
    let mlp = MlpParams::init(4, &mut rng);
    for _ in 0..5 {
        let w = window(7, &mut rng);
        let h = gates.run(&w);
        let (w1, b1) = (mlp.layer1.w.data(), mlp.layer1.b.data());
        let z: Vec<f64> =
            (0..2).map(|j| (b1[j] + (0..4).map(|k| h[k] * w1[k * 2 + j]).sum::<f64>()).max(0.0)).collect();
        let expected = mlp.layer2.b.data()[0] + z[0] * mlp.layer2.w.data()[0] + z[1] * mlp.layer2.w.data()[1];
        let got = forward_deterministic(&w, &lstm, &mlp).unwrap();
        assert!((got - expected).abs() < 1e-10);
    }
}

#[test]
fn vanishing_sigma_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let lstm = LstmParams::init(6, &mut rng);
    let mlp = MlpParams::init(6, &mut rng);
    let v = VariationalLayer::new(mlp.layer1.clone(), 1e-12, 1e-3).unwrap();
    let w = window(7, &mut rng);
    let det = forward_deterministic(&w, &lstm, &mlp).unwrap();
    for _ in 0..10 {
        assert!((forward_stochastic(&w, &lstm, &v, &mlp.layer2, &mut rng).unwrap() - det).abs() < 1e-10);
    }
}

#[test]
fn stochastic_mean_matches_mean_weights() {
    // Positive first-layer biases keep the ReLU in its linear region, so the
    // output is affine in the weight noise.
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let lstm = LstmParams::init(4, &mut rng);
    let mut mlp = MlpParams::init(4, &mut rng);
    mlp.layer1.b = Tensor::full(&[2], 5.0);
    let v = VariationalLayer::new(mlp.layer1.clone(), 0.2, 1e-3).unwrap();
    let w = window(7, &mut rng);
    let det = forward_deterministic(&w, &lstm, &mlp).unwrap();
    let n = 10_000;
    let draws: Vec<f64> = (0..n).map(|_| forward_stochastic(&w, &lstm, &v, &mlp.layer2, &mut rng).unwrap()).collect();
    let mean = draws.iter().sum::<f64>() / n as f64;
    let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
    assert!(sd > 0.0);
    assert!((mean - det).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {det}");
}

fn random_layer(rng: &mut ChaCha8Rng) -> VariationalLayer {
    let mu = Linear {
        w: Tensor::from_fn(&[4, 4], |_| rng.random_range(-1.0..1.0)),
        b: Tensor::from_fn(&[4], |_| rng.random_range(-1.0..1.0)),
    };
    let mut layer = VariationalLayer::new(mu, 1.0, rng.random_range(0.1..3.0)).unwrap();
    layer.sigma.w = Tensor::from_fn(&[4, 4], |_| rng.random_range(0.2..2.0));
    layer.sigma.b = Tensor::from_fn(&[4], |_| rng.random_range(0.2..2.0));
    layer
}

#[test]
fn kl_matches_monte_carlo() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let n = 1_000_000;
    for case in 0..20 {
        let layer = random_layer(&mut rng);
        let beta2 = layer.prior_variance;
        let mus: Vec<f64> = layer.mu.w.data().iter().chain(layer.mu.b.data()).copied().collect();
        let sigmas: Vec<f64> = layer.sigma.w.data().iter().chain(layer.sigma.b.data()).copied().collect();
        assert_eq!(mus.len(), 20);
        // ln q(z) - ln p(z) up to constants that cancel
        let offset: f64 = sigmas.iter().map(|s| 0.5 * beta2.ln() - s.ln()).sum();
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let mut v = offset;
            for (m, s) in mus.iter().zip(&sigmas) {
                let e: f64 = rng.sample(StandardNormal);
                let z = m + s * e;
                v += z * z / (2.0 * beta2) - 0.5 * e * e;
            }
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        let kl = kl_gaussian(&layer).unwrap();
        assert!((kl - mean).abs() < 3.0 * se, "case {case}: {kl} vs {mean} ± {se}");
    }
}

#[test]
fn kl_zero_at_prior() {
    for sigma in [1e-2, 1e-3f64.sqrt(), 0.5, 2.0] {
        let layer = VariationalLayer::at_zero(5, 3, sigma, sigma * sigma).unwrap();
        assert_eq!(kl_gaussian(&layer).unwrap(), 0.0);
    }
}

#[test]
fn reparameterized_draws_match_moments() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mu =
        Linear { w: Tensor::new(&[1, 2], vec![2.0, -1.5]).unwrap(), b: Tensor::new(&[2], vec![0.8, 3.0]).unwrap() };
    let mut layer = VariationalLayer::new(mu.clone(), 0.5, 1e-3).unwrap();
    layer.sigma.b = Tensor::new(&[2], vec![0.1, 1.2]).unwrap();
    let n = 100_000;
    let mut draws = vec![Vec::with_capacity(n); 4];
    for _ in 0..n {
        let s = layer.sample(&mut rng);
        for (k, v) in s.w.data().iter().chain(s.b.data()).enumerate() {
            draws[k].push(*v);
        }
    }
    let targets = mu.w.data().iter().chain(mu.b.data()).zip(layer.sigma.w.data().iter().chain(layer.sigma.b.data()));
    for (d, (&m, &s)) in draws.iter().zip(targets) {
        let mean = d.iter().sum::<f64>() / n as f64;
        let sd = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((mean - m).abs() < 0.01 * m.abs(), "mean {mean} vs {m}");
        assert!((sd - s).abs() < 0.01 * s, "sd {sd} vs {s}");
    }
}
