use chrono::{Duration, TimeZone, Utc};
use heatcast_core::features::feature_row;
use heatcast_core::{AlmanacSolar, HourlyRecord, NormStats, SiteMeta, NUM_FEATURES, WINDOW_LEN};
use heatcast_dl::{forward_deterministic, rollout, DlError, Head, ModelKind, NeuralModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn site() -> SiteMeta {
    SiteMeta::new(60.2, 24.9, 2).unwrap()
}

fn records(hours: usize) -> Vec<HourlyRecord> {
    let start = Utc.with_ymd_and_hms(2021, 2, 1, 0, 0, 0).unwrap();
    (0..hours)
        .map(|k| HourlyRecord {
            timestamp: start + Duration::hours(k as i64),
            t_in: 21.0 + 0.1 * (k as f64 / 3.0).sin(),
            t_sup: 45.0 - 0.3 * k as f64,
            t_out: -3.0 + (k as f64 / 6.0).cos(),
            ghi: if (9..15).contains(&(k % 24)) { 80.0 } else { 0.0 },
        })
        .collect()
}

fn stats() -> NormStats {
    NormStats { mean: [20.0, -24.0, 30.0, 0.0, 180.0, 0.0], std: [5.0, 2.0, 50.0, 10.0, 60.0, 1.0] }
}

fn model(kind: ModelKind, seed: u64) -> NeuralModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NeuralModel::init(kind, 6, stats(), 1e-3, 1e-3, &mut rng).unwrap()
}

#[test]
fn deterministic_rollout_is_cumulative() {
    let m = model(ModelKind::LstmMlp, 1);
    let Head::Deterministic(mlp) = &m.head else { unreachable!() };
    let all = records(WINDOW_LEN + 1 + 3);
    let (history, future) = all.split_at(WINDOW_LEN + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let f = rollout(&m, history, future, &site(), &AlmanacSolar, 10, &mut rng).unwrap();
    assert_eq!(f.n_samples, 1);
    assert_eq!(f.step_std, vec![0.0; 3]);

    // Re-derive each step with the single-window forward pass.
    let mut rows: Vec<HourlyRecord> = history[1..].to_vec();
    let mut level = history.last().unwrap().t_in;
    let mut deltas = Vec::new();
    for next in future {
        let window: Vec<f64> = rows[rows.len() - WINDOW_LEN..]
            .iter()
            .flat_map(|r| {
                let mut x = feature_row(r.timestamp, r.t_in, r.t_sup, r.t_out, r.ghi, &site(), &AlmanacSolar);
                stats().normalize_row(&mut x);
                x
            })
            .collect();
        assert_eq!(window.len(), WINDOW_LEN * NUM_FEATURES);
        let d = forward_deterministic(&window, &m.lstm, mlp).unwrap();
        deltas.push(d);
        level += d;
        rows.push(HourlyRecord { t_in: level, ..*next });
    }
    let start = history.last().unwrap().t_in;
    let expected: Vec<f64> = deltas
        .iter()
        .scan(start, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    for (a, b) in f.mean.iter().zip(&expected) {
        assert!((a - b).abs() < 1e-12, "{a} vs {b}");
    }
}

#[test]
fn future_indoor_values_are_ignored() {
    let m = model(ModelKind::LstmMlp, 2);
    let all = records(WINDOW_LEN + 1 + 5);
    let (history, future) = all.split_at(WINDOW_LEN + 1);
    let mut scrambled = future.to_vec();
    for r in &mut scrambled {
        r.t_in = 99.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = rollout(&m, history, future, &site(), &AlmanacSolar, 1, &mut rng).unwrap();
    let b = rollout(&m, history, &scrambled, &site(), &AlmanacSolar, 1, &mut rng).unwrap();
    assert_eq!(a, b);
}

#[test]
fn vanishing_sigma_gives_zero_spread() {
    let det = model(ModelKind::LstmMlp, 3);
    let m = det.to_bayesian(1e-300, 1e-3).unwrap();
    let all = records(WINDOW_LEN + 1 + 6);
    let (history, future) = all.split_at(WINDOW_LEN + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = rollout(&m, history, future, &site(), &AlmanacSolar, 10, &mut rng).unwrap();
    assert_eq!(f.n_samples, 10);
    assert!(f.step_std.iter().all(|&s| s == 0.0), "{:?}", f.step_std);
    let d = rollout(&det, history, future, &site(), &AlmanacSolar, 1, &mut rng).unwrap();
    for (a, b) in f.mean.iter().zip(&d.mean) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn bnn_spread_accumulates() {
    let m = model(ModelKind::LstmMlp, 4).to_bayesian(0.05, 1e-3).unwrap();
    let all = records(WINDOW_LEN + 1 + 48);
    let (history, future) = all.split_at(WINDOW_LEN + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let f = rollout(&m, history, future, &site(), &AlmanacSolar, 10, &mut rng).unwrap();
    assert_eq!(f.horizon(), 48);
    assert!(f.step_std.iter().all(|&s| s > 0.0));
    assert!(f.cum_std.windows(2).all(|w| w[1] >= w[0]));
    let mut again = ChaCha8Rng::seed_from_u64(2);
    assert_eq!(rollout(&m, history, future, &site(), &AlmanacSolar, 10, &mut again).unwrap(), f);
}

#[test]
fn rollout_errors() {
    let m = model(ModelKind::LstmMlp, 5);
    let all = records(WINDOW_LEN + 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let short = rollout(&m, &all[..WINDOW_LEN], &all[WINDOW_LEN..], &site(), &AlmanacSolar, 1, &mut rng);
    assert!(matches!(short, Err(DlError::InsufficientHistory(_))));
    let empty = rollout(&m, &all, &[], &site(), &AlmanacSolar, 1, &mut rng);
    assert!(matches!(empty, Err(DlError::Config(_))));
}
