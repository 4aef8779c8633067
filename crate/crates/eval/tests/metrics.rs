use heatcast_eval::metrics::{drift_curve, horizon_rmse, weighted_score, Summary, WeightProfile};
use heatcast_eval::{EvalError, PredictionMatrix, HORIZON};
use proptest::prelude::*;

fn m(rows: &[&[f64]]) -> PredictionMatrix {
    PredictionMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn rmse_examples() {
    let truth = m(&[&[21.0, 21.0, 21.0]]);
    let pred = m(&[&[21.0, 22.0, 23.0]]);
    assert!((horizon_rmse(&truth, &pred, 3).unwrap()[0] - (5.0f64 / 3.0).sqrt()).abs() < 1e-12);
    assert_eq!(horizon_rmse(&truth, &truth, 3).unwrap(), vec![0.0]);
    assert_eq!(horizon_rmse(&truth, &pred, 1).unwrap(), vec![0.0]);
    let pred2 = m(&[&[20.5, 0.0, 0.0]]);
    assert_eq!(horizon_rmse(&truth, &pred2, 1).unwrap(), vec![0.5]);
    assert!(matches!(horizon_rmse(&truth, &pred, 0), Err(EvalError::Shape(_))));
    assert!(matches!(horizon_rmse(&truth, &pred, 4), Err(EvalError::Shape(_))));
    let longer = m(&[&[21.0, 21.0, 21.0], &[1.0, 1.0, 1.0]]);
    assert!(matches!(horizon_rmse(&longer, &pred, 1), Err(EvalError::Shape(_))));
}

#[test]
fn drift_examples() {
    let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
    assert_eq!(drift_curve(&a, &a).unwrap(), vec![0.0, 0.0]);
    let t = m(&[&[1.0, -2.0, 0.0]]);
    let p = m(&[&[1.5, 1.0, -0.25]]);
    assert_eq!(drift_curve(&t, &p).unwrap(), vec![0.5, 3.0, 0.25]);
    let e = 0.8;
    let t = m(&[&[0.0], &[0.0]]);
    let p = m(&[&[0.0], &[e]]);
    assert!((drift_curve(&t, &p).unwrap()[0] - e / 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn score_examples() {
    for w in WeightProfile::standard() {
        assert!((weighted_score(&[0.37; HORIZON], w) - 0.37).abs() < 1e-14, "{w:?}");
    }
    let mut spike = vec![0.0; HORIZON];
    spike[0] = 1.0;
    assert!((weighted_score(&spike, WeightProfile::Unweighted) - 1.0 / 48.0).abs() < 1e-15);
    let ramp: Vec<f64> = (1..=HORIZON).map(|j| j as f64 * 0.01).collect();
    let flat = weighted_score(&ramp, WeightProfile::Unweighted);
    assert!(weighted_score(&ramp, WeightProfile::SIGMOID) < flat);
    assert!(weighted_score(&ramp, WeightProfile::Linear) < flat);
}

#[test]
fn profile_shapes() {
    // w(j) ∝ 1 / (1 + e^{(j - 12)/3}): equal to half the j→-∞ level at j = 12.
    let w = WeightProfile::SIGMOID.weights(HORIZON);
    let raw12 = 0.5;
    let raw1 = 1.0 / (1.0 + (-11.0f64 / 3.0).exp());
    assert!((w[11] / w[0] - raw12 / raw1).abs() < 1e-12);
    let lin = WeightProfile::Linear.weights(4);
    for (a, b) in lin.iter().zip([0.4, 0.3, 0.2, 0.1]) {
        assert!((a - b).abs() < 1e-15);
    }
    assert!(WeightProfile::Sigmoid { midpoint: 12.0, steepness: 0.0 }.validate().is_err());
    assert_eq!(WeightProfile::SIGMOID.label(), "sigmoid(j0=12;k=3)");
}

#[test]
fn summary_quantiles() {
    let v: Vec<f64> = (1..=101).map(f64::from).collect();
    let s = Summary::of(&v).unwrap();
    assert_eq!(s.median, 51.0);
    assert!(s.q2_5 < s.q25 && s.q25 < s.median && s.median < s.q75 && s.q75 < s.q97_5);
    assert!((s.q25 - 26.0).abs() < 0.5 && (s.q75 - 76.0).abs() < 0.5);
    assert!(Summary::of(&[]).is_err());
    assert!(Summary::of(&[1.0, f64::NAN]).is_err());
}

#[test]
fn perfect_predictions_score_zero() {
    let rows: Vec<Vec<f64>> = (0..5).map(|i| (0..HORIZON).map(|j| 20.0 + (i * j) as f64 * 0.01).collect()).collect();
    let t = PredictionMatrix::from_rows(&rows).unwrap();
    for k in [1, 6, HORIZON] {
        assert!(horizon_rmse(&t, &t, k).unwrap().iter().all(|&v| v == 0.0));
    }
    let d = drift_curve(&t, &t).unwrap();
    assert!(d.iter().all(|&v| v == 0.0));
    for w in WeightProfile::standard() {
        assert_eq!(weighted_score(&d, w), 0.0);
    }
}

fn matrices(rows: usize, h: usize) -> impl Strategy<Value = (PredictionMatrix, PredictionMatrix)> {
    (prop::collection::vec(15.0f64..25.0, rows * h), prop::collection::vec(-3.0f64..3.0, rows * h)).prop_map(
        move |(t, e)| {
            let tr: Vec<Vec<f64>> = t.chunks(h).map(<[f64]>::to_vec).collect();
            let pr: Vec<Vec<f64>> =
                t.iter().zip(&e).map(|(a, b)| a + b).collect::<Vec<_>>().chunks(h).map(<[f64]>::to_vec).collect();
            (PredictionMatrix::from_rows(&tr).unwrap(), PredictionMatrix::from_rows(&pr).unwrap())
        },
    )
}

proptest! {
    #[test]
    fn unweighted_score_is_drift_mean((t, p) in matrices(7, HORIZON)) {
        let d = drift_curve(&t, &p).unwrap();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        prop_assert!((weighted_score(&d, WeightProfile::Unweighted) - mean).abs() < 1e-12);
    }

    #[test]
    fn full_horizon_rmse_matches_drift_in_quadrature((t, p) in matrices(9, 12)) {
        let per_row = horizon_rmse(&t, &p, 12).unwrap();
        let rows = (per_row.iter().map(|r| r * r).sum::<f64>() / per_row.len() as f64).sqrt();
        let d = drift_curve(&t, &p).unwrap();
        let cols = (d.iter().map(|r| r * r).sum::<f64>() / d.len() as f64).sqrt();
        prop_assert!((rows - cols).abs() < 1e-10);
    }

    #[test]
    fn rmse_is_row_permutation_invariant((t, p) in matrices(6, 5), k in 1usize..=5, shift in 0usize..6) {
        let rot = |m: &PredictionMatrix| {
            let rows: Vec<Vec<f64>> = (0..6).map(|i| m.row((i + shift) % 6).to_vec()).collect();
            PredictionMatrix::from_rows(&rows).unwrap()
        };
        let mut a = horizon_rmse(&t, &p, k).unwrap();
        let mut b = horizon_rmse(&rot(&t), &rot(&p), k).unwrap();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        prop_assert_eq!(a, b);
        let (d1, d2) = (drift_curve(&t, &p).unwrap(), drift_curve(&rot(&t), &rot(&p)).unwrap());
        prop_assert!(d1.iter().zip(&d2).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn weights_are_normalized_and_non_increasing(h in 1usize..100, j0 in -5.0f64..60.0, k in 0.1f64..10.0) {
        for w in [WeightProfile::Unweighted, WeightProfile::Linear, WeightProfile::Sigmoid { midpoint: j0, steepness: k }] {
            let ws = w.weights(h);
            prop_assert!((ws.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(ws.iter().all(|&v| v >= 0.0));
            prop_assert!(ws.windows(2).all(|p| p[1] <= p[0] * (1.0 + 1e-12)));
        }
    }
}
