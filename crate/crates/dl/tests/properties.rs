use heatcast_autograd::tensor::{softplus, softplus_inv};
use heatcast_autograd::Tensor;
use heatcast_dl::{kl_gaussian, Linear, TrainConfig, VariationalLayer};
use proptest::prelude::*;

/// A 2 x 3 layer; `mu` and `sigma` hold the 6 weights then the 3 biases.
fn layer(mu: Vec<f64>, sigma: Vec<f64>, beta2: f64) -> VariationalLayer {
    let linear = |v: &[f64]| Linear {
        w: Tensor::new(&[2, 3], v[..6].to_vec()).unwrap(),
        b: Tensor::new(&[3], v[6..].to_vec()).unwrap(),
    };
    let mut l = VariationalLayer::new(linear(&mu), 1.0, beta2).unwrap();
    l.sigma = linear(&sigma);
    l
}

proptest! {
    #[test]
    fn kl_is_non_negative(
        mu in prop::collection::vec(-3.0f64..3.0, 9),
        sigma in prop::collection::vec(1e-6f64..5.0, 9),
        beta2 in 1e-5f64..10.0,
    ) {
        let kl = kl_gaussian(&layer(mu, sigma, beta2)).unwrap();
        prop_assert!(kl >= 0.0 && kl.is_finite(), "{kl}");
    }

    #[test]
    fn kl_grows_with_mean_distance(
        mu in prop::collection::vec(-3.0f64..3.0, 9),
        sigma in prop::collection::vec(0.01f64..2.0, 9),
        beta2 in 1e-3f64..2.0,
        k in 1.1f64..4.0,
    ) {
        let far: Vec<f64> = mu.iter().map(|m| m * k).collect();
        let near = kl_gaussian(&layer(mu, sigma.clone(), beta2)).unwrap();
        prop_assert!(kl_gaussian(&layer(far, sigma, beta2)).unwrap() >= near);
    }

    #[test]
    fn default_halvings_are_valid(epochs in 1usize..5000, lr in 1e-6f64..1.0) {
        let cfg = TrainConfig { epochs, learning_rate: lr, ..TrainConfig::default() };
        prop_assert!(cfg.validate().is_ok());
        let h = cfg.halvings();
        prop_assert!(h.len() <= 3 && h.iter().all(|&e| e > 0 && e < epochs));
        prop_assert_eq!(cfg.learning_rate_at(epochs - 1), lr * 0.5f64.powi(h.len() as i32));
    }

    #[test]
    fn sigma_parameterization_round_trips(s in 1e-8f64..50.0) {
        let back = softplus(softplus_inv(s));
        prop_assert!((back - s).abs() <= 1e-9 * s.max(1.0), "{s} -> {back}");
    }
}
