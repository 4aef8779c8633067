use heatcast_core::sim::{simulate_detailed, Simulation};
use heatcast_core::{BuildingDataset, SimConfig, SiteMeta};
use heatcast_graybox::{fit_variational, forecast, input_rows, GrayboxError, GrayboxPosterior, Priors, NUM_COEFFS};

fn site() -> SiteMeta {
    SiteMeta::new(60.2, 24.9, 2).unwrap()
}

fn recovery_config(seed: u64) -> SimConfig {
    let mut c = SimConfig { theta1: 0.02, theta2: 0.04, theta3: 0.0005, seed, ..SimConfig::default() };
    c.heating_curve.intercept = 63.0;
    c.heating_curve.slope = 2.0;
    c
}

fn simulate(config: &SimConfig, hours: usize) -> Simulation {
    simulate_detailed(config, &site(), hours).unwrap()
}

fn fit(ds: &BuildingDataset, iters: usize) -> GrayboxPosterior {
    fit_variational(ds, &Priors::default(), iters, 1e-9).unwrap()
}

#[test]
fn recovers_known_coefficients() {
    for seed in [1, 2, 3] {
        let sim = simulate(&recovery_config(seed), 4000);
        assert_eq!(sim.dataset.len(), 4000);
        let post = fit(&sim.dataset, 300);
        let m = post.theta_means();
        for (est, truth) in m.iter().zip([0.02, 0.04, 0.0005]) {
            let rel = (est - truth).abs() / truth;
            assert!(rel < 0.15, "seed {seed}: estimate {est} vs {truth} (rel {rel:.3})");
        }
    }
}

#[test]
fn elbo_trace_is_non_decreasing() {
    let sim = simulate(&SimConfig { seed: 11, ..SimConfig::default() }, 2000);
    let post = fit(&sim.dataset, 60);
    assert!(post.elbo_trace.len() > 1);
    for w in post.elbo_trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-6 * w[0].abs(), "{} -> {}", w[0], w[1]);
    }
}

#[test]
fn infinite_tolerance_runs_one_iteration() {
    let sim = simulate(&SimConfig { seed: 4, ..SimConfig::default() }, 500);
    let post = fit_variational(&sim.dataset, &Priors::default(), 100, f64::INFINITY).unwrap();
    assert_eq!(post.iterations(), 1);
    assert!(post.elbo_trace[0].is_finite());
    assert!(post.converged);
}

#[test]
fn observation_precision_grows_without_noise() {
    let config = SimConfig { seed: 5, obs_std: 0.0, process_std: 0.0, ..SimConfig::default() };
    let sim = simulate(&config, 600);
    let mut last = 0.0;
    for iters in 1..=8 {
        let post = fit_variational(&sim.dataset, &Priors::default(), iters, 0.0).unwrap();
        let tau = post.obs_precision.mean();
        assert!(tau > last, "iteration {iters}: {tau} <= {last}");
        last = tau;
    }
}

#[test]
fn parameter_counts_and_gamma_shapes() {
    let sim = simulate(&SimConfig { seed: 6, ..SimConfig::default() }, 300);
    let post = fit(&sim.dataset, 5);
    assert_eq!(post.coeffs.len() + 2, 53);
    assert_eq!(post.ard.len(), NUM_COEFFS);
    let prior = Priors::default().gamma_shape;
    assert_eq!(post.obs_precision.shape, prior + 300.0 / 2.0);
    assert_eq!(post.process_precision.shape, prior + 299.0 / 2.0);
    assert!(post.ard.iter().all(|a| a.shape == prior + 0.5));
}

#[test]
fn gaps_split_the_chain() {
    let sim = simulate(&SimConfig { seed: 7, ..SimConfig::default() }, 400);
    let mut records = sim.dataset.records().to_vec();
    records.drain(150..170);
    let ds = BuildingDataset::new(site(), records).unwrap();
    let post = fit(&ds, 5);
    // 380 rows in two runs give 378 transitions.
    assert_eq!(post.process_precision.shape, 1e-3 + 378.0 / 2.0);
}

#[test]
fn too_little_data() {
    let sim = simulate(&SimConfig::default(), 99);
    assert!(matches!(
        fit_variational(&sim.dataset, &Priors::default(), 10, 1e-6),
        Err(GrayboxError::InsufficientData(_))
    ));
}

#[test]
fn training_window_is_bounded() {
    let sim = simulate(&SimConfig { seed: 8, ..SimConfig::default() }, 800);
    let priors = Priors { training_days: 10, ..Priors::default() };
    let post = fit_variational(&sim.dataset, &priors, 3, 1e-6).unwrap();
    assert_eq!(post.n_rows, 240);
    assert_eq!(post.state.last().unwrap().timestamp, sim.dataset.records().last().unwrap().timestamp);
}

#[test]
fn predictive_coverage_on_training_data() {
    let sim = simulate(&recovery_config(21), 3000);
    let post = fit(&sim.dataset, 300);
    let params = post.expected_params(heatcast_graybox::Gaussian::new(0.0, 1.0));
    let records = sim.dataset.records();
    let inside = records
        .iter()
        .enumerate()
        .skip(1)
        .filter(|&(i, r)| {
            // One-step predictive from the previous filtered state.
            let prev = post.state[i - 1].filtered;
            let row = heatcast_graybox::InputRow::from_record(r, sim.dataset.site());
            let a = params.transition();
            let mean = a * prev.mean + params.drive(&row);
            let var = a * a * prev.variance + params.process_var + params.obs_var;
            (r.t_in - mean).abs() <= 3.0 * var.sqrt()
        })
        .count();
    let frac = inside as f64 / (records.len() - 1) as f64;
    assert!(frac >= 0.9, "coverage {frac}");
}

#[test]
fn forecast_from_filtered_state() {
    let sim = simulate(&SimConfig { seed: 9, ..SimConfig::default() }, 1500);
    let post = fit(&sim.dataset, 200);
    let ds = &sim.dataset;
    let t0 = 1200;
    let state = post.state_at(ds, t0, 168).unwrap();
    assert!((state.mean - ds.records()[t0].t_in).abs() < 0.5);
    let future = input_rows(&ds.records()[t0 + 1..t0 + 49], ds.site());
    let f = forecast(&post, state, &future).unwrap();
    assert_eq!(f.horizon(), 48);
    assert!(f.step_std.windows(2).all(|w| w[1] >= w[0] - 1e-12));
    let err: f64 = f.mean.iter().zip(&ds.records()[t0 + 1..]).map(|(m, r)| (m - r.t_in).abs()).sum::<f64>() / 48.0;
    assert!(err < 1.0, "mean abs error {err}");
}

#[test]
fn checkpoint_round_trip() {
    let sim = simulate(&SimConfig { seed: 10, ..SimConfig::default() }, 200);
    let post = fit(&sim.dataset, 3);
    let back = GrayboxPosterior::from_json(&post.to_json().unwrap()).unwrap();
    assert_eq!(back, post);
    let mut broken: serde_json::Value = serde_json::from_str(&post.to_json().unwrap()).unwrap();
    broken["coeffs"].as_array_mut().unwrap().pop();
    assert!(GrayboxPosterior::from_json(&broken.to_string()).is_err());
}
