//! Synthetic single-zone building with known first-order dynamics.
//!
//! The indoor state follows
//! `x_t = (1 - θ1 - θ2) x_{t-1} + θ1 T_sup + θ2 T_out + θ3 Φ + ψ(slot) + ε_p`
//! and is observed with additive Gaussian noise. Two switchable effects make
//! the data deviate from that structure: an envelope temperature that lags
//! the outdoor temperature (`envelope_capacitance_factor > 0`) and a facade
//! orientation dependent solar gain (`solar_directionality > 0`).

use chrono::{DateTime, Duration, NaiveDate, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::calendar::{hour_of_week_index, HOUR_SLOTS};
use crate::error::{CoreError, Result};
use crate::record::{BuildingDataset, HourlyRecord, SiteMeta};
use crate::solar::solar_position;

pub const SOLAR_CONSTANT: f64 = 1361.0;
pub const ATMOSPHERIC_TRANSMITTANCE: f64 = 0.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WeatherConfig {
    /// Annual mean outdoor temperature, °C.
    pub mean_t_out: f64,
    /// Half peak-to-peak of the seasonal cycle, °C; coldest around 20 January.
    pub seasonal_amplitude: f64,
    /// Half peak-to-peak of the daily cycle, °C; warmest at 15:00 local.
    pub diurnal_amplitude: f64,
    /// AR(1) coefficient of the hourly weather anomaly.
    pub anomaly_ar: f64,
    /// Innovation std of the weather anomaly, °C.
    pub anomaly_std: f64,
    pub cloud_ar: f64,
    pub cloud_std: f64,
    /// Offset of the latent cloud process; larger means clearer skies.
    pub cloud_bias: f64,
}

impl Default for WeatherConfig {
    fn default() -> Self {
        Self {
            mean_t_out: 5.0,
            seasonal_amplitude: 12.0,
            diurnal_amplitude: 3.0,
            anomaly_ar: 0.98,
            anomaly_std: 0.4,
            cloud_ar: 0.95,
            cloud_std: 0.5,
            cloud_bias: 0.5,
        }
    }
}

/// `t_sup = clamp(intercept - slope * t_out + jitter, min, max)` where the
/// jitter is an AR(1) process standing in for operator and controller
/// adjustments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatingCurve {
    pub intercept: f64,
    pub slope: f64,
    pub min: f64,
    pub max: f64,
    pub jitter_ar: f64,
    /// Stationary std of the jitter, °C.
    pub jitter_std: f64,
}

impl Default for HeatingCurve {
    fn default() -> Self {
        Self { intercept: 45.0, slope: 1.2, min: 20.0, max: 80.0, jitter_ar: 0.9, jitter_std: 3.0 }
    }
}

impl HeatingCurve {
    pub fn supply(&self, t_out: f64, jitter: f64) -> f64 {
        (self.intercept - self.slope * t_out + jitter).clamp(self.min, self.max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Supply coupling, 1/h.
    pub theta1: f64,
    /// Envelope coupling, 1/h.
    pub theta2: f64,
    /// Solar gain, °C·m²/(W·h).
    pub theta3: f64,
    /// 48 internal gains in °C/h; drawn from U(0, 0.05) with the seed when absent.
    pub profile: Option<Vec<f64>>,
    pub process_std: f64,
    pub obs_std: f64,
    /// Envelope lag strength; 0 couples the room directly to outdoor air.
    pub envelope_capacitance_factor: f64,
    /// Facade azimuth, degrees clockwise from north.
    pub orientation_deg: f64,
    /// Fraction of solar gain that depends on the sun facing the facade, in [0, 1].
    pub solar_directionality: f64,
    pub season_start: NaiveDate,
    pub season_end: NaiveDate,
    /// Initial indoor state; the steady state of the first hour when absent.
    pub initial_t_in: Option<f64>,
    pub weather: WeatherConfig,
    pub heating_curve: HeatingCurve,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            theta1: 0.03,
            theta2: 0.035,
            theta3: 0.0005,
            profile: None,
            process_std: 0.05,
            obs_std: 0.05,
            envelope_capacitance_factor: 0.0,
            orientation_deg: 180.0,
            solar_directionality: 0.0,
            season_start: NaiveDate::from_ymd_opt(2020, 9, 1).unwrap(),
            season_end: NaiveDate::from_ymd_opt(2021, 5, 31).unwrap(),
            initial_t_in: None,
            weather: WeatherConfig::default(),
            heating_curve: HeatingCurve::default(),
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(CoreError::Config(m));
        if !(self.theta1 > 0.0 && self.theta2 > 0.0 && self.theta1 + self.theta2 < 1.0) {
            return err(format!(
                "need theta1, theta2 > 0 and theta1 + theta2 < 1, got {} and {}",
                self.theta1, self.theta2
            ));
        }
        if !self.theta3.is_finite() {
            return err("theta3 not finite".into());
        }
        if !(self.process_std >= 0.0 && self.obs_std >= 0.0) {
            return err("noise std must be non-negative".into());
        }
        if !(self.envelope_capacitance_factor >= 0.0) {
            return err("envelope_capacitance_factor must be >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.solar_directionality) {
            return err("solar_directionality must lie in [0, 1]".into());
        }
        if let Some(p) = &self.profile {
            if p.len() != HOUR_SLOTS || p.iter().any(|v| !v.is_finite()) {
                return err(format!("profile must hold {HOUR_SLOTS} finite values"));
            }
        }
        if self.season_end < self.season_start {
            return err("season_end precedes season_start".into());
        }
        let w = &self.weather;
        if !(w.anomaly_ar.abs() < 1.0 && w.cloud_ar.abs() < 1.0 && self.heating_curve.jitter_ar.abs() < 1.0) {
            return err("AR coefficients must lie in (-1, 1)".into());
        }
        if !(w.anomaly_std >= 0.0 && w.cloud_std >= 0.0 && self.heating_curve.jitter_std >= 0.0) {
            return err("weather and jitter std must be non-negative".into());
        }
        if self.heating_curve.min > self.heating_curve.max {
            return err("heating curve min exceeds max".into());
        }
        Ok(())
    }

    /// The internal-gain profile, drawing it from the seed when not configured.
    pub fn resolved_profile(&self) -> Vec<f64> {
        match &self.profile {
            Some(p) => p.clone(),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9E37_79B9_7F4A_7C15);
                (0..HOUR_SLOTS).map(|_| rng.random_range(0.0..0.05)).collect()
            }
        }
    }

    /// `1 - θ1 - θ2`.
    pub fn transition(&self) -> f64 {
        1.0 - self.theta1 - self.theta2
    }

    pub fn truth(&self) -> SimTruth {
        SimTruth {
            theta1: self.theta1,
            theta2: self.theta2,
            theta3: self.theta3,
            profile: self.resolved_profile(),
            process_precision: precision(self.process_std),
            obs_precision: precision(self.obs_std),
            config: self.clone(),
        }
    }
}

fn precision(std: f64) -> Option<f64> {
    (std > 0.0).then(|| 1.0 / (std * std))
}

/// Ground-truth parameters written next to a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimTruth {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
    pub profile: Vec<f64>,
    /// `None` when the corresponding noise is switched off.
    pub process_precision: Option<f64>,
    pub obs_precision: Option<f64>,
    pub config: SimConfig,
}

/// Full simulator output including latent quantities.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: BuildingDataset,
    /// Noise-free-observation indoor state per generated hour.
    pub latent: Vec<f64>,
    /// Temperature seen by the envelope coupling (equals `t_out` without lag).
    pub envelope: Vec<f64>,
    /// Solar driver actually applied (equals `ghi` without directionality).
    pub solar_gain_input: Vec<f64>,
    pub truth: SimTruth,
}

/// Simulate `hours` hourly steps from `season_start` (00:00 UTC), stopping at
/// the end of `season_end`. Summer months are dropped by the dataset filter.
pub fn simulate_building(config: &SimConfig, site: &SiteMeta, hours: usize) -> Result<BuildingDataset> {
    Ok(simulate_detailed(config, site, hours)?.dataset)
}

pub fn simulate_detailed(config: &SimConfig, site: &SiteMeta, hours: usize) -> Result<Simulation> {
    config.validate()?;
    site.validate()?;
    if hours == 0 {
        return Err(CoreError::Config("hours must be >= 1".into()));
    }
    let start = Utc.from_utc_datetime(&config.season_start.and_hms_opt(0, 0, 0).unwrap());
    let end = Utc.from_utc_datetime(&config.season_end.and_hms_opt(23, 0, 0).unwrap());
    let profile = config.resolved_profile();
    let w = &config.weather;
    let curve = &config.heating_curve;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = StandardNormal;
    let process = Normal::new(0.0, config.process_std).unwrap();
    let obs = Normal::new(0.0, config.obs_std).unwrap();
    let jitter_innov = curve.jitter_std * (1.0 - curve.jitter_ar * curve.jitter_ar).sqrt();

    let mut anomaly = 0.0;
    let mut cloud_latent: f64 = 0.0;
    let mut jitter = 0.0;
    let lag = 1.0 / (1.0 + config.envelope_capacitance_factor);
    let mut env = f64::NAN;
    let mut state = f64::NAN;

    let mut records = Vec::with_capacity(hours);
    let mut latent = Vec::with_capacity(hours);
    let mut envelope = Vec::with_capacity(hours);
    let mut solar_in = Vec::with_capacity(hours);

    for h in 0..hours {
        let ts: DateTime<Utc> = start + Duration::hours(h as i64);
        if ts > end {
            break;
        }
        // weather
        let e_anom: f64 = normal.sample(&mut rng);
        let e_cloud: f64 = normal.sample(&mut rng);
        let e_jit: f64 = normal.sample(&mut rng);
        anomaly = w.anomaly_ar * anomaly + w.anomaly_std * e_anom;
        cloud_latent = w.cloud_ar * cloud_latent + w.cloud_std * e_cloud;
        jitter = curve.jitter_ar * jitter + jitter_innov * e_jit;

        let local = site.local_time(ts);
        let day = chrono::Datelike::ordinal(&local) as f64;
        let hour = chrono::Timelike::hour(&local) as f64;
        let seasonal = -w.seasonal_amplitude * (2.0 * std::f64::consts::PI * (day - 20.0) / 365.25).cos();
        let diurnal = w.diurnal_amplitude * (2.0 * std::f64::consts::PI * (hour - 9.0) / 24.0).sin();
        let t_out = w.mean_t_out + seasonal + diurnal + anomaly;

        let sun = solar_position(ts, site.latitude, site.longitude);
        let cloud = 1.0 / (1.0 + (-(cloud_latent + w.cloud_bias)).exp());
        let ghi = if sun.elevation > 0.0 {
            SOLAR_CONSTANT * ATMOSPHERIC_TRANSMITTANCE * sun.elevation.to_radians().sin() * cloud
        } else {
            0.0
        };
        let facing = (sun.azimuth - config.orientation_deg).to_radians().cos().max(0.0);
        let gain_input = ghi * ((1.0 - config.solar_directionality) + config.solar_directionality * 2.0 * facing);

        let t_sup = curve.supply(t_out, jitter);
        let psi = profile[hour_of_week_index(ts, site) as usize - 1];

        env = if env.is_nan() { t_out } else { env + lag * (t_out - env) };

        let drive = config.theta1 * t_sup + config.theta2 * env + config.theta3 * gain_input + psi;
        state = if state.is_nan() {
            config.initial_t_in.unwrap_or(drive / (config.theta1 + config.theta2))
        } else {
            config.transition() * state + drive + process.sample(&mut rng)
        };
        let t_in = state + obs.sample(&mut rng);

        records.push(HourlyRecord { timestamp: ts, t_in, t_sup, t_out, ghi });
        latent.push(state);
        envelope.push(env);
        solar_in.push(gain_input);
    }

    let dataset = BuildingDataset::new(site.clone(), records)?;
    Ok(Simulation { dataset, latent, envelope, solar_gain_input: solar_in, truth: config.truth() })
}
