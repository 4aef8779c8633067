//! Sun position from a declination / hour-angle formulation.
//!
//! Declination uses the 23.45°·sin(360°·(284 + n)/365) approximation and
//! solar time is corrected with the usual equation-of-time fit. Elevation is
//! geometric (no refraction). Azimuth is measured clockwise from north.

use chrono::{DateTime, Datelike, Timelike, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarPosition {
    /// Degrees above the horizon, negative below.
    pub elevation: f64,
    /// Degrees in [0, 360), north = 0, clockwise.
    pub azimuth: f64,
}

/// Source of sun angles for feature construction.
pub trait SolarProvider {
    fn position(&self, timestamp: DateTime<Utc>, latitude: f64, longitude: f64) -> SolarPosition;
}

/// The built-in [`solar_position`] algorithm.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlmanacSolar;

impl SolarProvider for AlmanacSolar {
    fn position(&self, timestamp: DateTime<Utc>, latitude: f64, longitude: f64) -> SolarPosition {
        solar_position(timestamp, latitude, longitude)
    }
}

/// Declination in degrees for a (fractional) day of year.
pub fn declination_deg(day_of_year: f64) -> f64 {
    23.45 * (360.0 * (284.0 + day_of_year) / 365.0).to_radians().sin()
}

/// Equation of time in minutes.
pub fn equation_of_time_min(day_of_year: f64) -> f64 {
    let b = (360.0 * (day_of_year - 81.0) / 364.0).to_radians();
    9.87 * (2.0 * b).sin() - 7.53 * b.cos() - 1.5 * b.sin()
}

pub fn solar_position(timestamp: DateTime<Utc>, latitude: f64, longitude: f64) -> SolarPosition {
    let utc_hours = timestamp.hour() as f64 + timestamp.minute() as f64 / 60.0 + timestamp.second() as f64 / 3600.0;
    let day = timestamp.ordinal() as f64 + (utc_hours - 12.0) / 24.0;

    let decl = declination_deg(day).to_radians();
    let solar_time = utc_hours + longitude / 15.0 + equation_of_time_min(day) / 60.0;
    let hour_angle = (15.0 * (solar_time - 12.0)).to_radians();
    let lat = latitude.to_radians();

    let sin_elev = decl.sin() * lat.sin() + decl.cos() * lat.cos() * hour_angle.cos();
    let elevation = sin_elev.clamp(-1.0, 1.0).asin().to_degrees();

    let azimuth = hour_angle.sin().atan2(hour_angle.cos() * lat.sin() - decl.tan() * lat.cos()).to_degrees() + 180.0;
    let azimuth = azimuth.rem_euclid(360.0);

    SolarPosition { elevation, azimuth }
}
