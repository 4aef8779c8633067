use std::collections::BTreeSet;

use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveDate, Timelike, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// One hour of building measurements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HourlyRecord {
    pub timestamp: DateTime<Utc>,
    /// Indoor temperature, °C.
    pub t_in: f64,
    /// Space-heating supply water temperature, °C.
    pub t_sup: f64,
    /// Outdoor temperature, °C.
    pub t_out: f64,
    /// Global horizontal irradiation, W/m².
    pub ghi: f64,
}

impl HourlyRecord {
    pub fn validate(&self) -> Result<()> {
        let ts = self.timestamp;
        if ts.minute() != 0 || ts.second() != 0 || ts.nanosecond() != 0 {
            return Err(CoreError::InvalidRecord(format!("{ts} is not hour-aligned")));
        }
        for (name, v) in [("t_in", self.t_in), ("t_sup", self.t_sup), ("t_out", self.t_out)] {
            if !v.is_finite() {
                return Err(CoreError::InvalidRecord(format!("{name} not finite at {ts}")));
            }
        }
        if !(self.ghi.is_finite() && self.ghi >= 0.0) {
            return Err(CoreError::InvalidRecord(format!("ghi = {} at {ts}", self.ghi)));
        }
        Ok(())
    }
}

/// Site location and calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteMeta {
    pub latitude: f64,
    pub longitude: f64,
    pub utc_offset_hours: i32,
    #[serde(default)]
    pub holidays: BTreeSet<NaiveDate>,
}

impl SiteMeta {
    pub fn new(latitude: f64, longitude: f64, utc_offset_hours: i32) -> Result<Self> {
        let site = Self { latitude, longitude, utc_offset_hours, holidays: BTreeSet::new() };
        site.validate()?;
        Ok(site)
    }

    pub fn with_holidays(mut self, holidays: impl IntoIterator<Item = NaiveDate>) -> Self {
        self.holidays.extend(holidays);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(-90.0..=90.0).contains(&self.latitude) {
            return Err(CoreError::InvalidSite(format!("latitude {} out of range", self.latitude)));
        }
        if !(-180.0..=180.0).contains(&self.longitude) {
            return Err(CoreError::InvalidSite(format!("longitude {} out of range", self.longitude)));
        }
        if !(-12..=14).contains(&self.utc_offset_hours) {
            return Err(CoreError::InvalidSite(format!("utc offset {} h out of range", self.utc_offset_hours)));
        }
        Ok(())
    }

    pub fn offset(&self) -> FixedOffset {
        FixedOffset::east_opt(self.utc_offset_hours * 3600).expect("offset validated")
    }

    pub fn local_time(&self, ts: DateTime<Utc>) -> DateTime<FixedOffset> {
        ts.with_timezone(&self.offset())
    }
}

/// Months (1-based) kept by the heating-season filter: September through May.
pub fn is_heating_month(month: u32) -> bool {
    !(6..=8).contains(&month)
}

/// Hourly records of one building restricted to the heating season.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingDataset {
    site: SiteMeta,
    records: Vec<HourlyRecord>,
}

impl BuildingDataset {
    /// Validates every record, checks strict ordering and drops June–August
    /// (local calendar).
    pub fn new(site: SiteMeta, records: Vec<HourlyRecord>) -> Result<Self> {
        site.validate()?;
        for r in &records {
            r.validate()?;
        }
        for pair in records.windows(2) {
            if pair[1].timestamp <= pair[0].timestamp {
                return Err(CoreError::InvalidRecord(format!(
                    "timestamps not strictly increasing at {}",
                    pair[1].timestamp
                )));
            }
        }
        let records = records.into_iter().filter(|r| is_heating_month(site.local_time(r.timestamp).month())).collect();
        Ok(Self { site, records })
    }

    pub fn site(&self) -> &SiteMeta {
        &self.site
    }

    pub fn records(&self) -> &[HourlyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Whether record `i` is exactly one hour after record `i - 1`.
    pub fn follows_contiguously(&self, i: usize) -> bool {
        i > 0 && self.records[i].timestamp - self.records[i - 1].timestamp == Duration::hours(1)
    }

    /// Indices `i` where a gap precedes record `i`.
    pub fn gaps(&self) -> Vec<usize> {
        (1..self.records.len()).filter(|&i| !self.follows_contiguously(i)).collect()
    }

    /// Position of the record with the given timestamp.
    pub fn position(&self, ts: DateTime<Utc>) -> Option<usize> {
        self.records.binary_search_by_key(&ts, |r| r.timestamp).ok()
    }

    /// Length of the contiguous run ending at `i` (1 when `i` follows a gap).
    pub fn run_length_ending_at(&self, i: usize) -> usize {
        let mut n = 1;
        let mut j = i;
        while j > 0 && self.follows_contiguously(j) {
            n += 1;
            j -= 1;
        }
        n
    }

    /// Records with `start <= timestamp < end`.
    pub fn slice_time(&self, start: DateTime<Utc>, end: DateTime<Utc>) -> Self {
        let records = self.records.iter().filter(|r| r.timestamp >= start && r.timestamp < end).copied().collect();
        Self { site: self.site.clone(), records }
    }

    /// The trailing `days` worth of heating-season hours, or everything if shorter.
    pub fn last_heating_days(&self, days: usize) -> Self {
        let keep = days * 24;
        let start = self.records.len().saturating_sub(keep);
        Self { site: self.site.clone(), records: self.records[start..].to_vec() }
    }
}
