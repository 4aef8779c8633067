use chrono::{DateTime, Datelike, Timelike, Utc, Weekday};

use crate::record::SiteMeta;

/// Number of distinct hour-of-week slots: 24 non-business plus 24 business hours.
pub const HOUR_SLOTS: usize = 48;

/// Whether the local calendar day containing `ts` is a working day.
pub fn is_business_day(ts: DateTime<Utc>, site: &SiteMeta) -> bool {
    let local = site.local_time(ts);
    let weekend = matches!(local.weekday(), Weekday::Sat | Weekday::Sun);
    !weekend && !site.holidays.contains(&local.date_naive())
}

/// Maps an hour to its 1-based slot: 1..=24 on weekends and holidays,
/// 25..=48 on business days, offset by the local hour of day.
pub fn hour_of_week_index(ts: DateTime<Utc>, site: &SiteMeta) -> u8 {
    let hour = site.local_time(ts).hour() as u8;
    if is_business_day(ts, site) {
        hour + 25
    } else {
        hour + 1
    }
}
