//! Weekly opening hours with half-open intervals and overnight spans.

use chrono::{DateTime, Datelike, Duration, Timelike, Utc};
pub use chrono::Weekday;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

pub const MINUTES_PER_DAY: u16 = 1440;
pub const MINUTES_PER_WEEK: u32 = 7 * MINUTES_PER_DAY as u32;

/// `[open, close)` in minutes since local midnight. `close < open` spans
/// midnight into the following weekday; `close == 1440` means until midnight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(u16, u16)", into = "(u16, u16)")]
pub struct Interval {
    pub open: u16,
    pub close: u16,
}

impl Interval {
    pub const fn new(open: u16, close: u16) -> Self {
        Self { open, close }
    }

    pub fn is_overnight(&self) -> bool {
        self.close < self.open
    }
}

impl From<(u16, u16)> for Interval {
    fn from((open, close): (u16, u16)) -> Self {
        Self { open, close }
    }
}

impl From<Interval> for (u16, u16) {
    fn from(i: Interval) -> Self {
        (i.open, i.close)
    }
}

/// A point in local restaurant time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalTime {
    pub weekday: Weekday,
    pub minute: u16,
}

impl LocalTime {
    pub fn new(weekday: Weekday, minute: u16) -> Self {
        Self { weekday, minute }
    }

    /// Local time at `at` for a fixed offset east of UTC.
    pub fn from_utc(at: DateTime<Utc>, utc_offset_minutes: i32) -> Self {
        let local = at.naive_utc() + Duration::minutes(utc_offset_minutes as i64);
        Self {
            weekday: local.weekday(),
            minute: (local.hour() * 60 + local.minute()) as u16,
        }
    }

    /// Minute of the week counted from Monday 00:00.
    pub fn week_minute(&self) -> u32 {
        self.weekday.num_days_from_monday() * MINUTES_PER_DAY as u32 + self.minute as u32
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct OpeningHours {
    pub mon: Vec<Interval>,
    pub tue: Vec<Interval>,
    pub wed: Vec<Interval>,
    pub thu: Vec<Interval>,
    pub fri: Vec<Interval>,
    pub sat: Vec<Interval>,
    pub sun: Vec<Interval>,
}

impl OpeningHours {
    /// The same intervals every day of the week.
    pub fn daily(intervals: &[Interval]) -> Self {
        let v = intervals.to_vec();
        Self {
            mon: v.clone(),
            tue: v.clone(),
            wed: v.clone(),
            thu: v.clone(),
            fri: v.clone(),
            sat: v.clone(),
            sun: v,
        }
    }

    pub fn day(&self, weekday: Weekday) -> &[Interval] {
        match weekday {
            Weekday::Mon => &self.mon,
            Weekday::Tue => &self.tue,
            Weekday::Wed => &self.wed,
            Weekday::Thu => &self.thu,
            Weekday::Fri => &self.fri,
            Weekday::Sat => &self.sat,
            Weekday::Sun => &self.sun,
        }
    }

    pub fn day_mut(&mut self, weekday: Weekday) -> &mut Vec<Interval> {
        match weekday {
            Weekday::Mon => &mut self.mon,
            Weekday::Tue => &mut self.tue,
            Weekday::Wed => &mut self.wed,
            Weekday::Thu => &mut self.thu,
            Weekday::Fri => &mut self.fri,
            Weekday::Sat => &mut self.sat,
            Weekday::Sun => &mut self.sun,
        }
    }

    /// Checks minute ranges, `open != close`, and that no two intervals
    /// overlap once overnight spans are unfolded onto the week.
    pub fn validate(&self) -> Result<()> {
        let mut spans: Vec<(u32, u32)> = Vec::new();
        for day in 0..7u32 {
            let weekday = Weekday::try_from(day as u8).expect("day index in range");
            for iv in self.day(weekday) {
                if iv.open >= MINUTES_PER_DAY || iv.close > MINUTES_PER_DAY {
                    return Err(CoreError::InvalidHours(format!(
                        "{weekday}: minute out of range in ({}, {})",
                        iv.open, iv.close
                    )));
                }
                if iv.open == iv.close {
                    return Err(CoreError::InvalidHours(format!(
                        "{weekday}: empty interval at {}",
                        iv.open
                    )));
                }
                let base = day * MINUTES_PER_DAY as u32;
                let start = base + iv.open as u32;
                if iv.is_overnight() {
                    let end = base + MINUTES_PER_DAY as u32 + iv.close as u32;
                    if end > MINUTES_PER_WEEK {
                        spans.push((start, MINUTES_PER_WEEK));
                        spans.push((0, end - MINUTES_PER_WEEK));
                    } else {
                        spans.push((start, end));
                    }
                } else {
                    spans.push((start, base + iv.close as u32));
                }
            }
        }
        spans.sort_unstable();
        for w in spans.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(CoreError::InvalidHours(format!(
                    "overlapping intervals at week minute {}",
                    w[1].0
                )));
            }
        }
        Ok(())
    }

    pub fn is_open(&self, at: LocalTime) -> bool {
        let m = at.minute;
        let today = self.day(at.weekday).iter().any(|iv| {
            if iv.is_overnight() {
                m >= iv.open
            } else {
                iv.open <= m && m < iv.close
            }
        });
        today
            || self
                .day(at.weekday.pred())
                .iter()
                .any(|iv| iv.is_overnight() && m < iv.close)
    }

    /// Human-readable intervals for one weekday, e.g. `09:00-17:00`.
    pub fn describe_day(&self, weekday: Weekday) -> String {
        let day = self.day(weekday);
        if day.is_empty() {
            return "closed today".to_owned();
        }
        day.iter()
            .map(|iv| format!("{}-{}", hhmm(iv.open), hhmm(iv.close)))
            .collect::<Vec<_>>()
            .join(", ")
    }
}

pub fn hhmm(minute: u16) -> String {
    format!("{:02}:{:02}", minute / 60, minute % 60)
}
