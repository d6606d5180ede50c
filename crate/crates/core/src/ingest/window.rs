use super::snapshot::OccupancySnapshot;
use crate::spatial::SiteId;
use chrono::{DateTime, Datelike, NaiveDate, NaiveTime, Utc, Weekday};
use chrono_tz::Tz;
use std::collections::BTreeSet;
use std::fmt;

pub const DEFAULT_TIMEZONE: Tz = chrono_tz::Europe::Rome;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WindowError {
    #[error("invalid range: from {from} is after to {to}")]
    InvalidRange { from: DateTime<Utc>, to: DateTime<Utc> },
    #[error("invalid time slot `{0}`, expected HH:MM-HH:MM")]
    InvalidSlot(String),
}

/// Wall-clock interval `[start, end)`; wraps past midnight when `end < start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeSlot {
    pub start: NaiveTime,
    pub end: NaiveTime,
}

impl TimeSlot {
    pub fn contains(&self, t: NaiveTime) -> bool {
        if self.start <= self.end {
            self.start <= t && t < self.end
        } else {
            t >= self.start || t < self.end
        }
    }
}

impl std::str::FromStr for TimeSlot {
    type Err = WindowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || WindowError::InvalidSlot(s.to_string());
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let start = NaiveTime::parse_from_str(a.trim(), "%H:%M").map_err(|_| bad())?;
        let end = NaiveTime::parse_from_str(b.trim(), "%H:%M").map_err(|_| bad())?;
        if start == end {
            return Err(bad());
        }
        Ok(Self { start, end })
    }
}

impl fmt::Display for TimeSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start.format("%H:%M"), self.end.format("%H:%M"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowQuery {
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
    pub sites: Option<BTreeSet<SiteId>>,
    pub slot: Option<TimeSlot>,
    pub timezone: Tz,
}

impl WindowQuery {
    pub fn new(from: DateTime<Utc>, to: DateTime<Utc>) -> Self {
        Self {
            from,
            to,
            sites: None,
            slot: None,
            timezone: DEFAULT_TIMEZONE,
        }
    }

    pub fn with_slot(mut self, slot: TimeSlot) -> Self {
        self.slot = Some(slot);
        self
    }

    pub fn with_sites<I: IntoIterator<Item = SiteId>>(mut self, sites: I) -> Self {
        self.sites = Some(sites.into_iter().collect());
        self
    }

    pub fn with_timezone(mut self, tz: Tz) -> Self {
        self.timezone = tz;
        self
    }

    pub fn matches(&self, s: &OccupancySnapshot) -> bool {
        self.from <= s.ts
            && s.ts < self.to
            && self.sites.as_ref().is_none_or(|set| set.contains(&s.site_id))
            && self
                .slot
                .is_none_or(|slot| slot.contains(s.ts.with_timezone(&self.timezone).time()))
    }
}

/// Snapshots inside the window, ordered by `(ts, site_id)`.
pub fn query_window(snapshots: &[OccupancySnapshot], q: &WindowQuery) -> Result<Vec<OccupancySnapshot>, WindowError> {
    if q.from > q.to {
        return Err(WindowError::InvalidRange { from: q.from, to: q.to });
    }
    let mut out: Vec<OccupancySnapshot> = snapshots.iter().filter(|s| q.matches(s)).cloned().collect();
    out.sort_by(|a, b| a.ts.cmp(&b.ts).then_with(|| a.site_id.cmp(&b.site_id)));
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DayKind {
    Weekday,
    Weekend,
}

impl DayKind {
    pub fn of(date: NaiveDate) -> Self {
        match date.weekday() {
            Weekday::Sat | Weekday::Sun => DayKind::Weekend,
            _ => DayKind::Weekday,
        }
    }
}

/// Local calendar date of an instant.
pub fn local_date(ts: DateTime<Utc>, tz: Tz) -> NaiveDate {
    ts.with_timezone(&tz).date_naive()
}

/// Splits the inclusive date range into weekdays and weekend days.
pub fn partition_days(first: NaiveDate, last: NaiveDate) -> (Vec<NaiveDate>, Vec<NaiveDate>) {
    first
        .iter_days()
        .take_while(|d| *d <= last)
        .partition(|&d| DayKind::of(d) == DayKind::Weekday)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::snapshot::TriageCounts;
    use chrono::{Duration, TimeZone};

    fn day_of_snapshots(site: &str, day: DateTime<Utc>) -> Vec<OccupancySnapshot> {
        (0..288)
            .map(|i| OccupancySnapshot {
                site_id: site.into(),
                ts: day + Duration::minutes(5 * i),
                in_charge: TriageCounts::default(),
                waiting: TriageCounts::default(),
            })
            .collect()
    }

    #[test]
    fn empty_store() {
        let t = Utc::now();
        assert!(query_window(&[], &WindowQuery::new(t, t)).unwrap().is_empty());
    }

    #[test]
    fn inverted_range() {
        let t = Utc::now();
        assert!(matches!(
            query_window(&[], &WindowQuery::new(t, t - Duration::seconds(1))),
            Err(WindowError::InvalidRange { .. })
        ));
    }

    #[test]
    fn evening_slot_selects_twelve_per_site() {
        // local midnight in Rome (UTC+1 in March before DST)
        let day = Utc.with_ymd_and_hms(2022, 3, 15, 23, 0, 0).unwrap();
        let mut all = day_of_snapshots("b", day);
        all.extend(day_of_snapshots("a", day));
        let q = WindowQuery::new(day, day + Duration::days(1)).with_slot("19:00-20:00".parse().unwrap());
        let got = query_window(&all, &q).unwrap();
        assert_eq!(got.len(), 24);
        assert_eq!(got[0].site_id, SiteId::from("a"));
        assert_eq!(got[1].site_id, SiteId::from("b"));
        assert!(got.windows(2).all(|w| (w[0].ts, &w[0].site_id) < (w[1].ts, &w[1].site_id)));
        let only_a = query_window(&all, &q.clone().with_sites(["a".into()])).unwrap();
        assert_eq!(only_a.len(), 12);
        let utc = query_window(&all, &q.with_timezone(chrono_tz::UTC)).unwrap();
        assert_eq!(utc.len(), 24);
        assert_eq!(utc[0].ts.format("%H:%M").to_string(), "19:00");
    }

    #[test]
    fn half_open_bounds() {
        let day = Utc.with_ymd_and_hms(2022, 3, 16, 0, 0, 0).unwrap();
        let all = day_of_snapshots("a", day);
        let q = WindowQuery::new(day, day + Duration::minutes(10));
        assert_eq!(query_window(&all, &q).unwrap().len(), 2);
    }

    #[test]
    fn slot_parsing_and_wrap() {
        let s: TimeSlot = "23:00-01:00".parse().unwrap();
        assert!(s.contains(NaiveTime::from_hms_opt(0, 30, 0).unwrap()));
        assert!(!s.contains(NaiveTime::from_hms_opt(1, 0, 0).unwrap()));
        assert_eq!(s.to_string(), "23:00-01:00");
        assert!("7pm-8pm".parse::<TimeSlot>().is_err());
        assert!("10:00-10:00".parse::<TimeSlot>().is_err());
    }

    #[test]
    fn march_fortnight_partition() {
        let (weekdays, weekend) = partition_days(
            NaiveDate::from_ymd_opt(2022, 3, 7).unwrap(),
            NaiveDate::from_ymd_opt(2022, 3, 20).unwrap(),
        );
        assert_eq!((weekdays.len(), weekend.len()), (10, 4));
    }
}
