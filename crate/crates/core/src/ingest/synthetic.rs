//! Synthetic occupancy generator.
//!
//! Each site's expected in-charge load follows a daily cosine around its bed
//! count, scaled on weekends; observed counts are Poisson draws split across
//! triage codes. Every `(site, instant)` pair has its own RNG stream, so any
//! snapshot can be regenerated independently of the order of generation.

use super::snapshot::{OccupancySnapshot, TriageCode, TriageCounts};
use super::window::{DayKind, DEFAULT_TIMEZONE};
use crate::spatial::SiteId;
use chrono::{DateTime, Duration, Timelike, Utc};
use chrono_tz::Tz;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Shares of non-critical load assigned to white, green and yellow.
const NON_CRITICAL_SPLIT: [f64; 3] = [0.2, 0.5, 0.3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteProfile {
    pub site_id: SiteId,
    /// Size of the facility in the generating process.
    pub beds: u32,
    /// Mean in-charge load as a fraction of `beds`.
    pub base_occupancy: f64,
    /// Half the peak-to-trough swing of the daily cycle, as a fraction of `beds`.
    pub daily_amplitude: f64,
    /// Local hour at which the daily cycle peaks.
    pub peak_hour: f64,
    /// Multiplier applied to the expected load on Saturdays and Sundays.
    pub weekend_factor: f64,
    /// Fraction of in-charge patients coded red.
    pub red_share: f64,
    /// Expected waiting patients per in-charge patient.
    pub waiting_ratio: f64,
}

impl SiteProfile {
    pub fn new(site_id: impl Into<String>, beds: u32) -> Self {
        Self {
            site_id: SiteId(site_id.into()),
            beds,
            base_occupancy: 0.6,
            daily_amplitude: 0.2,
            peak_hour: 15.0,
            weekend_factor: 1.0,
            red_share: 0.1,
            waiting_ratio: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyModel {
    pub profiles: Vec<SiteProfile>,
    pub seed: u64,
    #[serde(with = "tz_name")]
    pub timezone: Tz,
}

mod tz_name {
    use chrono_tz::Tz;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(tz: &Tz, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(tz.name())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Tz, D::Error> {
        let name = String::deserialize(d)?;
        name.parse().map_err(serde::de::Error::custom)
    }
}

fn stream_seed(seed: u64, site: usize, ts: i64) -> u64 {
    // splitmix64 finalizer over the combined key
    let mut z = seed ^ (site as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (ts as u64).rotate_left(32);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u32 {
    if mean <= 0.0 {
        return 0;
    }
    let x: f64 = Poisson::new(mean).expect("positive finite mean").sample(rng);
    x.min(u32::MAX as f64) as u32
}

fn binomial(rng: &mut ChaCha8Rng, n: u32, p: f64) -> u32 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    Binomial::new(u64::from(n), p).expect("valid probability").sample(rng) as u32
}

impl OccupancyModel {
    pub fn new(profiles: Vec<SiteProfile>, seed: u64) -> Self {
        Self {
            profiles,
            seed,
            timezone: DEFAULT_TIMEZONE,
        }
    }

    pub fn with_timezone(mut self, tz: Tz) -> Self {
        self.timezone = tz;
        self
    }

    /// Expected in-charge load of site `site` at `ts`.
    pub fn mean_load(&self, site: usize, ts: DateTime<Utc>) -> f64 {
        let p = &self.profiles[site];
        let local = ts.with_timezone(&self.timezone);
        let hour = local.hour() as f64 + local.minute() as f64 / 60.0 + local.second() as f64 / 3600.0;
        let phase = 2.0 * std::f64::consts::PI * (hour - p.peak_hour) / 24.0;
        let level = (p.base_occupancy + p.daily_amplitude * phase.cos()).max(0.0);
        let weekend = match DayKind::of(local.date_naive()) {
            DayKind::Weekend => p.weekend_factor,
            DayKind::Weekday => 1.0,
        };
        f64::from(p.beds) * level * weekend
    }

    fn split(rng: &mut ChaCha8Rng, total: u32, red_share: f64) -> TriageCounts {
        let red = binomial(rng, total, red_share);
        let mut rest = total - red;
        let mut counts = TriageCounts::default();
        counts.set(TriageCode::Red, red);
        let mut share_left = 1.0;
        for (code, share) in [TriageCode::White, TriageCode::Green].into_iter().zip(NON_CRITICAL_SPLIT) {
            let n = binomial(rng, rest, share / share_left);
            counts.set(code, n);
            rest -= n;
            share_left -= share;
        }
        counts.set(TriageCode::Yellow, rest);
        counts
    }

    pub fn snapshot(&self, site: usize, ts: DateTime<Utc>) -> OccupancySnapshot {
        let p = &self.profiles[site];
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(self.seed, site, ts.timestamp()));
        let mean = self.mean_load(site, ts);
        let in_charge_total = poisson(&mut rng, mean);
        let waiting_total = poisson(&mut rng, mean * p.waiting_ratio);
        OccupancySnapshot {
            site_id: p.site_id.clone(),
            ts,
            in_charge: Self::split(&mut rng, in_charge_total, p.red_share),
            waiting: Self::split(&mut rng, waiting_total, p.red_share),
        }
    }

    /// One snapshot per site at `ts`, in profile order.
    pub fn batch(&self, ts: DateTime<Utc>) -> Vec<OccupancySnapshot> {
        (0..self.profiles.len()).map(|i| self.snapshot(i, ts)).collect()
    }

    /// All batches at `from, from + cadence, ...` strictly before `to`.
    pub fn corpus(&self, from: DateTime<Utc>, to: DateTime<Utc>, cadence: Duration) -> Vec<OccupancySnapshot> {
        assert!(cadence > Duration::zero(), "cadence must be positive");
        let mut out = Vec::new();
        let mut ts = from;
        while ts < to {
            out.extend(self.batch(ts));
            ts += cadence;
        }
        out
    }
}
