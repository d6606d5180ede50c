//! Ties the stored occupancy series to the AR model: capacities, supply
//! vectors and AR matrices at arbitrary instants, and the weekday/weekend
//! differential over a time window.

use crate::ar::{ArError, ArMatrix, ArModel, ArParams};
use crate::impact::ImpactError;
use crate::ingest::window::{local_date, DayKind, TimeSlot, WindowError, DEFAULT_TIMEZONE};
use crate::ingest::{LoadOptions, OccupancySnapshot};
use crate::spatial::{validate_sites, FacilitySite, Grid, SiteId, SpatialError};
use crate::stats::{differential_report, DifferentialReport, SamplePair, StatsError, TTestVariant, Tail};
use chrono::{DateTime, NaiveDate, Utc};
use chrono_tz::Tz;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error(transparent)]
    Ar(#[from] ArError),
    #[error(transparent)]
    Impact(#[from] ImpactError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error("no snapshot at or before {at} for site(s): {}", join_ids(.sites))]
    MissingSnapshots { at: DateTime<Utc>, sites: Vec<SiteId> },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

fn join_ids(ids: &[SiteId]) -> String {
    ids.iter().map(|s| s.0.as_str()).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub ar: ArParams,
    pub load: LoadOptions,
    pub timezone: Tz,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            ar: ArParams::default(),
            load: LoadOptions::default(),
            timezone: DEFAULT_TIMEZONE,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct SiteSeries {
    ts: Vec<DateTime<Utc>>,
    load: Vec<u64>,
    capacity: Option<u64>,
}

/// Supply of every site at one instant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Supply {
    pub at: DateTime<Utc>,
    pub values: Vec<f64>,
    pub capacity: Vec<u64>,
    pub load: Vec<u64>,
    /// Timestamp of the snapshot each value came from.
    pub observed_at: Vec<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ArSummary {
    pub min_a: f64,
    pub max_a: f64,
    pub mean_a: f64,
    pub min_r: f64,
    pub max_r: f64,
    pub mean_r: f64,
}

fn min_max_mean(xs: &[f64]) -> (f64, f64, f64) {
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max, xs.iter().sum::<f64>() / xs.len() as f64)
}

impl ArSummary {
    pub fn of(m: &ArMatrix) -> Self {
        let (min_a, max_a, mean_a) = min_max_mean(&m.accessibility());
        let (min_r, max_r, mean_r) = min_max_mean(&m.reachability());
        Self {
            min_a,
            max_a,
            mean_a,
            min_r,
            max_r,
            mean_r,
        }
    }
}

/// What one observation of the differential test is.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleUnit {
    /// Mean over the slot of each calendar day.
    #[default]
    DayMean,
    /// Every snapshot instant in the slot.
    Snapshot,
}

impl std::str::FromStr for SampleUnit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "day_mean" => Ok(Self::DayMean),
            "snapshot" => Ok(Self::Snapshot),
            other => Err(format!("unknown sample unit `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DifferentialRequest {
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
    pub slot: Option<TimeSlot>,
    pub variant: TTestVariant,
    pub tail: Tail,
    pub alpha: f64,
    pub unit: SampleUnit,
}

impl DifferentialRequest {
    /// Weekend (group a) against weekday (group b), testing weekday > weekend.
    pub fn weekend_effect(from: DateTime<Utc>, to: DateTime<Utc>, slot: Option<TimeSlot>) -> Self {
        Self {
            from,
            to,
            slot,
            variant: TTestVariant::Welch,
            tail: Tail::BGreater,
            alpha: 0.05,
            unit: SampleUnit::DayMean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifferentialRun {
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
    pub slot: Option<String>,
    pub timezone: String,
    pub unit: SampleUnit,
    pub group_a: DayKind,
    pub group_b: DayKind,
    pub instants: usize,
    pub weekend_days: Vec<NaiveDate>,
    pub weekday_days: Vec<NaiveDate>,
    pub report: DifferentialReport,
}

#[derive(Debug, Clone)]
pub struct Engine {
    grid: Grid,
    sites: Vec<FacilitySite>,
    model: ArModel,
    config: EngineConfig,
    series: Vec<SiteSeries>,
}

impl Engine {
    pub fn new(grid: Grid, sites: Vec<FacilitySite>, config: EngineConfig) -> Result<Self, EngineError> {
        validate_sites(&sites)?;
        let model = ArModel::new(&grid, &sites, config.ar.clone())?;
        let series = vec![SiteSeries::default(); sites.len()];
        Ok(Self {
            grid,
            sites,
            model,
            config,
            series,
        })
    }

    /// Replaces the occupancy data. Snapshots of unknown sites are ignored.
    pub fn load_snapshots(&mut self, snapshots: &[OccupancySnapshot]) {
        let pos: HashMap<&SiteId, usize> = self.sites.iter().enumerate().map(|(i, s)| (&s.site_id, i)).collect();
        let mut per_site: Vec<Vec<(DateTime<Utc>, u64)>> = vec![Vec::new(); self.sites.len()];
        let mut ignored = 0usize;
        for s in snapshots {
            match pos.get(&s.site_id) {
                Some(&i) => per_site[i].push((s.ts, self.config.load.load(s))),
                None => ignored += 1,
            }
        }
        if ignored > 0 {
            tracing::warn!(ignored, "snapshots of sites outside the site list were ignored");
        }
        self.series = per_site
            .into_iter()
            .map(|mut v| {
                v.sort_by_key(|&(ts, _)| ts);
                let capacity = v.iter().map(|&(_, l)| l).max();
                let (ts, load) = v.into_iter().unzip();
                SiteSeries { ts, load, capacity }
            })
            .collect();
    }

    pub fn with_snapshots(mut self, snapshots: &[OccupancySnapshot]) -> Self {
        self.load_snapshots(snapshots);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sites(&self) -> &[FacilitySite] {
        &self.sites
    }

    pub fn model(&self) -> &ArModel {
        &self.model
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Peak observed load per site over all loaded data; `None` without data.
    pub fn capacities(&self) -> Vec<Option<u64>> {
        self.series.iter().map(|s| s.capacity).collect()
    }

    /// Distinct snapshot instants across all sites, ascending.
    pub fn instants(&self) -> Vec<DateTime<Utc>> {
        let set: BTreeSet<DateTime<Utc>> = self.series.iter().flat_map(|s| s.ts.iter().copied()).collect();
        set.into_iter().collect()
    }

    /// Supply from each site's latest snapshot at or before `at`.
    pub fn supply_at(&self, at: DateTime<Utc>) -> Result<Supply, EngineError> {
        let k = self.sites.len();
        let mut supply = Supply {
            at,
            values: Vec::with_capacity(k),
            capacity: Vec::with_capacity(k),
            load: Vec::with_capacity(k),
            observed_at: Vec::with_capacity(k),
        };
        let mut missing = Vec::new();
        for (site, s) in self.sites.iter().zip(&self.series) {
            let n = s.ts.partition_point(|&t| t <= at);
            let (Some(cap), true) = (s.capacity, n > 0) else {
                missing.push(site.site_id.clone());
                continue;
            };
            let load = s.load[n - 1];
            supply.values.push(cap.saturating_sub(load) as f64);
            supply.capacity.push(cap);
            supply.load.push(load);
            supply.observed_at.push(s.ts[n - 1]);
        }
        if !missing.is_empty() {
            return Err(EngineError::MissingSnapshots { at, sites: missing });
        }
        Ok(supply)
    }

    pub fn ar_for_supply(&self, supply: &Supply) -> Result<ArMatrix, EngineError> {
        Ok(self.model.evaluate(&supply.values, Some(supply.at))?)
    }

    pub fn ar_at(&self, at: DateTime<Utc>) -> Result<ArMatrix, EngineError> {
        self.ar_for_supply(&self.supply_at(at)?)
    }

    /// Per-cell two-sample test of weekend (a) against weekday (b) accessibility.
    ///
    /// Accessibility is evaluated at every snapshot instant in the window
    /// (and slot) at which all sites have data; instants are then pooled per
    /// local calendar day or used individually, per `req.unit`.
    pub fn differential(&self, req: &DifferentialRequest) -> Result<DifferentialRun, EngineError> {
        if req.from > req.to {
            return Err(WindowError::InvalidRange {
                from: req.from,
                to: req.to,
            }
            .into());
        }
        let tz = self.config.timezone;
        let instants: Vec<DateTime<Utc>> = self
            .instants()
            .into_iter()
            .filter(|&t| req.from <= t && t < req.to)
            .filter(|t| req.slot.is_none_or(|s| s.contains(t.with_timezone(&tz).time())))
            .collect();
        let evaluated: Vec<(DateTime<Utc>, Vec<f64>)> = instants
            .par_iter()
            .filter_map(|&t| match self.ar_at(t) {
                Ok(m) => Some(Ok((t, m.accessibility()))),
                Err(EngineError::MissingSnapshots { .. }) => None,
                Err(e) => Some(Err(e)),
            })
            .collect::<Result<_, _>>()?;
        if evaluated.is_empty() {
            return Err(EngineError::InsufficientData(
                "no instant in the window has data for every site".into(),
            ));
        }

        // observation key -> (sum of A per cell, count); BTreeMap keeps day order
        let mut obs: BTreeMap<(NaiveDate, DateTime<Utc>), (Vec<f64>, usize)> = BTreeMap::new();
        for (t, a) in &evaluated {
            let day = local_date(*t, tz);
            let key = match req.unit {
                SampleUnit::DayMean => (day, DateTime::<Utc>::MIN_UTC),
                SampleUnit::Snapshot => (day, *t),
            };
            let entry = obs.entry(key).or_insert_with(|| (vec![0.0; a.len()], 0));
            entry.0.iter_mut().zip(a).for_each(|(s, x)| *s += x);
            entry.1 += 1;
        }
        let mut weekend_days = BTreeSet::new();
        let mut weekday_days = BTreeSet::new();
        let mut group_a: Vec<Vec<f64>> = Vec::new();
        let mut group_b: Vec<Vec<f64>> = Vec::new();
        for ((day, _), (sum, n)) in obs {
            let mean: Vec<f64> = sum.into_iter().map(|s| s / n as f64).collect();
            match DayKind::of(day) {
                DayKind::Weekend => {
                    weekend_days.insert(day);
                    group_a.push(mean);
                }
                DayKind::Weekday => {
                    weekday_days.insert(day);
                    group_b.push(mean);
                }
            }
        }
        if group_a.len() < 2 || group_b.len() < 2 {
            return Err(EngineError::InsufficientData(format!(
                "need at least two weekend and two weekday observations, got {} and {}",
                group_a.len(),
                group_b.len()
            )));
        }
        let samples: Vec<SamplePair> = self
            .grid
            .cells()
            .iter()
            .enumerate()
            .map(|(i, c)| SamplePair {
                cell_id: c.cell_id.clone(),
                group_a: group_a.iter().map(|o| o[i]).collect(),
                group_b: group_b.iter().map(|o| o[i]).collect(),
            })
            .collect();
        let report = differential_report(&samples, req.variant, req.tail, req.alpha)?;
        Ok(DifferentialRun {
            from: req.from,
            to: req.to,
            slot: req.slot.map(|s| s.to_string()),
            timezone: tz.name().to_string(),
            unit: req.unit,
            group_a: DayKind::Weekend,
            group_b: DayKind::Weekday,
            instants: evaluated.len(),
            weekend_days: weekend_days.into_iter().collect(),
            weekday_days: weekday_days.into_iter().collect(),
            report,
        })
    }
}
