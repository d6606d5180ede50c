//! Capacity and supply estimation from occupancy series.
//!
//! A site's capacity is the peak in-charge load it has been observed to
//! carry; its supply at an instant is the headroom left under that peak.

use super::snapshot::{OccupancySnapshot, TriageCode};
use crate::spatial::SiteId;
use serde::Serialize;

/// Subset of triage codes counted as load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TriageSet([bool; 4]);

impl TriageSet {
    /// White, green and yellow: patients not in critical condition.
    pub const NON_CRITICAL: TriageSet = TriageSet([true, true, true, false]);
    pub const ALL: TriageSet = TriageSet([true; 4]);

    pub fn from_codes<I: IntoIterator<Item = TriageCode>>(codes: I) -> Self {
        let mut set = [false; 4];
        for c in codes {
            set[c as usize] = true;
        }
        TriageSet(set)
    }

    pub fn contains(&self, code: TriageCode) -> bool {
        self.0[code as usize]
    }

    pub fn codes(&self) -> impl Iterator<Item = TriageCode> + '_ {
        TriageCode::ALL.into_iter().filter(|&c| self.contains(c))
    }
}

impl Default for TriageSet {
    fn default() -> Self {
        Self::NON_CRITICAL
    }
}

impl std::str::FromStr for TriageSet {
    type Err = String;

    /// Comma-separated codes, e.g. `white,green,yellow`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let codes = s
            .split(',')
            .map(|c| c.trim().parse::<TriageCode>())
            .collect::<Result<Vec<_>, _>>()?;
        if codes.is_empty() {
            return Err("empty triage set".into());
        }
        Ok(Self::from_codes(codes))
    }
}

impl std::fmt::Display for TriageSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let ids: Vec<&str> = self.codes().map(|c| c.id()).collect();
        f.write_str(&ids.join(","))
    }
}

impl Serialize for TriageSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.codes().map(|c| c.id()))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadOptions {
    pub codes: TriageSet,
    /// Also count waiting patients as load.
    pub include_waiting: bool,
}

impl LoadOptions {
    pub fn load(&self, s: &OccupancySnapshot) -> u64 {
        let mut n = s.in_charge.total(self.codes.codes());
        if self.include_waiting {
            n += s.waiting.total(self.codes.codes());
        }
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CapacityError {
    #[error("cannot estimate capacity from an empty series")]
    EmptySeries,
    #[error("series for `{expected}` contains a snapshot of `{found}`")]
    MixedSites { expected: SiteId, found: SiteId },
    #[error("series for `{0}` is not ordered by timestamp")]
    Unordered(SiteId),
}

/// Peak load over the series. A series that never carried any load yields 0.
pub fn estimate_capacity(series: &[OccupancySnapshot], opts: &LoadOptions) -> Result<u64, CapacityError> {
    series
        .iter()
        .map(|s| opts.load(s))
        .max()
        .ok_or(CapacityError::EmptySeries)
}

/// Headroom under `capacity`, clamped at zero when the current load exceeds it.
pub fn current_supply(snapshot: &OccupancySnapshot, capacity: u64, opts: &LoadOptions) -> u64 {
    capacity.saturating_sub(opts.load(snapshot))
}

/// Time-ordered snapshots of a single site.
#[derive(Debug, Clone, PartialEq)]
pub struct FacilitySeries {
    site_id: SiteId,
    snapshots: Vec<OccupancySnapshot>,
}

impl FacilitySeries {
    pub fn new(site_id: SiteId, snapshots: Vec<OccupancySnapshot>) -> Result<Self, CapacityError> {
        if let Some(s) = snapshots.iter().find(|s| s.site_id != site_id) {
            return Err(CapacityError::MixedSites {
                expected: site_id,
                found: s.site_id.clone(),
            });
        }
        if snapshots.windows(2).any(|w| w[1].ts < w[0].ts) {
            return Err(CapacityError::Unordered(site_id));
        }
        Ok(Self { site_id, snapshots })
    }

    pub fn site_id(&self) -> &SiteId {
        &self.site_id
    }

    pub fn snapshots(&self) -> &[OccupancySnapshot] {
        &self.snapshots
    }

    pub fn max_capacity(&self, opts: &LoadOptions) -> Result<u64, CapacityError> {
        estimate_capacity(&self.snapshots, opts)
    }
}
