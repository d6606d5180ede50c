//! Accessibility-reachability (AR) matrix.
//!
//! An AR entry couples the supply of facility `k` with the decay-weighted
//! population competing for it, gated by catchment membership:
//!
//! ```text
//! facility_pool:   p*_k = Σ_m p_m c_mk d_mk      ar_lk = s_k / p*_k · c_lk d_lk
//! cell_aggregated: p*_l = Σ_k c_lk · pool_k      ar_lk = s_k / p*_l · c_lk d_lk
//! ```
//!
//! A zero demand component yields a zero entry. Row sums give accessibility,
//! column sums give reachability.

use crate::spatial::{CatchmentMatrix, DecayMatrix, DistanceMetric, FacilitySite, Grid, SpatialError};
use crate::spatial::{distance_matrix, DEFAULT_COLOCATION_EPSILON_KM};
use chrono::{DateTime, Utc};
use ndarray::{Array2, Axis, Zip};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ArError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("supply at site index {index} is invalid: {value}")]
    InvalidSupply { index: usize, value: f64 },
    #[error("population at cell index {index} is invalid: {value}")]
    InvalidPopulation { index: usize, value: f64 },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
}

/// How the extended population is indexed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtPopMode {
    /// One decay-weighted demand pool per facility (length K).
    #[default]
    FacilityPool,
    /// Facility pools summed back onto each cell's catchment (length L).
    CellAggregated,
}

impl std::str::FromStr for ExtPopMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "facility_pool" => Ok(ExtPopMode::FacilityPool),
            "cell_aggregated" => Ok(ExtPopMode::CellAggregated),
            other => Err(format!("unknown extended-population mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPopulation {
    values: Vec<f64>,
    mode: ExtPopMode,
}

impl ExtendedPopulation {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mode(&self) -> ExtPopMode {
        self.mode
    }
}

fn check_shapes(p_len: usize, c: &CatchmentMatrix, d: &DecayMatrix) -> Result<(), ArError> {
    if c.shape() != d.shape() {
        return Err(ArError::Dimension(format!(
            "catchment {:?} vs decay {:?}",
            c.shape(),
            d.shape()
        )));
    }
    if c.shape().0 != p_len {
        return Err(ArError::Dimension(format!(
            "population has {p_len} cells, matrices have {}",
            c.shape().0
        )));
    }
    Ok(())
}

pub fn extended_population(
    p: &[f64],
    c: &CatchmentMatrix,
    d: &DecayMatrix,
    mode: ExtPopMode,
) -> Result<ExtendedPopulation, ArError> {
    check_shapes(p.len(), c, d)?;
    if let Some((index, &value)) = p.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(ArError::InvalidPopulation { index, value });
    }
    let (l_count, k_count) = c.shape();
    let mut pool = vec![0.0; k_count];
    for m in 0..l_count {
        for (k, slot) in pool.iter_mut().enumerate() {
            if c.get(m, k) {
                *slot += p[m] * d.get(m, k);
            }
        }
    }
    let values = match mode {
        ExtPopMode::FacilityPool => pool,
        ExtPopMode::CellAggregated => (0..l_count)
            .map(|l| (0..k_count).filter(|&k| c.get(l, k)).map(|k| pool[k]).sum())
            .collect(),
    };
    Ok(ExtendedPopulation { values, mode })
}

/// An L×K AR matrix together with the parameterization that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArMatrix {
    #[serde(skip)]
    entries: Array2<f64>,
    pub standardized: bool,
    pub gamma: f64,
    pub tau_km: f64,
    pub timestamp: Option<DateTime<Utc>>,
    pub extpop_mode: ExtPopMode,
}

impl ArMatrix {
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.dim()
    }

    pub fn with_timestamp(mut self, ts: DateTime<Utc>) -> Self {
        self.timestamp = Some(ts);
        self
    }

    /// Same parameterization, new entries. Used by shock scenarios.
    pub fn with_entries(&self, entries: Array2<f64>) -> Self {
        Self {
            entries,
            standardized: self.standardized,
            gamma: self.gamma,
            tau_km: self.tau_km,
            timestamp: self.timestamp,
            extpop_mode: self.extpop_mode,
        }
    }

    /// Wraps raw entries, e.g. for tests or externally computed matrices.
    pub fn from_entries(entries: Array2<f64>, gamma: f64, tau_km: f64) -> Self {
        Self {
            entries,
            standardized: false,
            gamma,
            tau_km,
            timestamp: None,
            extpop_mode: ExtPopMode::FacilityPool,
        }
    }

    pub fn accessibility(&self) -> Vec<f64> {
        accessibility(self)
    }

    pub fn reachability(&self) -> Vec<f64> {
        reachability(self)
    }
}

/// Entrywise AR computation.
pub fn ar_matrix(
    s: &[f64],
    pstar: &ExtendedPopulation,
    c: &CatchmentMatrix,
    d: &DecayMatrix,
) -> Result<ArMatrix, ArError> {
    let (l_count, k_count) = c.shape();
    check_shapes(l_count, c, d)?;
    check_supply(s, k_count)?;
    let expected = match pstar.mode {
        ExtPopMode::FacilityPool => k_count,
        ExtPopMode::CellAggregated => l_count,
    };
    if pstar.values.len() != expected {
        return Err(ArError::Dimension(format!(
            "extended population has length {}, expected {expected}",
            pstar.values.len()
        )));
    }
    let mut entries = Array2::<f64>::zeros((l_count, k_count));
    for l in 0..l_count {
        for k in 0..k_count {
            if !c.get(l, k) {
                continue;
            }
            let demand = match pstar.mode {
                ExtPopMode::FacilityPool => pstar.values[k],
                ExtPopMode::CellAggregated => pstar.values[l],
            };
            if demand > 0.0 {
                entries[(l, k)] = s[k] / demand * d.get(l, k);
            }
        }
    }
    Ok(ArMatrix {
        entries,
        standardized: false,
        gamma: d.gamma(),
        tau_km: c.tau_km(),
        timestamp: None,
        extpop_mode: pstar.mode,
    })
}

fn check_supply(s: &[f64], k_count: usize) -> Result<(), ArError> {
    if s.len() != k_count {
        return Err(ArError::Dimension(format!(
            "supply has length {}, expected {k_count}",
            s.len()
        )));
    }
    if let Some((index, &value)) = s.iter().enumerate().find(|(_, v)| !(**v >= 0.0 && v.is_finite())) {
        return Err(ArError::InvalidSupply { index, value });
    }
    Ok(())
}

/// Global min-max rescaling onto [0, 1]. A constant matrix maps to zeros.
pub fn minmax_standardize(m: &ArMatrix) -> ArMatrix {
    let (lo, hi) = m
        .entries
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let range = hi - lo;
    let entries = if m.entries.is_empty() || !(range > 0.0) {
        Array2::zeros(m.entries.dim())
    } else {
        m.entries.mapv(|x| ((x - lo) / range).clamp(0.0, 1.0))
    };
    ArMatrix {
        entries,
        standardized: true,
        ..m.clone()
    }
}

/// Row sums, summed left to right.
pub fn accessibility(m: &ArMatrix) -> Vec<f64> {
    m.entries
        .axis_iter(Axis(0))
        .map(|row| row.iter().fold(0.0, |acc, &x| acc + x))
        .collect()
}

/// Column sums, summed top to bottom.
pub fn reachability(m: &ArMatrix) -> Vec<f64> {
    let mut out = vec![0.0; m.entries.ncols()];
    for row in m.entries.axis_iter(Axis(0)) {
        for (acc, &x) in out.iter_mut().zip(row.iter()) {
            *acc += x;
        }
    }
    out
}

/// Parameters of an AR computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArParams {
    pub gamma: f64,
    pub tau_km: f64,
    pub catchment_metric: DistanceMetric,
    pub decay_metric: DistanceMetric,
    pub colocation_epsilon_km: f64,
    pub extpop_mode: ExtPopMode,
    pub standardize: bool,
}

impl Default for ArParams {
    fn default() -> Self {
        Self {
            gamma: -2.0,
            tau_km: 5.0,
            catchment_metric: DistanceMetric::ProjectedEuclidean,
            decay_metric: DistanceMetric::ProjectedEuclidean,
            colocation_epsilon_km: DEFAULT_COLOCATION_EPSILON_KM,
            extpop_mode: ExtPopMode::FacilityPool,
            standardize: true,
        }
    }
}

/// Supply-independent part of the AR computation, built once per grid/site set.
///
/// Evaluating a supply vector costs one pass over the `C ⊙ D` weights.
#[derive(Debug, Clone)]
pub struct ArModel {
    params: ArParams,
    catchment: CatchmentMatrix,
    decay: DecayMatrix,
    weights: Array2<f64>,
    pstar: ExtendedPopulation,
}

impl ArModel {
    pub fn new(grid: &Grid, sites: &[FacilitySite], params: ArParams) -> Result<Self, ArError> {
        let catch_dist = distance_matrix(grid, sites, params.catchment_metric)?;
        let decay_dist = if params.decay_metric == params.catchment_metric {
            catch_dist.clone()
        } else {
            distance_matrix(grid, sites, params.decay_metric)?
        };
        let catchment = CatchmentMatrix::from_distances(&catch_dist, params.tau_km, params.catchment_metric)?;
        let decay = DecayMatrix::from_distances(
            &decay_dist,
            params.gamma,
            params.decay_metric,
            params.colocation_epsilon_km,
        )?;
        let pstar = extended_population(&grid.populations(), &catchment, &decay, params.extpop_mode)?;
        let mut weights = Array2::<f64>::zeros(catchment.shape());
        Zip::from(&mut weights)
            .and(catchment.entries())
            .and(decay.entries())
            .for_each(|w, &inside, &d| {
                if inside {
                    *w = d;
                }
            });
        Ok(Self {
            params,
            catchment,
            decay,
            weights,
            pstar,
        })
    }

    pub fn params(&self) -> &ArParams {
        &self.params
    }

    pub fn catchment(&self) -> &CatchmentMatrix {
        &self.catchment
    }

    pub fn decay(&self) -> &DecayMatrix {
        &self.decay
    }

    pub fn extended_population(&self) -> &ExtendedPopulation {
        &self.pstar
    }

    pub fn shape(&self) -> (usize, usize) {
        self.weights.dim()
    }

    /// Raw AR matrix for supply `s`, via `(C ⊙ D)` scaled by column and row factors.
    pub fn raw(&self, s: &[f64]) -> Result<ArMatrix, ArError> {
        let (_, k_count) = self.shape();
        check_supply(s, k_count)?;
        let inv = |x: f64| if x > 0.0 { 1.0 / x } else { 0.0 };
        let mut entries = self.weights.clone();
        match self.pstar.mode {
            ExtPopMode::FacilityPool => {
                let col: Vec<f64> = s.iter().zip(&self.pstar.values).map(|(&sk, &pk)| sk * inv(pk)).collect();
                entries.axis_iter_mut(Axis(0)).for_each(|mut row| {
                    row.iter_mut().zip(&col).for_each(|(x, f)| *x *= f);
                });
            }
            ExtPopMode::CellAggregated => {
                Zip::from(entries.axis_iter_mut(Axis(0)))
                    .and(&ndarray::ArrayView1::from(&self.pstar.values[..]))
                    .par_for_each(|mut row, &pl| {
                        let r = inv(pl);
                        row.iter_mut().zip(s).for_each(|(x, &sk)| *x *= sk * r);
                    });
            }
        }
        Ok(ArMatrix {
            entries,
            standardized: false,
            gamma: self.params.gamma,
            tau_km: self.params.tau_km,
            timestamp: None,
            extpop_mode: self.pstar.mode,
        })
    }

    /// AR matrix for supply `s`, standardized when the parameters ask for it.
    pub fn evaluate(&self, s: &[f64], timestamp: Option<DateTime<Utc>>) -> Result<ArMatrix, ArError> {
        let raw = self.raw(s)?;
        let mut m = if self.params.standardize {
            minmax_standardize(&raw)
        } else {
            raw
        };
        m.timestamp = timestamp;
        Ok(m)
    }
}
