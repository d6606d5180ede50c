//! Classical accessibility measures kept for side-by-side comparison with AR:
//! the gravity model, the two-step floating catchment area (2SFCA) and the
//! rational agent access model (RAAM) cost with lowest-cost facility choice.
//!
//! Distance matrices are L×K (cells × facilities). All catchments are
//! facility-centred: cell `i` belongs to facility `j` iff `d_ij ≤ d0`.

use crate::spatial::DEFAULT_COLOCATION_EPSILON_KM;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum BaselineError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("facility {0} has positive supply but no weighted demand")]
    ZeroDenominator(usize),
    #[error("facility {0} has positive supply but an empty catchment")]
    EmptyCatchment(usize),
    #[error("facility {0} receives demand but has zero supply")]
    ZeroSupply(usize),
    #[error("row {0} has no finite cost")]
    NoFiniteCost(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// Distance-decay kernel `f(d)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecayFunction {
    /// `d^exponent`, 1 within the colocation radius.
    Power { exponent: f64 },
    /// 1 inside `threshold`, 0 outside.
    Uniform { threshold: f64 },
    /// `exp(-½ (d / bandwidth)²)`.
    Gaussian { bandwidth: f64 },
}

impl Default for DecayFunction {
    fn default() -> Self {
        DecayFunction::Power { exponent: -2.0 }
    }
}

impl DecayFunction {
    pub fn eval(&self, d: f64) -> f64 {
        match *self {
            DecayFunction::Power { exponent } => {
                if d < DEFAULT_COLOCATION_EPSILON_KM {
                    1.0
                } else {
                    d.powf(exponent)
                }
            }
            DecayFunction::Uniform { threshold } => {
                if d <= threshold {
                    1.0
                } else {
                    0.0
                }
            }
            DecayFunction::Gaussian { bandwidth } => (-0.5 * (d / bandwidth).powi(2)).exp(),
        }
    }
}

fn check_dims(supply: &[f64], pop: &[f64], dist: &Array2<f64>) -> Result<(), BaselineError> {
    let (l, k) = dist.dim();
    if pop.len() != l || supply.len() != k {
        return Err(BaselineError::Dimension(format!(
            "distance matrix is {l}×{k}, population has {} entries, supply has {}",
            pop.len(),
            supply.len()
        )));
    }
    Ok(())
}

/// Gravity accessibility: `A_i = Σ_j S_j f(d_ij) / Σ_k D_k f(d_kj)`.
pub fn gravity_accessibility(
    supply: &[f64],
    pop: &[f64],
    dist: &Array2<f64>,
    f: DecayFunction,
) -> Result<Vec<f64>, BaselineError> {
    check_dims(supply, pop, dist)?;
    let weights = dist.mapv(|d| f.eval(d));
    let mut ratio = vec![0.0; supply.len()];
    for (j, col) in weights.axis_iter(Axis(1)).enumerate() {
        if supply[j] == 0.0 {
            continue;
        }
        let denom: f64 = col.iter().zip(pop).map(|(w, p)| w * p).sum();
        if !(denom > 0.0) {
            return Err(BaselineError::ZeroDenominator(j));
        }
        ratio[j] = supply[j] / denom;
    }
    Ok(weights
        .axis_iter(Axis(0))
        .map(|row| row.iter().zip(&ratio).map(|(w, r)| w * r).sum())
        .collect())
}

/// 2SFCA forward pass: facility supply-to-demand ratios.
pub fn fca_step1(
    supply: &[f64],
    pop: &[f64],
    dist: &Array2<f64>,
    f: DecayFunction,
    d0: f64,
) -> Result<Vec<f64>, BaselineError> {
    check_dims(supply, pop, dist)?;
    if !(d0 > 0.0) {
        return Err(BaselineError::InvalidParameter(format!("d0 must be positive, got {d0}")));
    }
    let mut out = Vec::with_capacity(supply.len());
    for (j, col) in dist.axis_iter(Axis(1)).enumerate() {
        if supply[j] == 0.0 {
            out.push(0.0);
            continue;
        }
        let demand: f64 = col
            .iter()
            .zip(pop)
            .filter(|(&d, _)| d <= d0)
            .map(|(&d, &p)| p * f.eval(d))
            .sum();
        if !(demand > 0.0) {
            return Err(BaselineError::EmptyCatchment(j));
        }
        out.push(supply[j] / demand);
    }
    Ok(out)
}

/// 2SFCA backward pass: `A_i = Σ_{j: d_ij ≤ d0} R_j f(d_ij)`.
pub fn fca_step2(
    ratios: &[f64],
    dist: &Array2<f64>,
    f: DecayFunction,
    d0: f64,
) -> Result<Vec<f64>, BaselineError> {
    if ratios.len() != dist.ncols() {
        return Err(BaselineError::Dimension(format!(
            "{} ratios for {} facilities",
            ratios.len(),
            dist.ncols()
        )));
    }
    Ok(dist
        .axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .zip(ratios)
                .filter(|(&d, _)| d <= d0)
                .map(|(&d, &r)| r * f.eval(d))
                .sum()
        })
        .collect())
}

/// Both 2SFCA passes.
pub fn two_step_fca(
    supply: &[f64],
    pop: &[f64],
    dist: &Array2<f64>,
    f: DecayFunction,
    d0: f64,
) -> Result<Vec<f64>, BaselineError> {
    let ratios = fca_step1(supply, pop, dist, f, d0)?;
    fca_step2(&ratios, dist, f, d0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RaamParams {
    /// Congestion normalizer.
    pub rho: f64,
    /// Travel-time normalizer, minutes.
    pub delta: f64,
    /// L×K travel times, minutes.
    pub travel_time: Array2<f64>,
    /// L×K origin-destination demand.
    pub od_demand: Array2<f64>,
}

impl RaamParams {
    pub fn new(
        rho: f64,
        delta: f64,
        travel_time: Array2<f64>,
        od_demand: Array2<f64>,
    ) -> Result<Self, BaselineError> {
        if !(rho > 0.0) || !(delta > 0.0) {
            return Err(BaselineError::InvalidParameter(format!(
                "rho and delta must be positive, got {rho} and {delta}"
            )));
        }
        if travel_time.dim() != od_demand.dim() {
            return Err(BaselineError::Dimension(format!(
                "travel time {:?} vs demand {:?}",
                travel_time.dim(),
                od_demand.dim()
            )));
        }
        if travel_time.iter().any(|&t| !(t >= 0.0)) {
            return Err(BaselineError::InvalidParameter("negative travel time".into()));
        }
        if od_demand.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(BaselineError::InvalidParameter("negative or non-finite demand".into()));
        }
        Ok(Self {
            rho,
            delta,
            travel_time,
            od_demand,
        })
    }

    /// Checks that each origin's demand row sums to its population.
    pub fn check_population(&self, pop: &[f64], rel_tol: f64) -> Result<(), BaselineError> {
        if pop.len() != self.od_demand.nrows() {
            return Err(BaselineError::Dimension("population length".into()));
        }
        for (i, row) in self.od_demand.axis_iter(Axis(0)).enumerate() {
            let total: f64 = row.sum();
            if (total - pop[i]).abs() > rel_tol * pop[i].abs().max(1.0) {
                return Err(BaselineError::InvalidParameter(format!(
                    "demand of cell {i} sums to {total}, population is {}",
                    pop[i]
                )));
            }
        }
        Ok(())
    }
}

/// Splits each cell's population evenly over the facilities within `tau`.
/// Cells with no facility in range contribute no demand.
pub fn uniform_od_split(pop: &[f64], dist: &Array2<f64>, tau: f64) -> Array2<f64> {
    let mut od = Array2::zeros(dist.dim());
    for ((i, row), mut out) in dist.axis_iter(Axis(0)).enumerate().zip(od.axis_iter_mut(Axis(0))) {
        let n = row.iter().filter(|&&d| d <= tau).count();
        if n == 0 {
            continue;
        }
        let share = pop[i] / n as f64;
        for (o, &d) in out.iter_mut().zip(row.iter()) {
            if d <= tau {
                *o = share;
            }
        }
    }
    od
}

/// RAAM cost per (cell, facility): `(Σ_i p_ij / s_j) / ρ + t_ij / δ`.
pub fn raam_cost(params: &RaamParams, supply: &[f64]) -> Result<Array2<f64>, BaselineError> {
    let (_, k) = params.od_demand.dim();
    if supply.len() != k {
        return Err(BaselineError::Dimension(format!("{} supplies for {k} facilities", supply.len())));
    }
    let load = params.od_demand.sum_axis(Axis(0));
    let mut congestion = vec![0.0; k];
    for j in 0..k {
        if load[j] > 0.0 {
            if !(supply[j] > 0.0) {
                return Err(BaselineError::ZeroSupply(j));
            }
            congestion[j] = load[j] / supply[j] / params.rho;
        }
    }
    let mut cost = params.travel_time.mapv(|t| t / params.delta);
    for mut row in cost.axis_iter_mut(Axis(0)) {
        for (c, &g) in row.iter_mut().zip(&congestion) {
            *c += g;
        }
    }
    Ok(cost)
}

/// Lowest-cost facility per cell. Ties go to the lowest facility index;
/// non-finite costs are treated as unavailable.
pub fn raam_assign(cost: &Array2<f64>) -> Result<Vec<usize>, BaselineError> {
    cost.axis_iter(Axis(0))
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .filter(|(_, c)| c.is_finite())
                .fold(None, |best: Option<(usize, f64)>, (j, &c)| match best {
                    Some((_, b)) if b <= c => best,
                    _ => Some((j, c)),
                })
                .map(|(j, _)| j)
                .ok_or(BaselineError::NoFiniteCost(i))
        })
        .collect()
}
