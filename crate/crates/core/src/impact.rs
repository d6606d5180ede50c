//! Supply-shock analysis.
//!
//! A shock zeroes one or more columns of an (already standardized) AR matrix.
//! For each cell the worst single-facility shock removes its largest entry, so
//! `Â_l = A_l − max_k ar_lk`. Impacts are the OLS residuals of `Â` on `A`.

use crate::ar::{accessibility, ArMatrix};
use crate::spatial::{CellId, FacilitySite, Grid, SiteId};
use ndarray::Axis;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ImpactError {
    #[error("unknown site index {index} (matrix has {sites} sites)")]
    UnknownSite { index: usize, sites: usize },
    #[error("unknown site `{0}`")]
    UnknownSiteId(String),
    #[error("shock scenario must saturate at least one site")]
    EmptyScenario,
    #[error("regression needs at least two points, got {0}")]
    TooFewPoints(usize),
    #[error("regressor is constant; slope is not identified")]
    ConstantRegressor,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("matrix has {matrix} rows/columns but the grid/site list has {expected}")]
    Dimension { matrix: usize, expected: usize },
}

/// A set of saturated facilities, by column index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShockScenario {
    saturated: BTreeSet<usize>,
}

impl ShockScenario {
    pub fn new(indices: impl IntoIterator<Item = usize>, sites: usize) -> Result<Self, ImpactError> {
        let saturated: BTreeSet<usize> = indices.into_iter().collect();
        if saturated.is_empty() {
            return Err(ImpactError::EmptyScenario);
        }
        if let Some(&index) = saturated.iter().find(|&&i| i >= sites) {
            return Err(ImpactError::UnknownSite { index, sites });
        }
        Ok(Self { saturated })
    }

    pub fn from_ids(ids: &[SiteId], sites: &[FacilitySite]) -> Result<Self, ImpactError> {
        if ids.is_empty() {
            return Err(ImpactError::EmptyScenario);
        }
        let indices = ids
            .iter()
            .map(|id| {
                sites
                    .iter()
                    .position(|s| &s.site_id == id)
                    .ok_or_else(|| ImpactError::UnknownSiteId(id.0.clone()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(indices, sites.len())
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.saturated.iter().copied()
    }
}

/// Zeroes column `site`; every other entry and the parameterization are kept.
pub fn shocked_ar(m: &ArMatrix, site: usize) -> Result<ArMatrix, ImpactError> {
    let sites = m.shape().1;
    if site >= sites {
        return Err(ImpactError::UnknownSite { index: site, sites });
    }
    let mut entries = m.entries().clone();
    entries.column_mut(site).fill(0.0);
    Ok(m.with_entries(entries))
}

pub fn apply_scenario(m: &ArMatrix, scenario: &ShockScenario) -> Result<ArMatrix, ImpactError> {
    let sites = m.shape().1;
    let mut entries = m.entries().clone();
    for j in scenario.indices() {
        if j >= sites {
            return Err(ImpactError::UnknownSite { index: j, sites });
        }
        entries.column_mut(j).fill(0.0);
    }
    Ok(m.with_entries(entries))
}

/// Per-cell accessibility under the worst single-facility shock.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockSweep {
    pub accessibility: Vec<f64>,
    pub min_accessibility: Vec<f64>,
    /// Column whose removal hurts the cell most (its largest entry); lowest index on ties.
    pub worst_site: Vec<usize>,
}

pub fn min_accessibility_under_shock(m: &ArMatrix) -> ShockSweep {
    let access = accessibility(m);
    let mut min_access = Vec::with_capacity(access.len());
    let mut worst = Vec::with_capacity(access.len());
    for row in m.entries().axis_iter(Axis(0)) {
        let (j, max) = row
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bj, bv), (j, &v)| if v > bv { (j, v) } else { (bj, bv) });
        debug_assert!(row.is_empty() || max.is_finite());
        // Σ_{k≠j} summed in column order: bitwise equal to the row sum of the
        // matrix with column j zeroed, and equal to A − max up to rounding.
        let without_worst = row
            .iter()
            .enumerate()
            .fold(0.0, |acc, (k, &v)| if k == j { acc } else { acc + v });
        min_access.push(without_worst);
        worst.push(j);
    }
    ShockSweep {
        accessibility: access,
        min_accessibility: min_access,
        worst_site: worst,
    }
}

/// Simple linear regression `y = α + βx` with residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub alpha: f64,
    pub beta: f64,
    pub residuals: Vec<f64>,
    /// 1 when the response has no variance (the fit is then exact).
    pub r_squared: f64,
}

pub fn ols_fit(x: &[f64], y: &[f64]) -> Result<OlsFit, ImpactError> {
    if x.len() != y.len() {
        return Err(ImpactError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 2 {
        return Err(ImpactError::TooFewPoints(n));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|&xi| (xi - mx) * (xi - mx)).sum();
    if !(sxx > 0.0) {
        return Err(ImpactError::ConstantRegressor);
    }
    let sxy: f64 = x.iter().zip(y).map(|(&xi, &yi)| (xi - mx) * (yi - my)).sum();
    let beta = sxy / sxx;
    let alpha = my - beta * mx;
    // centred form keeps Σr and Σrx at rounding level
    let mut residuals: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| (yi - my) - beta * (xi - mx))
        .collect();
    let mean_r = residuals.iter().sum::<f64>() / nf;
    residuals.iter_mut().for_each(|r| *r -= mean_r);
    let sse: f64 = residuals.iter().map(|r| r * r).sum();
    let sst: f64 = y.iter().map(|&yi| (yi - my) * (yi - my)).sum();
    let r_squared = if sst > 0.0 { 1.0 - sse / sst } else { 1.0 };
    Ok(OlsFit {
        alpha,
        beta,
        residuals,
        r_squared,
    })
}

/// Impact = `Â − α − βA`, the OLS residuals of post-shock on pre-shock accessibility.
pub fn impact_scores(access: &[f64], min_access: &[f64]) -> Result<OlsFit, ImpactError> {
    ols_fit(access, min_access)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockRecord {
    pub cell_id: CellId,
    #[serde(rename = "A")]
    pub accessibility: f64,
    #[serde(rename = "A_hat")]
    pub min_accessibility: f64,
    pub worst_site: SiteId,
    pub fitted: f64,
    pub impact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockReport {
    pub records: Vec<ShockRecord>,
    pub alpha: f64,
    pub beta: f64,
    pub r_squared: f64,
}

/// Full single-facility sweep for every cell, with impact residuals.
pub fn shock_report(m: &ArMatrix, grid: &Grid, sites: &[FacilitySite]) -> Result<ShockReport, ImpactError> {
    let (l, k) = m.shape();
    if l != grid.len() {
        return Err(ImpactError::Dimension {
            matrix: l,
            expected: grid.len(),
        });
    }
    if k != sites.len() {
        return Err(ImpactError::Dimension {
            matrix: k,
            expected: sites.len(),
        });
    }
    let sweep = min_accessibility_under_shock(m);
    let fit = impact_scores(&sweep.accessibility, &sweep.min_accessibility)?;
    let records = grid
        .cells()
        .iter()
        .enumerate()
        .map(|(i, cell)| ShockRecord {
            cell_id: cell.cell_id.clone(),
            accessibility: sweep.accessibility[i],
            min_accessibility: sweep.min_accessibility[i],
            worst_site: sites[sweep.worst_site[i]].site_id.clone(),
            fitted: sweep.min_accessibility[i] - fit.residuals[i],
            impact: fit.residuals[i],
        })
        .collect();
    Ok(ShockReport {
        records,
        alpha: fit.alpha,
        beta: fit.beta,
        r_squared: fit.r_squared,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCell {
    pub cell_id: CellId,
    pub pre: f64,
    pub post: f64,
    /// Residual of `post` regressed on `pre`; absent when `pre` is constant.
    pub impact: Option<f64>,
}

/// Pre/post accessibility for an arbitrary set of saturated facilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub saturated_sites: Vec<SiteId>,
    pub cells: Vec<ScenarioCell>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub r_squared: Option<f64>,
}

pub fn scenario_report(
    m: &ArMatrix,
    grid: &Grid,
    sites: &[FacilitySite],
    scenario: &ShockScenario,
) -> Result<ScenarioReport, ImpactError> {
    let (l, k) = m.shape();
    if l != grid.len() {
        return Err(ImpactError::Dimension {
            matrix: l,
            expected: grid.len(),
        });
    }
    if k != sites.len() {
        return Err(ImpactError::Dimension {
            matrix: k,
            expected: sites.len(),
        });
    }
    let pre = accessibility(m);
    let post = accessibility(&apply_scenario(m, scenario)?);
    let fit = match ols_fit(&pre, &post) {
        Ok(f) => Some(f),
        Err(ImpactError::ConstantRegressor | ImpactError::TooFewPoints(_)) => None,
        Err(e) => return Err(e),
    };
    let cells = grid
        .cells()
        .iter()
        .enumerate()
        .map(|(i, cell)| ScenarioCell {
            cell_id: cell.cell_id.clone(),
            pre: pre[i],
            post: post[i],
            impact: fit.as_ref().map(|f| f.residuals[i]),
        })
        .collect();
    Ok(ScenarioReport {
        saturated_sites: scenario.indices().map(|j| sites[j].site_id.clone()).collect(),
        cells,
        alpha: fit.as_ref().map(|f| f.alpha),
        beta: fit.as_ref().map(|f| f.beta),
        r_squared: fit.as_ref().map(|f| f.r_squared),
    })
}
