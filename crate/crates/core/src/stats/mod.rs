//! Per-cell two-sample tests of accessibility differentials with joint
//! multiple-testing adjustment.

mod adjust;
pub mod special;
mod ttest;

pub use adjust::{adjust, Adjusted, Correction};
pub use ttest::{t_test, TTestResult, TTestVariant, Tail};

use crate::spatial::CellId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum StatsError {
    #[error("each group needs at least two observations (got {a} and {b})")]
    TooFewObservations { a: usize, b: usize },
    #[error("non-finite observation")]
    NonFinite,
    #[error("both groups are constant with different means")]
    ZeroVariance,
    #[error("p-value at index {index} is outside [0, 1]: {value}")]
    PValueOutOfRange { index: usize, value: f64 },
    #[error("alpha must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("no samples to test")]
    NoSamples,
}

/// Two groups of observations for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePair {
    pub cell_id: CellId,
    pub group_a: Vec<f64>,
    pub group_b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTest {
    pub cell_id: CellId,
    pub t: f64,
    pub df: f64,
    pub p: f64,
    pub mean_a: f64,
    pub mean_b: f64,
    /// Adjusted p-value per correction, keyed by correction id.
    pub p_adjusted: BTreeMap<Correction, f64>,
    pub reject: BTreeMap<Correction, bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub cell_id: CellId,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifferentialReport {
    pub variant: TTestVariant,
    pub tail: Tail,
    pub alpha: f64,
    /// Number of tests entering the adjustment.
    pub m: usize,
    pub cells: Vec<CellTest>,
    pub skipped: Vec<SkippedCell>,
    pub rejections: BTreeMap<Correction, usize>,
}

impl DifferentialReport {
    pub fn rejection_count(&self, method: Correction) -> usize {
        self.rejections.get(&method).copied().unwrap_or(0)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Tests every cell, then adjusts the collected p-values jointly for each
/// correction. Cells that fail the test's preconditions are listed as
/// skipped and do not count towards `m`.
pub fn differential_report(
    samples: &[SamplePair],
    variant: TTestVariant,
    tail: Tail,
    alpha: f64,
) -> Result<DifferentialReport, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::NoSamples);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(StatsError::InvalidAlpha(alpha));
    }
    let mut cells = Vec::with_capacity(samples.len());
    let mut skipped = Vec::new();
    for pair in samples {
        match t_test(&pair.group_a, &pair.group_b, variant, tail) {
            Ok(r) => cells.push(CellTest {
                cell_id: pair.cell_id.clone(),
                t: r.t,
                df: r.df,
                p: r.p,
                mean_a: mean(&pair.group_a),
                mean_b: mean(&pair.group_b),
                p_adjusted: BTreeMap::new(),
                reject: BTreeMap::new(),
            }),
            Err(e) => skipped.push(SkippedCell {
                cell_id: pair.cell_id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let raw: Vec<f64> = cells.iter().map(|c| c.p).collect();
    let mut rejections = BTreeMap::new();
    for method in Correction::ALL {
        let adj = adjust(&raw, method, alpha)?;
        rejections.insert(method, adj.rejections());
        for ((cell, p), r) in cells.iter_mut().zip(adj.p_adjusted).zip(adj.reject) {
            cell.p_adjusted.insert(method, p);
            cell.reject.insert(method, r);
        }
    }
    Ok(DifferentialReport {
        variant,
        tail,
        alpha,
        m: cells.len(),
        cells,
        skipped,
        rejections,
    })
}

/// Pearson correlation coefficient; `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx > 0.0 && syy > 0.0 {
        Some(sxy / (sxx * syy).sqrt())
    } else {
        None
    }
}
