//! Brute-force reference computations and random instance generators shared
//! by the integration and acceptance tests. Everything here is written from
//! the definitions with plain loops and deliberately avoids library helpers.

#![allow(dead_code)]

use argrid_core::ar::ExtPopMode;
use argrid_core::spatial::{build_grid, BoundingBox, CellId, FacilitySite, Grid, Location};
use argrid_core::stats::SamplePair;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub const EPS_KM: f64 = 0.001;

#[derive(Debug, Clone)]
pub struct Instance {
    pub grid: Grid,
    pub sites: Vec<FacilitySite>,
    pub supply: Vec<f64>,
    pub gamma: f64,
    pub tau: f64,
}

/// Random lattice with up to `max_l` cells and `1..=max_k` sites; some
/// populations and supplies are zero and some sites sit on cell centroids.
pub fn random_instance<R: Rng>(rng: &mut R, max_l: usize, max_k: usize) -> Instance {
    let side = (max_l as f64).sqrt().floor().max(1.0) as usize;
    let cols = rng.random_range(1..=side);
    let rows = rng.random_range(1..=side);
    let h = rng.random_range(0.5..2.0);
    let pops: Vec<(CellId, f64)> = (0..rows * cols)
        .map(|i| {
            let p = if rng.random_bool(0.15) { 0.0 } else { rng.random_range(1.0..5000.0) };
            (CellId(format!("c{i}")), p)
        })
        .collect();
    let grid = build_grid(BoundingBox::new(0.0, 0.0, cols as f64 * h, rows as f64 * h), h, &pops).unwrap();
    let k = rng.random_range(1..=max_k);
    let sites = (0..k)
        .map(|j| {
            let loc = if rng.random_bool(0.3) {
                grid.cells()[rng.random_range(0..grid.len())].centroid
            } else {
                Location::planar(
                    rng.random_range(-2.0..cols as f64 * h + 2.0),
                    rng.random_range(-2.0..rows as f64 * h + 2.0),
                )
            };
            FacilitySite::new(format!("s{j}"), loc)
        })
        .collect();
    let supply = (0..k)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..50.0) })
        .collect();
    Instance {
        grid,
        sites,
        supply,
        gamma: rng.random_range(-3.0..0.0),
        tau: rng.random_range(1.0..8.0),
    }
}

pub struct OracleAr {
    pub raw: Vec<Vec<f64>>,
    pub standardized: Vec<Vec<f64>>,
    pub a: Vec<f64>,
    pub r: Vec<f64>,
}

fn dist(inst: &Instance, l: usize, k: usize) -> f64 {
    let c = inst.grid.cells()[l].centroid.planar;
    let s = inst.sites[k].location.planar;
    let dx = c.x_km - s.x_km;
    let dy = c.y_km - s.y_km;
    (dx * dx + dy * dy).sqrt()
}

/// Triple-loop AR matrix, standardization and row/column sums of the standardized matrix.
pub fn oracle_ar(inst: &Instance, mode: ExtPopMode) -> OracleAr {
    let l_n = inst.grid.len();
    let k_n = inst.sites.len();
    let p: Vec<f64> = inst.grid.cells().iter().map(|c| c.population).collect();
    let inside = |l: usize, k: usize| dist(inst, l, k) <= inst.tau;
    let decay = |l: usize, k: usize| {
        let d = dist(inst, l, k);
        if d < EPS_KM {
            1.0
        } else {
            d.powf(inst.gamma)
        }
    };
    let mut pool = vec![0.0; k_n];
    for k in 0..k_n {
        for m in 0..l_n {
            if inside(m, k) {
                pool[k] += p[m] * decay(m, k);
            }
        }
    }
    let mut cell_pool = vec![0.0; l_n];
    for l in 0..l_n {
        for k in 0..k_n {
            if inside(l, k) {
                cell_pool[l] += pool[k];
            }
        }
    }
    let mut raw = vec![vec![0.0; k_n]; l_n];
    for l in 0..l_n {
        for k in 0..k_n {
            let demand = match mode {
                ExtPopMode::FacilityPool => pool[k],
                ExtPopMode::CellAggregated => cell_pool[l],
            };
            if inside(l, k) && demand > 0.0 {
                raw[l][k] = inst.supply[k] / demand * decay(l, k);
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in &raw {
        for &x in row {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    let standardized: Vec<Vec<f64>> = raw
        .iter()
        .map(|row| row.iter().map(|&x| if hi > lo { (x - lo) / (hi - lo) } else { 0.0 }).collect())
        .collect();
    let mut a = vec![0.0; l_n];
    let mut r = vec![0.0; k_n];
    for l in 0..l_n {
        for k in 0..k_n {
            a[l] += standardized[l][k];
            r[k] += standardized[l][k];
        }
    }
    OracleAr { raw, standardized, a, r }
}

/// Row sums after zeroing each column in turn; returns (min over shocks, first argmin).
pub fn oracle_shock_enumeration(m: &[Vec<f64>]) -> (Vec<f64>, Vec<usize>) {
    let k_n = m.first().map_or(0, |r| r.len());
    let mut best = Vec::with_capacity(m.len());
    let mut arg = Vec::with_capacity(m.len());
    for row in m {
        let mut min = f64::INFINITY;
        let mut at = 0;
        for j in 0..k_n {
            let mut sum = 0.0;
            for (k, &x) in row.iter().enumerate() {
                sum += if k == j { 0.0 } else { x };
            }
            if sum < min {
                min = sum;
                at = j;
            }
        }
        best.push(min);
        arg.push(at);
    }
    (best, arg)
}

/// Intercept and slope from the 2×2 normal equations solved by Cramer's rule.
pub fn oracle_ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        sx += a;
        sy += b;
        sxx += a * a;
        sxy += a * b;
    }
    let det = n * sxx - sx * sx;
    let alpha = (sy * sxx - sx * sxy) / det;
    let beta = (n * sxy - sx * sy) / det;
    (alpha, beta)
}

/// `cells` sample pairs of sizes (4, 10); the first `shifted` get a mean
/// shift in group b drawn from `[0.5, 3]` standard deviations.
pub fn simulated_cells<R: Rng>(rng: &mut R, cells: usize, shifted: usize) -> Vec<SamplePair> {
    let noise = Normal::new(0.0, 1.0).unwrap();
    (0..cells)
        .map(|i| {
            let shift = if i < shifted { rng.random_range(0.5..3.0) } else { 0.0 };
            SamplePair {
                cell_id: CellId(format!("c{i}")),
                group_a: (0..4).map(|_| noise.sample(rng)).collect(),
                group_b: (0..10).map(|_| noise.sample(rng) + shift).collect(),
            }
        })
        .collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}
