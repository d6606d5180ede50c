//! A synthetic radial city: a square lattice whose population peaks at the
//! centre, a dense cluster of large facilities downtown and a sparse ring of
//! smaller ones near the edge.

use crate::ingest::{OccupancyModel, SiteProfile};
use crate::spatial::{build_grid, BoundingBox, CellId, FacilitySite, Grid, Location, SpatialError};
use serde::{Deserialize, Serialize};

/// Cell offsets (columns, rows) from the central cell of the downtown sites.
const CENTRAL_OFFSETS: [(i32, i32); 10] = [
    (0, 0),
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, -1),
    (1, -1),
    (-1, 1),
    (2, 0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialCityParams {
    /// Cells per side; odd so that there is a central cell.
    pub side: usize,
    pub cell_size_km: f64,
    /// Number of ring facilities, evenly spaced in angle.
    pub border_sites: usize,
    /// Ring radius, in cells.
    pub ring_radius: f64,
    pub peak_population: f64,
    pub base_population: f64,
    /// Spread of the population bump, in cells.
    pub population_sigma: f64,
    pub seed: u64,
}

impl Default for RadialCityParams {
    fn default() -> Self {
        Self {
            side: 15,
            cell_size_km: 1.0,
            border_sites: 8,
            ring_radius: 6.0,
            peak_population: 10000.0,
            base_population: 200.0,
            population_sigma: 2.5,
            seed: 2022,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RadialCity {
    pub grid: Grid,
    pub sites: Vec<FacilitySite>,
    pub occupancy: OccupancyModel,
    /// Distance of each cell centroid from the city centre, in cells.
    pub cell_radius: Vec<f64>,
    /// Whether each site belongs to the downtown cluster.
    pub central_site: Vec<bool>,
}

pub fn radial_city(params: &RadialCityParams) -> Result<RadialCity, SpatialError> {
    let n = params.side;
    let h = params.cell_size_km;
    let mid = (n / 2) as i32;
    let radius = |row: usize, col: usize| ((row as f64 - mid as f64).powi(2) + (col as f64 - mid as f64).powi(2)).sqrt();

    let mut populations = Vec::with_capacity(n * n);
    let mut cell_radius = Vec::with_capacity(n * n);
    for row in 0..n {
        for col in 0..n {
            let r = radius(row, col);
            let bump = (-r * r / (2.0 * params.population_sigma.powi(2))).exp();
            let p = (params.base_population + params.peak_population * bump).round();
            populations.push((CellId(format!("c{}", row * n + col)), p));
            cell_radius.push(r);
        }
    }
    let side_km = n as f64 * h;
    let grid = build_grid(BoundingBox::new(0.0, 0.0, side_km, side_km), h, &populations)?;

    let centroid = |col: i32, row: i32| Location::planar((col as f64 + 0.5) * h, (row as f64 + 0.5) * h);
    let mut sites = Vec::new();
    let mut profiles = Vec::new();
    let mut central_site = Vec::new();
    for (i, &(dc, dr)) in CENTRAL_OFFSETS.iter().enumerate() {
        let id = format!("C{:02}", i + 1);
        sites.push(FacilitySite::new(&id, centroid(mid + dc, mid + dr)));
        let mut p = SiteProfile::new(id, 30 + 4 * (i as u32 % 5));
        p.base_occupancy = 0.55;
        p.daily_amplitude = 0.25;
        p.peak_hour = 15.0;
        p.weekend_factor = 1.2;
        profiles.push(p);
        central_site.push(true);
    }
    let max_off = (n as i32 - 1) - mid;
    for i in 0..params.border_sites {
        let theta = 2.0 * std::f64::consts::PI * i as f64 / params.border_sites as f64;
        let dc = ((params.ring_radius * theta.cos()).round() as i32).clamp(-mid, max_off);
        let dr = ((params.ring_radius * theta.sin()).round() as i32).clamp(-mid, max_off);
        let id = format!("B{:02}", i + 1);
        sites.push(FacilitySite::new(&id, centroid(mid + dc, mid + dr)));
        let mut p = SiteProfile::new(id, 14 + 2 * (i as u32 % 4));
        p.base_occupancy = 0.5;
        p.daily_amplitude = 0.05;
        p.peak_hour = 15.0;
        p.weekend_factor = 1.0;
        profiles.push(p);
        central_site.push(false);
    }
    Ok(RadialCity {
        grid,
        sites,
        occupancy: OccupancyModel::new(profiles, params.seed),
        cell_radius,
        central_site,
    })
}
