//! Demand lattice, facility sites, distances, and the catchment / decay matrices.
//!
//! Every L×K matrix in the crate uses the grid's cell order for rows and the
//! site slice order for columns.

mod io;
mod matrix;
mod projection;

pub use io::{read_grid_csv, read_sites_csv, write_grid_csv, write_sites_csv};
pub use matrix::{distance_matrix, CatchmentMatrix, DecayMatrix, DEFAULT_COLOCATION_EPSILON_KM};
pub use projection::LocalProjection;

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;

/// Mean Earth radius (IUGG), kilometers.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SpatialError {
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
    #[error("bounding box is degenerate")]
    DegenerateBbox,
    #[error("duplicate cell id `{0}`")]
    DuplicateCell(String),
    #[error("duplicate site id `{0}`")]
    DuplicateSite(String),
    #[error("cell id `{0}` is not part of the lattice")]
    UnknownCell(String),
    #[error("population of cell `{cell}` is invalid: {value}")]
    InvalidPopulation { cell: String, value: f64 },
    #[error("non-finite coordinate")]
    NonFiniteCoordinate,
    #[error("latitude/longitude out of range: ({lat}, {lon})")]
    GeoOutOfRange { lat: f64, lon: f64 },
    #[error("haversine distance requested for a point without geographic coordinates")]
    PlanarOnly,
    #[error("catchment radius must be positive, got {0}")]
    InvalidTau(f64),
    #[error("colocation epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("decay exponent {gamma} yields a non-finite weight at distance {distance} km")]
    NonFiniteDecay { gamma: f64, distance: f64 },
    #[error("grid must contain at least one cell")]
    EmptyGrid,
    #[error("at least one facility site is required")]
    NoSites,
    #[error("{0}")]
    Csv(String),
}

/// Identifier of a demand cell.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(pub String);

/// Identifier of a supply facility.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub String);

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CellId {
    fn from(s: &str) -> Self {
        CellId(s.to_owned())
    }
}

impl From<&str> for SiteId {
    fn from(s: &str) -> Self {
        SiteId(s.to_owned())
    }
}

impl From<String> for CellId {
    fn from(s: String) -> Self {
        CellId(s)
    }
}

impl From<String> for SiteId {
    fn from(s: String) -> Self {
        SiteId(s)
    }
}

/// Point in a local planar projection, kilometers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanarPoint {
    pub x_km: f64,
    pub y_km: f64,
}

impl PlanarPoint {
    pub fn new(x_km: f64, y_km: f64) -> Self {
        Self { x_km, y_km }
    }
}

/// WGS84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Self {
        Self { lat, lon }
    }

    fn validate(&self) -> Result<(), SpatialError> {
        if !self.lat.is_finite() || !self.lon.is_finite() {
            return Err(SpatialError::NonFiniteCoordinate);
        }
        if !(-90.0..=90.0).contains(&self.lat) || !(-180.0..=180.0).contains(&self.lon) {
            return Err(SpatialError::GeoOutOfRange {
                lat: self.lat,
                lon: self.lon,
            });
        }
        Ok(())
    }
}

/// A planar position with optional geographic coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub planar: PlanarPoint,
    pub geo: Option<GeoPoint>,
}

impl Location {
    pub fn planar(x_km: f64, y_km: f64) -> Self {
        Self {
            planar: PlanarPoint::new(x_km, y_km),
            geo: None,
        }
    }

    pub fn with_geo(mut self, lat: f64, lon: f64) -> Self {
        self.geo = Some(GeoPoint::new(lat, lon));
        self
    }

    fn is_finite(&self) -> bool {
        self.planar.x_km.is_finite()
            && self.planar.y_km.is_finite()
            && self.geo.map_or(true, |g| g.lat.is_finite() && g.lon.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMetric {
    #[default]
    ProjectedEuclidean,
    Haversine,
}

impl DistanceMetric {
    pub fn id(&self) -> &'static str {
        match self {
            DistanceMetric::ProjectedEuclidean => "projected_euclidean",
            DistanceMetric::Haversine => "haversine",
        }
    }
}

impl std::str::FromStr for DistanceMetric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "projected_euclidean" | "euclidean" => Ok(DistanceMetric::ProjectedEuclidean),
            "haversine" => Ok(DistanceMetric::Haversine),
            other => Err(format!("unknown distance metric `{other}`")),
        }
    }
}

pub fn euclidean_km(a: PlanarPoint, b: PlanarPoint) -> f64 {
    (a.x_km - b.x_km).hypot(a.y_km - b.y_km)
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_KM`].
pub fn haversine_km(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

/// Distance in kilometers between two locations under `metric`.
pub fn distance(a: &Location, b: &Location, metric: DistanceMetric) -> Result<f64, SpatialError> {
    if !a.is_finite() || !b.is_finite() {
        return Err(SpatialError::NonFiniteCoordinate);
    }
    match metric {
        DistanceMetric::ProjectedEuclidean => Ok(euclidean_km(a.planar, b.planar)),
        DistanceMetric::Haversine => {
            let (ga, gb) = match (a.geo, b.geo) {
                (Some(ga), Some(gb)) => (ga, gb),
                _ => return Err(SpatialError::PlanarOnly),
            };
            ga.validate()?;
            gb.validate()?;
            Ok(haversine_km(ga, gb))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    fn is_valid(&self) -> bool {
        [self.min_x, self.min_y, self.max_x, self.max_y]
            .iter()
            .all(|v| v.is_finite())
            && self.width() > 0.0
            && self.height() > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub cell_id: CellId,
    pub centroid: Location,
    pub population: f64,
}

/// Ordered demand lattice. The cell order is the row order of every L×K matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Grid {
    cells: Vec<GridCell>,
    cell_size_km: f64,
    bbox: BoundingBox,
}

impl Grid {
    /// Wraps an explicit list of cells, e.g. read from CSV.
    pub fn from_cells(cells: Vec<GridCell>, cell_size_km: f64) -> Result<Self, SpatialError> {
        if !(cell_size_km > 0.0 && cell_size_km.is_finite()) {
            return Err(SpatialError::InvalidCellSize(cell_size_km));
        }
        if cells.is_empty() {
            return Err(SpatialError::EmptyGrid);
        }
        let mut seen = HashSet::with_capacity(cells.len());
        for cell in &cells {
            if !seen.insert(&cell.cell_id) {
                return Err(SpatialError::DuplicateCell(cell.cell_id.0.clone()));
            }
            if !cell.centroid.is_finite() {
                return Err(SpatialError::NonFiniteCoordinate);
            }
            if !(cell.population >= 0.0 && cell.population.is_finite()) {
                return Err(SpatialError::InvalidPopulation {
                    cell: cell.cell_id.0.clone(),
                    value: cell.population,
                });
            }
        }
        let half = cell_size_km / 2.0;
        let mut bbox = BoundingBox::new(f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for c in &cells {
            let p = c.centroid.planar;
            bbox.min_x = bbox.min_x.min(p.x_km - half);
            bbox.min_y = bbox.min_y.min(p.y_km - half);
            bbox.max_x = bbox.max_x.max(p.x_km + half);
            bbox.max_y = bbox.max_y.max(p.y_km + half);
        }
        Ok(Self {
            cells,
            cell_size_km,
            bbox,
        })
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cell_size_km(&self) -> f64 {
        self.cell_size_km
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }

    /// Population vector `p` in cell order.
    pub fn populations(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.population).collect()
    }

    pub fn index_of(&self, id: &CellId) -> Option<usize> {
        self.cells.iter().position(|c| &c.cell_id == id)
    }

    /// Fills geographic centroids from the planar ones.
    pub fn georeference(mut self, projection: &LocalProjection) -> Self {
        for cell in &mut self.cells {
            let g = projection.inverse(cell.centroid.planar);
            cell.centroid.geo = Some(g);
        }
        self
    }
}

/// Tiles `bbox` row-major (rows from `min_y` upward, columns from `min_x`)
/// with square cells of side `cell_size_km`. Cell ids are `c{index}`.
///
/// When a bbox side is not a multiple of the cell size the last row/column
/// extends past the box.
pub fn build_grid(
    bbox: BoundingBox,
    cell_size_km: f64,
    populations: &[(CellId, f64)],
) -> Result<Grid, SpatialError> {
    if !(cell_size_km > 0.0 && cell_size_km.is_finite()) {
        return Err(SpatialError::InvalidCellSize(cell_size_km));
    }
    if !bbox.is_valid() {
        return Err(SpatialError::DegenerateBbox);
    }
    let tol = 1e-9;
    let ncols = ((bbox.width() / cell_size_km) - tol).ceil().max(1.0) as usize;
    let nrows = ((bbox.height() / cell_size_km) - tol).ceil().max(1.0) as usize;

    let mut cells = Vec::with_capacity(nrows * ncols);
    for row in 0..nrows {
        for col in 0..ncols {
            let x = bbox.min_x + (col as f64 + 0.5) * cell_size_km;
            let y = bbox.min_y + (row as f64 + 0.5) * cell_size_km;
            cells.push(GridCell {
                cell_id: CellId(format!("c{}", cells.len())),
                centroid: Location::planar(x, y),
                population: 0.0,
            });
        }
    }

    let mut assigned = HashSet::with_capacity(populations.len());
    for (id, count) in populations {
        if !assigned.insert(id) {
            return Err(SpatialError::DuplicateCell(id.0.clone()));
        }
        if !(*count >= 0.0 && count.is_finite()) {
            return Err(SpatialError::InvalidPopulation {
                cell: id.0.clone(),
                value: *count,
            });
        }
        let idx = id
            .0
            .strip_prefix('c')
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|&i| i < cells.len() && cells[i].cell_id == *id)
            .ok_or_else(|| SpatialError::UnknownCell(id.0.clone()))?;
        cells[idx].population = *count;
    }

    let mut grid = Grid::from_cells(cells, cell_size_km)?;
    grid.bbox = BoundingBox::new(
        bbox.min_x,
        bbox.min_y,
        bbox.min_x + ncols as f64 * cell_size_km,
        bbox.min_y + nrows as f64 * cell_size_km,
    );
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilitySite {
    pub site_id: SiteId,
    pub label: String,
    pub location: Location,
}

impl FacilitySite {
    pub fn new(site_id: impl Into<String>, location: Location) -> Self {
        let id = site_id.into();
        Self {
            label: id.clone(),
            site_id: SiteId(id),
            location,
        }
    }
}

/// Checks site-id uniqueness and finite coordinates.
pub fn validate_sites(sites: &[FacilitySite]) -> Result<(), SpatialError> {
    if sites.is_empty() {
        return Err(SpatialError::NoSites);
    }
    let mut seen = HashSet::with_capacity(sites.len());
    for s in sites {
        if !seen.insert(&s.site_id) {
            return Err(SpatialError::DuplicateSite(s.site_id.0.clone()));
        }
        if !s.location.is_finite() {
            return Err(SpatialError::NonFiniteCoordinate);
        }
    }
    Ok(())
}
