//! CSV readers/writers for grids and sites.
//!
//! Grid header: `cell_id,lon,lat,x_km,y_km,population`.
//! Sites header: `site_id,label,lon,lat,x_km,y_km`.
//! Geographic columns may be empty; planar columns may be empty when a
//! projection is supplied and lon/lat are present.

use super::{FacilitySite, GeoPoint, Grid, GridCell, LocalProjection, Location, SpatialError};
use super::{CellId, SiteId};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Serialize, Deserialize)]
struct GridRow {
    cell_id: String,
    lon: Option<f64>,
    lat: Option<f64>,
    x_km: Option<f64>,
    y_km: Option<f64>,
    population: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SiteRow {
    site_id: String,
    label: String,
    lon: Option<f64>,
    lat: Option<f64>,
    x_km: Option<f64>,
    y_km: Option<f64>,
}

fn csv_err(e: csv::Error) -> SpatialError {
    SpatialError::Csv(e.to_string())
}

fn resolve_location(
    id: &str,
    lon: Option<f64>,
    lat: Option<f64>,
    x: Option<f64>,
    y: Option<f64>,
    projection: Option<&LocalProjection>,
) -> Result<Location, SpatialError> {
    let geo = match (lat, lon) {
        (Some(lat), Some(lon)) => Some(GeoPoint::new(lat, lon)),
        (None, None) => None,
        _ => return Err(SpatialError::Csv(format!("`{id}`: lon and lat must both be set or both empty"))),
    };
    let planar = match (x, y, geo, projection) {
        (Some(x), Some(y), _, _) => super::PlanarPoint::new(x, y),
        (None, None, Some(g), Some(p)) => p.forward(g),
        _ => {
            return Err(SpatialError::Csv(format!(
                "`{id}`: planar coordinates missing and no projection to derive them"
            )))
        }
    };
    Ok(Location { planar, geo })
}

pub fn read_grid_csv<R: Read>(
    reader: R,
    cell_size_km: f64,
    projection: Option<&LocalProjection>,
) -> Result<Grid, SpatialError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut cells = Vec::new();
    for row in rdr.deserialize::<GridRow>() {
        let row = row.map_err(csv_err)?;
        let centroid = resolve_location(&row.cell_id, row.lon, row.lat, row.x_km, row.y_km, projection)?;
        cells.push(GridCell {
            cell_id: CellId(row.cell_id),
            centroid,
            population: row.population,
        });
    }
    Grid::from_cells(cells, cell_size_km)
}

pub fn read_sites_csv<R: Read>(
    reader: R,
    projection: Option<&LocalProjection>,
) -> Result<Vec<FacilitySite>, SpatialError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut sites = Vec::new();
    for row in rdr.deserialize::<SiteRow>() {
        let row = row.map_err(csv_err)?;
        let location = resolve_location(&row.site_id, row.lon, row.lat, row.x_km, row.y_km, projection)?;
        sites.push(FacilitySite {
            site_id: SiteId(row.site_id),
            label: row.label,
            location,
        });
    }
    super::validate_sites(&sites)?;
    Ok(sites)
}

pub fn write_grid_csv<W: Write>(writer: W, grid: &Grid) -> Result<(), SpatialError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for c in grid.cells() {
        wtr.serialize(GridRow {
            cell_id: c.cell_id.0.clone(),
            lon: c.centroid.geo.map(|g| g.lon),
            lat: c.centroid.geo.map(|g| g.lat),
            x_km: Some(c.centroid.planar.x_km),
            y_km: Some(c.centroid.planar.y_km),
            population: c.population,
        })
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| SpatialError::Csv(e.to_string()))
}

pub fn write_sites_csv<W: Write>(writer: W, sites: &[FacilitySite]) -> Result<(), SpatialError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in sites {
        wtr.serialize(SiteRow {
            site_id: s.site_id.0.clone(),
            label: s.label.clone(),
            lon: s.location.geo.map(|g| g.lon),
            lat: s.location.geo.map(|g| g.lat),
            x_km: Some(s.location.planar.x_km),
            y_km: Some(s.location.planar.y_km),
        })
        .map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| SpatialError::Csv(e.to_string()))
}
