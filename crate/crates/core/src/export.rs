//! CSV and GeoJSON writers for AR matrices, shock reports and differential
//! reports.
//!
//! GeoJSON uses WGS84 longitude/latitude when every cell and site is
//! georeferenced and planar kilometres otherwise; the collection's
//! `coordinates` member says which.

use crate::ar::ArMatrix;
use crate::impact::{ScenarioReport, ShockReport};
use crate::ingest::snapshot::format_ts;
use crate::spatial::{FacilitySite, Grid, LocalProjection, Location, PlanarPoint};
use crate::stats::{Correction, DifferentialReport};
use geojson::{Feature, FeatureCollection, Geometry, JsonObject, Value};
use serde_json::json;
use std::collections::HashMap;
use std::io::Write;

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("matrix is {rows}×{cols} but there are {cells} cells and {sites} sites")]
    Dimension {
        rows: usize,
        cols: usize,
        cells: usize,
        sites: usize,
    },
}

fn check_dims(m: &ArMatrix, grid: &Grid, sites: &[FacilitySite]) -> Result<(), ExportError> {
    let (rows, cols) = m.shape();
    if rows != grid.len() || cols != sites.len() {
        return Err(ExportError::Dimension {
            rows,
            cols,
            cells: grid.len(),
            sites: sites.len(),
        });
    }
    Ok(())
}

fn num(x: f64) -> String {
    x.to_string()
}

/// `cell_id` column followed by one column per site.
pub fn write_ar_csv<W: Write>(w: W, m: &ArMatrix, grid: &Grid, sites: &[FacilitySite]) -> Result<(), ExportError> {
    check_dims(m, grid, sites)?;
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["cell_id".to_string()];
    header.extend(sites.iter().map(|s| s.site_id.0.clone()));
    out.write_record(&header)?;
    for (cell, row) in grid.cells().iter().zip(m.entries().rows()) {
        let mut rec = vec![cell.cell_id.0.clone()];
        rec.extend(row.iter().map(|&x| num(x)));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// One column per method, e.g. AR accessibility next to gravity and 2SFCA.
pub fn write_comparison_csv<W: Write>(w: W, grid: &Grid, columns: &[(&str, &[f64])]) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["cell_id"];
    header.extend(columns.iter().map(|(name, _)| *name));
    out.write_record(&header)?;
    for (i, cell) in grid.cells().iter().enumerate() {
        let mut rec = vec![cell.cell_id.0.clone()];
        rec.extend(columns.iter().map(|(_, v)| num(v[i])));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_shock_csv<W: Write>(w: W, report: &ShockReport) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cell_id", "A", "A_hat", "worst_site", "impact"])?;
    for r in &report.records {
        out.write_record([
            r.cell_id.0.as_str(),
            &num(r.accessibility),
            &num(r.min_accessibility),
            &r.worst_site.0,
            &num(r.impact),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Points for an `A` against `Â` scatter plot, with the fitted line.
pub fn write_scatter_csv<W: Write>(w: W, report: &ShockReport) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["cell_id", "A", "A_hat", "fitted"])?;
    for r in &report.records {
        out.write_record([r.cell_id.0.as_str(), &num(r.accessibility), &num(r.min_accessibility), &num(r.fitted)])?;
    }
    out.flush()?;
    Ok(())
}

const REPORT_COLUMNS: [(Correction, &str, &str); 5] = [
    (Correction::None, "p", "rej_none"),
    (Correction::Bonferroni, "p_bonf", "rej_bonf"),
    (Correction::Holm, "p_holm", "rej_holm"),
    (Correction::Hochberg, "p_hochberg", "rej_hochberg"),
    (Correction::Bh, "p_bh", "rej_bh"),
];

pub fn write_differential_csv<W: Write>(w: W, report: &DifferentialReport) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["cell_id", "t", "df"];
    header.extend(REPORT_COLUMNS.iter().map(|c| c.1));
    header.extend(REPORT_COLUMNS.iter().map(|c| c.2));
    out.write_record(&header)?;
    for c in &report.cells {
        let mut rec = vec![c.cell_id.0.clone(), num(c.t), num(c.df)];
        rec.extend(REPORT_COLUMNS.iter().map(|(m, _, _)| num(c.p_adjusted[m])));
        rec.extend(REPORT_COLUMNS.iter().map(|(m, _, _)| u8::from(c.reject[m]).to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coords {
    Wgs84,
    PlanarKm,
}

impl Coords {
    fn pick(grid: &Grid, sites: &[FacilitySite]) -> Self {
        let all_geo = grid.cells().iter().all(|c| c.centroid.geo.is_some()) && sites.iter().all(|s| s.location.geo.is_some());
        if all_geo {
            Coords::Wgs84
        } else {
            Coords::PlanarKm
        }
    }

    fn name(self) -> &'static str {
        match self {
            Coords::Wgs84 => "wgs84",
            Coords::PlanarKm => "planar_km",
        }
    }

    fn point(self, loc: &Location) -> Vec<f64> {
        match (self, loc.geo) {
            (Coords::Wgs84, Some(g)) => vec![g.lon, g.lat],
            _ => vec![loc.planar.x_km, loc.planar.y_km],
        }
    }

    /// Closed counter-clockwise square ring around a cell centroid.
    fn square(self, loc: &Location, side_km: f64) -> Vec<Vec<f64>> {
        let h = side_km / 2.0;
        let offsets = [(-h, -h), (h, -h), (h, h), (-h, h), (-h, -h)];
        match (self, loc.geo) {
            (Coords::Wgs84, Some(g)) => {
                let proj = LocalProjection::new(g);
                offsets
                    .iter()
                    .map(|&(dx, dy)| {
                        let p = proj.inverse(PlanarPoint::new(dx, dy));
                        vec![p.lon, p.lat]
                    })
                    .collect()
            }
            _ => offsets
                .iter()
                .map(|&(dx, dy)| vec![loc.planar.x_km + dx, loc.planar.y_km + dy])
                .collect(),
        }
    }
}

fn feature(value: Value, props: serde_json::Value) -> Feature {
    let properties = match props {
        serde_json::Value::Object(m) => Some(m),
        _ => None,
    };
    Feature {
        bbox: None,
        geometry: Some(Geometry::new(value)),
        id: None,
        properties,
        foreign_members: None,
    }
}

fn collection(features: Vec<Feature>, coords: Coords, mut meta: JsonObject) -> FeatureCollection {
    meta.insert("coordinates".into(), json!(coords.name()));
    FeatureCollection {
        bbox: None,
        features,
        foreign_members: Some(meta),
    }
}

/// Cells as polygons and sites as points, each tagged with `kind`.
fn base_features(
    grid: &Grid,
    sites: &[FacilitySite],
    coords: Coords,
    mut cell_props: impl FnMut(usize) -> serde_json::Value,
    mut site_props: impl FnMut(usize) -> serde_json::Value,
) -> Vec<Feature> {
    let mut out = Vec::with_capacity(grid.len() + sites.len());
    for (i, c) in grid.cells().iter().enumerate() {
        let mut props = json!({
            "kind": "cell",
            "cell_id": c.cell_id,
            "population": c.population,
        });
        merge(&mut props, cell_props(i));
        out.push(feature(Value::Polygon(vec![coords.square(&c.centroid, grid.cell_size_km())]), props));
    }
    for (j, s) in sites.iter().enumerate() {
        let mut props = json!({
            "kind": "site",
            "site_id": s.site_id,
            "label": s.label,
        });
        merge(&mut props, site_props(j));
        out.push(feature(Value::Point(coords.point(&s.location)), props));
    }
    out
}

fn merge(into: &mut serde_json::Value, from: serde_json::Value) {
    if let (Some(a), serde_json::Value::Object(b)) = (into.as_object_mut(), from) {
        a.extend(b);
    }
}

fn ar_meta(m: &ArMatrix) -> JsonObject {
    let mut meta = JsonObject::new();
    meta.insert("gamma".into(), json!(m.gamma));
    meta.insert("tau_km".into(), json!(m.tau_km));
    meta.insert("timestamp".into(), json!(m.timestamp.as_ref().map(format_ts)));
    meta.insert("standardized".into(), json!(m.standardized));
    meta.insert("extpop_mode".into(), json!(m.extpop_mode));
    meta
}

/// Cells and sites without any accessibility values.
pub fn grid_geojson(grid: &Grid, sites: &[FacilitySite]) -> FeatureCollection {
    let coords = Coords::pick(grid, sites);
    let features = base_features(grid, sites, coords, |_| json!({}), |_| json!({}));
    let mut meta = JsonObject::new();
    meta.insert("cell_size_km".into(), json!(grid.cell_size_km()));
    collection(features, coords, meta)
}

/// Cells carry `accessibility`, sites carry `reachability` (and `supply` when given).
pub fn ar_geojson(
    grid: &Grid,
    sites: &[FacilitySite],
    m: &ArMatrix,
    supply: Option<&[f64]>,
) -> Result<FeatureCollection, ExportError> {
    check_dims(m, grid, sites)?;
    let coords = Coords::pick(grid, sites);
    let a = m.accessibility();
    let r = m.reachability();
    let features = base_features(
        grid,
        sites,
        coords,
        |i| json!({ "accessibility": a[i] }),
        |j| match supply {
            Some(s) => json!({ "reachability": r[j], "supply": s[j] }),
            None => json!({ "reachability": r[j] }),
        },
    );
    Ok(collection(features, coords, ar_meta(m)))
}

pub fn shock_geojson(grid: &Grid, sites: &[FacilitySite], m: &ArMatrix, report: &ShockReport) -> FeatureCollection {
    let coords = Coords::pick(grid, sites);
    let features = base_features(
        grid,
        sites,
        coords,
        |i| {
            let r = &report.records[i];
            json!({
                "A": r.accessibility,
                "A_hat": r.min_accessibility,
                "worst_site": r.worst_site,
                "impact": r.impact,
            })
        },
        |_| json!({}),
    );
    let mut meta = ar_meta(m);
    meta.insert("alpha".into(), json!(report.alpha));
    meta.insert("beta".into(), json!(report.beta));
    meta.insert("r_squared".into(), json!(report.r_squared));
    collection(features, coords, meta)
}

pub fn scenario_geojson(grid: &Grid, sites: &[FacilitySite], m: &ArMatrix, report: &ScenarioReport) -> FeatureCollection {
    let coords = Coords::pick(grid, sites);
    let features = base_features(
        grid,
        sites,
        coords,
        |i| {
            let c = &report.cells[i];
            json!({ "pre": c.pre, "post": c.post, "impact": c.impact })
        },
        |j| json!({ "saturated": report.saturated_sites.contains(&sites[j].site_id) }),
    );
    collection(features, coords, ar_meta(m))
}

/// Every cell, flagged per correction; untested cells carry `tested: false`.
pub fn differential_geojson(grid: &Grid, sites: &[FacilitySite], report: &DifferentialReport) -> FeatureCollection {
    let coords = Coords::pick(grid, sites);
    let by_cell: HashMap<_, _> = report.cells.iter().map(|c| (&c.cell_id, c)).collect();
    let features = base_features(
        grid,
        sites,
        coords,
        |i| match by_cell.get(&grid.cells()[i].cell_id) {
            Some(c) => {
                let mut props = json!({ "tested": true, "t": c.t, "df": c.df });
                for (m, p_col, rej_col) in REPORT_COLUMNS {
                    merge(&mut props, json!({ p_col: c.p_adjusted[&m], rej_col: c.reject[&m] }));
                }
                props
            }
            None => json!({ "tested": false }),
        },
        |_| json!({}),
    );
    let mut meta = JsonObject::new();
    meta.insert("alpha".into(), json!(report.alpha));
    meta.insert("variant".into(), json!(report.variant));
    meta.insert("tail".into(), json!(report.tail));
    meta.insert("m".into(), json!(report.m));
    collection(features, coords, meta)
}
