//! Loading the grid, sites and store named by a [`RunConfig`] into an engine.

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use argrid_core::engine::Engine;
use argrid_core::ingest::StoreReader;
use argrid_core::spatial::{read_grid_csv, read_sites_csv, FacilitySite, Grid};
use chrono::{DateTime, Utc};
use std::fs::File;
use std::path::Path;

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| CliError::io(path, e))
}

pub fn load_layout(cfg: &RunConfig) -> Result<(Grid, Vec<FacilitySite>)> {
    let grid = read_grid_csv(open(&cfg.grid)?, cfg.cell_size_km, cfg.origin.as_ref())
        .map_err(|e| CliError::config(format!("{}: {e}", cfg.grid.display())))?;
    let sites = read_sites_csv(open(&cfg.sites)?, cfg.origin.as_ref())
        .map_err(|e| CliError::config(format!("{}: {e}", cfg.sites.display())))?;
    Ok((grid, sites))
}

pub fn open_store(cfg: &RunConfig) -> Result<StoreReader> {
    if !cfg.store.is_dir() {
        return Err(CliError::config(format!("store `{}` does not exist", cfg.store.display())));
    }
    StoreReader::open(&cfg.store).map_err(CliError::data)
}

/// Validates parameters by building the engine, then loads every stored snapshot.
pub fn load(cfg: &RunConfig) -> Result<(Engine, StoreReader)> {
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        return Err(CliError::config(format!("alpha must lie in (0, 1), got {}", cfg.alpha)));
    }
    let (grid, sites) = load_layout(cfg)?;
    let reader = open_store(cfg)?;
    let engine = Engine::new(grid, sites, cfg.engine_config())?.with_snapshots(reader.snapshots());
    Ok((engine, reader))
}

/// `at` if given, else the latest instant in the store.
pub fn resolve_at(engine: &Engine, at: Option<DateTime<Utc>>) -> Result<DateTime<Utc>> {
    match at {
        Some(t) => Ok(t),
        None => engine
            .instants()
            .last()
            .copied()
            .ok_or_else(|| CliError::data("the store holds no snapshots")),
    }
}
