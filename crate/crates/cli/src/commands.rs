//! Batch commands. Each writes its artifacts into an output directory and
//! returns a short JSON summary for stdout.

use crate::config::{AtArgs, ImpactArgs, IngestArgs, RunConfig, SynthArgs, TestArgs};
use crate::error::{CliError, Result};
use crate::project;
use argrid_core::ar::ArMatrix;
use argrid_core::baselines::{
    gravity_accessibility, raam_assign, raam_cost, two_step_fca, uniform_od_split, DecayFunction, RaamParams,
};
use argrid_core::engine::{ArSummary, DifferentialRequest, Engine, Supply};
use argrid_core::export::{
    ar_geojson, differential_geojson, scenario_geojson, shock_geojson, write_ar_csv, write_comparison_csv,
    write_differential_csv, write_scatter_csv, write_shock_csv,
};
use argrid_core::impact::{scenario_report, shock_report, ShockScenario};
use argrid_core::ingest::{poll_and_append, SourceConfig, SourceKind, StoreWriter};
use argrid_core::spatial::{distance_matrix, write_grid_csv, write_sites_csv, SiteId};
use argrid_core::stats::pearson;
use argrid_core::synth::{radial_city, RadialCityParams};
use chrono::{DateTime, Duration, Utc};
use serde::Serialize;
use serde_json::{json, Value};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;

/// Average travel speed used to turn distances into RAAM travel times.
pub const RAAM_SPEED_KMH: f64 = 30.0;
pub const RAAM_RHO: f64 = 1.0;
pub const RAAM_DELTA_MIN: f64 = 30.0;

struct OutDir(PathBuf);

impl OutDir {
    fn create(path: &Path) -> Result<Self> {
        fs::create_dir_all(path).map_err(|e| CliError::io(path, e))?;
        Ok(Self(path.to_path_buf()))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| CliError::io(&p, e))?;
        Ok(p)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(CliError::data)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    fn csv(&self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> std::result::Result<(), argrid_core::export::ExportError>) -> Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf).map_err(CliError::data)?;
        self.write(name, &buf)
    }
}

/// Parameterization recorded next to every artifact.
pub fn params_json(run: &RunConfig, at: Option<DateTime<Utc>>) -> Value {
    json!({
        "gamma": run.gamma,
        "tau_km": run.tau_km,
        "timestamp": at,
        "extpop_mode": run.extpop,
        "metric": run.metric.id(),
        "timezone": run.timezone.name(),
        "triage": run.triage,
        "include_waiting": run.include_waiting,
    })
}

pub fn supply_json(engine: &Engine, supply: &Supply) -> Value {
    let rows: Vec<Value> = engine
        .sites()
        .iter()
        .enumerate()
        .map(|(j, s)| {
            json!({
                "site_id": s.site_id,
                "capacity": supply.capacity[j],
                "load": supply.load[j],
                "supply": supply.values[j],
                "observed_at": supply.observed_at[j],
            })
        })
        .collect();
    Value::Array(rows)
}

fn evaluate(engine: &Engine, at: DateTime<Utc>) -> Result<(Supply, ArMatrix)> {
    let supply = engine.supply_at(at)?;
    let m = engine.ar_for_supply(&supply)?;
    Ok((supply, m))
}

pub fn compute(args: &AtArgs) -> Result<Value> {
    let (engine, _) = project::load(&args.run)?;
    let at = project::resolve_at(&engine, args.at)?;
    let (supply, m) = evaluate(&engine, at)?;
    let out = OutDir::create(&args.out)?;
    out.csv("ar_matrix.csv", |w| write_ar_csv(w, &m, engine.grid(), engine.sites()))?;
    let fc = ar_geojson(engine.grid(), engine.sites(), &m, Some(&supply.values)).map_err(CliError::data)?;
    out.write("ar.geojson", fc.to_string().as_bytes())?;
    let summary = json!({
        "params": params_json(&args.run, Some(at)),
        "cells": engine.grid().len(),
        "sites": engine.sites().len(),
        "summary": ArSummary::of(&m),
        "supply": supply_json(&engine, &supply),
    });
    out.json("summary.json", &summary)?;
    Ok(json!({ "at": at, "out": args.out, "summary": ArSummary::of(&m) }))
}

pub fn impact(args: &ImpactArgs) -> Result<Value> {
    let run = &args.at.run;
    let (engine, _) = project::load(run)?;
    let at = project::resolve_at(&engine, args.at.at)?;
    let (_, m) = evaluate(&engine, at)?;
    let report = shock_report(&m, engine.grid(), engine.sites()).map_err(CliError::data)?;
    let out = OutDir::create(&args.at.out)?;
    out.csv("shock.csv", |w| write_shock_csv(w, &report))?;
    out.csv("scatter.csv", |w| write_scatter_csv(w, &report))?;
    out.write("impact.geojson", shock_geojson(engine.grid(), engine.sites(), &m, &report).to_string().as_bytes())?;
    let mut worst: Vec<_> = report.records.iter().collect();
    worst.sort_by(|a, b| a.impact.total_cmp(&b.impact).then_with(|| a.cell_id.cmp(&b.cell_id)));
    let summary = json!({
        "params": params_json(run, Some(at)),
        "alpha": report.alpha,
        "beta": report.beta,
        "r_squared": report.r_squared,
        "most_affected": worst.iter().take(10).map(|r| json!({
            "cell_id": r.cell_id, "impact": r.impact, "worst_site": r.worst_site,
        })).collect::<Vec<_>>(),
    });
    out.json("impact.json", &summary)?;
    let mut result = json!({ "at": at, "out": args.at.out, "r_squared": report.r_squared });
    if !args.saturate.is_empty() {
        let ids: Vec<SiteId> = args.saturate.iter().map(|s| SiteId(s.trim().to_owned())).collect();
        let scenario = ShockScenario::from_ids(&ids, engine.sites()).map_err(CliError::config)?;
        let sr = scenario_report(&m, engine.grid(), engine.sites(), &scenario).map_err(CliError::data)?;
        out.write("scenario.geojson", scenario_geojson(engine.grid(), engine.sites(), &m, &sr).to_string().as_bytes())?;
        out.json("scenario.json", &json!({ "params": params_json(run, Some(at)), "report": sr }))?;
        result["saturated_sites"] = json!(sr.saturated_sites);
    }
    Ok(result)
}

pub fn test(args: &TestArgs) -> Result<Value> {
    let (engine, _) = project::load(&args.run)?;
    let req = DifferentialRequest {
        from: args.from,
        to: args.to,
        slot: args.slot,
        variant: args.variant,
        tail: args.tail,
        alpha: args.run.alpha,
        unit: args.unit,
    };
    let run = engine.differential(&req)?;
    let out = OutDir::create(&args.out)?;
    out.csv("differential.csv", |w| write_differential_csv(w, &run.report))?;
    out.write(
        "differential.geojson",
        differential_geojson(engine.grid(), engine.sites(), &run.report).to_string().as_bytes(),
    )?;
    out.json("differential.json", &json!({ "params": params_json(&args.run, None), "run": run }))?;
    Ok(json!({ "out": args.out, "m": run.report.m, "rejections": run.report.rejections }))
}

pub fn compare(args: &AtArgs) -> Result<Value> {
    let (engine, _) = project::load(&args.run)?;
    let at = project::resolve_at(&engine, args.at)?;
    let (supply, m) = evaluate(&engine, at)?;
    let grid = engine.grid();
    let pop = grid.populations();
    let dist = distance_matrix(grid, engine.sites(), args.run.metric).map_err(CliError::config)?;
    let decay = DecayFunction::Power { exponent: args.run.gamma };
    let ar_a = m.accessibility();
    let gravity = gravity_accessibility(&supply.values, &pop, &dist, decay).map_err(CliError::data)?;
    let fca = two_step_fca(&supply.values, &pop, &dist, decay, args.run.tau_km).map_err(CliError::data)?;

    // RAAM over the sites that still have headroom; a full site is unavailable.
    let open: Vec<usize> = (0..supply.values.len()).filter(|&j| supply.values[j] > 0.0).collect();
    if open.is_empty() {
        return Err(CliError::data(format!("every site is saturated at {at}")));
    }
    let sub = dist.select(ndarray::Axis(1), &open);
    let travel = sub.mapv(|d| d / RAAM_SPEED_KMH * 60.0);
    let od = uniform_od_split(&pop, &sub, args.run.tau_km);
    let open_supply: Vec<f64> = open.iter().map(|&j| supply.values[j]).collect();
    let params = RaamParams::new(RAAM_RHO, RAAM_DELTA_MIN, travel, od).map_err(CliError::config)?;
    let cost = raam_cost(&params, &open_supply).map_err(CliError::data)?;
    let choice = raam_assign(&cost).map_err(CliError::data)?;
    let raam: Vec<f64> = choice.iter().enumerate().map(|(i, &j)| cost[(i, j)]).collect();
    let mut assigned = vec![0usize; engine.sites().len()];
    for &j in &choice {
        assigned[open[j]] += 1;
    }

    let out = OutDir::create(&args.out)?;
    let columns: [(&str, &[f64]); 4] = [
        ("ar_accessibility", &ar_a),
        ("gravity", &gravity),
        ("two_step_fca", &fca),
        ("raam_cost", &raam),
    ];
    out.csv("comparison.csv", |w| write_comparison_csv(w, grid, &columns))?;
    let corr = |xs: &[f64]| pearson(&ar_a, xs);
    let summary = json!({
        "params": params_json(&args.run, Some(at)),
        "raam": { "rho": RAAM_RHO, "delta_min": RAAM_DELTA_MIN, "speed_kmh": RAAM_SPEED_KMH },
        "pearson_with_ar": {
            "gravity": corr(&gravity),
            "two_step_fca": corr(&fca),
            "raam_cost": corr(&raam),
        },
        "raam_cells_per_site": engine.sites().iter().zip(&assigned)
            .map(|(s, n)| json!({ "site_id": s.site_id, "cells": n }))
            .collect::<Vec<_>>(),
    });
    out.json("comparison.json", &summary)?;
    Ok(summary["pearson_with_ar"].clone())
}

/// Reads a source configuration; relative replay paths resolve against its directory.
pub fn read_source_config(path: &Path) -> Result<SourceConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut cfg: SourceConfig =
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if let SourceKind::FileReplay { path: p } = &mut cfg.source {
        if p.is_relative() {
            *p = path.parent().unwrap_or(Path::new(".")).join(&*p);
        }
    }
    cfg.validate().map_err(CliError::config)?;
    Ok(cfg)
}

pub fn ingest(args: &IngestArgs, stop: &AtomicBool) -> Result<Value> {
    let cfg = read_source_config(&args.source)?;
    let mut source = cfg.build().map_err(CliError::config)?;
    let mut writer = StoreWriter::open(&args.store).map_err(CliError::data)?;
    let mut opts = cfg.poll_options();
    opts.max_polls = args.max_polls;
    let summary = poll_and_append(source.as_mut(), &mut writer, &opts, stop).map_err(CliError::data)?;
    Ok(json!({ "store": args.store, "records": writer.len(), "poll": summary }))
}

pub fn synth(args: &SynthArgs) -> Result<Value> {
    let city = radial_city(&RadialCityParams {
        seed: args.seed,
        ..RadialCityParams::default()
    })
    .map_err(CliError::config)?;
    let grid = city.grid.georeference(&args.origin);
    let sites: Vec<_> = city
        .sites
        .into_iter()
        .map(|mut s| {
            s.location.geo = Some(args.origin.inverse(s.location.planar));
            s
        })
        .collect();
    if args.cadence_minutes == 0 || args.days == 0 {
        return Err(CliError::config("days and cadence must be positive"));
    }
    let end = args.start + Duration::days(args.days as i64);
    let source = SourceConfig {
        source: SourceKind::Synthetic {
            model: city.occupancy.clone(),
            start: args.start,
            end,
        },
        poll_interval_secs: args.cadence_minutes as f64 * 60.0,
        retry: Default::default(),
    };
    let out = OutDir::create(&args.out)?;
    let mut buf = Vec::new();
    write_grid_csv(&mut buf, &grid).map_err(CliError::data)?;
    out.write("grid.csv", &buf)?;
    buf.clear();
    write_sites_csv(&mut buf, &sites).map_err(CliError::data)?;
    out.write("sites.csv", &buf)?;
    out.json("source.json", &source)?;
    let mut result = json!({ "out": args.out, "cells": grid.len(), "sites": sites.len(), "from": args.start, "to": end });
    if let Some(path) = &args.corpus {
        let corpus = city.occupancy.corpus(args.start, end, Duration::minutes(args.cadence_minutes as i64));
        let mut text = String::with_capacity(corpus.len() * 120);
        for s in &corpus {
            text.push_str(&s.to_ndjson());
            text.push('\n');
        }
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        fs::write(path, text).map_err(|e| CliError::io(path, e))?;
        result["corpus_records"] = json!(corpus.len());
    }
    Ok(result)
}
