//! Command-line surface. Every run flag can also be set through an
//! `ARGRID_`-prefixed environment variable (`--tau-km` is `ARGRID_TAU_KM`).

use argrid_core::ar::{ArParams, ExtPopMode};
use argrid_core::engine::{EngineConfig, SampleUnit};
use argrid_core::ingest::{LoadOptions, TimeSlot, TriageSet};
use argrid_core::spatial::{DistanceMetric, LocalProjection, DEFAULT_COLOCATION_EPSILON_KM};
use argrid_core::stats::{Tail, TTestVariant};
use chrono::{DateTime, Utc};
use chrono_tz::Tz;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::net::SocketAddr;
use std::path::PathBuf;

#[derive(Debug, Parser)]
#[command(name = "argrid", version, about = "Accessibility and reachability of facility networks on a population grid")]
pub struct Cli {
    /// Log filter, e.g. `info` or `argrid=debug`.
    #[arg(long, global = true, env = "ARGRID_LOG", default_value = "info")]
    pub log: String,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// AR matrix, accessibility/reachability GeoJSON and summary at one instant.
    Compute(AtArgs),
    /// Single-facility shock sweep and impact residuals at one instant.
    Impact(ImpactArgs),
    /// Per-cell weekend/weekday test with multiple-testing corrections.
    Test(TestArgs),
    /// Poll a snapshot source into the store.
    Ingest(IngestArgs),
    /// HTTP service for the explorer UI.
    Serve(ServeArgs),
    /// Write the synthetic radial-city inputs.
    Synth(SynthArgs),
    /// AR accessibility next to gravity, 2SFCA and RAAM baselines.
    Compare(AtArgs),
}

fn parse_tz(s: &str) -> Result<Tz, String> {
    s.parse::<Tz>().map_err(|e| format!("unknown time zone `{s}`: {e}"))
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunConfig {
    /// Grid CSV: cell_id,lon,lat,x_km,y_km,population.
    #[arg(long, env = "ARGRID_GRID")]
    pub grid: PathBuf,
    /// Sites CSV: site_id,label,lon,lat,x_km,y_km.
    #[arg(long, env = "ARGRID_SITES")]
    pub sites: PathBuf,
    /// Snapshot store directory.
    #[arg(long, env = "ARGRID_STORE")]
    pub store: PathBuf,
    #[arg(long, env = "ARGRID_CELL_SIZE_KM", default_value_t = 1.0)]
    pub cell_size_km: f64,
    /// Projection origin `LAT,LON` for inputs that only carry lon/lat.
    #[arg(long, env = "ARGRID_ORIGIN")]
    #[serde(skip)]
    pub origin: Option<LocalProjection>,
    /// Distance-decay exponent.
    #[arg(long, env = "ARGRID_GAMMA", default_value_t = -2.0, allow_hyphen_values = true)]
    pub gamma: f64,
    /// Catchment radius in km.
    #[arg(long = "tau-km", env = "ARGRID_TAU_KM", default_value_t = 5.0)]
    pub tau_km: f64,
    #[arg(long, env = "ARGRID_EXTPOP", default_value = "facility_pool")]
    pub extpop: ExtPopMode,
    /// `projected_euclidean` or `haversine`, for both catchment and decay.
    #[arg(long, env = "ARGRID_METRIC", default_value = "projected_euclidean")]
    pub metric: DistanceMetric,
    #[arg(long, env = "ARGRID_ALPHA", default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, env = "ARGRID_TIMEZONE", default_value = "Europe/Rome", value_parser = parse_tz)]
    #[serde(serialize_with = "tz_name")]
    pub timezone: Tz,
    /// Triage codes counted as load.
    #[arg(long, env = "ARGRID_TRIAGE", default_value = "white,green,yellow")]
    pub triage: TriageSet,
    /// Count waiting patients as load too.
    #[arg(long, env = "ARGRID_INCLUDE_WAITING")]
    pub include_waiting: bool,
}

fn tz_name<S: serde::Serializer>(tz: &Tz, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(tz.name())
}

impl RunConfig {
    pub fn ar_params(&self) -> ArParams {
        ArParams {
            gamma: self.gamma,
            tau_km: self.tau_km,
            catchment_metric: self.metric,
            decay_metric: self.metric,
            colocation_epsilon_km: DEFAULT_COLOCATION_EPSILON_KM,
            extpop_mode: self.extpop,
            standardize: true,
        }
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            ar: self.ar_params(),
            load: LoadOptions {
                codes: self.triage,
                include_waiting: self.include_waiting,
            },
            timezone: self.timezone,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct AtArgs {
    #[command(flatten)]
    pub run: RunConfig,
    /// Instant to evaluate (RFC 3339); defaults to the latest stored instant.
    #[arg(long, env = "ARGRID_AT")]
    pub at: Option<DateTime<Utc>>,
    #[arg(long, env = "ARGRID_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct ImpactArgs {
    #[command(flatten)]
    pub at: AtArgs,
    /// Also evaluate a multi-site scenario saturating these sites (comma-separated ids).
    #[arg(long, value_delimiter = ',')]
    pub saturate: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub run: RunConfig,
    #[arg(long)]
    pub from: DateTime<Utc>,
    #[arg(long)]
    pub to: DateTime<Utc>,
    /// Local time-of-day slot `HH:MM-HH:MM`.
    #[arg(long)]
    pub slot: Option<TimeSlot>,
    #[arg(long, default_value = "b_greater")]
    pub tail: Tail,
    #[arg(long, default_value = "welch")]
    pub variant: TTestVariant,
    /// `day_mean` or `snapshot`.
    #[arg(long, default_value = "day_mean")]
    pub unit: SampleUnit,
    #[arg(long, env = "ARGRID_OUT")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct IngestArgs {
    /// Source configuration JSON.
    #[arg(long, env = "ARGRID_SOURCE")]
    pub source: PathBuf,
    #[arg(long, env = "ARGRID_STORE")]
    pub store: PathBuf,
    /// Stop after this many successful polls.
    #[arg(long)]
    pub max_polls: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[command(flatten)]
    pub run: RunConfig,
    #[arg(long, env = "ARGRID_BIND", default_value = "127.0.0.1:8080")]
    pub bind: SocketAddr,
    /// Static UI bundle served under `/`.
    #[arg(long, env = "ARGRID_UI_DIR")]
    pub ui_dir: Option<PathBuf>,
    /// Cached AR matrices.
    #[arg(long, env = "ARGRID_CACHE_SIZE", default_value_t = 64)]
    pub cache_size: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, env = "ARGRID_OUT")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 2022)]
    pub seed: u64,
    /// Geographic position of the grid's south-west corner, `LAT,LON`.
    #[arg(long, default_value = "45.39,9.09")]
    pub origin: LocalProjection,
    /// First snapshot instant of the generated source.
    #[arg(long, default_value = "2022-03-06T23:00:00Z")]
    pub start: DateTime<Utc>,
    #[arg(long, default_value_t = 14)]
    pub days: u32,
    #[arg(long, default_value_t = 5)]
    pub cadence_minutes: u32,
    /// Also write the full snapshot series as NDJSON.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}
