//! HTTP service over the engine.
//!
//! Standardized AR matrices are cached per (instant, parameter set, store
//! version) in an LRU; concurrent misses on the same key share one
//! computation. Shock requests only zero columns of a cached matrix.

use crate::commands::supply_json;
use crate::config::{RunConfig, ServeArgs};
use crate::error::CliError;
use crate::project;
use argrid_core::ar::ArMatrix;
use argrid_core::engine::{ArSummary, DifferentialRequest, DifferentialRun, Engine, EngineError, SampleUnit, Supply};
use argrid_core::export::{ar_geojson, grid_geojson};
use argrid_core::impact::{scenario_report, ImpactError, ShockScenario};
use argrid_core::ingest::{StoreReader, TimeSlot};
use argrid_core::spatial::SiteId;
use argrid_core::stats::{Correction, StatsError, Tail, TTestVariant};
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use lru::LruCache;
use serde::Deserialize;
use serde_json::{json, Value};
use std::hash::Hash;
use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use tokio::sync::OnceCell;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::MissingSnapshots { .. } | EngineError::InsufficientData(_) => StatusCode::CONFLICT,
            EngineError::Stats(StatsError::InvalidAlpha(_)) | EngineError::Window(_) => StatusCode::BAD_REQUEST,
            EngineError::Stats(_) => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let message = if status == StatusCode::CONFLICT {
            format!("insufficient data at this time: {e}")
        } else {
            e.to_string()
        };
        Self::new(status, message)
    }
}

impl From<ImpactError> for ApiError {
    fn from(e: ImpactError) -> Self {
        let status = match e {
            ImpactError::EmptyScenario => StatusCode::BAD_REQUEST,
            ImpactError::UnknownSite { .. } | ImpactError::UnknownSiteId(_) => StatusCode::NOT_FOUND,
            ImpactError::TooFewPoints(_) | ImpactError::ConstantRegressor => StatusCode::CONFLICT,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// A single-flight LRU: the first caller of a key computes, the rest await it.
struct FlightCache<K, V> {
    inner: Mutex<LruCache<K, Arc<OnceCell<V>>>>,
}

impl<K: Hash + Eq + Clone, V: Clone> FlightCache<K, V> {
    fn new(capacity: usize) -> Self {
        let cap = NonZeroUsize::new(capacity.max(1)).expect("capacity is positive");
        Self {
            inner: Mutex::new(LruCache::new(cap)),
        }
    }

    async fn get_or_try_init<F, Fut>(&self, key: K, f: F) -> ApiResult<V>
    where
        F: FnOnce() -> Fut,
        Fut: std::future::Future<Output = ApiResult<V>>,
    {
        let cell = {
            let mut cache = self.inner.lock().expect("cache lock poisoned");
            cache.get_or_insert(key.clone(), || Arc::new(OnceCell::new())).clone()
        };
        let result = cell.get_or_try_init(f).await.cloned();
        if result.is_err() {
            // failures are not cached
            let mut cache = self.inner.lock().expect("cache lock poisoned");
            if cache.peek(&key).is_some_and(|c| Arc::ptr_eq(c, &cell) && !c.initialized()) {
                cache.pop(&key);
            }
        }
        result
    }

    fn len(&self) -> usize {
        self.inner.lock().expect("cache lock poisoned").len()
    }
}

/// A cached evaluation at one instant.
pub struct Evaluated {
    pub supply: Supply,
    pub matrix: ArMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct TestKey {
    from: DateTime<Utc>,
    to: DateTime<Utc>,
    slot: Option<String>,
    variant: TTestVariant,
    tail: Tail,
    unit: SampleUnit,
    version: u64,
}

struct Loaded {
    engine: Arc<Engine>,
    version: u64,
}

pub struct AppState {
    run: RunConfig,
    /// Fingerprint of every parameter that affects a matrix.
    params_key: String,
    base: Engine,
    reader: Mutex<StoreReader>,
    loaded: RwLock<Loaded>,
    ar_cache: FlightCache<(i64, String, u64), Arc<Evaluated>>,
    test_cache: FlightCache<TestKey, Arc<DifferentialRun>>,
    ar_computations: Arc<AtomicU64>,
}

impl AppState {
    pub fn new(run: RunConfig, cache_size: usize) -> Result<Self, CliError> {
        let (engine, reader) = project::load(&run)?;
        let version = reader.version();
        let mut base = engine.clone();
        base.load_snapshots(&[]);
        let params_key = serde_json::to_string(&json!({
            "ar": engine.config().ar,
            "load": engine.config().load,
            "tz": run.timezone.name(),
        }))
        .expect("parameters serialize");
        Ok(Self {
            run,
            params_key,
            base,
            reader: Mutex::new(reader),
            loaded: RwLock::new(Loaded {
                engine: Arc::new(engine),
                version,
            }),
            ar_cache: FlightCache::new(cache_size),
            test_cache: FlightCache::new(cache_size.div_ceil(4)),
            ar_computations: Arc::new(AtomicU64::new(0)),
        })
    }

    /// The engine over the store as it is now, reloaded when new batches were committed.
    fn current(&self) -> ApiResult<(Arc<Engine>, u64)> {
        let internal = |e: argrid_core::ingest::StoreError| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string());
        let mut reader = self.reader.lock().expect("reader lock poisoned");
        reader.refresh().map_err(internal)?;
        let version = reader.version();
        {
            let loaded = self.loaded.read().expect("engine lock poisoned");
            if loaded.version == version {
                return Ok((loaded.engine.clone(), version));
            }
        }
        tracing::info!(version, "store changed, reloading snapshots");
        let engine = Arc::new(self.base.clone().with_snapshots(reader.snapshots()));
        *self.loaded.write().expect("engine lock poisoned") = Loaded {
            engine: engine.clone(),
            version,
        };
        Ok((engine, version))
    }

    fn params(&self, at: Option<DateTime<Utc>>) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("gamma".into(), json!(self.run.gamma));
        m.insert("tau_km".into(), json!(self.run.tau_km));
        m.insert("timestamp".into(), json!(at));
        m
    }

    async fn evaluate(&self, at: Option<DateTime<Utc>>) -> ApiResult<(Arc<Engine>, Arc<Evaluated>)> {
        let (engine, version) = self.current()?;
        let at = match at {
            Some(t) => t,
            None => *engine
                .instants()
                .last()
                .ok_or_else(|| ApiError::new(StatusCode::CONFLICT, "insufficient data at this time: the store is empty"))?,
        };
        let key = (
            at.timestamp_nanos_opt().unwrap_or(i64::MAX),
            self.params_key.clone(),
            version,
        );
        let e = engine.clone();
        let counter = self.ar_computations.clone();
        let ev = self
            .ar_cache
            .get_or_try_init(key, || async move {
                tokio::task::spawn_blocking(move || -> ApiResult<Arc<Evaluated>> {
                    counter.fetch_add(1, Ordering::Relaxed);
                    let supply = e.supply_at(at)?;
                    let matrix = e.ar_for_supply(&supply)?;
                    Ok(Arc::new(Evaluated { supply, matrix }))
                })
                .await
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
            })
            .await?;
        Ok((engine, ev))
    }

    pub fn cached_matrices(&self) -> usize {
        self.ar_cache.len()
    }

    /// AR matrices computed so far, cache misses only.
    pub fn ar_computations(&self) -> u64 {
        self.ar_computations.load(Ordering::Relaxed)
    }
}

fn with_params(mut body: Value, params: serde_json::Map<String, Value>) -> Value {
    if let Some(obj) = body.as_object_mut() {
        for (k, v) in params {
            obj.entry(k).or_insert(v);
        }
    }
    body
}

async fn health(State(s): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let (engine, version) = s.current()?;
    let instants = engine.instants();
    let body = json!({
        "status": "ok",
        "store_version": version,
        "cells": engine.grid().len(),
        "sites": engine.sites().len(),
        "first": instants.first(),
        "last": instants.last(),
        "instants": instants.len(),
        "cached_matrices": s.cached_matrices(),
        "ar_computations": s.ar_computations(),
    });
    Ok(Json(with_params(body, s.params(None))))
}

async fn grid(State(s): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    let (engine, _) = s.current()?;
    let fc = serde_json::to_value(grid_geojson(engine.grid(), engine.sites())).expect("geojson serializes");
    Ok(Json(with_params(fc, s.params(None))))
}

#[derive(Debug, Deserialize)]
struct AtQuery {
    at: Option<DateTime<Utc>>,
}

fn query<T>(q: Result<Query<T>, QueryRejection>) -> ApiResult<T> {
    q.map(|Query(v)| v).map_err(|e| ApiError::bad_request(e.body_text()))
}

async fn ar(State(s): State<Arc<AppState>>, q: Result<Query<AtQuery>, QueryRejection>) -> ApiResult<Json<Value>> {
    let q = query(q)?;
    let (engine, ev) = s.evaluate(q.at).await?;
    let fc = ar_geojson(engine.grid(), engine.sites(), &ev.matrix, Some(&ev.supply.values))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let mut body = serde_json::to_value(fc).expect("geojson serializes");
    body["summary"] = json!(ArSummary::of(&ev.matrix));
    body["supply"] = supply_json(&engine, &ev.supply);
    Ok(Json(with_params(body, s.params(Some(ev.supply.at)))))
}

#[derive(Debug, Deserialize)]
struct ShockBody {
    at: Option<DateTime<Utc>>,
    saturated_sites: Vec<String>,
}

async fn shock(State(s): State<Arc<AppState>>, body: Result<Json<ShockBody>, JsonRejection>) -> ApiResult<Json<Value>> {
    let Json(body) = body.map_err(|e| ApiError::bad_request(e.body_text()))?;
    if body.saturated_sites.is_empty() {
        return Err(ImpactError::EmptyScenario.into());
    }
    let (engine, ev) = s.evaluate(body.at).await?;
    let ids: Vec<SiteId> = body.saturated_sites.into_iter().map(SiteId).collect();
    let scenario = ShockScenario::from_ids(&ids, engine.sites())?;
    let report = scenario_report(&ev.matrix, engine.grid(), engine.sites(), &scenario)?;
    let pre_r = ev.matrix.reachability();
    let sites: Vec<Value> = engine
        .sites()
        .iter()
        .zip(&pre_r)
        .map(|(site, &r)| {
            let saturated = report.saturated_sites.contains(&site.site_id);
            json!({
                "site_id": site.site_id,
                "saturated": saturated,
                "reachability_pre": r,
                "reachability_post": if saturated { 0.0 } else { r },
            })
        })
        .collect();
    let mut out = serde_json::to_value(&report).expect("report serializes");
    out["sites"] = Value::Array(sites);
    Ok(Json(with_params(out, s.params(Some(ev.supply.at)))))
}

#[derive(Debug, Deserialize)]
struct TestQuery {
    from: DateTime<Utc>,
    to: DateTime<Utc>,
    slot: Option<String>,
    method: Option<String>,
    variant: Option<String>,
    tail: Option<String>,
    unit: Option<String>,
}

fn parse_opt<T: std::str::FromStr>(v: &Option<String>, default: T, what: &str) -> ApiResult<T>
where
    T::Err: std::fmt::Display,
{
    match v.as_deref() {
        None | Some("") => Ok(default),
        Some(s) => s.parse().map_err(|e| ApiError::bad_request(format!("{what}: {e}"))),
    }
}

async fn test(State(s): State<Arc<AppState>>, q: Result<Query<TestQuery>, QueryRejection>) -> ApiResult<Json<Value>> {
    let q = query(q)?;
    let method: Correction = parse_opt(&q.method, Correction::Bh, "method")?;
    let slot: Option<TimeSlot> = match q.slot.as_deref() {
        None | Some("") => None,
        Some(t) => Some(t.parse().map_err(|e| ApiError::bad_request(format!("slot: {e}")))?),
    };
    let base = DifferentialRequest::weekend_effect(q.from, q.to, slot);
    let req = DifferentialRequest {
        variant: parse_opt(&q.variant, base.variant, "variant")?,
        tail: parse_opt(&q.tail, base.tail, "tail")?,
        unit: parse_opt(&q.unit, base.unit, "unit")?,
        alpha: s.run.alpha,
        ..base
    };
    if req.from > req.to {
        return Err(ApiError::bad_request("`from` is after `to`"));
    }
    let (engine, version) = s.current()?;
    let key = TestKey {
        from: req.from,
        to: req.to,
        slot: slot.map(|t| t.to_string()),
        variant: req.variant,
        tail: req.tail,
        unit: req.unit,
        version,
    };
    let run = s
        .test_cache
        .get_or_try_init(key, || async move {
            tokio::task::spawn_blocking(move || engine.differential(&req).map(Arc::new).map_err(ApiError::from))
                .await
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        })
        .await?;
    let flags: Vec<Value> = run
        .report
        .cells
        .iter()
        .map(|c| json!({ "cell_id": c.cell_id, "reject": c.reject[&method], "p_adjusted": c.p_adjusted[&method] }))
        .collect();
    let mut body = serde_json::to_value(run.as_ref()).expect("run serializes");
    body["method"] = json!(method);
    body["flags"] = Value::Array(flags);
    Ok(Json(with_params(body, s.params(None))))
}

pub fn router(state: Arc<AppState>, ui_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/grid", get(grid))
        .route("/ar", get(ar))
        .route("/shock", post(shock))
        .route("/test", get(test))
        .with_state(state);
    match ui_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(args: &ServeArgs, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> Result<(), CliError> {
    let run = args.run.clone();
    let cache = args.cache_size;
    let state = tokio::task::spawn_blocking(move || AppState::new(run, cache))
        .await
        .map_err(CliError::data)??;
    let app = router(Arc::new(state), args.ui_dir.as_deref());
    let listener = tokio::net::TcpListener::bind(args.bind)
        .await
        .map_err(|e| CliError::config(format!("cannot bind {}: {e}", args.bind)))?;
    tracing::info!(addr = %args.bind, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(CliError::data)
}
