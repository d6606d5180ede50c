//! Snapshot sources and the polling loop that feeds the store.

use super::snapshot::{parse_snapshot, OccupancySnapshot, SnapshotError};
use super::store::{StoreError, StoreWriter};
use super::synthetic::OccupancyModel;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, VecDeque};
use std::io::BufRead;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Duration;

#[derive(Debug, Clone, PartialEq)]
pub enum Batch {
    Snapshots(Vec<OccupancySnapshot>),
    /// The source has nothing more to deliver.
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("transient source failure: {0}")]
    Transient(String),
    #[error("permanent source failure: {0}")]
    Permanent(String),
}

pub trait SnapshotSource: Send {
    fn fetch(&mut self) -> Result<Batch, SourceError>;
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {source}")]
    Parse {
        line: usize,
        #[source]
        source: SnapshotError,
    },
}

/// Replays an NDJSON file. Consecutive records sharing a timestamp form one batch.
#[derive(Debug, Clone)]
pub struct ReplaySource {
    batches: VecDeque<Vec<OccupancySnapshot>>,
}

impl ReplaySource {
    pub fn from_snapshots(snapshots: Vec<OccupancySnapshot>) -> Self {
        let mut batches: VecDeque<Vec<OccupancySnapshot>> = VecDeque::new();
        for s in snapshots {
            match batches.back_mut() {
                Some(b) if b[0].ts == s.ts => b.push(s),
                _ => batches.push_back(vec![s]),
            }
        }
        Self { batches }
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, ReplayError> {
        Ok(Self::from_snapshots(read_ndjson(reader)?))
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self, ReplayError> {
        let path = path.as_ref();
        let f = std::fs::File::open(path).map_err(|source| ReplayError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(std::io::BufReader::new(f))
    }
}

/// Parses NDJSON, skipping blank lines.
pub fn read_ndjson(reader: impl BufRead) -> Result<Vec<OccupancySnapshot>, ReplayError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| ReplayError::Io {
            path: PathBuf::from("<input>"),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_snapshot(&line).map_err(|source| ReplayError::Parse { line: i + 1, source })?);
    }
    Ok(out)
}

impl SnapshotSource for ReplaySource {
    fn fetch(&mut self) -> Result<Batch, SourceError> {
        Ok(self.batches.pop_front().map_or(Batch::Exhausted, Batch::Snapshots))
    }
}

/// Generates batches on a simulated clock: one batch per cadence step in `[start, end)`.
#[derive(Debug, Clone)]
pub struct SyntheticSource {
    model: OccupancyModel,
    next: DateTime<Utc>,
    end: DateTime<Utc>,
    cadence: chrono::Duration,
}

impl SyntheticSource {
    pub fn new(model: OccupancyModel, start: DateTime<Utc>, end: DateTime<Utc>, cadence: chrono::Duration) -> Self {
        assert!(cadence > chrono::Duration::zero(), "cadence must be positive");
        Self {
            model,
            next: start,
            end,
            cadence,
        }
    }
}

impl SnapshotSource for SyntheticSource {
    fn fetch(&mut self) -> Result<Batch, SourceError> {
        if self.next >= self.end {
            return Ok(Batch::Exhausted);
        }
        let batch = self.model.batch(self.next);
        self.next += self.cadence;
        Ok(Batch::Snapshots(batch))
    }
}

/// Polls an HTTP endpoint that answers with NDJSON snapshots.
pub struct HttpSource {
    client: reqwest::blocking::Client,
    url: String,
    headers: BTreeMap<String, String>,
}

impl HttpSource {
    pub fn new(url: impl Into<String>, headers: BTreeMap<String, String>, timeout: Duration) -> Result<Self, SourceError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| SourceError::Permanent(e.to_string()))?;
        Ok(Self {
            client,
            url: url.into(),
            headers,
        })
    }
}

impl SnapshotSource for HttpSource {
    fn fetch(&mut self) -> Result<Batch, SourceError> {
        let mut req = self.client.get(&self.url);
        for (k, v) in &self.headers {
            req = req.header(k, v);
        }
        let resp = req.send().map_err(|e| SourceError::Transient(e.to_string()))?;
        let status = resp.status();
        if status.is_client_error() && status.as_u16() != 408 && status.as_u16() != 429 {
            return Err(SourceError::Permanent(format!("{} returned {status}", self.url)));
        }
        if !status.is_success() {
            return Err(SourceError::Transient(format!("{} returned {status}", self.url)));
        }
        let body = resp.text().map_err(|e| SourceError::Transient(e.to_string()))?;
        read_ndjson(body.as_bytes())
            .map(Batch::Snapshots)
            .map_err(|e| SourceError::Transient(format!("bad payload: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    /// Retries after the first failed attempt of a poll.
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 30_000,
        }
    }
}

impl RetryPolicy {
    /// Exponential backoff before retry number `retry` (0-based).
    pub fn backoff(&self, retry: u32) -> Duration {
        let ms = self.initial_backoff_ms.saturating_mul(1u64 << retry.min(32));
        Duration::from_millis(ms.min(self.max_backoff_ms))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceKind {
    FileReplay {
        path: PathBuf,
    },
    Synthetic {
        model: OccupancyModel,
        start: DateTime<Utc>,
        end: DateTime<Utc>,
    },
    HttpAdapter {
        url: String,
        #[serde(default)]
        headers: BTreeMap<String, String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub source: SourceKind,
    /// Seconds between polls; also the cadence of synthetic batches.
    pub poll_interval_secs: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
}

#[derive(Debug, thiserror::Error)]
pub enum SourceConfigError {
    #[error("poll interval must be positive and finite, got {0}")]
    PollInterval(f64),
    #[error(transparent)]
    Replay(#[from] ReplayError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

impl SourceConfig {
    pub fn validate(&self) -> Result<(), SourceConfigError> {
        if !(self.poll_interval_secs.is_finite() && self.poll_interval_secs > 0.0) {
            return Err(SourceConfigError::PollInterval(self.poll_interval_secs));
        }
        Ok(())
    }

    pub fn interval(&self) -> Duration {
        Duration::from_secs_f64(self.poll_interval_secs)
    }

    /// Live sources wait between polls; replay and synthetic sources run as fast as possible.
    pub fn paced(&self) -> bool {
        matches!(self.source, SourceKind::HttpAdapter { .. })
    }

    pub fn build(&self) -> Result<Box<dyn SnapshotSource>, SourceConfigError> {
        self.validate()?;
        Ok(match &self.source {
            SourceKind::FileReplay { path } => Box::new(ReplaySource::open(path)?),
            SourceKind::Synthetic { model, start, end } => {
                let cadence = chrono::Duration::from_std(self.interval()).map_err(|_| SourceConfigError::PollInterval(self.poll_interval_secs))?;
                Box::new(SyntheticSource::new(model.clone(), *start, *end, cadence))
            }
            SourceKind::HttpAdapter { url, headers } => Box::new(HttpSource::new(
                url.clone(),
                headers.clone(),
                self.interval().max(Duration::from_secs(10)),
            )?),
        })
    }

    pub fn poll_options(&self) -> PollOptions {
        PollOptions {
            interval: self.interval(),
            retry: self.retry,
            paced: self.paced(),
            max_polls: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PollOptions {
    pub interval: Duration,
    pub retry: RetryPolicy,
    pub paced: bool,
    pub max_polls: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PollSummary {
    pub polls: u64,
    pub retries: u64,
    pub appended: usize,
    pub duplicates: usize,
    pub out_of_order: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum PollError {
    #[error("source failed after {attempts} attempt(s): {last}")]
    Source { attempts: u32, last: SourceError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Sleeps up to `d`, waking early if `stop` is raised. Returns false when stopped.
fn sleep_unless_stopped(d: Duration, stop: &AtomicBool) -> bool {
    let slice = Duration::from_millis(50);
    let deadline = std::time::Instant::now() + d;
    loop {
        if stop.load(Ordering::Relaxed) {
            return false;
        }
        let now = std::time::Instant::now();
        if now >= deadline {
            return true;
        }
        std::thread::sleep(slice.min(deadline - now));
    }
}

/// Fetches batches and appends them until the source is exhausted, `stop`
/// is raised, or `max_polls` is reached. Failed fetches are retried with
/// backoff; a permanent failure, or running out of retries, ends the loop
/// with an error.
pub fn poll_and_append(
    source: &mut dyn SnapshotSource,
    store: &mut StoreWriter,
    opts: &PollOptions,
    stop: &AtomicBool,
) -> Result<PollSummary, PollError> {
    let mut summary = PollSummary::default();
    while !stop.load(Ordering::Relaxed) {
        let mut attempt = 0u32;
        let batch = loop {
            match source.fetch() {
                Ok(b) => break b,
                Err(SourceError::Transient(msg)) if attempt < opts.retry.max_retries => {
                    tracing::warn!(attempt = attempt + 1, error = %msg, "fetch failed, retrying");
                    if !sleep_unless_stopped(opts.retry.backoff(attempt), stop) {
                        return Ok(summary);
                    }
                    attempt += 1;
                    summary.retries += 1;
                }
                Err(last) => {
                    tracing::error!(error = %last, "giving up on source");
                    return Err(PollError::Source {
                        attempts: attempt + 1,
                        last,
                    });
                }
            }
        };
        let Batch::Snapshots(batch) = batch else {
            break;
        };
        let out = store.append(&batch)?;
        tracing::debug!(appended = out.appended, duplicates = out.duplicates, "poll committed");
        summary.polls += 1;
        summary.appended += out.appended;
        summary.duplicates += out.duplicates;
        summary.out_of_order += out.out_of_order;
        if opts.max_polls.is_some_and(|m| summary.polls >= m) {
            break;
        }
        if opts.paced && !sleep_unless_stopped(opts.interval, stop) {
            break;
        }
    }
    Ok(summary)
}
