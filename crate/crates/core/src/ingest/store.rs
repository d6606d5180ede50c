//! Append-only snapshot store.
//!
//! Records live in NDJSON segment files (`seg-00000000.ndjson`, ...). The
//! sidecar `index.json` lists every segment with its committed record count
//! and byte length, and is replaced atomically after each appended batch.
//! Bytes past the indexed length are uncommitted: readers never look at them
//! and the writer truncates them when it opens the store.

use super::snapshot::{parse_snapshot, OccupancySnapshot, SnapshotError};
use crate::spatial::SiteId;
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

pub const INDEX_FILE: &str = "index.json";
const FORMAT: &str = "argrid-ndjson/1";
pub const DEFAULT_SEGMENT_RECORDS: u64 = 50_000;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: corrupt index: {reason}")]
    CorruptIndex { path: PathBuf, reason: String },
    #[error("{path}:{line}: {source}")]
    CorruptRecord {
        path: PathBuf,
        line: usize,
        #[source]
        source: SnapshotError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Segment {
    file: String,
    records: u64,
    bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Index {
    format: String,
    segments: Vec<Segment>,
}

impl Default for Index {
    fn default() -> Self {
        Self {
            format: FORMAT.into(),
            segments: Vec::new(),
        }
    }
}

fn read_index(dir: &Path) -> Result<Index, StoreError> {
    let path = dir.join(INDEX_FILE);
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Index::default()),
        Err(e) => return Err(io_err(&path)(e)),
    };
    let index: Index = serde_json::from_str(&text).map_err(|e| StoreError::CorruptIndex {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    if index.format != FORMAT {
        return Err(StoreError::CorruptIndex {
            path,
            reason: format!("unsupported format `{}`", index.format),
        });
    }
    Ok(index)
}

fn write_index(dir: &Path, index: &Index) -> Result<(), StoreError> {
    let path = dir.join(INDEX_FILE);
    let tmp = dir.join(format!("{INDEX_FILE}.tmp"));
    let body = serde_json::to_vec_pretty(index).expect("index serialization is infallible");
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(&body).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, &path).map_err(io_err(&path))?;
    Ok(())
}

/// Parses the committed bytes `[from, to)` of a segment.
fn read_range(path: &Path, from: u64, to: u64, first_line: usize) -> Result<Vec<OccupancySnapshot>, StoreError> {
    let mut f = File::open(path).map_err(io_err(path))?;
    f.seek(SeekFrom::Start(from)).map_err(io_err(path))?;
    let mut buf = String::new();
    f.take(to - from).read_to_string(&mut buf).map_err(io_err(path))?;
    if (buf.len() as u64) < to - from {
        return Err(StoreError::CorruptIndex {
            path: path.to_path_buf(),
            reason: format!("segment is shorter than its indexed length {to}"),
        });
    }
    buf.lines()
        .enumerate()
        .map(|(i, line)| {
            parse_snapshot(line).map_err(|source| StoreError::CorruptRecord {
                path: path.to_path_buf(),
                line: first_line + i + 1,
                source,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AppendOutcome {
    pub appended: usize,
    /// Already stored under the same `(site_id, ts)`.
    pub duplicates: usize,
    /// Older than the latest stored snapshot of the same site.
    pub out_of_order: usize,
}

/// The single writer of a store directory.
#[derive(Debug)]
pub struct StoreWriter {
    dir: PathBuf,
    index: Index,
    seen: HashSet<(SiteId, DateTime<Utc>)>,
    latest: HashMap<SiteId, DateTime<Utc>>,
    segment_records: u64,
}

impl StoreWriter {
    /// Opens (creating if needed) the store at `dir`, discarding any
    /// uncommitted bytes left by an interrupted append.
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let index = read_index(&dir)?;
        let mut seen = HashSet::new();
        let mut latest: HashMap<SiteId, DateTime<Utc>> = HashMap::new();
        for seg in &index.segments {
            let path = dir.join(&seg.file);
            let f = OpenOptions::new().write(true).open(&path).map_err(io_err(&path))?;
            let len = f.metadata().map_err(io_err(&path))?.len();
            if len > seg.bytes {
                tracing::warn!(file = %path.display(), dropped = len - seg.bytes, "truncating uncommitted bytes");
                f.set_len(seg.bytes).map_err(io_err(&path))?;
            }
            for s in read_range(&path, 0, seg.bytes, 0)? {
                let e = latest.entry(s.site_id.clone()).or_insert(s.ts);
                *e = (*e).max(s.ts);
                seen.insert((s.site_id, s.ts));
            }
        }
        Ok(Self {
            dir,
            index,
            seen,
            latest,
            segment_records: DEFAULT_SEGMENT_RECORDS,
        })
    }

    /// Records per segment before a new segment file is started.
    pub fn with_segment_records(mut self, n: u64) -> Self {
        self.segment_records = n.max(1);
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seen.is_empty()
    }

    /// Appends a batch and commits it. Duplicates and per-site out-of-order
    /// snapshots are skipped and counted, never written.
    pub fn append(&mut self, batch: &[OccupancySnapshot]) -> Result<AppendOutcome, StoreError> {
        let mut outcome = AppendOutcome::default();
        // (segment position, bytes) pending per segment, in order
        let mut pending: Vec<(usize, Vec<u8>)> = Vec::new();
        for s in batch {
            let key = (s.site_id.clone(), s.ts);
            if self.seen.contains(&key) {
                outcome.duplicates += 1;
                continue;
            }
            if self.latest.get(&s.site_id).is_some_and(|&last| s.ts < last) {
                tracing::warn!(site = %s.site_id, ts = %s.ts, "skipping out-of-order snapshot");
                outcome.out_of_order += 1;
                continue;
            }
            let need_new = self
                .index
                .segments
                .last()
                .is_none_or(|seg| seg.records >= self.segment_records);
            if need_new {
                let file = format!("seg-{:08}.ndjson", self.index.segments.len());
                let path = self.dir.join(&file);
                File::create(&path).map_err(io_err(&path))?;
                self.index.segments.push(Segment {
                    file,
                    records: 0,
                    bytes: 0,
                });
            }
            let pos = self.index.segments.len() - 1;
            let mut line = s.to_ndjson().into_bytes();
            line.push(b'\n');
            let seg = &mut self.index.segments[pos];
            seg.records += 1;
            seg.bytes += line.len() as u64;
            match pending.last_mut() {
                Some((p, buf)) if *p == pos => buf.extend_from_slice(&line),
                _ => pending.push((pos, line)),
            }
            self.latest.insert(s.site_id.clone(), s.ts);
            self.seen.insert(key);
            outcome.appended += 1;
        }
        for (pos, buf) in &pending {
            let path = self.dir.join(&self.index.segments[*pos].file);
            let mut f = OpenOptions::new().append(true).open(&path).map_err(io_err(&path))?;
            f.write_all(buf).map_err(io_err(&path))?;
            f.sync_data().map_err(io_err(&path))?;
        }
        if !pending.is_empty() {
            write_index(&self.dir, &self.index)?;
        }
        Ok(outcome)
    }
}

/// A reader over the committed prefix of a store. Call [`StoreReader::refresh`]
/// to pick up batches committed since it was opened.
#[derive(Debug, Clone)]
pub struct StoreReader {
    dir: PathBuf,
    loaded: Vec<Segment>,
    records: Vec<OccupancySnapshot>,
}

impl StoreReader {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        if !dir.is_dir() {
            return Err(StoreError::Io {
                path: dir,
                source: io::Error::new(io::ErrorKind::NotFound, "store directory does not exist"),
            });
        }
        let mut reader = Self {
            dir,
            loaded: Vec::new(),
            records: Vec::new(),
        };
        reader.refresh()?;
        Ok(reader)
    }

    /// Loads newly committed records; returns how many were added.
    pub fn refresh(&mut self) -> Result<usize, StoreError> {
        let index = read_index(&self.dir)?;
        let before = self.records.len();
        let shrunk = index.segments.len() < self.loaded.len()
            || index
                .segments
                .iter()
                .zip(&self.loaded)
                .any(|(now, was)| now.file != was.file || now.bytes < was.bytes);
        if shrunk {
            return Err(StoreError::CorruptIndex {
                path: self.dir.join(INDEX_FILE),
                reason: "committed data shrank".into(),
            });
        }
        for (i, seg) in index.segments.iter().enumerate() {
            let (from, lines) = self.loaded.get(i).map_or((0, 0), |s| (s.bytes, s.records as usize));
            if seg.bytes > from {
                let path = self.dir.join(&seg.file);
                self.records.extend(read_range(&path, from, seg.bytes, lines)?);
            }
        }
        self.loaded = index.segments;
        Ok(self.records.len() - before)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// All committed snapshots in append order.
    pub fn snapshots(&self) -> &[OccupancySnapshot] {
        &self.records
    }

    /// Changes whenever new records are committed.
    pub fn version(&self) -> u64 {
        self.records.len() as u64
    }
}
