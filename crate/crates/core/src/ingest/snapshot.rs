use crate::spatial::SiteId;
use chrono::{DateTime, SecondsFormat, Utc};
use serde::ser::{SerializeMap, SerializeStruct};
use serde::{Serialize, Serializer};
use serde_json::{Map, Value};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TriageCode {
    White,
    Green,
    Yellow,
    Red,
}

impl TriageCode {
    pub const ALL: [TriageCode; 4] = [TriageCode::White, TriageCode::Green, TriageCode::Yellow, TriageCode::Red];

    pub fn id(self) -> &'static str {
        match self {
            TriageCode::White => "white",
            TriageCode::Green => "green",
            TriageCode::Yellow => "yellow",
            TriageCode::Red => "red",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TriageCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl std::str::FromStr for TriageCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TriageCode::ALL
            .into_iter()
            .find(|c| c.id() == s)
            .ok_or_else(|| format!("unknown triage code `{s}`"))
    }
}

/// Patient counts per triage code.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TriageCounts([u32; 4]);

impl TriageCounts {
    pub fn new(white: u32, green: u32, yellow: u32, red: u32) -> Self {
        Self([white, green, yellow, red])
    }

    pub fn get(&self, code: TriageCode) -> u32 {
        self.0[code.index()]
    }

    pub fn set(&mut self, code: TriageCode, n: u32) {
        self.0[code.index()] = n;
    }

    pub fn total<I: IntoIterator<Item = TriageCode>>(&self, codes: I) -> u64 {
        codes.into_iter().map(|c| u64::from(self.get(c))).sum()
    }
}

impl Serialize for TriageCounts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(4))?;
        for code in TriageCode::ALL {
            map.serialize_entry(code.id(), &self.get(code))?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OccupancySnapshot {
    pub site_id: SiteId,
    pub ts: DateTime<Utc>,
    pub in_charge: TriageCounts,
    pub waiting: TriageCounts,
}

impl Serialize for OccupancySnapshot {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("OccupancySnapshot", 4)?;
        st.serialize_field("site_id", &self.site_id)?;
        st.serialize_field("ts", &format_ts(&self.ts))?;
        st.serialize_field("in_charge", &self.in_charge)?;
        st.serialize_field("waiting", &self.waiting)?;
        st.end()
    }
}

pub(crate) fn format_ts(ts: &DateTime<Utc>) -> String {
    ts.to_rfc3339_opts(SecondsFormat::AutoSi, true)
}

impl OccupancySnapshot {
    /// Canonical single-line JSON form, without the trailing newline.
    pub fn to_ndjson(&self) -> String {
        serde_json::to_string(self).expect("snapshot serialization is infallible")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SnapshotError {
    #[error("malformed JSON: {0}")]
    MalformedJson(String),
    #[error("record is not a JSON object")]
    NotAnObject,
    #[error("missing field `{0}`")]
    MissingField(&'static str),
    #[error("field `{field}` has the wrong type, expected {expected}")]
    WrongType { field: String, expected: &'static str },
    #[error("field `{0}` is negative")]
    NegativeCount(String),
    #[error("field `{0}` is not an integer count")]
    NonIntegerCount(String),
    #[error("field `{field}` is not an RFC 3339 timestamp: `{value}`")]
    BadTimestamp { field: &'static str, value: String },
    #[error("field `{field}` has unknown triage code `{code}`")]
    UnknownTriageCode { field: &'static str, code: String },
}

fn parse_counts(obj: &Map<String, Value>, field: &'static str) -> Result<TriageCounts, SnapshotError> {
    let inner = match obj.get(field) {
        None | Some(Value::Null) if field == "waiting" => return Ok(TriageCounts::default()),
        None => return Err(SnapshotError::MissingField(field)),
        Some(Value::Object(m)) => m,
        Some(_) => {
            return Err(SnapshotError::WrongType {
                field: field.to_string(),
                expected: "object",
            })
        }
    };
    let mut counts = TriageCounts::default();
    for (key, value) in inner {
        let code: TriageCode = key.parse().map_err(|_| SnapshotError::UnknownTriageCode {
            field,
            code: key.clone(),
        })?;
        let name = format!("{field}.{key}");
        let n = match value {
            Value::Number(n) => n,
            _ => {
                return Err(SnapshotError::WrongType {
                    field: name,
                    expected: "integer",
                })
            }
        };
        let n = if let Some(u) = n.as_u64() {
            u
        } else if n.as_i64().is_some_and(|i| i < 0) || n.as_f64().is_some_and(|f| f < 0.0) {
            return Err(SnapshotError::NegativeCount(name));
        } else {
            return Err(SnapshotError::NonIntegerCount(name));
        };
        let n = u32::try_from(n).map_err(|_| SnapshotError::NonIntegerCount(name))?;
        counts.set(code, n);
    }
    Ok(counts)
}

/// Parses one NDJSON record. Triage codes absent from a count object are 0;
/// an absent `waiting` object means no one is waiting.
pub fn parse_snapshot(line: &str) -> Result<OccupancySnapshot, SnapshotError> {
    let value: Value = serde_json::from_str(line).map_err(|e| SnapshotError::MalformedJson(e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(SnapshotError::NotAnObject);
    };
    let site_id = match obj.get("site_id") {
        None => return Err(SnapshotError::MissingField("site_id")),
        Some(Value::String(s)) if !s.is_empty() => SiteId(s.clone()),
        Some(_) => {
            return Err(SnapshotError::WrongType {
                field: "site_id".into(),
                expected: "non-empty string",
            })
        }
    };
    let ts = match obj.get("ts") {
        None => return Err(SnapshotError::MissingField("ts")),
        Some(Value::String(s)) => DateTime::parse_from_rfc3339(s)
            .map_err(|_| SnapshotError::BadTimestamp {
                field: "ts",
                value: s.clone(),
            })?
            .with_timezone(&Utc),
        Some(other) => {
            return Err(SnapshotError::BadTimestamp {
                field: "ts",
                value: other.to_string(),
            })
        }
    };
    Ok(OccupancySnapshot {
        site_id,
        ts,
        in_charge: parse_counts(&obj, "in_charge")?,
        waiting: parse_counts(&obj, "waiting")?,
    })
}
