//! Occupancy snapshots: parsing, capacity and supply estimation, polling
//! sources, the append-only store, and time-window queries.

pub mod capacity;
pub mod snapshot;
pub mod source;
pub mod store;
pub mod synthetic;
pub mod window;

pub use capacity::{current_supply, estimate_capacity, CapacityError, FacilitySeries, LoadOptions, TriageSet};
pub use snapshot::{parse_snapshot, OccupancySnapshot, SnapshotError, TriageCode, TriageCounts};
pub use source::{
    poll_and_append, Batch, PollError, PollOptions, PollSummary, ReplaySource, RetryPolicy, SnapshotSource,
    SourceConfig, SourceError, SourceKind, SyntheticSource,
};
pub use store::{AppendOutcome, StoreError, StoreReader, StoreWriter};
pub use synthetic::{OccupancyModel, SiteProfile};
pub use window::{query_window, DayKind, TimeSlot, WindowError, WindowQuery, DEFAULT_TIMEZONE};
