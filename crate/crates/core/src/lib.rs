//! Spatial accessibility analytics over facility-occupancy streams.
//!
//! The crate builds accessibility-reachability (AR) matrices from a demand
//! lattice and a set of facilities, runs single-facility supply-shock
//! analysis, compares against classical gravity / 2SFCA / RAAM measures, and
//! tests weekday-vs-weekend accessibility differentials with family-wise and
//! false-discovery-rate corrections.

pub mod ar;
pub mod baselines;
pub mod engine;
pub mod export;
pub mod impact;
pub mod ingest;
pub mod spatial;
pub mod stats;
pub mod synth;
