//! File formats, run configuration and experiment orchestration on top of
//! `airsample-core`.
//!
//! The core crate holds the pure pipeline (sampling simulation, filtering,
//! aggregation, calibration); this crate adds everything that touches the
//! outside world: CSV ingestion and emission, the TOML run configuration
//! with dotted-key overrides, the plan-grid sweep runner and the report
//! writers used by the `airsample` binary.

pub mod config;
pub mod csvio;
pub mod experiment;
pub mod report;
pub mod timefmt;
