//! Core algorithms for duty-cycled sampling of low-cost gas sensors.
//!
//! The crate models the sensing-side data path of a battery-powered air
//! quality node: a high-frequency raw stream is subsampled according to a
//! [`sampling::SamplingPlan`], the resulting windows are outlier-filtered
//! and aggregated to the sensing period and then to the reference period,
//! and the hourly values are calibrated against a reference instrument by
//! multiple linear regression.
//!
//! Everything here is `no_std` (with `alloc`) and purely functional: all
//! types are immutable after construction and operations are deterministic
//! functions of their inputs, so plans, folds and candidate evaluations can
//! be processed concurrently by a caller without coordination.
//!
//! Timestamps are UTC unix seconds throughout. Hour buckets are
//! left-closed `[t, t + T_ref)`.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod calibration;
pub mod preprocess;
pub mod sampling;
pub mod series;
pub mod synth;

pub use calibration::{CalibrationModel, CvSummary, FitMetrics};
pub use preprocess::{AggregateSpec, FilterMethod, FilterSpec, Statistic};
pub use sampling::{DutyCycleResult, SampleWindow, SamplingMode, SamplingPlan};
pub use series::{AggregatedDataset, ChannelId, ChannelKind, Pollutant, RawSeries, ReferenceSeries};

/// Seconds in one reference period of a European reference station.
pub const SECONDS_PER_HOUR: i64 = 3600;
