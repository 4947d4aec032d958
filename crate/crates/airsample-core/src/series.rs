//! Data model for raw sensor streams, reference data and aligned datasets.
//!
//! A [`RawSeries`] holds the high-frequency multichannel stream captured by a
//! node (working/auxiliary electrode counts, temperature, humidity). A
//! [`ReferenceSeries`] holds the hourly concentrations published by a
//! reference station. [`align`] joins per-feature series at the reference
//! period with the reference values to form the `{x_i, y_i}` pairs used for
//! calibration.
//!
//! Missing values are explicit `None` markers everywhere; nothing is ever
//! imputed. A row with any missing feature or missing target is a gap and is
//! excluded from training.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

/// Gas species measured by the electrochemical sensors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pollutant {
    O3,
    No2,
    No,
}

impl Pollutant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Pollutant::O3 => "O3",
            Pollutant::No2 => "NO2",
            Pollutant::No => "NO",
        }
    }

    pub fn parse(s: &str) -> Option<Pollutant> {
        match s.to_ascii_uppercase().as_str() {
            "O3" => Some(Pollutant::O3),
            "NO2" => Some(Pollutant::No2),
            "NO" => Some(Pollutant::No),
            _ => None,
        }
    }

    /// Lower-case tag used in channel and feature names.
    pub fn tag(&self) -> &'static str {
        match self {
            Pollutant::O3 => "o3",
            Pollutant::No2 => "no2",
            Pollutant::No => "no",
        }
    }
}

/// What a raw channel physically measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    /// Working electrode, ADC counts.
    GasWe,
    /// Auxiliary electrode, ADC counts.
    GasAe,
    /// Subtracted electrode signal `WE - AE`, ADC counts.
    GasSignal,
    /// Degrees Celsius.
    Temperature,
    /// Relative humidity, percent.
    Humidity,
}

/// Identity of one raw channel. Gas channels always carry a pollutant tag;
/// electrode channels come in WE/AE pairs per pollutant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelId {
    kind: ChannelKind,
    pollutant: Option<Pollutant>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("gas channels require a pollutant tag")]
    MissingPollutant,
    #[error("non-gas channels cannot carry a pollutant tag")]
    UnexpectedPollutant,
}

impl ChannelId {
    pub fn gas(kind: ChannelKind, pollutant: Pollutant) -> Result<ChannelId, ChannelError> {
        match kind {
            ChannelKind::GasWe | ChannelKind::GasAe | ChannelKind::GasSignal => Ok(ChannelId {
                kind,
                pollutant: Some(pollutant),
            }),
            _ => Err(ChannelError::UnexpectedPollutant),
        }
    }

    /// Subtracted electrode signal `S = WE - AE` for a pollutant.
    pub fn signal(pollutant: Pollutant) -> ChannelId {
        ChannelId {
            kind: ChannelKind::GasSignal,
            pollutant: Some(pollutant),
        }
    }

    pub fn working(pollutant: Pollutant) -> ChannelId {
        ChannelId {
            kind: ChannelKind::GasWe,
            pollutant: Some(pollutant),
        }
    }

    pub fn auxiliary(pollutant: Pollutant) -> ChannelId {
        ChannelId {
            kind: ChannelKind::GasAe,
            pollutant: Some(pollutant),
        }
    }

    pub fn temperature() -> ChannelId {
        ChannelId {
            kind: ChannelKind::Temperature,
            pollutant: None,
        }
    }

    pub fn humidity() -> ChannelId {
        ChannelId {
            kind: ChannelKind::Humidity,
            pollutant: None,
        }
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn pollutant(&self) -> Option<Pollutant> {
        self.pollutant
    }

    /// True for WE/AE electrode channels.
    pub fn is_electrode(&self) -> bool {
        matches!(self.kind, ChannelKind::GasWe | ChannelKind::GasAe)
    }

    /// True for any gas-derived channel (electrodes or the subtracted
    /// signal), the ones outlier filtering applies to by default.
    pub fn is_gas(&self) -> bool {
        matches!(
            self.kind,
            ChannelKind::GasWe | ChannelKind::GasAe | ChannelKind::GasSignal
        )
    }

    /// Canonical short name, e.g. `o3_we`, `s_o3`, `temp`, `rh`.
    pub fn name(&self) -> String {
        match (self.kind, self.pollutant) {
            (ChannelKind::GasWe, Some(p)) => format!("{}_we", p.tag()),
            (ChannelKind::GasAe, Some(p)) => format!("{}_ae", p.tag()),
            (ChannelKind::GasSignal, Some(p)) => format!("s_{}", p.tag()),
            (ChannelKind::Temperature, _) => String::from("temp"),
            (ChannelKind::Humidity, _) => String::from("rh"),
            // Unreachable for validated ids; name them anyway.
            (ChannelKind::GasWe, None) => String::from("?_we"),
            (ChannelKind::GasAe, None) => String::from("?_ae"),
            (ChannelKind::GasSignal, None) => String::from("s_?"),
        }
    }

    /// Parse a canonical short name.
    pub fn parse(name: &str) -> Option<ChannelId> {
        match name {
            "temp" => return Some(ChannelId::temperature()),
            "rh" => return Some(ChannelId::humidity()),
            _ => {}
        }
        if let Some(tag) = name.strip_prefix("s_") {
            return Some(ChannelId::signal(parse_tag(tag)?));
        }
        if let Some(tag) = name.strip_suffix("_we") {
            return Some(ChannelId::working(parse_tag(tag)?));
        }
        if let Some(tag) = name.strip_suffix("_ae") {
            return Some(ChannelId::auxiliary(parse_tag(tag)?));
        }
        None
    }
}

fn parse_tag(tag: &str) -> Option<Pollutant> {
    match tag {
        "o3" => Some(Pollutant::O3),
        "no2" => Some(Pollutant::No2),
        "no" => Some(Pollutant::No),
        _ => None,
    }
}

/// Informative electrode signal `S = WE - AE`, in raw ADC counts.
///
/// Negative values are allowed; a missing reading on either electrode
/// propagates to a missing signal.
pub fn electrode_signal(we: Option<f64>, ae: Option<f64>) -> Option<f64> {
    Some(we? - ae?)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("duplicate timestamp {timestamp}")]
    DuplicateTimestamp { timestamp: i64 },
    #[error("non-monotone timestamp {timestamp} after {previous}")]
    NonMonotoneTimestamp { timestamp: i64, previous: i64 },
    #[error("timestamp {timestamp} deviates more than {tolerance}s from the acquisition grid")]
    OffGridTimestamp { timestamp: i64, tolerance: f64 },
    #[error("record has {got} values, series has {expected} channels")]
    ChannelCountMismatch { expected: usize, got: usize },
    #[error("base period must be positive, got {0}")]
    NonPositivePeriod(i64),
    #[error("timestamp {timestamp} is not aligned to the {period}s period")]
    UnalignedTimestamp { timestamp: i64, period: i64 },
}

/// Timestamped high-frequency multichannel sensor readings.
///
/// Timestamps are strictly increasing and must sit within half a base
/// period of the acquisition grid `start_time + k * base_period` (real
/// loggers jitter). Records may be absent (the stream has holes) but every
/// present record carries one `Option<f64>` per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    start_time: i64,
    base_period_s: i64,
    channels: Vec<ChannelId>,
    timestamps: Vec<i64>,
    /// Row-major, `timestamps.len() * channels.len()`.
    values: Vec<Option<f64>>,
}

impl RawSeries {
    pub fn new(start_time: i64, base_period_s: i64, channels: Vec<ChannelId>) -> Result<RawSeries, SeriesError> {
        if base_period_s <= 0 {
            return Err(SeriesError::NonPositivePeriod(base_period_s));
        }
        Ok(RawSeries {
            start_time,
            base_period_s,
            channels,
            timestamps: Vec::new(),
            values: Vec::new(),
        })
    }

    /// Append one record. Records must arrive in time order.
    pub fn push_record(&mut self, timestamp: i64, values: &[Option<f64>]) -> Result<(), SeriesError> {
        if values.len() != self.channels.len() {
            return Err(SeriesError::ChannelCountMismatch {
                expected: self.channels.len(),
                got: values.len(),
            });
        }
        if let Some(&last) = self.timestamps.last() {
            if timestamp == last {
                return Err(SeriesError::DuplicateTimestamp { timestamp });
            }
            if timestamp < last {
                return Err(SeriesError::NonMonotoneTimestamp {
                    timestamp,
                    previous: last,
                });
            }
        }
        // Accept a record only if it deviates less than 0.5*T_s from the grid.
        let offset = timestamp - self.start_time;
        let rem = offset.rem_euclid(self.base_period_s);
        let deviation = rem.min(self.base_period_s - rem);
        if offset < 0 || 2 * deviation >= self.base_period_s && deviation != 0 {
            return Err(SeriesError::OffGridTimestamp {
                timestamp,
                tolerance: 0.5 * self.base_period_s as f64,
            });
        }
        self.timestamps.push(timestamp);
        self.values.extend_from_slice(values);
        Ok(())
    }

    pub fn from_records(
        start_time: i64,
        base_period_s: i64,
        channels: Vec<ChannelId>,
        records: impl IntoIterator<Item = (i64, Vec<Option<f64>>)>,
    ) -> Result<RawSeries, SeriesError> {
        let mut series = RawSeries::new(start_time, base_period_s, channels)?;
        for (ts, vals) in records {
            series.push_record(ts, &vals)?;
        }
        Ok(series)
    }

    pub fn start_time(&self) -> i64 {
        self.start_time
    }

    pub fn base_period_s(&self) -> i64 {
        self.base_period_s
    }

    pub fn channels(&self) -> &[ChannelId] {
        &self.channels
    }

    pub fn channel_index(&self, id: &ChannelId) -> Option<usize> {
        self.channels.iter().position(|c| c == id)
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn timestamp(&self, record: usize) -> i64 {
        self.timestamps[record]
    }

    pub fn value(&self, record: usize, channel: usize) -> Option<f64> {
        self.values[record * self.channels.len() + channel]
    }

    pub fn record(&self, record: usize) -> &[Option<f64>] {
        let w = self.channels.len();
        &self.values[record * w..(record + 1) * w]
    }

    /// Index of the first record at or after `timestamp`.
    pub fn first_at_or_after(&self, timestamp: i64) -> usize {
        self.timestamps.partition_point(|&t| t < timestamp)
    }
}

/// A time series of aggregate values on a fixed period grid, gaps explicit.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSeries {
    pub period_s: i64,
    /// Strictly increasing timestamps (bucket starts) with optional values.
    pub points: Vec<(i64, Option<f64>)>,
}

impl PeriodSeries {
    pub fn new(period_s: i64, points: Vec<(i64, Option<f64>)>) -> Result<PeriodSeries, SeriesError> {
        if period_s <= 0 {
            return Err(SeriesError::NonPositivePeriod(period_s));
        }
        let mut prev: Option<i64> = None;
        for &(ts, _) in &points {
            if let Some(p) = prev {
                if ts == p {
                    return Err(SeriesError::DuplicateTimestamp { timestamp: ts });
                }
                if ts < p {
                    return Err(SeriesError::NonMonotoneTimestamp {
                        timestamp: ts,
                        previous: p,
                    });
                }
            }
            prev = Some(ts);
        }
        Ok(PeriodSeries { period_s, points })
    }

    pub fn value_at(&self, timestamp: i64) -> Option<Option<f64>> {
        self.points
            .binary_search_by_key(&timestamp, |&(t, _)| t)
            .ok()
            .map(|i| self.points[i].1)
    }
}

/// Reference-instrument concentrations at the reference period `T_ref`
/// (one hour for the stations we mirror), in ug/m3.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSeries {
    pub pollutant: Pollutant,
    series: PeriodSeries,
}

impl ReferenceSeries {
    pub fn new(
        pollutant: Pollutant,
        period_s: i64,
        points: Vec<(i64, Option<f64>)>,
    ) -> Result<ReferenceSeries, SeriesError> {
        for &(ts, _) in &points {
            if ts.rem_euclid(period_s.max(1)) != 0 {
                return Err(SeriesError::UnalignedTimestamp {
                    timestamp: ts,
                    period: period_s,
                });
            }
        }
        Ok(ReferenceSeries {
            pollutant,
            series: PeriodSeries::new(period_s, points)?,
        })
    }

    pub fn period_s(&self) -> i64 {
        self.series.period_s
    }

    pub fn points(&self) -> &[(i64, Option<f64>)] {
        &self.series.points
    }

    /// Hours with an actual value (the denominator of retention).
    pub fn available_len(&self) -> usize {
        self.series.points.iter().filter(|(_, v)| v.is_some()).count()
    }
}

/// One aligned row: a feature vector and the matching reference value.
#[derive(Debug, Clone, PartialEq)]
pub struct DataRow {
    pub timestamp: i64,
    pub features: Vec<Option<f64>>,
    pub target: Option<f64>,
}

impl DataRow {
    /// A row with any missing feature or missing target is a gap.
    pub fn is_gap(&self) -> bool {
        self.target.is_none() || self.features.iter().any(|v| v.is_none())
    }
}

/// Reference-period-aligned feature vectors paired with reference values.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedDataset {
    feature_names: Vec<String>,
    rows: Vec<DataRow>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("feature '{name}' has period {got}s, reference period is {expected}s")]
    MismatchedPeriod { name: String, expected: i64, got: i64 },
    #[error("sensor and reference series share no timestamps")]
    EmptyIntersection,
    #[error("no feature series given")]
    NoFeatures,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("unknown feature '{0}'")]
    UnknownFeature(String),
}

impl AggregatedDataset {
    pub fn new(feature_names: Vec<String>, rows: Vec<DataRow>) -> AggregatedDataset {
        let p = feature_names.len();
        debug_assert!(rows.iter().all(|r| r.features.len() == p));
        AggregatedDataset { feature_names, rows }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn rows(&self) -> &[DataRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn usable_len(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_gap()).count()
    }

    /// Indices of rows usable for training (no missing entries).
    pub fn usable_indices(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| !self.rows[i].is_gap()).collect()
    }

    /// Restrict to a subset of rows, keeping feature names and order.
    pub fn subset(&self, indices: &[usize]) -> AggregatedDataset {
        AggregatedDataset {
            feature_names: self.feature_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Build the regression inputs for `features` over the given usable rows:
    /// a row-major `rows.len() x features.len()` matrix and the target vector.
    pub fn design(
        &self,
        features: &[String],
        row_indices: &[usize],
    ) -> Result<(Vec<f64>, Vec<f64>), DatasetError> {
        let cols: Vec<usize> = features
            .iter()
            .map(|f| {
                self.feature_names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| DatasetError::UnknownFeature(f.clone()))
            })
            .collect::<Result<_, _>>()?;
        let mut x = Vec::with_capacity(row_indices.len() * cols.len());
        let mut y = Vec::with_capacity(row_indices.len());
        for &i in row_indices {
            let row = &self.rows[i];
            debug_assert!(!row.is_gap());
            for &c in &cols {
                x.push(row.features[c].unwrap_or(f64::NAN));
            }
            y.push(row.target.unwrap_or(f64::NAN));
        }
        Ok((x, y))
    }
}

/// Inner-join per-feature series at the reference period with the
/// reference values.
///
/// A timestamp enters the result only if every feature series and the
/// reference structurally contain it; rows where any side holds a missing
/// marker are kept as gaps (excluded from training, never imputed).
pub fn align(
    features: &[(String, PeriodSeries)],
    reference: &ReferenceSeries,
) -> Result<AggregatedDataset, AlignError> {
    if features.is_empty() {
        return Err(AlignError::NoFeatures);
    }
    let t_ref = reference.period_s();
    for (name, series) in features {
        if series.period_s != t_ref {
            return Err(AlignError::MismatchedPeriod {
                name: name.clone(),
                expected: t_ref,
                got: series.period_s,
            });
        }
    }
    let mut rows = Vec::new();
    for &(ts, y) in reference.points() {
        let mut values = Vec::with_capacity(features.len());
        let mut present = true;
        for (_, series) in features {
            match series.value_at(ts) {
                Some(v) => values.push(v),
                None => {
                    present = false;
                    break;
                }
            }
        }
        if present {
            rows.push(DataRow {
                timestamp: ts,
                features: values,
                target: y,
            });
        }
    }
    if rows.is_empty() {
        return Err(AlignError::EmptyIntersection);
    }
    let names = features.iter().map(|(n, _)| n.clone()).collect();
    Ok(AggregatedDataset::new(names, rows))
}
