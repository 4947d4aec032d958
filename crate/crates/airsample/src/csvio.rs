//! CSV ingestion and emission for raw sensor streams and reference series.
//!
//! Raw files carry the header `timestamp,<channel>...` with canonical
//! channel names (`o3_we`, `o3_ae`, `s_o3`, `temp`, `rh`, ...); reference
//! files carry `timestamp,value`. Timestamps are RFC 3339 UTC, missing
//! readings are empty fields, numbers are written in shortest
//! round-trip form, so writing a loaded canonical file reproduces it
//! byte for byte.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use airsample_core::series::{ChannelId, Pollutant, RawSeries, ReferenceSeries, SeriesError};
use airsample_core::SECONDS_PER_HOUR;
use thiserror::Error;

use crate::timefmt::{format_timestamp, parse_timestamp, TimeError};

#[derive(Debug, Error)]
pub enum CsvIoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: first header column must be 'timestamp', got '{got}'")]
    BadHeader { path: String, got: String },
    #[error("{path}: unknown channel column '{name}'")]
    UnknownColumn { path: String, name: String },
    #[error("{path}: no channel columns besides 'timestamp'")]
    NoChannels { path: String },
    #[error("{path}:{line}: {source}")]
    BadTimestamp {
        path: String,
        line: u64,
        #[source]
        source: TimeError,
    },
    #[error("{path}:{line}: cannot parse '{field}' as a number")]
    BadNumber {
        path: String,
        line: u64,
        field: String,
    },
    #[error("{path}:{line}: expected {expected} fields, got {got}")]
    BadFieldCount {
        path: String,
        line: u64,
        expected: usize,
        got: usize,
    },
    #[error("{path}:{line}: {source}")]
    Series {
        path: String,
        line: u64,
        #[source]
        source: SeriesError,
    },
    #[error("{path}: file holds no records")]
    Empty { path: String },
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

fn parse_opt_f64(field: &str, path: &Path, line: u64) -> Result<Option<f64>, CsvIoError> {
    let trimmed = field.trim();
    if trimmed.is_empty() {
        return Ok(None);
    }
    trimmed
        .parse::<f64>()
        .map(Some)
        .map_err(|_| CsvIoError::BadNumber {
            path: path_str(path),
            line,
            field: field.to_string(),
        })
}

/// Format a float in shortest round-trip form (what `Display` gives for
/// `f64`), the canonical on-disk number representation.
pub fn format_number(v: f64) -> String {
    format!("{v}")
}

/// Load a raw multichannel stream. The acquisition grid is anchored at the
/// first record; `base_period_s` is the expected `T_s`.
pub fn load_raw_csv(path: &Path, base_period_s: i64) -> Result<RawSeries, CsvIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|source| CsvIoError::Csv {
            path: path_str(path),
            source,
        })?;
    let headers = reader
        .headers()
        .map_err(|source| CsvIoError::Csv {
            path: path_str(path),
            source,
        })?
        .clone();
    let mut columns = headers.iter();
    match columns.next() {
        Some("timestamp") => {}
        other => {
            return Err(CsvIoError::BadHeader {
                path: path_str(path),
                got: other.unwrap_or("").to_string(),
            })
        }
    }
    let channels: Vec<ChannelId> = columns
        .map(|name| {
            ChannelId::parse(name).ok_or_else(|| CsvIoError::UnknownColumn {
                path: path_str(path),
                name: name.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;
    if channels.is_empty() {
        return Err(CsvIoError::NoChannels {
            path: path_str(path),
        });
    }

    let mut records: Vec<(i64, Vec<Option<f64>>)> = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|source| CsvIoError::Csv {
            path: path_str(path),
            source,
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != channels.len() + 1 {
            return Err(CsvIoError::BadFieldCount {
                path: path_str(path),
                line,
                expected: channels.len() + 1,
                got: record.len(),
            });
        }
        let ts = parse_timestamp(&record[0]).map_err(|source| CsvIoError::BadTimestamp {
            path: path_str(path),
            line,
            source,
        })?;
        let values: Vec<Option<f64>> = record
            .iter()
            .skip(1)
            .map(|f| parse_opt_f64(f, path, line))
            .collect::<Result<_, _>>()?;
        records.push((ts, values));
    }
    let start_time = records
        .first()
        .map(|&(ts, _)| ts)
        .ok_or_else(|| CsvIoError::Empty {
            path: path_str(path),
        })?;

    let mut series = RawSeries::new(start_time, base_period_s, channels).map_err(|source| {
        CsvIoError::Series {
            path: path_str(path),
            line: 1,
            source,
        }
    })?;
    // Header is line 1, first record line 2.
    for (i, (ts, values)) in records.iter().enumerate() {
        series
            .push_record(*ts, values)
            .map_err(|source| CsvIoError::Series {
                path: path_str(path),
                line: i as u64 + 2,
                source,
            })?;
    }
    Ok(series)
}

/// Write a raw stream in canonical form.
pub fn write_raw_csv(series: &RawSeries, path: &Path) -> Result<(), CsvIoError> {
    let file = File::create(path).map_err(|source| CsvIoError::Io {
        path: path_str(path),
        source,
    })?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<File>, text: &str| {
        out.write_all(text.as_bytes()).map_err(|source| CsvIoError::Io {
            path: path_str(path),
            source,
        })
    };
    let mut header = String::from("timestamp");
    for c in series.channels() {
        header.push(',');
        header.push_str(&c.name());
    }
    header.push('\n');
    write(&mut out, &header)?;
    for i in 0..series.len() {
        let ts = series.timestamp(i);
        let mut row = format_timestamp(ts).map_err(|source| CsvIoError::BadTimestamp {
            path: path_str(path),
            line: i as u64 + 2,
            source,
        })?;
        for value in series.record(i) {
            row.push(',');
            if let Some(v) = value {
                row.push_str(&format_number(*v));
            }
        }
        row.push('\n');
        write(&mut out, &row)?;
    }
    out.flush().map_err(|source| CsvIoError::Io {
        path: path_str(path),
        source,
    })
}

/// Load an hourly reference series (`timestamp,value`).
pub fn load_reference_csv(path: &Path, pollutant: Pollutant) -> Result<ReferenceSeries, CsvIoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|source| CsvIoError::Csv {
            path: path_str(path),
            source,
        })?;
    let headers = reader
        .headers()
        .map_err(|source| CsvIoError::Csv {
            path: path_str(path),
            source,
        })?
        .clone();
    if headers.get(0) != Some("timestamp") || headers.get(1) != Some("value") {
        return Err(CsvIoError::BadHeader {
            path: path_str(path),
            got: headers.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut points: Vec<(i64, Option<f64>)> = Vec::new();
    for result in reader.records() {
        let record = result.map_err(|source| CsvIoError::Csv {
            path: path_str(path),
            source,
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != 2 {
            return Err(CsvIoError::BadFieldCount {
                path: path_str(path),
                line,
                expected: 2,
                got: record.len(),
            });
        }
        let ts = parse_timestamp(&record[0]).map_err(|source| CsvIoError::BadTimestamp {
            path: path_str(path),
            line,
            source,
        })?;
        points.push((ts, parse_opt_f64(&record[1], path, line)?));
    }
    if points.is_empty() {
        return Err(CsvIoError::Empty {
            path: path_str(path),
        });
    }
    ReferenceSeries::new(pollutant, SECONDS_PER_HOUR, points).map_err(|source| {
        CsvIoError::Series {
            path: path_str(path),
            line: 0,
            source,
        }
    })
}

/// Write a reference series in canonical form.
pub fn write_reference_csv(series: &ReferenceSeries, path: &Path) -> Result<(), CsvIoError> {
    let file = File::create(path).map_err(|source| CsvIoError::Io {
        path: path_str(path),
        source,
    })?;
    let mut out = BufWriter::new(file);
    let mut text = String::from("timestamp,value\n");
    for &(ts, value) in series.points() {
        text.push_str(&format_timestamp(ts).map_err(|source| CsvIoError::BadTimestamp {
            path: path_str(path),
            line: 0,
            source,
        })?);
        text.push(',');
        if let Some(v) = value {
            text.push_str(&format_number(v));
        }
        text.push('\n');
    }
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|source| CsvIoError::Io {
            path: path_str(path),
            source,
        })
}
