//! UTC timestamp parsing and canonical formatting.
//!
//! All file formats carry RFC 3339 timestamps; in memory everything is
//! unix seconds. Formatting always emits the `Z`-suffixed second-resolution
//! form, so parse-then-format canonicalizes any valid input.

use chrono::{DateTime, SecondsFormat, TimeZone, Utc};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TimeError {
    #[error("cannot parse '{0}' as an RFC 3339 timestamp")]
    Unparseable(String),
    #[error("timestamp '{0}' has sub-second precision, file formats use whole seconds")]
    SubSecond(String),
    #[error("unix timestamp {0} is out of the representable range")]
    OutOfRange(i64),
}

/// Parse an RFC 3339 timestamp (any offset) into unix seconds.
pub fn parse_timestamp(s: &str) -> Result<i64, TimeError> {
    let dt = DateTime::parse_from_rfc3339(s).map_err(|_| TimeError::Unparseable(s.to_string()))?;
    if dt.timestamp_subsec_nanos() != 0 {
        return Err(TimeError::SubSecond(s.to_string()));
    }
    Ok(dt.timestamp())
}

/// Canonical form: `YYYY-MM-DDTHH:MM:SSZ`.
pub fn format_timestamp(unix: i64) -> Result<String, TimeError> {
    let dt = Utc
        .timestamp_opt(unix, 0)
        .single()
        .ok_or(TimeError::OutOfRange(unix))?;
    Ok(dt.to_rfc3339_opts(SecondsFormat::Secs, true))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_formats_canonically() {
        let t = parse_timestamp("2021-01-15T00:00:00Z").unwrap();
        assert_eq!(t, 1610668800);
        assert_eq!(format_timestamp(t).unwrap(), "2021-01-15T00:00:00Z");
    }

    #[test]
    fn offset_inputs_normalize_to_utc() {
        let t = parse_timestamp("2021-01-15T01:00:00+01:00").unwrap();
        assert_eq!(format_timestamp(t).unwrap(), "2021-01-15T00:00:00Z");
    }

    #[test]
    fn rejects_garbage_and_subseconds() {
        assert!(matches!(
            parse_timestamp("yesterday"),
            Err(TimeError::Unparseable(_))
        ));
        assert!(matches!(
            parse_timestamp("2021-01-15T00:00:00.250Z"),
            Err(TimeError::SubSecond(_))
        ));
    }

    #[test]
    fn epoch_and_negative_times() {
        assert_eq!(format_timestamp(0).unwrap(), "1970-01-01T00:00:00Z");
        let t = parse_timestamp("1969-12-31T23:59:59Z").unwrap();
        assert_eq!(t, -1);
    }
}
