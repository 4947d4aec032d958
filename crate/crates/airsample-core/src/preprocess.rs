//! Outlier filtering and the two aggregation stages of the pipeline.
//!
//! Each sample window is filtered (z-score or percent-deviation, single
//! pass) and aggregated into one `T_sen` value; a window left with fewer
//! than `min_count` samples is discarded, producing a gap. A second
//! aggregation collapses the `T_sen` series into the reference period
//! `T_ref` with the same minimum-count rule.

use alloc::vec::Vec;

use thiserror::Error;

use crate::sampling::SampleWindow;
use crate::series::{PeriodSeries, RawSeries};

/// Outlier filter applied to each window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterMethod {
    /// Drop samples with `|x - mean| / std > threshold` (threshold in
    /// z-score units). A zero-spread window is kept untouched.
    ZScore,
    /// Drop samples with `|x - mean| > threshold * |mean|` (threshold a
    /// fraction).
    PercentDeviation,
    /// Identity.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterSpec {
    pub method: FilterMethod,
    pub threshold: f64,
}

impl FilterSpec {
    pub fn none() -> FilterSpec {
        FilterSpec {
            method: FilterMethod::None,
            threshold: 0.0,
        }
    }

    /// The usual z-score filter with the threshold-2 rule.
    pub fn zscore(threshold: f64) -> FilterSpec {
        FilterSpec {
            method: FilterMethod::ZScore,
            threshold,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("cannot filter an empty window")]
    EmptyWindow,
    #[error("filter threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
}

/// Aggregation statistic for a window or bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Median,
}

/// How windows and buckets are reduced to a single value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggregateSpec {
    pub statistic: Statistic,
    /// Minimum number of samples for the aggregate to be representative;
    /// below it the period is discarded, producing a gap.
    pub min_count: usize,
}

impl AggregateSpec {
    pub fn mean(min_count: usize) -> AggregateSpec {
        AggregateSpec {
            statistic: Statistic::Mean,
            min_count: min_count.max(1),
        }
    }
}

/// Single-pass outlier filter over one window of samples.
///
/// The mean and deviation are computed once over the input; surviving
/// samples keep their order. The sample standard deviation uses the
/// `n - 1` denominator.
pub fn filter_window(samples: &[f64], spec: &FilterSpec) -> Result<Vec<f64>, FilterError> {
    if samples.is_empty() {
        return Err(FilterError::EmptyWindow);
    }
    match spec.method {
        FilterMethod::None => Ok(samples.to_vec()),
        FilterMethod::ZScore => {
            if spec.threshold <= 0.0 {
                return Err(FilterError::NonPositiveThreshold(spec.threshold));
            }
            let (mean, std) = mean_and_std(samples);
            if std == 0.0 || !std.is_finite() {
                // Degenerate spread: every z-score is 0/0, keep all.
                return Ok(samples.to_vec());
            }
            Ok(samples
                .iter()
                .copied()
                .filter(|x| libm::fabs(x - mean) / std <= spec.threshold)
                .collect())
        }
        FilterMethod::PercentDeviation => {
            if spec.threshold <= 0.0 {
                return Err(FilterError::NonPositiveThreshold(spec.threshold));
            }
            let mean = samples.iter().sum::<f64>() / samples.len() as f64;
            Ok(samples
                .iter()
                .copied()
                .filter(|x| libm::fabs(x - mean) <= spec.threshold * libm::fabs(mean))
                .collect())
        }
    }
}

fn mean_and_std(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let ss = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
    (mean, libm::sqrt(ss / (n - 1.0)))
}

/// Reduce a window to one value, or a gap when too few samples remain.
pub fn aggregate_window(samples: &[f64], spec: &AggregateSpec) -> Option<f64> {
    if samples.len() < spec.min_count || samples.is_empty() {
        return None;
    }
    match spec.statistic {
        Statistic::Mean => Some(samples.iter().sum::<f64>() / samples.len() as f64),
        Statistic::Median => {
            let mut sorted = samples.to_vec();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
            let n = sorted.len();
            Some(if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            })
        }
    }
}

/// Filter and aggregate simulated windows into per-channel series at the
/// plan's period.
///
/// `filtered_channels[c]` says whether the outlier filter applies to
/// channel `c`; by default only gas electrode channels are filtered while
/// temperature and humidity pass through. Gaps are preserved: a tick whose
/// window drops below `min_count` (before or after filtering) yields a
/// missing value at that tick.
pub fn to_sen_series(
    raw: &RawSeries,
    windows: &[SampleWindow],
    period_s: i64,
    filter: &FilterSpec,
    filtered_channels: &[bool],
    agg: &AggregateSpec,
) -> Result<Vec<PeriodSeries>, FilterError> {
    let n_channels = raw.channels().len();
    debug_assert_eq!(filtered_channels.len(), n_channels);
    let mut columns: Vec<Vec<(i64, Option<f64>)>> = (0..n_channels)
        .map(|_| Vec::with_capacity(windows.len()))
        .collect();
    let mut scratch: Vec<f64> = Vec::new();
    for window in windows {
        for (c, column) in columns.iter_mut().enumerate() {
            scratch.clear();
            for &i in &window.sample_indices {
                if let Some(v) = raw.value(i as usize, c) {
                    scratch.push(v);
                }
            }
            let value = if scratch.is_empty() {
                None
            } else if filtered_channels[c] {
                let kept = filter_window(&scratch, filter)?;
                aggregate_window(&kept, agg)
            } else {
                aggregate_window(&scratch, agg)
            };
            column.push((window.tick_time, value));
        }
    }
    Ok(columns
        .into_iter()
        .map(|points| PeriodSeries { period_s, points })
        .collect())
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AggregateError {
    #[error("reference period {t_ref_s}s is not a multiple of the series period {period_s}s")]
    PeriodNotMultiple { t_ref_s: i64, period_s: i64 },
    #[error(transparent)]
    Filter(#[from] FilterError),
}

/// Second aggregation: collapse a `T_sen` series into left-closed
/// `[t, t + T_ref)` buckets.
///
/// When `filter` is given, the outlier filter runs over the non-gap
/// values of each bucket before aggregation (the `ref_bucket` filter
/// scope); pass `None` for the plain second aggregation.
pub fn to_ref_series(
    sen: &PeriodSeries,
    t_ref_s: i64,
    filter: Option<&FilterSpec>,
    agg: &AggregateSpec,
) -> Result<PeriodSeries, AggregateError> {
    if t_ref_s <= 0 || t_ref_s % sen.period_s != 0 {
        return Err(AggregateError::PeriodNotMultiple {
            t_ref_s,
            period_s: sen.period_s,
        });
    }
    let mut points: Vec<(i64, Option<f64>)> = Vec::new();
    let mut bucket: Vec<f64> = Vec::new();
    let mut current: Option<i64> = None;

    let flush = |start: i64, bucket: &mut Vec<f64>, points: &mut Vec<(i64, Option<f64>)>| -> Result<(), AggregateError> {
        let value = if bucket.is_empty() {
            None
        } else if let Some(f) = filter {
            let kept = filter_window(bucket, f)?;
            aggregate_window(&kept, agg)
        } else {
            aggregate_window(bucket, agg)
        };
        points.push((start, value));
        bucket.clear();
        Ok(())
    };

    for &(ts, value) in &sen.points {
        let start = ts.div_euclid(t_ref_s) * t_ref_s;
        match current {
            Some(c) if c == start => {}
            Some(c) => {
                flush(c, &mut bucket, &mut points)?;
                // Emit explicit gaps for wholly absent buckets in between.
                let mut next = c + t_ref_s;
                while next < start {
                    points.push((next, None));
                    next += t_ref_s;
                }
                current = Some(start);
            }
            None => current = Some(start),
        }
        if let Some(v) = value {
            bucket.push(v);
        }
    }
    if let Some(c) = current {
        flush(c, &mut bucket, &mut points)?;
    }
    Ok(PeriodSeries {
        period_s: t_ref_s,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{simulate, SamplingMode, SamplingPlan};
    use crate::series::{ChannelId, Pollutant};
    use alloc::vec;

    #[test]
    fn zscore_keeps_constant_windows() {
        let w = [5.0, 5.0, 5.0, 5.0];
        assert_eq!(filter_window(&w, &FilterSpec::zscore(2.0)).unwrap(), w.to_vec());
    }

    #[test]
    fn zscore_removes_outlier() {
        // Nine 10s and one 100: the 100 sits at z ~ 2.85.
        let mut w = vec![10.0; 9];
        w.push(100.0);
        let kept = filter_window(&w, &FilterSpec::zscore(2.0)).unwrap();
        assert_eq!(kept, vec![10.0; 9]);
    }

    #[test]
    fn filter_none_is_identity() {
        let w = [1.0, -2.0, 3.5];
        assert_eq!(filter_window(&w, &FilterSpec::none()).unwrap(), w.to_vec());
    }

    #[test]
    fn filter_rejects_empty_window() {
        assert_eq!(
            filter_window(&[], &FilterSpec::zscore(2.0)).unwrap_err(),
            FilterError::EmptyWindow
        );
    }

    #[test]
    fn percent_deviation_filters_relative_to_mean() {
        // Mean 115, band +-23: the 160 falls out, the rest stay.
        let w = [100.0, 102.0, 98.0, 160.0];
        let spec = FilterSpec {
            method: FilterMethod::PercentDeviation,
            threshold: 0.2,
        };
        let kept = filter_window(&w, &spec).unwrap();
        assert_eq!(kept, vec![100.0, 102.0, 98.0]);
    }

    #[test]
    fn aggregate_window_mean_median_and_gap() {
        let spec = AggregateSpec {
            statistic: Statistic::Mean,
            min_count: 2,
        };
        assert_eq!(aggregate_window(&[1.0, 2.0, 3.0], &spec), Some(2.0));
        assert_eq!(aggregate_window(&[7.0], &spec), None);

        let spec = AggregateSpec {
            statistic: Statistic::Median,
            min_count: 1,
        };
        assert_eq!(aggregate_window(&[1.0, 2.0, 100.0], &spec), Some(2.0));
        assert_eq!(aggregate_window(&[1.0, 2.0, 3.0, 100.0], &spec), Some(2.5));
    }

    fn one_channel_raw(n: usize) -> RawSeries {
        RawSeries::from_records(
            0,
            2,
            vec![ChannelId::working(Pollutant::O3)],
            (0..n).map(|i| (2 * i as i64, vec![Some(i as f64)])),
        )
        .unwrap()
    }

    #[test]
    fn sen_series_full_availability_matches_raw_means() {
        let raw = one_channel_raw(1800);
        let plan = SamplingPlan {
            t_s_s: 2,
            t_sen_s: 600,
            n_s: 300,
            t_r_s: 0,
            mode: SamplingMode::Consecutive,
        };
        let windows = simulate(&raw, &plan).unwrap();
        let series = to_sen_series(
            &raw,
            &windows,
            600,
            &FilterSpec::none(),
            &[true],
            &AggregateSpec::mean(1),
        )
        .unwrap();
        // Brute-force per-tick means over the raw records.
        for &(ts, value) in &series[0].points {
            let lo = (ts / 2) as usize;
            let hi = (lo + 300).min(1800);
            let expect: f64 = (lo..hi).map(|i| i as f64).sum::<f64>() / (hi - lo) as f64;
            assert!((value.unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn sen_series_gap_when_filter_drops_below_min_count() {
        let raw = RawSeries::from_records(
            0,
            2,
            vec![ChannelId::working(Pollutant::O3)],
            vec![
                (0, vec![Some(10.0)]),
                (2, vec![Some(10.0)]),
                (4, vec![Some(10.0)]),
                (6, vec![Some(10.0)]),
                (8, vec![Some(1000.0)]),
            ],
        )
        .unwrap();
        let plan = SamplingPlan {
            t_s_s: 2,
            t_sen_s: 3600,
            n_s: 5,
            t_r_s: 0,
            mode: SamplingMode::Consecutive,
        };
        let windows = simulate(&raw, &plan).unwrap();
        let series = to_sen_series(
            &raw,
            &windows,
            3600,
            &FilterSpec::zscore(1.5),
            &[true],
            &AggregateSpec {
                statistic: Statistic::Mean,
                min_count: 5,
            },
        )
        .unwrap();
        // The outlier is removed, 4 < min_count: gap.
        assert_eq!(series[0].points[0].1, None);
    }

    #[test]
    fn ref_series_hourly_mean_of_twelve() {
        // 12 values of 5-min data per hour.
        let sen = PeriodSeries::new(
            300,
            (0..24).map(|i| (i * 300, Some(i as f64))).collect(),
        )
        .unwrap();
        let hourly = to_ref_series(&sen, 3600, None, &AggregateSpec::mean(1)).unwrap();
        assert_eq!(hourly.points.len(), 2);
        assert_eq!(hourly.points[0], (0, Some(5.5)));
        assert_eq!(hourly.points[1], (3600, Some(17.5)));
    }

    #[test]
    fn ref_series_all_gap_hour_is_gap() {
        let mut points: Vec<(i64, Option<f64>)> = (0..12).map(|i| (i * 300, None)).collect();
        points.extend((12..24).map(|i| (i * 300, Some(1.0))));
        let sen = PeriodSeries::new(300, points).unwrap();
        let hourly = to_ref_series(&sen, 3600, None, &AggregateSpec::mean(1)).unwrap();
        assert_eq!(hourly.points[0], (0, None));
        assert_eq!(hourly.points[1], (3600, Some(1.0)));
    }

    #[test]
    fn ref_series_rejects_non_multiple_period() {
        let sen = PeriodSeries::new(700, vec![(0, Some(1.0))]).unwrap();
        assert!(matches!(
            to_ref_series(&sen, 3600, None, &AggregateSpec::mean(1)),
            Err(AggregateError::PeriodNotMultiple { .. })
        ));
    }

    #[test]
    fn ref_series_emits_gaps_for_absent_buckets() {
        let sen = PeriodSeries::new(
            3600,
            vec![(0, Some(1.0)), (3 * 3600, Some(2.0))],
        )
        .unwrap();
        let hourly = to_ref_series(&sen, 3600, None, &AggregateSpec::mean(1)).unwrap();
        assert_eq!(
            hourly.points,
            vec![
                (0, Some(1.0)),
                (3600, None),
                (2 * 3600, None),
                (3 * 3600, Some(2.0)),
            ]
        );
    }
}
