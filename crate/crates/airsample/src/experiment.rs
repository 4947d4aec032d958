//! End-to-end experiment orchestration: feature derivation, the per-plan
//! pipeline (simulate, filter, aggregate, align, split, fit, cross-validate)
//! and the plan-grid sweep with per-seed aggregation.
//!
//! The pipeline up to the aligned dataset is seed-independent, so each
//! (plan, target) pair runs it once and then evaluates every seed on the
//! same dataset. Plan tasks execute in parallel; the report is assembled
//! in grid order, so output is independent of scheduling.

use std::collections::BTreeMap;
use std::fmt::Display;

use airsample_core::calibration::{fit_mlr, forward_select, kfold_cv, predict, r2, rmse,
    CalibrationModel, CvSummary, SelectionStep};
use airsample_core::preprocess::{to_ref_series, to_sen_series, FilterSpec};
use airsample_core::sampling::{duty_cycle, energy_estimate, simulate, validate_plan,
    PlanViolation, SamplingPlan};
use airsample_core::series::{align, electrode_signal, AggregatedDataset, ChannelId, ChannelKind,
    PeriodSeries, Pollutant, RawSeries, ReferenceSeries};
use airsample_core::SECONDS_PER_HOUR;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Config, ConfigError, ElectrodePolicy, FilterChannels, FilterScope};

/// Whether a failure is a data/validation problem or a numerical one;
/// drives the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Data,
    Numerical,
}

/// A pipeline failure with the stage name attached.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
    pub kind: ErrorKind,
}

fn data_err(stage: &'static str, e: impl Display) -> PipelineError {
    PipelineError {
        stage,
        message: e.to_string(),
        kind: ErrorKind::Data,
    }
}

fn numerical_err(stage: &'static str, e: impl Display) -> PipelineError {
    PipelineError {
        stage,
        message: e.to_string(),
        kind: ErrorKind::Numerical,
    }
}

impl From<ConfigError> for PipelineError {
    fn from(e: ConfigError) -> Self {
        data_err("config", e)
    }
}

/// Turn electrode pairs into model features according to the policy.
///
/// Under `Subtract`, each WE channel is replaced in place by the signal
/// `S = WE - AE` of its pollutant and the AE channel is dropped; other
/// channels pass through. Under `Separate` the series is unchanged.
pub fn derive_features(
    raw: &RawSeries,
    policy: ElectrodePolicy,
) -> Result<RawSeries, PipelineError> {
    if policy == ElectrodePolicy::Separate {
        return Ok(raw.clone());
    }
    // (output channel, source indices): signal channels read two columns.
    enum Source {
        Copy(usize),
        Subtract(usize, usize),
    }
    let mut outputs: Vec<(ChannelId, Source)> = Vec::new();
    for (i, c) in raw.channels().iter().enumerate() {
        match c.kind() {
            ChannelKind::GasWe => {
                let p = c.pollutant().expect("gas channels carry a pollutant");
                let ae = raw
                    .channel_index(&ChannelId::auxiliary(p))
                    .ok_or_else(|| {
                        data_err(
                            "derive_features",
                            format!(
                                "electrode_policy=subtract needs channel {}_ae to pair with {}",
                                p.tag(),
                                c.name()
                            ),
                        )
                    })?;
                outputs.push((ChannelId::signal(p), Source::Subtract(i, ae)));
            }
            ChannelKind::GasAe => {}
            _ => outputs.push((*c, Source::Copy(i))),
        }
    }
    let channels: Vec<ChannelId> = outputs.iter().map(|(c, _)| *c).collect();
    let mut out = RawSeries::new(raw.start_time(), raw.base_period_s(), channels)
        .map_err(|e| data_err("derive_features", e))?;
    let mut values = vec![None; outputs.len()];
    for i in 0..raw.len() {
        let record = raw.record(i);
        for (j, (_, source)) in outputs.iter().enumerate() {
            values[j] = match source {
                Source::Copy(c) => record[*c],
                Source::Subtract(we, ae) => electrode_signal(record[*we], record[*ae]),
            };
        }
        out.push_record(raw.timestamp(i), &values)
            .map_err(|e| data_err("derive_features", e))?;
    }
    Ok(out)
}

/// Deterministic train/test split of the usable rows: shuffle by seed,
/// first `ceil(fraction * N)` rows train, the rest test. For a fixed seed
/// a larger fraction yields a superset train set (prefix property).
pub fn split_indices(usable: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = usable.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((fraction * order.len() as f64).ceil() as usize).min(order.len());
    let test = order.split_off(n_train);
    (order, test)
}

/// Seed-independent part of a plan run: the aligned hourly dataset and
/// the retention fraction.
pub fn build_dataset(
    raw_features: &RawSeries,
    reference: &ReferenceSeries,
    plan: &SamplingPlan,
    config: &Config,
    features: &[String],
) -> Result<(AggregatedDataset, f64), PipelineError> {
    let violations = validate_plan(plan, reference.period_s());
    for v in &violations {
        // An overrunning consecutive burst degenerates to always-on
        // operation, a legitimate baseline; everything else is fatal.
        if !matches!(v, PlanViolation::ConsecutiveOverrun { .. }) {
            return Err(data_err("validate", v));
        }
    }

    let windows = simulate(raw_features, plan).map_err(|e| data_err("simulate", e))?;

    let filter = config.filter_spec()?;
    let scope = config.filter_scope()?;
    let mask: Vec<bool> = raw_features
        .channels()
        .iter()
        .map(|c| match config.filter_channels_policy() {
            Ok(FilterChannels::Gas) => c.is_gas(),
            Ok(FilterChannels::All) => true,
            _ => false,
        })
        .collect();
    let window_filter = if scope == FilterScope::Window {
        filter
    } else {
        FilterSpec::none()
    };
    let agg_sen = config.aggregate_spec(plan.n_s as usize)?;
    let sen_series = to_sen_series(
        raw_features,
        &windows,
        plan.t_sen_s,
        &window_filter,
        &mask,
        &agg_sen,
    )
    .map_err(|e| data_err("aggregate_sen", e))?;

    let expected_per_hour = (SECONDS_PER_HOUR / plan.t_sen_s).max(1) as usize;
    let agg_ref = config.aggregate_spec(expected_per_hour)?;
    let mut hourly: Vec<(String, PeriodSeries)> = Vec::with_capacity(sen_series.len());
    for (c, sen) in raw_features.channels().iter().zip(sen_series) {
        let bucket_filter = if scope == FilterScope::RefBucket && mask[raw_features.channel_index(c).unwrap()] {
            Some(&filter)
        } else {
            None
        };
        let series = to_ref_series(&sen, reference.period_s(), bucket_filter, &agg_ref)
            .map_err(|e| data_err("aggregate_ref", e))?;
        hourly.push((c.name(), series));
    }

    let selected: Vec<(String, PeriodSeries)> = features
        .iter()
        .map(|name| {
            hourly
                .iter()
                .find(|(n, _)| n == name)
                .cloned()
                .ok_or_else(|| {
                    let available: Vec<&str> = hourly.iter().map(|(n, _)| n.as_str()).collect();
                    data_err(
                        "align",
                        format!(
                            "feature '{name}' is not a derived channel (available: {})",
                            available.join(", ")
                        ),
                    )
                })
        })
        .collect::<Result<_, _>>()?;

    let dataset = align(&selected, reference).map_err(|e| data_err("align", e))?;
    let available = reference.available_len();
    let retention = if available == 0 {
        0.0
    } else {
        dataset.usable_len() as f64 / available as f64
    };
    Ok((dataset, retention))
}

/// Per-seed evaluation on an aligned dataset: split, fit, test metrics and
/// k-fold CV over all usable rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedEval {
    pub model: CalibrationModel,
    pub cv: CvSummary,
    pub test_r2: f64,
    pub test_rmse: f64,
    pub train_rows: usize,
    pub test_rows: usize,
}

pub fn evaluate_seed(
    dataset: &AggregatedDataset,
    config: &Config,
    features: &[String],
    target: Pollutant,
    seed: u64,
) -> Result<SeedEval, PipelineError> {
    let usable = dataset.usable_indices();
    if usable.len() < 8 {
        return Err(data_err(
            "split",
            format!("need at least 8 usable rows, got {}", usable.len()),
        ));
    }
    let (train, test) = split_indices(&usable, config.evaluation.split_fraction, seed);
    if test.is_empty() {
        return Err(data_err("split", "test set is empty"));
    }

    let (x_train, y_train) = dataset
        .design(features, &train)
        .map_err(|e| data_err("fit", e))?;
    let model = fit_mlr(features, &x_train, &y_train, target)
        .map_err(|e| numerical_err("fit", e))?;

    let (x_test, y_test) = dataset
        .design(features, &test)
        .map_err(|e| data_err("evaluate", e))?;
    let y_hat = predict(&model, features, &x_test).map_err(|e| numerical_err("evaluate", e))?;
    let test_r2 = r2(&y_test, &y_hat).map_err(|e| numerical_err("evaluate", e))?;
    let test_rmse = rmse(&y_test, &y_hat).map_err(|e| numerical_err("evaluate", e))?;

    let cv = kfold_cv(dataset, config.evaluation.cv_k, features, target, seed)
        .map_err(|e| numerical_err("cross_validate", e))?;

    Ok(SeedEval {
        model,
        cv,
        test_r2,
        test_rmse,
        train_rows: train.len(),
        test_rows: test.len(),
    })
}

/// One sweep row: a plan evaluated for one target, aggregated over seeds.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepRow {
    pub target: String,
    pub t_sen_s: i64,
    pub n_s: u32,
    pub t_r_s: i64,
    pub mode: String,
    pub dc: f64,
    pub always_on: bool,
    pub avg_power_mw: f64,
    /// Failure reason when the pipeline could not produce metrics.
    pub error: Option<String>,
    pub cv_r2_mean: Option<f64>,
    pub cv_r2_lo: Option<f64>,
    pub cv_r2_hi: Option<f64>,
    pub test_r2: Option<f64>,
    pub test_rmse: Option<f64>,
    pub usable_rows: Option<usize>,
    pub retention: Option<f64>,
    pub per_seed: Vec<SeedOutcome>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeedOutcome {
    pub seed: u64,
    pub cv_mean_r2: f64,
    pub cv_ci95: (f64, f64),
    pub test_r2: f64,
    pub test_rmse: f64,
}

/// The full sweep outcome: rows sorted by duty cycle, with the effective
/// configuration echoed alongside.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepReport {
    pub config_echo: String,
    pub seeds: Vec<u64>,
    pub rows: Vec<SweepRow>,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Normal-approximation mean and 95% interval over per-seed statistics.
fn mean_ci(values: &[f64]) -> (f64, f64, f64) {
    let m = mean(values);
    if values.len() < 2 {
        return (m, m, m);
    }
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    let sd = (ss / (values.len() as f64 - 1.0)).sqrt();
    let half = 1.96 * sd / (values.len() as f64).sqrt();
    (m, m - half, m + half)
}

fn run_task(
    raw_features: &RawSeries,
    reference: &ReferenceSeries,
    plan: &SamplingPlan,
    config: &Config,
    features: &[String],
    target: Pollutant,
    seeds: &[u64],
) -> SweepRow {
    let cycle = duty_cycle(plan);
    let power = config
        .energy_profile()
        .map(|p| energy_estimate(plan, &p))
        .unwrap_or(f64::NAN);
    let mut row = SweepRow {
        target: target.as_str().to_string(),
        t_sen_s: plan.t_sen_s,
        n_s: plan.n_s,
        t_r_s: plan.t_r_s,
        mode: plan.mode.as_str().to_string(),
        dc: cycle.dc,
        always_on: cycle.always_on,
        avg_power_mw: power,
        error: None,
        cv_r2_mean: None,
        cv_r2_lo: None,
        cv_r2_hi: None,
        test_r2: None,
        test_rmse: None,
        usable_rows: None,
        retention: None,
        per_seed: Vec::new(),
    };

    let (dataset, retention) = match build_dataset(raw_features, reference, plan, config, features)
    {
        Ok(v) => v,
        Err(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    row.usable_rows = Some(dataset.usable_len());
    row.retention = Some(retention);

    for &seed in seeds {
        match evaluate_seed(&dataset, config, features, target, seed) {
            Ok(eval) => row.per_seed.push(SeedOutcome {
                seed,
                cv_mean_r2: eval.cv.mean_r2,
                cv_ci95: eval.cv.ci95,
                test_r2: eval.test_r2,
                test_rmse: eval.test_rmse,
            }),
            Err(e) => {
                row.error = Some(e.to_string());
                row.per_seed.clear();
                return row;
            }
        }
    }
    let cv_means: Vec<f64> = row.per_seed.iter().map(|s| s.cv_mean_r2).collect();
    let (m, lo, hi) = mean_ci(&cv_means);
    row.cv_r2_mean = Some(m);
    row.cv_r2_lo = Some(lo);
    row.cv_r2_hi = Some(hi);
    row.test_r2 = Some(mean(&row.per_seed.iter().map(|s| s.test_r2).collect::<Vec<_>>()));
    row.test_rmse = Some(mean(&row.per_seed.iter().map(|s| s.test_rmse).collect::<Vec<_>>()));
    row
}

/// Resolve the feature list: the configured set, or every derived channel.
pub fn feature_list(config: &Config, raw_features: &RawSeries) -> Vec<String> {
    if !config.features.selected.is_empty() {
        return config.features.selected.clone();
    }
    raw_features.channels().iter().map(|c| c.name()).collect()
}

/// Run the whole plan grid for every target and seed.
///
/// Individual plan failures become rows with an `error` field; the sweep
/// itself only fails on configuration problems or a missing reference.
pub fn sweep(
    config: &Config,
    raw: &RawSeries,
    references: &BTreeMap<Pollutant, ReferenceSeries>,
) -> Result<SweepReport, PipelineError> {
    let raw_features = derive_features(raw, config.electrode_policy()?)?;
    let features = feature_list(config, &raw_features);
    let plans = config.plan_grid()?;
    let targets = config.targets()?;
    let seeds = config.seeds();

    let mut tasks: Vec<(SamplingPlan, Pollutant)> = Vec::new();
    for target in &targets {
        for plan in &plans {
            tasks.push((*plan, *target));
        }
    }
    for (_, target) in &tasks {
        if !references.contains_key(target) {
            return Err(data_err(
                "load",
                format!("no reference series for target {}", target.as_str()),
            ));
        }
    }

    let mut rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|(plan, target)| {
            run_task(
                &raw_features,
                &references[target],
                plan,
                config,
                &features,
                *target,
                &seeds,
            )
        })
        .collect();
    rows.sort_by(|a, b| {
        a.dc.partial_cmp(&b.dc)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.t_sen_s.cmp(&b.t_sen_s))
            .then(a.n_s.cmp(&b.n_s))
            .then(a.t_r_s.cmp(&b.t_r_s))
            .then(a.mode.cmp(&b.mode))
            .then(a.target.cmp(&b.target))
    });
    Ok(SweepReport {
        config_echo: config.echo(),
        seeds,
        rows,
    })
}

/// A single-plan calibration: the first plan of the grid against every
/// target, using the first seed.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome {
    pub target: Pollutant,
    pub plan: SamplingPlan,
    pub dc: f64,
    pub retention: f64,
    pub usable_rows: usize,
    pub eval: SeedEval,
}

pub fn calibrate(
    config: &Config,
    raw: &RawSeries,
    references: &BTreeMap<Pollutant, ReferenceSeries>,
) -> Result<Vec<CalibrationOutcome>, PipelineError> {
    let raw_features = derive_features(raw, config.electrode_policy()?)?;
    let features = feature_list(config, &raw_features);
    let plan = *config
        .plan_grid()?
        .first()
        .ok_or_else(|| data_err("config", "plan grid is empty"))?;
    let seed = *config.seeds().first().expect("seeds are never empty");
    let mut outcomes = Vec::new();
    for target in config.targets()? {
        let reference = references.get(&target).ok_or_else(|| {
            data_err(
                "load",
                format!("no reference series for target {}", target.as_str()),
            )
        })?;
        let (dataset, retention) = build_dataset(&raw_features, reference, &plan, config, &features)?;
        let eval = evaluate_seed(&dataset, config, &features, target, seed)?;
        outcomes.push(CalibrationOutcome {
            target,
            plan,
            dc: duty_cycle(&plan).dc,
            retention,
            usable_rows: dataset.usable_len(),
            eval,
        });
    }
    Ok(outcomes)
}

/// Forward feature selection on the first plan of the grid and the first
/// target, using the first seed's fold assignment.
pub fn select_features(
    config: &Config,
    raw: &RawSeries,
    references: &BTreeMap<Pollutant, ReferenceSeries>,
) -> Result<(Pollutant, Vec<SelectionStep>), PipelineError> {
    let raw_features = derive_features(raw, config.electrode_policy()?)?;
    let all_channels: Vec<String> = raw_features.channels().iter().map(|c| c.name()).collect();
    let always_in = config.features.always_in.clone();
    let candidates: Vec<String> = if config.features.candidates.is_empty() {
        all_channels
            .iter()
            .filter(|c| !always_in.contains(c))
            .cloned()
            .collect()
    } else {
        config.features.candidates.clone()
    };
    // The aligned dataset must carry every feature selection can touch.
    let mut universe = always_in.clone();
    universe.extend(candidates.iter().cloned());

    let plan = *config
        .plan_grid()?
        .first()
        .ok_or_else(|| data_err("config", "plan grid is empty"))?;
    let target = *config.targets()?.first().expect("validated nonempty");
    let seed = *config.seeds().first().expect("seeds are never empty");
    let reference = references.get(&target).ok_or_else(|| {
        data_err(
            "load",
            format!("no reference series for target {}", target.as_str()),
        )
    })?;
    let (dataset, _) = build_dataset(&raw_features, reference, &plan, config, &universe)?;
    let steps = forward_select(
        &dataset,
        &always_in,
        &candidates,
        config.evaluation.cv_k,
        target,
        seed,
    )
    .map_err(|e| numerical_err("select", e))?;
    Ok((target, steps))
}
