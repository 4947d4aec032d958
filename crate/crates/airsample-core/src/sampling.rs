//! Sampling plans, duty-cycle arithmetic and plan simulation by subsampling.
//!
//! A plan is the tuple `(T_s, T_sen, N_s, T_r, mode)`: every `T_sen`
//! seconds the node wakes the sensing board, waits the response time `T_r`,
//! takes `N_s` measures of `T_s` seconds each and goes back to sleep. The
//! duty cycle is `T_on / T_sen` with `T_on = T_r + N_s * T_s`. The uniform
//! mode instead spreads the `N_s` measures evenly over the period, which is
//! only feasible with zero warm-up.
//!
//! Plans are evaluated against recorded high-frequency data by
//! [`simulate`], which subsamples the raw stream without ever interpolating
//! or substituting records.

use alloc::vec::Vec;

use thiserror::Error;

use crate::series::RawSeries;
use crate::SECONDS_PER_HOUR;

/// How the `N_s` measures are placed within a sampling period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SamplingMode {
    /// Wake, wait `T_r`, take `N_s` back-to-back measures, sleep.
    Consecutive,
    /// Spread `N_s` measures evenly over `T_sen`; requires `T_r = 0`.
    Uniform,
}

impl SamplingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            SamplingMode::Consecutive => "consecutive",
            SamplingMode::Uniform => "uniform",
        }
    }

    pub fn parse(s: &str) -> Option<SamplingMode> {
        match s {
            "consecutive" => Some(SamplingMode::Consecutive),
            "uniform" => Some(SamplingMode::Uniform),
            _ => None,
        }
    }
}

/// A duty-cycled acquisition strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SamplingPlan {
    /// Time to take one sensor measure, seconds.
    pub t_s_s: i64,
    /// Sensing-node sampling period, seconds.
    pub t_sen_s: i64,
    /// Measures taken every period.
    pub n_s: u32,
    /// Sensor response (warm-up) time, seconds.
    pub t_r_s: i64,
    pub mode: SamplingMode,
}

impl SamplingPlan {
    /// Awake time per period, `T_on = T_r + N_s * T_s`.
    pub fn t_on_s(&self) -> i64 {
        self.t_r_s + self.n_s as i64 * self.t_s_s
    }
}

/// Duty cycle of a plan, clamped to 1 when the node never sleeps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DutyCycleResult {
    /// `min(1, T_on / T_sen)`.
    pub dc: f64,
    pub t_on_s: i64,
    /// True when `T_on >= T_sen`: the node is continuously powered.
    pub always_on: bool,
}

/// Duty cycle `DC = T_on / T_sen`.
///
/// A plan whose awake time covers the whole period is reported as
/// always-on with `dc = 1` rather than rejected; continuous operation is a
/// legitimate (baseline) strategy.
pub fn duty_cycle(plan: &SamplingPlan) -> DutyCycleResult {
    let t_on = plan.t_on_s();
    let always_on = t_on >= plan.t_sen_s;
    let dc = if always_on {
        1.0
    } else {
        t_on as f64 / plan.t_sen_s as f64
    };
    DutyCycleResult {
        dc,
        t_on_s: t_on,
        always_on,
    }
}

/// Average power of a two-state (on/sleep) node under a plan,
/// `dc * p_on + (1 - dc) * p_sleep`, in mW.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyProfile {
    pub p_on_mw: f64,
    pub p_sleep_mw: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("energy profile requires p_on >= p_sleep >= 0, got on={p_on_mw} sleep={p_sleep_mw}")]
pub struct EnergyProfileError {
    pub p_on_mw: f64,
    pub p_sleep_mw: f64,
}

impl EnergyProfile {
    pub fn new(p_on_mw: f64, p_sleep_mw: f64) -> Result<EnergyProfile, EnergyProfileError> {
        if !(p_on_mw >= p_sleep_mw && p_sleep_mw >= 0.0) {
            return Err(EnergyProfileError { p_on_mw, p_sleep_mw });
        }
        Ok(EnergyProfile { p_on_mw, p_sleep_mw })
    }
}

pub fn energy_estimate(plan: &SamplingPlan, profile: &EnergyProfile) -> f64 {
    let dc = duty_cycle(plan).dc;
    dc * profile.p_on_mw + (1.0 - dc) * profile.p_sleep_mw
}

/// Feasibility violations of a plan; returned as data, not errors.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanViolation {
    /// `T_on > T_sen`: the consecutive burst does not fit in the period.
    /// Such a plan degenerates to always-on operation.
    #[error("awake time {t_on_s}s exceeds sampling period {t_sen_s}s")]
    ConsecutiveOverrun { t_on_s: i64, t_sen_s: i64 },
    /// Uniform spacing is infeasible with a warm-up time: the node would
    /// have to stay powered on across the whole period.
    #[error("uniform mode requires zero warm-up, got T_r = {t_r_s}s")]
    UniformNeedsZeroWarmup { t_r_s: i64 },
    /// The sampling period must not exceed the reference period.
    #[error("sampling period {t_sen_s}s exceeds reference period {t_ref_s}s")]
    PeriodExceedsRef { t_sen_s: i64, t_ref_s: i64 },
    #[error("plan fields T_s, T_sen must be positive and N_s >= 1")]
    NonPositiveField,
}

/// Check a plan against its invariants and the reference period.
pub fn validate_plan(plan: &SamplingPlan, t_ref_s: i64) -> Vec<PlanViolation> {
    let mut violations = Vec::new();
    if plan.t_s_s <= 0 || plan.t_sen_s <= 0 || plan.n_s == 0 || plan.t_r_s < 0 {
        violations.push(PlanViolation::NonPositiveField);
        return violations;
    }
    if plan.mode == SamplingMode::Consecutive && plan.t_on_s() > plan.t_sen_s {
        violations.push(PlanViolation::ConsecutiveOverrun {
            t_on_s: plan.t_on_s(),
            t_sen_s: plan.t_sen_s,
        });
    }
    if plan.mode == SamplingMode::Uniform && plan.t_r_s > 0 {
        violations.push(PlanViolation::UniformNeedsZeroWarmup { t_r_s: plan.t_r_s });
    }
    if plan.t_sen_s > t_ref_s {
        violations.push(PlanViolation::PeriodExceedsRef {
            t_sen_s: plan.t_sen_s,
            t_ref_s,
        });
    }
    violations
}

/// The raw records a simulated node would acquire at one `T_sen` tick.
///
/// Samples are stored as indices into the raw series the window was drawn
/// from; raw gaps shrink the window, they are never filled in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleWindow {
    /// The `T_sen` grid point this window belongs to.
    pub tick_time: i64,
    /// Indices into the raw series, at most `N_s` of them.
    pub sample_indices: Vec<u32>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimulateError {
    #[error("raw series period {raw_s}s is coarser than the plan's measure time {t_s_s}s")]
    RawTooCoarse { raw_s: i64, t_s_s: i64 },
    #[error("raw series is empty")]
    EmptyRaw,
}

/// Subsample a raw series according to a plan.
///
/// Ticks are anchored at hour starts (the phase of the `T_sen` grid
/// relative to the hour is not observable in hourly-aggregated output).
/// Selection snaps to the first raw record at or after each requested
/// offset; an always-on plan samples with zero effective warm-up since the
/// board never powers down.
pub fn simulate(raw: &RawSeries, plan: &SamplingPlan) -> Result<Vec<SampleWindow>, SimulateError> {
    if raw.base_period_s() > plan.t_s_s {
        return Err(SimulateError::RawTooCoarse {
            raw_s: raw.base_period_s(),
            t_s_s: plan.t_s_s,
        });
    }
    if raw.is_empty() {
        return Err(SimulateError::EmptyRaw);
    }
    let first_ts = raw.timestamp(0);
    let last_ts = raw.timestamp(raw.len() - 1);
    let anchor = first_ts.div_euclid(SECONDS_PER_HOUR) * SECONDS_PER_HOUR;
    let always_on = plan.t_on_s() >= plan.t_sen_s;

    let mut windows = Vec::new();
    let mut tick = anchor;
    while tick <= last_ts {
        let indices = match plan.mode {
            SamplingMode::Consecutive => {
                let warmup = if always_on { 0 } else { plan.t_r_s };
                let lo = tick + warmup;
                let hi = lo + plan.n_s as i64 * plan.t_s_s;
                collect_range(raw, lo, hi, plan.n_s as usize)
            }
            SamplingMode::Uniform => {
                // One record per even slot [j*T_sen/N_s, (j+1)*T_sen/N_s).
                let mut indices = Vec::new();
                for j in 0..plan.n_s as i64 {
                    let lo = tick + j * plan.t_sen_s / plan.n_s as i64;
                    let hi = tick + (j + 1) * plan.t_sen_s / plan.n_s as i64;
                    indices.extend(collect_range(raw, lo, hi, 1));
                }
                indices
            }
        };
        windows.push(SampleWindow {
            tick_time: tick,
            sample_indices: indices,
        });
        tick += plan.t_sen_s;
    }
    Ok(windows)
}

fn collect_range(raw: &RawSeries, lo: i64, hi: i64, max: usize) -> Vec<u32> {
    let start = raw.first_at_or_after(lo);
    let mut out = Vec::new();
    for i in start..raw.len() {
        if out.len() == max || raw.timestamp(i) >= hi {
            break;
        }
        out.push(i as u32);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{ChannelId, Pollutant};
    use alloc::vec;

    fn plan(t_sen: i64, n_s: u32, t_r: i64, mode: SamplingMode) -> SamplingPlan {
        SamplingPlan {
            t_s_s: 2,
            t_sen_s: t_sen,
            n_s,
            t_r_s: t_r,
            mode,
        }
    }

    fn raw_grid(start: i64, n: usize) -> RawSeries {
        let channels = vec![ChannelId::working(Pollutant::O3)];
        RawSeries::from_records(
            start,
            2,
            channels,
            (0..n).map(|i| (start + 2 * i as i64, vec![Some(i as f64)])),
        )
        .unwrap()
    }

    #[test]
    fn duty_cycle_reported_classes() {
        let dc = duty_cycle(&plan(1200, 1, 120, SamplingMode::Consecutive));
        assert!((dc.dc - 0.1017).abs() < 0.0005);
        assert!(!dc.always_on);

        let dc = duty_cycle(&plan(3600, 1, 120, SamplingMode::Consecutive));
        assert!((dc.dc - 0.0339).abs() < 0.0005);

        let dc = duty_cycle(&plan(2, 1, 120, SamplingMode::Consecutive));
        assert_eq!(dc.dc, 1.0);
        assert!(dc.always_on);
        assert_eq!(dc.t_on_s, 122);

        let dc = duty_cycle(&plan(60, 5, 0, SamplingMode::Consecutive));
        assert!((dc.dc - 10.0 / 60.0).abs() < 1e-12);
    }

    #[test]
    fn energy_estimate_is_convex_combination() {
        let on = EnergyProfile::new(100.0, 1.0).unwrap();
        assert_eq!(energy_estimate(&plan(2, 1, 120, SamplingMode::Consecutive), &on), 100.0);

        let p = EnergyProfile::new(100.0, 0.0).unwrap();
        let mw = energy_estimate(&plan(1200, 1, 118, SamplingMode::Consecutive), &p);
        assert!((mw - 10.0).abs() < 1e-12);

        // dc = 0.034: 0.034*100 + 0.966*1 = 4.366
        let p = EnergyProfile::new(100.0, 1.0).unwrap();
        let plan34 = plan(3600, 1, 120, SamplingMode::Consecutive);
        let dc = duty_cycle(&plan34).dc;
        let mw = energy_estimate(&plan34, &p);
        assert!((mw - (dc * 100.0 + (1.0 - dc))).abs() < 1e-12);
        assert!((mw - 4.37).abs() < 0.02);
    }

    #[test]
    fn energy_profile_rejects_inverted_states() {
        assert!(EnergyProfile::new(1.0, 2.0).is_err());
        assert!(EnergyProfile::new(1.0, -0.1).is_err());
    }

    #[test]
    fn validate_plan_violations() {
        assert!(validate_plan(&plan(1200, 1, 120, SamplingMode::Consecutive), 3600).is_empty());

        let v = validate_plan(&plan(1200, 1, 120, SamplingMode::Uniform), 3600);
        assert!(matches!(v[0], PlanViolation::UniformNeedsZeroWarmup { .. }));

        let v = validate_plan(&plan(7200, 1, 120, SamplingMode::Consecutive), 3600);
        assert!(v.iter().any(|x| matches!(x, PlanViolation::PeriodExceedsRef { .. })));

        let v = validate_plan(&plan(2, 1, 120, SamplingMode::Consecutive), 3600);
        assert!(matches!(v[0], PlanViolation::ConsecutiveOverrun { .. }));
    }

    #[test]
    fn simulate_consecutive_offsets() {
        // T_sen = 600 s, N_s = 5, T_r = 120 s on a 2 s grid: records at
        // offsets 120..=128 after each tick.
        let raw = raw_grid(0, 1800); // one hour
        let windows = simulate(&raw, &plan(600, 5, 120, SamplingMode::Consecutive)).unwrap();
        assert_eq!(windows.len(), 6);
        let w = &windows[0];
        let offsets: Vec<i64> = w.sample_indices.iter().map(|&i| raw.timestamp(i as usize)).collect();
        assert_eq!(offsets, vec![120, 122, 124, 126, 128]);
        let w = &windows[2];
        let offsets: Vec<i64> = w.sample_indices.iter().map(|&i| raw.timestamp(i as usize)).collect();
        assert_eq!(offsets, vec![1320, 1322, 1324, 1326, 1328]);
    }

    #[test]
    fn simulate_uniform_offsets() {
        let raw = raw_grid(0, 1800);
        let windows = simulate(&raw, &plan(3600, 5, 0, SamplingMode::Uniform)).unwrap();
        let w = &windows[0];
        let offsets: Vec<i64> = w.sample_indices.iter().map(|&i| raw.timestamp(i as usize)).collect();
        assert_eq!(offsets, vec![0, 720, 1440, 2160, 2880]);
    }

    #[test]
    fn simulate_identity_baseline() {
        // T_sen = T_s, N_s = 1, T_r = 0: windows reproduce the raw series.
        let raw = raw_grid(0, 100);
        let windows = simulate(&raw, &plan(2, 1, 0, SamplingMode::Consecutive)).unwrap();
        let collected: Vec<u32> = windows.iter().flat_map(|w| w.sample_indices.clone()).collect();
        assert_eq!(collected, (0..100).collect::<Vec<u32>>());
    }

    #[test]
    fn simulate_shrinks_windows_over_gaps() {
        let channels = vec![ChannelId::working(Pollutant::O3)];
        // Records at 120 and 122 only; the burst wants 5.
        let raw = RawSeries::from_records(
            0,
            2,
            channels,
            vec![(120, vec![Some(1.0)]), (122, vec![Some(2.0)])],
        )
        .unwrap();
        let windows = simulate(&raw, &plan(600, 5, 120, SamplingMode::Consecutive)).unwrap();
        assert_eq!(windows[0].sample_indices.len(), 2);
    }

    #[test]
    fn simulate_rejects_coarse_raw() {
        let channels = vec![ChannelId::working(Pollutant::O3)];
        let raw = RawSeries::from_records(0, 60, channels, vec![(0, vec![Some(1.0)])]).unwrap();
        let err = simulate(&raw, &plan(600, 5, 120, SamplingMode::Consecutive)).unwrap_err();
        assert!(matches!(err, SimulateError::RawTooCoarse { .. }));
    }

    #[test]
    fn simulate_always_on_ignores_warmup() {
        let raw = raw_grid(0, 100);
        // T_on = 122 > T_sen = 2: continuous operation.
        let windows = simulate(&raw, &plan(2, 1, 120, SamplingMode::Consecutive)).unwrap();
        let collected: Vec<u32> = windows.iter().flat_map(|w| w.sample_indices.clone()).collect();
        assert_eq!(collected, (0..100).collect::<Vec<u32>>());
    }
}
