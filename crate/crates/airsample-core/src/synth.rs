//! Synthetic raw and reference series with known ground truth.
//!
//! The generator is the desk-scale oracle for the whole pipeline: latent
//! per-channel signals (sums of sinusoids, held constant over a
//! configurable step) are mixed by an invertible linear map into noise-free
//! channel values; the target pollutant is an exact linear function of
//! those channel values, and the reference series is its exact hourly
//! mean. Raw records add white noise, injected outliers on electrode
//! channels and dropped records, all deterministic from the seed.
//!
//! With zero noise and no gaps the calibration pipeline must recover the
//! generating coefficients exactly, whatever the sampling plan, because
//! the latent signals do not vary within a step.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::series::{ChannelId, Pollutant, RawSeries, ReferenceSeries};
use crate::SECONDS_PER_HOUR;

/// One sinusoid of a latent signal: `amplitude * sin(2*pi*t/period + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinusoidComponent {
    pub amplitude: f64,
    pub period_s: f64,
    pub phase: f64,
}

/// Latent signal behind one channel, before mixing and noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub id: ChannelId,
    pub offset: f64,
    pub components: Vec<SinusoidComponent>,
    /// Per-sample white noise standard deviation.
    pub noise_sigma: f64,
}

/// Full description of a synthetic scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    /// Must be hour-aligned.
    pub start_time: i64,
    pub duration_days: u32,
    /// Raw acquisition period `T_s`.
    pub t_s_s: i64,
    /// Latent signals are held constant over this step; must divide one
    /// hour. A step of 3600 makes every subsample of an hour exactly
    /// representative; smaller steps create within-hour variation.
    pub latent_step_s: i64,
    pub channels: Vec<ChannelSpec>,
    /// Row-major `K x K` map from latents to channels; `None` is identity.
    pub mixing: Option<Vec<f64>>,
    pub target: Pollutant,
    /// Generating coefficients on the noise-free channel values,
    /// intercept first (`K + 1` entries).
    pub beta: Vec<f64>,
    /// Probability that a raw gas-channel reading receives an additive
    /// impulse of size `outlier_magnitude` (random sign).
    pub outlier_rate: f64,
    pub outlier_magnitude: f64,
    /// Probability that a whole raw record is dropped.
    pub gap_rate: f64,
    pub seed: u64,
}

/// What the generator knows and the pipeline must recover.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    /// The generating coefficient vector, intercept first.
    pub beta: Vec<f64>,
    /// Exact hourly means of the noise-free channel values, one row per
    /// hour, `K` values each.
    pub hourly_channels: Vec<(i64, Vec<f64>)>,
    /// Exact hourly target values (the reference series without gaps).
    pub hourly_target: Vec<(i64, f64)>,
    /// Frobenius-based condition estimate of the latent-to-channel map.
    pub mixing_condition: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("start time {0} is not hour-aligned")]
    UnalignedStart(i64),
    #[error("latent step {0}s must be positive and divide one hour")]
    BadLatentStep(i64),
    #[error("beta must have {expected} entries (intercept + one per channel), got {got}")]
    BadBetaLength { expected: usize, got: usize },
    #[error("mixing matrix must be {expected}x{expected}, got {got} entries")]
    BadMixingShape { expected: usize, got: usize },
    #[error("mixing matrix is singular")]
    SingularMixing,
    #[error("noise sigma must be >= 0, rates must lie in [0, 1)")]
    BadNoiseOrRates,
    #[error("scenario needs at least one channel and one day")]
    Degenerate,
}

impl ScenarioSpec {
    fn validate(&self) -> Result<(), ScenarioError> {
        if self.channels.is_empty() || self.duration_days == 0 || self.t_s_s <= 0 {
            return Err(ScenarioError::Degenerate);
        }
        if self.start_time.rem_euclid(SECONDS_PER_HOUR) != 0 {
            return Err(ScenarioError::UnalignedStart(self.start_time));
        }
        if self.latent_step_s <= 0 || SECONDS_PER_HOUR % self.latent_step_s != 0 {
            return Err(ScenarioError::BadLatentStep(self.latent_step_s));
        }
        let k = self.channels.len();
        if self.beta.len() != k + 1 {
            return Err(ScenarioError::BadBetaLength {
                expected: k + 1,
                got: self.beta.len(),
            });
        }
        if let Some(m) = &self.mixing {
            if m.len() != k * k {
                return Err(ScenarioError::BadMixingShape {
                    expected: k,
                    got: m.len(),
                });
            }
        }
        let rates_ok = (0.0..1.0).contains(&self.outlier_rate)
            && (0.0..1.0).contains(&self.gap_rate)
            && self.outlier_magnitude >= 0.0
            && self.channels.iter().all(|c| c.noise_sigma >= 0.0);
        if !rates_ok {
            return Err(ScenarioError::BadNoiseOrRates);
        }
        Ok(())
    }

    fn latent_at(&self, channel: usize, t_s: f64) -> f64 {
        let spec = &self.channels[channel];
        let mut v = spec.offset;
        for c in &spec.components {
            v += c.amplitude * libm::sin(core::f64::consts::TAU * t_s / c.period_s + c.phase);
        }
        v
    }
}

/// Generate the raw stream, the reference series and the ground truth.
pub fn generate(
    spec: &ScenarioSpec,
) -> Result<(RawSeries, ReferenceSeries, GroundTruth), ScenarioError> {
    spec.validate()?;
    let k = spec.channels.len();
    let duration_s = spec.duration_days as i64 * 24 * SECONDS_PER_HOUR;
    let n_steps = (duration_s / spec.latent_step_s) as usize;
    let steps_per_hour = (SECONDS_PER_HOUR / spec.latent_step_s) as usize;

    let mixing = spec
        .mixing
        .clone()
        .unwrap_or_else(|| identity(k));
    let condition = frobenius_condition(&mixing, k).ok_or(ScenarioError::SingularMixing)?;

    // Noise-free channel values per latent step: c = A * s.
    let mut channel_steps = vec![0.0f64; n_steps * k];
    for step in 0..n_steps {
        let t = (step as i64 * spec.latent_step_s) as f64;
        for j in 0..k {
            let mut v = 0.0;
            for l in 0..k {
                v += mixing[j * k + l] * spec.latent_at(l, t);
            }
            channel_steps[step * k + j] = v;
        }
    }

    // Exact hourly means of channels and target.
    let n_hours = (spec.duration_days as usize) * 24;
    let mut hourly_channels = Vec::with_capacity(n_hours);
    let mut hourly_target = Vec::with_capacity(n_hours);
    for hour in 0..n_hours {
        let ts = spec.start_time + hour as i64 * SECONDS_PER_HOUR;
        let base = hour * steps_per_hour;
        let mut means = vec![0.0f64; k];
        for step in base..base + steps_per_hour {
            for j in 0..k {
                means[j] += channel_steps[step * k + j];
            }
        }
        for m in means.iter_mut() {
            *m /= steps_per_hour as f64;
        }
        let mut y = spec.beta[0];
        for j in 0..k {
            y += spec.beta[j + 1] * means[j];
        }
        hourly_channels.push((ts, means));
        hourly_target.push((ts, y));
    }

    let reference = ReferenceSeries::new(
        spec.target,
        SECONDS_PER_HOUR,
        hourly_target.iter().map(|&(ts, y)| (ts, Some(y))).collect(),
    )
    .expect("hour-aligned by construction");

    // Raw stream: held channel value + noise + outliers, with dropped
    // records, all from one deterministic stream.
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let channels: Vec<ChannelId> = spec.channels.iter().map(|c| c.id).collect();
    let mut raw =
        RawSeries::new(spec.start_time, spec.t_s_s, channels).expect("validated base period");
    let n_ticks = (duration_s / spec.t_s_s) as usize;
    let mut record = vec![None; k];
    for tick in 0..n_ticks {
        let offset = tick as i64 * spec.t_s_s;
        let dropped = spec.gap_rate > 0.0 && rng.random::<f64>() < spec.gap_rate;
        if dropped {
            continue;
        }
        let step = (offset / spec.latent_step_s) as usize;
        for j in 0..k {
            let mut v = channel_steps[step * k + j];
            let sigma = spec.channels[j].noise_sigma;
            if sigma > 0.0 {
                v += sigma * standard_normal(&mut rng);
            }
            if spec.outlier_rate > 0.0
                && spec.channels[j].id.is_gas()
                && rng.random::<f64>() < spec.outlier_rate
            {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                v += sign * spec.outlier_magnitude;
            }
            record[j] = Some(v);
        }
        raw.push_record(spec.start_time + offset, &record)
            .expect("generated records are on-grid and ordered");
    }

    Ok((
        raw,
        reference,
        GroundTruth {
            beta: spec.beta.clone(),
            hourly_channels,
            hourly_target,
            mixing_condition: condition,
        },
    ))
}

fn identity(k: usize) -> Vec<f64> {
    let mut m = vec![0.0; k * k];
    for i in 0..k {
        m[i * k + i] = 1.0;
    }
    m
}

/// `||A||_F * ||A^-1||_F`, an upper-bound estimate of the 2-norm
/// condition number. `None` when the matrix is singular.
fn frobenius_condition(m: &[f64], k: usize) -> Option<f64> {
    let inv = invert(m, k)?;
    let nf = |a: &[f64]| libm::sqrt(a.iter().map(|v| v * v).sum::<f64>());
    Some(nf(m) * nf(&inv))
}

fn invert(m: &[f64], k: usize) -> Option<Vec<f64>> {
    // Gauss-Jordan with partial pivoting on [M | I].
    let mut a = m.to_vec();
    let mut inv = identity(k);
    for col in 0..k {
        let pivot = (col..k).max_by(|&i, &j| {
            libm::fabs(a[i * k + col])
                .partial_cmp(&libm::fabs(a[j * k + col]))
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if libm::fabs(a[pivot * k + col]) < 1e-12 {
            return None;
        }
        if pivot != col {
            for j in 0..k {
                a.swap(col * k + j, pivot * k + j);
                inv.swap(col * k + j, pivot * k + j);
            }
        }
        let d = a[col * k + col];
        for j in 0..k {
            a[col * k + j] /= d;
            inv[col * k + j] /= d;
        }
        for i in 0..k {
            if i != col {
                let f = a[i * k + col];
                if f != 0.0 {
                    for j in 0..k {
                        a[i * k + j] -= f * a[col * k + j];
                        inv[i * k + j] -= f * inv[col * k + j];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Box-Muller standard normal draw.
fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random::<f64>();
        if u > 0.0 {
            let v: f64 = rng.random::<f64>();
            return libm::sqrt(-2.0 * libm::log(u)) * libm::cos(core::f64::consts::TAU * v);
        }
    }
}

/// How the target's variance splits across frequency bands.
///
/// Bands by component period: low >= 6 h, mid in [1 h, 6 h), high < 1 h.
/// Component powers are summed as if orthogonal, exact when periods and
/// phases do not coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralProfile {
    pub low_variance: f64,
    pub mid_variance: f64,
    pub high_variance: f64,
}

impl SpectralProfile {
    pub fn total(&self) -> f64 {
        self.low_variance + self.mid_variance + self.high_variance
    }

    pub fn low_fraction(&self) -> f64 {
        let t = self.total();
        if t == 0.0 {
            0.0
        } else {
            self.low_variance / t
        }
    }

    pub fn high_fraction(&self) -> f64 {
        let t = self.total();
        if t == 0.0 {
            0.0
        } else {
            self.high_variance / t
        }
    }
}

/// Variance of the generated target signal split across frequency bands,
/// letting tests build a fast (NO-like) versus smooth (O3-like) scenario
/// pair and compare their degradation under sparse sampling.
pub fn spectral_profile(spec: &ScenarioSpec) -> Result<SpectralProfile, ScenarioError> {
    spec.validate()?;
    let k = spec.channels.len();
    let mixing = spec.mixing.clone().unwrap_or_else(|| identity(k));
    // Weight of latent l in the target: sum_j beta_j * A[j][l].
    let mut weights = vec![0.0f64; k];
    for (l, w) in weights.iter_mut().enumerate() {
        for j in 0..k {
            *w += spec.beta[j + 1] * mixing[j * k + l];
        }
    }
    let mut profile = SpectralProfile {
        low_variance: 0.0,
        mid_variance: 0.0,
        high_variance: 0.0,
    };
    for (l, channel) in spec.channels.iter().enumerate() {
        for c in &channel.components {
            let power = (weights[l] * c.amplitude) * (weights[l] * c.amplitude) / 2.0;
            if c.period_s >= 6.0 * SECONDS_PER_HOUR as f64 {
                profile.low_variance += power;
            } else if c.period_s >= SECONDS_PER_HOUR as f64 {
                profile.mid_variance += power;
            } else {
                profile.high_variance += power;
            }
        }
    }
    Ok(profile)
}
