//! Run configuration: a TOML file with sections `data`, `plans`, `filter`,
//! `aggregate`, `features`, `evaluation`, `energy` and an optional `synth`
//! scenario, plus `--set dotted.key=value` overrides applied before
//! deserialization.
//!
//! Every report embeds a canonical echo of the effective configuration
//! (after overrides), which doubles as the reproducibility fingerprint.

use std::collections::BTreeMap;
use std::path::Path;

use airsample_core::preprocess::{AggregateSpec, FilterMethod, FilterSpec, Statistic};
use airsample_core::sampling::{EnergyProfile, SamplingMode, SamplingPlan};
use airsample_core::series::{ChannelId, Pollutant};
use airsample_core::synth::{ChannelSpec, ScenarioSpec, SinusoidComponent};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timefmt::parse_timestamp;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("override '{spec}' is not of the form key.path=value")]
    BadOverrideSyntax { spec: String },
    #[error("override '{spec}': segment '{segment}' does not address a table")]
    OverrideThroughNonTable { spec: String, segment: String },
    #[error("config key '{key}': {problem}")]
    BadValue { key: String, problem: String },
}

/// Whole run configuration. Every section has workable defaults so a
/// config file only states what differs.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    pub plans: PlanGridConfig,
    pub filter: FilterConfig,
    pub aggregate: AggregateConfig,
    pub features: FeaturesConfig,
    pub evaluation: EvaluationConfig,
    pub energy: EnergyConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Raw stream CSV; omit to source data from the `synth` section.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<String>,
    /// Reference CSV per target pollutant name.
    pub reference: BTreeMap<String, String>,
    /// Acquisition period `T_s` of the raw stream, seconds.
    pub t_s_s: i64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            raw: None,
            reference: BTreeMap::new(),
            t_s_s: 2,
        }
    }
}

/// Plan grid: the sweep takes the cartesian product of these lists.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PlanGridConfig {
    pub t_sen_s: Vec<i64>,
    pub n_s: Vec<u32>,
    pub t_r_s: Vec<i64>,
    pub modes: Vec<String>,
}

impl Default for PlanGridConfig {
    fn default() -> Self {
        PlanGridConfig {
            t_sen_s: vec![3600],
            n_s: vec![1],
            t_r_s: vec![120],
            modes: vec!["consecutive".to_string()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    /// `zscore`, `percent` or `none`.
    pub method: String,
    pub threshold: f64,
    /// `window` filters each N_s window, `ref_bucket` filters the T_sen
    /// values of each reference hour instead.
    pub scope: String,
    /// Which channels are filtered: `gas`, `all` or `none`.
    pub channels: String,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            method: "zscore".to_string(),
            threshold: 2.0,
            scope: "window".to_string(),
            channels: "gas".to_string(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AggregateConfig {
    /// `mean` or `median`.
    pub statistic: String,
    /// Minimum fraction of the expected samples for a period to count;
    /// below it the period becomes a gap.
    pub min_count_fraction: f64,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            statistic: "mean".to_string(),
            min_count_fraction: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// Target pollutants, e.g. `["O3", "NO2"]`.
    pub targets: Vec<String>,
    /// `subtract` feeds S = WE - AE per gas; `separate` feeds WE and AE.
    pub electrode_policy: String,
    /// Feature set used by `calibrate` and `sweep`; empty means all
    /// derived channels.
    pub selected: Vec<String>,
    /// Features forced into every model during selection.
    pub always_in: Vec<String>,
    /// Candidate pool for `select-features`; empty means all derived
    /// channels not in `always_in`.
    pub candidates: Vec<String>,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            targets: vec!["O3".to_string()],
            electrode_policy: "subtract".to_string(),
            selected: Vec::new(),
            always_in: Vec::new(),
            candidates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Fraction of usable rows used for training.
    pub split_fraction: f64,
    pub cv_k: usize,
    /// Empty resolves to `AIRSAMPLE_SEED` if set, else seeds 0..=9.
    pub seeds: Vec<u64>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            split_fraction: 0.75,
            cv_k: 10,
            seeds: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyConfig {
    pub p_on_mw: f64,
    pub p_sleep_mw: f64,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        EnergyConfig {
            p_on_mw: 500.0,
            p_sleep_mw: 5.0,
        }
    }
}

/// Synthetic scenario; mirrors `airsample_core::synth::ScenarioSpec` in
/// file-friendly form.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub start_time: String,
    pub duration_days: u32,
    pub t_s_s: i64,
    pub latent_step_s: i64,
    pub seed: u64,
    pub target: String,
    /// Intercept first, then one coefficient per channel.
    pub beta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mixing: Option<Vec<f64>>,
    pub outlier_rate: f64,
    pub outlier_magnitude: f64,
    pub gap_rate: f64,
    pub channels: Vec<SynthChannelConfig>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            start_time: "2021-01-01T00:00:00Z".to_string(),
            duration_days: 30,
            t_s_s: 2,
            latent_step_s: 600,
            seed: 0,
            target: "O3".to_string(),
            beta: Vec::new(),
            mixing: None,
            outlier_rate: 0.0,
            outlier_magnitude: 0.0,
            gap_rate: 0.0,
            channels: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthChannelConfig {
    /// Canonical channel name (`o3_we`, `temp`, ...).
    pub name: String,
    pub offset: f64,
    pub noise_sigma: f64,
    pub components: Vec<SynthComponentConfig>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SynthComponentConfig {
    pub amplitude: f64,
    pub period_s: f64,
    pub phase: f64,
}

fn bad(key: &str, problem: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.to_string(),
        problem: problem.into(),
    }
}

impl Config {
    /// Read a config file and apply `--set` overrides in order.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Config, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_text(&text, overrides)
    }

    pub fn from_text(text: &str, overrides: &[String]) -> Result<Config, ConfigError> {
        let mut value: toml::Value = toml::from_str(text)?;
        for spec in overrides {
            apply_override(&mut value, spec)?;
        }
        let config: Config = value.try_into()?;
        config.validate()?;
        Ok(config)
    }

    /// Canonical serialized form, embedded in every report.
    pub fn echo(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let f = self.evaluation.split_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(bad("evaluation.split_fraction", format!("must lie in (0, 1), got {f}")));
        }
        if self.evaluation.cv_k < 2 {
            return Err(bad("evaluation.cv_k", "must be at least 2"));
        }
        let mc = self.aggregate.min_count_fraction;
        if !(0.0..=1.0).contains(&mc) {
            return Err(bad("aggregate.min_count_fraction", format!("must lie in [0, 1], got {mc}")));
        }
        if self.data.t_s_s <= 0 {
            return Err(bad("data.t_s_s", "must be positive"));
        }
        self.filter_spec()?;
        self.filter_scope()?;
        self.statistic()?;
        self.filter_channels_policy()?;
        self.electrode_policy()?;
        self.targets()?;
        self.modes()?;
        self.energy_profile()?;
        Ok(())
    }

    pub fn filter_spec(&self) -> Result<FilterSpec, ConfigError> {
        let method = match self.filter.method.as_str() {
            "zscore" => FilterMethod::ZScore,
            "percent" => FilterMethod::PercentDeviation,
            "none" => FilterMethod::None,
            other => return Err(bad("filter.method", format!("unknown method '{other}'"))),
        };
        if method != FilterMethod::None && self.filter.threshold <= 0.0 {
            return Err(bad("filter.threshold", "must be positive"));
        }
        Ok(FilterSpec {
            method,
            threshold: self.filter.threshold,
        })
    }

    pub fn filter_scope(&self) -> Result<FilterScope, ConfigError> {
        match self.filter.scope.as_str() {
            "window" => Ok(FilterScope::Window),
            "ref_bucket" => Ok(FilterScope::RefBucket),
            other => Err(bad("filter.scope", format!("unknown scope '{other}'"))),
        }
    }

    pub fn filter_channels_policy(&self) -> Result<FilterChannels, ConfigError> {
        match self.filter.channels.as_str() {
            "gas" => Ok(FilterChannels::Gas),
            "all" => Ok(FilterChannels::All),
            "none" => Ok(FilterChannels::None),
            other => Err(bad("filter.channels", format!("unknown channel policy '{other}'"))),
        }
    }

    pub fn statistic(&self) -> Result<Statistic, ConfigError> {
        match self.aggregate.statistic.as_str() {
            "mean" => Ok(Statistic::Mean),
            "median" => Ok(Statistic::Median),
            other => Err(bad("aggregate.statistic", format!("unknown statistic '{other}'"))),
        }
    }

    /// Minimum-count rule for a period expected to hold `expected` samples.
    pub fn aggregate_spec(&self, expected: usize) -> Result<AggregateSpec, ConfigError> {
        let min_count = ((self.aggregate.min_count_fraction * expected as f64).ceil() as usize).max(1);
        Ok(AggregateSpec {
            statistic: self.statistic()?,
            min_count,
        })
    }

    pub fn electrode_policy(&self) -> Result<ElectrodePolicy, ConfigError> {
        match self.features.electrode_policy.as_str() {
            "subtract" => Ok(ElectrodePolicy::Subtract),
            "separate" => Ok(ElectrodePolicy::Separate),
            other => Err(bad("features.electrode_policy", format!("unknown policy '{other}'"))),
        }
    }

    pub fn targets(&self) -> Result<Vec<Pollutant>, ConfigError> {
        if self.features.targets.is_empty() {
            return Err(bad("features.targets", "at least one target pollutant is required"));
        }
        self.features
            .targets
            .iter()
            .map(|name| {
                Pollutant::parse(name)
                    .ok_or_else(|| bad("features.targets", format!("unknown pollutant '{name}'")))
            })
            .collect()
    }

    fn modes(&self) -> Result<Vec<SamplingMode>, ConfigError> {
        self.plans
            .modes
            .iter()
            .map(|m| {
                SamplingMode::parse(m)
                    .ok_or_else(|| bad("plans.modes", format!("unknown mode '{m}'")))
            })
            .collect()
    }

    /// The cartesian product of the plan grid, in declaration order.
    pub fn plan_grid(&self) -> Result<Vec<SamplingPlan>, ConfigError> {
        let modes = self.modes()?;
        if self.plans.t_sen_s.is_empty()
            || self.plans.n_s.is_empty()
            || self.plans.t_r_s.is_empty()
            || modes.is_empty()
        {
            return Err(bad("plans", "plan grid is empty"));
        }
        let mut grid = Vec::new();
        for &t_sen_s in &self.plans.t_sen_s {
            for &n_s in &self.plans.n_s {
                for &t_r_s in &self.plans.t_r_s {
                    for &mode in &modes {
                        grid.push(SamplingPlan {
                            t_s_s: self.data.t_s_s,
                            t_sen_s,
                            n_s,
                            t_r_s,
                            mode,
                        });
                    }
                }
            }
        }
        Ok(grid)
    }

    pub fn energy_profile(&self) -> Result<EnergyProfile, ConfigError> {
        EnergyProfile::new(self.energy.p_on_mw, self.energy.p_sleep_mw)
            .map_err(|e| bad("energy", e.to_string()))
    }

    /// Seeds to run, resolving the `AIRSAMPLE_SEED` fallback.
    pub fn seeds(&self) -> Vec<u64> {
        if !self.evaluation.seeds.is_empty() {
            return self.evaluation.seeds.clone();
        }
        if let Ok(s) = std::env::var("AIRSAMPLE_SEED") {
            if let Ok(seed) = s.trim().parse::<u64>() {
                return vec![seed];
            }
        }
        (0..10).collect()
    }

    /// Build the core scenario from the `synth` section.
    pub fn scenario(&self) -> Result<ScenarioSpec, ConfigError> {
        let synth = self
            .synth
            .as_ref()
            .ok_or_else(|| bad("synth", "section is required for synthetic data"))?;
        let start_time = parse_timestamp(&synth.start_time)
            .map_err(|e| bad("synth.start_time", e.to_string()))?;
        let target = Pollutant::parse(&synth.target)
            .ok_or_else(|| bad("synth.target", format!("unknown pollutant '{}'", synth.target)))?;
        let channels = synth
            .channels
            .iter()
            .map(|c| {
                let id = ChannelId::parse(&c.name)
                    .ok_or_else(|| bad("synth.channels", format!("unknown channel '{}'", c.name)))?;
                Ok(ChannelSpec {
                    id,
                    offset: c.offset,
                    noise_sigma: c.noise_sigma,
                    components: c
                        .components
                        .iter()
                        .map(|s| SinusoidComponent {
                            amplitude: s.amplitude,
                            period_s: s.period_s,
                            phase: s.phase,
                        })
                        .collect(),
                })
            })
            .collect::<Result<Vec<_>, ConfigError>>()?;
        Ok(ScenarioSpec {
            start_time,
            duration_days: synth.duration_days,
            t_s_s: synth.t_s_s,
            latent_step_s: synth.latent_step_s,
            channels,
            mixing: synth.mixing.clone(),
            target,
            beta: synth.beta.clone(),
            outlier_rate: synth.outlier_rate,
            outlier_magnitude: synth.outlier_magnitude,
            gap_rate: synth.gap_rate,
            seed: synth.seed,
        })
    }
}

/// Where the outlier filter runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterScope {
    /// Over each N_s sample window (the default).
    Window,
    /// Over the T_sen values inside each reference hour.
    RefBucket,
}

/// Which channels the outlier filter touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterChannels {
    Gas,
    All,
    None,
}

/// How electrode pairs become features.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElectrodePolicy {
    /// One feature S = WE - AE per gas.
    Subtract,
    /// WE and AE stay separate features.
    Separate,
}

/// Apply one `key.path=value` override onto the parsed TOML document.
/// The value side is parsed as TOML when possible and falls back to a
/// plain string, so `--set plans.n_s=[1,5]` and `--set features.targets[0]`
/// style strings both behave predictably.
fn apply_override(root: &mut toml::Value, spec: &str) -> Result<(), ConfigError> {
    let (key, raw_value) = spec.split_once('=').ok_or_else(|| ConfigError::BadOverrideSyntax {
        spec: spec.to_string(),
    })?;
    let segments: Vec<&str> = key.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(ConfigError::BadOverrideSyntax {
            spec: spec.to_string(),
        });
    }
    let value = parse_override_value(raw_value);
    let mut node = root;
    for segment in &segments[..segments.len() - 1] {
        let table = node
            .as_table_mut()
            .ok_or_else(|| ConfigError::OverrideThroughNonTable {
                spec: spec.to_string(),
                segment: segment.to_string(),
            })?;
        node = table
            .entry(segment.to_string())
            .or_insert_with(|| toml::Value::Table(toml::map::Map::new()));
    }
    let last = segments[segments.len() - 1];
    let table = node
        .as_table_mut()
        .ok_or_else(|| ConfigError::OverrideThroughNonTable {
            spec: spec.to_string(),
            segment: last.to_string(),
        })?;
    table.insert(last.to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match toml::from_str::<toml::Value>(&wrapped) {
        Ok(toml::Value::Table(mut t)) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        _ => toml::Value::String(raw.to_string()),
    }
}
