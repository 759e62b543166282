//! Experiment configuration files.
//!
//! The format is TOML:
//!
//! ```toml
//! [network]
//! mean_gain_ur = [[0.2, 0.8], [1.3, 1.0]]   # one row per user
//! mean_gain_rb = [1.2, 0.6]                 # one entry per relay
//! alpha = 0.5            # share of the total power given to the user
//! noise_power = 1.0
//! snr_threshold = 3.0    # decoding threshold tau, linear
//! slot_duration = 0.002  # seconds
//!
//! [fading]
//! mode = "iid"           # or "gauss_markov"
//! doppler_hz = 15.0
//!
//! [experiment]
//! snr_db = [0.0, 5.0, 10.0]   # or snr_start / snr_stop / snr_step
//! trials = 100000
//! seed = 1
//!
//! [[policy]]
//! kind = "relaxed"       # "tdma", "greedy" or "relaxed"
//! k = 2
//! grouping = "random"    # "fixed_order", "random", "similar_gain", "dissimilar_gain"
//! grouping_seed = 7
//!
//! [protocol]
//! enabled = false
//! vulnerable_window = 0.0
//! ```
//!
//! Instead of explicit gains, `[network]` may give `users`, `relays` and
//! either `gain` (every link the same) or a `[network.gain_draw]` table
//! with `seed`, `ur_range`, `rb_range` and optionally `fortunate_users` and
//! `fortunate_range`. Without `[[policy]]` tables the file runs fixed TDMA
//! and greedy scheduling.

use std::fmt;
use std::path::Path;

use relaysched::model::{
    NetworkConfig, DEFAULT_ALPHA, DEFAULT_DOPPLER_HZ, DEFAULT_NOISE_POWER, DEFAULT_SLOT_DURATION, DEFAULT_SNR_THRESHOLD,
};
use relaysched::scenarios::{snr_grid, GainDraw};
use relaysched::simulator::{ExperimentPlan, FadingSpec, PolicyEntry, PolicyKind, MIN_TRIALS};
use relaysched::GroupingStrategy;
use serde::{Deserialize, Deserializer, Serialize};

/// A configuration problem, with the 1-based line it was found on.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn positive<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(serde::de::Error::custom(format!("must be positive and finite, got {v}")))
    }
}

fn open_unit<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let v = f64::deserialize(d)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(serde::de::Error::custom(format!("alpha must lie in the open interval (0, 1), got {v}")))
    }
}

fn positive_opt<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    positive(d).map(Some)
}

fn positive_row<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    let row = Vec::<f64>::deserialize(d)?;
    if let Some(bad) = row.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(serde::de::Error::custom(format!("mean gains must be positive, got {bad}")));
    }
    Ok(Some(row))
}

fn positive_matrix<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<Vec<f64>>>, D::Error> {
    let rows = Vec::<Vec<f64>>::deserialize(d)?;
    if let Some(bad) = rows.iter().flatten().find(|g| !(**g > 0.0 && g.is_finite())) {
        return Err(serde::de::Error::custom(format!("mean gains must be positive, got {bad}")));
    }
    Ok(Some(rows))
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_noise() -> f64 {
    DEFAULT_NOISE_POWER
}
fn default_tau() -> f64 {
    DEFAULT_SNR_THRESHOLD
}
fn default_slot() -> f64 {
    DEFAULT_SLOT_DURATION
}
fn default_doppler() -> f64 {
    DEFAULT_DOPPLER_HZ
}
fn default_trials() -> u64 {
    100_000
}
fn default_seed() -> u64 {
    1
}
fn default_min_events() -> u64 {
    100
}
fn default_cap() -> u64 {
    10_000_000
}
fn default_shard() -> u64 {
    1 << 16
}
fn default_windows() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
}
fn default_one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainDrawSection {
    pub seed: u64,
    pub ur_range: (f64, f64),
    pub rb_range: (f64, f64),
    #[serde(default)]
    pub fortunate_users: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fortunate_range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub users: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relays: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "positive_opt")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "positive_matrix")]
    pub mean_gain_ur: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "positive_row")]
    pub mean_gain_rb: Option<Vec<f64>>,
    #[serde(default = "default_alpha", deserialize_with = "open_unit")]
    pub alpha: f64,
    #[serde(default = "default_noise", deserialize_with = "positive")]
    pub noise_power: f64,
    #[serde(default = "default_tau", deserialize_with = "positive")]
    pub snr_threshold: f64,
    #[serde(default = "default_slot", deserialize_with = "positive")]
    pub slot_duration: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain_draw: Option<GainDrawSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingModeName {
    #[default]
    Iid,
    GaussMarkov,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FadingSection {
    #[serde(default)]
    pub mode: FadingModeName,
    #[serde(default = "default_doppler", deserialize_with = "positive")]
    pub doppler_hz: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "positive_opt")]
    pub doppler_hz_rb: Option<f64>,
}

impl Default for FadingSection {
    fn default() -> Self {
        Self { mode: FadingModeName::Iid, doppler_hz: DEFAULT_DOPPLER_HZ, doppler_hz_rb: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_step: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_min_events")]
    pub min_outage_events: u64,
    #[serde(default = "default_cap")]
    pub trial_cap: u64,
    #[serde(default = "default_shard")]
    pub shard_slots: u64,
    #[serde(default = "default_windows")]
    pub fairness_windows: Vec<f64>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        toml::from_str("").expect("all experiment keys have defaults")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyName {
    Tdma,
    Greedy,
    Relaxed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GroupingName {
    #[default]
    FixedOrder,
    Random,
    SimilarGain,
    DissimilarGain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    pub kind: PolicyName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default)]
    pub grouping: GroupingName,
    #[serde(default = "default_seed")]
    pub grouping_seed: u64,
    #[serde(default = "default_one")]
    pub grouping_draws: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProtocolSection {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default)]
    pub vulnerable_window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none", deserialize_with = "positive_opt")]
    pub backoff_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub network: NetworkSection,
    #[serde(default)]
    pub fading: FadingSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub protocol: ProtocolSection,
    #[serde(default, rename = "policy", skip_serializing_if = "Vec::is_empty")]
    pub policies: Vec<PolicySection>,
}

fn line_of_offset(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].bytes().filter(|b| *b == b'\n').count() + 1
}

/// Line of `key` inside the `nth` table named `section` (array tables count
/// each `[[section]]`), or of the table header when the key is absent.
fn key_line(src: &str, section: &str, nth: usize, key: Option<&str>) -> Option<usize> {
    let mut current = String::new();
    let mut seen = 0usize;
    let mut header = None;
    for (i, raw) in src.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == section {
                seen += 1;
                if seen == nth + 1 {
                    header = Some(i + 1);
                }
            }
            continue;
        }
        if current == section && seen == nth + 1 {
            if let Some(k) = key {
                let name = line.split('=').next().unwrap_or("").trim();
                if name == k && line.contains('=') {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}

struct Locator<'a> {
    src: &'a str,
}

impl Locator<'_> {
    fn err(&self, section: &str, nth: usize, key: Option<&str>, message: impl Into<String>) -> ConfigError {
        ConfigError { line: key_line(self.src, section, nth, key), message: message.into() }
    }
}

impl ConfigFile {
    pub fn from_toml(src: &str) -> Result<Self, ConfigError> {
        toml::from_str(src).map_err(|e| ConfigError {
            line: e.span().map(|s| line_of_offset(src, s.start)),
            message: e.message().trim().to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Resolves defaults and cross-field rules into a validated plan.
    pub fn resolve(&self, src: &str) -> Result<ExperimentPlan, ConfigError> {
        let at = Locator { src };
        let net = &self.network;
        let (ur, rb) = match (&net.mean_gain_ur, &net.mean_gain_rb, net.gain, &net.gain_draw) {
            (Some(ur), Some(rb), None, None) => (ur.clone(), rb.clone()),
            (None, None, Some(g), None) => {
                let (m, n) = self.sizes(&at)?;
                (vec![vec![g; n]; m], vec![g; n])
            }
            (None, None, None, Some(d)) => {
                let (m, n) = self.sizes(&at)?;
                let draw = GainDraw {
                    num_users: m,
                    num_relays: n,
                    seed: d.seed,
                    ur_range: d.ur_range,
                    rb_range: d.rb_range,
                    fortunate_users: d.fortunate_users,
                    fortunate_range: d.fortunate_range.unwrap_or((1.5, 2.0)),
                };
                let cfg = draw.draw().map_err(|e| at.err("network.gain_draw", 0, None, e.to_string()))?;
                (cfg.mean_gain_ur, cfg.mean_gain_rb)
            }
            _ => {
                return Err(at.err(
                    "network",
                    0,
                    None,
                    "give either mean_gain_ur and mean_gain_rb, or gain, or a gain_draw table",
                ))
            }
        };
        if net.users.is_some_and(|m| m != ur.len()) {
            return Err(at.err(
                "network",
                0,
                Some("users"),
                format!("users does not match the {} gain rows", ur.len()),
            ));
        }
        if net.relays.is_some_and(|n| n != rb.len()) {
            return Err(at.err(
                "network",
                0,
                Some("relays"),
                format!("relays does not match the {} R-B gains", rb.len()),
            ));
        }
        let mut config =
            NetworkConfig::new(ur, rb).map_err(|e| at.err("network", 0, Some("mean_gain_ur"), e.to_string()))?;
        config.alpha = net.alpha;
        config.noise_power = net.noise_power;
        config.snr_threshold = net.snr_threshold;
        config.slot_duration = net.slot_duration;

        let exp = &self.experiment;
        let snr_db = match (&exp.snr_db, exp.snr_start, exp.snr_stop, exp.snr_step) {
            (Some(list), None, None, None) => list.clone(),
            (None, Some(a), Some(b), Some(s)) if s > 0.0 && b >= a => snr_grid(a, b, s),
            (None, None, None, None) => snr_grid(0.0, 20.0, 2.0),
            _ => {
                return Err(at.err(
                    "experiment",
                    0,
                    Some("snr_step"),
                    "give snr_db, or snr_start <= snr_stop with a positive snr_step",
                ))
            }
        };
        if snr_db.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) || snr_db.is_empty()
        {
            return Err(at.err("experiment", 0, Some("snr_db"), "SNR sweep must be nonempty and strictly increasing"));
        }
        if exp.trials < MIN_TRIALS {
            return Err(at.err("experiment", 0, Some("trials"), format!("trials must be at least {MIN_TRIALS}")));
        }

        let policies = if self.policies.is_empty() {
            vec![PolicyEntry::fixed_tdma(), PolicyEntry::greedy()]
        } else {
            self.policies
                .iter()
                .enumerate()
                .map(|(i, p)| policy_entry(p, config.num_users()).map_err(|m| at.err("policy", i, Some("k"), m)))
                .collect::<Result<_, _>>()?
        };

        let mut plan = ExperimentPlan::new(config, snr_db, policies);
        plan.trials_per_point = exp.trials;
        plan.base_seed = exp.seed;
        plan.min_outage_events = exp.min_outage_events;
        plan.trial_cap = exp.trial_cap;
        plan.shard_slots = exp.shard_slots;
        plan.fairness_windows = exp.fairness_windows.clone();
        plan.fading = match self.fading.mode {
            FadingModeName::Iid => FadingSpec::Iid,
            FadingModeName::GaussMarkov => {
                FadingSpec::GaussMarkov { doppler_hz: self.fading.doppler_hz, doppler_hz_rb: self.fading.doppler_hz_rb }
            }
        };
        plan.use_protocol_path = self.protocol.enabled;
        plan.vulnerable_window = self.protocol.vulnerable_window;
        plan.backoff_scale = self.protocol.backoff_scale;
        plan.validate().map_err(|e| ConfigError { line: None, message: e.to_string() })?;
        Ok(plan)
    }

    fn sizes(&self, at: &Locator<'_>) -> Result<(usize, usize), ConfigError> {
        match (self.network.users, self.network.relays) {
            (Some(m), Some(n)) if m > 0 && n > 0 => Ok((m, n)),
            _ => Err(at.err("network", 0, None, "users and relays must be positive when gains are not listed")),
        }
    }

    /// Config file that resolves to `plan`, with every default written out.
    pub fn from_plan(plan: &ExperimentPlan) -> Self {
        let c = &plan.config;
        let (mode, doppler_hz, doppler_hz_rb) = match plan.fading {
            FadingSpec::Iid => (FadingModeName::Iid, DEFAULT_DOPPLER_HZ, None),
            FadingSpec::GaussMarkov { doppler_hz, doppler_hz_rb } => {
                (FadingModeName::GaussMarkov, doppler_hz, doppler_hz_rb)
            }
        };
        Self {
            network: NetworkSection {
                users: Some(c.num_users()),
                relays: Some(c.num_relays()),
                gain: None,
                mean_gain_ur: Some(c.mean_gain_ur.clone()),
                mean_gain_rb: Some(c.mean_gain_rb.clone()),
                alpha: c.alpha,
                noise_power: c.noise_power,
                snr_threshold: c.snr_threshold,
                slot_duration: c.slot_duration,
                gain_draw: None,
            },
            fading: FadingSection { mode, doppler_hz, doppler_hz_rb },
            experiment: ExperimentSection {
                snr_db: Some(plan.snr_sweep_db.clone()),
                snr_start: None,
                snr_stop: None,
                snr_step: None,
                trials: plan.trials_per_point,
                seed: plan.base_seed,
                min_outage_events: plan.min_outage_events,
                trial_cap: plan.trial_cap,
                shard_slots: plan.shard_slots,
                fairness_windows: plan.fairness_windows.clone(),
            },
            protocol: ProtocolSection {
                enabled: plan.use_protocol_path,
                vulnerable_window: plan.vulnerable_window,
                backoff_scale: plan.backoff_scale,
            },
            policies: plan.policies.iter().map(policy_section).collect(),
        }
    }
}

fn policy_entry(p: &PolicySection, num_users: usize) -> Result<PolicyEntry, String> {
    let grouping = match p.grouping {
        GroupingName::FixedOrder => GroupingStrategy::FixedOrder,
        GroupingName::Random => GroupingStrategy::Random { seed: p.grouping_seed },
        GroupingName::SimilarGain => GroupingStrategy::SimilarGain,
        GroupingName::DissimilarGain => GroupingStrategy::DissimilarGain,
    };
    let mut entry = match p.kind {
        PolicyName::Tdma => PolicyEntry::fixed_tdma(),
        PolicyName::Greedy => PolicyEntry::greedy(),
        PolicyName::Relaxed => {
            let k = p.k.ok_or("relaxed policy needs a group size k")?;
            if k == 0 || k > num_users {
                return Err(format!("group size k = {k} must lie in [1, {num_users}]"));
            }
            let needs_divisor = matches!(p.grouping, GroupingName::SimilarGain | GroupingName::DissimilarGain);
            if needs_divisor && !num_users.is_multiple_of(k) {
                return Err(format!("{:?} grouping needs k to divide M = {num_users}, got k = {k}", p.grouping));
            }
            if p.grouping_draws == 0 {
                return Err("grouping_draws must be at least 1".into());
            }
            PolicyEntry::relaxed(k, grouping).with_draws(p.grouping_draws)
        }
    };
    entry.label = p.label.clone();
    Ok(entry)
}

fn policy_section(e: &PolicyEntry) -> PolicySection {
    let (grouping, grouping_seed) = match e.grouping {
        GroupingStrategy::FixedOrder => (GroupingName::FixedOrder, 1),
        GroupingStrategy::Random { seed } => (GroupingName::Random, seed),
        GroupingStrategy::SimilarGain => (GroupingName::SimilarGain, 1),
        GroupingStrategy::DissimilarGain => (GroupingName::DissimilarGain, 1),
    };
    let (kind, k) = match e.kind {
        PolicyKind::FixedTdma => (PolicyName::Tdma, None),
        PolicyKind::Greedy => (PolicyName::Greedy, None),
        PolicyKind::RelaxedTdma { k } => (PolicyName::Relaxed, Some(k)),
    };
    PolicySection { kind, k, grouping, grouping_seed, grouping_draws: e.grouping_draws, label: e.label.clone() }
}

/// Parses and resolves configuration text.
pub fn parse_config_str(src: &str) -> Result<ExperimentPlan, ConfigError> {
    ConfigFile::from_toml(src)?.resolve(src)
}

pub fn parse_config(path: &Path) -> Result<ExperimentPlan, ConfigError> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| ConfigError { line: None, message: format!("cannot read {}: {e}", path.display()) })?;
    parse_config_str(&src)
}

/// Fully resolved TOML for `plan`; parsing it gives `plan` back.
pub fn plan_to_toml(plan: &ExperimentPlan) -> String {
    ConfigFile::from_plan(plan).to_toml()
}
