//! Monte Carlo experiment engine.
//!
//! A sweep point is simulated in fixed-length shards. Shard `s` of grouping
//! `g` at SNR index `i` always uses the fading seed
//! `derive_seed(base_seed, [i, s, g])`, whatever the policy, so policies are
//! compared on common channel draws and a row's result does not depend on
//! policy order or on how many threads run the shards. Groupings of one
//! policy get distinct draws. Shards are merged in index order.
//!
//! A point first runs `trials_per_point` slots, then keeps doubling its
//! shard count until it has seen `min_outage_events` outages or would
//! exceed `trial_cap` slots.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::error::{Error, Result};
use crate::fairness::{delay_statistics, AirtimeLedger, DelayReport, DelaySamples, WindowedFairness};
use crate::model::{doppler_to_rho, ChannelRealization, FadingMode, FadingProcess, NetworkConfig, DEFAULT_DOPPLER_HZ};
use crate::protocol::{protocol_slot, BackoffConfig};
use crate::scheduling::{make_grouping, GroupingPattern, GroupingStrategy, SchedulingPolicy};
use crate::seed::derive_seed;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `events` successes in `trials`.
pub fn wilson_interval(events: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = events as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if events == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if events == trials { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum PolicyKind {
    FixedTdma,
    Greedy,
    RelaxedTdma { k: usize },
}

/// One scheduling policy of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub kind: PolicyKind,
    /// Grouping used by relaxed TDMA; ignored otherwise.
    pub grouping: GroupingStrategy,
    /// Number of random groupings averaged. Draw 0 uses the strategy's seed.
    pub grouping_draws: usize,
    pub label: Option<String>,
}

impl PolicyEntry {
    pub fn fixed_tdma() -> Self {
        Self { kind: PolicyKind::FixedTdma, grouping: GroupingStrategy::FixedOrder, grouping_draws: 1, label: None }
    }

    pub fn greedy() -> Self {
        Self { kind: PolicyKind::Greedy, ..Self::fixed_tdma() }
    }

    pub fn relaxed(k: usize, grouping: GroupingStrategy) -> Self {
        Self { kind: PolicyKind::RelaxedTdma { k }, grouping, grouping_draws: 1, label: None }
    }

    pub fn with_draws(self, grouping_draws: usize) -> Self {
        Self { grouping_draws, ..self }
    }

    pub fn with_label(self, label: impl Into<String>) -> Self {
        Self { label: Some(label.into()), ..self }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.kind {
            PolicyKind::FixedTdma => "tdma".into(),
            PolicyKind::Greedy => "greedy".into(),
            PolicyKind::RelaxedTdma { k } => format!("relaxed_k{k}_{}", self.grouping.name()),
        }
    }

    /// The concrete scheduling policies this entry averages over.
    pub fn realize(&self, cfg: &NetworkConfig) -> Result<Vec<SchedulingPolicy>> {
        match self.kind {
            PolicyKind::FixedTdma => Ok(vec![SchedulingPolicy::FixedTdma]),
            PolicyKind::Greedy => Ok(vec![SchedulingPolicy::Greedy]),
            PolicyKind::RelaxedTdma { k } => {
                if self.grouping_draws == 0 {
                    return Err(Error::InvalidPlan("grouping_draws must be at least 1".into()));
                }
                let draws = match self.grouping {
                    GroupingStrategy::Random { .. } => self.grouping_draws,
                    _ => 1,
                };
                (0..draws)
                    .map(|i| {
                        let strategy = match self.grouping {
                            GroupingStrategy::Random { seed } if i > 0 => {
                                GroupingStrategy::Random { seed: derive_seed(seed, &[i as u64]) }
                            }
                            s => s,
                        };
                        make_grouping(strategy, k, cfg).map(SchedulingPolicy::RelaxedTdma)
                    })
                    .collect()
            }
        }
    }

    /// Closed-form outage of this entry at `eta`, averaged over its
    /// groupings.
    pub fn analytic_outage(&self, cfg: &NetworkConfig, eta: f64) -> Result<f64> {
        let policies = self.realize(cfg)?;
        let n = policies.len() as f64;
        Ok(policies
            .iter()
            .map(|p| match p {
                SchedulingPolicy::FixedTdma => analytics::outage_tdma(cfg, eta),
                SchedulingPolicy::Greedy => analytics::outage_exact(cfg, eta),
                SchedulingPolicy::RelaxedTdma(g) => analytics::outage_relaxed_tdma(cfg, g, eta),
            })
            .sum::<f64>()
            / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FadingSpec {
    Iid,
    /// Correlation from the Doppler spread; relay-BS links may use their own.
    GaussMarkov {
        doppler_hz: f64,
        doppler_hz_rb: Option<f64>,
    },
}

impl FadingSpec {
    pub fn correlated_default() -> Self {
        Self::GaussMarkov { doppler_hz: DEFAULT_DOPPLER_HZ, doppler_hz_rb: None }
    }

    pub fn mode(&self, slot_duration: f64) -> Result<FadingMode> {
        match *self {
            Self::Iid => Ok(FadingMode::Iid),
            Self::GaussMarkov { doppler_hz, doppler_hz_rb } => {
                let rho_ur = doppler_to_rho(doppler_hz, slot_duration);
                let rho_rb = doppler_to_rho(doppler_hz_rb.unwrap_or(doppler_hz), slot_duration);
                for rho in [rho_ur, rho_rb] {
                    if !(0.0..1.0).contains(&rho) {
                        return Err(Error::InvalidPlan(format!(
                            "Doppler spread gives slot correlation {rho}, need [0, 1)"
                        )));
                    }
                }
                Ok(FadingMode::GaussMarkov { rho_ur, rho_rb })
            }
        }
    }

    /// Slots per normalized-Doppler unit, `1 / (f_d delta)`.
    pub fn slots_per_doppler_unit(&self, slot_duration: f64) -> Option<f64> {
        match *self {
            Self::Iid => None,
            Self::GaussMarkov { doppler_hz, .. } => Some(1.0 / (doppler_hz * slot_duration)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    /// Network template; its `total_power` is replaced at each sweep point.
    pub config: NetworkConfig,
    pub snr_sweep_db: Vec<f64>,
    pub policies: Vec<PolicyEntry>,
    pub trials_per_point: u64,
    pub fading: FadingSpec,
    pub base_seed: u64,
    /// Schedule through the distributed backoff protocol instead of the
    /// centralized rules.
    pub use_protocol_path: bool,
    pub min_outage_events: u64,
    pub trial_cap: u64,
    pub shard_slots: u64,
    pub vulnerable_window: f64,
    /// Backoff scale in seconds per unit metric; defaults to `1 ms * tau N_0`.
    pub backoff_scale: Option<f64>,
    /// Fairness windows in normalized-Doppler units.
    pub fairness_windows: Vec<f64>,
}

pub const MIN_TRIALS: u64 = 1_000;

impl ExperimentPlan {
    pub fn new(config: NetworkConfig, snr_sweep_db: Vec<f64>, policies: Vec<PolicyEntry>) -> Self {
        Self {
            config,
            snr_sweep_db,
            policies,
            trials_per_point: 100_000,
            fading: FadingSpec::Iid,
            base_seed: 1,
            use_protocol_path: false,
            min_outage_events: 100,
            trial_cap: 10_000_000,
            shard_slots: 1 << 16,
            vulnerable_window: 0.0,
            backoff_scale: None,
            fairness_windows: vec![0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let bad = |m: String| Err(Error::InvalidPlan(m));
        if self.snr_sweep_db.is_empty() {
            return bad("SNR sweep is empty".into());
        }
        if self.snr_sweep_db.windows(2).any(|w| !(w[1] > w[0])) || self.snr_sweep_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR sweep must be finite and strictly increasing".into());
        }
        if self.policies.is_empty() {
            return bad("no policies".into());
        }
        if self.trials_per_point < MIN_TRIALS {
            return bad(format!("trials_per_point must be at least {MIN_TRIALS}"));
        }
        if self.trial_cap < self.trials_per_point {
            return bad("trial_cap is below trials_per_point".into());
        }
        if self.shard_slots == 0 {
            return bad("shard_slots must be positive".into());
        }
        if !(self.vulnerable_window >= 0.0) {
            return bad("vulnerable_window must be nonnegative".into());
        }
        if self.backoff_scale.is_some_and(|s| !(s > 0.0)) {
            return bad("backoff_scale must be positive".into());
        }
        if self.fairness_windows.iter().any(|w| !(*w > 0.0)) {
            return bad("fairness windows must be positive".into());
        }
        self.fading.mode(self.config.slot_duration)?;
        for p in &self.policies {
            p.realize(&self.config)?;
        }
        Ok(())
    }

    pub fn backoff(&self, cfg: &NetworkConfig) -> BackoffConfig {
        let mut b = BackoffConfig::for_network(cfg).with_window(self.vulnerable_window);
        if let Some(s) = self.backoff_scale {
            b.scale = s;
        }
        b
    }
}

/// Protocol overhead totals.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ProtocolCounters {
    pub slots: u64,
    pub rts: u64,
    pub collisions: u64,
    pub backoff_sum: f64,
}

/// Everything a shard measures. Merging is associative; merging in a fixed
/// order gives bit-identical results.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    pub outage_count: u64,
    pub slot_count: u64,
    pub airtime: AirtimeLedger,
    pub delay: DelaySamples,
    pub windowed: Option<WindowedFairness>,
    pub protocol: ProtocolCounters,
}

impl MetricsAccumulator {
    pub fn new(num_users: usize) -> Self {
        Self {
            outage_count: 0,
            slot_count: 0,
            airtime: AirtimeLedger::new(num_users),
            delay: DelaySamples::new(num_users),
            windowed: None,
            protocol: ProtocolCounters::default(),
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.outage_count += other.outage_count;
        self.slot_count += other.slot_count;
        self.airtime.merge(&other.airtime);
        self.delay.merge(&other.delay);
        match (&mut self.windowed, &other.windowed) {
            (Some(a), Some(b)) => a.merge(b),
            (None, Some(b)) => self.windowed = Some(b.clone()),
            _ => {}
        }
        self.protocol.slots += other.protocol.slots;
        self.protocol.rts += other.protocol.rts;
        self.protocol.collisions += other.protocol.collisions;
        self.protocol.backoff_sum += other.protocol.backoff_sum;
    }

    pub fn outage_estimate(&self) -> f64 {
        if self.slot_count == 0 {
            0.0
        } else {
            self.outage_count as f64 / self.slot_count as f64
        }
    }

    pub fn confidence_interval(&self) -> (f64, f64) {
        wilson_interval(self.outage_count, self.slot_count, Z95)
    }
}

/// Simulates `slots` consecutive slots starting at `first_slot`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_slots(
    cfg: &NetworkConfig,
    policy: &SchedulingPolicy,
    mode: FadingMode,
    seed: u64,
    first_slot: u64,
    slots: u64,
    protocol: Option<&BackoffConfig>,
    windows: Option<&[usize]>,
) -> Result<MetricsAccumulator> {
    let m = cfg.num_users();
    let mut fading = FadingProcess::for_config(mode, seed, cfg)?;
    let mut acc = MetricsAccumulator::new(m);
    if let Some(w) = windows {
        acc.windowed = Some(WindowedFairness::new(m, w)?);
    }
    let pattern = match protocol {
        Some(_) => Some(policy.as_pattern(cfg)?),
        None => None,
    };
    let mut real = ChannelRealization::zeros(m, cfg.num_relays());
    for slot in first_slot..first_slot + slots {
        fading.draw_into(cfg, &mut real);
        let outcome = match (protocol, &pattern) {
            (Some(b), Some(p)) => {
                let (out, trace) = protocol_slot(slot, p, &real, cfg, b);
                acc.protocol.slots += 1;
                acc.protocol.rts += trace.rts_count as u64;
                acc.protocol.collisions += u64::from(trace.collision);
                acc.protocol.backoff_sum += trace.elapsed_backoff;
                out
            }
            _ => policy.schedule(slot, &real, cfg),
        };
        acc.slot_count += 1;
        acc.outage_count += u64::from(outage_bit(outcome.outage));
        acc.airtime.record(outcome.scheduled_user);
        acc.delay.record_transmission(outcome.scheduled_user, slot);
        if let Some(w) = acc.windowed.as_mut() {
            w.record(outcome.scheduled_user);
        }
    }
    Ok(acc)
}

#[inline]
fn outage_bit(b: bool) -> u8 {
    u8::from(b)
}

/// Result of one (SNR, policy) point.
#[derive(Debug, Clone)]
pub struct PointResult {
    /// Pooled over every grouping of the entry.
    pub metrics: MetricsAccumulator,
    /// Mean over groupings of each grouping's long-run Jain index.
    pub fi_longrun: f64,
    /// Stopped at `trial_cap` before reaching `min_outage_events`.
    pub cap_hit: bool,
}

impl PointResult {
    pub fn outage(&self) -> f64 {
        self.metrics.outage_estimate()
    }

    pub fn ci(&self) -> (f64, f64) {
        self.metrics.confidence_interval()
    }

    pub fn delay(&self, slot_duration: f64) -> DelayReport {
        delay_statistics(&self.metrics.delay, slot_duration)
    }
}

/// Fading seed of shard `shard` of grouping `pattern` at sweep point
/// `snr_index`.
pub fn shard_seed(base_seed: u64, snr_index: usize, shard: u64, pattern: usize) -> u64 {
    derive_seed(base_seed, &[snr_index as u64, shard, pattern as u64])
}

/// Simulates one policy at one sweep point.
pub fn run_point(plan: &ExperimentPlan, snr_index: usize, entry: &PolicyEntry) -> Result<PointResult> {
    let snr_db = *plan
        .snr_sweep_db
        .get(snr_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no sweep point {snr_index}")))?;
    let cfg = plan.config.with_snr_db(snr_db);
    let policies = entry.realize(&plan.config)?;
    let mode = plan.fading.mode(cfg.slot_duration)?;
    let backoff = plan.use_protocol_path.then(|| plan.backoff(&cfg));
    let patterns = policies.len() as u64;

    let budget = plan.trials_per_point.div_ceil(patterns).max(1);
    let shard_len = plan.shard_slots.min(budget);
    let mut shards_done = 0u64;
    let mut batch = budget.div_ceil(shard_len);
    let mut per_pattern: Vec<MetricsAccumulator> =
        (0..patterns).map(|_| MetricsAccumulator::new(cfg.num_users())).collect();
    let mut outages = 0u64;
    let mut slots = 0u64;

    loop {
        let jobs: Vec<(u64, usize)> =
            (shards_done..shards_done + batch).flat_map(|s| (0..policies.len()).map(move |p| (s, p))).collect();
        let results: Vec<MetricsAccumulator> = jobs
            .par_iter()
            .map(|&(s, p)| {
                simulate_slots(
                    &cfg,
                    &policies[p],
                    mode,
                    shard_seed(plan.base_seed, snr_index, s, p),
                    s * shard_len,
                    shard_len,
                    backoff.as_ref(),
                    None,
                )
            })
            .collect::<Result<_>>()?;
        for (&(_, p), acc) in jobs.iter().zip(&results) {
            outages += acc.outage_count;
            slots += acc.slot_count;
            per_pattern[p].merge(acc);
        }
        shards_done += batch;
        if outages >= plan.min_outage_events {
            break;
        }
        let room = plan.trial_cap.saturating_sub(slots) / (shard_len * patterns);
        batch = shards_done.min(room);
        if batch == 0 {
            break;
        }
    }

    let fi_longrun = per_pattern.iter().map(|a| a.airtime.jain_index().unwrap_or(0.0)).sum::<f64>() / patterns as f64;
    let mut metrics = MetricsAccumulator::new(cfg.num_users());
    for acc in &per_pattern {
        metrics.merge(acc);
    }
    Ok(PointResult { cap_hit: metrics.outage_count < plan.min_outage_events, metrics, fi_longrun })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub snr_db: f64,
    pub policy: String,
    pub outage: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub fi_longrun: f64,
    pub delay_mean: f64,
    pub delay_var: f64,
    pub slots: u64,
    pub outage_events: u64,
    pub cap_hit: bool,
    /// Closed-form value for the same policy and SNR.
    pub analytic: f64,
}

/// Every (SNR, policy) pair, SNR-major.
pub fn run_sweep(plan: &ExperimentPlan) -> Result<Vec<SweepRow>> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..plan.snr_sweep_db.len()).flat_map(|i| (0..plan.policies.len()).map(move |p| (i, p))).collect();
    jobs.par_iter()
        .map(|&(i, p)| {
            let entry = &plan.policies[p];
            let res = run_point(plan, i, entry)?;
            let snr_db = plan.snr_sweep_db[i];
            let (ci_low, ci_high) = res.ci();
            let delay = res.delay(plan.config.slot_duration).pooled;
            Ok(SweepRow {
                snr_db,
                policy: entry.label(),
                outage: res.outage(),
                ci_low,
                ci_high,
                fi_longrun: res.fi_longrun,
                delay_mean: delay.map_or(f64::NAN, |d| d.mean),
                delay_var: delay.map_or(f64::NAN, |d| d.variance),
                slots: res.metrics.slot_count,
                outage_events: res.metrics.outage_count,
                cap_hit: res.cap_hit,
                analytic: entry.analytic_outage(&plan.config, crate::model::db_to_linear(snr_db))?,
            })
        })
        .collect()
}

/// Mean sliding-window fairness of one policy against window length.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FairnessCurve {
    pub policy: String,
    pub window_units: Vec<f64>,
    pub window_slots: Vec<usize>,
    pub mean_fi: Vec<f64>,
    pub fi_longrun: f64,
    pub delay_mean: f64,
    pub delay_var: f64,
}

const FAIRNESS_STREAM: u64 = 0xfa1e;

/// Windowed-fairness experiment under time-correlated fading at the first
/// sweep SNR. Each grouping runs `trials_per_point` consecutive slots.
pub fn run_fairness_experiment(plan: &ExperimentPlan) -> Result<Vec<FairnessCurve>> {
    plan.validate()?;
    let cfg = plan.config.with_snr_db(plan.snr_sweep_db[0]);
    let mode = plan.fading.mode(cfg.slot_duration)?;
    if mode == FadingMode::Iid {
        return Err(Error::InvalidPlan("fairness experiments need Gauss-Markov fading".into()));
    }
    let per_unit = plan.fading.slots_per_doppler_unit(cfg.slot_duration).expect("correlated");
    let window_slots: Vec<usize> =
        plan.fairness_windows.iter().map(|u| ((u * per_unit).round() as usize).max(1)).collect();
    let backoff = plan.use_protocol_path.then(|| plan.backoff(&cfg));

    plan.policies
        .par_iter()
        .map(|entry| {
            let policies = entry.realize(&plan.config)?;
            let runs: Vec<MetricsAccumulator> = policies
                .par_iter()
                .enumerate()
                .map(|(i, p)| {
                    simulate_slots(
                        &cfg,
                        p,
                        mode,
                        derive_seed(plan.base_seed, &[FAIRNESS_STREAM, i as u64]),
                        0,
                        plan.trials_per_point,
                        backoff.as_ref(),
                        Some(&window_slots),
                    )
                })
                .collect::<Result<_>>()?;
            let n = runs.len() as f64;
            let fi_longrun = runs.iter().map(|a| a.airtime.jain_index().unwrap_or(0.0)).sum::<f64>() / n;
            let mut pooled = MetricsAccumulator::new(cfg.num_users());
            for r in &runs {
                pooled.merge(r);
            }
            let delay = delay_statistics(&pooled.delay, cfg.slot_duration).pooled;
            let mean_fi = pooled
                .windowed
                .as_ref()
                .expect("windows tracked")
                .mean_fi()
                .into_iter()
                .map(|v| v.unwrap_or(f64::NAN))
                .collect();
            Ok(FairnessCurve {
                policy: entry.label(),
                window_units: plan.fairness_windows.clone(),
                window_slots: window_slots.clone(),
                mean_fi,
                fi_longrun,
                delay_mean: delay.map_or(f64::NAN, |d| d.mean),
                delay_var: delay.map_or(f64::NAN, |d| d.variance),
            })
        })
        .collect()
}

/// Explicit patterns for every policy entry, for reporting.
pub fn realized_patterns(plan: &ExperimentPlan) -> Result<Vec<(String, Vec<GroupingPattern>)>> {
    plan.policies
        .iter()
        .map(|e| {
            let pats = e.realize(&plan.config)?.iter().map(|p| p.as_pattern(&plan.config)).collect::<Result<_>>()?;
            Ok((e.label(), pats))
        })
        .collect()
}
