//! User scheduling policies: fixed TDMA, greedy opportunistic, and k-user
//! relaxed TDMA.
//!
//! Relaxed TDMA partitions the users into groups, hands slots to groups in
//! round-robin order (`slot mod G`), and inside a slot schedules the group
//! member with the best end-to-end metric. Group size 1 is fixed TDMA and a
//! single group of all users is greedy scheduling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelRealization, NetworkConfig};
use crate::seed::mix64;
use crate::selection::best_relay;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupingStrategy {
    /// Consecutive user indices.
    FixedOrder,
    /// Uniformly random partition.
    Random { seed: u64 },
    /// Users sorted by mean gain, neighbours grouped together.
    SimilarGain,
    /// Users sorted by mean gain, dealt so each group spans the range.
    DissimilarGain,
}

impl GroupingStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FixedOrder => "fixed_order",
            Self::Random { .. } => "random",
            Self::SimilarGain => "similar_gain",
            Self::DissimilarGain => "dissimilar_gain",
        }
    }
}

/// A partition of the users into the groups that share TDMA slots.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupingPattern {
    group_size: usize,
    groups: Vec<Vec<usize>>,
    strategy: GroupingStrategy,
}

impl GroupingPattern {
    /// Wraps an explicit partition of `0..num_users`.
    pub fn from_groups(groups: Vec<Vec<usize>>, strategy: GroupingStrategy) -> Result<Self> {
        let num_users: usize = groups.iter().map(Vec::len).sum();
        let mut seen = vec![false; num_users];
        for g in &groups {
            if g.is_empty() {
                return Err(Error::InvalidGrouping("empty group".into()));
            }
            for &u in g {
                if u >= num_users || seen[u] {
                    return Err(Error::InvalidGrouping(format!("groups do not partition 0..{num_users} (user {u})")));
                }
                seen[u] = true;
            }
        }
        let group_size = groups.iter().map(Vec::len).max().unwrap_or(0);
        if group_size == 0 {
            return Err(Error::InvalidGrouping("no users".into()));
        }
        Ok(Self { group_size, groups, strategy })
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn num_users(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn strategy(&self) -> GroupingStrategy {
        self.strategy
    }

    /// Users that own `slot`.
    #[inline]
    pub fn group_for_slot(&self, slot: u64) -> &[usize] {
        &self.groups[(slot % self.groups.len() as u64) as usize]
    }

    pub fn check(&self, cfg: &NetworkConfig) -> Result<()> {
        if self.num_users() != cfg.num_users() {
            return Err(Error::InvalidGrouping(format!(
                "pattern covers {} users, network has {}",
                self.num_users(),
                cfg.num_users()
            )));
        }
        Ok(())
    }
}

/// Builds a grouping of `cfg`'s users into groups of `k`.
///
/// The gain-aware strategies rank users by the mean of their user-relay
/// mean gains and require `k | M`. The others allow a short last group.
pub fn make_grouping(strategy: GroupingStrategy, k: usize, cfg: &NetworkConfig) -> Result<GroupingPattern> {
    let m = cfg.num_users();
    if k == 0 || k > m {
        return Err(Error::InvalidGrouping(format!("group size {k} outside 1..={m}")));
    }
    let chunked = |order: Vec<usize>| -> Vec<Vec<usize>> { order.chunks(k).map(<[usize]>::to_vec).collect() };
    let groups = match strategy {
        GroupingStrategy::FixedOrder => chunked((0..m).collect()),
        GroupingStrategy::Random { seed } => {
            let mut order: Vec<usize> = (0..m).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            chunked(order)
        }
        GroupingStrategy::SimilarGain | GroupingStrategy::DissimilarGain => {
            if !m.is_multiple_of(k) {
                return Err(Error::InvalidGrouping(format!(
                    "{} grouping needs the group size to divide the user count ({k} does not divide {m})",
                    strategy.name()
                )));
            }
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| cfg.user_mean_gain(a).total_cmp(&cfg.user_mean_gain(b)).then(a.cmp(&b)));
            if strategy == GroupingStrategy::SimilarGain {
                chunked(order)
            } else {
                // snake deal: round j runs forwards for even j, backwards for odd
                let g = m / k;
                let mut groups = vec![Vec::with_capacity(k); g];
                for (i, &u) in order.iter().enumerate() {
                    let (round, pos) = (i / g, i % g);
                    let idx = if round % 2 == 0 { pos } else { g - 1 - pos };
                    groups[idx].push(u);
                }
                groups
            }
        }
    };
    let mut pattern = GroupingPattern::from_groups(groups, strategy)?;
    pattern.group_size = k;
    Ok(pattern)
}

/// What happened in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    pub slot_index: u64,
    pub scheduled_user: usize,
    pub selected_relay: Option<usize>,
    /// Best end-to-end metric over the slot's candidate users.
    pub metric_w: f64,
    pub outage: bool,
}

impl SlotOutcome {
    fn new(slot_index: u64, user: usize, relay: usize, metric: f64, cfg: &NetworkConfig) -> Self {
        Self {
            slot_index,
            scheduled_user: user,
            selected_relay: Some(relay),
            metric_w: metric,
            outage: metric < cfg.decode_floor(),
        }
    }
}

/// Priority of `user` among equal metrics in `slot`; the smaller key wins.
///
/// Users tie whenever the strongest relay-BS hop caps the metric of several
/// of them, which happens with positive probability. A fixed order would
/// hand those slots to the same user every time, so the order is reshuffled
/// per slot by hashing. Any node that knows the slot index can evaluate it.
#[inline]
pub fn tie_priority(slot: u64, user: usize) -> u64 {
    mix64(mix64(slot) ^ user as u64)
}

/// Whether `(u, w)` beats the incumbent `(best_u, best_w)` in `slot`.
#[inline]
pub fn beats(slot: u64, u: usize, w: f64, best_u: usize, best_w: f64) -> bool {
    w > best_w || (w == best_w && best_u != usize::MAX && tie_priority(slot, u) < tie_priority(slot, best_u))
}

/// Best (user, relay, metric) among `users`; ties follow [`tie_priority`]
/// regardless of iteration order.
fn best_among(
    users: impl IntoIterator<Item = usize>,
    slot: u64,
    real: &ChannelRealization,
    cfg: &NetworkConfig,
) -> (usize, usize, f64) {
    let mut best = (usize::MAX, 0, f64::NEG_INFINITY);
    for u in users {
        let (r, w) = best_relay(u, real, cfg);
        if best.0 == usize::MAX || beats(slot, u, w, best.0, best.2) {
            best = (u, r, w);
        }
    }
    best
}

/// Round-robin: slot `t` belongs to user `t mod M`.
pub fn schedule_fixed_tdma(slot: u64, real: &ChannelRealization, cfg: &NetworkConfig) -> SlotOutcome {
    let user = (slot % cfg.num_users() as u64) as usize;
    let (relay, w) = best_relay(user, real, cfg);
    SlotOutcome::new(slot, user, relay, w, cfg)
}

/// Schedules the user-relay pair with the largest end-to-end metric.
pub fn schedule_greedy(slot: u64, real: &ChannelRealization, cfg: &NetworkConfig) -> SlotOutcome {
    let (user, relay, w) = best_among(0..cfg.num_users(), slot, real, cfg);
    SlotOutcome::new(slot, user, relay, w, cfg)
}

/// Greedy choice restricted to the group that owns `slot`.
pub fn schedule_relaxed_tdma(
    slot: u64,
    pattern: &GroupingPattern,
    real: &ChannelRealization,
    cfg: &NetworkConfig,
) -> SlotOutcome {
    let (user, relay, w) = best_among(pattern.group_for_slot(slot).iter().copied(), slot, real, cfg);
    SlotOutcome::new(slot, user, relay, w, cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchedulingPolicy {
    FixedTdma,
    Greedy,
    RelaxedTdma(GroupingPattern),
}

impl SchedulingPolicy {
    pub fn schedule(&self, slot: u64, real: &ChannelRealization, cfg: &NetworkConfig) -> SlotOutcome {
        match self {
            Self::FixedTdma => schedule_fixed_tdma(slot, real, cfg),
            Self::Greedy => schedule_greedy(slot, real, cfg),
            Self::RelaxedTdma(p) => schedule_relaxed_tdma(slot, p, real, cfg),
        }
    }

    /// Users competing in `slot`.
    pub fn candidates(&self, slot: u64, num_users: usize) -> Vec<usize> {
        match self {
            Self::FixedTdma => vec![(slot % num_users as u64) as usize],
            Self::Greedy => (0..num_users).collect(),
            Self::RelaxedTdma(p) => p.group_for_slot(slot).to_vec(),
        }
    }

    /// The equivalent explicit grouping.
    pub fn as_pattern(&self, cfg: &NetworkConfig) -> Result<GroupingPattern> {
        match self {
            Self::FixedTdma => make_grouping(GroupingStrategy::FixedOrder, 1, cfg),
            Self::Greedy => make_grouping(GroupingStrategy::FixedOrder, cfg.num_users(), cfg),
            Self::RelaxedTdma(p) => Ok(p.clone()),
        }
    }

    pub fn group_size(&self, num_users: usize) -> usize {
        match self {
            Self::FixedTdma => 1,
            Self::Greedy => num_users,
            Self::RelaxedTdma(p) => p.group_size(),
        }
    }
}
