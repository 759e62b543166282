//! Distributed relaxed-TDMA scheduling by backoff contention.
//!
//! In every slot each relay looks only at its own links: it picks the group
//! member with the best bottleneck `min{P_user g_ur, P_relay g_rB}` and arms
//! a backoff timer that is strictly decreasing in that metric. The first
//! timer to expire sends an RTS naming its user; every other relay hears it
//! and stays silent. The relay with the largest metric therefore wins, which
//! is the centralized greedy choice restricted to the group.
//!
//! Contention is resolved on a single event timeline ordered by deadline.
//! Timers expiring less than `vulnerable_window` seconds after the first
//! cannot hear its RTS and transmit too; the slot is then lost to a
//! collision.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::model::{ChannelRealization, NetworkConfig};
use crate::scheduling::{beats, GroupingPattern, SlotOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelayStatus {
    Counting,
    Suppressed,
    Transmitting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayNodeState {
    pub relay_index: usize,
    /// `g_ur` for each group member, in group order.
    pub local_gains: Vec<f64>,
    pub relay_bs_gain: f64,
    pub chosen_user: usize,
    pub metric_y: f64,
    pub backoff_deadline: f64,
    pub status: RelayStatus,
}

/// Best group member as seen from `relay`, with its metric. Ties are broken
/// by [`tie_priority`](crate::scheduling::tie_priority) for `slot`, as in the centralized scheduler.
pub fn relay_local_select(
    relay: usize,
    group: &[usize],
    slot: u64,
    real: &ChannelRealization,
    cfg: &NetworkConfig,
) -> (usize, f64) {
    assert!(!group.is_empty(), "group must be nonempty");
    let relay_side = cfg.relay_power() * real.rb(relay);
    let pu = cfg.user_power();
    let mut best = (usize::MAX, f64::NEG_INFINITY);
    for &u in group {
        let y = (pu * real.ur(u, relay)).min(relay_side);
        if best.0 == usize::MAX || beats(slot, u, y, best.0, best.1) {
            best = (u, y);
        }
    }
    best
}

/// Contention parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackoffConfig {
    /// Timer for metric `Y` is `scale / (Y + epsilon)` seconds.
    pub scale: f64,
    pub epsilon: f64,
    /// Two expiries closer than this collide.
    pub vulnerable_window: f64,
    /// Fixed pilot/CSI phase added to the elapsed time.
    pub pilot_time: f64,
}

impl BackoffConfig {
    /// `scale = 1 ms * tau N_0`, `epsilon = 1e-9 * tau N_0`, no collisions.
    pub fn for_network(cfg: &NetworkConfig) -> Self {
        let floor = cfg.decode_floor();
        Self { scale: 1e-3 * floor, epsilon: 1e-9 * floor, vulnerable_window: 0.0, pilot_time: 0.0 }
    }

    pub fn with_window(self, vulnerable_window: f64) -> Self {
        Self { vulnerable_window, ..self }
    }

    pub fn map(&self) -> impl Fn(f64) -> f64 + Copy {
        let (scale, epsilon) = (self.scale, self.epsilon);
        move |y| backoff_map(y, scale, epsilon)
    }
}

/// `scale / (metric_y + epsilon)`: strictly decreasing, finite at zero.
#[inline]
pub fn backoff_map(metric_y: f64, scale: f64, epsilon: f64) -> f64 {
    scale / (metric_y + epsilon)
}

/// Runs the local selection at every relay and arms its timer with
/// `backoff(Y_r)`.
pub fn init_relays(
    group: &[usize],
    slot: u64,
    real: &ChannelRealization,
    cfg: &NetworkConfig,
    backoff: impl Fn(f64) -> f64,
) -> Vec<RelayNodeState> {
    (0..cfg.num_relays())
        .map(|r| {
            let (chosen_user, metric_y) = relay_local_select(r, group, slot, real, cfg);
            RelayNodeState {
                relay_index: r,
                local_gains: group.iter().map(|&u| real.ur(u, r)).collect(),
                relay_bs_gain: real.rb(r),
                chosen_user,
                metric_y,
                backoff_deadline: backoff(metric_y),
                status: RelayStatus::Counting,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTrace {
    /// `None` when the slot was lost to a collision.
    pub winner_relay: Option<usize>,
    pub winner_user: Option<usize>,
    /// Metric of the first relay to fire.
    pub metric_y: f64,
    pub rts_count: u32,
    pub collision: bool,
    /// Time from slot start to the first RTS.
    pub elapsed_backoff: f64,
}

impl ProtocolTrace {
    /// `slot,winner_relay,winner_user,y,backoff_s,rts_count,collision`;
    /// missing winners are empty fields.
    pub fn csv_line(&self, slot: u64) -> String {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{slot},{},{},{},{},{},{}",
            opt(self.winner_relay),
            opt(self.winner_user),
            self.metric_y,
            self.elapsed_backoff,
            self.rts_count,
            u8::from(self.collision)
        )
    }

    pub const CSV_HEADER: &'static str = "slot,winner_relay,winner_user,metric_y,backoff_s,rts_count,collision";
}

/// Timer expiry event; earliest deadline first, then lowest relay index.
#[derive(Debug, PartialEq)]
struct Expiry {
    at: f64,
    relay: usize,
}

impl Eq for Expiry {}

impl Ord for Expiry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.at.total_cmp(&other.at).then(self.relay.cmp(&other.relay))
    }
}

impl PartialOrd for Expiry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Resolves one contention round and updates every relay's status.
pub fn run_contention(states: &mut [RelayNodeState], backoff: &BackoffConfig) -> ProtocolTrace {
    assert!(!states.is_empty(), "no relays to contend");
    let mut queue: BinaryHeap<Reverse<Expiry>> =
        states.iter().enumerate().map(|(i, s)| Reverse(Expiry { at: s.backoff_deadline, relay: i })).collect();
    let Reverse(first) = queue.pop().expect("nonempty");
    states[first.relay].status = RelayStatus::Transmitting;
    let mut rts_count = 1;
    // expiries inside the vulnerable window miss the RTS and fire as well
    while let Some(Reverse(next)) = queue.peek() {
        if next.at - first.at < backoff.vulnerable_window {
            states[next.relay].status = RelayStatus::Transmitting;
            rts_count += 1;
            queue.pop();
        } else {
            break;
        }
    }
    for Reverse(ev) in queue {
        states[ev.relay].status = RelayStatus::Suppressed;
    }
    let winner = &states[first.relay];
    let collision = rts_count > 1;
    ProtocolTrace {
        winner_relay: (!collision).then_some(winner.relay_index),
        winner_user: (!collision).then_some(winner.chosen_user),
        metric_y: winner.metric_y,
        rts_count,
        collision,
        elapsed_backoff: backoff.pilot_time + first.at,
    }
}

/// One full protocol slot for the group that owns `slot`.
pub fn protocol_slot(
    slot: u64,
    pattern: &GroupingPattern,
    real: &ChannelRealization,
    cfg: &NetworkConfig,
    backoff: &BackoffConfig,
) -> (SlotOutcome, ProtocolTrace) {
    let group = pattern.group_for_slot(slot);
    let mut states = init_relays(group, slot, real, cfg, backoff.map());
    let trace = run_contention(&mut states, backoff);
    let outcome = SlotOutcome {
        slot_index: slot,
        // on collision the slot still belonged to the first relay's pick
        scheduled_user: states
            .iter()
            .filter(|s| s.status == RelayStatus::Transmitting)
            .min_by(|a, b| a.backoff_deadline.total_cmp(&b.backoff_deadline))
            .map(|s| s.chosen_user)
            .expect("one relay fired"),
        selected_relay: trace.winner_relay,
        metric_w: trace.metric_y,
        outage: trace.collision || trace.metric_y < cfg.decode_floor(),
    };
    (outcome, trace)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadReport {
    pub slots: usize,
    pub rts_per_slot: f64,
    pub collision_rate: f64,
    pub mean_backoff: f64,
}

pub fn overhead_report(traces: &[ProtocolTrace]) -> Result<OverheadReport> {
    if traces.is_empty() {
        return Err(Error::InvalidArgument("no protocol traces".into()));
    }
    let n = traces.len() as f64;
    Ok(OverheadReport {
        slots: traces.len(),
        rts_per_slot: traces.iter().map(|t| t.rts_count as f64).sum::<f64>() / n,
        collision_rate: traces.iter().filter(|t| t.collision).count() as f64 / n,
        mean_backoff: traces.iter().map(|t| t.elapsed_backoff).sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduling::{make_grouping, tie_priority, GroupingStrategy};

    fn unit_cfg(m: usize, n: usize) -> NetworkConfig {
        NetworkConfig::symmetric(m, n, 1.0).unwrap().with_snr(2.0)
    }

    #[test]
    fn local_select_examples() {
        let cfg = unit_cfg(2, 1);
        let real = ChannelRealization::from_rows(&[vec![4.0], vec![2.0]], vec![3.0]).unwrap();
        assert_eq!(relay_local_select(0, &[0, 1], 0, &real, &cfg), (0, 3.0));
        assert_eq!(relay_local_select(0, &[1], 0, &real, &cfg), (1, 2.0));
        // tie at the relay-side cap follows the per-slot priority
        let real = ChannelRealization::from_rows(&[vec![5.0], vec![4.0]], vec![3.0]).unwrap();
        for slot in 0..10 {
            let expect = if tie_priority(slot, 0) < tie_priority(slot, 1) { 0 } else { 1 };
            assert_eq!(relay_local_select(0, &[1, 0], slot, &real, &cfg), (expect, 3.0));
        }
    }

    #[test]
    fn backoff_is_strictly_decreasing_and_finite_at_zero() {
        let b = BackoffConfig::for_network(&unit_cfg(1, 1));
        let f = b.map();
        assert!(f(2.0) < f(1.0));
        assert!(f(1e-12) < f(0.0));
        assert!(f(0.0).is_finite());
        assert_eq!(f(0.0), b.scale / b.epsilon);
    }

    #[test]
    fn contention_picks_largest_metric() {
        let cfg = unit_cfg(2, 3);
        let real =
            ChannelRealization::from_rows(&[vec![1.0, 5.0, 2.0], vec![3.0, 0.5, 7.0]], vec![4.0, 4.0, 2.5]).unwrap();
        let backoff = BackoffConfig::for_network(&cfg);
        let mut states = init_relays(&[0, 1], 0, &real, &cfg, backoff.map());
        let trace = run_contention(&mut states, &backoff);
        // Y = [3, 4, 2.5]
        assert_eq!(trace.winner_relay, Some(1));
        assert_eq!(trace.winner_user, Some(0));
        assert_eq!(trace.rts_count, 1);
        assert!(!trace.collision);
        let tx: Vec<_> = states.iter().filter(|s| s.status == RelayStatus::Transmitting).collect();
        assert_eq!(tx.len(), 1);
        assert!(states.iter().all(|s| s.status != RelayStatus::Counting));
    }

    #[test]
    fn equal_metrics_collide_inside_window() {
        let cfg = unit_cfg(1, 2);
        let real = ChannelRealization::from_rows(&[vec![5.0, 5.0]], vec![2.0, 2.0]).unwrap();
        let backoff = BackoffConfig::for_network(&cfg).with_window(1e-6);
        let mut states = init_relays(&[0], 0, &real, &cfg, backoff.map());
        let trace = run_contention(&mut states, &backoff);
        assert!(trace.collision);
        assert_eq!(trace.rts_count, 2);
        assert_eq!(trace.winner_relay, None);
        // zero window: tie resolved toward the lower relay
        let backoff = backoff.with_window(0.0);
        let mut states = init_relays(&[0], 0, &real, &cfg, backoff.map());
        let trace = run_contention(&mut states, &backoff);
        assert_eq!(trace.winner_relay, Some(0));
        assert_eq!(trace.rts_count, 1);
    }

    #[test]
    fn collision_slot_is_an_outage() {
        let cfg = unit_cfg(2, 2);
        let real = ChannelRealization::from_rows(&[vec![9.0, 9.0], vec![1.0, 1.0]], vec![8.0, 8.0]).unwrap();
        let p = make_grouping(GroupingStrategy::FixedOrder, 2, &cfg).unwrap();
        let backoff = BackoffConfig::for_network(&cfg).with_window(1.0);
        let (out, trace) = protocol_slot(0, &p, &real, &cfg, &backoff);
        assert!(trace.collision);
        assert!(out.outage);
        assert_eq!(out.selected_relay, None);
    }

    #[test]
    fn overhead_aggregates() {
        let ok = ProtocolTrace {
            winner_relay: Some(0),
            winner_user: Some(1),
            metric_y: 2.0,
            rts_count: 1,
            collision: false,
            elapsed_backoff: 1e-3,
        };
        let bad = ProtocolTrace { winner_relay: None, winner_user: None, rts_count: 2, collision: true, ..ok.clone() };
        let r = overhead_report(&[ok.clone(), ok.clone()]).unwrap();
        assert_eq!((r.rts_per_slot, r.collision_rate), (1.0, 0.0));
        let r = overhead_report(&[bad.clone(), bad.clone()]).unwrap();
        assert_eq!(r.collision_rate, 1.0);
        assert_eq!(r.rts_per_slot, 2.0);
        assert!((r.mean_backoff - 1e-3).abs() < 1e-18);
        assert!(overhead_report(&[]).is_err());
        assert_eq!(ok.csv_line(7), "7,0,1,2,0.001,1,0");
        assert_eq!(bad.csv_line(8), "8,,,2,0.001,2,1");
    }
}
