//! Single-relay selection for a scheduled user.
//!
//! Two rules are implemented. The min-max rule picks the relay with the best
//! end-to-end bottleneck `min{P_user g_ur, P_relay g_rB}`; it needs no
//! knowledge of which relays decoded. The decoding-set rule first forms the
//! set of relays that decoded the first hop and then picks the one with the
//! strongest relay-BS gain. The two may choose different relays but always
//! agree on whether the slot is in outage.

use crate::model::{ChannelRealization, NetworkConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub relay_index: usize,
    /// The quantity compared against `tau * N_0` to decide outage.
    pub metric: f64,
    /// Relays whose first-hop SNR reached the threshold.
    pub decoding_set: Vec<usize>,
}

/// End-to-end bottleneck of the path `user -> relay -> BS`.
#[inline]
pub fn path_metric(user: usize, relay: usize, real: &ChannelRealization, cfg: &NetworkConfig) -> f64 {
    (cfg.user_power() * real.ur(user, relay)).min(cfg.relay_power() * real.rb(relay))
}

/// Best relay for `user` under the min-max rule, without building the
/// decoding set. Ties go to the lowest relay index.
#[inline]
pub fn best_relay(user: usize, real: &ChannelRealization, cfg: &NetworkConfig) -> (usize, f64) {
    let (pu, pr) = (cfg.user_power(), cfg.relay_power());
    let mut best = (0, f64::NEG_INFINITY);
    for (r, (g_ur, g_rb)) in real.user_row(user).iter().zip(real.relay_gains()).enumerate() {
        let m = (pu * g_ur).min(pr * g_rb);
        if m > best.1 {
            best = (r, m);
        }
    }
    best
}

pub fn decoding_set(user: usize, real: &ChannelRealization, cfg: &NetworkConfig) -> Vec<usize> {
    let (pu, floor) = (cfg.user_power(), cfg.decode_floor());
    // P_user g / N_0 >= tau, compared in the same units as the path metric
    real.user_row(user).iter().enumerate().filter(|(_, g)| pu * **g >= floor).map(|(r, _)| r).collect()
}

/// Outage-optimal min-max relay selection.
pub fn select_relay_min_max(user: usize, real: &ChannelRealization, cfg: &NetworkConfig) -> SelectionResult {
    let (relay_index, metric) = best_relay(user, real, cfg);
    SelectionResult { relay_index, metric, decoding_set: decoding_set(user, real, cfg) }
}

/// Strongest relay-BS link among the relays that decoded. `None` when no
/// relay decoded the first hop.
pub fn select_relay_method_theta(
    user: usize,
    real: &ChannelRealization,
    cfg: &NetworkConfig,
) -> Option<SelectionResult> {
    let set = decoding_set(user, real, cfg);
    let mut best: Option<usize> = None;
    for &r in &set {
        if best.is_none_or(|b| real.rb(r) > real.rb(b)) {
            best = Some(r);
        }
    }
    best.map(|r| SelectionResult { relay_index: r, metric: cfg.relay_power() * real.rb(r), decoding_set: set })
}

/// `metric < tau * N_0`; an empty decoding set is always an outage.
pub fn is_outage(selection: Option<&SelectionResult>, cfg: &NetworkConfig) -> bool {
    selection.is_none_or(|s| s.metric < cfg.decode_floor())
}
