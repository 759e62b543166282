//! Uplink scheduling for two-hop decode-and-forward relay networks.
//!
//! Users reach a base station through one of `N` relays. Each slot one user
//! transmits, the best relay for it forwards, and the slot is in outage when
//! the weaker hop falls below the decoding threshold. The crate provides the
//! fading model, relay selection, fixed TDMA, greedy and k-user relaxed TDMA
//! scheduling, closed-form outage expressions, fairness metrics, a
//! distributed backoff implementation of the relaxed scheduler, and a
//! deterministic parallel Monte Carlo engine.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod error;
pub mod fairness;
pub mod model;
pub mod protocol;
pub mod scenarios;
pub mod scheduling;
pub mod seed;
pub mod selection;
pub mod simulator;

pub use error::{Error, Result};
pub use model::{ChannelRealization, FadingMode, FadingProcess, NetworkConfig};
pub use scheduling::{make_grouping, GroupingPattern, GroupingStrategy, SchedulingPolicy, SlotOutcome};
pub use selection::SelectionResult;
pub use simulator::{ExperimentPlan, FadingSpec, PolicyEntry, PolicyKind};
