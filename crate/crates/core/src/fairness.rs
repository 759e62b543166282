//! Airtime fairness and channel access delay.
//!
//! Airtime is counted in slots: a user earns one unit in every slot it is
//! scheduled, whether or not that slot ends in outage. Access delay is the
//! gap in slots between consecutive scheduled slots of the same user.
//! Gap moments are kept as exact integers so that shard merges are exact.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Jain's index `(sum x)^2 / (M sum x^2)`.
pub fn jain_index(airtimes: &[f64]) -> Result<f64> {
    if airtimes.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(Error::InvalidArgument("airtimes must be finite and nonnegative".into()));
    }
    let sum: f64 = airtimes.iter().sum();
    if airtimes.is_empty() || sum == 0.0 {
        return Err(Error::ZeroAllocation);
    }
    let sq: f64 = airtimes.iter().map(|x| x * x).sum();
    Ok(sum * sum / (airtimes.len() as f64 * sq))
}

/// Fairness floor of k-user relaxed TDMA: one user per group takes all of
/// its group's airtime.
pub fn fi_lower_bound(k: usize, num_users: usize) -> Result<f64> {
    if k == 0 || k > num_users || !num_users.is_multiple_of(k) {
        return Err(Error::InvalidArgument(format!("group size {k} must divide the user count {num_users}")));
    }
    Ok(1.0 / k as f64)
}

/// Per-user slot counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AirtimeLedger {
    pub per_user_slots: Vec<u64>,
    pub total_slots: u64,
}

impl AirtimeLedger {
    pub fn new(num_users: usize) -> Self {
        Self { per_user_slots: vec![0; num_users], total_slots: 0 }
    }

    #[inline]
    pub fn record(&mut self, user: usize) {
        self.per_user_slots[user] += 1;
        self.total_slots += 1;
    }

    pub fn shares(&self) -> Vec<f64> {
        let total = self.total_slots.max(1) as f64;
        self.per_user_slots.iter().map(|&c| c as f64 / total).collect()
    }

    pub fn jain_index(&self) -> Result<f64> {
        let counts: Vec<f64> = self.per_user_slots.iter().map(|&c| c as f64).collect();
        jain_index(&counts)
    }

    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.per_user_slots.len(), other.per_user_slots.len());
        for (a, b) in self.per_user_slots.iter_mut().zip(&other.per_user_slots) {
            *a += b;
        }
        self.total_slots += other.total_slots;
    }
}

/// Exact first and second moments of a set of integer gaps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GapMoments {
    pub count: u64,
    pub sum: u64,
    pub sum_sq: u128,
}

impl GapMoments {
    #[inline]
    pub fn push(&mut self, gap: u64) {
        self.count += 1;
        self.sum += gap;
        self.sum_sq += (gap as u128) * (gap as u128);
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum += other.sum;
        self.sum_sq += other.sum_sq;
    }
}

/// Access-delay gaps for every user, in slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelaySamples {
    last_slot: Vec<Option<u64>>,
    moments: Vec<GapMoments>,
}

impl DelaySamples {
    pub fn new(num_users: usize) -> Self {
        Self { last_slot: vec![None; num_users], moments: vec![GapMoments::default(); num_users] }
    }

    /// Builds samples from explicit gap lists. Gaps must be at least one slot.
    pub fn from_gaps(gaps: &[Vec<u64>]) -> Result<Self> {
        let mut s = Self::new(gaps.len());
        for (u, list) in gaps.iter().enumerate() {
            for &g in list {
                s.push_gap(u, g)?;
            }
        }
        Ok(s)
    }

    pub fn push_gap(&mut self, user: usize, gap: u64) -> Result<()> {
        if gap == 0 {
            return Err(Error::InvalidArgument("access-delay gaps are at least one slot".into()));
        }
        self.moments[user].push(gap);
        Ok(())
    }

    /// Notes that `user` transmitted in `slot`. Slots must be increasing.
    #[inline]
    pub fn record_transmission(&mut self, user: usize, slot: u64) {
        if let Some(prev) = self.last_slot[user] {
            debug_assert!(slot > prev);
            self.moments[user].push(slot - prev);
        }
        self.last_slot[user] = Some(slot);
    }

    pub fn num_users(&self) -> usize {
        self.moments.len()
    }

    pub fn moments(&self, user: usize) -> GapMoments {
        self.moments[user]
    }

    /// Adds `other`'s gaps. Gaps spanning the boundary between the two
    /// sample sets are not formed.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.moments.len(), other.moments.len());
        for (a, b) in self.moments.iter_mut().zip(&other.moments) {
            a.merge(b);
        }
        for (a, b) in self.last_slot.iter_mut().zip(&other.last_slot) {
            if b.is_some() {
                *a = *b;
            }
        }
    }
}

/// Sample mean and unbiased variance of the access delay in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayMoments {
    pub gaps: u64,
    pub mean: f64,
    pub variance: f64,
}

impl DelayMoments {
    fn from_gaps(m: &GapMoments, slot_duration: f64) -> Option<Self> {
        if m.count < 2 {
            return None;
        }
        let n = m.count as u128;
        let s = m.sum as u128;
        // n * sum_sq >= sum^2 by Cauchy-Schwarz, so this cannot underflow
        let num = n * m.sum_sq - s * s;
        let var_slots = num as f64 / (n * (n - 1)) as f64;
        Some(Self {
            gaps: m.count,
            mean: m.sum as f64 / m.count as f64 * slot_duration,
            variance: var_slots * slot_duration * slot_duration,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DelayReport {
    /// `None` for users with fewer than two gaps.
    pub per_user: Vec<Option<DelayMoments>>,
    pub pooled: Option<DelayMoments>,
}

impl DelayReport {
    pub fn insufficient_users(&self) -> Vec<usize> {
        self.per_user.iter().enumerate().filter(|(_, m)| m.is_none()).map(|(u, _)| u).collect()
    }
}

pub fn delay_statistics(samples: &DelaySamples, slot_duration: f64) -> DelayReport {
    let mut pooled = GapMoments::default();
    let per_user = samples
        .moments
        .iter()
        .map(|m| {
            pooled.merge(m);
            DelayMoments::from_gaps(m, slot_duration)
        })
        .collect();
    DelayReport { per_user, pooled: DelayMoments::from_gaps(&pooled, slot_duration) }
}

/// Jain index of the airtime inside each length-`window` sliding window over
/// a per-slot schedule. Entry `(t, fi)` covers slots `t + 1 - window ..= t`.
pub fn windowed_fi_series(schedule: &[usize], num_users: usize, window: usize) -> Result<Vec<(u64, f64)>> {
    if window == 0 || num_users == 0 {
        return Err(Error::InvalidArgument("window and user count must be positive".into()));
    }
    if window < num_users {
        log::warn!("fairness window of {window} slots is shorter than the {num_users}-user cycle");
    }
    let mut tracker = WindowTracker::new(window, num_users);
    let mut out = Vec::with_capacity(schedule.len().saturating_sub(window - 1));
    for (t, &u) in schedule.iter().enumerate() {
        let leaving = (t >= window).then(|| schedule[t - window]);
        if let Some(fi) = tracker.push(u, leaving) {
            out.push((t as u64, fi));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct WindowTracker {
    len: usize,
    num_users: usize,
    counts: Vec<u64>,
    sum_sq: u64,
    filled: usize,
}

impl WindowTracker {
    fn new(len: usize, num_users: usize) -> Self {
        Self { len, num_users, counts: vec![0; num_users], sum_sq: 0, filled: 0 }
    }

    /// Adds `user`, drops `leaving` (the user `len` slots back), and returns
    /// the window's index once the window is full.
    #[inline]
    fn push(&mut self, user: usize, leaving: Option<usize>) -> Option<f64> {
        self.sum_sq += 2 * self.counts[user] + 1;
        self.counts[user] += 1;
        if let Some(l) = leaving {
            self.counts[l] -= 1;
            self.sum_sq -= 2 * self.counts[l] + 1;
        } else {
            self.filled += 1;
        }
        (self.filled == self.len).then(|| {
            let w = self.len as f64;
            w * w / (self.num_users as f64 * self.sum_sq as f64)
        })
    }
}

/// Streaming mean of the sliding-window Jain index for several window
/// lengths at once.
#[derive(Debug, Clone)]
pub struct WindowedFairness {
    trackers: Vec<WindowTracker>,
    history: VecDeque<usize>,
    fi_sum: Vec<f64>,
    fi_count: Vec<u64>,
}

impl WindowedFairness {
    pub fn new(num_users: usize, windows: &[usize]) -> Result<Self> {
        if num_users == 0 || windows.contains(&0) {
            return Err(Error::InvalidArgument("window and user count must be positive".into()));
        }
        Ok(Self {
            trackers: windows.iter().map(|&w| WindowTracker::new(w, num_users)).collect(),
            history: VecDeque::with_capacity(windows.iter().copied().max().unwrap_or(0) + 1),
            fi_sum: vec![0.0; windows.len()],
            fi_count: vec![0; windows.len()],
        })
    }

    pub fn windows(&self) -> Vec<usize> {
        self.trackers.iter().map(|t| t.len).collect()
    }

    pub fn record(&mut self, user: usize) {
        self.history.push_front(user);
        for (i, tr) in self.trackers.iter_mut().enumerate() {
            let leaving = self.history.get(tr.len).copied();
            if let Some(fi) = tr.push(user, leaving) {
                self.fi_sum[i] += fi;
                self.fi_count[i] += 1;
            }
        }
        let max = self.trackers.iter().map(|t| t.len).max().unwrap_or(0);
        self.history.truncate(max);
    }

    /// Mean windowed index per window length; `None` where no window filled.
    pub fn mean_fi(&self) -> Vec<Option<f64>> {
        self.fi_sum.iter().zip(&self.fi_count).map(|(s, &c)| (c > 0).then(|| s / c as f64)).collect()
    }

    /// Pools the window averages of an independent run.
    pub fn merge(&mut self, other: &Self) {
        assert_eq!(self.windows(), other.windows());
        for i in 0..self.fi_sum.len() {
            self.fi_sum[i] += other.fi_sum[i];
            self.fi_count[i] += other.fi_count[i];
        }
    }
}
