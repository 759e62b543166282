//! Static network description and per-slot channel realizations.
//!
//! All gains are linear power gains. A link's instantaneous gain is
//! `|h|^2` for a circularly-symmetric complex Gaussian coefficient `h`, so
//! its marginal is exponential with the configured mean. Two sampling modes
//! exist: independent draws every slot, and a first-order Gauss-Markov
//! recursion on `h` whose lag-one correlation comes from [`doppler_to_rho`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_NOISE_POWER: f64 = 1.0;
pub const DEFAULT_SNR_THRESHOLD: f64 = 3.0;
pub const DEFAULT_SLOT_DURATION: f64 = 0.002;
pub const DEFAULT_DOPPLER_HZ: f64 = 15.0;

/// Static description of one cell: `M` users, `N` relays, one base station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// `M x N` mean user-to-relay power gains, one row per user.
    pub mean_gain_ur: Vec<Vec<f64>>,
    /// Length-`N` mean relay-to-BS power gains.
    pub mean_gain_rb: Vec<f64>,
    /// Total power per relayed symbol, `P_user + P_relay`.
    pub total_power: f64,
    /// Fraction of `total_power` spent by the user, in `(0, 1)`.
    pub alpha: f64,
    pub noise_power: f64,
    /// Linear SNR decoding threshold.
    pub snr_threshold: f64,
    /// Relay cycle length in seconds.
    pub slot_duration: f64,
}

impl NetworkConfig {
    /// Builds a config with the default power split, noise, threshold and
    /// slot length, at `P_0 / N_0 = 1`.
    pub fn new(mean_gain_ur: Vec<Vec<f64>>, mean_gain_rb: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            mean_gain_ur,
            mean_gain_rb,
            total_power: DEFAULT_NOISE_POWER,
            alpha: DEFAULT_ALPHA,
            noise_power: DEFAULT_NOISE_POWER,
            snr_threshold: DEFAULT_SNR_THRESHOLD,
            slot_duration: DEFAULT_SLOT_DURATION,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every link has mean gain `sigma`.
    pub fn symmetric(num_users: usize, num_relays: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![vec![sigma; num_relays]; num_users], vec![sigma; num_relays])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let n = self.mean_gain_rb.len();
        if self.mean_gain_ur.is_empty() {
            return bad("at least one user is required".into());
        }
        if n == 0 {
            return bad("at least one relay is required".into());
        }
        for (u, row) in self.mean_gain_ur.iter().enumerate() {
            if row.len() != n {
                return bad(format!("user {u} has {} user-relay gains, expected {n}", row.len()));
            }
            if let Some(r) = row.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
                return bad(format!("mean gain of link ({u}, {r}) must be positive"));
            }
        }
        if let Some(r) = self.mean_gain_rb.iter().position(|g| !(g.is_finite() && *g > 0.0)) {
            return bad(format!("mean gain of relay {r} to BS must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} is outside (0, 1)", self.alpha));
        }
        for (name, v) in [
            ("total_power", self.total_power),
            ("noise_power", self.noise_power),
            ("snr_threshold", self.snr_threshold),
            ("slot_duration", self.slot_duration),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} = {v} must be positive"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.mean_gain_ur.len()
    }

    #[inline]
    pub fn num_relays(&self) -> usize {
        self.mean_gain_rb.len()
    }

    #[inline]
    pub fn user_power(&self) -> f64 {
        self.alpha * self.total_power
    }

    #[inline]
    pub fn relay_power(&self) -> f64 {
        self.total_power - self.user_power()
    }

    /// `eta = P_0 / N_0`.
    #[inline]
    pub fn snr(&self) -> f64 {
        self.total_power / self.noise_power
    }

    /// `tau * N_0`: the received-power level a link metric must reach.
    #[inline]
    pub fn decode_floor(&self) -> f64 {
        self.snr_threshold * self.noise_power
    }

    /// Copy with `P_0` set so that `P_0 / N_0 = eta`.
    pub fn with_snr(&self, eta: f64) -> Self {
        Self { total_power: eta * self.noise_power, ..self.clone() }
    }

    pub fn with_snr_db(&self, snr_db: f64) -> Self {
        self.with_snr(db_to_linear(snr_db))
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    /// Arithmetic mean of user `u`'s mean gains over all relays.
    pub fn user_mean_gain(&self, u: usize) -> f64 {
        let row = &self.mean_gain_ur[u];
        row.iter().sum::<f64>() / row.len() as f64
    }
}

#[inline]
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[inline]
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Instantaneous power gains for one relay cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    num_relays: usize,
    /// Row-major `M x N`.
    gain_ur: Vec<f64>,
    gain_rb: Vec<f64>,
}

impl ChannelRealization {
    pub fn zeros(num_users: usize, num_relays: usize) -> Self {
        Self { num_relays, gain_ur: vec![0.0; num_users * num_relays], gain_rb: vec![0.0; num_relays] }
    }

    pub fn from_rows(gain_ur: &[Vec<f64>], gain_rb: Vec<f64>) -> Result<Self> {
        let n = gain_rb.len();
        if gain_ur.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidArgument("ragged user-relay gain matrix".into()));
        }
        let flat: Vec<f64> = gain_ur.iter().flatten().copied().collect();
        if flat.iter().chain(&gain_rb).any(|g| !(*g >= 0.0)) {
            return Err(Error::InvalidArgument("channel gains must be nonnegative".into()));
        }
        Ok(Self { num_relays: n, gain_ur: flat, gain_rb })
    }

    #[inline]
    pub fn num_users(&self) -> usize {
        self.gain_ur.len().checked_div(self.num_relays).unwrap_or(0)
    }

    #[inline]
    pub fn num_relays(&self) -> usize {
        self.num_relays
    }

    #[inline]
    pub fn ur(&self, user: usize, relay: usize) -> f64 {
        self.gain_ur[user * self.num_relays + relay]
    }

    #[inline]
    pub fn rb(&self, relay: usize) -> f64 {
        self.gain_rb[relay]
    }

    #[inline]
    pub fn user_row(&self, user: usize) -> &[f64] {
        &self.gain_ur[user * self.num_relays..(user + 1) * self.num_relays]
    }

    pub fn relay_gains(&self) -> &[f64] {
        &self.gain_rb
    }

    pub fn set_ur(&mut self, user: usize, relay: usize, gain: f64) {
        self.gain_ur[user * self.num_relays + relay] = gain;
    }

    pub fn set_rb(&mut self, relay: usize, gain: f64) {
        self.gain_rb[relay] = gain;
    }

    /// Every gain multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            num_relays: self.num_relays,
            gain_ur: self.gain_ur.iter().map(|g| g * c).collect(),
            gain_rb: self.gain_rb.iter().map(|g| g * c).collect(),
        }
    }
}

/// How successive realizations relate in time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum FadingMode {
    Iid,
    /// `h[t+1] = rho * h[t] + sqrt(1 - rho^2) * w[t]`, with separate
    /// correlation for user-relay and relay-BS links.
    GaussMarkov {
        rho_ur: f64,
        rho_rb: f64,
    },
}

impl FadingMode {
    pub fn gauss_markov(rho: f64) -> Self {
        Self::GaussMarkov { rho_ur: rho, rho_rb: rho }
    }

    fn validate(&self) -> Result<()> {
        if let Self::GaussMarkov { rho_ur, rho_rb } = *self {
            for rho in [rho_ur, rho_rb] {
                if !(0.0..1.0).contains(&rho) {
                    return Err(Error::InvalidArgument(format!("Gauss-Markov correlation {rho} is outside [0, 1)")));
                }
            }
        }
        Ok(())
    }
}

const STREAM_UR: u64 = 1;
const STREAM_RB: u64 = 2;

/// Stream id of a link. Independent of `M` and `N`, so growing the network
/// leaves the existing links' sequences untouched.
fn link_stream(class: u64, a: usize, b: usize) -> u64 {
    (class << 56) | ((a as u64) << 28) | b as u64
}

#[derive(Debug, Clone)]
struct Link {
    rng: ChaCha8Rng,
    coeff: Complex64,
}

impl Link {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, coeff: Complex64::new(0.0, 0.0) }
    }

    /// Unit-power circularly-symmetric complex Gaussian.
    #[inline]
    fn cn01(&mut self) -> Complex64 {
        let re: f64 = StandardNormal.sample(&mut self.rng);
        let im: f64 = StandardNormal.sample(&mut self.rng);
        Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    }

    /// Advances the link and returns its unit-mean power gain.
    #[inline]
    fn step(&mut self, rho: Option<f64>) -> f64 {
        match rho {
            None => Exp1.sample(&mut self.rng),
            Some(rho) => {
                let w = self.cn01();
                self.coeff = self.coeff * rho + w * (1.0 - rho * rho).sqrt();
                self.coeff.norm_sqr()
            }
        }
    }
}

/// Per-link fading state. Single owner; clone to fork an identical stream.
#[derive(Debug, Clone)]
pub struct FadingProcess {
    mode: FadingMode,
    seed: u64,
    num_users: usize,
    num_relays: usize,
    ur: Vec<Link>,
    rb: Vec<Link>,
}

impl FadingProcess {
    pub fn new(mode: FadingMode, seed: u64, num_users: usize, num_relays: usize) -> Result<Self> {
        mode.validate()?;
        let mut ur = Vec::with_capacity(num_users * num_relays);
        for u in 0..num_users {
            for r in 0..num_relays {
                ur.push(Link::new(seed, link_stream(STREAM_UR, u, r)));
            }
        }
        let mut rb: Vec<Link> = (0..num_relays).map(|r| Link::new(seed, link_stream(STREAM_RB, r, 0))).collect();
        if let FadingMode::GaussMarkov { .. } = mode {
            // start in the stationary distribution
            for link in ur.iter_mut().chain(rb.iter_mut()) {
                link.coeff = link.cn01();
            }
        }
        Ok(Self { mode, seed, num_users, num_relays, ur, rb })
    }

    pub fn for_config(mode: FadingMode, seed: u64, cfg: &NetworkConfig) -> Result<Self> {
        Self::new(mode, seed, cfg.num_users(), cfg.num_relays())
    }

    pub fn mode(&self) -> FadingMode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws the next slot's gains.
    pub fn draw_realization(&mut self, cfg: &NetworkConfig) -> ChannelRealization {
        let mut out = ChannelRealization::zeros(self.num_users, self.num_relays);
        self.draw_into(cfg, &mut out);
        out
    }

    /// Allocation-free variant of [`draw_realization`](Self::draw_realization).
    pub fn draw_into(&mut self, cfg: &NetworkConfig, out: &mut ChannelRealization) {
        assert_eq!(cfg.num_users(), self.num_users, "config/process user count mismatch");
        assert_eq!(cfg.num_relays(), self.num_relays, "config/process relay count mismatch");
        let (rho_ur, rho_rb) = match self.mode {
            FadingMode::Iid => (None, None),
            FadingMode::GaussMarkov { rho_ur, rho_rb } => (Some(rho_ur), Some(rho_rb)),
        };
        let n = self.num_relays;
        out.num_relays = n;
        out.gain_ur.resize(self.num_users * n, 0.0);
        out.gain_rb.resize(n, 0.0);
        for (u, row) in cfg.mean_gain_ur.iter().enumerate() {
            for (r, mean) in row.iter().enumerate() {
                out.gain_ur[u * n + r] = mean * self.ur[u * n + r].step(rho_ur);
            }
        }
        for (r, mean) in cfg.mean_gain_rb.iter().enumerate() {
            out.gain_rb[r] = mean * self.rb[r].step(rho_rb);
        }
    }

    /// Current unit-power complex coefficient of a user-relay link. Only
    /// tracked in Gauss-Markov mode.
    pub fn ur_coefficient(&self, user: usize, relay: usize) -> Option<Complex64> {
        match self.mode {
            FadingMode::Iid => None,
            FadingMode::GaussMarkov { .. } => Some(self.ur[user * self.num_relays + relay].coeff),
        }
    }
}

/// Lag-one correlation of the fading coefficient for a given Doppler spread
/// and slot length: `J0(2 pi f_d delta)`.
pub fn doppler_to_rho(doppler_hz: f64, slot_duration_s: f64) -> f64 {
    bessel_j0(2.0 * PI * doppler_hz * slot_duration_s)
}

/// Bessel function of the first kind, order zero.
///
/// Abramowitz & Stegun 9.4.1 (|x| <= 3, error < 5e-8) and 9.4.3
/// (|x| > 3, error < 1.6e-8 in the modulus and 7e-8 in the phase).
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= 3.0 {
        let y = (x / 3.0).powi(2);
        1.0 + y
            * (-2.249_999_7
                + y * (1.265_620_8 + y * (-0.316_386_6 + y * (0.044_447_9 + y * (-0.003_944_4 + y * 0.000_210_0)))))
    } else {
        let y = 3.0 / x;
        let f0 = 0.797_884_56
            + y * (-0.000_000_77
                + y * (-0.005_527_40
                    + y * (-0.000_095_12 + y * (0.001_372_37 + y * (-0.000_728_05 + y * 0.000_144_76)))));
        let theta0 = x - std::f64::consts::FRAC_PI_4
            + y * (-0.041_663_97
                + y * (-0.000_039_54
                    + y * (0.002_625_73 + y * (-0.000_541_25 + y * (-0.000_293_33 + y * 0.000_135_58)))));
        f0 * theta0.cos() / x.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Power series of J0, used as an independent oracle.
    fn j0_series(x: f64, terms: usize) -> f64 {
        let q = -(x * x) / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..terms {
            term *= q / ((k * k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn j0_matches_series_oracle() {
        for i in 0..=1000 {
            let x = i as f64 * 0.01;
            let err = (bessel_j0(x) - j0_series(x, 40)).abs();
            assert!(err < 1e-6, "x = {x}: err {err}");
        }
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_to_rho(0.0, 0.002), 1.0);
        assert_eq!(doppler_to_rho(0.0, 17.0), 1.0);
        let rho = doppler_to_rho(15.0, 0.002);
        assert!((rho - j0_series(2.0 * PI * 15.0 * 0.002, 8)).abs() < 1e-6);
        assert!((rho - 0.99114).abs() < 5e-6, "{rho}");
    }

    #[test]
    fn j0_first_zero() {
        // bisection on the series oracle
        let (mut lo, mut hi) = (2.0, 3.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if j0_series(mid, 40) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((lo - 2.404_825_557_695_773).abs() < 1e-9);
        assert!(bessel_j0(lo).abs() < 1e-4);
        assert!(bessel_j0(2.4048).abs() < 1e-4);
    }

    #[test]
    fn power_split_identity() {
        for a in [1e-9, 0.1, 0.3, 0.5, 0.77, 0.999_999] {
            for p0 in [1e-3, 1.0, 31.6, 1e6] {
                let cfg = NetworkConfig::symmetric(2, 2, 1.0).unwrap().with_snr(p0).with_alpha(a);
                let sum = cfg.user_power() + cfg.relay_power();
                assert!((sum - cfg.total_power).abs() <= f64::EPSILON * cfg.total_power);
            }
        }
    }

    #[test]
    fn validation_rejects_bad_configs() {
        let ok = NetworkConfig::symmetric(3, 2, 1.0).unwrap();
        assert!(ok.with_alpha(1.2).validate().is_err());
        assert!(ok.with_alpha(0.0).validate().is_err());
        let mut c = ok.clone();
        c.mean_gain_ur[1][0] = 0.0;
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.mean_gain_ur[2].push(1.0);
        assert!(c.validate().is_err());
        let mut c = ok.clone();
        c.mean_gain_rb[0] = -1.0;
        assert!(c.validate().is_err());
        assert!(NetworkConfig::new(vec![], vec![1.0]).is_err());
        assert!(NetworkConfig::new(vec![vec![]], vec![]).is_err());
    }

    #[test]
    fn iid_sample_mean_matches_configured_mean() {
        let cfg = NetworkConfig::new(vec![vec![1.0, 1.0]; 2], vec![1.0, 2.5]).unwrap();
        let mut p = FadingProcess::for_config(FadingMode::Iid, 42, &cfg).unwrap();
        let mut out = ChannelRealization::zeros(2, 2);
        let n = 1_000_000;
        let mut sums = [0.0; 6];
        for _ in 0..n {
            p.draw_into(&cfg, &mut out);
            for u in 0..2 {
                for r in 0..2 {
                    sums[u * 2 + r] += out.ur(u, r);
                }
            }
            sums[4] += out.rb(0);
            sums[5] += out.rb(1);
        }
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        for m in &means[..5] {
            assert!((0.99..=1.01).contains(m), "{means:?}");
        }
        assert!((means[5] / 2.5 - 1.0).abs() < 0.01);
    }

    #[test]
    fn rho_zero_reproduces_iid_moments() {
        let cfg = NetworkConfig::symmetric(1, 1, 1.7).unwrap();
        let moments = |mode| {
            let mut p = FadingProcess::for_config(mode, 9, &cfg).unwrap();
            let n = 1_000_000;
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..n {
                let g = p.draw_realization(&cfg).ur(0, 0);
                s += g;
                s2 += g * g;
            }
            let m = s / n as f64;
            (m, s2 / n as f64 - m * m)
        };
        let (m0, v0) = moments(FadingMode::Iid);
        let (m1, v1) = moments(FadingMode::gauss_markov(0.0));
        assert!((m0 / m1 - 1.0).abs() < 0.01, "{m0} {m1}");
        assert!((v0 / v1 - 1.0).abs() < 0.01, "{v0} {v1}");
    }

    #[test]
    fn gauss_markov_lag_one_autocorrelation() {
        let cfg = NetworkConfig::symmetric(1, 1, 1.0).unwrap();
        let mut p = FadingProcess::for_config(FadingMode::gauss_markov(0.9), 5, &cfg).unwrap();
        let n = 1_000_000;
        let mut prev = p.ur_coefficient(0, 0).unwrap();
        let (mut cross, mut power) = (Complex64::new(0.0, 0.0), 0.0);
        for _ in 0..n {
            p.draw_realization(&cfg);
            let cur = p.ur_coefficient(0, 0).unwrap();
            cross += cur * prev.conj();
            power += prev.norm_sqr();
            prev = cur;
        }
        let acf = cross.re / power;
        assert!((acf - 0.9).abs() < 0.01, "{acf}");
    }

    #[test]
    fn equal_seeds_give_identical_sequences() {
        let cfg = NetworkConfig::symmetric(3, 4, 0.8).unwrap();
        for mode in [FadingMode::Iid, FadingMode::gauss_markov(0.95)] {
            let mut a = FadingProcess::for_config(mode, 77, &cfg).unwrap();
            let mut b = FadingProcess::for_config(mode, 77, &cfg).unwrap();
            for _ in 0..100 {
                assert_eq!(a.draw_realization(&cfg), b.draw_realization(&cfg));
            }
        }
    }

    #[test]
    fn adding_users_and_relays_keeps_existing_streams() {
        let small = NetworkConfig::symmetric(2, 2, 1.0).unwrap();
        let big = NetworkConfig::symmetric(5, 4, 1.0).unwrap();
        let mut a = FadingProcess::for_config(FadingMode::Iid, 3, &small).unwrap();
        let mut b = FadingProcess::for_config(FadingMode::Iid, 3, &big).unwrap();
        for _ in 0..50 {
            let x = a.draw_realization(&small);
            let y = b.draw_realization(&big);
            for u in 0..2 {
                for r in 0..2 {
                    assert_eq!(x.ur(u, r), y.ur(u, r));
                }
            }
            assert_eq!(x.rb(1), y.rb(1));
        }
    }

    #[test]
    fn rejects_out_of_range_rho() {
        assert!(FadingProcess::new(FadingMode::gauss_markov(1.0), 0, 1, 1).is_err());
        assert!(FadingProcess::new(FadingMode::gauss_markov(-0.1), 0, 1, 1).is_err());
    }
}
