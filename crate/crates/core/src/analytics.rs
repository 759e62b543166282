//! Closed-form outage probabilities, high-SNR approximations, diversity
//! order estimation and power gaps.
//!
//! Every evaluator takes the mean gains, `alpha` and `tau` from a
//! [`NetworkConfig`] and the SNR `eta = P_0 / N_0` as an explicit argument;
//! the config's own `total_power` is ignored. Terms of the form
//! `1 - exp(-x)` go through `expm1` so that values stay accurate down to
//! outage levels of 1e-12 and below.

use crate::error::{Error, Result};
use crate::model::{db_to_linear, NetworkConfig};
use crate::scheduling::GroupingPattern;

/// `1 - exp(-x)` without cancellation at small `x`.
#[inline]
pub fn one_minus_exp_neg(x: f64) -> f64 {
    -(-x).exp_m1()
}

/// Per-relay mean-gain terms `tau / (alpha Omega_ur)` and
/// `tau / ((1 - alpha) Omega_rB)`.
fn user_term(cfg: &NetworkConfig, u: usize, r: usize) -> f64 {
    cfg.snr_threshold / (cfg.alpha * cfg.mean_gain_ur[u][r])
}

fn relay_term(cfg: &NetworkConfig, r: usize) -> f64 {
    cfg.snr_threshold / ((1.0 - cfg.alpha) * cfg.mean_gain_rb[r])
}

/// Greedy-scheduling outage when the candidates are `users`.
pub fn outage_exact_users(cfg: &NetworkConfig, users: &[usize], eta: f64) -> f64 {
    (0..cfg.num_relays())
        .map(|r| {
            let all_users_fail: f64 = users.iter().map(|&u| one_minus_exp_neg(user_term(cfg, u, r) / eta)).product();
            let b = relay_term(cfg, r) / eta;
            // 1 - (1 - A) e^{-b} = (1 - e^{-b}) + A e^{-b}: both terms nonnegative
            one_minus_exp_neg(b) + all_users_fail * (-b).exp()
        })
        .product()
}

/// Outage probability of greedy scheduling over all `M` users, which is
/// the optimum over all scheduling policies.
pub fn outage_exact(cfg: &NetworkConfig, eta: f64) -> f64 {
    let users: Vec<usize> = (0..cfg.num_users()).collect();
    outage_exact_users(cfg, &users, eta)
}

/// Outage floor reached as the number of users grows without bound. Depends
/// only on the relay side.
pub fn outage_lower_bound(cfg: &NetworkConfig, eta: f64) -> f64 {
    (0..cfg.num_relays()).map(|r| one_minus_exp_neg(relay_term(cfg, r) / eta)).product()
}

/// Outage of a single user served alone.
pub fn outage_single_user(cfg: &NetworkConfig, user: usize, eta: f64) -> f64 {
    (0..cfg.num_relays()).map(|r| one_minus_exp_neg((user_term(cfg, user, r) + relay_term(cfg, r)) / eta)).product()
}

/// Fixed TDMA: average of the per-user outages.
pub fn outage_tdma(cfg: &NetworkConfig, eta: f64) -> f64 {
    let m = cfg.num_users();
    (0..m).map(|u| outage_single_user(cfg, u, eta)).sum::<f64>() / m as f64
}

/// Relaxed TDMA with a given grouping: slot-weighted average of the
/// per-group greedy outages.
pub fn outage_relaxed_tdma(cfg: &NetworkConfig, pattern: &GroupingPattern, eta: f64) -> f64 {
    let g = pattern.num_groups() as f64;
    pattern.groups().iter().map(|grp| outage_exact_users(cfg, grp, eta)).sum::<f64>() / g
}

/// High-SNR expansion of [`outage_exact`]: each relay factor becomes
/// `b/eta + A/eta^M - A b/eta^(M+1)` with `A = prod_u tau/(alpha Omega_ur)`.
pub fn outage_high_snr(cfg: &NetworkConfig, eta: f64) -> f64 {
    let m = cfg.num_users() as i32;
    (0..cfg.num_relays())
        .map(|r| {
            let a: f64 = (0..cfg.num_users()).map(|u| user_term(cfg, u, r)).product();
            let b = relay_term(cfg, r);
            b / eta + a * eta.powi(-m) - a * b * eta.powi(-(m + 1))
        })
        .product()
}

/// Leading-order term `c * eta^-N` of the outage as `eta -> inf`.
/// For one user `c = prod_r (b_r + a_1r)`, otherwise `c = prod_r b_r`.
pub fn outage_asymptote(cfg: &NetworkConfig, eta: f64) -> f64 {
    let single = cfg.num_users() == 1;
    (0..cfg.num_relays())
        .map(|r| {
            let b = relay_term(cfg, r);
            let c = if single { b + user_term(cfg, 0, r) } else { b };
            c / eta
        })
        .product()
}

/// High-SNR outage of two-user relaxed TDMA, identical to the first-order
/// expansion of [`outage_lower_bound`].
pub fn outage_two_user_highsnr(cfg: &NetworkConfig, eta: f64) -> f64 {
    (0..cfg.num_relays()).map(|r| relay_term(cfg, r) / eta).product()
}

/// Fixed-TDMA outage with every mean gain equal to `sigma`.
pub fn outage_tdma_symmetric(n: usize, sigma: f64, alpha: f64, tau: f64, eta: f64) -> f64 {
    one_minus_exp_neg(tau / (alpha * (1.0 - alpha) * eta * sigma)).powi(n as i32)
}

/// Outage floor with every relay-BS mean gain equal to `sigma`.
pub fn outage_lower_bound_symmetric(n: usize, sigma: f64, alpha: f64, tau: f64, eta: f64) -> f64 {
    one_minus_exp_neg(tau / ((1.0 - alpha) * eta * sigma)).powi(n as i32)
}

/// TDMA needs `1/alpha` times the power of the outage floor in the
/// symmetric case.
pub fn power_gap_db(alpha: f64) -> f64 {
    10.0 * (1.0 / alpha).log10()
}

/// Outage probability sampled along an SNR axis.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageCurve {
    pub label: String,
    /// Linear `eta`, strictly increasing.
    pub snr_points: Vec<f64>,
    pub outage_values: Vec<f64>,
}

impl OutageCurve {
    pub fn new(label: impl Into<String>, snr_points: Vec<f64>, outage_values: Vec<f64>) -> Result<Self> {
        if snr_points.len() != outage_values.len() {
            return Err(Error::InvalidArgument("snr and outage lengths differ".into()));
        }
        if snr_points.windows(2).any(|w| !(w[1] > w[0])) || snr_points.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidArgument("snr points must be positive and strictly increasing".into()));
        }
        Ok(Self { label: label.into(), snr_points, outage_values })
    }

    /// Samples `f(eta)` at the given dB points.
    pub fn from_fn(label: impl Into<String>, snr_db: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        let etas: Vec<f64> = snr_db.iter().map(|&d| db_to_linear(d)).collect();
        let vals = etas.iter().map(|&e| f(e)).collect();
        Self::new(label, etas, vals)
    }
}

/// Outage window used for slope fits by default.
pub const DIVERSITY_FIT_WINDOW: (f64, f64) = (1e-10, 1e-2);

/// Negated least-squares slope of `ln P` against `ln eta`, over the points
/// with outage in [`DIVERSITY_FIT_WINDOW`].
pub fn estimate_diversity_order(curve: &OutageCurve) -> Result<f64> {
    estimate_diversity_order_in(curve, DIVERSITY_FIT_WINDOW.0, DIVERSITY_FIT_WINDOW.1)
}

/// As [`estimate_diversity_order`] with an explicit `[lo, hi]` window.
/// Zero outage points are always excluded.
pub fn estimate_diversity_order_in(curve: &OutageCurve, lo: f64, hi: f64) -> Result<f64> {
    let pts: Vec<(f64, f64)> = curve
        .snr_points
        .iter()
        .zip(&curve.outage_values)
        .filter(|(_, &p)| p > 0.0 && p >= lo && p <= hi)
        .map(|(&e, &p)| (e.ln(), p.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientPoints { needed: 3, found: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    Ok(-sxy / sxx)
}

/// SNR at which `curve` first falls to `target`, interpolating linearly in
/// log-log coordinates.
pub fn snr_at_outage(curve: &OutageCurve, target: f64) -> Result<f64> {
    let no_cross = || Error::NoCrossing { label: curve.label.clone(), target };
    if !(target > 0.0) {
        return Err(no_cross());
    }
    let s = &curve.snr_points;
    let p = &curve.outage_values;
    for i in 1..s.len() {
        if p[i - 1] >= target && p[i] <= target {
            if p[i] == p[i - 1] {
                return Ok(s[i - 1]);
            }
            if p[i] <= 0.0 {
                return Err(no_cross());
            }
            let t = (target.ln() - p[i - 1].ln()) / (p[i].ln() - p[i - 1].ln());
            return Ok((s[i - 1].ln() + t * (s[i].ln() - s[i - 1].ln())).exp());
        }
    }
    Err(no_cross())
}

/// Horizontal distance in dB between two curves at a given outage level:
/// `10 log10(eta_a / eta_b)`.
pub fn measure_gap_db(curve_a: &OutageCurve, curve_b: &OutageCurve, target_outage: f64) -> Result<f64> {
    let a = snr_at_outage(curve_a, target_outage)?;
    let b = snr_at_outage(curve_b, target_outage)?;
    Ok(10.0 * (a / b).log10())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(m: usize, n: usize) -> NetworkConfig {
        NetworkConfig::symmetric(m, n, 1.0).unwrap()
    }

    #[test]
    fn single_link_hand_value() {
        // x = tau / (alpha (1 - alpha) eta) = 3 / (0.25 * 30) = 0.4
        let cfg = sym(1, 1);
        let expect = 1.0 - (-0.4f64).exp();
        assert!((outage_exact(&cfg, 30.0) - expect).abs() < 1e-15);
        assert!((outage_tdma(&cfg, 30.0) - expect).abs() < 1e-15);
        assert!((expect - 0.32968).abs() < 1e-5);
    }

    #[test]
    fn limits_in_eta() {
        let cfg = NetworkConfig::new(vec![vec![0.7, 1.3], vec![1.1, 0.4]], vec![0.9, 1.6]).unwrap();
        assert!(outage_exact(&cfg, 1e12) < 1e-20);
        assert!(outage_exact(&cfg, 1e-9) > 1.0 - 1e-9);
        assert!(outage_tdma(&cfg, 1e-9) > 1.0 - 1e-9);
        assert!(outage_lower_bound(&cfg, 1e12) < 1e-20);
    }

    #[test]
    fn lower_bound_ignores_user_side() {
        let mut cfg = NetworkConfig::new(vec![vec![0.7, 1.3], vec![1.1, 0.4]], vec![0.9, 1.6]).unwrap();
        let before = outage_lower_bound(&cfg, 12.5);
        cfg.mean_gain_ur[0][1] = 42.0;
        cfg.mean_gain_ur[1][0] = 1e-3;
        assert_eq!(before.to_bits(), outage_lower_bound(&cfg, 12.5).to_bits());
        assert!(outage_lower_bound(&cfg.with_alpha(1.0 - 1e-12), 12.5) > 1.0 - 1e-6);
    }

    #[test]
    fn tdma_with_one_user_is_the_single_user_product() {
        let cfg = NetworkConfig::new(vec![vec![0.3, 0.8, 1.7]], vec![1.2, 0.6, 0.5]).unwrap();
        for eta in [0.5, 3.0, 80.0, 1e4] {
            assert_eq!(outage_tdma(&cfg, eta), outage_single_user(&cfg, 0, eta));
            let rel = (outage_exact(&cfg, eta) / outage_tdma(&cfg, eta) - 1.0).abs();
            assert!(rel < 1e-12, "{rel}");
        }
    }

    #[test]
    fn symmetric_closed_forms_agree() {
        for alpha in [0.3, 0.5, 0.8] {
            let cfg = NetworkConfig::symmetric(6, 4, 1.0).unwrap().with_alpha(alpha);
            for eta in [1.0, 10.0, 1e3, 1e5] {
                let a = outage_tdma(&cfg, eta);
                let b = outage_tdma_symmetric(4, 1.0, alpha, 3.0, eta);
                assert!((a / b - 1.0).abs() < 1e-12);
                let a = outage_lower_bound(&cfg, eta);
                let b = outage_lower_bound_symmetric(4, 1.0, alpha, 3.0, eta);
                assert!((a / b - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_user_highsnr_hand_value() {
        let cfg = sym(2, 1);
        assert!((outage_two_user_highsnr(&cfg, 600.0) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn two_user_highsnr_tracks_lower_bound() {
        let cfg = NetworkConfig::new(vec![vec![1.0; 3]; 2], vec![1.5, 1.7, 1.9]).unwrap();
        let mut prev = f64::INFINITY;
        for eta in [1e2, 1e3, 1e4, 1e5, 1e6] {
            let err = (outage_two_user_highsnr(&cfg, eta) / outage_lower_bound(&cfg, eta) - 1.0).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-4);
    }

    #[test]
    fn asymptote_branches() {
        let multi = NetworkConfig::new(vec![vec![0.5, 1.5], vec![0.9, 0.7]], vec![1.2, 0.8]).unwrap();
        let single = NetworkConfig::new(vec![vec![0.5, 1.5]], vec![1.2, 0.8]).unwrap();
        let eta = 1e7;
        let c_multi = (3.0 / (0.5 * 1.2)) * (3.0 / (0.5 * 0.8));
        let c_single = (3.0 / (0.5 * 1.2) + 3.0 / (0.5 * 0.5)) * (3.0 / (0.5 * 0.8) + 3.0 / (0.5 * 1.5));
        assert!((outage_asymptote(&multi, eta) * eta * eta / c_multi - 1.0).abs() < 1e-12);
        assert!((outage_asymptote(&single, eta) * eta * eta / c_single - 1.0).abs() < 1e-12);
        assert!((outage_high_snr(&multi, eta) / outage_asymptote(&multi, eta) - 1.0).abs() < 1e-5);
        assert!((outage_high_snr(&single, eta) / outage_asymptote(&single, eta) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn exact_power_law_slope() {
        let etas: Vec<f64> = [10.0, 20.0, 40.0, 80.0, 160.0].to_vec();
        let vals = etas.iter().map(|e| 0.5 * e.powi(-3)).collect();
        let curve = OutageCurve::new("pl", etas, vals).unwrap();
        assert!((estimate_diversity_order(&curve).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn slope_needs_three_points() {
        let curve = OutageCurve::new("c", vec![1.0, 2.0, 3.0], vec![0.5, 1e-3, 0.2]).unwrap();
        assert_eq!(estimate_diversity_order(&curve), Err(Error::InsufficientPoints { needed: 3, found: 1 }));
    }

    #[test]
    fn power_gap_values() {
        assert!((power_gap_db(0.5) - 3.0103).abs() < 1e-4);
        assert!((power_gap_db(0.8) - 0.9691).abs() < 1e-4);
        assert!(power_gap_db(1.0 - 1e-12).abs() < 1e-10);
    }

    #[test]
    fn gap_of_constructed_shift() {
        let db: Vec<f64> = (0..=60).map(|i| i as f64).collect();
        let a = OutageCurve::from_fn("a", &db, |e| (1.0 / e).min(1.0)).unwrap();
        let b = OutageCurve::from_fn("b", &db, |e| (0.5 / e).min(1.0)).unwrap();
        assert!((measure_gap_db(&a, &b, 1e-4).unwrap() - power_gap_db(0.5)).abs() < 1e-9);
        assert_eq!(measure_gap_db(&a, &a, 1e-3).unwrap(), 0.0);
        assert!(matches!(measure_gap_db(&a, &b, 1e-9), Err(Error::NoCrossing { .. })));
    }

    #[test]
    fn curve_validation() {
        assert!(OutageCurve::new("x", vec![1.0, 1.0], vec![0.1, 0.1]).is_err());
        assert!(OutageCurve::new("x", vec![1.0], vec![]).is_err());
    }
}
