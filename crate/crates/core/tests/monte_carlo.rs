use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use relaysched::analytics::outage_single_user;
use relaysched::fairness::{delay_statistics, fi_lower_bound, DelaySamples};
use relaysched::model::{FadingMode, FadingProcess, NetworkConfig};
use relaysched::scenarios::{homogeneous, split_population, table_one};
use relaysched::scheduling::{make_grouping, GroupingStrategy, SchedulingPolicy};
use relaysched::simulator::{
    run_fairness_experiment, run_point, run_sweep, simulate_slots, ExperimentPlan, FadingSpec, PolicyEntry,
};

/// Kolmogorov-Smirnov distance between samples and an exponential CDF.
fn ks_exponential(mut xs: Vec<f64>, mean: f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x / mean).exp();
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[test]
fn gains_have_exponential_marginals() {
    let cfg = NetworkConfig::new(vec![vec![0.7, 1.9]], vec![1.3, 0.4]).unwrap();
    let n = 50_000;
    // 0.1% critical value of the one-sample KS statistic
    let crit = 1.95 / (n as f64).sqrt();
    let modes = [FadingMode::Iid, FadingMode::gauss_markov(0.0), FadingMode::gauss_markov(0.5)];
    for mode in modes {
        let mut fading = FadingProcess::for_config(mode, 2024, &cfg).unwrap();
        let (mut ur, mut rb) = (Vec::new(), Vec::new());
        // thin correlated draws so the samples are close to independent
        for i in 0..n * 4 {
            let real = fading.draw_realization(&cfg);
            if i % 4 == 0 {
                ur.push(real.ur(0, 1));
                rb.push(real.rb(0));
            }
        }
        let d_ur = ks_exponential(ur, 1.9);
        let d_rb = ks_exponential(rb, 1.3);
        assert!(d_ur < crit && d_rb < crit, "{mode:?}: {d_ur} {d_rb} vs {crit}");
    }
}

#[test]
fn wilson_interval_covers_known_outage() {
    // one user, one relay: outage is known in closed form
    let cfg = NetworkConfig::new(vec![vec![1.0]], vec![1.0]).unwrap();
    let snr_db = 10.0;
    let p = outage_single_user(&cfg.with_snr_db(snr_db), 0, relaysched::model::db_to_linear(snr_db));
    let reps = 200;
    let mut covered = 0;
    for rep in 0..reps {
        let mut plan = ExperimentPlan::new(cfg.clone(), vec![snr_db], vec![PolicyEntry::fixed_tdma()]);
        plan.trials_per_point = 5_000;
        plan.base_seed = 10_000 + rep;
        let res = run_point(&plan, 0, &plan.policies[0]).unwrap();
        let (lo, hi) = res.ci();
        covered += u32::from(lo <= p && p <= hi);
    }
    let rate = f64::from(covered) / reps as f64;
    assert!(rate >= 0.93, "coverage {rate} for p = {p}");
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = table_one();
    let mut plan = ExperimentPlan::new(
        cfg,
        vec![4.0, 8.0],
        vec![PolicyEntry::greedy(), PolicyEntry::relaxed(2, GroupingStrategy::Random { seed: 4 }).with_draws(3)],
    );
    plan.trials_per_point = 20_000;
    plan.shard_slots = 3_000;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| run_sweep(&plan).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(7));
}

#[test]
fn policy_order_does_not_change_rows() {
    let mut plan = ExperimentPlan::new(
        table_one(),
        vec![2.0, 6.0],
        vec![PolicyEntry::fixed_tdma(), PolicyEntry::greedy(), PolicyEntry::relaxed(4, GroupingStrategy::SimilarGain)],
    );
    plan.trials_per_point = 10_000;
    let forward = run_sweep(&plan).unwrap();
    plan.policies.reverse();
    let backward = run_sweep(&plan).unwrap();
    for row in &forward {
        let twin = backward.iter().find(|r| r.snr_db == row.snr_db && r.policy == row.policy).unwrap();
        assert_eq!(row, twin);
    }
}

#[test]
fn single_user_groups_equal_tdma_bit_for_bit() {
    let mut plan = ExperimentPlan::new(
        table_one(),
        vec![0.0, 5.0, 10.0],
        vec![PolicyEntry::fixed_tdma(), PolicyEntry::relaxed(1, GroupingStrategy::FixedOrder)],
    );
    plan.trials_per_point = 20_000;
    let rows = run_sweep(&plan).unwrap();
    for pair in rows.chunks(2) {
        let (a, b) = (&pair[0], &pair[1]);
        assert_eq!((a.outage_events, a.slots, a.ci_low, a.ci_high), (b.outage_events, b.slots, b.ci_low, b.ci_high));
        assert_eq!(a.delay_var.to_bits(), b.delay_var.to_bits());
    }
}

#[test]
fn simulated_policy_ordering() {
    let mut plan = ExperimentPlan::new(
        table_one(),
        vec![0.0, 3.0, 6.0, 9.0],
        vec![
            PolicyEntry::greedy(),
            PolicyEntry::relaxed(2, GroupingStrategy::Random { seed: 1 }),
            PolicyEntry::fixed_tdma(),
        ],
    );
    plan.trials_per_point = 50_000;
    let rows = run_sweep(&plan).unwrap();
    for point in rows.chunks(3) {
        for w in point.windows(2) {
            let slack = (w[1].ci_high - w[1].ci_low) / 2.0;
            assert!(w[0].outage <= w[1].outage + slack, "{} vs {}", w[0].policy, w[1].policy);
        }
    }
}

#[test]
fn zero_threshold_limit_has_no_outage() {
    let mut cfg = table_one();
    cfg.snr_threshold = 1e-12;
    let mut plan = ExperimentPlan::new(cfg, vec![-20.0], vec![PolicyEntry::fixed_tdma()]);
    plan.trials_per_point = 10_000;
    plan.trial_cap = 10_000;
    let res = run_point(&plan, 0, &plan.policies[0]).unwrap();
    assert_eq!(res.metrics.outage_count, 0);
    assert!(res.cap_hit);
}

#[test]
fn geometric_gaps_reproduce_second_moment() {
    let m = 8u64;
    let delta = 0.002;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in [1u64, 2, 4, 8] {
        let groups = m / k;
        let p = 1.0 / k as f64;
        let gaps: Vec<u64> = (0..400_000)
            .map(|_| {
                let mut trials = 1;
                while !rng.random_bool(p) {
                    trials += 1;
                }
                groups * trials
            })
            .collect();
        let samples = DelaySamples::from_gaps(&[gaps]).unwrap();
        let d = delay_statistics(&samples, delta).pooled.unwrap();
        let second = d.variance + d.mean * d.mean;
        let expect = (2.0 - p) * (m as f64 * delta).powi(2);
        assert!((second / expect - 1.0).abs() < 0.03, "k={k}: {second} vs {expect}");
    }
}

#[test]
fn homogeneous_delay_variance_grows_with_k() {
    let cfg = homogeneous(8, 4).with_snr_db(10.0);
    let mut last = -1.0;
    for k in [1, 2, 4, 8] {
        let policy = SchedulingPolicy::RelaxedTdma(make_grouping(GroupingStrategy::FixedOrder, k, &cfg).unwrap());
        let acc = simulate_slots(&cfg, &policy, FadingMode::Iid, 11, 0, 200_000, None, None).unwrap();
        let d = delay_statistics(&acc.delay, cfg.slot_duration).pooled.unwrap();
        assert!((d.mean / (8.0 * cfg.slot_duration) - 1.0).abs() < 0.01);
        assert!(d.variance > last || (k == 1 && d.variance == 0.0));
        last = d.variance;
    }
}

#[test]
fn simulated_fairness_respects_lower_bound() {
    let cfg = split_population(6).draw().unwrap().with_snr_db(15.0);
    for k in [1, 2, 4, 8] {
        for strategy in [GroupingStrategy::DissimilarGain, GroupingStrategy::Random { seed: k as u64 }] {
            let policy = SchedulingPolicy::RelaxedTdma(make_grouping(strategy, k, &cfg).unwrap());
            let acc = simulate_slots(&cfg, &policy, FadingMode::Iid, 5, 0, 100_000, None, None).unwrap();
            let fi = acc.airtime.jain_index().unwrap();
            assert!(fi >= fi_lower_bound(k, 8).unwrap() - 0.02, "k={k} {strategy:?}: {fi}");
        }
    }
}

#[test]
fn short_windows_favor_small_groups() {
    let mut plan = ExperimentPlan::new(
        homogeneous(8, 5),
        vec![10.0],
        vec![PolicyEntry::relaxed(2, GroupingStrategy::FixedOrder), PolicyEntry::greedy()],
    );
    plan.fading = FadingSpec::correlated_default();
    plan.trials_per_point = 100_000;
    plan.fairness_windows = vec![1.0, 10.0, 100.0];
    let curves = run_fairness_experiment(&plan).unwrap();
    let (k2, k8) = (&curves[0], &curves[1]);
    assert_eq!(k2.window_slots[0], 33);
    assert!(k2.mean_fi[0] > k8.mean_fi[0], "{:?} vs {:?}", k2.mean_fi, k8.mean_fi);
    for c in &curves {
        assert!(c.mean_fi.windows(2).all(|w| w[1] >= w[0]), "{:?}", c.mean_fi);
    }
}

#[test]
fn fairness_experiment_requires_correlated_fading() {
    let plan = ExperimentPlan::new(homogeneous(2, 2), vec![10.0], vec![PolicyEntry::greedy()]);
    assert!(run_fairness_experiment(&plan).is_err());
}
