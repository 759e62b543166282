//! Experiment commands. Each turns a plan into tables and report lines and
//! does no file I/O itself.

use rayon::prelude::*;
use relaysched::analytics::{estimate_diversity_order, estimate_diversity_order_in, OutageCurve};
use relaysched::model::{db_to_linear, FadingMode, FadingProcess};
use relaysched::protocol::{protocol_slot, ProtocolTrace};
use relaysched::simulator::{run_fairness_experiment, run_sweep, shard_seed, ExperimentPlan, SweepRow};

use crate::output::{num, PlotSpec, Table};

/// Outage window used for slopes of simulated curves. Deeper points are too
/// noisy at affordable trial counts.
pub const SIM_FIT_WINDOW: (f64, f64) = (1e-5, 1e-2);

/// Slots of protocol trace written per run.
pub const TRACE_SLOTS: u64 = 1_000;

#[derive(Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub lines: Vec<String>,
    /// Failed inline checks; only consulted with `--check`.
    pub check_failures: Vec<String>,
}

impl Report {
    pub fn absorb(&mut self, other: Report) {
        self.tables.extend(other.tables);
        self.lines.extend(other.lines);
        self.check_failures.extend(other.check_failures);
    }
}

pub fn outage_plot() -> PlotSpec {
    PlotSpec {
        x: "snr_db",
        y: "outage",
        series: vec!["policy", "source"],
        log_y: true,
        x_label: "P0/N0 (dB)",
        y_label: "outage probability",
    }
}

pub const OUTAGE_HEADER: [&str; 12] = [
    "snr_db",
    "policy",
    "source",
    "outage",
    "ci_low",
    "ci_high",
    "slots",
    "outage_events",
    "cap_hit",
    "fi_longrun",
    "delay_mean_s",
    "delay_var_s2",
];

/// Analytic row followed by simulated row, for every sweep row.
pub fn outage_table(name: &str, rows: &[SweepRow]) -> Table {
    let mut t = Table::new(name, OUTAGE_HEADER.to_vec()).with_plot(outage_plot());
    for r in rows {
        let mut analytic = vec![num(r.snr_db), r.policy.clone(), "analytic".into(), num(r.analytic)];
        analytic.resize(OUTAGE_HEADER.len(), String::new());
        t.push(analytic);
        t.push(vec![
            num(r.snr_db),
            r.policy.clone(),
            "sim".into(),
            num(r.outage),
            num(r.ci_low),
            num(r.ci_high),
            r.slots.to_string(),
            r.outage_events.to_string(),
            r.cap_hit.to_string(),
            num(r.fi_longrun),
            num(r.delay_mean),
            num(r.delay_var),
        ]);
    }
    t
}

/// Rows whose closed form falls outside the 95% interval.
pub fn check_rows(rows: &[SweepRow]) -> Vec<String> {
    rows.iter()
        .filter(|r| !(r.ci_low <= r.analytic && r.analytic <= r.ci_high))
        .map(|r| {
            format!(
                "{} at {} dB: analytic {:.4e} outside [{:.4e}, {:.4e}] ({} events / {} slots)",
                r.policy, r.snr_db, r.analytic, r.ci_low, r.ci_high, r.outage_events, r.slots
            )
        })
        .collect()
}

pub fn cmd_outage(plan: &ExperimentPlan) -> anyhow::Result<Report> {
    let rows = run_sweep(plan)?;
    let check_failures = check_rows(&rows);
    let lines =
        vec![format!("{} points, {} with the closed form outside the 95% interval", rows.len(), check_failures.len())];
    Ok(Report { tables: vec![outage_table("outage", &rows)], lines, check_failures })
}

/// Slope of the closed form on the plan's grid and of the simulated curve.
pub fn slope_lines(prefix: &str, plan: &ExperimentPlan, rows: &[SweepRow]) -> Vec<String> {
    let etas: Vec<f64> = plan.snr_sweep_db.iter().map(|&d| db_to_linear(d)).collect();
    let fmt = |r: relaysched::Result<f64>| match r {
        Ok(s) => format!("{s:.3}"),
        Err(e) => format!("n/a ({e})"),
    };
    plan.policies
        .iter()
        .map(|entry| {
            let label = entry.label();
            let mine: Vec<&SweepRow> = rows.iter().filter(|r| r.policy == label).collect();
            let analytic = OutageCurve::new(&label, etas.clone(), mine.iter().map(|r| r.analytic).collect())
                .and_then(|c| estimate_diversity_order(&c));
            let sim = OutageCurve::new(&label, etas.clone(), mine.iter().map(|r| r.outage).collect())
                .and_then(|c| estimate_diversity_order_in(&c, SIM_FIT_WINDOW.0, SIM_FIT_WINDOW.1));
            format!(
                "{prefix}{label}: diversity order analytic {}, simulated {} (N = {})",
                fmt(analytic),
                fmt(sim),
                plan.config.num_relays()
            )
        })
        .collect()
}

pub fn cmd_diversity(plan: &ExperimentPlan) -> anyhow::Result<Report> {
    let rows = run_sweep(plan)?;
    Ok(Report {
        lines: slope_lines("", plan, &rows),
        check_failures: check_rows(&rows),
        tables: vec![outage_table("diversity", &rows)],
    })
}

pub const FAIRNESS_HEADER: [&str; 7] =
    ["policy", "window_units", "window_slots", "mean_fi", "fi_longrun", "delay_mean_s", "delay_var_s2"];

pub fn fairness_table(name: &str, plan: &ExperimentPlan) -> anyhow::Result<(Table, Vec<String>)> {
    let curves = run_fairness_experiment(plan)?;
    let mut t = Table::new(name, FAIRNESS_HEADER.to_vec()).with_plot(PlotSpec {
        x: "window_units",
        y: "mean_fi",
        series: vec!["policy"],
        log_y: false,
        x_label: "window (normalized Doppler units)",
        y_label: "Jain fairness index",
    });
    let mut lines = Vec::new();
    for c in &curves {
        for i in 0..c.window_units.len() {
            t.push(vec![
                c.policy.clone(),
                num(c.window_units[i]),
                c.window_slots[i].to_string(),
                num(c.mean_fi[i]),
                num(c.fi_longrun),
                num(c.delay_mean),
                num(c.delay_var),
            ]);
        }
        lines.push(format!(
            "{}: long-run FI {:.4}, delay mean {:.4e} s, variance {:.4e} s^2",
            c.policy, c.fi_longrun, c.delay_mean, c.delay_var
        ));
    }
    Ok((t, lines))
}

pub fn cmd_fairness(plan: &ExperimentPlan) -> anyhow::Result<Report> {
    let (table, lines) = fairness_table("fairness", plan)?;
    Ok(Report { tables: vec![table], lines, check_failures: Vec::new() })
}

#[derive(Debug, Clone, PartialEq)]
struct Equivalence {
    slots: u64,
    mismatches: u64,
    collisions: u64,
    rts: u64,
    backoff_sum: f64,
    traces: Vec<ProtocolTrace>,
}

/// Runs the centralized rule and the backoff protocol on the same draws.
fn compare_paths(plan: &ExperimentPlan, snr_index: usize, policy_index: usize) -> anyhow::Result<Equivalence> {
    let cfg = plan.config.with_snr_db(plan.snr_sweep_db[snr_index]);
    let mode: FadingMode = plan.fading.mode(cfg.slot_duration)?;
    let backoff = plan.backoff(&cfg);
    let policy = plan.policies[policy_index].realize(&plan.config)?.swap_remove(0);
    let pattern = policy.as_pattern(&cfg)?;
    let mut fading = FadingProcess::for_config(mode, shard_seed(plan.base_seed, snr_index, 0, 0), &cfg)?;
    let mut eq = Equivalence { slots: 0, mismatches: 0, collisions: 0, rts: 0, backoff_sum: 0.0, traces: Vec::new() };
    for slot in 0..plan.trials_per_point {
        let real = fading.draw_realization(&cfg);
        let central = policy.schedule(slot, &real, &cfg);
        let (dist, trace) = protocol_slot(slot, &pattern, &real, &cfg, &backoff);
        eq.slots += 1;
        eq.rts += u64::from(trace.rts_count);
        eq.backoff_sum += trace.elapsed_backoff;
        if trace.collision {
            eq.collisions += 1;
        } else if dist.scheduled_user != central.scheduled_user
            || dist.selected_relay != central.selected_relay
            || dist.outage != central.outage
        {
            eq.mismatches += 1;
        }
        if slot < TRACE_SLOTS {
            eq.traces.push(trace);
        }
    }
    Ok(eq)
}

pub fn cmd_protocol(plan: &ExperimentPlan) -> anyhow::Result<Report> {
    plan.validate()?;
    let jobs: Vec<(usize, usize)> =
        (0..plan.snr_sweep_db.len()).flat_map(|i| (0..plan.policies.len()).map(move |p| (i, p))).collect();
    let results = jobs.par_iter().map(|&(i, p)| compare_paths(plan, i, p)).collect::<anyhow::Result<Vec<_>>>()?;

    let mut summary = Table::new(
        "protocol",
        vec![
            "snr_db",
            "policy",
            "slots",
            "mismatches",
            "collisions",
            "rts_per_slot",
            "collision_rate",
            "mean_backoff_s",
        ],
    );
    let mut header = vec!["snr_db", "policy"];
    header.extend(ProtocolTrace::CSV_HEADER.split(','));
    let mut trace = Table::new("protocol_trace", header);
    let mut report = Report::default();
    for (&(i, p), eq) in jobs.iter().zip(&results) {
        let snr = plan.snr_sweep_db[i];
        let label = plan.policies[p].label();
        let n = eq.slots as f64;
        summary.push(vec![
            num(snr),
            label.clone(),
            eq.slots.to_string(),
            eq.mismatches.to_string(),
            eq.collisions.to_string(),
            num(eq.rts as f64 / n),
            num(eq.collisions as f64 / n),
            num(eq.backoff_sum / n),
        ]);
        for (slot, t) in eq.traces.iter().enumerate() {
            let mut row = vec![num(snr), label.clone()];
            row.extend(t.csv_line(slot as u64).split(',').map(str::to_string));
            trace.push(row);
        }
        report.lines.push(format!(
            "{label} at {snr} dB: mismatches = {} over {} slots, collisions = {}, RTS per slot {:.4}",
            eq.mismatches,
            eq.slots,
            eq.collisions,
            eq.rts as f64 / n
        ));
        if eq.mismatches > 0 {
            report.check_failures.push(format!("{label} at {snr} dB: {} mismatches", eq.mismatches));
        }
    }
    report.tables = vec![summary, trace];
    Ok(report)
}
