//! Canned experiments behind the seven published figures.
//!
//! [`figure_plans`] builds the plans and [`render`] runs them. Replay feeds
//! the plans recorded in a manifest back into [`render`], so the two halves
//! must stay independent of anything not in the plan.

use anyhow::{bail, Result};
use relaysched::analytics::{
    estimate_diversity_order, measure_gap_db, outage_exact, outage_lower_bound, outage_tdma, power_gap_db, OutageCurve,
};
use relaysched::model::db_to_linear;
use relaysched::scenarios::{homogeneous, snr_grid, split_population, table_one, GainDraw};
use relaysched::simulator::{run_sweep, ExperimentPlan, FadingSpec, PolicyEntry};
use relaysched::GroupingStrategy;

use crate::commands::{check_rows, fairness_table, outage_plot, Report, SIM_FIT_WINDOW};
use crate::output::{num, PlotSpec, Table};

pub const FIGURES: std::ops::RangeInclusive<u8> = 1..=7;

/// Seed of the drawn two-population network and of its random groupings.
const POPULATION_SEED: u64 = 4;
/// Outage below which simulated points are skipped; deeper points need
/// more than the default slot cap.
const SIM_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct FigurePlan {
    pub tag: String,
    pub plan: ExperimentPlan,
}

fn tagged(tag: impl Into<String>, plan: ExperimentPlan) -> FigurePlan {
    FigurePlan { tag: tag.into(), plan }
}

/// Grid points where greedy outage is still at least [`SIM_FLOOR`].
fn simulable(cfg: &relaysched::NetworkConfig, grid: Vec<f64>) -> Vec<f64> {
    grid.into_iter().filter(|&d| outage_exact(cfg, db_to_linear(d)) >= SIM_FLOOR).collect()
}

fn fairness_plan(cfg: relaysched::NetworkConfig, policies: Vec<PolicyEntry>) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(cfg, vec![15.0], policies);
    plan.fading = FadingSpec::correlated_default();
    plan.trials_per_point = 200_000;
    plan
}

pub fn figure_plans(figure: u8) -> Result<Vec<FigurePlan>> {
    let tdma_greedy = || vec![PolicyEntry::fixed_tdma(), PolicyEntry::greedy()];
    Ok(match figure {
        1 => vec![tagged("table1", ExperimentPlan::new(table_one(), snr_grid(0.0, 20.0, 2.0), tdma_greedy()))],
        2 => [0.5, 0.6, 0.7, 0.8]
            .iter()
            .map(|&alpha| {
                let cfg = homogeneous(8, 5).with_alpha(alpha);
                let grid = simulable(&cfg, snr_grid(0.0, 20.0, 2.0));
                tagged(format!("alpha{alpha}"), ExperimentPlan::new(cfg, grid, tdma_greedy()))
            })
            .collect(),
        3 => {
            let mut plans = Vec::new();
            for n in [5, 8] {
                for m in [2, 4, 8] {
                    let cfg = GainDraw::uniform(m, n, (0.5, 1.5), 3 + n as u64).draw()?;
                    let grid = simulable(&cfg, snr_grid(0.0, 30.0, 1.0));
                    plans.push(tagged(
                        format!("m{m}_n{n}"),
                        ExperimentPlan::new(cfg, grid, vec![PolicyEntry::greedy()]),
                    ));
                }
            }
            plans
        }
        4 => {
            let cfg = split_population(POPULATION_SEED).draw()?;
            let policies = [1, 2, 4, 8]
                .iter()
                .map(|&k| PolicyEntry::relaxed(k, GroupingStrategy::Random { seed: POPULATION_SEED }).with_draws(100))
                .collect();
            vec![tagged("population", ExperimentPlan::new(cfg, snr_grid(0.0, 20.0, 2.0), policies))]
        }
        5 => {
            let mut policies: Vec<PolicyEntry> =
                [2, 4].iter().map(|&k| PolicyEntry::relaxed(k, GroupingStrategy::FixedOrder)).collect();
            policies.push(PolicyEntry::greedy());
            vec![tagged("homogeneous", fairness_plan(homogeneous(8, 5), policies))]
        }
        6 => {
            let cfg = split_population(POPULATION_SEED).draw()?;
            let policies = vec![
                PolicyEntry::relaxed(2, GroupingStrategy::Random { seed: POPULATION_SEED }).with_draws(20),
                PolicyEntry::greedy(),
            ];
            vec![tagged("population", fairness_plan(cfg, policies))]
        }
        7 => {
            let cfg = split_population(POPULATION_SEED).draw()?;
            let policies = vec![
                PolicyEntry::relaxed(2, GroupingStrategy::SimilarGain),
                PolicyEntry::relaxed(2, GroupingStrategy::DissimilarGain),
                PolicyEntry::relaxed(2, GroupingStrategy::Random { seed: POPULATION_SEED }).with_draws(20),
            ];
            vec![tagged("population", fairness_plan(cfg, policies))]
        }
        _ => bail!("unknown figure {figure}; figures are numbered 1 to 7"),
    })
}

pub const FIGURE_HEADER: [&str; 6] = ["snr_db", "policy", "source", "outage", "ci_low", "ci_high"];

fn push_analytic(t: &mut Table, lead: &[String], snr_db: f64, policy: &str, p: f64) {
    let mut row = lead.to_vec();
    row.extend([num(snr_db), policy.to_string(), "analytic".into(), num(p), String::new(), String::new()]);
    t.push(row);
}

fn push_sim(t: &mut Table, lead: &[String], r: &relaysched::simulator::SweepRow) {
    let mut row = lead.to_vec();
    row.extend([num(r.snr_db), r.policy.clone(), "sim".into(), num(r.outage), num(r.ci_low), num(r.ci_high)]);
    t.push(row);
}

fn header_with(lead: &[&'static str]) -> Vec<&'static str> {
    lead.iter().chain(FIGURE_HEADER.iter()).copied().collect()
}

fn render_outage_sweep(name: &str, plan: &ExperimentPlan, bound: bool) -> Result<Report> {
    let rows = run_sweep(plan)?;
    let mut t = Table::new(name, FIGURE_HEADER.to_vec()).with_plot(outage_plot());
    for r in &rows {
        push_analytic(&mut t, &[], r.snr_db, &r.policy, r.analytic);
    }
    if bound {
        for &d in &plan.snr_sweep_db {
            push_analytic(&mut t, &[], d, "bound", outage_lower_bound(&plan.config, db_to_linear(d)));
        }
    }
    for r in &rows {
        push_sim(&mut t, &[], r);
    }
    let check_failures = check_rows(&rows);
    let lines =
        vec![format!("{}: {} simulated points, {} outside their 95% interval", name, rows.len(), check_failures.len())];
    Ok(Report { tables: vec![t], lines, check_failures })
}

fn render_power_gap(plans: &[FigurePlan]) -> Result<Report> {
    let mut curves = Table::new("fig2", header_with(&["alpha"]))
        .with_plot(PlotSpec { series: vec!["alpha", "policy", "source"], ..outage_plot() });
    let mut gaps = Table::new("fig2_gap", vec!["alpha", "gap_tdma_greedy_db", "gap_tdma_bound_db", "predicted_db"]);
    let mut report = Report::default();
    let fine = snr_grid(-10.0, 50.0, 0.01);
    let coarse = snr_grid(-10.0, 40.0, 1.0);
    for fp in plans {
        let cfg = &fp.plan.config;
        let lead = [num(cfg.alpha)];
        for &d in &coarse {
            let eta = db_to_linear(d);
            push_analytic(&mut curves, &lead, d, "tdma", outage_tdma(cfg, eta));
            push_analytic(&mut curves, &lead, d, "greedy", outage_exact(cfg, eta));
            push_analytic(&mut curves, &lead, d, "bound", outage_lower_bound(cfg, eta));
        }
        let rows = run_sweep(&fp.plan)?;
        for r in &rows {
            push_sim(&mut curves, &lead, r);
        }
        report.check_failures.extend(check_rows(&rows));

        let curve = |label: &str, f: &dyn Fn(f64) -> f64| OutageCurve::from_fn(label, &fine, f);
        let tdma = curve("tdma", &|e| outage_tdma(cfg, e))?;
        let greedy = curve("greedy", &|e| outage_exact(cfg, e))?;
        let bound = curve("bound", &|e| outage_lower_bound(cfg, e))?;
        let g_greedy = measure_gap_db(&tdma, &greedy, 1e-4)?;
        let g_bound = measure_gap_db(&tdma, &bound, 1e-4)?;
        let predicted = power_gap_db(cfg.alpha);
        gaps.push(vec![num(cfg.alpha), num(g_greedy), num(g_bound), num(predicted)]);
        report.lines.push(format!(
            "alpha {}: gap at 1e-4 TDMA-greedy {g_greedy:.3} dB, TDMA-bound {g_bound:.3} dB, 10 log10(1/alpha) = {predicted:.3} dB",
            cfg.alpha
        ));
    }
    report.tables = vec![curves, gaps];
    Ok(report)
}

fn render_diversity(plans: &[FigurePlan]) -> Result<Report> {
    let mut t = Table::new("fig3", header_with(&["users", "relays"]))
        .with_plot(PlotSpec { series: vec!["users", "relays", "source"], ..outage_plot() });
    let mut slopes = Table::new("fig3_slopes", vec!["users", "relays", "analytic_slope", "sim_slope"]);
    let mut report = Report::default();
    let grid = snr_grid(0.0, 40.0, 0.5);
    for fp in plans {
        let cfg = &fp.plan.config;
        let lead = [cfg.num_users().to_string(), cfg.num_relays().to_string()];
        let analytic = OutageCurve::from_fn("greedy", &grid, |e| outage_exact(cfg, e))?;
        for (d, p) in grid.iter().zip(&analytic.outage_values) {
            push_analytic(&mut t, &lead, *d, "greedy", *p);
        }
        let rows = run_sweep(&fp.plan)?;
        for r in &rows {
            push_sim(&mut t, &lead, r);
        }
        report.check_failures.extend(check_rows(&rows));
        let a = estimate_diversity_order(&analytic)?;
        let etas = fp.plan.snr_sweep_db.iter().map(|&d| db_to_linear(d)).collect();
        let s = OutageCurve::new("sim", etas, rows.iter().map(|r| r.outage).collect())
            .and_then(|c| relaysched::analytics::estimate_diversity_order_in(&c, SIM_FIT_WINDOW.0, SIM_FIT_WINDOW.1));
        slopes.push(vec![lead[0].clone(), lead[1].clone(), num(a), s.as_ref().map_or(String::new(), |v| num(*v))]);
        report.lines.push(format!(
            "M = {}, N = {}: diversity order analytic {a:.3}, simulated {}",
            lead[0],
            lead[1],
            s.map_or_else(|e| format!("n/a ({e})"), |v| format!("{v:.3}"))
        ));
    }
    report.tables = vec![t, slopes];
    Ok(report)
}

fn single(figure: u8, plans: &[FigurePlan]) -> Result<&ExperimentPlan> {
    match plans {
        [one] => Ok(&one.plan),
        _ => bail!("figure {figure} takes one plan, got {}", plans.len()),
    }
}

/// Runs the plans of `figure`.
pub fn render(figure: u8, plans: &[FigurePlan]) -> Result<Report> {
    match figure {
        1 => render_outage_sweep("fig1", single(1, plans)?, false),
        2 => render_power_gap(plans),
        3 => render_diversity(plans),
        4 => render_outage_sweep("fig4", single(4, plans)?, true),
        5..=7 => {
            let (table, lines) = fairness_table(&format!("fig{figure}"), single(figure, plans)?)?;
            Ok(Report { tables: vec![table], lines, check_failures: Vec::new() })
        }
        _ => bail!("unknown figure {figure}; figures are numbered 1 to 7"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_figure_has_valid_plans() {
        for f in FIGURES {
            let plans = figure_plans(f).unwrap();
            assert!(!plans.is_empty());
            for p in &plans {
                p.plan.validate().unwrap();
            }
        }
        assert!(figure_plans(8).is_err());
    }

    #[test]
    fn figure_one_uses_table_gains() {
        let plans = figure_plans(1).unwrap();
        let cfg = &plans[0].plan.config;
        assert_eq!(cfg.mean_gain_rb, vec![1.2, 0.6, 0.5, 1.3, 0.7]);
        assert_eq!((cfg.num_users(), cfg.num_relays()), (8, 5));
    }

    #[test]
    fn diversity_figure_keeps_affordable_points() {
        for fp in figure_plans(3).unwrap() {
            let last = *fp.plan.snr_sweep_db.last().unwrap();
            assert!(outage_exact(&fp.plan.config, db_to_linear(last)) >= SIM_FLOOR);
        }
    }
}
