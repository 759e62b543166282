//! Command-line front end for relaysched experiments.
//!
//! Every run writes its CSV tables and a `manifest.toml` into the output
//! directory. The manifest holds each plan with all defaults written out,
//! and `relaysched replay` reruns it bit for bit.

pub mod commands;
pub mod config;
pub mod figures;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use relaysched::simulator::{ExperimentPlan, FadingSpec};
use serde::{Deserialize, Serialize};

use crate::commands::Report;
use crate::config::{parse_config, ConfigFile};
use crate::figures::FigurePlan;
use crate::output::{ensure_dir, plot_script};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const PLOT_FILE: &str = "plot.py";

#[derive(Debug, Parser)]
#[command(name = "relaysched", version, about = "Relay-assisted uplink scheduling experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Output directory for CSV files and the run manifest.
    #[arg(long, global = true, default_value = "relaysched-out")]
    pub out: PathBuf,
    /// Overrides the base seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the slots simulated per point before escalation.
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Overrides the slot cap of outage escalation.
    #[arg(long, global = true)]
    pub trial_cap: Option<u64>,
    /// Compare simulation against closed forms; exit with status 3 on a miss.
    #[arg(long, global = true)]
    pub check: bool,
    /// Also write a matplotlib script for the tables.
    #[arg(long, global = true)]
    pub plot: bool,
    /// Worker threads; defaults to one per core.
    #[arg(long, global = true, env = "RELAYSCHED_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Outage probability against SNR, simulated and closed form.
    Outage {
        #[arg(long)]
        config: PathBuf,
    },
    /// Outage sweep plus fitted diversity order per policy.
    Diversity {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sliding-window fairness under correlated fading.
    Fairness {
        #[arg(long)]
        config: PathBuf,
    },
    /// Distributed backoff protocol against the centralized rule.
    Protocol {
        #[arg(long)]
        config: PathBuf,
    },
    /// One of the canned figure experiments.
    Figures {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=7))]
        figure: u8,
    },
    /// Reruns the plans recorded in a manifest.
    Replay { manifest: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestPlan {
    pub tag: String,
    pub config: ConfigFile,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_override: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials_override: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trial_cap_override: Option<u64>,
    /// Resolved plans, overrides already applied.
    #[serde(rename = "plan")]
    pub plans: Vec<ManifestPlan>,
}

impl RunManifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest is serializable")
    }

    /// Manifest text without the output directory, so replays into another
    /// directory produce identical files.
    pub fn echo(&self) -> String {
        Self { out_dir: None, ..self.clone() }.to_toml()
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let src = fs::read_to_string(path)
            .with_context(|| format!("cannot read manifest {}", path.display()))
            .map_err(Failure::Validation)?;
        toml::from_str(&src).map_err(|e| Failure::Validation(anyhow!("{}: {e}", path.display())))
    }

    pub fn resolved_plans(&self) -> Result<Vec<FigurePlan>, Failure> {
        self.plans
            .iter()
            .map(|p| {
                let plan = p.config.resolve("").map_err(|e| Failure::Validation(anyhow!("plan {}: {e}", p.tag)))?;
                Ok(FigurePlan { tag: p.tag.clone(), plan })
            })
            .collect()
    }
}

/// Why a run did not succeed; each maps to a distinct exit status.
#[derive(Debug)]
pub enum Failure {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 1,
            Self::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Validation(e) => write!(f, "invalid input: {e:#}"),
            Self::Runtime(e) => write!(f, "run failed: {e:#}"),
        }
    }
}

pub const EXIT_CHECK_FAILED: u8 = 3;

/// What a finished run produced.
#[derive(Debug)]
pub struct Summary {
    pub lines: Vec<String>,
    pub files: Vec<PathBuf>,
    pub check_failures: Vec<String>,
    pub checked: bool,
}

impl Summary {
    pub fn exit_code(&self) -> u8 {
        if self.checked && !self.check_failures.is_empty() {
            EXIT_CHECK_FAILED
        } else {
            0
        }
    }
}

fn apply_overrides(plan: &mut ExperimentPlan, cli: &Cli) {
    if let Some(s) = cli.seed {
        plan.base_seed = s;
    }
    if let Some(t) = cli.trials {
        plan.trials_per_point = t;
        plan.trial_cap = plan.trial_cap.max(t);
    }
    if let Some(c) = cli.trial_cap {
        plan.trial_cap = c;
    }
}

fn run_command(command: &str, figure: Option<u8>, plans: &[FigurePlan]) -> anyhow::Result<Report> {
    let one = || match plans {
        [p] => Ok(&p.plan),
        _ => Err(anyhow!("{command} takes exactly one plan")),
    };
    match command {
        "outage" => commands::cmd_outage(one()?),
        "diversity" => commands::cmd_diversity(one()?),
        "fairness" => commands::cmd_fairness(one()?),
        "protocol" => commands::cmd_protocol(one()?),
        "figures" => figures::render(figure.ok_or_else(|| anyhow!("figure number missing"))?, plans),
        other => Err(anyhow!("unknown command {other}")),
    }
}

/// Parses inputs, runs the command and writes every output file.
pub fn execute(cli: &Cli) -> Result<Summary, Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Validation(anyhow!("thread count must be positive")));
        }
        // a pool built earlier in the same process stays in place
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }

    let (manifest, plans) = match &cli.command {
        Command::Replay { manifest } => {
            let m = RunManifest::load(manifest)?;
            let plans = m.resolved_plans()?;
            (RunManifest { out_dir: Some(cli.out.display().to_string()), ..m }, plans)
        }
        other => {
            let (name, figure, config_path, mut plans) = match other {
                Command::Figures { figure } => {
                    let plans = figures::figure_plans(*figure).map_err(Failure::Validation)?;
                    ("figures", Some(*figure), None, plans)
                }
                Command::Outage { config }
                | Command::Diversity { config }
                | Command::Fairness { config }
                | Command::Protocol { config } => {
                    let plan =
                        parse_config(config).map_err(|e| Failure::Validation(anyhow!("{}: {e}", config.display())))?;
                    let name = match other {
                        Command::Outage { .. } => "outage",
                        Command::Diversity { .. } => "diversity",
                        Command::Fairness { .. } => "fairness",
                        _ => "protocol",
                    };
                    (name, None, Some(config.display().to_string()), vec![FigurePlan { tag: name.into(), plan }])
                }
                Command::Replay { .. } => unreachable!(),
            };
            for p in &mut plans {
                apply_overrides(&mut p.plan, cli);
                p.plan.validate().map_err(|e| Failure::Validation(anyhow!("plan {}: {e}", p.tag)))?;
                if name == "fairness" && p.plan.fading == FadingSpec::Iid {
                    return Err(Failure::Validation(anyhow!("fairness needs mode = \"gauss_markov\" in [fading]")));
                }
            }
            let manifest = RunManifest {
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: name.to_string(),
                figure,
                config_path,
                out_dir: Some(cli.out.display().to_string()),
                seed_override: cli.seed,
                trials_override: cli.trials,
                trial_cap_override: cli.trial_cap,
                plans: plans
                    .iter()
                    .map(|p| ManifestPlan { tag: p.tag.clone(), config: ConfigFile::from_plan(&p.plan) })
                    .collect(),
            };
            (manifest, plans)
        }
    };

    ensure_dir(&cli.out).map_err(Failure::Runtime)?;
    let report = run_command(&manifest.command, manifest.figure, &plans).map_err(Failure::Runtime)?;

    let write = || -> anyhow::Result<Vec<PathBuf>> {
        let echo = manifest.echo();
        let mut files = Vec::new();
        for t in &report.tables {
            files.push(t.write(&cli.out, &echo)?);
        }
        let path = cli.out.join(MANIFEST_FILE);
        fs::write(&path, manifest.to_toml())?;
        files.push(path);
        if cli.plot {
            if let Some(script) = plot_script(&report.tables) {
                let path = cli.out.join(PLOT_FILE);
                fs::write(&path, script)?;
                files.push(path);
            }
        }
        Ok(files)
    };
    let files = write().map_err(Failure::Runtime)?;
    Ok(Summary { lines: report.lines, files, check_failures: report.check_failures, checked: cli.check })
}
