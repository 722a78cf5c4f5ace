//! Command-line front end for the `avclbf` closed-loop experiments.

pub mod output;
pub mod sweep;
pub mod verify;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use avclbf::scenario::{parse_scenario_str, ScenarioError};
use avclbf::sim::{admissibility, Admissibility};
use avclbf::{ScenarioConfig, TerminationReason, TrajectoryLog};

pub use avclbf::scenario::parse_scenario;

pub const EXIT_REACHED: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_HORIZON: i32 = 3;

pub fn exit_code(status: TerminationReason) -> i32 {
    match status {
        TerminationReason::Reached => EXIT_REACHED,
        TerminationReason::Infeasible => EXIT_INFEASIBLE,
        TerminationReason::Horizon => EXIT_HORIZON,
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub dry_run: bool,
}

#[derive(Debug)]
pub enum RunReport {
    DryRun(Admissibility),
    Completed {
        log: TrajectoryLog,
        artifacts: Vec<PathBuf>,
    },
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunReport::DryRun(a) if a.ok() => EXIT_REACHED,
            RunReport::DryRun(_) => EXIT_ERROR,
            RunReport::Completed { log, .. } => exit_code(log.summary.status),
        }
    }
}

/// Loads a scenario and applies `--dt` / `--tmax`, re-validating the result.
pub fn load_with_overrides(path: &Path, dt: Option<f64>, t_max: Option<f64>) -> Result<ScenarioConfig> {
    let mut cfg = parse_scenario(path).map_err(|e| describe(path, e))?;
    if dt.is_none() && t_max.is_none() {
        return Ok(cfg);
    }
    if let Some(dt) = dt {
        cfg.sim.dt = dt;
    }
    if let Some(t) = t_max {
        cfg.sim.t_max = t;
    }
    let text = serde_json::to_string_pretty(&cfg)?;
    parse_scenario_str(&text).map_err(|e| describe(path, e))
}

pub fn describe(path: &Path, e: ScenarioError) -> anyhow::Error {
    anyhow::anyhow!("{}: {e}", path.display())
}

pub fn run_command(path: &Path, opts: &RunOptions) -> Result<RunReport> {
    let cfg = load_with_overrides(path, opts.dt, opts.t_max)?;
    if opts.dry_run {
        return Ok(RunReport::DryRun(admissibility(&cfg)));
    }
    let log = avclbf::run(&cfg).with_context(|| format!("running {}", cfg.id))?;
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("out").join(&cfg.id));
    let artifacts = output::write_artifacts(&out, &cfg, &log)?;
    Ok(RunReport::Completed { log, artifacts })
}

pub fn format_admissibility(cfg_id: &str, a: &Admissibility) -> String {
    let mut s = format!("scenario {cfg_id}: {}\n", if a.ok() { "admissible" } else { "rejected" });
    for (i, r) in a.regions.iter().enumerate() {
        s += &format!("  region {i}: b = {:.6}, psi1 = {:.6}\n", r.b, r.psi1);
    }
    for (i, t) in a.targets.iter().enumerate() {
        s += &format!("  target {i}: h = {:.6}", t.h);
        if let Some(p) = t.psi0 {
            s += &format!(", psi0 = {p:.6}");
        }
        if let Some(p) = t.bench_psi1 {
            s += &format!(", psi1 = {p:.6}");
        }
        s += "\n";
    }
    for p in &a.problems {
        s += &format!("  problem: {p}\n");
    }
    s
}
