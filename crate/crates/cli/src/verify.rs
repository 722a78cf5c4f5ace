//! Offline re-check of a written trajectory against its scenario.

use std::path::Path;

use anyhow::{bail, Context, Result};
use avclbf::reach::{self, HoldBranch};
use avclbf::sim;
use avclbf::{ControllerConfig, ScenarioConfig};

use crate::output::trajectory_header;

pub const SAFETY_TOL: f64 = 1e-3;
pub const ENVELOPE_TOL: f64 = 1e-3;
pub const PSI0_TOL: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Per target, the hold monitor evaluated at the end of the horizon.
    pub hold: Vec<Option<reach::NegativeHold>>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            s += &format!("{} {}: {}\n", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
        }
        for (i, h) in self.hold.iter().enumerate() {
            if let Some(h) = h {
                let bound = if h.bound.is_nan() { "undefined".to_string() } else { format!("{:e}", h.bound) };
                s += &format!(
                    "hold target {i}: branch {:?}, bound {bound}, schedule condition {}\n",
                    h.applicable,
                    if h.condition_holds { "met" } else { "not met" }
                );
            }
        }
        s
    }
}

struct Row {
    t: f64,
    a1: f64,
    h: Vec<f64>,
    b: Vec<f64>,
    psi0: Option<f64>,
    feasible: bool,
}

fn num(field: &str, col: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .with_context(|| format!("line {line}: column {col} is not a number: `{field}`"))
}

fn read_rows(csv_path: &Path, cfg: &ScenarioConfig) -> Result<Vec<Row>> {
    let mut rdr = csv::Reader::from_path(csv_path).with_context(|| format!("opening {}", csv_path.display()))?;
    let header: Vec<String> = rdr.headers()?.iter().map(String::from).collect();
    let expected = trajectory_header(cfg);
    if header != expected {
        bail!(
            "{}: header {:?} does not match the scenario's columns {:?}",
            csv_path.display(),
            header,
            expected
        );
    }
    let (nt, nr) = (cfg.targets.len(), cfg.regions.len());
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let get = |i: usize| num(&rec[i], &expected[i], line);
        let h0 = 9;
        rows.push(Row {
            t: get(0)?,
            a1: get(5)?,
            h: (0..nt).map(|i| get(h0 + i)).collect::<Result<_>>()?,
            b: (0..nr).map(|i| get(h0 + nt + i)).collect::<Result<_>>()?,
            psi0: match &rec[h0 + nt + nr] {
                "" => None,
                s => Some(num(s, "psi0", line)?),
            },
            feasible: &rec[h0 + nt + nr + 1] == "1",
        });
    }
    Ok(rows)
}

pub fn verify(csv_path: &Path, cfg: &ScenarioConfig) -> Result<VerifyReport> {
    let rows = read_rows(csv_path, cfg)?;
    if rows.is_empty() {
        bail!("{}: no samples", csv_path.display());
    }
    let mut checks = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        checks.push(Check {
            name: name.into(),
            passed,
            detail,
        })
    };

    let min_b = rows.iter().flat_map(|r| r.b.iter().copied()).reduce(f64::min);
    match min_b {
        Some(m) => push("safety", m >= -SAFETY_TOL, format!("min b = {m:e}")),
        None => push("safety", true, "no regions".into()),
    }

    let infeasible_at: Vec<usize> = (0..rows.len()).filter(|&k| !rows[k].feasible).collect();
    push(
        "infeasibility terminal",
        infeasible_at.iter().all(|&k| k + 1 == rows.len()),
        format!("{} infeasible sample(s)", infeasible_at.len()),
    );

    let reached = rows.iter().position(|r| !r.h.is_empty() && r.h.iter().all(|&h| h <= 0.0));
    let mut hold = vec![None; cfg.targets.len()];

    if let ControllerConfig::Avclbf(g) = &cfg.controller {
        let min_a1 = rows.iter().map(|r| r.a1).fold(f64::INFINITY, f64::min);
        push("a1 positive", min_a1 > 0.0, format!("min a1 = {min_a1:e}"));

        let min_psi0 = rows
            .iter()
            .filter(|r| r.feasible)
            .filter_map(|r| r.psi0)
            .fold(f64::INFINITY, f64::min);
        push("psi0 nonnegative", min_psi0 >= -PSI0_TOL, format!("min psi0 = {min_psi0:e}"));

        let (predicted, envelopes) = sim::envelopes(cfg);
        let mut worst = f64::NEG_INFINITY;
        let end = reached.map_or(rows.len(), |k| k + 1);
        for r in &rows[..end] {
            for (h, env) in r.h.iter().zip(&envelopes) {
                if let Some(e) = env {
                    worst = worst.max(h - e.eval(r.t));
                }
            }
        }
        if worst.is_finite() {
            push("envelope", worst <= ENVELOPE_TOL, format!("max h - envelope = {worst:e}"));
        }

        if let Some(k) = reached {
            let tr = rows[k].t;
            let bound = predicted.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
            if bound.is_finite() {
                push(
                    "reach time",
                    tr <= bound + cfg.sim.dt,
                    format!("t_r = {tr} s, predicted {bound} s"),
                );
            }
            for (i, slot) in hold.iter_mut().enumerate() {
                let h_tr = rows[k].h[i];
                let t_end = cfg.sim.t_max.max(tr);
                match reach::negative_hold_bound(h_tr, g.q, &g.c_schedule, tr, t_end) {
                    Ok(m) => {
                        let mut after_ok = true;
                        for r in &rows[k + 1..] {
                            if let Ok(m) = reach::negative_hold_bound(h_tr, g.q, &g.c_schedule, tr, r.t) {
                                if m.condition_holds
                                    && m.applicable != HoldBranch::Boundary
                                    && r.h[i] > m.bound + ENVELOPE_TOL
                                {
                                    after_ok = false;
                                }
                            }
                        }
                        push(
                            &format!("negative hold {i}"),
                            after_ok,
                            format!("h(t_r) = {h_tr:e}, {} sample(s) after t_r", rows.len() - k - 1),
                        );
                        *slot = Some(m);
                    }
                    Err(e @ avclbf::Error::NonRealPower { .. }) => {
                        push(&format!("negative hold {i}"), true, format!("not monitored: {e}"))
                    }
                    Err(e) => push(&format!("negative hold {i}"), false, e.to_string()),
                }
            }
        }
    }

    Ok(VerifyReport { checks, hold })
}
