//! Closed-loop simulation.
//!
//! Every control interval: build the QP at the interval's initial state,
//! solve it, hold `(u, ν₁)` constant over `[t, t + dt]`, and integrate the
//! joint dynamics of the unicycle and the auxiliary variable.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::benchmarks::{hoclbf_row, tvcbf_row};
use crate::error::{Error, Result};
use crate::model::{ControlInput, UnicycleState};
use crate::qp::{self, ActiveSet, ConstraintRow, QpProblem, QpStatus, RowTag};
use crate::reach::{self, avclbf_row, aux_positivity_row, Envelope};
use crate::safety::{hocbf_cascade, REGULARITY_EPS};
use crate::scenario::{ControllerConfig, ModelKind, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    /// Dormand–Prince 5(4) with step-size control inside each interval.
    Rk45,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(rename = "dt_s", default = "default_dt")]
    pub dt: f64,
    #[serde(rename = "t_max_s")]
    pub t_max: f64,
    #[serde(default)]
    pub integrator: Integrator,
    pub u_min: Vec<f64>,
    pub u_max: Vec<f64>,
}

fn default_dt() -> f64 {
    0.01
}

impl SimConfig {
    pub fn validate(&self, inputs: usize) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_max >= self.dt && self.t_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "t_max ({}) must be at least dt ({})",
                self.t_max, self.dt
            )));
        }
        if self.u_min.len() != inputs || self.u_max.len() != inputs {
            return Err(Error::InvalidParameter(format!(
                "control bounds need {inputs} entries, got {} and {}",
                self.u_min.len(),
                self.u_max.len()
            )));
        }
        for (lo, hi) in self.u_min.iter().zip(&self.u_max) {
            if lo.is_nan() || hi.is_nan() || lo > hi {
                return Err(Error::InvalidParameter(format!("control bound [{lo}, {hi}] is empty")));
            }
        }
        Ok(())
    }

    pub fn step_count(&self) -> usize {
        (self.t_max / self.dt + 1e-9).floor() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Reached,
    Infeasible,
    Horizon,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    Continue,
    Reached,
    Infeasible(String),
    Horizon(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionValues {
    pub b: f64,
    pub psi1: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetValues {
    pub h: f64,
    /// AVCLBF ψ₀; `None` for the benchmark families.
    pub psi0: Option<f64>,
    /// Benchmark ψ₁ (from `h_b1` or `h_b2`).
    pub bench_psi1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowValue {
    pub tag: RowTag,
    /// `aᵀz` at the applied decision vector.
    pub lhs: f64,
    pub rhs: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub state: UnicycleState,
    pub a1: f64,
    /// Input held over `[t, t + dt]`; `None` on terminal samples.
    pub u: Option<ControlInput>,
    pub nu1: Option<f64>,
    pub regions: Vec<RegionValues>,
    pub targets: Vec<TargetValues>,
    pub rows: Vec<RowValue>,
    pub qp_status: Option<QpStatus>,
    pub kkt_residual: Option<f64>,
}

impl Sample {
    pub fn feasible(&self) -> bool {
        self.qp_status != Some(QpStatus::Infeasible)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario_id: String,
    pub status: TerminationReason,
    pub t_r_s: Option<f64>,
    pub min_safety_margin: Option<f64>,
    pub max_envelope_violation: Option<f64>,
    pub step_count: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub samples: Vec<Sample>,
    pub summary: RunSummary,
    /// Comparison-lemma reach time per target (AVCLBF only).
    pub predicted_reach_times: Vec<Option<f64>>,
    pub diagnostics: Vec<String>,
}

/// Outcome of the start-of-run checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub regions: Vec<RegionValues>,
    pub targets: Vec<TargetValues>,
    pub problems: Vec<String>,
}

impl Admissibility {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Requires `b ≥ 0`, `ψ₁ ≥ 0` for every region and `ψ₀ ≥ 0` for every
/// AVCLBF target at the initial state.
pub fn admissibility(cfg: &ScenarioConfig) -> Admissibility {
    let s = cfg.initial_state();
    let a1 = cfg.initial_a1();
    let mut problems = Vec::new();
    let regions: Vec<RegionValues> = cfg
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let c = hocbf_cascade(r, &cfg.safety_gains, &s, i);
            if c.psi0 < 0.0 {
                problems.push(format!("region {i}: b(0) = {:.6} < 0", c.psi0));
            } else if c.psi1 < 0.0 {
                problems.push(format!("region {i}: psi1(0) = {:.6} < 0", c.psi1));
            }
            RegionValues { b: c.psi0, psi1: c.psi1 }
        })
        .collect();
    let targets = target_values(cfg, &s, a1, 0.0);
    if let ControllerConfig::Avclbf(_) = cfg.controller {
        for (i, tv) in targets.iter().enumerate() {
            if let Some(p) = tv.psi0 {
                if p < 0.0 {
                    problems.push(format!("target {i}: psi0(0) = {p:.6} < 0"));
                }
            }
        }
    }
    Admissibility {
        regions,
        targets,
        problems,
    }
}

fn target_values(cfg: &ScenarioConfig, s: &UnicycleState, a1: f64, t: f64) -> Vec<TargetValues> {
    cfg.targets
        .iter()
        .enumerate()
        .map(|(i, tg)| {
            let (h, _) = reach::h_value(tg, s);
            let (psi0, bench_psi1) = match &cfg.controller {
                ControllerConfig::Avclbf(g) => (Some(reach::psi0(tg, g, s, a1, t)), None),
                ControllerConfig::Hoclbf(g) => (None, Some(hoclbf_row(tg, g, s, i).psi1)),
                ControllerConfig::Tvcbf(g) => (None, tvcbf_row(tg, g, s, t.min(g.horizon), i).ok().map(|r| r.psi1)),
            };
            TargetValues { h, psi0, bench_psi1 }
        })
        .collect()
}

/// The QP of one control interval plus the constraint values it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledQp {
    pub problem: QpProblem,
    /// Decision-vector index → slot in `(u1, u2, ν1)`.
    pub columns: Vec<usize>,
    pub regions: Vec<RegionValues>,
    pub targets: Vec<TargetValues>,
    /// A row that lost all its coefficients after projection and is violated.
    pub violated_constant_row: Option<RowTag>,
    pub degenerate_regions: Vec<usize>,
}

fn columns(model: ModelKind, auxiliary: bool) -> Vec<usize> {
    let mut cols = match model {
        ModelKind::Unicycle4 => vec![0, 1],
        ModelKind::Unicycle3 => vec![0],
    };
    if auxiliary {
        cols.push(2);
    }
    cols
}

pub fn assemble_qp(cfg: &ScenarioConfig, s: &UnicycleState, a1: f64, t: f64) -> Result<AssembledQp> {
    let auxiliary = cfg.controller.has_auxiliary();
    let cols = columns(cfg.model, auxiliary);
    let mut full_rows: Vec<ConstraintRow> = Vec::new();
    let mut regions = Vec::with_capacity(cfg.regions.len());
    let mut degenerate_regions = Vec::new();

    for (i, r) in cfg.regions.iter().enumerate() {
        let c = hocbf_cascade(r, &cfg.safety_gains, s, i);
        regions.push(RegionValues { b: c.psi0, psi1: c.psi1 });
        let projected: f64 = cols.iter().filter(|&&c| c < 2).map(|&k| c.row.a[k].powi(2)).sum();
        if projected.sqrt() < REGULARITY_EPS {
            degenerate_regions.push(i);
        }
        full_rows.push(c.row);
    }

    let mut targets = Vec::with_capacity(cfg.targets.len());
    match &cfg.controller {
        ControllerConfig::Avclbf(g) => {
            for (i, tg) in cfg.targets.iter().enumerate() {
                let r = avclbf_row(tg, g, s, a1, t, i);
                targets.push(TargetValues {
                    h: r.h,
                    psi0: Some(r.psi0),
                    bench_psi1: None,
                });
                full_rows.push(r.row);
            }
            full_rows.push(aux_positivity_row(g, a1));
        }
        ControllerConfig::Hoclbf(g) => {
            for (i, tg) in cfg.targets.iter().enumerate() {
                let r = hoclbf_row(tg, g, s, i);
                targets.push(TargetValues {
                    h: reach::h_value(tg, s).0,
                    psi0: None,
                    bench_psi1: Some(r.psi1),
                });
                full_rows.push(r.row);
            }
        }
        ControllerConfig::Tvcbf(g) => {
            for (i, tg) in cfg.targets.iter().enumerate() {
                let r = tvcbf_row(tg, g, s, t, i)?;
                targets.push(TargetValues {
                    h: reach::h_value(tg, s).0,
                    psi0: None,
                    bench_psi1: Some(r.psi1),
                });
                full_rows.push(r.row);
            }
        }
    }

    let mut rows = Vec::with_capacity(full_rows.len());
    let mut violated_constant_row = None;
    for r in full_rows {
        let a: Vec<f64> = cols.iter().map(|&k| r.a[k]).collect();
        if a.iter().all(|v| *v == 0.0) {
            if r.b > qp::FEASIBILITY_TOL * r.b.abs().max(1.0) && violated_constant_row.is_none() {
                violated_constant_row = Some(r.tag);
            }
            continue;
        }
        rows.push(ConstraintRow::new(a, r.b, r.tag));
    }

    let n = cols.len();
    let mut h = DMatrix::zeros(n, n);
    let mut f = DVector::zeros(n);
    let mut lower = vec![f64::NEG_INFINITY; n];
    let mut upper = vec![f64::INFINITY; n];
    for (j, &k) in cols.iter().enumerate() {
        if k < 2 {
            h[(j, j)] = 2.0;
            lower[j] = cfg.sim.u_min[k];
            upper[j] = cfg.sim.u_max[k];
        } else if let ControllerConfig::Avclbf(g) = &cfg.controller {
            h[(j, j)] = 2.0 * g.w1;
            f[j] = -2.0 * g.w1 * g.a1w;
        }
    }
    Ok(AssembledQp {
        problem: QpProblem {
            h,
            f,
            rows,
            lower,
            upper,
        },
        columns: cols,
        regions,
        targets,
        violated_constant_row,
        degenerate_regions,
    })
}

/// Joint state `(x, y, θ, v, a₁)` advanced under a held input.
pub fn integrate_interval(
    integrator: Integrator,
    state: &UnicycleState,
    a1: f64,
    u: ControlInput,
    nu1: f64,
    dt: f64,
) -> (UnicycleState, f64) {
    let y0 = [state.x, state.y, state.theta, state.v, a1];
    let rhs = |y: &[f64; 5]| -> [f64; 5] { [y[3] * y[2].cos(), y[3] * y[2].sin(), u.u1, u.u2, nu1] };
    let y = match integrator {
        Integrator::Rk4 => rk4(&rhs, y0, dt),
        Integrator::Rk45 => dopri5(&rhs, y0, dt, 1e-10, 1e-12),
    };
    (UnicycleState::new(y[0], y[1], y[2], y[3]), y[4])
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, k: &[f64; N]) -> [f64; N] {
    std::array::from_fn(|i| y[i] + h * k[i])
}

pub(crate) fn rk4<const N: usize>(f: &impl Fn(&[f64; N]) -> [f64; N], y: [f64; N], h: f64) -> [f64; N] {
    let k1 = f(&y);
    let k2 = f(&axpy(&y, 0.5 * h, &k1));
    let k3 = f(&axpy(&y, 0.5 * h, &k2));
    let k4 = f(&axpy(&y, h, &k3));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Adaptive Dormand–Prince over `[0, span]` for an autonomous system.
pub(crate) fn dopri5<const N: usize>(
    f: &impl Fn(&[f64; N]) -> [f64; N],
    mut y: [f64; N],
    span: f64,
    rtol: f64,
    atol: f64,
) -> [f64; N] {
    const C2: f64 = 1.0 / 5.0;
    const A: [[f64; 6]; 6] = [
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const E: [f64; 7] = [
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ];
    let _ = C2;
    let mut t = 0.0;
    let mut h = span;
    let mut guard = 0;
    while t < span && guard < 100_000 {
        guard += 1;
        h = h.min(span - t);
        let mut k = [[0.0; N]; 7];
        k[0] = f(&y);
        for s in 0..6 {
            let yi: [f64; N] = std::array::from_fn(|i| y[i] + h * (0..=s).map(|j| A[s][j] * k[j][i]).sum::<f64>());
            k[s + 1] = f(&yi);
        }
        // row 6 of A is the 5th-order solution (FSAL)
        let y5: [f64; N] = std::array::from_fn(|i| y[i] + h * (0..6).map(|j| A[5][j] * k[j][i]).sum::<f64>());
        let mut err: f64 = 0.0;
        for i in 0..N {
            let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
            let sc = atol + rtol * y[i].abs().max(y5[i].abs());
            err = err.max((e / sc).abs());
        }
        if err <= 1.0 {
            t += h;
            y = y5;
        }
        let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h *= factor;
    }
    y
}

/// Per-run stepping context; carries the warm-start active set.
pub struct Simulator<'a> {
    cfg: &'a ScenarioConfig,
    warm: Option<ActiveSet>,
}

pub struct StepResult {
    pub state: UnicycleState,
    pub a1: f64,
    pub outcome: StepOutcome,
    pub sample: Sample,
}

impl<'a> Simulator<'a> {
    pub fn new(cfg: &'a ScenarioConfig) -> Self {
        Self { cfg, warm: None }
    }

    fn reached(values: &[TargetValues]) -> bool {
        !values.is_empty() && values.iter().all(|v| v.h <= 0.0)
    }

    pub fn step(&mut self, state: &UnicycleState, a1: f64, t: f64) -> Result<StepResult> {
        let cfg = self.cfg;
        let terminal = |targets: Vec<TargetValues>, regions: Vec<RegionValues>, outcome: StepOutcome| StepResult {
            state: *state,
            a1,
            outcome,
            sample: Sample {
                t,
                state: *state,
                a1,
                u: None,
                nu1: None,
                regions,
                targets,
                rows: Vec::new(),
                qp_status: None,
                kkt_residual: None,
            },
        };
        let regions_now = || -> Vec<RegionValues> {
            cfg.regions
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    let c = hocbf_cascade(r, &cfg.safety_gains, state, i);
                    RegionValues { b: c.psi0, psi1: c.psi1 }
                })
                .collect()
        };

        let targets = target_values(cfg, state, a1, t);
        if Self::reached(&targets) {
            return Ok(terminal(targets, regions_now(), StepOutcome::Reached));
        }
        if let ControllerConfig::Tvcbf(g) = &cfg.controller {
            if t > g.horizon + 1e-9 && !cfg.targets.is_empty() {
                return Ok(terminal(
                    targets,
                    regions_now(),
                    StepOutcome::Horizon(format!("contraction horizon {} s elapsed", g.horizon)),
                ));
            }
        }

        let asm = assemble_qp(cfg, state, a1, t.min(match &cfg.controller {
            ControllerConfig::Tvcbf(g) => g.horizon,
            _ => f64::INFINITY,
        }))
        .map_err(|e| Error::Step { t, source: Box::new(e) })?;

        let mut sample = Sample {
            t,
            state: *state,
            a1,
            u: None,
            nu1: None,
            regions: asm.regions.clone(),
            targets: asm.targets.clone(),
            rows: Vec::new(),
            qp_status: Some(QpStatus::Infeasible),
            kkt_residual: None,
        };
        if let Some(tag) = asm.violated_constant_row {
            return Ok(StepResult {
                state: *state,
                a1,
                outcome: StepOutcome::Infeasible(format!("{tag} cannot be influenced by the input and is violated")),
                sample,
            });
        }

        let sol = match &self.warm {
            Some(guess) => qp::solve_warm(&asm.problem, guess),
            None => qp::solve(&asm.problem),
        }
        .map_err(|e| Error::Step { t, source: Box::new(e) })?;

        if sol.status == QpStatus::Infeasible {
            self.warm = None;
            let blocking: Vec<String> = sol
                .certificate
                .as_ref()
                .map(|c| {
                    c.row_weights
                        .iter()
                        .enumerate()
                        .filter(|(_, w)| **w > 0.0)
                        .map(|(i, _)| asm.problem.rows[i].tag.to_string())
                        .collect()
                })
                .unwrap_or_default();
            return Ok(StepResult {
                state: *state,
                a1,
                outcome: StepOutcome::Infeasible(format!("QP infeasible; conflicting rows: {}", blocking.join(", "))),
                sample,
            });
        }

        let mut full = [0.0; 3];
        for (j, &k) in asm.columns.iter().enumerate() {
            full[k] = sol.z[j];
        }
        let u = ControlInput::new(full[0], full[1]);
        let nu1 = if cfg.controller.has_auxiliary() { full[2] } else { 0.0 };
        sample.u = Some(u);
        sample.nu1 = cfg.controller.has_auxiliary().then_some(nu1);
        sample.qp_status = Some(QpStatus::Optimal);
        sample.kkt_residual = Some(sol.kkt_residual);
        sample.rows = asm
            .problem
            .rows
            .iter()
            .map(|r| RowValue {
                tag: r.tag,
                lhs: r.lhs(&sol.z),
                rhs: r.b,
                scale: r.scale(&sol.z),
            })
            .collect();
        self.warm = Some(sol.active.clone());

        let (next, next_a1) = integrate_interval(cfg.sim.integrator, state, a1, u, nu1, cfg.sim.dt);
        Ok(StepResult {
            state: next,
            a1: next_a1,
            outcome: StepOutcome::Continue,
            sample,
        })
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    let started = Instant::now();
    let adm = admissibility(cfg);
    if !adm.ok() {
        return Err(Error::Inadmissible(adm.problems.join("; ")));
    }

    let mut sim = Simulator::new(cfg);
    let mut state = cfg.initial_state();
    let mut a1 = cfg.initial_a1();
    let mut samples = Vec::new();
    let mut diagnostics = Vec::new();
    let mut degenerate_logged = vec![false; cfg.regions.len()];
    let last = cfg.sim.step_count();
    let mut status = TerminationReason::Horizon;

    for k in 0..=last {
        let t = k as f64 * cfg.sim.dt;
        if k == last {
            let targets = target_values(cfg, &state, a1, t);
            if Simulator::reached(&targets) {
                let r = sim.step(&state, a1, t)?;
                samples.push(r.sample);
                status = TerminationReason::Reached;
            } else {
                let regions = cfg
                    .regions
                    .iter()
                    .enumerate()
                    .map(|(i, r)| {
                        let c = hocbf_cascade(r, &cfg.safety_gains, &state, i);
                        RegionValues { b: c.psi0, psi1: c.psi1 }
                    })
                    .collect();
                samples.push(Sample {
                    t,
                    state,
                    a1,
                    u: None,
                    nu1: None,
                    regions,
                    targets,
                    rows: Vec::new(),
                    qp_status: None,
                    kkt_residual: None,
                });
                diagnostics.push(format!("horizon t_max = {} s reached", cfg.sim.t_max));
            }
            break;
        }
        let r = sim.step(&state, a1, t)?;
        for (i, b) in r.sample.regions.iter().enumerate() {
            if !degenerate_logged[i] {
                let c = hocbf_cascade(&cfg.regions[i], &cfg.safety_gains, &state, i);
                if c.degenerate {
                    degenerate_logged[i] = true;
                    diagnostics.push(format!("t = {t:.2} s: region {i} has |LgLf b| < {REGULARITY_EPS:e} (b = {:.3e})", b.b));
                }
            }
        }
        samples.push(r.sample);
        match r.outcome {
            StepOutcome::Continue => {
                state = r.state;
                a1 = r.a1;
            }
            StepOutcome::Reached => {
                status = TerminationReason::Reached;
                break;
            }
            StepOutcome::Infeasible(msg) => {
                diagnostics.push(format!("t = {t:.2} s: {msg}"));
                status = TerminationReason::Infeasible;
                break;
            }
            StepOutcome::Horizon(msg) => {
                diagnostics.push(format!("t = {t:.2} s: {msg}"));
                status = TerminationReason::Horizon;
                break;
            }
        }
    }

    let (predicted, envelopes) = envelopes(cfg);
    let summary = summarize(cfg, &samples, status, &envelopes, started.elapsed().as_secs_f64());
    Ok(TrajectoryLog {
        samples,
        summary,
        predicted_reach_times: predicted,
        diagnostics,
    })
}

/// Envelope per target, built from the initial `h`.
pub fn envelopes(cfg: &ScenarioConfig) -> (Vec<Option<f64>>, Vec<Option<Envelope>>) {
    let ControllerConfig::Avclbf(g) = &cfg.controller else {
        return (vec![None; cfg.targets.len()], vec![None; cfg.targets.len()]);
    };
    let s = cfg.initial_state();
    cfg.targets
        .iter()
        .map(|tg| {
            let (h0, _) = reach::h_value(tg, &s);
            match Envelope::new(h0, g.q, &g.c_schedule) {
                Ok(env) => (env.reach_time().is_finite().then_some(env.reach_time()), Some(env)),
                Err(_) => (None, None),
            }
        })
        .unzip()
}

pub fn summarize(
    cfg: &ScenarioConfig,
    samples: &[Sample],
    status: TerminationReason,
    envelopes: &[Option<Envelope>],
    wall_time_s: f64,
) -> RunSummary {
    let min_safety_margin = samples
        .iter()
        .flat_map(|s| s.regions.iter().map(|r| r.b))
        .reduce(f64::min);
    let max_envelope_violation = if envelopes.iter().any(Option::is_some) {
        samples
            .iter()
            .flat_map(|s| {
                s.targets
                    .iter()
                    .zip(envelopes)
                    .filter_map(move |(tv, env)| env.as_ref().map(|e| tv.h - e.eval(s.t)))
            })
            .reduce(f64::max)
    } else {
        None
    };
    RunSummary {
        scenario_id: cfg.id.clone(),
        status,
        t_r_s: (status == TerminationReason::Reached).then(|| samples.last().map(|s| s.t)).flatten(),
        min_safety_margin,
        max_envelope_violation,
        step_count: samples.iter().filter(|s| s.u.is_some()).count(),
        wall_time_s,
    }
}
