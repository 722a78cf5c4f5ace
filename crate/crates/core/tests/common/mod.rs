#![allow(dead_code)]

use std::path::{Path, PathBuf};

use avclbf::benchmarks::{hoclbf_row, tvcbf_row};
use avclbf::qp::{ConstraintRow, QpProblem, RowTag};
use avclbf::reach::avclbf_row;
use avclbf::safety::hocbf_cascade;
use avclbf::scenario::parse_scenario;
use avclbf::{
    AvclbfGains, CSchedule, CircularRegion, ControlInput, HocbfGains, HoclbfGains, ReachTarget, RegionMode,
    ScenarioConfig, TvCbfGains, UnicycleState,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub fn scenario_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

pub fn load(name: &str) -> ScenarioConfig {
    parse_scenario(scenario_path(name)).unwrap()
}

/// Same map and gains, started off the obstacle axis at `y = 2`.
pub fn offset(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.id = format!("{}_offset", cfg.id);
    cfg.initial_state.y_m = 2.0;
    cfg
}

// ---------- QP enumeration oracle ----------

fn solve_dense(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-11 * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let (top, rest) = m.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for (r, row) in rest.iter_mut().enumerate() {
            let k = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= k * p;
            }
            rhs[col + 1 + r] -= k * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| m[r][c] * x[c]).sum();
        x[r] = (rhs[r] - s) / m[r][r];
    }
    Some(x)
}

/// All constraints as `aᵀz ≥ b`, bounds included.
pub fn all_rows(p: &QpProblem) -> Vec<(Vec<f64>, f64)> {
    let n = p.dim();
    let mut rows: Vec<(Vec<f64>, f64)> = p.rows.iter().map(|r| (r.a.clone(), r.b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        if p.lower[j].is_finite() {
            rows.push((e.clone(), p.lower[j]));
        }
        if p.upper[j].is_finite() {
            e[j] = -1.0;
            rows.push((e, -p.upper[j]));
        }
    }
    rows
}

/// Minimum objective over the equality-constrained minimizers of every
/// active subset of size ≤ n that are feasible. `None` means infeasible.
pub fn enumerate_optimum(p: &QpProblem) -> Option<(f64, Vec<f64>)> {
    let n = p.dim();
    let rows = all_rows(p);
    let m = rows.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut subset = Vec::new();
    fn rec(
        start: usize,
        subset: &mut Vec<usize>,
        n: usize,
        m: usize,
        visit: &mut dyn FnMut(&[usize]),
    ) {
        visit(subset);
        if subset.len() == n {
            return;
        }
        for k in start..m {
            subset.push(k);
            rec(k + 1, subset, n, m, visit);
            subset.pop();
        }
    }
    let mut visit = |s: &[usize]| {
        let k = s.len();
        let dim = n + k;
        let mut kkt = vec![vec![0.0; dim]; dim];
        let mut rhs = vec![0.0; dim];
        for (i, row) in kkt.iter_mut().take(n).enumerate() {
            for (j, x) in row.iter_mut().take(n).enumerate() {
                *x = p.h[(i, j)];
            }
            rhs[i] = -p.f[i];
        }
        for (c, &ri) in s.iter().enumerate() {
            let (a, b) = &rows[ri];
            for i in 0..n {
                kkt[i][n + c] = -a[i];
                kkt[n + c][i] = a[i];
            }
            rhs[n + c] = *b;
        }
        let Some(sol) = solve_dense(kkt, rhs) else { return };
        let z = &sol[..n];
        let ok = rows.iter().all(|(a, b)| {
            let lhs: f64 = a.iter().zip(z).map(|(a, z)| a * z).sum();
            let scale = 1f64.max(b.abs()).max(a.iter().zip(z).map(|(a, z)| (a * z).abs()).sum());
            lhs - b >= -1e-9 * scale
        });
        if !ok {
            return;
        }
        let obj = p.objective(z);
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, z.to_vec()));
        }
    };
    rec(0, &mut subset, n, m, &mut visit);
    best
}

/// Strictly convex problem with 2–3 variables, 1–4 rows and optional bounds.
pub fn random_qp(rng: &mut impl Rng) -> QpProblem {
    let n = rng.random_range(2..=3);
    let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = m.transpose() * &m + DMatrix::identity(n, n) * rng.random_range(0.05..1.0);
    let f = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    let mut p = QpProblem::new(h, f);
    for _ in 0..rng.random_range(1..=4) {
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let b = rng.random_range(-2.0..2.0);
        p = p.with_row(ConstraintRow::new(a, b, RowTag::Other));
    }
    if rng.random_bool(0.5) {
        let lower: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..0.5)).collect();
        let upper: Vec<f64> = lower.iter().map(|l| l + rng.random_range(0.1..3.0)).collect();
        p = p.with_bounds(lower, upper);
    }
    p
}

// ---------- Lie-derivative oracle ----------

/// Augmented state `(x, y, θ, v, a₁)` and time.
#[derive(Debug, Clone, Copy)]
pub struct Point {
    pub s: UnicycleState,
    pub a1: f64,
    pub t: f64,
}

pub fn flow(p: &Point, u: &ControlInput, nu: f64, eps: f64) -> Point {
    let s = p.s;
    Point {
        s: UnicycleState::new(
            s.x + eps * s.v * s.theta.cos(),
            s.y + eps * s.v * s.theta.sin(),
            s.theta + eps * u.u1,
            s.v + eps * u.u2,
        ),
        a1: p.a1 + eps * nu,
        t: p.t + eps,
    }
}

/// Central difference of `g` along the closed-loop vector field.
pub fn along_flow(g: impl Fn(&Point) -> f64, p: &Point, u: &ControlInput, nu: f64) -> f64 {
    let scale = 1f64.max(p.s.x.abs()).max(p.s.y.abs()).max(p.s.v.abs());
    let eps = 1e-5 * scale;
    (g(&flow(p, u, nu, eps)) - g(&flow(p, u, nu, -eps))) / (2.0 * eps)
}

pub fn poly(c: &[f64], t: f64) -> f64 {
    c.iter().enumerate().map(|(k, c)| c * t.powi(k as i32)).sum()
}

fn sgnpow(s: f64, q: f64) -> f64 {
    s.signum() * s.abs().powf(q)
}

/// `(‖p − c‖² − r², d/dt of it)`, derived from coordinates.
fn disk(cx: f64, cy: f64, r: f64, s: &UnicycleState) -> (f64, f64) {
    let (dx, dy) = (s.x - cx, s.y - cy);
    (
        dx * dx + dy * dy - r * r,
        2.0 * dx * s.v * s.theta.cos() + 2.0 * dy * s.v * s.theta.sin(),
    )
}

pub fn oracle_safety_psi1(region: &CircularRegion, k1: f64, p: &Point) -> f64 {
    let (d, dd) = disk(region.cx, region.cy, region.r, &p.s);
    let sign = if region.mode == RegionMode::KeepOut { 1.0 } else { -1.0 };
    sign * dd + k1 * sign * d
}

pub fn oracle_avclbf_psi0(target: &ReachTarget, g: &AvclbfGains, p: &Point) -> f64 {
    let (h, hd) = disk(target.cx, target.cy, target.r, &p.s);
    p.a1 * (-hd - poly(&g.c_schedule.coefficients, p.t) * sgnpow(h, g.q))
}

pub fn oracle_hoclbf_psi1(target: &ReachTarget, g: &HoclbfGains, p: &Point) -> f64 {
    let (h, hd) = disk(target.cx, target.cy, target.r, &p.s);
    -hd + g.c1 * sgnpow(-h, g.q1)
}

pub fn oracle_tvcbf_psi1(target: &ReachTarget, g: &TvCbfGains, p: &Point) -> f64 {
    let (h, hd) = disk(target.cx, target.cy, target.r, &p.s);
    let rate = (g.rd0 * g.rd0 - g.rd_t * g.rd_t) / g.horizon;
    let hb = g.rd0 * g.rd0 - rate * p.t - (h + target.r * target.r);
    let hb_dot = -rate - hd;
    hb_dot + g.l1 * hb
}

#[derive(Debug, Clone, Copy)]
pub struct LieCase {
    pub kind: &'static str,
    /// Row value `drift + a·z`.
    pub row: f64,
    /// `ψ̇ + κ(ψ)` with `ψ̇` from finite differences.
    pub oracle: f64,
}

impl LieCase {
    pub fn rel_err(&self) -> f64 {
        (self.row - self.oracle).abs() / 1f64.max(self.oracle.abs())
    }
}

fn row_value(row: &ConstraintRow, u: &ControlInput, nu: f64) -> f64 {
    row.lhs(&[u.u1, u.u2, nu]) - row.b
}

/// One random configuration for each row family, kept away from the points
/// where the power terms lose smoothness.
pub fn random_lie_cases(rng: &mut impl Rng) -> Vec<LieCase> {
    let s = UnicycleState::new(
        rng.random_range(-4.0..4.0),
        rng.random_range(-4.0..4.0),
        rng.random_range(-3.2..3.2),
        rng.random_range(-2.0..3.0),
    );
    let u = ControlInput::new(rng.random_range(-10.0..10.0), rng.random_range(-5.0..5.0));
    let nu = rng.random_range(-1e3..1e3);
    let p = Point {
        s,
        a1: rng.random_range(1.0..2e3),
        t: rng.random_range(0.0..4.0),
    };
    let mut out = Vec::new();

    let mode = if rng.random_bool(0.5) { RegionMode::KeepOut } else { RegionMode::KeepIn };
    let region = CircularRegion::new(
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(0.2..5.0),
        mode,
    )
    .unwrap();
    let gains = HocbfGains::new(rng.random_range(0.1..5.0), rng.random_range(0.1..5.0)).unwrap();
    let c = hocbf_cascade(&region, &gains, &p.s, 0);
    let dot = along_flow(|q| oracle_safety_psi1(&region, gains.k1, q), &p, &u, nu);
    out.push(LieCase {
        kind: "safety",
        row: row_value(&c.row, &u, nu),
        oracle: dot + gains.k2 * oracle_safety_psi1(&region, gains.k1, &p),
    });

    let target = loop {
        let t = ReachTarget::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(0.2..2.0),
            5.0,
        )
        .unwrap();
        let (h, _) = disk(t.cx, t.cy, t.r, &p.s);
        if h.abs() > 0.1 {
            break t;
        }
    };

    let qs = [0.2, 0.25, 1.0 / 3.0, 0.5, 2.0 / 3.0];
    let g = AvclbfGains {
        l1: rng.random_range(0.0..5.0),
        l2: rng.random_range(0.0..5.0),
        q: qs[rng.random_range(0..qs.len())],
        c_schedule: CSchedule::new(
            (0..rng.random_range(1..=3)).map(|_| rng.random_range(-3.0..5.0)).collect(),
            0.0,
        )
        .unwrap(),
        eps: 1e-10,
        w1: 1e3,
        a1w: 1e3,
        a1_0: 1001.0,
    };
    let r = avclbf_row(&target, &g, &p.s, p.a1, p.t, 0);
    let dot = along_flow(|q| oracle_avclbf_psi0(&target, &g, q), &p, &u, nu);
    out.push(LieCase {
        kind: "avclbf",
        row: row_value(&r.row, &u, nu),
        oracle: dot + g.l2 * oracle_avclbf_psi0(&target, &g, &p),
    });

    let hg = HoclbfGains {
        c1: rng.random_range(0.1..5.0),
        c2: rng.random_range(0.1..5.0),
        q1: qs[rng.random_range(0..qs.len())],
        q2: qs[rng.random_range(0..qs.len())],
    };
    let psi1 = oracle_hoclbf_psi1(&target, &hg, &p);
    if psi1.abs() > 0.1 {
        let r = hoclbf_row(&target, &hg, &p.s, 0);
        let dot = along_flow(|q| oracle_hoclbf_psi1(&target, &hg, q), &p, &u, nu);
        out.push(LieCase {
            kind: "hoclbf",
            row: row_value(&r.row, &u, nu),
            oracle: dot + hg.c2 * sgnpow(psi1, hg.q2),
        });
    }

    let rd_t = rng.random_range(0.1..1.0);
    let tg = TvCbfGains {
        l1: rng.random_range(0.1..5.0),
        l2: rng.random_range(0.1..5.0),
        rd0: rd_t + rng.random_range(0.5..6.0),
        rd_t,
        horizon: rng.random_range(4.5..10.0),
    };
    let r = tvcbf_row(&target, &tg, &p.s, p.t, 0).unwrap();
    let dot = along_flow(|q| oracle_tvcbf_psi1(&target, &tg, q), &p, &u, nu);
    out.push(LieCase {
        kind: "tvcbf",
        row: row_value(&r.row, &u, nu),
        oracle: dot + tg.l2 * oracle_tvcbf_psi1(&target, &tg, &p),
    });
    out
}
