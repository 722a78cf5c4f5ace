//! Dense strictly convex QP solver for small problems.
//!
//! Solves
//!
//! ```text
//!     minimize     1/2 z' H z + f' z
//!     subject to   a_i' z >= b_i        for every row
//!                  lower <= z <= upper
//! ```
//!
//! with the dual active-set method of Goldfarb and Idnani. The iteration
//! starts from the unconstrained minimizer and adds violated constraints one
//! at a time, so it needs no feasible starting point. When a violated
//! constraint cannot be added, the current active set yields a nonnegative
//! combination of constraints whose left sides cancel and whose right sides
//! do not, which is returned as an infeasibility certificate.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Violation (of a unit-normal constraint) below which it counts as satisfied.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Acceptance threshold on the scaled KKT residual.
pub const KKT_TOL: f64 = 1e-8;
/// Largest condition number of `H` accepted.
pub const MAX_CONDITION: f64 = 1e12;

/// A candidate whose normal lies within this sine of the active span counts
/// as linearly dependent.
const DEPENDENCE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowTag {
    Safety(usize),
    Reach(usize),
    AuxPositivity,
    Benchmark(usize),
    Other,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Safety(i) => write!(f, "safety-{i}"),
            Self::Reach(i) => write!(f, "reach-{i}"),
            Self::AuxPositivity => write!(f, "aux-positivity"),
            Self::Benchmark(i) => write!(f, "benchmark-{i}"),
            Self::Other => write!(f, "other"),
        }
    }
}

/// One linear inequality `aᵀz ≥ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub a: Vec<f64>,
    pub b: f64,
    pub tag: RowTag,
}

impl ConstraintRow {
    pub fn new(a: Vec<f64>, b: f64, tag: RowTag) -> Self {
        Self { a, b, tag }
    }

    pub fn lhs(&self, z: &[f64]) -> f64 {
        self.a.iter().zip(z).map(|(a, z)| a * z).sum()
    }

    /// `aᵀz − b`.
    pub fn slack(&self, z: &[f64]) -> f64 {
        self.lhs(z) - self.b
    }

    /// Scale used for relative feasibility checks of this row at `z`.
    pub fn scale(&self, z: &[f64]) -> f64 {
        let terms: f64 = self.a.iter().zip(z).map(|(a, z)| (a * z).abs()).sum();
        1f64.max(self.b.abs()).max(terms)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    pub rows: Vec<ConstraintRow>,
    /// Use `f64::NEG_INFINITY` for an absent bound.
    pub lower: Vec<f64>,
    /// Use `f64::INFINITY` for an absent bound.
    pub upper: Vec<f64>,
}

impl QpProblem {
    /// Problem without bounds.
    pub fn new(h: DMatrix<f64>, f: DVector<f64>) -> Self {
        let n = f.len();
        Self {
            h,
            f,
            rows: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn with_row(mut self, row: ConstraintRow) -> Self {
        self.rows.push(row);
        self
    }

    pub fn with_bounds(mut self, lower: Vec<f64>, upper: Vec<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        let z = DVector::from_column_slice(z);
        0.5 * z.dot(&(&self.h * &z)) + self.f.dot(&z)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        if n == 0 {
            return Err(Error::Malformed("no decision variables".into()));
        }
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(Error::Malformed(format!(
                "H is {}x{}, expected {n}x{n}",
                self.h.nrows(),
                self.h.ncols()
            )));
        }
        if self.h.iter().chain(self.f.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Malformed("non-finite cost entry".into()));
        }
        let asym = (&self.h - self.h.transpose()).amax();
        if asym > 1e-12 * self.h.amax().max(1.0) {
            return Err(Error::Malformed("H is not symmetric".into()));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::Malformed("bounds length mismatch".into()));
        }
        for (j, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if l.is_nan() || u.is_nan() || l > u {
                return Err(Error::Malformed(format!("bounds on z[{j}]: [{l}, {u}]")));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.a.len() != n {
                return Err(Error::Malformed(format!(
                    "row {i} ({}) has {} coefficients, expected {n}",
                    r.tag,
                    r.a.len()
                )));
            }
            if r.a.iter().any(|v| !v.is_finite()) || !r.b.is_finite() {
                return Err(Error::Malformed(format!("row {i} ({}) is not finite", r.tag)));
            }
            if r.a.iter().all(|v| *v == 0.0) {
                return Err(Error::Malformed(format!("row {i} ({}) is all zero", r.tag)));
            }
        }
        Ok(())
    }
}

/// Where an internal constraint came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintRef {
    Row(usize),
    Lower(usize),
    Upper(usize),
}

/// Active constraints at a solution; usable as a warm start.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ActiveSet(pub Vec<ConstraintRef>);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
}

/// Nonnegative weights `y` with `Σ yᵢaᵢ = 0` and `Σ yᵢbᵢ > 0`, proving that
/// no `z` satisfies all `aᵢᵀz ≥ bᵢ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FarkasCertificate {
    pub row_weights: Vec<f64>,
    pub lower_weights: Vec<f64>,
    pub upper_weights: Vec<f64>,
}

impl FarkasCertificate {
    /// Returns `(‖Σ yᵢaᵢ‖∞ / scale, Σ yᵢbᵢ / ‖y‖₁)`, computed with unit
    /// normals so both numbers are comparable across rows.
    pub fn residuals(&self, p: &QpProblem) -> (f64, f64) {
        let cons = Internal::build(p);
        let mut combo = DVector::zeros(p.dim());
        let mut scale: f64 = 0.0;
        let mut gap = 0.0;
        let mut mass = 0.0;
        for c in &cons.items {
            let y = match c.origin {
                ConstraintRef::Row(i) => self.row_weights[i],
                ConstraintRef::Lower(j) => self.lower_weights[j],
                ConstraintRef::Upper(j) => self.upper_weights[j],
            } * c.norm;
            combo += &c.a * y;
            scale = scale.max(y.abs());
            gap += y * c.b;
            mass += y.abs();
        }
        let cancel = combo.amax() / scale.max(f64::MIN_POSITIVE);
        (cancel, if mass > 0.0 { gap / mass } else { 0.0 })
    }

    /// Checks nonnegativity, cancellation and a strictly positive gap.
    pub fn verify(&self, p: &QpProblem) -> bool {
        let nonneg = self
            .row_weights
            .iter()
            .chain(&self.lower_weights)
            .chain(&self.upper_weights)
            .all(|y| *y >= 0.0);
        let (cancel, gap) = self.residuals(p);
        nonneg && cancel <= KKT_TOL && gap > FEASIBILITY_TOL
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub status: QpStatus,
    /// Optimal point; for infeasible problems the last dual iterate.
    pub z: Vec<f64>,
    pub row_duals: Vec<f64>,
    pub lower_duals: Vec<f64>,
    pub upper_duals: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub active: ActiveSet,
    pub certificate: Option<FarkasCertificate>,
    pub iterations: usize,
    pub warm_started: bool,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }
}

/// Scaled KKT residuals; each component is dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }
}

struct Constraint {
    /// Unit normal.
    a: DVector<f64>,
    b: f64,
    norm: f64,
    origin: ConstraintRef,
}

struct Internal {
    items: Vec<Constraint>,
}

impl Internal {
    fn build(p: &QpProblem) -> Self {
        let n = p.dim();
        let mut items = Vec::with_capacity(p.rows.len() + 2 * n);
        for (i, r) in p.rows.iter().enumerate() {
            let a = DVector::from_column_slice(&r.a);
            let norm = a.norm();
            items.push(Constraint {
                a: a / norm,
                b: r.b / norm,
                norm,
                origin: ConstraintRef::Row(i),
            });
        }
        for j in 0..n {
            if p.lower[j].is_finite() {
                items.push(Constraint {
                    a: unit(n, j, 1.0),
                    b: p.lower[j],
                    norm: 1.0,
                    origin: ConstraintRef::Lower(j),
                });
            }
            if p.upper[j].is_finite() {
                items.push(Constraint {
                    a: unit(n, j, -1.0),
                    b: -p.upper[j],
                    norm: 1.0,
                    origin: ConstraintRef::Upper(j),
                });
            }
        }
        Self { items }
    }

    fn index_of(&self, r: ConstraintRef) -> Option<usize> {
        self.items.iter().position(|c| c.origin == r)
    }

    fn tol(&self, k: usize) -> f64 {
        FEASIBILITY_TOL * self.items[k].b.abs().max(1.0)
    }

    fn violation(&self, k: usize, z: &DVector<f64>) -> f64 {
        self.items[k].b - self.items[k].a.dot(z)
    }
}

fn unit(n: usize, j: usize, s: f64) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[j] = s;
    e
}

/// Cold solve.
pub fn solve(p: &QpProblem) -> Result<QpSolution> {
    Solver::new(p)?.run(None)
}

/// Solve starting from a previously optimal active set. Falls back to a cold
/// solve when the guess does not certify as optimal.
pub fn solve_warm(p: &QpProblem, guess: &ActiveSet) -> Result<QpSolution> {
    Solver::new(p)?.run(Some(guess))
}

struct Solver<'a> {
    p: &'a QpProblem,
    cons: Internal,
    hinv: DMatrix<f64>,
    /// `H = L Lᵀ`
    l: DMatrix<f64>,
    linv: DMatrix<f64>,
    /// `L⁻¹ aₖ` per internal constraint.
    white: Vec<DVector<f64>>,
}

impl<'a> Solver<'a> {
    fn new(p: &'a QpProblem) -> Result<Self> {
        p.validate()?;
        let eig = p.h.clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite);
        }
        if max / min > MAX_CONDITION {
            return Err(Error::IllConditioned(max / min));
        }
        let chol = p.h.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let l = chol.l();
        let linv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(p.dim(), p.dim()))
            .ok_or(Error::NotPositiveDefinite)?;
        let cons = Internal::build(p);
        let white = cons.items.iter().map(|c| &linv * &c.a).collect();
        Ok(Self {
            p,
            hinv: chol.inverse(),
            cons,
            l,
            linv,
            white,
        })
    }

    fn run(&self, guess: Option<&ActiveSet>) -> Result<QpSolution> {
        if let Some(guess) = guess {
            let mut active: Vec<usize> = Vec::new();
            for r in &guess.0 {
                if let Some(k) = self.cons.index_of(*r) {
                    if self.independent(&active, k) {
                        active.push(k);
                    }
                }
            }
            if let Some((z, lambda)) = self.equality_solve(&active) {
                if self.certifies(&active, &z, &lambda) {
                    return Ok(self.finish(QpStatus::Optimal, z, &active, &lambda, None, 0, true));
                }
            }
        }
        self.dual_active_set()
    }

    /// Active normals in the H-whitened coordinates `w = Lᵀz`.
    fn whitened(&self, active: &[usize]) -> DMatrix<f64> {
        let n = self.p.dim();
        let mut m = DMatrix::zeros(n, active.len());
        for (c, &k) in active.iter().enumerate() {
            m.set_column(c, &self.white[k]);
        }
        m
    }

    fn independent(&self, active: &[usize], k: usize) -> bool {
        if active.len() >= self.p.dim() {
            return false;
        }
        let (_, _, _, sin) = self.step_direction(active, k);
        sin > DEPENDENCE_TOL
    }

    /// Primal direction `H⁻¹(a − N r)`, dual direction `r` for adding `k`,
    /// the curvature `aᵀd`, and the sine of the H⁻¹-angle between `a` and the active span.
    ///
    /// The projection runs through a QR factorisation of the whitened normals
    /// so that a tiny component outside the span is not lost to cancellation.
    fn step_direction(&self, active: &[usize], k: usize) -> (DVector<f64>, DVector<f64>, f64, f64) {
        let at = &self.white[k];
        let norm = at.norm();
        if active.is_empty() {
            return (self.linv.tr_mul(at), DVector::zeros(0), norm * norm, 1.0);
        }
        let qr = self.whitened(active).qr();
        let q = qr.q();
        let coef = q.tr_mul(at);
        let rho = at - &q * &coef;
        let r = qr
            .r()
            .solve_upper_triangular(&coef)
            .unwrap_or_else(|| DVector::zeros(active.len()));
        let d = self.linv.tr_mul(&rho);
        (d, r, rho.norm_squared(), rho.norm() / norm)
    }

    /// KKT point with `active` held as equalities.
    fn equality_solve(&self, active: &[usize]) -> Option<(DVector<f64>, DVector<f64>)> {
        let z0 = -(&self.hinv * &self.p.f);
        if active.is_empty() {
            return Some((z0, DVector::zeros(0)));
        }
        let nw = self.whitened(active);
        let w0 = self.l.tr_mul(&z0);
        let b = DVector::from_iterator(active.len(), active.iter().map(|&k| self.cons.items[k].b));
        let rhs = b - nw.tr_mul(&w0);
        let qr = nw.qr();
        let rmat = qr.r();
        let y = rmat.tr_solve_upper_triangular(&rhs)?;
        let lambda = rmat.solve_upper_triangular(&y)?;
        if lambda.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        let w = w0 + qr.q() * y;
        let z = self.linv.tr_mul(&w);
        Some((z, lambda))
    }

    fn certifies(&self, active: &[usize], z: &DVector<f64>, lambda: &DVector<f64>) -> bool {
        let dual_ok = lambda.iter().all(|l| *l >= -FEASIBILITY_TOL * lambda.amax().max(1.0));
        let primal_ok = (0..self.cons.items.len()).all(|k| {
            let v = self.cons.violation(k, z);
            if active.contains(&k) {
                v.abs() <= self.cons.tol(k)
            } else {
                v <= self.cons.tol(k)
            }
        });
        dual_ok && primal_ok
    }

    fn dual_active_set(&self) -> Result<QpSolution> {
        let total = self.cons.items.len();
        let max_iter = 50 * (total + self.p.dim() + 1);
        let mut z = -(&self.hinv * &self.p.f);
        let mut active: Vec<usize> = Vec::new();
        let mut lambda: Vec<f64> = Vec::new();
        let mut iterations = 0;

        loop {
            // most violated constraint, ties to the lowest index
            let mut pick: Option<(usize, f64)> = None;
            for k in 0..total {
                if active.contains(&k) {
                    continue;
                }
                let v = self.cons.violation(k, &z);
                if v > self.cons.tol(k) && pick.is_none_or(|(_, best)| v > best) {
                    pick = Some((k, v));
                }
            }
            let Some((p, _)) = pick else {
                let lam = DVector::from_vec(lambda.clone());
                let (z, lam) = self.polish(&active, z, lam);
                return Ok(self.finish(QpStatus::Optimal, z, &active, &lam, None, iterations, false));
            };

            let mut lambda_p = 0.0;
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(Error::Malformed(format!(
                        "active-set iteration limit ({max_iter}) reached"
                    )));
                }
                let (d, r, curvature, sin) = self.step_direction(&active, p);
                let dependent = sin <= DEPENDENCE_TOL;

                // partial step: first active multiplier to hit zero
                let mut partial: Option<(usize, f64)> = None;
                for (c, &rj) in r.iter().enumerate() {
                    if rj > 1e-14 {
                        let t = lambda[c] / rj;
                        if partial.is_none_or(|(_, best)| t < best) {
                            partial = Some((c, t));
                        }
                    }
                }

                if dependent {
                    let Some((drop, t)) = partial else {
                        let cert = self.certificate(&active, &r, p);
                        let lam = DVector::from_vec(lambda.clone());
                        return Ok(self.finish(
                            QpStatus::Infeasible,
                            z,
                            &active,
                            &lam,
                            Some(cert),
                            iterations,
                            false,
                        ));
                    };
                    for (c, l) in lambda.iter_mut().enumerate() {
                        *l -= t * r[c];
                    }
                    lambda_p += t;
                    active.remove(drop);
                    lambda.remove(drop);
                    continue;
                }

                let full = self.cons.violation(p, &z) / curvature;
                let (t, blocking) = match partial {
                    Some((c, tp)) if tp < full => (tp, Some(c)),
                    _ => (full, None),
                };
                z += &d * t;
                for (c, l) in lambda.iter_mut().enumerate() {
                    *l -= t * r[c];
                }
                lambda_p += t;
                match blocking {
                    None => {
                        active.push(p);
                        lambda.push(lambda_p);
                        break;
                    }
                    Some(c) => {
                        active.remove(c);
                        lambda.remove(c);
                    }
                }
            }
        }
    }

    /// Re-solves the final equality system to clean up accumulated rounding.
    fn polish(
        &self,
        active: &[usize],
        z: DVector<f64>,
        lambda: DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let e = self.equality_solve(active);
        match e {
            Some((zp, lp)) if self.certifies(active, &zp, &lp) => (zp, lp),
            _ => (z, lambda),
        }
    }

    fn certificate(&self, active: &[usize], r: &DVector<f64>, p: usize) -> FarkasCertificate {
        let n = self.p.dim();
        let mut cert = FarkasCertificate {
            row_weights: vec![0.0; self.p.rows.len()],
            lower_weights: vec![0.0; n],
            upper_weights: vec![0.0; n],
        };
        let weights = std::iter::once((p, 1.0)).chain(active.iter().zip(r.iter()).map(|(&k, &rk)| (k, (-rk).max(0.0))));
        for (k, y) in weights {
            let c = &self.cons.items[k];
            let raw = y / c.norm;
            match c.origin {
                ConstraintRef::Row(i) => cert.row_weights[i] += raw,
                ConstraintRef::Lower(j) => cert.lower_weights[j] += raw,
                ConstraintRef::Upper(j) => cert.upper_weights[j] += raw,
            }
        }
        cert
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        status: QpStatus,
        z: DVector<f64>,
        active: &[usize],
        lambda: &DVector<f64>,
        certificate: Option<FarkasCertificate>,
        iterations: usize,
        warm_started: bool,
    ) -> QpSolution {
        let n = self.p.dim();
        let mut row_duals = vec![0.0; self.p.rows.len()];
        let mut lower_duals = vec![0.0; n];
        let mut upper_duals = vec![0.0; n];
        for (c, &k) in active.iter().enumerate() {
            let item = &self.cons.items[k];
            let raw = lambda[c] / item.norm;
            match item.origin {
                ConstraintRef::Row(i) => row_duals[i] = raw,
                ConstraintRef::Lower(j) => lower_duals[j] = raw,
                ConstraintRef::Upper(j) => upper_duals[j] = raw,
            }
        }
        let zv: Vec<f64> = z.iter().copied().collect();
        let mut sol = QpSolution {
            status,
            objective: self.p.objective(&zv),
            z: zv,
            row_duals,
            lower_duals,
            upper_duals,
            kkt_residual: f64::NAN,
            active: ActiveSet(active.iter().map(|&k| self.cons.items[k].origin).collect()),
            certificate,
            iterations,
            warm_started,
        };
        if status == QpStatus::Optimal {
            sol.kkt_residual = check_kkt(self.p, &sol).max();
        }
        sol
    }
}

/// Scaled KKT residuals of `s` for `p`.
///
/// Stationarity is `‖Hz + f − Σλᵢaᵢ − μₗ + μᵤ‖∞` over the largest term in it;
/// primal violation is measured per row relative to the row's magnitude at
/// `z`; complementarity is `Σ|λᵢ(aᵢᵀz − bᵢ)|` over the objective scale.
pub fn check_kkt(p: &QpProblem, s: &QpSolution) -> KktReport {
    let n = p.dim();
    let z = DVector::from_column_slice(&s.z);
    let hz = &p.h * &z;
    let mut grad = &hz + &p.f;
    let mut scale = 1f64.max(hz.amax()).max(p.f.amax());
    let mut dual: f64 = 0.0;
    let mut comp = 0.0;
    let mut primal: f64 = 0.0;

    for (i, r) in p.rows.iter().enumerate() {
        let l = s.row_duals[i];
        for j in 0..n {
            grad[j] -= l * r.a[j];
            scale = scale.max((l * r.a[j]).abs());
        }
        dual = dual.max(-l);
        let slack = r.slack(&s.z);
        comp += (l * slack).abs();
        primal = primal.max(-slack / r.scale(&s.z));
    }
    for j in 0..n {
        let (ml, mu) = (s.lower_duals[j], s.upper_duals[j]);
        grad[j] -= ml - mu;
        scale = scale.max(ml.abs()).max(mu.abs());
        dual = dual.max(-ml).max(-mu);
        if p.lower[j].is_finite() {
            let slack = s.z[j] - p.lower[j];
            comp += (ml * slack).abs();
            primal = primal.max(-slack / p.lower[j].abs().max(s.z[j].abs()).max(1.0));
        } else if ml != 0.0 {
            comp += ml.abs() * f64::INFINITY;
        }
        if p.upper[j].is_finite() {
            let slack = p.upper[j] - s.z[j];
            comp += (mu * slack).abs();
            primal = primal.max(-slack / p.upper[j].abs().max(s.z[j].abs()).max(1.0));
        } else if mu != 0.0 {
            comp += mu.abs() * f64::INFINITY;
        }
    }
    let obj_scale = 1f64.max(z.dot(&hz).abs()).max(p.f.dot(&z).abs());
    KktReport {
        stationarity: grad.amax() / scale,
        primal: primal.max(0.0),
        dual: dual.max(0.0) / scale,
        complementarity: comp / obj_scale,
    }
}
