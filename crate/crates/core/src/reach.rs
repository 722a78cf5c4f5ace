//! Finite-time reachability through auxiliary-variable adaptive CLBFs.
//!
//! For a target disk with `h = (x−xd)² + (y−yd)² − rd²` and a positive
//! auxiliary variable `a₁` driven by `ȧ₁ = ν₁`:
//!
//! ```text
//!     ψ₀ = a₁ (−ḣ − c(t) β(h)),        β(h) = sign(h)|h|^q
//!     ψ₁ = ψ̇₀ + l₂ ψ₀ ≥ 0               (QP row, linear in u and ν₁)
//!     φ₁ = ν₁ + l₁ a₁ ≥ ε               (keeps a₁ positive)
//! ```
//!
//! Keeping `ψ₀ ≥ 0` makes `ḣ + c(t) h^q ≤ 0`, so by the comparison lemma `h`
//! stays below the envelope
//! `[h₀^{1−q} − (1−q)(C∫(t) − C∫(0))]^{1/(1−q)}`, which reaches zero once the
//! integral of `c` has grown by the critical value `h₀^{1−q}/(1−q)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::DiskTerms;
use crate::model::{signed_pow, CSchedule, UnicycleState};
use crate::qp::{ConstraintRow, RowTag};

/// Lower clamp on `|h|` inside `|h|^{q−1}`.
pub const SINGULARITY_FLOOR: f64 = 1e-6;
/// Horizon scanned when inverting the running integral.
pub const REACH_SCAN_MAX: f64 = 1e3;
const REACH_SCAN_STEP: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReachTarget {
    #[serde(rename = "center_x_m")]
    pub cx: f64,
    #[serde(rename = "center_y_m")]
    pub cy: f64,
    #[serde(rename = "radius_m")]
    pub r: f64,
    #[serde(rename = "deadline_s")]
    pub deadline: f64,
}

impl ReachTarget {
    pub fn new(cx: f64, cy: f64, r: f64, deadline: f64) -> Result<Self> {
        let t = Self {
            cx,
            cy,
            r,
            deadline,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "target radius must be positive, got {}",
                self.r
            )));
        }
        if !(self.deadline > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "target deadline must be positive, got {}",
                self.deadline
            )));
        }
        if !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidParameter("target center must be finite".into()));
        }
        Ok(())
    }

    pub(crate) fn terms(&self, s: &UnicycleState) -> DiskTerms {
        DiskTerms::new(self.cx, self.cy, self.r, s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvclbfGains {
    pub l1: f64,
    pub l2: f64,
    pub q: f64,
    pub c_schedule: CSchedule,
    pub eps: f64,
    pub w1: f64,
    pub a1w: f64,
    pub a1_0: f64,
}

impl AvclbfGains {
    pub fn validate(&self) -> Result<()> {
        check_exponent(self.q)?;
        self.c_schedule.validate()?;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("eps", self.eps)?;
        positive("w1", self.w1)?;
        positive("a1_0", self.a1_0)?;
        for (name, v) in [("l1", self.l1), ("l2", self.l2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if !self.a1w.is_finite() {
            return Err(Error::InvalidParameter("a1w must be finite".into()));
        }
        Ok(())
    }
}

fn check_exponent(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::ExponentOutOfRange(q))
    }
}

/// `(h, ḣ)` where `ḣ = L_f h`.
pub fn h_value(target: &ReachTarget, s: &UnicycleState) -> (f64, f64) {
    let t = target.terms(s);
    (t.value, t.lf)
}

pub fn psi0(target: &ReachTarget, gains: &AvclbfGains, s: &UnicycleState, a1: f64, t: f64) -> f64 {
    let (h, hdot) = h_value(target, s);
    a1 * (-hdot - gains.c_schedule.eval(t) * signed_pow(h, gains.q))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvclbfRow {
    pub h: f64,
    pub psi0: f64,
    /// Input-free part of ψ₁, so that `ψ₁ = drift + row.a · z`.
    pub drift: f64,
    /// `ψ₁ ≥ 0` over `z = (u1, u2, ν1)`.
    pub row: ConstraintRow,
}

pub fn avclbf_row(
    target: &ReachTarget,
    gains: &AvclbfGains,
    s: &UnicycleState,
    a1: f64,
    t: f64,
    index: usize,
) -> AvclbfRow {
    let d = target.terms(s);
    let q = gains.q;
    let c = gains.c_schedule.eval(t);
    let c_dot = gains.c_schedule.derivative(t);
    let beta = signed_pow(d.value, q);
    let beta_prime = q * d.value.abs().max(SINGULARITY_FLOOR).powf(q - 1.0);

    let core = -d.lf - c * beta;
    let psi0 = a1 * core;
    let drift = a1 * (-d.lf2 - c_dot * beta - c * beta_prime * d.lf) + gains.l2 * psi0;
    let a = vec![-a1 * d.lglf[0], -a1 * d.lglf[1], core];
    AvclbfRow {
        h: d.value,
        psi0,
        drift,
        row: ConstraintRow::new(a, -drift, RowTag::Reach(index)),
    }
}

/// `ν₁ + l₁a₁ ≥ ε`.
pub fn aux_positivity_row(gains: &AvclbfGains, a1: f64) -> ConstraintRow {
    ConstraintRow::new(vec![0.0, 0.0, 1.0], gains.eps - gains.l1 * a1, RowTag::AuxPositivity)
}

/// Growth of `C∫` needed for the envelope to reach zero: `h₀^{1−q}/(1−q)`.
pub fn critical_value(h0: f64, q: f64) -> Result<f64> {
    check_exponent(q)?;
    if !(h0 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "initial h must be positive, got {h0}"
        )));
    }
    Ok(h0.powf(1.0 - q) / (1.0 - q))
}

/// Smallest `T ≥ 0` with `C∫(T) = C∫(0) + h₀^{1−q}/(1−q)`.
pub fn predicted_reach_time(h0: f64, q: f64, sched: &CSchedule) -> Result<f64> {
    predicted_reach_time_within(h0, q, sched, REACH_SCAN_MAX)
}

pub fn predicted_reach_time_within(h0: f64, q: f64, sched: &CSchedule, scan_max: f64) -> Result<f64> {
    let crit = critical_value(h0, q)?;
    let base = sched.integral(0.0);
    let g = |t: f64| sched.integral(t) - base - crit;

    let steps = (scan_max / REACH_SCAN_STEP).ceil() as usize;
    let mut lo = 0.0;
    let mut hi = None;
    for k in 1..=steps {
        let t = (k as f64 * REACH_SCAN_STEP).min(scan_max);
        if g(t) >= 0.0 {
            hi = Some(t);
            break;
        }
        lo = t;
    }
    let mut hi = hi.ok_or(Error::DeadlineUnreachable(scan_max))?;
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Comparison-lemma upper bound on `h(t)` for a fixed initial value.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    h0: f64,
    q: f64,
    sched: CSchedule,
    reach_time: f64,
}

impl Envelope {
    pub fn new(h0: f64, q: f64, sched: &CSchedule) -> Result<Self> {
        let reach_time = match predicted_reach_time(h0, q, sched) {
            Ok(t) => t,
            Err(Error::DeadlineUnreachable(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok(Self {
            h0,
            q,
            sched: sched.clone(),
            reach_time,
        })
    }

    /// `∞` when the schedule never accumulates the critical value.
    pub fn reach_time(&self) -> f64 {
        self.reach_time
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t >= self.reach_time {
            return 0.0;
        }
        envelope_formula(self.h0, self.q, &self.sched, t)
    }
}

fn envelope_formula(h0: f64, q: f64, sched: &CSchedule, t: f64) -> f64 {
    let grown = sched.integral(t) - sched.integral(0.0);
    let inner = h0.powf(1.0 - q) - (1.0 - q) * grown;
    if inner <= 0.0 {
        0.0
    } else {
        inner.powf(1.0 / (1.0 - q))
    }
}

pub fn envelope(h0: f64, q: f64, sched: &CSchedule, t: f64) -> Result<f64> {
    Ok(Envelope::new(h0, q, sched)?.eval(t))
}

/// Which case of the negative-hold bound applies, by the sign of `h(t_r)^{1−q}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HoldBranch {
    /// `h(t_r)^{1−q} < 0`
    A,
    /// `h(t_r)^{1−q} > 0`
    B,
    /// `h(t_r) = 0`
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchEval {
    /// `None` when the branch formula has no real value at `t`.
    pub bound: Option<f64>,
    /// The running-integral inequality for this branch holds at `t`.
    pub condition_holds: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NegativeHold {
    /// `h(t_r)^{1−q}` with real odd-root semantics.
    pub power: f64,
    pub applicable: HoldBranch,
    /// Bound from the applicable branch (0 on the boundary).
    pub bound: f64,
    pub condition_holds: bool,
    pub branch_a: BranchEval,
    pub branch_b: BranchEval,
}

/// `xᵉ` for negative `x` when `e` is a rational with odd denominator.
pub fn real_pow(x: f64, e: f64) -> Option<f64> {
    if x >= 0.0 {
        return Some(x.powf(e));
    }
    let (num, den) = rational_approx(e)?;
    if den % 2 == 0 {
        return None;
    }
    let mag = (-x).powf(e);
    Some(if num % 2 == 0 { mag } else { -mag })
}

fn rational_approx(e: f64) -> Option<(i64, i64)> {
    // continued fractions, denominators up to 10⁴
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut x = e;
    for _ in 0..32 {
        let a = x.floor();
        let (h2, k2) = (a as i64 * h1 + h0, a as i64 * k1 + k0);
        if k2 > 10_000 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - e).abs() < 1e-12 {
            return Some((h1, k1));
        }
        let frac = x - a;
        if frac.abs() < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    None
}

/// Monitor for keeping `h ≤ 0` on `[t_r, T]` after the target is entered.
pub fn negative_hold_bound(h_tr: f64, q: f64, sched: &CSchedule, tr: f64, t: f64) -> Result<NegativeHold> {
    if t < tr {
        return Err(Error::InvalidParameter(format!("t = {t} precedes t_r = {tr}")));
    }
    let power = real_pow(h_tr, 1.0 - q).ok_or(Error::NonRealPower { q })?;
    let grown = sched.integral(t) - sched.integral(tr);
    let threshold = power / (1.0 - q);
    let mut inner = power - (1.0 - q) * grown;
    if inner.abs() <= 1e-12 * power.abs().max(1.0) {
        inner = 0.0;
    }
    let root = real_pow(inner, 1.0 / (1.0 - q));
    let slack = 1e-12 * threshold.abs().max(1.0);
    let branch_a = BranchEval {
        bound: root,
        condition_holds: grown >= threshold - slack,
    };
    let branch_b = BranchEval {
        bound: root.map(|r| -r),
        condition_holds: grown <= threshold + slack,
    };
    let (applicable, bound, condition_holds) = if h_tr == 0.0 {
        (HoldBranch::Boundary, 0.0, true)
    } else if power < 0.0 {
        (HoldBranch::A, branch_a.bound.unwrap_or(f64::NAN), branch_a.condition_holds)
    } else {
        (HoldBranch::B, branch_b.bound.unwrap_or(f64::NAN), branch_b.condition_holds)
    };
    Ok(NegativeHold {
        power,
        applicable,
        bound,
        condition_holds,
        branch_a,
        branch_b,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub t: f64,
    pub value: f64,
    /// `ln(value)`; stays finite where `value` underflows.
    pub ln_value: f64,
}

/// Closed-form solution of `ḣ = −c(t) h^q` for `q ≥ 1`, which decays without
/// ever reaching zero.
pub fn q_out_of_range_demo(h0: f64, q: f64, sched: &CSchedule, grid: &[f64]) -> Result<Vec<EnvelopePoint>> {
    if !(q >= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "this trace is for q >= 1, got {q}"
        )));
    }
    if !(h0 > 0.0) {
        return Err(Error::InvalidParameter(format!("h0 must be positive, got {h0}")));
    }
    let base = sched.integral(0.0);
    Ok(grid
        .iter()
        .map(|&t| {
            let grown = sched.integral(t) - base;
            let ln_value = if q == 1.0 {
                h0.ln() - grown
            } else {
                let inner = h0.powf(1.0 - q) + (q - 1.0) * grown;
                if inner > 0.0 {
                    -inner.ln() / (q - 1.0)
                } else {
                    f64::INFINITY
                }
            };
            EnvelopePoint {
                t,
                value: ln_value.exp(),
                ln_value,
            }
        })
        .collect())
}
