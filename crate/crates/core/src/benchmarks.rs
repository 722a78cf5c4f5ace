//! Constraint rows for the two comparison controllers.
//!
//! HOCLBF: `h_b1 = r_d² − ‖p − p_d‖²` with power-law class-κ functions,
//!
//! ```text
//!     ψ₁ = ḣ_b1 + c₁ β₁(h_b1)
//!     ψ₂ = ψ̇₁ + c₂ β₂(ψ₁) ≥ 0
//! ```
//!
//! Time-varying CBF: `h_b2 = r_d0² − (r_d0² − r_dT²) t / T − ‖p − p_d‖²`
//! (a keep-in disk whose radius contracts to `r_dT` at `T`) with linear
//! class-κ functions,
//!
//! ```text
//!     ψ₁ = ∂h_b2/∂t + L_f h_b2 + l₁ h_b2
//!     ψ₂ = ψ̇₁ + l₂ ψ₁ ≥ 0
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{signed_pow, UnicycleState};
use crate::qp::{ConstraintRow, RowTag};
use crate::reach::{ReachTarget, SINGULARITY_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HoclbfGains {
    pub c1: f64,
    pub c2: f64,
    pub q1: f64,
    pub q2: f64,
}

impl HoclbfGains {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("c1", self.c1), ("c2", self.c2)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {c}")));
            }
        }
        for q in [self.q1, self.q2] {
            if !(q > 0.0 && q < 1.0) {
                return Err(Error::ExponentOutOfRange(q));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TvCbfGains {
    pub l1: f64,
    pub l2: f64,
    #[serde(rename = "rd0_m")]
    pub rd0: f64,
    #[serde(rename = "rdt_m")]
    pub rd_t: f64,
    #[serde(rename = "horizon_s")]
    pub horizon: f64,
}

impl TvCbfGains {
    pub fn validate(&self) -> Result<()> {
        for (name, l) in [("l1", self.l1), ("l2", self.l2)] {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {l}")));
            }
        }
        if !(self.rd0 > self.rd_t && self.rd_t > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "need rd0 > rdT > 0, got rd0 = {}, rdT = {}",
                self.rd0, self.rd_t
            )));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Rate at which the squared radius shrinks.
    pub fn contraction_rate(&self) -> f64 {
        (self.rd0 * self.rd0 - self.rd_t * self.rd_t) / self.horizon
    }

    /// `r(t)`.
    pub fn radius(&self, t: f64) -> f64 {
        (self.rd0 * self.rd0 - self.contraction_rate() * t).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkRow {
    /// `h_b1` or `h_b2`.
    pub h: f64,
    pub psi1: f64,
    /// Input-free part of ψ₂.
    pub drift: f64,
    /// `ψ₂ ≥ 0` over `z = (u1, u2, ν1)`; the ν₁ coefficient is zero.
    pub row: ConstraintRow,
}

pub fn hoclbf_row(target: &ReachTarget, gains: &HoclbfGains, s: &UnicycleState, index: usize) -> BenchmarkRow {
    let d = target.terms(s).negated();
    let psi1 = d.lf + gains.c1 * signed_pow(d.value, gains.q1);
    let chain = gains.c1 * gains.q1 * d.value.abs().max(SINGULARITY_FLOOR).powf(gains.q1 - 1.0);
    let drift = d.lf2 + chain * d.lf + gains.c2 * signed_pow(psi1, gains.q2);
    BenchmarkRow {
        h: d.value,
        psi1,
        drift,
        row: ConstraintRow::new(vec![d.lglf[0], d.lglf[1], 0.0], -drift, RowTag::Benchmark(index)),
    }
}

pub fn tvcbf_row(
    target: &ReachTarget,
    gains: &TvCbfGains,
    s: &UnicycleState,
    t: f64,
    index: usize,
) -> Result<BenchmarkRow> {
    if t > gains.horizon {
        return Err(Error::PastHorizon {
            t,
            horizon: gains.horizon,
        });
    }
    let d = target.terms(s).negated();
    let rate = gains.contraction_rate();
    // d.value = r_d² − ‖p − p_d‖², swap in the contracting radius
    let h = gains.rd0 * gains.rd0 - rate * t - (target.r * target.r - d.value);
    let h_dot = -rate + d.lf;
    let psi1 = h_dot + gains.l1 * h;
    let drift = d.lf2 + gains.l1 * h_dot + gains.l2 * psi1;
    Ok(BenchmarkRow {
        h,
        psi1,
        drift,
        row: ConstraintRow::new(vec![d.lglf[0], d.lglf[1], 0.0], -drift, RowTag::Benchmark(index)),
    })
}
