//! HOCBF constraints keeping the unicycle outside (or inside) circles.
//!
//! With `b` the signed squared-distance barrier, the cascade is
//!
//! ```text
//!     ψ₀ = b
//!     ψ₁ = ḃ + k₁ b
//!     ψ₂ = L_f² b + L_g L_f b · u + k₁ L_f b + k₂ ψ₁  ≥ 0
//! ```
//!
//! and the last line is the QP row. Forward invariance of `{ψ₀ ≥ 0} ∩ {ψ₁ ≥ 0}`
//! needs both to hold at the initial state, see [`admissible`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::DiskTerms;
use crate::model::UnicycleState;
use crate::qp::{ConstraintRow, RowTag};

/// Below this norm of `L_g L_f b` the row no longer constrains the input.
pub const REGULARITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionMode {
    KeepOut,
    KeepIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircularRegion {
    #[serde(rename = "center_x_m")]
    pub cx: f64,
    #[serde(rename = "center_y_m")]
    pub cy: f64,
    #[serde(rename = "radius_m")]
    pub r: f64,
    pub mode: RegionMode,
}

impl CircularRegion {
    pub fn new(cx: f64, cy: f64, r: f64, mode: RegionMode) -> Result<Self> {
        let region = Self { cx, cy, r, mode };
        region.validate()?;
        Ok(region)
    }

    pub fn keep_out(cx: f64, cy: f64, r: f64) -> Self {
        Self::new(cx, cy, r, RegionMode::KeepOut).expect("valid region")
    }

    pub fn keep_in(cx: f64, cy: f64, r: f64) -> Self {
        Self::new(cx, cy, r, RegionMode::KeepIn).expect("valid region")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) || !self.cx.is_finite() || !self.cy.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "region radius must be positive and center finite, got r = {}",
                self.r
            )));
        }
        Ok(())
    }

    pub(crate) fn terms(&self, s: &UnicycleState) -> DiskTerms {
        let d = DiskTerms::new(self.cx, self.cy, self.r, s);
        match self.mode {
            RegionMode::KeepOut => d,
            RegionMode::KeepIn => d.negated(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HocbfGains {
    pub k1: f64,
    pub k2: f64,
}

impl HocbfGains {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        let g = Self { k1, k2 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k2 > 0.0) || !self.k1.is_finite() || !self.k2.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "HOCBF gains must be positive, got k1 = {}, k2 = {}",
                self.k1, self.k2
            )));
        }
        Ok(())
    }
}

/// Signed squared distance: positive in the safe set.
pub fn barrier_value(region: &CircularRegion, s: &UnicycleState) -> f64 {
    region.terms(s).value
}

#[derive(Debug, Clone, PartialEq)]
pub struct HocbfCascade {
    pub psi0: f64,
    pub psi1: f64,
    /// Input-free part of ψ₂, so that `ψ₂ = drift + row.a · z`.
    pub drift: f64,
    /// `ψ₂ ≥ 0` over `z = (u1, u2, ν1)`.
    pub row: ConstraintRow,
    /// `‖L_g L_f b‖ < REGULARITY_EPS`: the input cannot influence ψ₂ here.
    pub degenerate: bool,
}

pub fn hocbf_cascade(
    region: &CircularRegion,
    gains: &HocbfGains,
    s: &UnicycleState,
    index: usize,
) -> HocbfCascade {
    let b = region.terms(s);
    let psi0 = b.value;
    let psi1 = b.lf + gains.k1 * psi0;
    let drift = b.lf2 + gains.k1 * b.lf + gains.k2 * psi1;
    let norm = b.lglf[0].hypot(b.lglf[1]);
    HocbfCascade {
        psi0,
        psi1,
        drift,
        row: ConstraintRow::new(vec![b.lglf[0], b.lglf[1], 0.0], -drift, RowTag::Safety(index)),
        degenerate: norm < REGULARITY_EPS,
    }
}

/// `ψ₀(0) ≥ 0` and `ψ₁(0) ≥ 0`.
pub fn admissible(region: &CircularRegion, gains: &HocbfGains, s: &UnicycleState) -> bool {
    let c = hocbf_cascade(region, gains, s, 0);
    c.psi0 >= 0.0 && c.psi1 >= 0.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const START: UnicycleState = UnicycleState {
        x: -2.5,
        y: 0.0,
        theta: 0.0,
        v: 0.5,
    };

    #[test]
    fn barrier_examples() {
        let obstacle = CircularRegion::keep_out(0.0, 0.5, 1.0);
        assert_relative_eq!(barrier_value(&obstacle, &START), 5.5, epsilon = 1e-12);

        let on_circle = UnicycleState::new(1.0, 0.5, 0.3, 1.0);
        assert_eq!(barrier_value(&obstacle, &on_circle), 0.0);

        let outer = CircularRegion::keep_in(1.0, 0.0, 4.5);
        let center = UnicycleState::new(1.0, 0.0, 0.0, 0.0);
        assert_relative_eq!(barrier_value(&outer, &center), 20.25, epsilon = 1e-12);
    }

    #[test]
    fn cascade_at_start() {
        let obstacle = CircularRegion::keep_out(0.0, 0.5, 1.0);
        let c = hocbf_cascade(&obstacle, &HocbfGains::new(1.0, 1.0).unwrap(), &START, 0);
        assert_relative_eq!(c.psi0, 5.5, epsilon = 1e-12);
        assert_relative_eq!(c.psi1, 3.0, epsilon = 1e-12);
        // L_f² b = 2v² = 0.5, L_f b = −2.5
        assert_relative_eq!(c.drift, 0.5 - 2.5 + 3.0, epsilon = 1e-12);
        // L_g L_f b = [2v·(dy cosθ), 2·dx cosθ] = [−0.5, −5]
        assert_relative_eq!(c.row.a[0], -0.5, epsilon = 1e-12);
        assert_relative_eq!(c.row.a[1], -5.0, epsilon = 1e-12);
        assert_eq!(c.row.a[2], 0.0);
        assert_eq!(c.row.tag, RowTag::Safety(0));
    }

    #[test]
    fn zero_speed_annihilates_drift() {
        let obstacle = CircularRegion::keep_out(1.0, -1.0, 0.5);
        let s = UnicycleState::new(3.0, 2.0, 0.4, 0.0);
        let g = HocbfGains::new(2.0, 3.0).unwrap();
        let c = hocbf_cascade(&obstacle, &g, &s, 1);
        assert_eq!(c.psi1, 2.0 * c.psi0);
        assert_eq!(c.row.a[0], 0.0);
        let radial = 2.0 * (2.0 * 0.4f64.cos() + 3.0 * 0.4f64.sin());
        assert_relative_eq!(c.row.a[1], radial, epsilon = 1e-12);
        assert_relative_eq!(c.drift, 3.0 * c.psi1, epsilon = 1e-12);
    }

    #[test]
    fn boundary_at_rest_is_pure_input_row() {
        let obstacle = CircularRegion::keep_out(0.0, 0.0, 1.0);
        let s = UnicycleState::new(1.0, 0.0, 0.0, 0.0);
        let c = hocbf_cascade(&obstacle, &HocbfGains::new(1.0, 1.0).unwrap(), &s, 0);
        assert_eq!(c.psi0, 0.0);
        assert_eq!(c.drift, 0.0);
        assert_eq!(c.row.b, 0.0);
        assert_eq!(c.row.a, vec![0.0, 2.0, 0.0]);
        assert!(!c.degenerate);

        let at_center = UnicycleState::new(0.0, 0.0, 0.0, 0.0);
        assert!(hocbf_cascade(&obstacle, &HocbfGains::new(1.0, 1.0).unwrap(), &at_center, 0).degenerate);
    }

    #[test]
    fn keep_in_flips_signs() {
        let a = CircularRegion::keep_out(0.5, 0.0, 3.1);
        let b = CircularRegion::keep_in(0.5, 0.0, 3.1);
        let s = UnicycleState::new(-1.0, 0.7, 0.9, 1.3);
        let g = HocbfGains::new(1.0, 1.0).unwrap();
        let (ca, cb) = (hocbf_cascade(&a, &g, &s, 0), hocbf_cascade(&b, &g, &s, 0));
        assert_eq!(ca.psi0, -cb.psi0);
        assert_eq!(ca.psi1, -cb.psi1);
        assert_eq!(ca.row.a[1], -cb.row.a[1]);
        assert!(admissible(&b, &g, &UnicycleState::new(-2.5, 0.0, 0.0, 0.5)));
        assert!(!admissible(&CircularRegion::keep_in(0.5, 0.0, 0.31), &g, &START));
    }

    #[test]
    fn invalid_parameters() {
        assert!(CircularRegion::new(0.0, 0.0, 0.0, RegionMode::KeepOut).is_err());
        assert!(HocbfGains::new(0.0, 1.0).is_err());
    }
}
