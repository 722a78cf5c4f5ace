//! Unicycle dynamics, class-κ functions and time-varying gain schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// State of the acceleration-controlled unicycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnicycleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

impl UnicycleState {
    pub fn new(x: f64, y: f64, theta: f64, v: f64) -> Self {
        Self { x, y, theta, v }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.theta.is_finite() && self.v.is_finite()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.theta, self.v]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }
}

/// State of the constant-speed unicycle; the speed lives on the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimpleUnicycleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Constant-speed unicycle steered by angular velocity alone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimpleUnicycle {
    speed: f64,
}

impl SimpleUnicycle {
    pub fn new(speed: f64) -> Result<Self> {
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "simple unicycle speed must be positive, got {speed}"
            )));
        }
        Ok(Self { speed })
    }

    pub fn speed(&self) -> f64 {
        self.speed
    }

    /// `(v cosθ, v sinθ, ω)`.
    pub fn rhs(&self, s: &SimpleUnicycleState, omega: f64) -> [f64; 3] {
        [self.speed * s.theta.cos(), self.speed * s.theta.sin(), omega]
    }

    /// Embeds the simple state in the four-state model; `u2 = 0` keeps `v` fixed.
    pub fn lift(&self, s: &SimpleUnicycleState) -> UnicycleState {
        UnicycleState::new(s.x, s.y, s.theta, self.speed)
    }
}

/// Angular velocity and linear acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub u1: f64,
    pub u2: f64,
}

impl ControlInput {
    pub fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }
}

/// Positive multiplier with integrator dynamics `ȧ₁ = ν₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryState {
    pub a1: f64,
}

/// `(v cosθ, v sinθ, u1, u2)`.
pub fn dynamics_rhs(state: &UnicycleState, u: &ControlInput) -> [f64; 4] {
    [
        state.v * state.theta.cos(),
        state.v * state.theta.sin(),
        u.u1,
        u.u2,
    ]
}

/// `sign(s)·|s|^q`, the odd extension of the power function to all of ℝ.
pub fn signed_pow(s: f64, q: f64) -> f64 {
    if s == 0.0 {
        0.0
    } else {
        s.signum() * s.abs().powf(q)
    }
}

/// Class-κ function used by the constraint cascades.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KappaFunction {
    Linear { gain: f64 },
    SignedPower { exponent: f64 },
}

impl KappaFunction {
    pub fn linear(gain: f64) -> Result<Self> {
        if !(gain > 0.0 && gain.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "linear class-kappa gain must be positive, got {gain}"
            )));
        }
        Ok(Self::Linear { gain })
    }

    pub fn signed_power(exponent: f64) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 1.0) {
            return Err(Error::ExponentOutOfRange(exponent));
        }
        Ok(Self::SignedPower { exponent })
    }

    pub fn eval(&self, s: f64) -> f64 {
        kappa_eval(self, s)
    }

    /// Derivative with respect to the argument. For the power case `|s|` is
    /// clamped below at `floor` so the result stays finite at the origin.
    pub fn derivative(&self, s: f64, floor: f64) -> f64 {
        match *self {
            Self::Linear { gain } => gain,
            Self::SignedPower { exponent } => exponent * s.abs().max(floor).powf(exponent - 1.0),
        }
    }
}

pub fn kappa_eval(f: &KappaFunction, s: f64) -> f64 {
    match *f {
        KappaFunction::Linear { gain } => gain * s,
        KappaFunction::SignedPower { exponent } => signed_pow(s, exponent),
    }
}

/// Polynomial gain `c(t) = Σ cₖ tᵏ` together with its running integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CSchedule {
    /// Coefficients in ascending degree.
    pub coefficients: Vec<f64>,
    /// Value of the running integral at `t = 0`.
    #[serde(default)]
    pub c_int0: f64,
}

impl CSchedule {
    pub fn new(coefficients: Vec<f64>, c_int0: f64) -> Result<Self> {
        let s = Self {
            coefficients,
            c_int0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(k: f64) -> Self {
        Self {
            coefficients: vec![k],
            c_int0: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() {
            return Err(Error::InvalidParameter(
                "schedule needs at least one coefficient".into(),
            ));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) || !self.c_int0.is_finite() {
            return Err(Error::InvalidParameter(
                "schedule coefficients must be finite".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, t: f64) -> f64 {
        horner(&self.coefficients, t)
    }

    /// `ċ(t)`.
    pub fn derivative(&self, t: f64) -> f64 {
        let d: Vec<f64> = self
            .coefficients
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, c)| k as f64 * c)
            .collect();
        horner(&d, t)
    }

    /// `C∫(t) = C∫(0) + ∫₀ᵗ c`.
    pub fn integral(&self, t: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coefficients.iter().enumerate().rev() {
            acc = acc * t + c / (k as f64 + 1.0);
        }
        self.c_int0 + acc * t
    }
}

fn horner(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
}

pub fn c_eval(sched: &CSchedule, t: f64) -> f64 {
    sched.eval(t)
}

pub fn c_integral(sched: &CSchedule, t: f64) -> f64 {
    sched.integral(t)
}
