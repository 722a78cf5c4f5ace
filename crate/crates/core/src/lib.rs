//! Safety-critical optimal control of a unicycle by per-step quadratic
//! programs.
//!
//! Each control interval assembles a small QP whose rows come from
//! high-order control barrier functions (obstacle avoidance, keep-in
//! regions) and from auxiliary-variable adaptive control Lyapunov barrier
//! functions (reach a target disk before a deadline). Two comparison
//! controllers are provided: a high-order CLBF with power-law class-κ
//! functions and a time-varying CBF with a contracting radius.
//!
//! Modules, bottom-up:
//!
//! * [`model`]: dynamics, class-κ functions, polynomial gain schedules
//! * [`qp`]: dense active-set QP solver with KKT and infeasibility certificates
//! * [`safety`]: HOCBF rows for circular regions
//! * [`reach`]: reachability rows and the finite-time convergence envelope
//! * [`benchmarks`]: rows for the comparison controllers
//! * [`sim`]: the closed loop
//! * [`scenario`]: declarative experiment files

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod error;
pub mod model;
pub mod qp;
pub mod reach;
pub mod safety;
pub mod scenario;
pub mod sim;

mod lie;

pub use error::{Error, Result};
pub use model::{
    c_eval, c_integral, dynamics_rhs, kappa_eval, signed_pow, AuxiliaryState, CSchedule,
    ControlInput, KappaFunction, SimpleUnicycle, SimpleUnicycleState, UnicycleState,
};
pub use qp::{check_kkt, solve, ConstraintRow, KktReport, QpProblem, QpSolution, QpStatus, RowTag};
pub use reach::{AvclbfGains, ReachTarget};
pub use safety::{CircularRegion, HocbfGains, RegionMode};
pub use benchmarks::{HoclbfGains, TvCbfGains};
pub use scenario::{parse_scenario, ControllerConfig, ScenarioConfig};
pub use sim::{run, RunSummary, SimConfig, StepOutcome, TerminationReason, TrajectoryLog};
