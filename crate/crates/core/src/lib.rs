//! Slow-fast IS-LM dynamics.
//!
//! The goods market adjusts income `Y`, the money market adjusts the long
//! rate `R`. One of the two markets is fast, the other carries a small
//! parameter `epsilon`. The crate traces the IS and LM isoclines, finds and
//! classifies equilibria, integrates the singularly perturbed system,
//! detects relaxation cycles and runs policy sweeps.

pub mod cli;
pub mod error;
pub mod io;
pub mod isocline;
pub mod model;
pub mod ode;
pub mod phase;
pub mod scenario;
pub mod slowfast;
pub mod svg;

pub use error::{ErrorClass, IslmError, Result};
pub use isocline::{
    arc_stability, fold_values, trace_isocline, Arc, ArcLabel, Curve, Fold, FoldPair,
    IsoclineCurve, Stability,
};
pub use model::{
    eval_functions, kaldor_interval, short_rate, verify_conditions, ConditionReport,
    EconValues, FastSide, GridSpec, ModelConfig, Partials, Regime, State,
};
pub use ode::StepControl;
pub use phase::{
    eigen2, find_equilibria, jacobian, vector_field, Equilibrium, EquilibriumKind, Jacobian2,
    VectorFieldValue,
};
pub use scenario::{
    apply_shift, hysteresis_run, place_on_arc, sweep, sweep_with, BranchDiagram,
    HysteresisReport, Parameter, SweepMode, SweepSpec,
};
pub use slowfast::{
    detect_cycle, epsilon_convergence, integrate, singular_orbit, CycleControl, CycleReport,
    Orientation, SingularOrbit, Trajectory,
};
