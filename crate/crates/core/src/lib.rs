//! Simulation and verification toolkit for ODEs whose initial condition is
//! passed through a mapping `phi` before the flow starts (`x(0) = phi(x0)`).
//!
//! The worked system is the kinematic unicycle driven by a smooth
//! Bessel-series feedback law. Without remapping, any start with heading
//! `theta = 0` is an equilibrium; remapping `theta = 0` to `2*pi` makes the
//! robot move. The [`analysis`] module turns those statements into numerical
//! verdicts.
//!
//! Module map:
//!
//! * [`givp`]: shared domain types and the `apply phi, then flow` composition.
//! * [`special_fn`]: integer-order Bessel functions of the first kind and an
//!   exact rational series oracle.
//! * [`integrate`]: fixed-step RK4 and adaptive Dormand-Prince 5(4).
//! * [`unicycle`]: kinematic model, controller, heading remap.
//! * [`analysis`]: convergence verdicts, constant-direction check, sweeps.

pub mod analysis;
pub mod error;
pub mod givp;
pub mod integrate;
pub mod special_fn;
pub mod unicycle;

pub use analysis::{
    constant_direction_check, convergence_verdict, sweep_initial_conditions, theta_closed_form,
    Classification, ConvergenceVerdict, DirectionCheckConfig, DirectionReport, SweepRow,
    SweepTable, VerdictTolerances,
};
pub use error::{Error, Result};
pub use givp::{
    apply_ic_map, make_givp, ClosedLoopProblem, ControlInput, ControlLaw, InitialConditionMap,
    Sample, StateVector, SystemModel, Termination, Trajectory, TrajectoryMeta,
};
pub use integrate::{integrate, step_rk4, IntegratorConfig, Method};
pub use special_fn::{bessel_j, bessel_j_oracle, BesselOrder};
pub use unicycle::{
    beta, bessel_controller, simulate_unicycle, theta_ic_map, unicycle_field,
    BesselControllerParams, ThetaRemapParams,
};
