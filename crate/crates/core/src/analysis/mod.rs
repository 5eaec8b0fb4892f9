//! Numerical verdicts on trajectories and closed-loop fields.

mod convergence;
mod direction;
mod sweep;

pub use convergence::{convergence_verdict, theta_closed_form, Classification, ConvergenceVerdict, VerdictTolerances};
pub use direction::{
    constant_direction_check, halton_ball_samples, DirectionCheckConfig, DirectionReport, Witness,
};
pub use sweep::{lattice_grid, sweep_initial_conditions, SweepRow, SweepTable};
