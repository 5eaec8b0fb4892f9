use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::givp::{euclidean_norm, StateVector, Trajectory};

/// `theta(t) = theta_init * exp(a t)`, the solution of `theta' = a theta`.
pub fn theta_closed_form(theta_init: f64, a: f64, t: f64) -> f64 {
    theta_init * (a * t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    ConvergedToOrigin,
    StationaryNonconvergent,
    MovingNonconvergent,
    Diverged,
}

impl Classification {
    pub const ALL: [Classification; 4] = [
        Classification::ConvergedToOrigin,
        Classification::StationaryNonconvergent,
        Classification::MovingNonconvergent,
        Classification::Diverged,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Classification::ConvergedToOrigin => "converged_to_origin",
            Classification::StationaryNonconvergent => "stationary_nonconvergent",
            Classification::MovingNonconvergent => "moving_nonconvergent",
            Classification::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictTolerances {
    /// Final state norm at or below this counts as reaching the origin.
    pub eps: f64,
    /// Planar displacement at or below this counts as not having moved.
    pub stationarity_tol: f64,
}

impl Default for VerdictTolerances {
    fn default() -> Self {
        VerdictTolerances {
            eps: 1e-3,
            stationarity_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceVerdict {
    pub converged: bool,
    pub final_norm: f64,
    /// Last state coordinate at the end of the run (the heading for the
    /// unicycle).
    pub theta_final: f64,
    /// Distance travelled in the first two coordinates (the only coordinate
    /// for scalar systems) between the first and last sample.
    pub displacement: f64,
    pub final_state: StateVector,
    pub classification: Classification,
}

/// Classifies the end of a run.
///
/// Order of precedence: `diverged` (the run ended in a divergence),
/// `converged_to_origin` (`final_norm <= eps`), `stationary_nonconvergent`
/// (`displacement <= stationarity_tol`), otherwise `moving_nonconvergent`.
pub fn convergence_verdict(traj: &Trajectory, tol: &VerdictTolerances) -> Result<ConvergenceVerdict> {
    let (first, last) = match (traj.first(), traj.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::contract("convergence_verdict: trajectory is empty")),
    };
    let planar = first.state.dimension().min(2);
    let delta: Vec<f64> = (0..planar).map(|i| last.state[i] - first.state[i]).collect();
    let displacement = euclidean_norm(&delta);
    let final_norm = last.state.norm();
    let theta_final = *last.state.last().expect("state vectors are non-empty");

    let classification = if traj.diverged() {
        Classification::Diverged
    } else if final_norm <= tol.eps {
        Classification::ConvergedToOrigin
    } else if displacement <= tol.stationarity_tol {
        Classification::StationaryNonconvergent
    } else {
        Classification::MovingNonconvergent
    };
    Ok(ConvergenceVerdict {
        converged: classification == Classification::ConvergedToOrigin,
        final_norm,
        theta_final,
        displacement,
        final_state: last.state.clone(),
        classification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::givp::{make_givp, ControlLaw, InitialConditionMap, SystemModel};
    use crate::integrate::{integrate, IntegratorConfig};
    use crate::unicycle::{simulate_unicycle, BesselControllerParams};
    use crate::Error;
    use std::f64::consts::TAU;

    fn sv(v: &[f64]) -> StateVector {
        StateVector::from_slice(v).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(theta_closed_form(0.0, -1.0, 123.0), 0.0);
        assert_eq!(theta_closed_form(TAU, -1.0, 0.0), TAU);
        assert_eq!(theta_closed_form(1.0, -1.0, 1.0), (-1.0f64).exp());
    }

    #[test]
    fn closed_form_agrees_with_integrator() {
        let sys = SystemModel::new("theta", 1, 0, |x, _| vec![-x[0]]).unwrap();
        let p = make_givp(sys, ControlLaw::zero(1, 0), InitialConditionMap::identity()).unwrap();
        let traj = integrate(&p, &sv(&[1.0]), &IntegratorConfig::fixed(1e-3, 3.0)).unwrap();
        for s in &traj.samples {
            assert!((s.state[0] - theta_closed_form(1.0, -1.0, s.t)).abs() <= 1e-8);
        }
    }

    #[test]
    fn unmapped_run_is_stationary() {
        let traj = simulate_unicycle(
            &sv(&[3.0, 4.0, 0.0]),
            &BesselControllerParams::default(),
            None,
            &IntegratorConfig::fixed(1e-3, 10.0),
        )
        .unwrap();
        let v = convergence_verdict(&traj, &VerdictTolerances::default()).unwrap();
        assert_eq!(v.classification, Classification::StationaryNonconvergent);
        assert_eq!(v.displacement, 0.0);
        assert_eq!(v.final_norm, 5.0);
        assert!(!v.converged);
    }

    #[test]
    fn scalar_decay_converges() {
        let sys = SystemModel::new("theta", 1, 0, |x, _| vec![-x[0]]).unwrap();
        let p = make_givp(sys, ControlLaw::zero(1, 0), InitialConditionMap::identity()).unwrap();
        let traj = integrate(&p, &sv(&[1.0]), &IntegratorConfig::fixed(1e-3, 20.0)).unwrap();
        let v = convergence_verdict(&traj, &VerdictTolerances::default()).unwrap();
        assert_eq!(v.classification, Classification::ConvergedToOrigin);
        assert!(v.converged);
        // pure and repeatable
        assert_eq!(v, convergence_verdict(&traj, &VerdictTolerances::default()).unwrap());
    }

    #[test]
    fn origin_run_has_zero_norm() {
        let sys = SystemModel::new("zero", 3, 0, |_, _| vec![0.0; 3]).unwrap();
        let p = make_givp(sys, ControlLaw::zero(3, 0), InitialConditionMap::identity()).unwrap();
        let traj = integrate(&p, &sv(&[0.0, 0.0, 0.0]), &IntegratorConfig::fixed(0.1, 1.0)).unwrap();
        let v = convergence_verdict(&traj, &VerdictTolerances::default()).unwrap();
        assert_eq!(v.classification, Classification::ConvergedToOrigin);
        assert_eq!(v.final_norm, 0.0);
    }

    #[test]
    fn diverged_partial_is_classified() {
        let sys = SystemModel::new("growth", 1, 0, |x, _| vec![20.0 * x[0]]).unwrap();
        let p = make_givp(sys, ControlLaw::zero(1, 0), InitialConditionMap::identity()).unwrap();
        let partial = match integrate(&p, &sv(&[1.0]), &IntegratorConfig::fixed(1e-2, 5.0)) {
            Err(Error::Divergence { partial: Some(t), .. }) => *t,
            other => panic!("expected divergence, got {other:?}"),
        };
        let v = convergence_verdict(&partial, &VerdictTolerances::default()).unwrap();
        assert_eq!(v.classification, Classification::Diverged);
    }

    #[test]
    fn empty_trajectory_is_rejected() {
        let mut traj = simulate_unicycle(
            &sv(&[0.0, 0.0, 1.0]),
            &BesselControllerParams::default(),
            None,
            &IntegratorConfig::fixed(0.5, 1.0),
        )
        .unwrap();
        traj.samples.clear();
        assert!(matches!(
            convergence_verdict(&traj, &VerdictTolerances::default()),
            Err(Error::Contract(_))
        ));
    }
}
