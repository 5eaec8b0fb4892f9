//! Kinematic unicycle, the smooth Bessel-series feedback and the heading
//! remap that sends `theta0 = 0` to `2*pi`.
//!
//! State layout is `(x, y, theta)` in meters and radians; input layout is
//! `(u1, u2)`: forward speed and turn rate.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::givp::{
    make_givp, ClosedLoopProblem, ControlInput, ControlLaw, InitialConditionMap, StateVector,
    SystemModel, Trajectory,
};
use crate::integrate::{integrate, IntegratorConfig};
use crate::special_fn::{bessel_j, BesselOrder};

pub const STATE_DIM: usize = 3;
pub const INPUT_DIM: usize = 2;
const THETA: usize = 2;

/// Default ceiling on the number of series terms.
pub const DEFAULT_MAX_TERMS: usize = 64;

/// Parameters of `u1 = sum_i (2i+1) a C_i J_i(theta) theta^(i+1)`,
/// `u2 = a theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BesselControllerParams {
    pub gain: f64,
    /// `C_1 .. C_N`; the series length `N` is `coefficients.len()`.
    pub coefficients: Vec<f64>,
}

impl Default for BesselControllerParams {
    fn default() -> Self {
        BesselControllerParams {
            gain: -1.0,
            coefficients: vec![1.0; 5],
        }
    }
}

impl BesselControllerParams {
    pub fn new(gain: f64, coefficients: Vec<f64>) -> Result<Self> {
        let p = BesselControllerParams { gain, coefficients };
        p.validate()?;
        Ok(p)
    }

    /// `N` terms with every `C_i` equal to `c`.
    pub fn uniform(terms: usize, gain: f64, c: f64) -> Result<Self> {
        Self::new(gain, vec![c; terms])
    }

    pub fn terms(&self) -> usize {
        self.coefficients.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_with_ceiling(DEFAULT_MAX_TERMS)
    }

    pub fn validate_with_ceiling(&self, max_terms: usize) -> Result<()> {
        if !(self.gain.is_finite() && self.gain < 0.0) {
            return Err(Error::config("controller", format!("gain a must be finite and < 0, got {}", self.gain)));
        }
        let n = self.coefficients.len();
        if n == 0 || n > max_terms {
            return Err(Error::config(
                "controller",
                format!("number of terms must lie in 1..={max_terms}, got {n}"),
            ));
        }
        if let Some(i) = self.coefficients.iter().position(|c| !c.is_finite()) {
            return Err(Error::config("controller", format!("coefficient C_{} is not finite", i + 1)));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        let cs: Vec<String> = self.coefficients.iter().map(|c| c.to_string()).collect();
        format!("bessel(N={}, a={}, C=[{}])", self.terms(), self.gain, cs.join(", "))
    }
}

/// Case split of the heading remap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaRemapParams {
    /// `|theta0| < zero_tol` counts as `theta0 = 0`.
    pub zero_tol: f64,
}

impl ThetaRemapParams {
    /// Value added to a zero heading.
    pub const WRAP: f64 = TAU;

    pub fn new(zero_tol: f64) -> Result<Self> {
        let p = ThetaRemapParams { zero_tol };
        p.validate()?;
        Ok(p)
    }

    /// `zero_tol` must stay below `pi` or the remap stops being idempotent.
    pub fn validate(&self) -> Result<()> {
        if !(self.zero_tol.is_finite() && self.zero_tol > 0.0 && self.zero_tol < std::f64::consts::PI) {
            return Err(Error::config(
                "remap",
                format!("zero_tol must lie in (0, pi), got {}", self.zero_tol),
            ));
        }
        Ok(())
    }
}

impl Default for ThetaRemapParams {
    fn default() -> Self {
        ThetaRemapParams { zero_tol: 1e-12 }
    }
}

fn field_raw(x: &[f64], u: &[f64]) -> Vec<f64> {
    let (s, c) = x[THETA].sin_cos();
    vec![c * u[0], s * u[0], u[1]]
}

/// `(cos(theta) u1, sin(theta) u1, u2)`.
pub fn unicycle_field(state: &StateVector, u: &ControlInput) -> Result<StateVector> {
    if state.dimension() != STATE_DIM || u.dimension() != INPUT_DIM {
        return Err(Error::contract(format!(
            "unicycle_field expects a 3-state and 2 inputs, got {} and {}",
            state.dimension(),
            u.dimension()
        )));
    }
    StateVector::new(field_raw(state, u))
}

fn controller_raw(theta: f64, params: &BesselControllerParams) -> [f64; 2] {
    let a = params.gain;
    let mut u1 = 0.0;
    let mut power = theta; // theta^(i+1), starting at i = 1 below
    for (idx, c) in params.coefficients.iter().enumerate() {
        let i = idx + 1;
        power *= theta;
        // Finite theta always gives a finite J_i.
        let ji = bessel_j(BesselOrder(i as u32), theta).unwrap_or(0.0);
        u1 += (2 * i + 1) as f64 * a * c * ji * power;
    }
    [u1, a * theta]
}

/// The smooth feedback `(u1, u2)` as a function of the heading only.
pub fn bessel_controller(theta: f64, params: &BesselControllerParams) -> Result<ControlInput> {
    if !theta.is_finite() {
        return Err(Error::contract(format!("bessel_controller: theta {theta} is not finite")));
    }
    params.validate()?;
    ControlInput::new(controller_raw(theta, params).to_vec())
}

/// Indicator of a zero heading: 1 if `|theta0| < zero_tol`, else 0.
pub fn beta(theta0: f64, zero_tol: f64) -> u8 {
    u8::from(theta0.abs() < zero_tol)
}

fn remap_raw(x: &[f64], zero_tol: f64) -> Vec<f64> {
    let theta0 = x[THETA];
    let theta = if beta(theta0, zero_tol) == 1 {
        theta0 + ThetaRemapParams::WRAP
    } else {
        theta0
    };
    vec![x[0], x[1], theta]
}

/// `theta(0) = theta0 + 2 pi beta(theta0)`, position untouched.
pub fn theta_ic_map(state: &StateVector, params: &ThetaRemapParams) -> Result<StateVector> {
    if state.dimension() != STATE_DIM {
        return Err(Error::contract(format!(
            "theta_ic_map expects a 3-state, got dimension {}",
            state.dimension()
        )));
    }
    StateVector::new(remap_raw(state, params.zero_tol))
}

pub fn unicycle_system() -> SystemModel {
    SystemModel::new("unicycle", STATE_DIM, INPUT_DIM, field_raw).expect("fixed positive dimension")
}

pub fn bessel_control_law(params: &BesselControllerParams) -> Result<ControlLaw> {
    params.validate()?;
    let p = params.clone();
    Ok(ControlLaw::new(params.label(), STATE_DIM, INPUT_DIM, move |x| {
        controller_raw(x[THETA], &p).to_vec()
    }))
}

pub fn theta_remap(params: &ThetaRemapParams) -> Result<InitialConditionMap> {
    params.validate()?;
    let tol = params.zero_tol;
    Ok(InitialConditionMap::new(
        format!("theta_remap(zero_tol={tol:e})"),
        Some(STATE_DIM),
        move |x| remap_raw(x, tol),
    ))
}

/// Unicycle + Bessel controller, remapped when `remap` is given.
pub fn unicycle_problem(ctrl: &BesselControllerParams, remap: Option<&ThetaRemapParams>) -> Result<ClosedLoopProblem> {
    let ic_map = match remap {
        Some(r) => theta_remap(r)?,
        None => InitialConditionMap::identity(),
    };
    make_givp(unicycle_system(), bessel_control_law(ctrl)?, ic_map)
}

pub fn simulate_unicycle(
    x0: &StateVector,
    ctrl: &BesselControllerParams,
    remap: Option<&ThetaRemapParams>,
    integ: &IntegratorConfig,
) -> Result<Trajectory> {
    let problem = unicycle_problem(ctrl, remap)?;
    integrate(&problem, x0, integ)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::givp::apply_ic_map;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn sv(v: &[f64]) -> StateVector {
        StateVector::from_slice(v).unwrap()
    }

    fn u(a: f64, b: f64) -> ControlInput {
        ControlInput::new(vec![a, b]).unwrap()
    }

    #[test]
    fn field_examples() {
        assert_eq!(unicycle_field(&sv(&[0.0, 0.0, 0.0]), &u(1.0, 0.0)).unwrap().as_slice(), &[1.0, 0.0, 0.0]);
        let f = unicycle_field(&sv(&[5.0, 1.0, FRAC_PI_2]), &u(2.0, 0.0)).unwrap();
        assert!(f[0].abs() <= 1e-15 && (f[1] - 2.0).abs() <= 1e-15 && f[2] == 0.0);
        for theta in [-3.0, 0.0, 0.7, 12.0] {
            assert_eq!(unicycle_field(&sv(&[1.0, 1.0, theta]), &u(0.0, 1.0)).unwrap().as_slice(), &[0.0, 0.0, 1.0]);
        }
        assert!(unicycle_field(&sv(&[0.0, 0.0]), &u(1.0, 0.0)).is_err());
        let three = ControlInput::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(unicycle_field(&sv(&[0.0, 0.0, 0.0]), &three).is_err());
    }

    #[test]
    fn controller_vanishes_at_zero_heading() {
        let p = BesselControllerParams::uniform(7, -2.5, 3.0).unwrap();
        assert_eq!(bessel_controller(0.0, &p).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn single_term_controller() {
        let p = BesselControllerParams::uniform(1, -1.0, 1.0).unwrap();
        let out = bessel_controller(1.0, &p).unwrap();
        // -3 * J_1(1), J_1(1) from the rational series oracle.
        let j1 = crate::special_fn::bessel_j_oracle(BesselOrder(1), 1.0, 60).unwrap();
        assert!((out[0] + 3.0 * j1).abs() < 1e-15);
        assert_eq!(out[1], -1.0);
    }

    #[test]
    fn zero_coefficients_kill_forward_speed() {
        let p = BesselControllerParams::new(-1.0, vec![0.0, 0.0]).unwrap();
        let out = bessel_controller(TAU, &p).unwrap();
        assert_eq!(out[0], 0.0);
        assert_eq!(out[1], -TAU);
    }

    #[test]
    fn params_validation() {
        assert!(BesselControllerParams::new(0.0, vec![1.0]).is_err());
        assert!(BesselControllerParams::new(1.0, vec![1.0]).is_err());
        assert!(BesselControllerParams::new(-1.0, vec![]).is_err());
        assert!(BesselControllerParams::new(-1.0, vec![f64::NAN]).is_err());
        assert!(BesselControllerParams::uniform(65, -1.0, 1.0).is_err());
        let long = BesselControllerParams {
            gain: -1.0,
            coefficients: vec![1.0; 65],
        };
        assert!(long.validate_with_ceiling(100).is_ok());
        assert!(ThetaRemapParams::new(0.0).is_err());
        assert!(ThetaRemapParams::new(4.0).is_err());
        assert!(bessel_controller(f64::NAN, &BesselControllerParams::default()).is_err());
    }

    #[test]
    fn beta_indicator() {
        assert_eq!(beta(0.0, 1e-12), 1);
        assert_eq!(beta(-0.0, 1e-12), 1);
        assert_eq!(beta(1.0, 1e-12), 0);
        assert_eq!(beta(-3.7, 1e-12), 0);
    }

    #[test]
    fn remap_examples() {
        let p = ThetaRemapParams::default();
        assert_eq!(theta_ic_map(&sv(&[3.0, 4.0, 0.0]), &p).unwrap().as_slice(), &[3.0, 4.0, TAU]);
        assert_eq!(theta_ic_map(&sv(&[3.0, 4.0, 0.5]), &p).unwrap().as_slice(), &[3.0, 4.0, 0.5]);
        let once = theta_ic_map(&sv(&[0.0, 0.0, 0.0]), &p).unwrap();
        assert_eq!(theta_ic_map(&once, &p).unwrap().as_slice(), &[0.0, 0.0, TAU]);
        assert!(theta_ic_map(&sv(&[0.0, 0.0]), &p).is_err());
    }

    #[test]
    fn remap_through_givp_map() {
        let m = theta_remap(&ThetaRemapParams::default()).unwrap();
        assert_eq!(apply_ic_map(&m, &sv(&[3.0, 4.0, 0.0])).unwrap().as_slice(), &[3.0, 4.0, TAU]);
        assert_eq!(apply_ic_map(&m, &sv(&[3.0, 4.0, 1.5])).unwrap().as_slice(), &[3.0, 4.0, 1.5]);
    }

    #[test]
    fn unmapped_zero_heading_is_stationary() {
        let cfg = IntegratorConfig::fixed(1e-3, 10.0);
        let traj = simulate_unicycle(&sv(&[3.0, 4.0, 0.0]), &BesselControllerParams::default(), None, &cfg).unwrap();
        assert!(traj.samples.iter().all(|s| s.state.as_slice() == [3.0, 4.0, 0.0]));
        assert!(traj.samples.iter().all(|s| s.input.as_slice() == [0.0, 0.0]));
    }

    #[test]
    fn remapped_zero_heading_moves_and_decays() {
        let cfg = IntegratorConfig::fixed(1e-3, 10.0);
        let remap = ThetaRemapParams::default();
        let traj =
            simulate_unicycle(&sv(&[3.0, 4.0, 0.0]), &BesselControllerParams::default(), Some(&remap), &cfg).unwrap();
        assert_eq!(traj.first().unwrap().state[2], TAU);
        let last = traj.last().unwrap();
        assert!((last.state[2] - TAU * (-10.0f64).exp()).abs() <= 1e-8);
        let d = (last.state[0] - 3.0).hypot(last.state[1] - 4.0);
        assert!(d > 1e-3, "displacement {d}");
    }

    #[test]
    fn heading_follows_exponential_from_one() {
        let cfg = IntegratorConfig::fixed(1e-3, 5.0);
        let traj = simulate_unicycle(
            &sv(&[0.0, 0.0, 1.0]),
            &BesselControllerParams::default(),
            Some(&ThetaRemapParams::default()),
            &cfg,
        )
        .unwrap();
        for s in &traj.samples {
            assert!((s.state[2] - (-s.t).exp()).abs() <= 1e-8);
        }
    }

    #[test]
    fn controller_is_smooth_at_zero() {
        // Centered differences of u1 near 0 must settle, not blow up.
        let p = BesselControllerParams::default();
        let u1 = |t: f64| controller_raw(t, &p)[0];
        let d: Vec<f64> = [1e-2, 1e-3, 1e-4].iter().map(|h| (u1(*h) - u1(-h)) / (2.0 * h)).collect();
        assert!(d.iter().all(|v| v.is_finite() && v.abs() < 1e-3));
        assert!(d[2].abs() <= d[1].abs() && d[1].abs() <= d[0].abs());
    }

    proptest! {
        #[test]
        fn remap_is_idempotent_and_avoids_zero(x in -10.0f64..10.0, y in -10.0f64..10.0, th in prop_oneof![Just(0.0), Just(-0.0), -PI..PI, -1e-12f64..1e-12]) {
            let p = ThetaRemapParams::default();
            let once = theta_ic_map(&sv(&[x, y, th]), &p).unwrap();
            let twice = theta_ic_map(&once, &p).unwrap();
            prop_assert_eq!(&once, &twice);
            prop_assert!(once[2].abs() >= p.zero_tol);
            prop_assert_eq!(once[0], x);
            prop_assert_eq!(once[1], y);
        }

        #[test]
        fn origin_is_equilibrium(gain in -10.0f64..-1e-6, cs in proptest::collection::vec(-5.0f64..5.0, 1..12)) {
            let p = BesselControllerParams::new(gain, cs).unwrap();
            let out = bessel_controller(0.0, &p).unwrap();
            prop_assert_eq!(out.as_slice(), &[0.0, 0.0]);
        }
    }
}
