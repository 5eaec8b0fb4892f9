//! Explicit time stepping of autonomous closed-loop fields.
//!
//! Two methods: classical RK4 on a fixed grid `t_k = k * h`, and the
//! Dormand-Prince 5(4) pair with standard step-size control.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::givp::{
    euclidean_norm, ClosedLoopProblem, ControlInput, Sample, StateVector, Termination, Trajectory,
    TrajectoryMeta,
};

/// Any state norm above this aborts the run.
pub const DIVERGENCE_NORM: f64 = 1e12;
/// Adaptive runs fail once `h < MIN_STEP_FRACTION * t_end`.
pub const MIN_STEP_FRACTION: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Rk4Fixed,
    Rk45Adaptive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Rk4Fixed => "rk4_fixed",
            Method::Rk45Adaptive => "rk45_adaptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub method: Method,
    /// Fixed step; initial step guess in adaptive mode.
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    /// Keep every `record_every`-th step (the final state is always kept).
    pub record_every: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            method: Method::Rk4Fixed,
            step: 1e-3,
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            t_end: 10.0,
            record_every: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn fixed(step: f64, t_end: f64) -> Self {
        IntegratorConfig {
            step,
            t_end,
            ..Default::default()
        }
    }

    pub fn adaptive(rel_tol: f64, abs_tol: f64, t_end: f64) -> Self {
        IntegratorConfig {
            method: Method::Rk45Adaptive,
            rel_tol,
            abs_tol,
            t_end,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.step) {
            return Err(Error::config("integrator", format!("step must be > 0, got {}", self.step)));
        }
        if !positive(self.t_end) {
            return Err(Error::config("integrator", format!("t_end must be > 0, got {}", self.t_end)));
        }
        for (name, v) in [("rel_tol", self.rel_tol), ("abs_tol", self.abs_tol)] {
            if !(positive(v) && v < 1.0) {
                return Err(Error::config("integrator", format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if self.record_every == 0 {
            return Err(Error::config("integrator", "record_every must be positive"));
        }
        Ok(())
    }
}

fn axpy(x: &[f64], h: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + h * ki).collect()
}

fn non_finite(v: &[f64]) -> bool {
    v.iter().any(|c| !c.is_finite())
}

/// Why a single step failed, before it is turned into an [`Error`].
struct StageFailure(String);

fn eval_stage<G>(g: &G, x: &[f64], stage: usize) -> std::result::Result<Vec<f64>, StageFailure>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let k = g(x);
    if k.len() != x.len() {
        return Err(StageFailure(format!(
            "stage {stage} derivative has {} entries for a {}-dimensional state",
            k.len(),
            x.len()
        )));
    }
    if non_finite(&k) {
        return Err(StageFailure(format!("stage {stage} derivative is not finite")));
    }
    Ok(k)
}

fn rk4_raw<G>(g: &G, x: &[f64], h: f64) -> std::result::Result<Vec<f64>, StageFailure>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let k1 = eval_stage(g, x, 1)?;
    let k2 = eval_stage(g, &axpy(x, 0.5 * h, &k1), 2)?;
    let k3 = eval_stage(g, &axpy(x, 0.5 * h, &k2), 3)?;
    let k4 = eval_stage(g, &axpy(x, h, &k3), 4)?;
    Ok((0..x.len())
        .map(|i| x[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// One classical RK4 step of `x' = g(x)`. `t` only labels a divergence error.
pub fn step_rk4<G>(g: G, t: f64, x: &StateVector, h: f64) -> Result<StateVector>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::contract(format!("step_rk4: step must be > 0, got {h}")));
    }
    let next = rk4_raw(&g, x, h).map_err(|StageFailure(reason)| Error::Divergence {
        time: t,
        reason,
        last_good: x.clone(),
        partial: None,
    })?;
    if non_finite(&next) {
        return Err(Error::Divergence {
            time: t + h,
            reason: "state is not finite".into(),
            last_good: x.clone(),
            partial: None,
        });
    }
    StateVector::new(next)
}

// Dormand-Prince 5(4) tableau.
const DP_C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const DP_B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// Returns the fifth-order solution and the scaled RMS error estimate.
fn dopri_step<G>(
    g: &G,
    x: &[f64],
    h: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> std::result::Result<(Vec<f64>, f64), StageFailure>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    debug_assert_eq!(DP_C.len(), DP_A.len());
    let dim = x.len();
    let mut ks: Vec<Vec<f64>> = Vec::with_capacity(7);
    for (s, row) in DP_A.iter().enumerate() {
        let mut xs = x.to_vec();
        for (j, a) in row.iter().enumerate().take(s) {
            if *a != 0.0 {
                for i in 0..dim {
                    xs[i] += h * a * ks[j][i];
                }
            }
        }
        ks.push(eval_stage(g, &xs, s + 1)?);
    }
    let mut high = x.to_vec();
    let mut err_sq = 0.0;
    for i in 0..dim {
        let mut d5 = 0.0;
        let mut d4 = 0.0;
        for s in 0..7 {
            d5 += DP_B5[s] * ks[s][i];
            d4 += DP_B4[s] * ks[s][i];
        }
        high[i] += h * d5;
        let scale = abs_tol + rel_tol * x[i].abs().max(high[i].abs());
        let e = h * (d5 - d4) / scale;
        err_sq += e * e;
    }
    Ok((high, (err_sq / dim as f64).sqrt()))
}

struct Recorder<'a> {
    problem: &'a ClosedLoopProblem,
    samples: Vec<Sample>,
}

impl Recorder<'_> {
    fn push(&mut self, t: f64, x: &[f64]) -> Result<()> {
        let state = StateVector::from_slice(x)?;
        let input = ControlInput::new(self.problem.control_at(x))?;
        self.samples.push(Sample { t, state, input });
        Ok(())
    }
}

/// Number of fixed steps covering `[0, t_end]`; a remainder below one part
/// in 1e9 of a step is treated as rounding noise in `t_end / h`.
fn fixed_step_count(t_end: f64, h: f64) -> usize {
    let q = t_end / h;
    let r = q.round();
    if r >= 1.0 && (q - r).abs() <= 1e-9 * q.max(1.0) {
        r as usize
    } else {
        q.ceil().max(1.0) as usize
    }
}

/// Solves the GIVP: `x(0) = phi(x0_raw)`, then integrates `x' = g(x)` to
/// `config.t_end`.
///
/// On divergence the returned [`Error::Divergence`] carries the trajectory
/// recorded so far, ending at the last good state with
/// [`Termination::Diverged`].
pub fn integrate(problem: &ClosedLoopProblem, x0_raw: &StateVector, config: &IntegratorConfig) -> Result<Trajectory> {
    config.validate()?;
    let mapped = problem.initial_state(x0_raw)?;
    let meta = TrajectoryMeta {
        integrator: config.method.name().to_string(),
        step: config.step,
        rel_tol: (config.method == Method::Rk45Adaptive).then_some(config.rel_tol),
        abs_tol: (config.method == Method::Rk45Adaptive).then_some(config.abs_tol),
        t_end: config.t_end,
        system: problem.system().label().to_string(),
        control: problem.control().label().to_string(),
        ic_map: problem.ic_map().description().to_string(),
        x0_raw: x0_raw.clone(),
        x0_mapped: mapped.clone(),
    };
    let mut rec = Recorder {
        problem,
        samples: Vec::new(),
    };
    rec.push(0.0, &mapped)?;
    let g = |x: &[f64]| problem.field_at(x);

    let outcome = match config.method {
        Method::Rk4Fixed => run_fixed(&g, &mut rec, mapped.as_slice(), config),
        Method::Rk45Adaptive => run_adaptive(&g, &mut rec, mapped.as_slice(), config),
    };
    match outcome {
        Ok(()) => Ok(Trajectory {
            samples: rec.samples,
            meta,
            termination: Termination::Completed,
        }),
        Err(Failure::Diverged { time, reason, last_good }) => {
            let last_good = StateVector::from_slice(&last_good)?;
            let partial = Trajectory {
                samples: rec.samples,
                meta,
                termination: Termination::Diverged {
                    time,
                    reason: reason.clone(),
                },
            };
            Err(Error::Divergence {
                time,
                reason,
                last_good,
                partial: Some(Box::new(partial)),
            })
        }
        Err(Failure::Underflow { time, step, last_good }) => Err(Error::StepUnderflow {
            time,
            step,
            last_good: StateVector::from_slice(&last_good)?,
        }),
        Err(Failure::Other(e)) => Err(e),
    }
}

enum Failure {
    Diverged {
        time: f64,
        reason: String,
        last_good: Vec<f64>,
    },
    Underflow {
        time: f64,
        step: f64,
        last_good: Vec<f64>,
    },
    Other(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Other(e)
    }
}

fn guard(next: &[f64], t_next: f64, last_good: &[f64]) -> std::result::Result<(), Failure> {
    let reason = if non_finite(next) {
        Some("state is not finite".to_string())
    } else {
        let n = euclidean_norm(next);
        (n > DIVERGENCE_NORM).then(|| format!("state norm {n:e} exceeds {DIVERGENCE_NORM:e}"))
    };
    match reason {
        Some(reason) => Err(Failure::Diverged {
            time: t_next,
            reason,
            last_good: last_good.to_vec(),
        }),
        None => Ok(()),
    }
}

fn run_fixed<G>(g: &G, rec: &mut Recorder<'_>, x0: &[f64], cfg: &IntegratorConfig) -> std::result::Result<(), Failure>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    let h = cfg.step;
    let steps = fixed_step_count(cfg.t_end, h);
    let mut x = x0.to_vec();
    for k in 0..steps {
        let t = k as f64 * h;
        let last = k + 1 == steps;
        let t_next = if last { cfg.t_end } else { (k + 1) as f64 * h };
        let dt = if last { cfg.t_end - t } else { h };
        let next = rk4_raw(g, &x, dt).map_err(|StageFailure(reason)| Failure::Diverged {
            time: t,
            reason,
            last_good: x.clone(),
        })?;
        guard(&next, t_next, &x)?;
        x = next;
        if last || (k + 1) % cfg.record_every == 0 {
            rec.push(t_next, &x)?;
        }
    }
    Ok(())
}

fn run_adaptive<G>(g: &G, rec: &mut Recorder<'_>, x0: &[f64], cfg: &IntegratorConfig) -> std::result::Result<(), Failure>
where
    G: Fn(&[f64]) -> Vec<f64>,
{
    const SAFETY: f64 = 0.9;
    const MIN_FACTOR: f64 = 0.2;
    const MAX_FACTOR: f64 = 5.0;

    let t_end = cfg.t_end;
    let h_min = MIN_STEP_FRACTION * t_end;
    let mut h = cfg.step.min(t_end);
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut accepted = 0usize;
    while t < t_end {
        if h < h_min {
            return Err(Failure::Underflow {
                time: t,
                step: h,
                last_good: x,
            });
        }
        let last = t + h >= t_end;
        let dt = if last { t_end - t } else { h };
        let (next, err) = dopri_step(g, &x, dt, cfg.rel_tol, cfg.abs_tol).map_err(|StageFailure(reason)| {
            Failure::Diverged {
                time: t,
                reason,
                last_good: x.clone(),
            }
        })?;
        if !err.is_finite() {
            h *= MIN_FACTOR;
            continue;
        }
        if err <= 1.0 {
            let t_next = if last { t_end } else { t + dt };
            guard(&next, t_next, &x)?;
            x = next;
            t = t_next;
            accepted += 1;
            if last || accepted % cfg.record_every == 0 {
                rec.push(t, &x)?;
            }
        }
        let factor = if err == 0.0 {
            MAX_FACTOR
        } else {
            (SAFETY * err.powf(-0.2)).clamp(MIN_FACTOR, MAX_FACTOR)
        };
        h = dt * factor;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::givp::{make_givp, ControlLaw, InitialConditionMap, SystemModel};

    fn sv(v: &[f64]) -> StateVector {
        StateVector::from_slice(v).unwrap()
    }

    fn linear(a: f64) -> ClosedLoopProblem {
        let sys = SystemModel::new("linear", 1, 0, move |x, _| vec![a * x[0]]).unwrap();
        make_givp(sys, ControlLaw::zero(1, 0), InitialConditionMap::identity()).unwrap()
    }

    #[test]
    fn zero_field_step_is_identity() {
        let x = sv(&[1.0, 2.0, 3.0]);
        let next = step_rk4(|v: &[f64]| vec![0.0; v.len()], 0.0, &x, 0.1).unwrap();
        assert_eq!(next, x);
    }

    #[test]
    fn rk4_on_decay_is_degree_four_taylor() {
        // Expanding the four stages for g(x) = -x by hand gives
        // x * (1 - h + h^2/2 - h^3/6 + h^4/24).
        let h: f64 = 0.1;
        let expected = 1.0 - h + h * h / 2.0 - h.powi(3) / 6.0 + h.powi(4) / 24.0;
        let next = step_rk4(|v: &[f64]| vec![-v[0]], 0.0, &sv(&[1.0]), h).unwrap();
        assert!((next[0] - expected).abs() < 1e-15);
        assert!((next[0] - 0.904_837_5).abs() < 1e-15);
    }

    #[test]
    fn rk4_rotation_matches_exact_to_fifth_order() {
        let rot = |v: &[f64]| vec![-v[1], v[0]];
        for h in [0.1, 0.05] {
            let next = step_rk4(rot, 0.0, &sv(&[1.0, 0.0]), h).unwrap();
            let err = ((next[0] - h.cos()).powi(2) + (next[1] - h.sin()).powi(2)).sqrt();
            // Leading local error term is h^5 / 120.
            assert!(err <= h.powi(5) / 120.0 * 1.05, "h={h} err={err}");
            let radius = (next[0] * next[0] + next[1] * next[1]).sqrt();
            assert!((radius - 1.0).abs() <= h.powi(5));
        }
    }

    #[test]
    fn step_reports_non_finite_stage() {
        let err = step_rk4(|_: &[f64]| vec![f64::NAN], 2.5, &sv(&[1.0]), 0.1).unwrap_err();
        match err {
            Error::Divergence { time, last_good, .. } => {
                assert_eq!(time, 2.5);
                assert_eq!(last_good, sv(&[1.0]));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn config_validation() {
        assert!(IntegratorConfig::default().validate().is_ok());
        assert!(IntegratorConfig::fixed(0.0, 1.0).validate().is_err());
        assert!(IntegratorConfig::fixed(1e-3, -1.0).validate().is_err());
        assert!(IntegratorConfig::adaptive(1.0, 1e-12, 1.0).validate().is_err());
        let mut c = IntegratorConfig::default();
        c.record_every = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn exponential_decay_fixed_step() {
        let p = linear(-1.0);
        let theta0 = std::f64::consts::TAU;
        let traj = integrate(&p, &sv(&[theta0]), &IntegratorConfig::fixed(1e-3, 10.0)).unwrap();
        let last = traj.last().unwrap();
        assert_eq!(last.t, 10.0);
        assert!((last.state[0] - theta0 * (-10.0f64).exp()).abs() <= 1e-8);
        assert_eq!(traj.len(), 10_001);
    }

    #[test]
    fn times_are_multiples_of_step() {
        let traj = integrate(&linear(-1.0), &sv(&[1.0]), &IntegratorConfig::fixed(1e-3, 1.0)).unwrap();
        for (k, s) in traj.samples.iter().enumerate() {
            if k + 1 < traj.len() {
                assert_eq!(s.t, k as f64 * 1e-3);
            }
        }
        assert_eq!(traj.last().unwrap().t, 1.0);
    }

    #[test]
    fn ragged_end_time_lands_exactly() {
        let traj = integrate(&linear(-1.0), &sv(&[1.0]), &IntegratorConfig::fixed(0.3, 1.0)).unwrap();
        let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        assert_eq!(ts.len(), 5);
        assert_eq!(*ts.last().unwrap(), 1.0);
        assert!(ts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn record_every_thins_but_keeps_final() {
        let mut cfg = IntegratorConfig::fixed(0.1, 1.05);
        cfg.record_every = 4;
        let traj = integrate(&linear(-1.0), &sv(&[1.0]), &cfg).unwrap();
        let ts: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        assert_eq!(ts.len(), 4);
        assert_eq!(ts[0], 0.0);
        assert_eq!(*ts.last().unwrap(), 1.05);
    }

    #[test]
    fn adaptive_tracks_exponential() {
        let p = linear(-1.0);
        let cfg = IntegratorConfig::adaptive(1e-10, 1e-13, 10.0);
        let traj = integrate(&p, &sv(&[1.0]), &cfg).unwrap();
        let last = traj.last().unwrap();
        assert_eq!(last.t, 10.0);
        assert!((last.state[0] - (-10.0f64).exp()).abs() < 1e-9);
        // far fewer steps than the fixed grid
        assert!(traj.len() < 2000);
        assert!(traj.samples.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(traj.meta.integrator, "rk45_adaptive");
    }

    #[test]
    fn growth_beyond_guard_is_divergence() {
        let p = linear(10.0);
        let err = integrate(&p, &sv(&[1.0]), &IntegratorConfig::fixed(1e-2, 10.0)).unwrap_err();
        match err {
            Error::Divergence { time, last_good, partial, .. } => {
                assert!(time < 10.0);
                assert!(last_good.norm() <= DIVERGENCE_NORM);
                let partial = partial.unwrap();
                assert!(partial.diverged());
                assert_eq!(partial.last().unwrap().state, last_good);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn adaptive_underflow_is_reported() {
        // Finite-time blow-up x' = x^2 from 1 at t = 1; the controller
        // shrinks the step toward the singularity.
        let sys = SystemModel::new("blowup", 1, 0, |x, _| vec![x[0] * x[0]]).unwrap();
        let p = make_givp(sys, ControlLaw::zero(1, 0), InitialConditionMap::identity()).unwrap();
        let err = integrate(&p, &sv(&[1.0]), &IntegratorConfig::adaptive(1e-12, 1e-14, 2.0)).unwrap_err();
        assert!(
            matches!(err, Error::StepUnderflow { .. } | Error::Divergence { .. }),
            "{err:?}"
        );
    }

    #[test]
    fn fixed_step_is_deterministic() {
        let p = linear(-0.7);
        let cfg = IntegratorConfig::fixed(1e-3, 2.0);
        let a = integrate(&p, &sv(&[0.3]), &cfg).unwrap();
        let b = integrate(&p, &sv(&[0.3]), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn first_sample_is_mapped_state() {
        let sys = SystemModel::new("zero", 2, 0, |_, _| vec![0.0, 0.0]).unwrap();
        let shift = InitialConditionMap::new("clamp", Some(2), |x| vec![x[0].max(1.0), x[1]]);
        let p = make_givp(sys, ControlLaw::zero(2, 0), shift).unwrap();
        let traj = integrate(&p, &sv(&[-5.0, 2.0]), &IntegratorConfig::fixed(0.5, 2.0)).unwrap();
        assert_eq!(traj.first().unwrap().state, sv(&[1.0, 2.0]));
        assert!(traj.samples.iter().all(|s| s.state == sv(&[1.0, 2.0])));
        assert_eq!(traj.meta.x0_raw, sv(&[-5.0, 2.0]));
        assert_eq!(traj.meta.x0_mapped, sv(&[1.0, 2.0]));
    }
}
