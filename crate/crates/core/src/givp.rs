//! Domain types shared by every module and the GIVP composition rule:
//! map the raw initial condition once with `phi`, then follow the
//! closed-loop flow `g(x) = f(x, u(x))`.

use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point of the ODE domain. Never empty, every entry finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::contract("state vector must have at least one coordinate"));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "state coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(StateVector(coords))
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        euclidean_norm(&self.0)
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        StateVector::new(v)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Vec<f64> {
        s.0
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Control values `u`. May be empty for autonomous systems.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ControlInput(Vec<f64>);

impl ControlInput {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!(
                "control input {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(ControlInput(values))
    }

    pub fn empty() -> Self {
        ControlInput(Vec::new())
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for ControlInput {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ControlInput {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ControlInput::new(v)
    }
}

impl From<ControlInput> for Vec<f64> {
    fn from(u: ControlInput) -> Vec<f64> {
        u.0
    }
}

pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|c| c * c).sum::<f64>().sqrt()
}

fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    match v.iter().position(|c| !c.is_finite()) {
        Some(i) => Err(Error::contract(format!("{what}: entry {i} is not finite ({})", v[i]))),
        None => Ok(()),
    }
}

type FieldFn = dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync;
type LawFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
type MapFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;

/// Controlled vector field `f(x, u)` of dimension `n` with `m` inputs.
#[derive(Clone)]
pub struct SystemModel {
    label: String,
    dimension: usize,
    input_dimension: usize,
    field: Arc<FieldFn>,
}

impl SystemModel {
    pub fn new<F>(label: impl Into<String>, dimension: usize, input_dimension: usize, field: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        if dimension == 0 {
            return Err(Error::config("system", "dimension must be positive"));
        }
        Ok(SystemModel {
            label: label.into(),
            dimension,
            input_dimension,
            field: Arc::new(field),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn input_dimension(&self) -> usize {
        self.input_dimension
    }

    /// Checked evaluation of `f(x, u)`.
    pub fn eval(&self, x: &StateVector, u: &ControlInput) -> Result<StateVector> {
        if x.dimension() != self.dimension {
            return Err(Error::contract(format!(
                "{}: state has dimension {}, expected {}",
                self.label,
                x.dimension(),
                self.dimension
            )));
        }
        if u.dimension() != self.input_dimension {
            return Err(Error::contract(format!(
                "{}: input has dimension {}, expected {}",
                self.label,
                u.dimension(),
                self.input_dimension
            )));
        }
        let dx = (self.field)(x, u);
        if dx.len() != self.dimension {
            return Err(Error::contract(format!(
                "{}: field returned {} entries, expected {}",
                self.label,
                dx.len(),
                self.dimension
            )));
        }
        StateVector::new(dx)
    }

    pub(crate) fn eval_raw(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        (self.field)(x, u)
    }
}

impl fmt::Debug for SystemModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemModel")
            .field("label", &self.label)
            .field("dimension", &self.dimension)
            .field("input_dimension", &self.input_dimension)
            .finish_non_exhaustive()
    }
}

/// Static state feedback `u = k(x)`.
#[derive(Clone)]
pub struct ControlLaw {
    label: String,
    state_dimension: usize,
    output_dimension: usize,
    law: Arc<LawFn>,
}

impl ControlLaw {
    pub fn new<F>(label: impl Into<String>, state_dimension: usize, output_dimension: usize, law: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        ControlLaw {
            label: label.into(),
            state_dimension,
            output_dimension,
            law: Arc::new(law),
        }
    }

    /// The law that always returns `output_dimension` zeros.
    pub fn zero(state_dimension: usize, output_dimension: usize) -> Self {
        ControlLaw::new("zero", state_dimension, output_dimension, move |_| {
            vec![0.0; output_dimension]
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn state_dimension(&self) -> usize {
        self.state_dimension
    }

    pub fn output_dimension(&self) -> usize {
        self.output_dimension
    }

    pub fn eval(&self, x: &StateVector) -> Result<ControlInput> {
        if x.dimension() != self.state_dimension {
            return Err(Error::contract(format!(
                "{}: state has dimension {}, expected {}",
                self.label,
                x.dimension(),
                self.state_dimension
            )));
        }
        ControlInput::new((self.law)(x))
    }

    pub(crate) fn eval_raw(&self, x: &[f64]) -> Vec<f64> {
        (self.law)(x)
    }
}

impl fmt::Debug for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlLaw")
            .field("label", &self.label)
            .field("state_dimension", &self.state_dimension)
            .field("output_dimension", &self.output_dimension)
            .finish_non_exhaustive()
    }
}

/// The initial-condition mapping `phi: Omega -> Omega*`.
///
/// Registered maps must be idempotent (`phi(phi(x)) == phi(x)` bit for bit);
/// the unit tests of every map in this crate check that.
#[derive(Clone)]
pub struct InitialConditionMap {
    description: String,
    /// `None` accepts states of any dimension.
    dimension: Option<usize>,
    map: Arc<MapFn>,
}

impl InitialConditionMap {
    pub fn new<F>(description: impl Into<String>, dimension: Option<usize>, map: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        InitialConditionMap {
            description: description.into(),
            dimension,
            map: Arc::new(map),
        }
    }

    /// `phi = id`, which turns the problem back into a classical IVP.
    pub fn identity() -> Self {
        InitialConditionMap::new("identity", None, |x| x.to_vec())
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn dimension(&self) -> Option<usize> {
        self.dimension
    }
}

impl fmt::Debug for InitialConditionMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InitialConditionMap")
            .field("description", &self.description)
            .field("dimension", &self.dimension)
            .finish_non_exhaustive()
    }
}

/// Returns `phi(x0)`, checking that the result stays in the domain.
pub fn apply_ic_map(map: &InitialConditionMap, x0: &StateVector) -> Result<StateVector> {
    if let Some(n) = map.dimension {
        if x0.dimension() != n {
            return Err(Error::contract(format!(
                "initial condition map '{}' expects dimension {n}, got {}",
                map.description,
                x0.dimension()
            )));
        }
    }
    check_finite("initial condition", x0)?;
    let out = (map.map)(x0);
    if out.len() != x0.dimension() {
        return Err(Error::contract(format!(
            "initial condition map '{}' changed the dimension from {} to {}",
            map.description,
            x0.dimension(),
            out.len()
        )));
    }
    check_finite("mapped initial condition", &out)?;
    StateVector::new(out)
}

/// A GIVP instance: plant, feedback and initial-condition map.
#[derive(Debug, Clone)]
pub struct ClosedLoopProblem {
    system: SystemModel,
    control: ControlLaw,
    ic_map: InitialConditionMap,
}

/// Bundles the three ingredients after checking that their dimensions agree.
pub fn make_givp(
    system: SystemModel,
    control: ControlLaw,
    ic_map: InitialConditionMap,
) -> Result<ClosedLoopProblem> {
    if control.output_dimension != system.input_dimension {
        return Err(Error::config(
            "control",
            format!(
                "'{}' produces {} inputs but system '{}' takes {}",
                control.label, control.output_dimension, system.label, system.input_dimension
            ),
        ));
    }
    if control.state_dimension != system.dimension {
        return Err(Error::config(
            "control",
            format!(
                "'{}' reads a {}-dimensional state but system '{}' has dimension {}",
                control.label, control.state_dimension, system.label, system.dimension
            ),
        ));
    }
    if let Some(n) = ic_map.dimension {
        if n != system.dimension {
            return Err(Error::config(
                "ic_map",
                format!(
                    "'{}' acts on dimension {n} but system '{}' has dimension {}",
                    ic_map.description, system.label, system.dimension
                ),
            ));
        }
    }
    Ok(ClosedLoopProblem {
        system,
        control,
        ic_map,
    })
}

impl ClosedLoopProblem {
    pub fn dimension(&self) -> usize {
        self.system.dimension
    }

    pub fn system(&self) -> &SystemModel {
        &self.system
    }

    pub fn control(&self) -> &ControlLaw {
        &self.control
    }

    pub fn ic_map(&self) -> &InitialConditionMap {
        &self.ic_map
    }

    /// `x(0) = phi(x0)`.
    pub fn initial_state(&self, x0: &StateVector) -> Result<StateVector> {
        if x0.dimension() != self.dimension() {
            return Err(Error::contract(format!(
                "initial condition has dimension {}, problem has {}",
                x0.dimension(),
                self.dimension()
            )));
        }
        apply_ic_map(&self.ic_map, x0)
    }

    /// `u(x)` without validation, for the integrator hot loop.
    pub fn control_at(&self, x: &[f64]) -> Vec<f64> {
        self.control.eval_raw(x)
    }

    /// Closed-loop autonomous field `g(x) = f(x, u(x))`.
    pub fn field_at(&self, x: &[f64]) -> Vec<f64> {
        let u = self.control.eval_raw(x);
        self.system.eval_raw(x, &u)
    }
}

/// One recorded point of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub t: f64,
    pub state: StateVector,
    pub input: ControlInput,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMeta {
    pub integrator: String,
    /// Fixed step, or the initial step of an adaptive run.
    pub step: f64,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub t_end: f64,
    pub system: String,
    pub control: String,
    pub ic_map: String,
    pub x0_raw: StateVector,
    pub x0_mapped: StateVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Diverged { time: f64, reason: String },
}

/// Time-ordered samples of one integration run.
///
/// Times start at 0 and strictly increase; the first state is `phi(x0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub meta: TrajectoryMeta,
    pub termination: Termination,
}

impl Trajectory {
    pub fn first(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn diverged(&self) -> bool {
        matches!(self.termination, Termination::Diverged { .. })
    }
}
