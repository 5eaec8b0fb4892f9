//! Run configuration: one flat JSON document shared by every subcommand.
//!
//! Precedence is defaults, then the `--config` file, then command-line
//! flags. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use anyhow::{bail, ensure, Context};
use givp_core::{
    BesselControllerParams, DirectionCheckConfig, IntegratorConfig, Method, StateVector, ThetaRemapParams,
    VerdictTolerances,
};
use serde::{Deserialize, Serialize};

/// Highest order accepted by `bessel-table`.
pub const MAX_TABLE_ORDER: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RemapMode {
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    /// Unicycle closed under the Bessel controller.
    Unicycle,
    /// `g(x) = (1, 0, ..., 0)`.
    DemoConstant,
    /// `g(x) = (-x_2, x_1, 0, ..., 0)`.
    DemoRotation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lattice {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    // initial condition (simulate)
    pub x0: Vec<f64>,

    // heading remap
    pub remap: RemapMode,
    pub zero_tol: f64,

    // controller
    pub terms: usize,
    pub gain: f64,
    /// `null` means `terms` coefficients equal to 1.
    pub coefficients: Option<Vec<f64>>,

    // integrator
    pub method: Method,
    pub step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub record_every: usize,

    // verdicts
    pub eps: f64,
    pub stationarity_tol: f64,

    // sweep
    pub grid: Vec<Vec<f64>>,
    pub lattice: Option<Lattice>,

    // check-direction
    pub field: FieldKind,
    pub center: Vec<f64>,
    pub radius: f64,
    pub samples: usize,
    pub angle_tol: f64,
    pub norm_floor: f64,

    // bessel-table
    pub n_max: u32,
    pub x_values: Vec<f64>,

    /// Output location; see the subcommand help for its meaning.
    pub out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let integ = IntegratorConfig::default();
        let verdict = VerdictTolerances::default();
        let dir = DirectionCheckConfig::default();
        let ctrl = BesselControllerParams::default();
        RunConfig {
            x0: vec![3.0, 4.0, 0.0],
            remap: RemapMode::On,
            zero_tol: ThetaRemapParams::default().zero_tol,
            terms: ctrl.terms(),
            gain: ctrl.gain,
            coefficients: None,
            method: integ.method,
            step: integ.step,
            rel_tol: integ.rel_tol,
            abs_tol: integ.abs_tol,
            t_end: integ.t_end,
            record_every: integ.record_every,
            eps: verdict.eps,
            stationarity_tol: verdict.stationarity_tol,
            grid: Vec::new(),
            lattice: None,
            field: FieldKind::Unicycle,
            center: vec![0.0, 0.0, 0.0],
            radius: dir.radius,
            samples: dir.n_samples,
            angle_tol: dir.angle_tol,
            norm_floor: dir.norm_floor,
            n_max: 10,
            x_values: vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0],
            out: None,
        }
    }
}

fn all_finite(name: &str, v: &[f64]) -> anyhow::Result<()> {
    if let Some(i) = v.iter().position(|c| !c.is_finite()) {
        bail!("{name}[{i}] is not finite");
    }
    Ok(())
}

impl RunConfig {
    pub fn from_path(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is always serializable")
    }

    pub fn controller(&self) -> anyhow::Result<BesselControllerParams> {
        let coefficients = match &self.coefficients {
            Some(c) => {
                ensure!(
                    c.len() == self.terms,
                    "coefficients has {} entries but terms = {}",
                    c.len(),
                    self.terms
                );
                c.clone()
            }
            None => vec![1.0; self.terms],
        };
        Ok(BesselControllerParams::new(self.gain, coefficients)?)
    }

    pub fn remap_params(&self) -> anyhow::Result<Option<ThetaRemapParams>> {
        let params = ThetaRemapParams::new(self.zero_tol)?;
        Ok(match self.remap {
            RemapMode::On => Some(params),
            RemapMode::Off => None,
        })
    }

    pub fn integrator(&self) -> anyhow::Result<IntegratorConfig> {
        let cfg = IntegratorConfig {
            method: self.method,
            step: self.step,
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            t_end: self.t_end,
            record_every: self.record_every,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn tolerances(&self) -> anyhow::Result<VerdictTolerances> {
        ensure!(self.eps.is_finite() && self.eps > 0.0, "eps must be > 0, got {}", self.eps);
        ensure!(
            self.stationarity_tol.is_finite() && self.stationarity_tol >= 0.0,
            "stationarity_tol must be >= 0, got {}",
            self.stationarity_tol
        );
        Ok(VerdictTolerances {
            eps: self.eps,
            stationarity_tol: self.stationarity_tol,
        })
    }

    pub fn initial_state(&self) -> anyhow::Result<StateVector> {
        ensure!(self.x0.len() == 3, "x0 must have 3 entries (x, y, theta), got {}", self.x0.len());
        all_finite("x0", &self.x0)?;
        Ok(StateVector::new(self.x0.clone())?)
    }

    pub fn direction(&self) -> anyhow::Result<DirectionCheckConfig> {
        let cfg = DirectionCheckConfig {
            radius: self.radius,
            n_samples: self.samples,
            angle_tol: self.angle_tol,
            norm_floor: self.norm_floor,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn center_state(&self) -> anyhow::Result<StateVector> {
        all_finite("center", &self.center)?;
        let needed = match self.field {
            FieldKind::Unicycle => Some(3),
            FieldKind::DemoConstant | FieldKind::DemoRotation => None,
        };
        if let Some(n) = needed {
            ensure!(self.center.len() == n, "center must have {n} entries for this field, got {}", self.center.len());
        }
        if self.field == FieldKind::DemoRotation {
            ensure!(self.center.len() >= 2, "demo-rotation needs a center of dimension >= 2");
        }
        Ok(StateVector::new(self.center.clone())?)
    }

    /// Explicit grid points followed by the lattice points.
    pub fn sweep_grid(&self) -> anyhow::Result<Vec<StateVector>> {
        let mut points = Vec::new();
        for (i, p) in self.grid.iter().enumerate() {
            ensure!(p.len() == 3, "grid[{i}] must have 3 entries, got {}", p.len());
            all_finite(&format!("grid[{i}]"), p)?;
            points.push(StateVector::new(p.clone())?);
        }
        if let Some(l) = &self.lattice {
            ensure!(l.min.len() == 3, "lattice bounds must have 3 entries");
            all_finite("lattice.min", &l.min)?;
            all_finite("lattice.max", &l.max)?;
            points.extend(givp_core::analysis::lattice_grid(&l.min, &l.max, &l.counts)?);
        }
        Ok(points)
    }

    pub fn table_points(&self) -> anyhow::Result<Vec<f64>> {
        ensure!(self.n_max <= MAX_TABLE_ORDER, "n_max must be <= {MAX_TABLE_ORDER}, got {}", self.n_max);
        ensure!(!self.x_values.is_empty(), "x_values must not be empty");
        all_finite("x_values", &self.x_values)?;
        Ok(self.x_values.clone())
    }

    /// Checks every field, whichever subcommand will use it.
    pub fn validate(&self) -> anyhow::Result<()> {
        self.initial_state()?;
        self.controller()?;
        self.remap_params()?;
        self.integrator()?;
        self.tolerances()?;
        self.sweep_grid()?;
        self.direction()?;
        self.center_state()?;
        self.table_points()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn round_trip_through_json() {
        let mut cfg = RunConfig::default();
        cfg.coefficients = Some(vec![0.5, -1.0, 2.0]);
        cfg.terms = 3;
        cfg.lattice = Some(Lattice {
            min: vec![-1.0; 3],
            max: vec![1.0; 3],
            counts: vec![2; 3],
        });
        cfg.t_end = 0.1 + 0.2;
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_json(r#"{"t_end": 1.0, "tend": 2.0}"#).is_err());
        assert!(RunConfig::from_json(r#"{"lattice": {"min": [0], "max": [1], "counts": [1], "step": 1}}"#).is_err());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let cfg = RunConfig::from_json(r#"{"remap": "off", "x0": [1, 2, 3]}"#).unwrap();
        assert_eq!(cfg.remap, RemapMode::Off);
        assert_eq!(cfg.x0, vec![1.0, 2.0, 3.0]);
        assert_eq!(cfg.step, 1e-3);
    }

    #[test]
    fn coefficient_length_must_match() {
        let mut cfg = RunConfig::default();
        cfg.coefficients = Some(vec![1.0; 4]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        let cases: Vec<Box<dyn Fn(&mut RunConfig)>> = vec![
            Box::new(|c| c.radius = 0.0),
            Box::new(|c| c.gain = 1.0),
            Box::new(|c| c.step = -1.0),
            Box::new(|c| c.x0 = vec![1.0, 2.0]),
            Box::new(|c| c.zero_tol = 0.0),
            Box::new(|c| c.samples = 1),
            Box::new(|c| c.center = vec![0.0; 2]),
            Box::new(|c| c.x_values.clear()),
            Box::new(|c| c.eps = 0.0),
        ];
        for (i, mutate) in cases.iter().enumerate() {
            let mut cfg = RunConfig::default();
            mutate(&mut cfg);
            assert!(cfg.validate().is_err(), "case {i} accepted");
        }
    }
}
