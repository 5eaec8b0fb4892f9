use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::analysis::convergence::{convergence_verdict, Classification, ConvergenceVerdict, VerdictTolerances};
use crate::error::{Error, Result};
use crate::givp::StateVector;
use crate::integrate::{integrate, IntegratorConfig};
use crate::unicycle::{unicycle_problem, BesselControllerParams, ThetaRemapParams, STATE_DIM};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub x0: StateVector,
    pub mapped_x0: StateVector,
    pub classification: Classification,
    /// Absent only when the run failed without a usable partial trajectory.
    pub verdict: Option<ConvergenceVerdict>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Every classification appears, with zero when unused.
    pub counts: BTreeMap<Classification, usize>,
}

/// Axis-aligned lattice, first axis varying slowest. An axis with a single
/// point sits at its lower bound.
pub fn lattice_grid(min: &[f64], max: &[f64], counts: &[usize]) -> Result<Vec<StateVector>> {
    if min.len() != max.len() || min.len() != counts.len() || min.is_empty() {
        return Err(Error::config(
            "lattice",
            format!(
                "min, max and counts must have the same non-zero length, got {}, {}, {}",
                min.len(),
                max.len(),
                counts.len()
            ),
        ));
    }
    if counts.contains(&0) {
        return Ok(Vec::new());
    }
    let axes: Vec<Vec<f64>> = min
        .iter()
        .zip(max)
        .zip(counts)
        .map(|((lo, hi), &n)| {
            if n == 1 {
                vec![*lo]
            } else {
                (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
            }
        })
        .collect();
    let total: usize = counts.iter().product();
    let mut grid = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut coords = vec![0.0; axes.len()];
        for (axis, values) in axes.iter().enumerate().rev() {
            coords[axis] = values[rem % values.len()];
            rem /= values.len();
        }
        grid.push(StateVector::new(coords)?);
    }
    Ok(grid)
}

fn run_row(
    index: usize,
    x0: &StateVector,
    problem: &crate::givp::ClosedLoopProblem,
    integ: &IntegratorConfig,
    tol: &VerdictTolerances,
) -> Result<SweepRow> {
    let mapped_x0 = problem.initial_state(x0)?;
    let (verdict, error) = match integrate(problem, x0, integ) {
        Ok(traj) => (Some(convergence_verdict(&traj, tol)?), None),
        Err(e @ Error::Divergence { .. }) => {
            let verdict = match &e {
                Error::Divergence { partial: Some(p), .. } => Some(convergence_verdict(p, tol)?),
                _ => None,
            };
            (verdict, Some(e.to_string()))
        }
        Err(e @ Error::StepUnderflow { .. }) => (None, Some(e.to_string())),
        Err(e) => return Err(e),
    };
    let classification = verdict.as_ref().map_or(Classification::Diverged, |v| v.classification);
    Ok(SweepRow {
        index,
        x0: x0.clone(),
        mapped_x0,
        classification,
        verdict,
        error,
    })
}

/// Simulates the unicycle from every grid point and classifies each run.
///
/// Rows come back in grid order. Divergent runs are recorded in their row
/// and do not stop the sweep.
pub fn sweep_initial_conditions(
    grid: &[StateVector],
    ctrl: &BesselControllerParams,
    remap: Option<&ThetaRemapParams>,
    integ: &IntegratorConfig,
    tol: &VerdictTolerances,
) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::config("sweep", "empty grid"));
    }
    if let Some(bad) = grid.iter().position(|x| x.dimension() != STATE_DIM) {
        return Err(Error::config(
            "sweep",
            format!("grid point {bad} has dimension {}, expected {STATE_DIM}", grid[bad].dimension()),
        ));
    }
    integ.validate()?;
    let problem = unicycle_problem(ctrl, remap)?;
    let rows = grid
        .par_iter()
        .enumerate()
        .map(|(i, x0)| run_row(i, x0, &problem, integ, tol))
        .collect::<Result<Vec<_>>>()?;

    let mut counts: BTreeMap<Classification, usize> = Classification::ALL.iter().map(|c| (*c, 0)).collect();
    for row in &rows {
        *counts.entry(row.classification).or_default() += 1;
    }
    Ok(SweepTable { rows, counts })
}
