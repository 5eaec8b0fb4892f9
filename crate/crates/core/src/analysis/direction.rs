//! Constant-direction test for a closed-loop field on a ball around a point.
//!
//! A smooth static feedback can only steer the unicycle to a point if the
//! normalized closed-loop field `g(x) / |g(x)|` is constant on some
//! neighbourhood. The check samples the ball, normalizes the field at each
//! sample and measures how far the directions spread.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::givp::{euclidean_norm, StateVector};

/// Offset into the Halton sequence; fixed so reports are reproducible.
const HALTON_SEED: u64 = 1009;
const MAX_WITNESSES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionCheckConfig {
    pub radius: f64,
    /// Low-discrepancy samples in the ball; the `2n` axis points
    /// `center +- radius * e_i` are added on top.
    pub n_samples: usize,
    pub angle_tol: f64,
    /// Samples with `|g| < norm_floor` have no direction and are skipped.
    pub norm_floor: f64,
}

impl Default for DirectionCheckConfig {
    fn default() -> Self {
        DirectionCheckConfig {
            radius: 0.5,
            n_samples: 2048,
            angle_tol: 1e-6,
            norm_floor: 1e-9,
        }
    }
}

impl DirectionCheckConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::config("direction", format!("radius must be > 0, got {}", self.radius)));
        }
        if self.n_samples < 2 {
            return Err(Error::config("direction", format!("n_samples must be >= 2, got {}", self.n_samples)));
        }
        if !(self.angle_tol.is_finite() && self.angle_tol >= 0.0) {
            return Err(Error::config("direction", format!("angle_tol must be >= 0, got {}", self.angle_tol)));
        }
        if !(self.norm_floor.is_finite() && self.norm_floor > 0.0) {
            return Err(Error::config("direction", format!("norm_floor must be > 0, got {}", self.norm_floor)));
        }
        Ok(())
    }
}

/// Pair of sampled states whose field directions are far apart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub first: StateVector,
    pub second: StateVector,
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    /// `max_angular_deviation <= angle_tol`.
    pub is_constant_direction: bool,
    /// Largest angle between any two sampled directions, in `[0, pi]`.
    pub max_angular_deviation: f64,
    /// Largest angle to the first included direction. The pairwise maximum
    /// lies between this and twice this.
    pub max_reference_deviation: f64,
    /// Pairwise maximum after identifying opposite directions, in `[0, pi/2]`.
    pub max_line_deviation: f64,
    pub reference_direction: Vec<f64>,
    pub witnesses: Vec<Witness>,
    pub sample_count: usize,
    pub excluded_count: usize,
    pub angle_tol: f64,
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().take_while(|p| *p * *p <= candidate).all(|p| candidate % p != 0) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut scale = inv;
    let mut out = 0.0;
    while index > 0 {
        out += (index % base) as f64 * scale;
        index /= base;
        scale *= inv;
    }
    out
}

/// Deterministic sample set of the closed ball `B(center, radius)`: a
/// Halton point set pushed from the cube onto the ball by radial rescaling
/// `p * |p|_inf / |p|_2`, followed by the `2n` axis points.
pub fn halton_ball_samples(center: &[f64], radius: f64, n_samples: usize) -> Vec<Vec<f64>> {
    let dim = center.len();
    let bases = first_primes(dim);
    let mut out = Vec::with_capacity(n_samples + 2 * dim);
    for k in 0..n_samples as u64 {
        let cube: Vec<f64> = bases
            .iter()
            .map(|b| 2.0 * radical_inverse(HALTON_SEED + k, *b) - 1.0)
            .collect();
        let l2 = euclidean_norm(&cube);
        let linf = cube.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let scale = if l2 > 0.0 { radius * linf / l2 } else { 0.0 };
        out.push(center.iter().zip(&cube).map(|(c, p)| c + scale * p).collect());
    }
    for axis in 0..dim {
        for sign in [1.0, -1.0] {
            let mut p = center.to_vec();
            p[axis] += sign * radius;
            out.push(p);
        }
    }
    out
}

/// Angle between unit vectors via `atan2(|a ^ b|, a . b)`, accurate near 0
/// and near `pi`.
fn angle_between(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let mut wedge_sq = 0.0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            let w = a[i] * b[j] - a[j] * b[i];
            wedge_sq += w * w;
        }
    }
    wedge_sq.sqrt().atan2(dot)
}

/// Samples `field` over the ball and reports how much its direction varies.
///
/// Fails with [`Error::Indeterminate`] when the field is below `norm_floor`
/// at every sample, in which case the condition is vacuous.
pub fn constant_direction_check<F>(field: F, center: &StateVector, cfg: &DirectionCheckConfig) -> Result<DirectionReport>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    cfg.validate()?;
    let points = halton_ball_samples(center, cfg.radius, cfg.n_samples);
    let sample_count = points.len();

    let mut states = Vec::new();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for p in points {
        let g = field(&p);
        if g.len() != p.len() {
            return Err(Error::contract(format!(
                "field returned {} entries for a {}-dimensional state",
                g.len(),
                p.len()
            )));
        }
        let norm = euclidean_norm(&g);
        if !norm.is_finite() {
            return Err(Error::contract("field is not finite on the sample ball"));
        }
        if norm < cfg.norm_floor {
            continue;
        }
        dirs.push(g.iter().map(|v| v / norm).collect());
        states.push(p);
    }
    let excluded_count = sample_count - dirs.len();
    if dirs.is_empty() {
        return Err(Error::Indeterminate(format!(
            "field norm is below {:e} at all {sample_count} samples",
            cfg.norm_floor
        )));
    }

    let reference = &dirs[0];
    let max_reference_deviation = dirs
        .iter()
        .map(|d| angle_between(reference, d))
        .fold(0.0f64, f64::max);

    let mut max_dev = 0.0f64;
    let mut max_line = 0.0f64;
    // (angle, i, j), sorted by descending angle
    let mut top: Vec<(f64, usize, usize)> = Vec::with_capacity(MAX_WITNESSES + 1);
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let angle = angle_between(&dirs[i], &dirs[j]);
            max_dev = max_dev.max(angle);
            max_line = max_line.max(angle.min(PI - angle));
            if angle > 0.0 && (top.len() < MAX_WITNESSES || angle > top[top.len() - 1].0) {
                let pos = top.iter().position(|w| angle > w.0).unwrap_or(top.len());
                top.insert(pos, (angle, i, j));
                top.truncate(MAX_WITNESSES);
            }
        }
    }
    debug_assert!(max_dev <= (2.0 * max_reference_deviation).min(PI) + 1e-12);

    let witnesses = top
        .into_iter()
        .map(|(angle, i, j)| {
            Ok(Witness {
                first: StateVector::from_slice(&states[i])?,
                second: StateVector::from_slice(&states[j])?,
                angle,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(DirectionReport {
        is_constant_direction: max_dev <= cfg.angle_tol,
        max_angular_deviation: max_dev,
        max_reference_deviation,
        max_line_deviation: max_line,
        reference_direction: dirs[0].clone(),
        witnesses,
        sample_count,
        excluded_count,
        angle_tol: cfg.angle_tol,
    })
}
