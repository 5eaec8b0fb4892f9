//! Subcommand drivers. Each returns the exit code on completion.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use givp_core::unicycle::unicycle_problem;
use givp_core::{
    bessel_j, constant_direction_check, convergence_verdict, simulate_unicycle, sweep_initial_conditions,
    BesselOrder, Error, IntegratorConfig, Trajectory,
};
use serde_json::{json, Value};

use crate::config::{FieldKind, RunConfig};
use crate::format::{fmt_g17, trajectory_csv, BESSEL_TABLE_HEADER};
use crate::{Failure, EXIT_CONFIG, EXIT_DIVERGED, EXIT_INDETERMINATE, EXIT_OK};

pub const DEFAULT_SIM_DIR: &str = "givp-run";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SUMMARY_FILE: &str = "summary.json";

fn io_failure(e: impl std::fmt::Display) -> Failure {
    Failure::new(EXIT_CONFIG, e.to_string())
}

/// Writes to the configured file, or to `stdout` when none is set.
fn emit(cfg: &RunConfig, stdout: &mut dyn Write, text: &str) -> Result<(), Failure> {
    match &cfg.out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {path}"))
            .map_err(Failure::from),
        None => stdout.write_all(text.as_bytes()).map_err(io_failure),
    }
}

fn integrator_json(integ: &IntegratorConfig, samples: usize) -> Value {
    json!({
        "method": integ.method.name(),
        "step": integ.step,
        "rel_tol": integ.rel_tol,
        "abs_tol": integ.abs_tol,
        "t_end": integ.t_end,
        "record_every": integ.record_every,
        "samples": samples,
    })
}

fn config_echo(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config is always serializable")
}

/// Writes `trajectory.csv` and `summary.json` into the output directory and
/// echoes the summary on stdout. A divergent run still writes the samples
/// recorded before the failure and exits with 2.
pub fn simulate(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32, Failure> {
    let x0 = cfg.initial_state()?;
    let ctrl = cfg.controller()?;
    let remap = cfg.remap_params()?;
    let integ = cfg.integrator()?;
    let tol = cfg.tolerances()?;
    let dir = PathBuf::from(cfg.out.as_deref().unwrap_or(DEFAULT_SIM_DIR));

    let started = Instant::now();
    let (traj, code, message): (Trajectory, i32, Option<String>) =
        match simulate_unicycle(&x0, &ctrl, remap.as_ref(), &integ) {
            Ok(t) => (t, EXIT_OK, None),
            Err(e @ Error::Divergence { .. }) => {
                let msg = e.to_string();
                match e {
                    Error::Divergence { partial: Some(p), .. } => (*p, EXIT_DIVERGED, Some(msg)),
                    _ => return Err(Failure::new(EXIT_DIVERGED, msg)),
                }
            }
            Err(e @ Error::StepUnderflow { .. }) => return Err(Failure::new(EXIT_DIVERGED, e.to_string())),
            Err(e) => return Err(Failure::new(EXIT_CONFIG, e.to_string())),
        };
    let wall = started.elapsed().as_secs_f64();
    let verdict = convergence_verdict(&traj, &tol).map_err(io_failure)?;

    let summary = json!({
        "config_echo": config_echo(cfg),
        "classification": verdict.classification.as_str(),
        "final_state": verdict.final_state,
        "theta_final": verdict.theta_final,
        "displacement": verdict.displacement,
        "final_norm": verdict.final_norm,
        "integrator": integrator_json(&integ, traj.len()),
        "wall_time_s": wall,
    });
    let summary_text = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";

    write_run(&dir, &trajectory_csv(&traj), &summary_text)?;
    stdout.write_all(summary_text.as_bytes()).map_err(io_failure)?;
    if let Some(m) = message {
        let _ = writeln!(stderr, "error: {m}");
    }
    Ok(code)
}

fn write_run(dir: &Path, csv: &str, summary: &str) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::from)?;
    fs::write(dir.join(TRAJECTORY_FILE), csv)
        .with_context(|| format!("writing {}", dir.join(TRAJECTORY_FILE).display()))
        .map_err(Failure::from)?;
    fs::write(dir.join(SUMMARY_FILE), summary)
        .with_context(|| format!("writing {}", dir.join(SUMMARY_FILE).display()))
        .map_err(Failure::from)?;
    Ok(())
}

/// Sweep summary JSON: `config_echo`, `integrator`, `counts`, `rows`.
pub fn sweep(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let grid = cfg.sweep_grid()?;
    if grid.is_empty() {
        return Err(Failure::new(EXIT_CONFIG, "empty grid"));
    }
    let ctrl = cfg.controller()?;
    let remap = cfg.remap_params()?;
    let integ = cfg.integrator()?;
    let tol = cfg.tolerances()?;
    let table = sweep_initial_conditions(&grid, &ctrl, remap.as_ref(), &integ, &tol)
        .map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;

    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|r| {
            let v = r.verdict.as_ref();
            json!({
                "index": r.index,
                "x0": r.x0,
                "mapped_x0": r.mapped_x0,
                "classification": r.classification.as_str(),
                "final_state": v.map(|v| v.final_state.clone()),
                "theta_final": v.map(|v| v.theta_final),
                "displacement": v.map(|v| v.displacement),
                "final_norm": v.map(|v| v.final_norm),
                "error": r.error,
            })
        })
        .collect();
    let counts: serde_json::Map<String, Value> = table
        .counts
        .iter()
        .map(|(c, n)| (c.as_str().to_string(), json!(n)))
        .collect();
    let doc = json!({
        "config_echo": config_echo(cfg),
        "integrator": integrator_json(&integ, 0),
        "counts": counts,
        "rows": rows,
    });
    emit(cfg, stdout, &(serde_json::to_string_pretty(&doc).expect("sweep serializes") + "\n"))?;
    Ok(EXIT_OK)
}

/// Prints the direction report as JSON; exit 3 when every sample had a
/// vanishing field.
pub fn check_direction(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let center = cfg.center_state()?;
    let dcfg = cfg.direction()?;
    let result = match cfg.field {
        FieldKind::Unicycle => {
            let problem = unicycle_problem(&cfg.controller()?, None).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
            constant_direction_check(|x| problem.field_at(x), &center, &dcfg)
        }
        FieldKind::DemoConstant => constant_direction_check(
            |x| {
                let mut g = vec![0.0; x.len()];
                g[0] = 1.0;
                g
            },
            &center,
            &dcfg,
        ),
        FieldKind::DemoRotation => constant_direction_check(
            |x| {
                let mut g = vec![0.0; x.len()];
                g[0] = -x[1];
                g[1] = x[0];
                g
            },
            &center,
            &dcfg,
        ),
    };
    match result {
        Ok(report) => {
            let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
            emit(cfg, stdout, &text)?;
            Ok(EXIT_OK)
        }
        Err(e @ Error::Indeterminate(_)) => Err(Failure::new(EXIT_INDETERMINATE, e.to_string())),
        Err(e) => Err(Failure::new(EXIT_CONFIG, e.to_string())),
    }
}

/// CSV `n,x,value`, orders outermost.
pub fn bessel_table(cfg: &RunConfig, stdout: &mut dyn Write) -> Result<i32, Failure> {
    let xs = cfg.table_points()?;
    let mut out = String::from(BESSEL_TABLE_HEADER);
    out.push('\n');
    for n in 0..=cfg.n_max {
        for &x in &xs {
            let v = bessel_j(BesselOrder(n), x).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
            out.push_str(&format!("{n},{},{}\n", fmt_g17(x), fmt_g17(v)));
        }
    }
    emit(cfg, stdout, &out)?;
    Ok(EXIT_OK)
}
