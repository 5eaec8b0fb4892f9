//! Command-line front end for the `givp` tool.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 divergence,
//! 3 indeterminate direction check.

pub mod commands;
pub mod config;
pub mod format;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{FieldKind, Lattice, RemapMode, RunConfig};
use givp_core::Method;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_INDETERMINATE: i32 = 3;

/// Error carrying the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::new(EXIT_CONFIG, format!("{e:#}"))
    }
}

/// Comma-separated numbers given as a single flag value.
#[derive(Debug, Clone, PartialEq)]
pub struct NumList(pub Vec<f64>);

fn parse_list(s: &str) -> Result<NumList, String> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<Vec<_>, _>>()
        .map(NumList)
}

#[derive(Debug, Parser)]
#[command(
    name = "givp",
    version,
    about = "Simulate and check ODEs whose initial condition is remapped before the flow starts",
    after_help = "All angles are in radians. Exit codes: 0 ok, 1 config/usage error, 2 divergence, 3 indeterminate direction check."
)]
pub struct Cli {
    /// JSON config file; flags override its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Output location (simulate: directory; other commands: file, default stdout)
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Print the resolved configuration as JSON and exit
    #[arg(long, global = true)]
    pub dump_config: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate the closed-loop unicycle from one initial condition
    Simulate(SimulateArgs),
    /// Classify runs from a grid of initial conditions
    Sweep(SweepArgs),
    /// Test whether the closed-loop field has a constant direction on a ball
    CheckDirection(DirectionArgs),
    /// Tabulate Bessel functions J_n(x)
    BesselTable(TableArgs),
}

#[derive(Debug, Args, Default)]
pub struct ControlFlags {
    /// Remap a zero initial heading to 2*pi
    #[arg(long, value_enum)]
    pub remap: Option<RemapMode>,
    /// |theta0| below this counts as zero heading
    #[arg(long)]
    pub zero_tol: Option<f64>,
    /// Number of Bessel terms N
    #[arg(long)]
    pub terms: Option<usize>,
    /// Controller gain a (< 0)
    #[arg(long, allow_negative_numbers = true)]
    pub gain: Option<f64>,
    /// Comma-separated C_1..C_N
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub coefficients: Option<NumList>,
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// Fixed step (initial step for rk45_adaptive)
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Record every k-th step
    #[arg(long)]
    pub record_every: Option<usize>,
    /// Final-norm threshold for convergence to the origin
    #[arg(long)]
    pub eps: Option<f64>,
    /// Displacement threshold for a stationary run
    #[arg(long)]
    pub stationarity_tol: Option<f64>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    match s {
        "rk4_fixed" => Ok(Method::Rk4Fixed),
        "rk45_adaptive" => Ok(Method::Rk45Adaptive),
        other => Err(format!("unknown method '{other}' (rk4_fixed, rk45_adaptive)")),
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Initial condition x,y,theta
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub x0: Option<NumList>,
    #[command(flatten)]
    pub control: ControlFlags,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Cubic lattice MIN,MAX,COUNT applied to x, y and theta
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub lattice: Option<NumList>,
    #[command(flatten)]
    pub control: ControlFlags,
}

#[derive(Debug, Args)]
pub struct DirectionArgs {
    #[arg(long, value_enum)]
    pub field: Option<FieldKind>,
    /// Ball center, comma-separated
    #[arg(long, value_parser = parse_list, allow_hyphen_values = true)]
    pub center: Option<NumList>,
    #[arg(long, allow_negative_numbers = true)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Angle tolerance in radians
    #[arg(long, allow_negative_numbers = true)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub norm_floor: Option<f64>,
    #[command(flatten)]
    pub control: ControlFlags,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(long)]
    pub n_max: Option<u32>,
    /// Arguments x, comma-separated
    #[arg(long = "x", value_parser = parse_list, allow_hyphen_values = true)]
    pub x: Option<NumList>,
}

impl ControlFlags {
    fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    cfg.$field = v;
                }
            )*};
        }
        set!(remap, zero_tol, terms, gain, method, step, rel_tol, abs_tol, t_end, record_every, eps, stationarity_tol);
        if let Some(c) = &self.coefficients {
            cfg.coefficients = Some(c.0.clone());
        }
    }
}

fn lattice_from_flag(spec: &[f64]) -> Result<Lattice, Failure> {
    match spec {
        [lo, hi, n] if *n >= 0.0 && n.fract() == 0.0 => Ok(Lattice {
            min: vec![*lo; 3],
            max: vec![*hi; 3],
            counts: vec![*n as usize; 3],
        }),
        _ => Err(Failure::new(EXIT_CONFIG, "--lattice expects MIN,MAX,COUNT")),
    }
}

/// Resolves defaults, config file and flags into one validated config.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_path(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out = Some(out.to_string_lossy().into_owned());
    }
    match &cli.command {
        Command::Simulate(a) => {
            if let Some(x0) = &a.x0 {
                cfg.x0 = x0.0.clone();
            }
            a.control.apply(&mut cfg);
        }
        Command::Sweep(a) => {
            if let Some(spec) = &a.lattice {
                cfg.lattice = Some(lattice_from_flag(&spec.0)?);
            }
            a.control.apply(&mut cfg);
        }
        Command::CheckDirection(a) => {
            if let Some(f) = a.field {
                cfg.field = f;
            }
            if let Some(c) = &a.center {
                cfg.center = c.0.clone();
            }
            if let Some(r) = a.radius {
                cfg.radius = r;
            }
            if let Some(s) = a.samples {
                cfg.samples = s;
            }
            if let Some(t) = a.tolerance {
                cfg.angle_tol = t;
            }
            if let Some(f) = a.norm_floor {
                cfg.norm_floor = f;
            }
            a.control.apply(&mut cfg);
        }
        Command::BesselTable(a) => {
            if let Some(n) = a.n_max {
                cfg.n_max = n;
            }
            if let Some(x) = &a.x {
                cfg.x_values = x.0.clone();
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the tool and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
            let _ = if code == EXIT_OK {
                write!(stdout, "{}", e.render())
            } else {
                write!(stderr, "{}", e.render())
            };
            return code;
        }
    };
    let result = resolve_config(&cli).and_then(|cfg| {
        if cli.dump_config {
            writeln!(stdout, "{}", cfg.to_json()).map_err(|e| Failure::new(EXIT_CONFIG, e.to_string()))?;
            return Ok(EXIT_OK);
        }
        match &cli.command {
            Command::Simulate(_) => commands::simulate(&cfg, stdout, stderr),
            Command::Sweep(_) => commands::sweep(&cfg, stdout),
            Command::CheckDirection(_) => commands::check_direction(&cfg, stdout),
            Command::BesselTable(_) => commands::bessel_table(&cfg, stdout),
        }
    });
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}
