//! Text output formats.
//!
//! Numbers are written like C's `%.17g`: 17 significant digits, trailing
//! zeros dropped, exponent form below `1e-4` or from `1e17` up. That is
//! enough digits for every `f64` to parse back to the same value.

use std::fmt::Write as _;

use givp_core::Trajectory;

pub const TRAJECTORY_HEADER: &str = "t,x,y,theta,u1,u2";
pub const BESSEL_TABLE_HEADER: &str = "n,x,value";

const SIG_DIGITS: i32 = 17;

fn strip_fraction_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `%.17g`.
pub fn fmt_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", strip_fraction_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (SIG_DIGITS - 1 - exp) as usize;
        strip_fraction_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

/// Trajectory CSV with columns `t,x,y,theta,u1,u2`.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(64 * (traj.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let fields = std::iter::once(s.t)
            .chain(s.state.iter().copied())
            .chain(s.input.iter().copied())
            .map(fmt_g17)
            .collect::<Vec<_>>();
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}
