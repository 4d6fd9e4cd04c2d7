//! Text and CSV output.

use std::fmt::Write;

use crate::convergence::ConvergenceReport;

pub const CSV_HEADER: &str = "n,value,error,ref,ref_kind,seconds";

/// Footer entry written when every error is below the fit floor.
pub const NOT_A_FIT: &str = "not_a_fit";

/// `%g`-style formatting with `digits` significant digits and trailing
/// zeros removed.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Ladder rows followed by the `fitted_C`, `fitted_beta` and `residual`
/// footer rows. The `seconds` column stays empty unless `timing` is set.
pub fn convergence_csv(report: &ConvergenceReport, precision: usize, timing: bool) -> String {
    let f = |x: f64| format_sig(x, precision);
    let mut out = String::new();
    writeln!(out, "{CSV_HEADER}").unwrap();
    let kind = report.reference.mode.label();
    for row in &report.rows {
        let seconds = if timing { format!("{:.6}", row.seconds) } else { String::new() };
        writeln!(out, "{},{},{},{},{},{}", row.n, f(row.value), f(row.error), f(report.reference.value), kind, seconds)
            .unwrap();
    }
    let footer = |x: Option<f64>| x.map_or_else(|| NOT_A_FIT.to_string(), f);
    writeln!(out, "fitted_C,{},,,,", footer(report.fit.map(|r| r.c))).unwrap();
    writeln!(out, "fitted_beta,{},,,,", footer(report.fit.map(|r| r.beta))).unwrap();
    writeln!(out, "residual,{},,,,", footer(report.fit.map(|r| r.residual))).unwrap();
    out
}

/// Human-readable summary of a study.
pub fn convergence_summary(report: &ConvergenceReport, precision: usize) -> String {
    let f = |x: f64| format_sig(x, precision);
    let mut out = String::new();
    let r = &report.reference;
    write!(out, "reference {} = {}", r.mode.label(), f(r.value)).unwrap();
    if let Some(hw) = r.half_width {
        write!(out, " +/- {} (99%)", f(hw)).unwrap();
    }
    if let Some(seed) = r.seed {
        write!(out, " seed {seed}").unwrap();
    }
    writeln!(out).unwrap();
    match report.fit {
        Some(fit) => writeln!(out, "fit: C = {}, beta = {}, residual = {}", f(fit.c), f(fit.beta), f(fit.residual)),
        None => writeln!(out, "fit: {NOT_A_FIT} (all errors below the exact-agreement floor)"),
    }
    .unwrap();
    writeln!(out, "max e_n n^(1/8) = {}", f(report.max_scaled_error)).unwrap();
    writeln!(out, "error inversions: {}", report.inversions).unwrap();
    writeln!(out, "shape consistent with n^(-1/8): {}", report.shape_consistent).unwrap();
    if let Some(band) = &report.sanity {
        writeln!(
            out,
            "lsmc band: {} +/- {} (seed {}), tolerance {}, agrees: {}",
            f(band.lsmc.mean),
            f(band.lsmc.half_width()),
            band.lsmc.seed,
            f(band.tolerance),
            band.agrees
        )
        .unwrap();
    }
    out
}
