//! CSV output of traces and error curves.

use std::fmt::Write as _;
use std::io::Write;

use twistsim_core::{ErrorCurve, SqueezingTrace};

use crate::error::{CliError, Result};

pub const TRACE_HEADER: &str = "t,xi2,jx,jy,jz";
pub const ERROR_HEADER: &str = "t,rel_error";

/// Fixed-point rendering with 12 significant digits; scientific notation
/// outside `[1e-5, 1e12)`.
pub fn format_sig12(v: f64) -> String {
    if v == 0.0 {
        return "0.00000000000".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    // exponent after rounding to 12 digits
    let sci = format!("{v:.11e}");
    let exp: i32 = sci[sci.find('e').map_or(0, |i| i + 1)..].parse().unwrap_or(0);
    if !(-5..12).contains(&exp) {
        return sci;
    }
    let decimals = (11 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}

fn row(out: &mut String, cells: &[f64]) {
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format_sig12(*c));
    }
    out.push('\n');
}

pub fn trace_csv(trace: &SqueezingTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.samples.len() + 1));
    let _ = writeln!(out, "{TRACE_HEADER}");
    for s in &trace.samples {
        let [x, y, z] = s.mean_spin;
        row(&mut out, &[s.t, s.xi2, x, y, z]);
    }
    out
}

pub fn error_csv(curve: &ErrorCurve) -> String {
    let mut out = String::with_capacity(32 * (curve.points.len() + 1));
    let _ = writeln!(out, "{ERROR_HEADER}");
    for (t, e) in &curve.points {
        row(&mut out, &[*t, *e]);
    }
    out
}

/// Write `trace` as CSV to `dest`.
pub fn emit_trace_csv(trace: &SqueezingTrace, dest: &mut impl Write) -> std::io::Result<()> {
    dest.write_all(trace_csv(trace).as_bytes())
}

/// One parsed CSV row: `t, xi2, ⟨J⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub xi2: f64,
    pub mean_spin: [f64; 3],
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(TRACE_HEADER) => {}
        other => {
            return Err(CliError::Validation(format!(
                "expected header '{TRACE_HEADER}', got {other:?}"
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells = line
                .split(',')
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| CliError::Validation(format!("line {}: {e}", i + 2)))?;
            match cells[..] {
                [t, xi2, x, y, z] => Ok(TraceRow {
                    t,
                    xi2,
                    mean_spin: [x, y, z],
                }),
                _ => Err(CliError::Validation(format!(
                    "line {}: expected 5 fields, got {}",
                    i + 2,
                    cells.len()
                ))),
            }
        })
        .collect()
}
