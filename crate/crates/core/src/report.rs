//! Text and CSV output. Every number in a CSV is written with 9 significant
//! digits in scientific notation so reruns diff cleanly.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ga::GenerationRecord;
use crate::supervisor::Sample;

/// 9 significant digits, e.g. `1.23456789e-3`.
pub fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// `# line` for every header entry.
pub fn comment_block(header: &[String]) -> String {
    header.iter().map(|l| format!("# {l}\n")).collect()
}

pub fn trace_csv(trace: &[Sample], header: &[String]) -> String {
    let mut out = comment_block(header);
    out.push_str("t_s,p_m,v_mps,theta_rad,omega_radps,voltage_V,controller,in_limits\n");
    for s in trace {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            sig9(s.t),
            sig9(s.state.p),
            sig9(s.state.v),
            sig9(s.state.theta),
            sig9(s.state.omega),
            sig9(s.voltage),
            s.controller.label(),
            u8::from(s.in_limits)
        )
        .unwrap();
    }
    out
}

pub fn history_csv(history: &[GenerationRecord], header: &[String]) -> String {
    let mut out = comment_block(header);
    out.push_str("generation,best_fitness,mean_fitness,switch_count,elapsed_s\n");
    for r in history {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.generation,
            sig9(r.best_fitness),
            sig9(r.mean_fitness),
            r.switch_count,
            sig9(r.elapsed_s)
        )
        .unwrap();
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub pw_cm: f64,
    pub aw_deg: f64,
    pub cart_rms_cm: f64,
    pub angle_rms_deg: f64,
    pub reduction_p_pct: f64,
    pub reduction_a_pct: f64,
}

pub fn sweep_csv(rows: &[SweepRow], header: &[String]) -> String {
    let mut out = comment_block(header);
    out.push_str("Pw_cm,Aw_deg,cart_rms_cm,angle_rms_deg,reduction_p_pct,reduction_a_pct\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sig9(r.pw_cm),
            sig9(r.aw_deg),
            sig9(r.cart_rms_cm),
            sig9(r.angle_rms_deg),
            sig9(r.reduction_p_pct),
            sig9(r.reduction_a_pct)
        )
        .unwrap();
    }
    out
}

/// Reads back the numeric columns of a sweep CSV.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    text.lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .skip(1)
        .map(|line| {
            let v: Vec<f64> = line
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MalformedTrace(format!("sweep row `{line}`: {e}")))?;
            if v.len() != 6 {
                return Err(Error::MalformedTrace(format!(
                    "sweep row `{line}` has {} columns",
                    v.len()
                )));
            }
            Ok(SweepRow {
                pw_cm: v[0],
                aw_deg: v[1],
                cart_rms_cm: v[2],
                angle_rms_deg: v[3],
                reduction_p_pct: v[4],
                reduction_a_pct: v[5],
            })
        })
        .collect()
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Percent reduction of `value` relative to `baseline`.
pub fn reduction_pct(baseline: f64, value: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (baseline - value) / baseline
    }
}
