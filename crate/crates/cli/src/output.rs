//! CSV writers and run manifests.

use std::path::{Path, PathBuf};
use std::time::Duration;

use mtm_core::experiments::ExperimentSummary;
use mtm_core::ChainTrace;
use serde::Serialize;

use crate::error::CliResult;

/// Scientific notation with 17 significant digits; round-trips every f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub const TRACE_HEADER: [&str; 6] = ["iteration", "x1", "x2", "n_used", "alpha", "accepted"];

pub const SUMMARY_HEADER: [&str; 8] = ["scheme", "sigma", "n_tilde", "runs", "mean_tau", "tau_se", "mse", "mse_se"];

/// One row per state; row 0 is x₀ with empty n_used, alpha and accepted.
pub fn write_trace(path: &Path, trace: &ChainTrace) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACE_HEADER)?;
    let x0 = &trace.states[0];
    w.write_record([
        "0".to_string(),
        fmt_float(x0[0]),
        fmt_float(x0[1]),
        String::new(),
        String::new(),
        String::new(),
    ])?;
    for (t, (state, rec)) in trace.states[1..].iter().zip(&trace.records).enumerate() {
        w.write_record([
            (t + 1).to_string(),
            fmt_float(state[0]),
            fmt_float(state[1]),
            rec.n_used.to_string(),
            fmt_float(rec.alpha),
            rec.accepted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row per grid cell; `runs` counts completed runs.
pub fn write_summary(path: &Path, summary: &ExperimentSummary) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for c in &summary.cells {
        w.write_record([
            c.scheme.name().to_string(),
            fmt_float(c.sigma),
            c.n_tilde.to_string(),
            c.runs_completed.to_string(),
            fmt_float(c.mean_tau),
            fmt_float(c.tau_se),
            fmt_opt(c.mse),
            fmt_opt(c.mse_se),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a, C: Serialize> {
    pub command: &'a str,
    pub config: &'a C,
    pub master_seed: u64,
    pub version: &'a str,
    pub duration_seconds: f64,
    pub output: String,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn write_manifest<C: Serialize>(
    output: &Path,
    command: &str,
    config: &C,
    master_seed: u64,
    duration: Duration,
) -> CliResult<PathBuf> {
    let manifest = Manifest {
        command,
        config,
        master_seed,
        version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")),
        duration_seconds: duration.as_secs_f64(),
        output: output.display().to_string(),
    };
    let path = manifest_path(output);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n")?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, -0.753, 1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(manifest_path(Path::new("out/trace.csv")), PathBuf::from("out/trace.csv.manifest.json"));
    }
}
