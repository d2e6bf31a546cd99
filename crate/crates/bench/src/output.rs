//! Report files: JSON, CSV summaries and plot data.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use nalgebra::DVector;

use crate::runner::{ExperimentReport, RunOutput, TrialRecord};

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn write_report_json(report: &ExperimentReport, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

pub const SUMMARY_HEADER: [&str; 6] = ["trial", "success", "rel_error", "restarts", "swaps", "baseline_error"];

pub fn write_summary_csv(records: &[TrialRecord], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for r in records {
        w.write_record([
            r.trial.to_string(),
            r.success.to_string(),
            fmt_f64(r.rel_error),
            r.restarts.to_string(),
            r.swaps.to_string(),
            fmt_opt(r.baseline_error.map(fmt_f64)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum_csv(sigma: &[f64], path: &Path) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "sigma"])?;
    for (i, s) in sigma.iter().enumerate() {
        w.write_record([(i + 1).to_string(), fmt_f64(*s)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns of equal length under a header.
pub fn write_columns_csv(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    let rows = columns.first().map_or(0, |c| c.len());
    for r in 0..rows {
        w.write_record(columns.iter().map(|c| fmt_f64(c[r])))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `report.json`, `summary.csv`, `spectrum.csv` and
/// `plotdata/trial_NNNN.csv`; returns the paths written.
pub fn emit_outputs(run: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let plot_dir = dir.join("plotdata");
    fs::create_dir_all(&plot_dir).with_context(|| format!("creating {}", plot_dir.display()))?;
    let mut written = Vec::new();

    let p = dir.join("report.json");
    write_report_json(&run.report, &p)?;
    written.push(p);

    let p = dir.join("summary.csv");
    write_summary_csv(&run.report.records, &p)?;
    written.push(p);

    let p = dir.join("spectrum.csv");
    write_spectrum_csv(&run.sigma, &p)?;
    written.push(p);

    for s in &run.signals {
        let p = plot_dir.join(format!("trial_{:04}.csv", s.trial));
        let nan = DVector::from_element(s.f.len(), f64::NAN);
        let baseline = s.baseline.as_ref().unwrap_or(&nan);
        write_columns_csv(
            &p,
            &["grid", "f", "f1_true", "f1_est", "baseline_est"],
            &[&run.grid, s.f.as_slice(), s.truth.as_slice(), s.estimate.as_slice(), baseline.as_slice()],
        )?;
        written.push(p);
    }
    Ok(written)
}
