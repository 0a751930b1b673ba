use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde_json::json;

use super::montecarlo::ConvergenceReport;
use crate::error::{Error, Result};
use crate::flowfield::write_field_csv;
use crate::kernels::KernelKind;

pub const CONVERGENCE_HEADER: &str = "trial,cycle,kernel,normalized_error";

/// Rows ordered by trial, then cycle (1-based), then kernel kind.
pub fn write_convergence_csv<W: Write>(mut out: W, report: &ConvergenceReport) -> std::io::Result<()> {
    writeln!(out, "{CONVERGENCE_HEADER}")?;
    for t in report.completed() {
        let cycles = t.errors.values().map(Vec::len).max().unwrap_or(0);
        for c in 0..cycles {
            for kind in &report.kinds {
                if let Some(e) = t.errors.get(kind).and_then(|v| v.get(c)) {
                    writeln!(out, "{},{},{},{}", t.trial, c + 1, kind, e)?;
                }
            }
        }
    }
    Ok(())
}

/// Error matrix per kernel kind: trial index → errors by cycle.
pub type ErrorMatrix = BTreeMap<KernelKind, BTreeMap<usize, Vec<f64>>>;

pub fn parse_convergence_csv(text: &str) -> Result<ErrorMatrix> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CONVERGENCE_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected header `{CONVERGENCE_HEADER}`"),
            })
        }
    }
    let mut out = ErrorMatrix::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |msg: &str| Error::Parse {
            line: i + 1,
            msg: msg.to_string(),
        };
        let cols: Vec<&str> = line.split(',').collect();
        let [trial, cycle, kind, err] = cols.as_slice() else {
            return Err(bad("expected 4 columns"));
        };
        let trial: usize = trial.parse().map_err(|_| bad("bad trial"))?;
        let cycle: usize = cycle.parse().map_err(|_| bad("bad cycle"))?;
        let kind: KernelKind = kind.parse().map_err(|_| bad("bad kernel"))?;
        let err: f64 = err.parse().map_err(|_| bad("bad error value"))?;
        let row = out.entry(kind).or_default().entry(trial).or_default();
        if cycle != row.len() + 1 {
            return Err(bad("cycles out of order"));
        }
        row.push(err);
    }
    Ok(out)
}

/// Writes `convergence.csv`, `summary.json` and, when the report carries
/// them, per-trial field CSVs under `fields/`.
pub fn emit_report(report: &ConvergenceReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let csv_path = dir.join("convergence.csv");
    write_file(&csv_path, |w| write_convergence_csv(w, report))?;

    let mut kernels = serde_json::Map::new();
    for &kind in &report.kinds {
        kernels.insert(kind.to_string(), serde_json::to_value(report.summary(kind))?);
    }
    let failures: Vec<_> = report
        .trials
        .iter()
        .filter(|t| t.status != super::montecarlo::TrialStatus::Completed)
        .map(|t| json!({ "trial": t.trial, "seed": t.seed, "outcome": t.status }))
        .collect();
    let summary = json!({
        "trials": report.trials.len(),
        "completed": report.completed().count(),
        "aborted": report.aborted(),
        "degenerate_truth": report.degenerate(),
        "interval_quantiles": [super::montecarlo::INTERVAL_QUANTILES.0, super::montecarlo::INTERVAL_QUANTILES.1],
        "kernels": kernels,
        "failures": failures,
    });
    let summary_path = dir.join("summary.json");
    write_file(&summary_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        w.write_all(b"\n")
    })?;

    let with_fields: Vec<_> = report.trials.iter().filter(|t| !t.final_fields.is_empty()).collect();
    if !with_fields.is_empty() {
        let fdir = dir.join("fields");
        fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
        for t in with_fields {
            if let Some(truth) = &t.truth_field {
                let p = fdir.join(format!("trial_{:03}_truth.csv", t.trial));
                write_file(&p, |w| write_field_csv(w, &report.grid_points, truth))?;
            }
            for (kind, vals) in &t.final_fields {
                let p = fdir.join(format!("trial_{:03}_{kind}.csv", t.trial));
                write_file(&p, |w| write_field_csv(w, &report.grid_points, vals))?;
            }
        }
    }
    Ok(())
}

pub(crate) fn write_file<F>(path: &Path, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    body(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
