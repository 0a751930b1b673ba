//! Monte Carlo convergence study over random double gyres.
//!
//! Each trial draws a field, flies the configured mission through it, and
//! runs the estimator once per kernel kind, scoring the posterior mean on
//! the evaluation grid after every cycle. Trials run on the rayon pool and
//! are reassembled in trial order, so the report depends only on the
//! configuration.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use super::metrics::normalized_error_values;
use crate::error::{Error, Result};
use crate::estimator::process_mission_with;
use crate::kernels::KernelKind;
use crate::simulator::run_mission;
use crate::vec2::Vec2;

/// Lower and upper quantiles of the reported interval (99% band).
pub const INTERVAL_QUANTILES: (f64, f64) = (0.005, 0.995);

const MISSION_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum TrialStatus {
    Completed,
    Aborted(String),
    DegenerateTruth(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub status: TrialStatus,
    /// Normalized error after each cycle, per kernel kind.
    pub errors: BTreeMap<KernelKind, Vec<f64>>,
    /// Final estimated field at the grid points (only when requested).
    pub final_fields: BTreeMap<KernelKind, Vec<Vec2>>,
    pub truth_field: Option<Vec<Vec2>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSummary {
    pub cycle: usize,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub kinds: Vec<KernelKind>,
    pub trials: Vec<TrialRecord>,
    pub grid_points: Vec<Vec2>,
}

impl ConvergenceReport {
    pub fn completed(&self) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(|t| t.status == TrialStatus::Completed)
    }

    pub fn aborted(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| matches!(t.status, TrialStatus::Aborted(_)))
            .count()
    }

    pub fn degenerate(&self) -> usize {
        self.trials
            .iter()
            .filter(|t| matches!(t.status, TrialStatus::DegenerateTruth(_)))
            .count()
    }

    /// Median and interval per cycle for `kind` across completed trials.
    pub fn summary(&self, kind: KernelKind) -> Vec<CycleSummary> {
        let rows: Vec<&Vec<f64>> = self.completed().filter_map(|t| t.errors.get(&kind)).collect();
        let cycles = rows.iter().map(|r| r.len()).max().unwrap_or(0);
        (0..cycles)
            .filter_map(|c| {
                let mut vals: Vec<f64> = rows.iter().filter_map(|r| r.get(c).copied()).collect();
                if vals.is_empty() {
                    return None;
                }
                vals.sort_by(f64::total_cmp);
                Some(CycleSummary {
                    cycle: c + 1,
                    median: quantile_sorted(&vals, 0.5),
                    lower: quantile_sorted(&vals, INTERVAL_QUANTILES.0),
                    upper: quantile_sorted(&vals, INTERVAL_QUANTILES.1),
                    trials: vals.len(),
                })
            })
            .collect()
    }

    /// Median error at 1-based `cycle`, if any trial reached it.
    pub fn median_at(&self, kind: KernelKind, cycle: usize) -> Option<f64> {
        self.summary(kind)
            .into_iter()
            .find(|s| s.cycle == cycle)
            .map(|s| s.median)
    }
}

/// Linear-interpolation quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Seed of trial `i`.
pub fn trial_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

pub fn monte_carlo(cfg: &RunConfig) -> Result<ConvergenceReport> {
    monte_carlo_kinds(cfg, &KernelKind::ALL)
}

/// As [`monte_carlo`], restricted to the given kernel kinds.
pub fn monte_carlo_kinds(cfg: &RunConfig, kinds: &[KernelKind]) -> Result<ConvergenceReport> {
    cfg.vehicle.validate()?;
    cfg.em.validate()?;
    let grid_points = cfg.grid.points();
    let trials: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial(cfg, kinds, &grid_points, i))
        .collect::<Result<_>>()?;
    Ok(ConvergenceReport {
        kinds: kinds.to_vec(),
        trials,
        grid_points,
    })
}

fn run_trial(cfg: &RunConfig, kinds: &[KernelKind], grid: &[Vec2], i: usize) -> Result<TrialRecord> {
    let seed = trial_seed(cfg.base_seed, i);
    let field = cfg.field.resolve(seed);
    let mut rec = TrialRecord {
        trial: i,
        seed,
        status: TrialStatus::Completed,
        errors: BTreeMap::new(),
        final_fields: BTreeMap::new(),
        truth_field: None,
    };
    // the truth must be scoreable before anything else is worth running
    if let Err(e @ Error::DegenerateTruth { .. }) = normalized_error_values(&vec![Vec2::ZERO; grid.len()], &field, grid)
    {
        rec.status = TrialStatus::DegenerateTruth(e.to_string());
        return Ok(rec);
    }
    let log = match run_mission(&cfg.vehicle, &field, seed ^ MISSION_SEED_SALT) {
        Ok(log) => log,
        Err(e @ Error::MissionAborted) => {
            rec.status = TrialStatus::Aborted(e.to_string());
            return Ok(rec);
        }
        Err(e) => return Err(e),
    };
    for &kind in kinds {
        let mut errs = Vec::with_capacity(log.len());
        let mut failure = None;
        let est = process_mission_with(&log, &cfg.hp, kind, &cfg.em, |_, model| {
            match normalized_error_values(&model.predict_mean(grid), &field, grid) {
                Ok(e) => errs.push(e),
                Err(e) => failure = Some(e),
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        rec.errors.insert(kind, errs);
        if cfg.emit_field_csv {
            rec.final_fields.insert(kind, est.model.predict_mean(grid));
        }
    }
    if cfg.emit_field_csv {
        rec.truth_field = Some(grid.iter().map(|&p| field.current(p)).collect());
    }
    Ok(rec)
}
