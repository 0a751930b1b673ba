use crate::error::{Error, Result};
use crate::flowfield::{AnalyticField, Grid};
use crate::vec2::Vec2;

/// Grid points whose true speed is at or below this (m/s) are excluded from
/// the normalized error.
pub const TRUTH_SPEED_EPS: f64 = 1e-3;

/// `Σ ‖ŵ(p) − w(p)‖ / Σ ‖w(p)‖` over grid points with `‖w(p)‖ > ε`.
pub fn normalized_error<F>(estimate: F, truth: &AnalyticField, grid: &Grid) -> Result<f64>
where
    F: Fn(Vec2) -> Vec2,
{
    let points = grid.points();
    let est: Vec<Vec2> = points.iter().map(|&p| estimate(p)).collect();
    normalized_error_values(&est, truth, &points)
}

/// As [`normalized_error`], with the estimate already evaluated at `points`.
pub fn normalized_error_values(estimates: &[Vec2], truth: &AnalyticField, points: &[Vec2]) -> Result<f64> {
    if estimates.len() != points.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} estimates for {} grid points",
            estimates.len(),
            points.len()
        )));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (&p, &est) in points.iter().zip(estimates) {
        let w = truth.current(p);
        let speed = w.norm();
        if speed > TRUTH_SPEED_EPS {
            num += (est - w).norm();
            den += speed;
        }
    }
    if den == 0.0 {
        return Err(Error::DegenerateTruth { eps: TRUTH_SPEED_EPS });
    }
    Ok(num / den)
}
