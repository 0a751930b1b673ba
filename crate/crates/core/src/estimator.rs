//! Incremental GP-EM estimation of the current along each dive.
//!
//! For every cycle the loop alternates two closed-form updates starting
//! from the dead-reckoned track:
//!
//! * conditioning: given a track iterate, take the GP prior over the
//!   currents at its points and condition it on the measured drift, which
//!   equals `dt · Σ W` plus GPS noise;
//! * reconstruction: rebuild the track by adding the cumulative current
//!   displacement to the dead-reckoned points.
//!
//! Once a cycle converges its currents are frozen and appended to the GP as
//! pseudo-targets, so later cycles see them as data.

use nalgebra::{DMatrix, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{downsample_targets, stack, unstack, GpModel, DEFAULT_TARGET_NOISE_VAR};
use crate::kernels::{HyperParams, KernelKind, Mat2};
use crate::simulator::{Cycle, MissionLog};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub max_iters: usize,
    /// Stop once no track point moves more than this between iterations, m.
    pub convergence_tol_m: f64,
    /// Minimum spacing between pseudo-targets taken from one cycle, m.
    pub pseudo_target_spacing_m: f64,
    /// Noise variance attached to each pseudo-target, m²/s².
    pub target_noise_var: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig::for_hyper(&HyperParams::default())
    }
}

impl EmConfig {
    /// Defaults with pseudo-target spacing `ℓ / 20`.
    pub fn for_hyper(hp: &HyperParams) -> Self {
        EmConfig {
            max_iters: 10,
            convergence_tol_m: 1.0,
            pseudo_target_spacing_m: hp.lengthscale_m / 20.0,
            target_noise_var: DEFAULT_TARGET_NOISE_VAR,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("EM max_iters must be >= 1".into()));
        }
        if !(self.convergence_tol_m.is_finite() && self.convergence_tol_m > 0.0) {
            return Err(Error::Config("EM convergence tolerance must be > 0".into()));
        }
        if !(self.pseudo_target_spacing_m.is_finite() && self.pseudo_target_spacing_m >= 0.0) {
            return Err(Error::Config("pseudo-target spacing must be >= 0".into()));
        }
        if !(self.target_noise_var.is_finite() && self.target_noise_var >= 0.0) {
            return Err(Error::Config("pseudo-target noise variance must be >= 0".into()));
        }
        Ok(())
    }
}

/// Final iterate of the EM loop for one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmState {
    pub iteration: usize,
    /// Reconstructed track, `n + 1` points.
    pub trajectory: Vec<Vec2>,
    /// Current at track points `0..n`, m/s.
    pub currents: Vec<Vec2>,
    pub converged: bool,
    /// Largest point displacement in the last iteration, m.
    pub delta: f64,
    /// `‖dt · Σ W − Δx‖` after each iteration, m.
    pub residuals: Vec<f64>,
}

impl EmState {
    pub fn residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

/// Conditioned currents and their covariance from one M-step.
#[derive(Debug, Clone)]
pub struct MStep {
    pub currents: Vec<Vec2>,
    pub covariance: DMatrix<f64>,
}

/// Track reconstruction: `X[m] = X̂[m] + dt · Σ_{j<m} W[j]`.
pub fn e_step(dead_reckoned: &[Vec2], currents: &[Vec2], dt: f64) -> Result<Vec<Vec2>> {
    if dead_reckoned.len() != currents.len() + 1 {
        return Err(Error::DimensionMismatch(format!(
            "{} track points need {} currents, got {}",
            dead_reckoned.len(),
            dead_reckoned.len().saturating_sub(1),
            currents.len()
        )));
    }
    let mut offset = Vec2::ZERO;
    let mut out = Vec::with_capacity(dead_reckoned.len());
    out.push(dead_reckoned[0]);
    for (p, w) in dead_reckoned[1..].iter().zip(currents) {
        offset += *w * dt;
        out.push(*p + offset);
    }
    Ok(out)
}

/// Conditions the GP prior at `trajectory[..n]` on the measured drift.
///
/// Returns `W = μ + ΣCᵀ(CΣCᵀ + σ_y²I)⁻¹(Δx − Cμ)` and the conditional
/// covariance `Σ − ΣCᵀ(CΣCᵀ + σ_y²I)⁻¹CΣ`, with `C = dt [I I … I]`.
pub fn m_step(model: &GpModel, trajectory: &[Vec2], drift: Vec2, dt: f64) -> Result<MStep> {
    let queries = step_points(trajectory)?;
    let n = queries.len();
    let pred = model.predict(queries)?;

    // ΣCᵀ, 2n × 2
    let mut sigma_ct = DMatrix::zeros(2 * n, 2);
    for j in 0..n {
        sigma_ct += pred.covariance.columns(2 * j, 2);
    }
    sigma_ct *= dt;
    let mut c_sigma_ct = Mat2::zeros();
    for i in 0..n {
        c_sigma_ct += sigma_ct.fixed_view::<2, 2>(2 * i, 0);
    }
    c_sigma_ct *= dt;

    let sum_mu = pred.mean.iter().fold(Vec2::ZERO, |a, &w| a + w);
    let innovation = drift - sum_mu * dt;
    let s_inv = innovation_inverse(
        c_sigma_ct,
        model.hyper().gps_noise_std_m,
        dt * dt * model.hyper().current_variance,
    )?;
    let gain = &sigma_ct * s_inv; // 2n × 2

    let mean = stack(&pred.mean) + &gain * Vector2::new(innovation.x, innovation.y);
    let mut cov = pred.covariance - &gain * sigma_ct.transpose();
    let dim = cov.nrows();
    for i in 0..dim {
        for j in (i + 1)..dim {
            let avg = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = avg;
            cov[(j, i)] = avg;
        }
    }
    Ok(MStep {
        currents: unstack(&mean),
        covariance: cov,
    })
}

/// Conditional mean of [`m_step`] without forming the dense covariance.
pub fn m_step_currents(model: &GpModel, trajectory: &[Vec2], drift: Vec2, dt: f64) -> Result<Vec<Vec2>> {
    let queries = step_points(trajectory)?;
    let pred = model.predict_row_sums(queries)?;
    let total = pred.cov_row_sums.iter().fold(Mat2::zeros(), |a, s| a + s);
    let c_sigma_ct = total * (dt * dt);
    let sum_mu = pred.mean.iter().fold(Vec2::ZERO, |a, &w| a + w);
    let innovation = drift - sum_mu * dt;
    let s_inv = innovation_inverse(
        c_sigma_ct,
        model.hyper().gps_noise_std_m,
        dt * dt * model.hyper().current_variance,
    )?;
    let scaled = s_inv * Vector2::new(innovation.x, innovation.y) * dt;
    Ok(pred
        .mean
        .iter()
        .zip(&pred.cov_row_sums)
        .map(|(&mu, rs)| {
            let g = rs * scaled;
            mu + Vec2::new(g.x, g.y)
        })
        .collect())
}

fn step_points(trajectory: &[Vec2]) -> Result<&[Vec2]> {
    if trajectory.len() < 2 {
        return Err(Error::DimensionMismatch(format!(
            "trajectory needs at least 2 points, got {}",
            trajectory.len()
        )));
    }
    Ok(&trajectory[..trajectory.len() - 1])
}

/// Inverse of `CΣCᵀ + σ_y²I`. `reference` is the prior scale `dt² σ_W²`;
/// eigenvalues below `1e-12 · reference` count as singular.
fn innovation_inverse(c_sigma_ct: Mat2, gps_std: f64, reference: f64) -> Result<Matrix2<f64>> {
    let s = (c_sigma_ct + c_sigma_ct.transpose()) * 0.5 + Mat2::identity() * (gps_std * gps_std);
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInnovation);
    }
    let half_trace = 0.5 * (s[(0, 0)] + s[(1, 1)]);
    let radius = (0.25 * (s[(0, 0)] - s[(1, 1)]).powi(2) + s[(0, 1)] * s[(0, 1)]).sqrt();
    if half_trace - radius <= 1e-12 * reference {
        return Err(Error::SingularInnovation);
    }
    s.try_inverse().ok_or(Error::SingularInnovation)
}

/// Runs the EM loop for one cycle against a frozen GP prior.
pub fn run_em_cycle(model: &GpModel, cycle: &Cycle, cfg: &EmConfig) -> Result<EmState> {
    cfg.validate()?;
    let dr = cycle.dead_reckoned();
    let dt = cycle.dt();
    let drift = cycle.drift();
    let mut trajectory = dr.to_vec();
    let mut currents = vec![Vec2::ZERO; cycle.steps()];
    let mut delta = f64::INFINITY;
    let mut residuals = Vec::with_capacity(cfg.max_iters);
    let mut converged = false;
    let mut iteration = 0;

    while iteration < cfg.max_iters {
        iteration += 1;
        currents = m_step_currents(model, &trajectory, drift, dt)?;
        let next = e_step(dr, &currents, dt)?;
        delta = next
            .iter()
            .zip(&trajectory)
            .map(|(a, b)| a.distance(*b))
            .fold(0.0, f64::max);
        trajectory = next;
        let sum = currents.iter().fold(Vec2::ZERO, |a, &w| a + w);
        residuals.push((sum * dt - drift).norm());
        if delta < cfg.convergence_tol_m {
            converged = true;
            break;
        }
    }
    Ok(EmState {
        iteration,
        trajectory,
        currents,
        converged,
        delta,
        residuals,
    })
}

/// Per-cycle outcome of [`process_mission`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleDiagnostics {
    pub cycle: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub state: Option<EmState>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Pseudo-targets added to the GP after this cycle.
    pub targets_added: usize,
}

#[derive(Debug, Clone)]
pub struct MissionEstimate {
    pub model: GpModel,
    pub diagnostics: Vec<CycleDiagnostics>,
}

/// Processes every cycle in order, growing the GP after each.
pub fn process_mission(
    log: &MissionLog,
    hp: &HyperParams,
    kind: KernelKind,
    cfg: &EmConfig,
) -> Result<MissionEstimate> {
    process_mission_with(log, hp, kind, cfg, |_, _| {})
}

/// As [`process_mission`], calling `after_cycle(k, &model)` once cycle `k`
/// (zero-based) has been folded into the model.
pub fn process_mission_with<F>(
    log: &MissionLog,
    hp: &HyperParams,
    kind: KernelKind,
    cfg: &EmConfig,
    mut after_cycle: F,
) -> Result<MissionEstimate>
where
    F: FnMut(usize, &GpModel),
{
    cfg.validate()?;
    let mut model = GpModel::empty(*hp, kind, cfg.target_noise_var)?;
    let mut diagnostics = Vec::with_capacity(log.len());
    for (k, cycle) in log.cycles.iter().enumerate() {
        let outcome = run_em_cycle(&model, cycle, cfg).and_then(|state| {
            let positions = &state.trajectory[..state.currents.len()];
            let (p, w) = downsample_targets(positions, &state.currents, cfg.pseudo_target_spacing_m);
            let next = model.add_pseudo_targets(&p, &w)?;
            Ok((state, next, p.len()))
        });
        match outcome {
            Ok((state, next, added)) => {
                model = next;
                diagnostics.push(CycleDiagnostics {
                    cycle: k,
                    state: Some(state),
                    error: None,
                    targets_added: added,
                });
            }
            Err(e) => {
                log::warn!("cycle {k}: {e}");
                diagnostics.push(CycleDiagnostics {
                    cycle: k,
                    state: None,
                    error: Some(e.to_string()),
                    targets_added: 0,
                });
            }
        }
        after_cycle(k, &model);
    }
    Ok(MissionEstimate { model, diagnostics })
}
