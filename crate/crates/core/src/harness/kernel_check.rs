//! Self-check of the incompressible kernel: zero-lag value, positive
//! semidefiniteness of random Gram matrices, and agreement with finite
//! differences of the streamfunction kernel.

use nalgebra::SymmetricEigen;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::kernels::{build_gram, eval_kernel, eval_scalar_kernel, HyperParams, KernelKind};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Serialize)]
pub struct KernelCheck {
    pub zero_lag: [[f64; 2]; 2],
    pub zero_lag_is_scaled_identity: bool,
    pub gram_points: usize,
    pub gram_trials: usize,
    pub min_eigenvalue: f64,
    pub min_eigenvalue_floor: f64,
    pub psd: bool,
    pub fd_lags: usize,
    pub fd_step_m: f64,
    /// Largest `|K_fd − K| / σ_W²` over all entries and lags.
    pub fd_max_error: f64,
    pub fd_tolerance: f64,
    pub fd_consistent: bool,
}

/// Covariance of `(∂φ/∂y, −∂φ/∂x)` at `x` and `xp` by mixed central
/// differences of the scalar kernel in both arguments.
pub fn fd_kernel(hp: &HyperParams, x: Vec2, xp: Vec2, h: f64) -> [[f64; 2]; 2] {
    // operator rows: (direction, sign) so that D_i φ = sign · ∂φ/∂direction
    let ops = [(Vec2::new(0.0, 1.0), 1.0), (Vec2::new(1.0, 0.0), -1.0)];
    let k = |a: Vec2, b: Vec2| eval_scalar_kernel(hp, a - b);
    let mut out = [[0.0; 2]; 2];
    for (i, &(ea, sa)) in ops.iter().enumerate() {
        for (j, &(eb, sb)) in ops.iter().enumerate() {
            let da = ea * h;
            let db = eb * h;
            let mixed = k(x + da, xp + db) - k(x + da, xp - db) - k(x - da, xp + db) + k(x - da, xp - db);
            out[i][j] = sa * sb * mixed / (4.0 * h * h);
        }
    }
    out
}

pub fn kernel_check(hp: &HyperParams, seed: u64, points: usize, trials: usize, lags: usize) -> KernelCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = hp.lengthscale_m;
    let s2 = hp.current_variance;

    let z = eval_kernel(hp, KernelKind::Incompressible, Vec2::ZERO, Vec2::ZERO);
    let zero_lag = [[z[(0, 0)], z[(0, 1)]], [z[(1, 0)], z[(1, 1)]]];

    let mut min_eig = f64::INFINITY;
    for _ in 0..trials {
        let pts: Vec<Vec2> = (0..points)
            .map(|_| Vec2::new(rng.random_range(-2.0 * l..2.0 * l), rng.random_range(-2.0 * l..2.0 * l)))
            .collect();
        let g = build_gram(hp, KernelKind::Incompressible, &pts);
        min_eig = min_eig.min(SymmetricEigen::new(g).eigenvalues.min());
    }

    let h = l * 1e-4;
    let mut fd_max: f64 = 0.0;
    for _ in 0..lags {
        let x = Vec2::new(rng.random_range(-2.0 * l..2.0 * l), rng.random_range(-2.0 * l..2.0 * l));
        let xp = Vec2::new(rng.random_range(-2.0 * l..2.0 * l), rng.random_range(-2.0 * l..2.0 * l));
        let k = eval_kernel(hp, KernelKind::Incompressible, x, xp);
        let fd = fd_kernel(hp, x, xp, h);
        for i in 0..2 {
            for j in 0..2 {
                fd_max = fd_max.max((fd[i][j] - k[(i, j)]).abs() / s2);
            }
        }
    }

    let floor = -1e-8 * s2;
    KernelCheck {
        zero_lag,
        zero_lag_is_scaled_identity: zero_lag == [[s2, 0.0], [0.0, s2]],
        gram_points: points,
        gram_trials: trials,
        min_eigenvalue: min_eig,
        min_eigenvalue_floor: floor,
        psd: min_eig >= floor,
        fd_lags: lags,
        fd_step_m: h,
        fd_max_error: fd_max,
        fd_tolerance: 1e-5,
        fd_consistent: fd_max <= 1e-5,
    }
}
