//! Reference implementations used only by the integration tests. They are
//! written from the model definitions directly and share no code with the
//! library beyond the `Vec2` and `HyperParams` data types.

#![allow(dead_code)]

use driftgp::{HyperParams, KernelKind, Vec2};
use nalgebra::{DMatrix, DVector};

/// Scalar streamfunction covariance `σ_φ² exp(−|x − x'|² / 2ℓ²)`.
pub fn stream_cov(hp: &HyperParams, x: Vec2, xp: Vec2) -> f64 {
    let l = hp.lengthscale_m;
    let sphi = hp.current_variance * l * l;
    let d = x - xp;
    sphi * (-(d.x * d.x + d.y * d.y) / (2.0 * l * l)).exp()
}

/// `Cov(w(x), w(x'))` for `w = (∂φ/∂y, −∂φ/∂x)`, by a four-point mixed
/// central difference of the streamfunction covariance in `x` and `x'`.
pub fn fd_current_cov(hp: &HyperParams, x: Vec2, xp: Vec2, h: f64) -> [[f64; 2]; 2] {
    // component 0 is ∂/∂y with sign +1, component 1 is ∂/∂x with sign −1
    let unit = |c: usize| if c == 0 { Vec2::new(0.0, h) } else { Vec2::new(h, 0.0) };
    let sign = |c: usize| if c == 0 { 1.0 } else { -1.0 };
    let mut out = [[0.0; 2]; 2];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let (ea, eb) = (unit(a), unit(b));
            let v = stream_cov(hp, x + ea, xp + eb) - stream_cov(hp, x + ea, xp - eb) - stream_cov(hp, x - ea, xp + eb)
                + stream_cov(hp, x - ea, xp - eb);
            *cell = sign(a) * sign(b) * v / (4.0 * h * h);
        }
    }
    out
}

/// Closed-form 2×2 block, written out independently of the library.
pub fn kernel_block(hp: &HyperParams, kind: KernelKind, x: Vec2, xp: Vec2) -> [[f64; 2]; 2] {
    let l2 = hp.lengthscale_m * hp.lengthscale_m;
    let d = x - xp;
    let s = hp.current_variance * (-(d.x * d.x + d.y * d.y) / (2.0 * l2)).exp();
    match kind {
        KernelKind::Incompressible => {
            let off = s * d.x * d.y / l2;
            [[s * (1.0 - d.y * d.y / l2), off], [off, s * (1.0 - d.x * d.x / l2)]]
        }
        KernelKind::StandardDiagonal => [[s, 0.0], [0.0, s]],
    }
}

pub fn dense_cov(hp: &HyperParams, kind: KernelKind, rows: &[Vec2], cols: &[Vec2]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * rows.len(), 2 * cols.len());
    for (i, &r) in rows.iter().enumerate() {
        for (j, &c) in cols.iter().enumerate() {
            let b = kernel_block(hp, kind, r, c);
            for a in 0..2 {
                for e in 0..2 {
                    m[(2 * i + a, 2 * j + e)] = b[a][e];
                }
            }
        }
    }
    m
}

pub fn interleave(v: &[Vec2]) -> DVector<f64> {
    DVector::from_iterator(2 * v.len(), v.iter().flat_map(|w| [w.x, w.y]))
}

/// GP posterior by explicit inversion of `K_DD + σ²I` through a full-pivot LU.
pub fn explicit_posterior(
    hp: &HyperParams,
    kind: KernelKind,
    noise_var: f64,
    positions: &[Vec2],
    currents: &[Vec2],
    queries: &[Vec2],
) -> (DVector<f64>, DMatrix<f64>) {
    let kqq = dense_cov(hp, kind, queries, queries);
    if positions.is_empty() {
        return (DVector::zeros(2 * queries.len()), kqq);
    }
    let mut kdd = dense_cov(hp, kind, positions, positions);
    for i in 0..kdd.nrows() {
        kdd[(i, i)] += noise_var;
    }
    let inv = kdd.full_piv_lu().try_inverse().expect("oracle inverse");
    let kqd = dense_cov(hp, kind, queries, positions);
    let mean = &kqd * &inv * interleave(currents);
    let cov = kqq - &kqd * &inv * kqd.transpose();
    (mean, cov)
}

/// Relative difference scaled by the larger magnitude, floored at `scale`.
pub fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(scale)
}

/// Classic fourth-order Runge–Kutta step of `ṗ = v + w(p)`.
pub fn rk4_step<F: Fn(Vec2) -> Vec2>(p: Vec2, v: Vec2, w: &F, dt: f64) -> Vec2 {
    let f = |q: Vec2| v + w(q);
    let k1 = f(p);
    let k2 = f(p + k1 * (dt / 2.0));
    let k3 = f(p + k2 * (dt / 2.0));
    let k4 = f(p + k3 * dt);
    p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}
