//! Covariance functions over planar current vectors.
//!
//! The incompressible kernel places a squared-exponential GP prior on the
//! streamfunction `φ` and pushes it through the operator
//! `D = (∂/∂y, −∂/∂x)ᵀ`, giving the 2×2 covariance `K(x, x') = D k D'`
//! of the current field. The streamfunction amplitude is `σ_W² ℓ²`, which
//! makes the zero-lag current covariance exactly `σ_W² I`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

pub type Mat2 = Matrix2<f64>;

/// Kernel and measurement hyperparameters (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Lengthscale ℓ, metres.
    pub lengthscale_m: f64,
    /// Current self-variance σ_W², m²/s².
    pub current_variance: f64,
    /// GPS noise standard deviation σ_y, metres.
    pub gps_noise_std_m: f64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lengthscale_m: 35_000.0,
            current_variance: 0.5,
            gps_noise_std_m: 3.0,
        }
    }
}

impl HyperParams {
    pub fn new(lengthscale_m: f64, current_variance: f64, gps_noise_std_m: f64) -> Result<Self> {
        let hp = HyperParams {
            lengthscale_m,
            current_variance,
            gps_noise_std_m,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale_m > 0.0 && self.lengthscale_m.is_finite()) {
            return Err(Error::Config(format!(
                "lengthscale must be > 0, got {}",
                self.lengthscale_m
            )));
        }
        if !(self.current_variance > 0.0 && self.current_variance.is_finite()) {
            return Err(Error::Config(format!(
                "current variance must be > 0, got {}",
                self.current_variance
            )));
        }
        if !(self.gps_noise_std_m >= 0.0 && self.gps_noise_std_m.is_finite()) {
            return Err(Error::Config(format!(
                "gps noise std must be >= 0, got {}",
                self.gps_noise_std_m
            )));
        }
        Ok(())
    }

    /// Streamfunction prior variance σ_φ² = σ_W² ℓ², m⁴/s².
    #[inline]
    pub fn streamfunction_variance(&self) -> f64 {
        self.current_variance * self.lengthscale_m * self.lengthscale_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Incompressible,
    #[serde(rename = "standard")]
    StandardDiagonal,
}

impl KernelKind {
    pub const ALL: [KernelKind; 2] = [KernelKind::Incompressible, KernelKind::StandardDiagonal];

    pub fn as_str(&self) -> &'static str {
        match self {
            KernelKind::Incompressible => "incompressible",
            KernelKind::StandardDiagonal => "standard",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "incompressible" => Ok(KernelKind::Incompressible),
            "standard" | "standard_diagonal" => Ok(KernelKind::StandardDiagonal),
            other => Err(Error::Config(format!("unknown kernel kind `{other}`"))),
        }
    }
}

/// Squared-exponential streamfunction covariance at lag `d`.
pub fn eval_scalar_kernel(hp: &HyperParams, d: Vec2) -> f64 {
    let l2 = hp.lengthscale_m * hp.lengthscale_m;
    hp.streamfunction_variance() * (-d.norm_sq() / (2.0 * l2)).exp()
}

/// 2×2 current covariance between positions `x` and `xp`.
pub fn eval_kernel(hp: &HyperParams, kind: KernelKind, x: Vec2, xp: Vec2) -> Mat2 {
    let d = x - xp;
    let l2 = hp.lengthscale_m * hp.lengthscale_m;
    let s = hp.current_variance * (-d.norm_sq() / (2.0 * l2)).exp();
    match kind {
        KernelKind::Incompressible => {
            let (dx, dy) = (d.x / hp.lengthscale_m, d.y / hp.lengthscale_m);
            let off = s * dx * dy;
            Mat2::new(s * (1.0 - dy * dy), off, off, s * (1.0 - dx * dx))
        }
        KernelKind::StandardDiagonal => Mat2::new(s, 0.0, 0.0, s),
    }
}

/// Blockwise kernel matrix of shape `2|rows| × 2|cols|`; block `(i, j)` is
/// `K(rows[i], cols[j])` with component order `(u, v)` inside each block.
pub fn build_block_matrix(hp: &HyperParams, kind: KernelKind, rows: &[Vec2], cols: &[Vec2]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(2 * rows.len(), 2 * cols.len());
    for (i, &a) in rows.iter().enumerate() {
        for (j, &b) in cols.iter().enumerate() {
            let k = eval_kernel(hp, kind, a, b);
            m.fixed_view_mut::<2, 2>(2 * i, 2 * j).copy_from(&k);
        }
    }
    m
}

/// Symmetric Gram matrix of `points` against themselves. Only the upper
/// block triangle is evaluated.
pub fn build_gram(hp: &HyperParams, kind: KernelKind, points: &[Vec2]) -> DMatrix<f64> {
    let n = points.len();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in i..n {
            let k = eval_kernel(hp, kind, points[i], points[j]);
            m.fixed_view_mut::<2, 2>(2 * i, 2 * j).copy_from(&k);
            if i != j {
                m.fixed_view_mut::<2, 2>(2 * j, 2 * i).copy_from(&k.transpose());
            }
        }
    }
    m
}
