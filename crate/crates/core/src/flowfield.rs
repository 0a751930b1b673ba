//! Analytic planar flow fields, evaluation grids and divergence checks.
//!
//! Every field here is generated by a streamfunction `φ`, with the current
//! given by its rotated gradient `w = (∂φ/∂y, −∂φ/∂x)`. Fields built this way
//! are divergence-free by construction.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Range of the random gyre cell extent along each axis, metres.
pub const GYRE_EXTENT_RANGE_M: (f64, f64) = (40_000.0, 60_000.0);
/// Range of the random gyre peak current speed, m/s.
pub const GYRE_PEAK_SPEED_RANGE: (f64, f64) = (0.1, 0.5);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    DoubleGyre,
    Uniform,
    ZeroField,
}

/// Closed-form ground-truth current field.
///
/// For `DoubleGyre` the streamfunction is
/// `φ(x, y) = A sin(πx/Lx − px) sin(πy/Ly − py)`, a periodic tiling of
/// counter-rotating cells. For `Uniform` it is `φ = c_x y − c_y x` with
/// `c = amplitude · direction`, so that `φ(0, 0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticField {
    kind: FieldKind,
    amplitude: f64,
    extent: (f64, f64),
    phase: (f64, f64),
    direction: Vec2,
}

impl AnalyticField {
    pub fn zero() -> Self {
        AnalyticField {
            kind: FieldKind::ZeroField,
            amplitude: 0.0,
            extent: (1.0, 1.0),
            phase: (0.0, 0.0),
            direction: Vec2::new(1.0, 0.0),
        }
    }

    /// A double gyre with amplitude `amplitude` (m²/s), cell extent
    /// `(lx, ly)` (m) and phase offsets `(px, py)` (rad).
    pub fn double_gyre(amplitude: f64, extent: (f64, f64), phase: (f64, f64)) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!("gyre amplitude must be >= 0, got {amplitude}")));
        }
        if !(extent.0 > 0.0 && extent.1 > 0.0 && extent.0.is_finite() && extent.1.is_finite()) {
            return Err(Error::Config(format!("gyre extent must be positive, got {extent:?}")));
        }
        if !(phase.0.is_finite() && phase.1.is_finite()) {
            return Err(Error::Config("gyre phase must be finite".into()));
        }
        Ok(AnalyticField {
            kind: FieldKind::DoubleGyre,
            amplitude,
            extent,
            phase,
            direction: Vec2::new(1.0, 0.0),
        })
    }

    /// A spatially constant current of magnitude `speed` (m/s) along the
    /// unit vector `direction`.
    pub fn uniform(speed: f64, direction: Vec2) -> Result<Self> {
        if !(speed >= 0.0 && speed.is_finite()) {
            return Err(Error::Config(format!("uniform speed must be >= 0, got {speed}")));
        }
        if !direction.is_finite() || (direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::Config("uniform direction must have unit norm".into()));
        }
        Ok(AnalyticField {
            kind: FieldKind::Uniform,
            amplitude: speed,
            extent: (1.0, 1.0),
            phase: (0.0, 0.0),
            direction,
        })
    }

    /// Uniform field from a current vector; a zero vector yields a zero-speed
    /// uniform field pointing along +x.
    pub fn uniform_from_current(c: Vec2) -> Result<Self> {
        let speed = c.norm();
        if speed == 0.0 {
            return Self::uniform(0.0, Vec2::new(1.0, 0.0));
        }
        Self::uniform(speed, c * (1.0 / speed))
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn extent(&self) -> (f64, f64) {
        self.extent
    }

    pub fn phase(&self) -> (f64, f64) {
        self.phase
    }

    pub fn direction(&self) -> Vec2 {
        self.direction
    }

    /// Maximum current speed over the whole plane.
    pub fn peak_speed(&self) -> f64 {
        match self.kind {
            FieldKind::ZeroField => 0.0,
            FieldKind::Uniform => self.amplitude,
            FieldKind::DoubleGyre => self.amplitude * PI / self.extent.0.min(self.extent.1),
        }
    }

    /// Streamfunction value `φ(p)`, m²/s.
    pub fn streamfunction(&self, p: Vec2) -> f64 {
        match self.kind {
            FieldKind::ZeroField => 0.0,
            FieldKind::Uniform => {
                let c = self.direction * self.amplitude;
                c.x * p.y - c.y * p.x
            }
            FieldKind::DoubleGyre => {
                let (a, b) = self.gyre_args(p);
                self.amplitude * a.sin() * b.sin()
            }
        }
    }

    /// Current `w(p) = (∂φ/∂y, −∂φ/∂x)`, m/s.
    pub fn current(&self, p: Vec2) -> Vec2 {
        match self.kind {
            FieldKind::ZeroField => Vec2::ZERO,
            FieldKind::Uniform => self.direction * self.amplitude,
            FieldKind::DoubleGyre => {
                let (a, b) = self.gyre_args(p);
                let (sa, ca) = a.sin_cos();
                let (sb, cb) = b.sin_cos();
                let (lx, ly) = self.extent;
                Vec2::new(self.amplitude * PI / ly * sa * cb, -self.amplitude * PI / lx * ca * sb)
            }
        }
    }

    #[inline]
    fn gyre_args(&self, p: Vec2) -> (f64, f64) {
        (
            PI * p.x / self.extent.0 - self.phase.0,
            PI * p.y / self.extent.1 - self.phase.1,
        )
    }
}

pub fn eval_field(field: &AnalyticField, p: Vec2) -> Vec2 {
    field.current(p)
}

pub fn eval_streamfunction(field: &AnalyticField, p: Vec2) -> f64 {
    field.streamfunction(p)
}

/// Central-difference divergence of `f` at `p` with step `h` (1/s when `f`
/// is a current in m/s and `h` is in metres).
pub fn divergence_fd<F>(f: F, p: Vec2, h: f64) -> f64
where
    F: Fn(Vec2) -> Vec2,
{
    debug_assert!(h > 0.0);
    let dx = f(Vec2::new(p.x + h, p.y)).x - f(Vec2::new(p.x - h, p.y)).x;
    let dy = f(Vec2::new(p.x, p.y + h)).y - f(Vec2::new(p.x, p.y - h)).y;
    (dx + dy) / (2.0 * h)
}

/// Deterministic random double gyre.
///
/// Cells are square with extent uniform in [`GYRE_EXTENT_RANGE_M`], phases
/// uniform in `[0, 2π)` and the peak speed log-uniform in
/// [`GYRE_PEAK_SPEED_RANGE`]; the amplitude is then `peak · L / π`.
pub fn random_gyre(seed: u64) -> AnalyticField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let extent = rng.random_range(GYRE_EXTENT_RANGE_M.0..GYRE_EXTENT_RANGE_M.1);
    let (lx, ly) = (extent, extent);
    let px = rng.random_range(0.0..2.0 * PI);
    let py = rng.random_range(0.0..2.0 * PI);
    let (lo, hi) = GYRE_PEAK_SPEED_RANGE;
    let peak = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    let amplitude = peak * lx.min(ly) / PI;
    AnalyticField::double_gyre(amplitude, (lx, ly), (px, py)).expect("sampled gyre parameters are in range")
}

/// Regular evaluation raster. Points are enumerated row-major: `y` index in
/// the outer loop, `x` index in the inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub origin: Vec2,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn new(origin: Vec2, spacing: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(Error::Config(format!("grid spacing must be positive, got {spacing}")));
        }
        if nx == 0 || ny == 0 {
            return Err(Error::Config("grid must have at least one point".into()));
        }
        if !origin.is_finite() {
            return Err(Error::Config("grid origin must be finite".into()));
        }
        Ok(Grid {
            origin,
            spacing,
            nx,
            ny,
        })
    }

    /// An `n × n` grid covering the bounding box of `points` padded by `pad`
    /// on every side, centred on the box; the spacing is set by the longer
    /// side.
    pub fn covering(points: &[Vec2], pad: f64, n: usize) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Config("cannot cover an empty point set".into()));
        }
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        lo -= Vec2::new(pad, pad);
        hi += Vec2::new(pad, pad);
        let side = (hi.x - lo.x).max(hi.y - lo.y);
        let n = n.max(1);
        let spacing = if n > 1 && side > 0.0 {
            side / (n - 1) as f64
        } else {
            1.0
        };
        let centre = (lo + hi) * 0.5;
        let half = spacing * (n - 1) as f64 * 0.5;
        Grid::new(centre - Vec2::new(half, half), spacing, n, n)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, ix: usize, iy: usize) -> Vec2 {
        self.origin + Vec2::new(ix as f64 * self.spacing, iy as f64 * self.spacing)
    }

    pub fn points(&self) -> Vec<Vec2> {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| self.point(ix, iy))
            .collect()
    }
}

/// Writes `x_m,y_m,u_mps,v_mps` rows for each grid point and its vector.
pub fn write_field_csv<W: Write>(mut out: W, points: &[Vec2], values: &[Vec2]) -> std::io::Result<()> {
    writeln!(out, "x_m,y_m,u_mps,v_mps")?;
    for (p, w) in points.iter().zip(values) {
        writeln!(out, "{},{},{},{}", p.x, p.y, w.x, w.y)?;
    }
    out.flush()
}
