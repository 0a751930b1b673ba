//! Discrete-time vehicle simulation and the cycle-log file format.
//!
//! The true position advances with the commanded velocity plus the ambient
//! current; the onboard estimate advances with the commanded velocity only.
//! Each dive ends when the onboard estimate is within the surfacing
//! tolerance of the active waypoint, at which point a noisy GPS fix is taken
//! and the next dive restarts dead reckoning from that fix.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flowfield::AnalyticField;
use crate::vec2::Vec2;

/// Mean Earth radius used by the equirectangular projection, metres.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Drift consistency tolerance applied when a cycle line carries `drift_m`.
const DRIFT_TOLERANCE_M: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleConfig {
    pub speed_mps: f64,
    pub dt_s: f64,
    pub surface_tolerance_m: f64,
    pub gps_noise_std_m: f64,
    /// Known position at the first dive-in.
    pub start: Vec2,
    pub waypoints: Vec<Vec2>,
    pub max_steps_per_cycle: usize,
}

impl Default for VehicleConfig {
    fn default() -> Self {
        VehicleConfig {
            speed_mps: 0.35,
            dt_s: 60.0,
            surface_tolerance_m: 100.0,
            gps_noise_std_m: 3.0,
            start: Vec2::ZERO,
            waypoints: polygon_waypoints(Vec2::ZERO, 15_000.0, 8),
            max_steps_per_cycle: 5000,
        }
    }
}

impl VehicleConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must be > 0, got {v}")))
            }
        };
        positive(self.speed_mps, "vehicle speed")?;
        positive(self.dt_s, "time step")?;
        positive(self.surface_tolerance_m, "surface tolerance")?;
        if !(self.gps_noise_std_m >= 0.0 && self.gps_noise_std_m.is_finite()) {
            return Err(Error::Config("gps noise std must be >= 0".into()));
        }
        if self.waypoints.is_empty() {
            return Err(Error::Config("at least one waypoint is required".into()));
        }
        if !self.start.is_finite() || self.waypoints.iter().any(|w| !w.is_finite()) {
            return Err(Error::Config("start and waypoints must be finite".into()));
        }
        if self.max_steps_per_cycle == 0 {
            return Err(Error::Config("max steps per cycle must be >= 1".into()));
        }
        Ok(())
    }
}

/// `count` waypoints evenly spaced on a circle of `radius` around `centre`,
/// starting due east and proceeding anticlockwise.
pub fn polygon_waypoints(centre: Vec2, radius: f64, count: usize) -> Vec<Vec2> {
    (0..count)
        .map(|i| {
            let a = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            centre + Vec2::new(radius * a.cos(), radius * a.sin())
        })
        .collect()
}

/// One dive: dead-reckoned track, step length, and the surfacing GPS fix.
#[derive(Debug, Clone, PartialEq)]
pub struct Cycle {
    dead_reckoned: Vec<Vec2>,
    dt: f64,
    gps_fix: Vec2,
    drift: Vec2,
}

impl Cycle {
    pub fn new(dead_reckoned: Vec<Vec2>, dt: f64, gps_fix: Vec2) -> Result<Self> {
        if dead_reckoned.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a cycle needs at least one step, got {} points",
                dead_reckoned.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput(format!("cycle dt must be > 0, got {dt}")));
        }
        if !gps_fix.is_finite() || dead_reckoned.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("cycle positions must be finite".into()));
        }
        let drift = gps_fix - *dead_reckoned.last().expect("non-empty");
        Ok(Cycle {
            dead_reckoned,
            dt,
            gps_fix,
            drift,
        })
    }

    pub fn dead_reckoned(&self) -> &[Vec2] {
        &self.dead_reckoned
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn gps_fix(&self) -> Vec2 {
        self.gps_fix
    }

    /// GPS fix minus the final dead-reckoned point.
    pub fn drift(&self) -> Vec2 {
        self.drift
    }

    /// Number of steps `n` (the track has `n + 1` points).
    pub fn steps(&self) -> usize {
        self.dead_reckoned.len() - 1
    }

    pub fn dive_in(&self) -> Vec2 {
        self.dead_reckoned[0]
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MissionLog {
    pub cycles: Vec<Cycle>,
    /// True positions per cycle (simulation only), same length as each
    /// dead-reckoned track.
    pub truth_trajectories: Option<Vec<Vec<Vec2>>>,
    pub field_ref: Option<AnalyticField>,
}

impl MissionLog {
    pub fn from_cycles(cycles: Vec<Cycle>) -> Self {
        MissionLog {
            cycles,
            truth_trajectories: None,
            field_ref: None,
        }
    }

    pub fn len(&self) -> usize {
        self.cycles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cycles.is_empty()
    }
}

/// Explicit Euler step of the true position.
#[inline]
pub fn step_truth(p: Vec2, v: Vec2, w: Vec2, dt: f64) -> Vec2 {
    p + (v + w) * dt
}

/// Dead-reckoning step: the current is assumed to be zero.
#[inline]
pub fn step_dead_reckoned(p: Vec2, v: Vec2, dt: f64) -> Vec2 {
    p + v * dt
}

/// Simulates a full waypoint mission through `field`.
///
/// One cycle is produced per waypoint. Each step the vehicle heads straight
/// at the waypoint in dead-reckoned coordinates. A dive ends when the
/// dead-reckoned distance drops to the surfacing tolerance (after at least
/// one step) or the step budget runs out; GPS noise is drawn from a ChaCha8
/// stream seeded with `seed`.
pub fn run_mission(cfg: &VehicleConfig, field: &AnalyticField, seed: u64) -> Result<MissionLog> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = cfg.gps_noise_std_m;
    let step_len = cfg.speed_mps * cfg.dt_s;

    let mut truth = cfg.start;
    let mut fix = cfg.start;
    let mut cycles = Vec::with_capacity(cfg.waypoints.len());
    let mut truths = Vec::with_capacity(cfg.waypoints.len());
    let mut reached_any = false;

    for &wp in &cfg.waypoints {
        let mut dr = vec![fix];
        let mut path = vec![truth];
        let mut est = fix;
        loop {
            let to_wp = wp - est;
            let dist = to_wp.norm();
            let v = if dist > 0.0 {
                to_wp * (cfg.speed_mps / dist)
            } else {
                Vec2::ZERO
            };
            truth = step_truth(truth, v, field.current(truth), cfg.dt_s);
            est = step_dead_reckoned(est, v, cfg.dt_s);
            dr.push(est);
            path.push(truth);
            let steps = dr.len() - 1;
            if est.distance(wp) <= cfg.surface_tolerance_m {
                reached_any = true;
                break;
            }
            if steps >= cfg.max_steps_per_cycle {
                log::debug!(
                    "step budget exhausted {:.0} m short of waypoint ({} steps of {step_len} m)",
                    est.distance(wp),
                    steps
                );
                break;
            }
        }
        let noise = if sigma > 0.0 {
            let nx: f64 = StandardNormal.sample(&mut rng);
            let ny: f64 = StandardNormal.sample(&mut rng);
            Vec2::new(nx, ny) * sigma
        } else {
            Vec2::ZERO
        };
        let gps = truth + noise;
        cycles.push(Cycle::new(dr, cfg.dt_s, gps)?);
        truths.push(path);
        fix = gps;
    }

    if !reached_any {
        return Err(Error::MissionAborted);
    }
    Ok(MissionLog {
        cycles,
        truth_trajectories: Some(truths),
        field_ref: Some(*field),
    })
}

#[derive(Debug, Serialize, Deserialize, Default)]
struct CycleLine {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    origin_latlon: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dead_reckoned_m: Option<Vec<Vec2>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gps_fix_m: Option<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    drift_m: Option<Vec2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dead_reckoned_latlon: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gps_fix_latlon: Option<[f64; 2]>,
}

impl CycleLine {
    fn is_header(&self) -> bool {
        self.origin_latlon.is_some()
            && self.dt_s.is_none()
            && self.dead_reckoned_m.is_none()
            && self.dead_reckoned_latlon.is_none()
    }
}

/// Local tangent-plane projection about a reference latitude/longitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equirectangular {
    lat0_deg: f64,
    lon0_deg: f64,
}

impl Equirectangular {
    pub fn new(lat0_deg: f64, lon0_deg: f64) -> Self {
        Equirectangular { lat0_deg, lon0_deg }
    }

    /// `[lat, lon]` in degrees to local east/north metres.
    pub fn project(&self, latlon: [f64; 2]) -> Vec2 {
        let x = EARTH_RADIUS_M * (latlon[1] - self.lon0_deg).to_radians() * self.lat0_deg.to_radians().cos();
        let y = EARTH_RADIUS_M * (latlon[0] - self.lat0_deg).to_radians();
        Vec2::new(x, y)
    }

    pub fn unproject(&self, p: Vec2) -> [f64; 2] {
        let lat = self.lat0_deg + (p.y / EARTH_RADIUS_M).to_degrees();
        let lon = self.lon0_deg + (p.x / (EARTH_RADIUS_M * self.lat0_deg.to_radians().cos())).to_degrees();
        [lat, lon]
    }
}

/// Result of parsing a cycle log, including non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub log: MissionLog,
    pub warnings: Vec<String>,
}

/// Parses a JSON Lines cycle log. Blank lines are skipped.
pub fn read_cycles<R: BufRead>(reader: R) -> Result<Ingested> {
    let mut projection: Option<Equirectangular> = None;
    let mut cycles: Vec<Cycle> = Vec::new();
    let mut warnings = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: CycleLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: lineno,
            msg: e.to_string(),
        })?;
        if raw.is_header() {
            if !cycles.is_empty() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "origin_latlon header must precede all cycles".into(),
                });
            }
            let [lat, lon] = raw.origin_latlon.expect("header");
            projection = Some(Equirectangular::new(lat, lon));
            continue;
        }
        let missing = |field: &str| Error::Parse {
            line: lineno,
            msg: format!("missing field `{field}`"),
        };
        let dt = raw.dt_s.ok_or_else(|| missing("dt_s"))?;
        let (track, fix) = match (raw.dead_reckoned_m, raw.dead_reckoned_latlon) {
            (Some(track), _) => (track, raw.gps_fix_m.ok_or_else(|| missing("gps_fix_m"))?),
            (None, Some(deg)) => {
                let fix_deg = raw.gps_fix_latlon.ok_or_else(|| missing("gps_fix_latlon"))?;
                let proj = *projection.get_or_insert_with(|| {
                    let first = deg.first().copied().unwrap_or(fix_deg);
                    Equirectangular::new(first[0], first[1])
                });
                (deg.iter().map(|&ll| proj.project(ll)).collect(), proj.project(fix_deg))
            }
            (None, None) => return Err(missing("dead_reckoned_m")),
        };
        let cycle = Cycle::new(track, dt, fix).map_err(|e| Error::Validation {
            line: lineno,
            msg: e.to_string(),
        })?;
        if let Some(d) = raw.drift_m {
            let err = (d - cycle.drift()).norm();
            if err > DRIFT_TOLERANCE_M {
                return Err(Error::Validation {
                    line: lineno,
                    msg: format!("drift_m disagrees with gps fix minus last dead-reckoned point by {err:e} m"),
                });
            }
        }
        if let Some(prev) = cycles.last() {
            let gap = prev.gps_fix().distance(cycle.dive_in());
            if gap > DRIFT_TOLERANCE_M {
                let msg = format!("line {lineno}: dive-in is {gap:.3} m from the previous GPS fix");
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
        cycles.push(cycle);
    }
    Ok(Ingested {
        log: MissionLog::from_cycles(cycles),
        warnings,
    })
}

/// Reads a cycle log from disk.
pub fn ingest_cycles(path: impl AsRef<Path>) -> Result<MissionLog> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(read_cycles(BufReader::new(f))?.log)
}

/// Writes cycles as JSON Lines in metres, including the derived drift.
pub fn write_cycles<W: Write>(mut out: W, log: &MissionLog) -> std::io::Result<()> {
    for c in &log.cycles {
        let line = CycleLine {
            dt_s: Some(c.dt()),
            dead_reckoned_m: Some(c.dead_reckoned().to_vec()),
            gps_fix_m: Some(c.gps_fix()),
            drift_m: Some(c.drift()),
            ..Default::default()
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_cycles(path: impl AsRef<Path>, log: &MissionLog) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(f);
    write_cycles(&mut w, log).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
