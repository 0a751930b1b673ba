//! Flat `key = value` configuration files.
//!
//! Lines starting with `#` and blank lines are ignored. Vectors are written
//! `x,y`; lists of vectors separate entries with `;`. All units are SI.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimator::EmConfig;
use crate::flowfield::{random_gyre, AnalyticField, Grid};
use crate::kernels::{HyperParams, KernelKind};
use crate::simulator::{polygon_waypoints, VehicleConfig};
use crate::vec2::Vec2;

const KNOWN_KEYS: &[&str] = &[
    "hyper.lengthscale_m",
    "hyper.current_variance",
    "hyper.gps_noise_std_m",
    "vehicle.speed_mps",
    "vehicle.dt_s",
    "vehicle.surface_tolerance_m",
    "vehicle.max_steps_per_cycle",
    "vehicle.start",
    "vehicle.waypoints",
    "mission.waypoint_count",
    "mission.waypoint_radius_m",
    "mission.centre",
    "em.max_iters",
    "em.convergence_tol_m",
    "em.pseudo_target_spacing_m",
    "em.target_noise_var",
    "kernel",
    "field",
    "grid.n",
    "grid.origin",
    "grid.spacing_m",
    "grid.nx",
    "grid.ny",
    "trials",
    "base_seed",
    "report.field_csv",
];

/// Parsed key/value pairs with typed accessors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = k.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("unknown key `{key}`"),
                });
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("duplicate key `{key}`"),
                });
            }
        }
        Ok(KvConfig { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get_str(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("cannot parse `{key} = {v}`")))
            })
            .transpose()
    }

    fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn get_vec2(&self, key: &str) -> Result<Option<Vec2>> {
        self.get_str(key).map(|v| parse_vec2(v, key)).transpose()
    }

    pub fn get_vec2_list(&self, key: &str) -> Result<Option<Vec<Vec2>>> {
        self.get_str(key)
            .map(|v| {
                v.split(';')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_vec2(s, key))
                    .collect()
            })
            .transpose()
    }

    pub fn hyper(&self) -> Result<HyperParams> {
        let d = HyperParams::default();
        HyperParams::new(
            self.get_or("hyper.lengthscale_m", d.lengthscale_m)?,
            self.get_or("hyper.current_variance", d.current_variance)?,
            self.get_or("hyper.gps_noise_std_m", d.gps_noise_std_m)?,
        )
    }

    pub fn em(&self, hp: &HyperParams) -> Result<EmConfig> {
        let d = EmConfig::for_hyper(hp);
        let em = EmConfig {
            max_iters: self.get_or("em.max_iters", d.max_iters)?,
            convergence_tol_m: self.get_or("em.convergence_tol_m", d.convergence_tol_m)?,
            pseudo_target_spacing_m: self.get_or("em.pseudo_target_spacing_m", d.pseudo_target_spacing_m)?,
            target_noise_var: self.get_or("em.target_noise_var", d.target_noise_var)?,
        };
        em.validate()?;
        Ok(em)
    }

    pub fn vehicle(&self, hp: &HyperParams) -> Result<VehicleConfig> {
        let d = VehicleConfig::default();
        let start = self.get_vec2("vehicle.start")?.unwrap_or(d.start);
        let waypoints = match self.get_vec2_list("vehicle.waypoints")? {
            Some(w) => w,
            None => {
                let count = self.get_or("mission.waypoint_count", 8usize)?;
                let radius = self.get_or("mission.waypoint_radius_m", 15_000.0)?;
                let centre = self.get_vec2("mission.centre")?.unwrap_or(start);
                polygon_waypoints(centre, radius, count)
            }
        };
        let v = VehicleConfig {
            speed_mps: self.get_or("vehicle.speed_mps", d.speed_mps)?,
            dt_s: self.get_or("vehicle.dt_s", d.dt_s)?,
            surface_tolerance_m: self.get_or("vehicle.surface_tolerance_m", d.surface_tolerance_m)?,
            gps_noise_std_m: hp.gps_noise_std_m,
            start,
            waypoints,
            max_steps_per_cycle: self.get_or("vehicle.max_steps_per_cycle", d.max_steps_per_cycle)?,
        };
        v.validate()?;
        Ok(v)
    }

    /// Explicit grid if `grid.origin`/`grid.spacing_m`/`grid.nx`/`grid.ny`
    /// are all present, otherwise `None`.
    pub fn explicit_grid(&self) -> Result<Option<Grid>> {
        let origin = self.get_vec2("grid.origin")?;
        let spacing: Option<f64> = self.get("grid.spacing_m")?;
        let nx: Option<usize> = self.get("grid.nx")?;
        let ny: Option<usize> = self.get("grid.ny")?;
        match (origin, spacing, nx, ny) {
            (Some(o), Some(s), Some(nx), Some(ny)) => Ok(Some(Grid::new(o, s, nx, ny)?)),
            (None, None, None, None) => Ok(None),
            _ => Err(Error::Config(
                "an explicit grid needs grid.origin, grid.spacing_m, grid.nx and grid.ny".into(),
            )),
        }
    }

    /// Explicit grid, or an `n × n` grid (`grid.n`, default 20) over the
    /// bounding box of `points` padded by `ℓ/2`.
    pub fn grid_covering(&self, points: &[Vec2], hp: &HyperParams) -> Result<Grid> {
        match self.explicit_grid()? {
            Some(g) => Ok(g),
            None => Grid::covering(points, hp.lengthscale_m / 2.0, self.get_or("grid.n", 20usize)?),
        }
    }

    pub fn kernel(&self) -> Result<KernelKind> {
        self.get_str("kernel")
            .map_or(Ok(KernelKind::Incompressible), str::parse)
    }
}

fn parse_vec2(s: &str, key: &str) -> Result<Vec2> {
    let bad = || Error::Config(format!("`{key}`: expected `x,y`, got `{s}`"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let x: f64 = a.trim().parse().map_err(|_| bad())?;
    let y: f64 = b.trim().parse().map_err(|_| bad())?;
    Vec2::try_new(x, y).ok_or_else(bad)
}

/// Ground-truth field selection for simulation runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldSpec {
    /// A fresh `random_gyre` per trial seed.
    RandomGyre,
    /// The same field for every trial.
    Fixed(AnalyticField),
}

impl FieldSpec {
    pub fn resolve(&self, seed: u64) -> AnalyticField {
        match self {
            FieldSpec::RandomGyre => random_gyre(seed),
            FieldSpec::Fixed(f) => *f,
        }
    }

    fn render(&self) -> String {
        match self {
            FieldSpec::RandomGyre => "random".into(),
            FieldSpec::Fixed(f) => match f.kind() {
                crate::flowfield::FieldKind::ZeroField => "zero".into(),
                crate::flowfield::FieldKind::Uniform => {
                    let c = f.direction() * f.amplitude();
                    format!("uniform:{},{}", c.x, c.y)
                }
                crate::flowfield::FieldKind::DoubleGyre => {
                    let (lx, ly) = f.extent();
                    let (px, py) = f.phase();
                    format!("gyre:{},{},{},{},{}", f.amplitude(), lx, ly, px, py)
                }
            },
        }
    }
}

impl FromStr for FieldSpec {
    type Err = Error;

    /// `random`, `zero`, `uniform:u,v` or `gyre:A,Lx,Ly,px,py`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, args) = s.split_once(':').unwrap_or((s, ""));
        let nums = || -> Result<Vec<f64>> {
            args.split(',')
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::Config(format!("bad field argument in `{s}`")))
                })
                .collect()
        };
        match head {
            "random" => Ok(FieldSpec::RandomGyre),
            "zero" => Ok(FieldSpec::Fixed(AnalyticField::zero())),
            "uniform" => match nums()?.as_slice() {
                [u, v] => Ok(FieldSpec::Fixed(AnalyticField::uniform_from_current(Vec2::new(
                    *u, *v,
                ))?)),
                _ => Err(Error::Config(format!("`{s}`: expected uniform:u,v"))),
            },
            "gyre" => match nums()?.as_slice() {
                [a, lx, ly, px, py] => Ok(FieldSpec::Fixed(AnalyticField::double_gyre(
                    *a,
                    (*lx, *ly),
                    (*px, *py),
                )?)),
                _ => Err(Error::Config(format!("`{s}`: expected gyre:A,Lx,Ly,px,py"))),
            },
            _ => Err(Error::Config(format!("unknown field `{s}`"))),
        }
    }
}

/// Everything a simulation or Monte Carlo run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub hp: HyperParams,
    pub vehicle: VehicleConfig,
    pub em: EmConfig,
    pub kernel: KernelKind,
    pub grid: Grid,
    pub trials: usize,
    pub base_seed: u64,
    pub field: FieldSpec,
    pub emit_field_csv: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::from_kv(&KvConfig::default()).expect("defaults are valid")
    }
}

impl RunConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let hp = kv.hyper()?;
        let vehicle = kv.vehicle(&hp)?;
        let em = kv.em(&hp)?;
        let mut anchor = vehicle.waypoints.clone();
        anchor.push(vehicle.start);
        let grid = kv.grid_covering(&anchor, &hp)?;
        let trials = kv.get_or("trials", 20usize)?;
        if trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        Ok(RunConfig {
            hp,
            vehicle,
            em,
            kernel: kv.kernel()?,
            grid,
            trials,
            base_seed: kv.get_or("base_seed", 0u64)?,
            field: kv.get_str("field").map_or(Ok(FieldSpec::RandomGyre), str::parse)?,
            emit_field_csv: kv.get_or("report.field_csv", false)?,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_kv(&KvConfig::parse(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvConfig::load(path)?)
    }

    /// Fully resolved configuration in the same `key = value` format.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let v = &self.vehicle;
        let wps: Vec<String> = v.waypoints.iter().map(|w| format!("{},{}", w.x, w.y)).collect();
        let _ = writeln!(s, "hyper.lengthscale_m = {}", self.hp.lengthscale_m);
        let _ = writeln!(s, "hyper.current_variance = {}", self.hp.current_variance);
        let _ = writeln!(s, "hyper.gps_noise_std_m = {}", self.hp.gps_noise_std_m);
        let _ = writeln!(s, "vehicle.speed_mps = {}", v.speed_mps);
        let _ = writeln!(s, "vehicle.dt_s = {}", v.dt_s);
        let _ = writeln!(s, "vehicle.surface_tolerance_m = {}", v.surface_tolerance_m);
        let _ = writeln!(s, "vehicle.max_steps_per_cycle = {}", v.max_steps_per_cycle);
        let _ = writeln!(s, "vehicle.start = {},{}", v.start.x, v.start.y);
        let _ = writeln!(s, "vehicle.waypoints = {}", wps.join("; "));
        let _ = writeln!(s, "em.max_iters = {}", self.em.max_iters);
        let _ = writeln!(s, "em.convergence_tol_m = {}", self.em.convergence_tol_m);
        let _ = writeln!(s, "em.pseudo_target_spacing_m = {}", self.em.pseudo_target_spacing_m);
        let _ = writeln!(s, "em.target_noise_var = {}", self.em.target_noise_var);
        let _ = writeln!(s, "kernel = {}", self.kernel);
        let _ = writeln!(s, "field = {}", self.field.render());
        let _ = writeln!(s, "grid.origin = {},{}", self.grid.origin.x, self.grid.origin.y);
        let _ = writeln!(s, "grid.spacing_m = {}", self.grid.spacing);
        let _ = writeln!(s, "grid.nx = {}", self.grid.nx);
        let _ = writeln!(s, "grid.ny = {}", self.grid.ny);
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "base_seed = {}", self.base_seed);
        let _ = writeln!(s, "report.field_csv = {}", self.emit_field_csv);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::default();
        assert_eq!(c.hp, HyperParams::default());
        assert_eq!(c.vehicle.waypoints.len(), 8);
        assert_eq!(c.trials, 20);
        assert_eq!(c.grid.nx, 20);
        assert_eq!(c.em.pseudo_target_spacing_m, 1750.0);
        assert_eq!(c.field, FieldSpec::RandomGyre);
    }

    #[test]
    fn parses_keys_and_comments() {
        let text = "\
# a comment
hyper.lengthscale_m = 20000   # trailing
vehicle.waypoints = 1000,0; 0,1000
kernel = standard
field = uniform:0.1,0
trials = 3
";
        let c = RunConfig::parse(text).unwrap();
        assert_eq!(c.hp.lengthscale_m, 20_000.0);
        assert_eq!(
            c.vehicle.waypoints,
            vec![Vec2::new(1000.0, 0.0), Vec2::new(0.0, 1000.0)]
        );
        assert_eq!(c.kernel, KernelKind::StandardDiagonal);
        assert_eq!(c.trials, 3);
        assert_eq!(c.em.pseudo_target_spacing_m, 1000.0);
        match c.field {
            FieldSpec::Fixed(f) => assert_eq!(f.current(Vec2::ZERO), Vec2::new(0.1, 0.0)),
            _ => panic!(),
        }
    }

    #[test]
    fn render_roundtrips() {
        let mut kv = KvConfig::default();
        kv.set("field", "gyre:3000,50000,45000,0.5,1.5");
        kv.set("trials", 4);
        let c = RunConfig::from_kv(&kv).unwrap();
        let back = RunConfig::parse(&c.render()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(KvConfig::parse("nonsense"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(KvConfig::parse("foo = 1"), Err(Error::Parse { .. })));
        assert!(KvConfig::parse("trials = 1\ntrials = 2").is_err());
        assert!(RunConfig::parse("trials = 0").is_err());
        assert!(RunConfig::parse("hyper.lengthscale_m = -1").is_err());
        assert!(RunConfig::parse("grid.nx = 4").is_err());
        assert!(RunConfig::parse("vehicle.start = 1;2").is_err());
        assert!(RunConfig::parse("field = swirl").is_err());
    }
}
