//! Typed run settings. Everything is read and range-checked here, before any
//! computation starts.
//!
//! Sectionless keys apply to every subcommand:
//!
//! ```text
//! output = out          # directory for artifacts (created if missing)
//! truncation = 10       # plane-wave truncation M, 1..=24
//! ```
//!
//! `[weight]` and `[perturbation]` are described in `hexwave::config`. Each
//! subcommand reads its own section; unknown keys are rejected.

use std::path::PathBuf;
use std::sync::Arc;

use hexwave::config::{Config, PerturbationSpec, WeightSpec};
use hexwave::envelope::{EnvelopeGrid, MassSpec};
use hexwave::maxwell_te::DeskConfig;
use hexwave::modes::{line_grid, ModeKind, NewtonOptions};
use hexwave::{Error, Result};

#[derive(Debug, Clone)]
pub struct Common {
    pub output: PathBuf,
    pub truncation: usize,
    pub weight: WeightSpec,
    pub perturbation: PerturbationSpec,
}

impl Common {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys("", &["output", "truncation"])?;
        Ok(Self {
            output: PathBuf::from(cfg.string("", "output", "out")?),
            truncation: cfg.usize_in("", "truncation", 10, 1, 24)?,
            weight: WeightSpec::from_config(cfg)?,
            perturbation: PerturbationSpec::from_config(cfg)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BandSweep {
    /// `n × n` reduced grid over the Brillouin zone.
    Surface { n: usize },
    /// Γ → K → M → Γ with `points` samples per leg.
    Path { points: usize },
}

/// `[bands]`: `sweep = surface | path`, `n`, `points`, `bands`.
#[derive(Debug, Clone)]
pub struct BandsSettings {
    pub sweep: BandSweep,
    pub bands: usize,
}

impl BandsSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        const S: &str = "bands";
        cfg.check_keys(S, &["sweep", "n", "points", "bands"])?;
        let sweep = match cfg.string(S, "sweep", "surface")?.as_str() {
            "surface" => BandSweep::Surface { n: cfg.usize_in(S, "n", 9, 1, 256)? },
            "path" => BandSweep::Path { points: cfg.usize_in(S, "points", 20, 1, 2000)? },
            other => return Err(Error::Config(format!("[bands] sweep = '{other}' (expected surface or path)"))),
        };
        Ok(Self { sweep, bands: cfg.usize_in(S, "bands", 6, 1, 64)? })
    }
}

/// `[dirac]`: `fit`, `radii`.
#[derive(Debug, Clone)]
pub struct DiracSettings {
    pub fit: bool,
    pub radii: Vec<f64>,
}

impl DiracSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys("dirac", &["fit", "radii"])?;
        Ok(Self {
            fit: cfg.bool("dirac", "fit", true)?,
            radii: cfg.f64_list("dirac", "radii", &hexwave::dirac::DEFAULT_RADII, 1e-6, 0.5)?,
        })
    }
}

/// `[gap-sweep]`: `deltas`.
#[derive(Debug, Clone)]
pub struct GapSettings {
    pub deltas: Vec<f64>,
}

impl GapSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys("gap-sweep", &["deltas"])?;
        let default: Vec<f64> = (1..=10).map(|i| 0.01 * i as f64).collect();
        Ok(Self { deltas: cfg.f64_list("gap-sweep", "deltas", &default, 0.0, 1.0)? })
    }
}

/// `[low-contrast]`: `epsilons`. The perturbation is always `h·I₃`.
#[derive(Debug, Clone)]
pub struct LowContrastSettings {
    pub epsilons: Vec<f64>,
}

impl LowContrastSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        cfg.check_keys("low-contrast", &["epsilons"])?;
        Ok(Self {
            epsilons: cfg.f64_list("low-contrast", "epsilons", &[0.02, 0.01, 0.005], 1e-6, 0.5)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Initial {
    /// `(1, 1) sech(X₂) e^{-g X₁²} e^{iξX₁}`; `g = 0` gives the plane line mode.
    Line { xi: f64, gaussian: f64 },
    /// Edge packet centered at `center`.
    Packet { center: [f64; 2] },
}

/// `[evolve]`: envelope grid, mass, coefficients, nonlinearity, stepping.
///
/// Keys and defaults: `n1 = 128`, `n2 = 256`, `l1 = 80`, `l2 = 40`,
/// `mass = straight` (or `piecewise`), `flip = false`, `theta = 1`,
/// `speed = 1`, `nonlinear = false`, `p1 = 2`, `p2 = 1`, `initial = line`
/// (or `packet`), `xi = 0`, `gaussian = 0.05`, `center = 0, 0`, `dt = 0.05`,
/// `steps = 200`, `sample_every = 10`, `snapshot_every = 0`, `tube = 5`.
#[derive(Debug, Clone)]
pub struct EvolveSettings {
    pub grid: Arc<EnvelopeGrid>,
    pub mass: MassSpec,
    pub theta: f64,
    pub speed: f64,
    pub nonlinear: Option<(f64, f64)>,
    pub initial: Initial,
    pub dt: f64,
    pub steps: usize,
    pub sample_every: usize,
    pub snapshot_every: usize,
    pub tube: f64,
}

fn grid_in(cfg: &Config, s: &str, n: [usize; 2], l: [f64; 2]) -> Result<EnvelopeGrid> {
    let n1 = cfg.usize_in(s, "n1", n[0], 2, 4096)?;
    let n2 = cfg.usize_in(s, "n2", n[1], 2, 4096)?;
    let l1 = cfg.f64_in(s, "l1", l[0], 1e-3, 1e5)?;
    let l2 = cfg.f64_in(s, "l2", l[1], 1e-3, 1e5)?;
    EnvelopeGrid::new(n1, n2, l1, l2).map_err(|e| Error::Config(format!("[{s}] {e}")))
}

impl EvolveSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        const S: &str = "evolve";
        cfg.check_keys(
            S,
            &[
                "n1", "n2", "l1", "l2", "mass", "flip", "theta", "speed", "nonlinear", "p1", "p2", "initial", "xi",
                "gaussian", "center", "dt", "steps", "sample_every", "snapshot_every", "tube",
            ],
        )?;
        let grid = Arc::new(grid_in(cfg, S, [128, 256], [80.0, 40.0])?);
        let mut mass = match cfg.string(S, "mass", "straight")?.as_str() {
            "straight" => MassSpec::straight_double_wall(),
            "piecewise" => MassSpec::piecewise_double_wall(),
            other => return Err(Error::Config(format!("[evolve] mass = '{other}' (expected straight or piecewise)"))),
        };
        if cfg.bool(S, "flip", false)? {
            mass = mass.flipped();
        }
        let nonlinear = if cfg.bool(S, "nonlinear", false)? {
            Some((cfg.f64_in(S, "p1", 2.0, -1e3, 1e3)?, cfg.f64_in(S, "p2", 1.0, -1e3, 1e3)?))
        } else {
            None
        };
        let initial = match cfg.string(S, "initial", "line")?.as_str() {
            "line" => Initial::Line {
                xi: cfg.f64_in(S, "xi", 0.0, -1e3, 1e3)?,
                gaussian: cfg.f64_in(S, "gaussian", 0.05, 0.0, 1e3)?,
            },
            "packet" => {
                let c = cfg.f64_list(S, "center", &[0.0, 0.0], -1e5, 1e5)?;
                if c.len() != 2 {
                    return Err(Error::Config("[evolve] center needs two numbers".into()));
                }
                Initial::Packet { center: [c[0], c[1]] }
            }
            other => return Err(Error::Config(format!("[evolve] initial = '{other}' (expected line or packet)"))),
        };
        Ok(Self {
            grid,
            mass,
            theta: cfg.f64_in(S, "theta", 1.0, -1e3, 1e3)?,
            speed: cfg.f64_in(S, "speed", 1.0, 1e-6, 1e3)?,
            nonlinear,
            initial,
            dt: cfg.f64_in(S, "dt", 0.05, 1e-8, 10.0)?,
            steps: cfg.usize_in(S, "steps", 200, 1, 10_000_000)?,
            sample_every: cfg.usize_in(S, "sample_every", 10, 0, 10_000_000)?,
            snapshot_every: cfg.usize_in(S, "snapshot_every", 0, 0, 10_000_000)?,
            tube: cfg.f64_in(S, "tube", 5.0, 0.0, 1e5)?,
        })
    }
}

/// `[solve-mode]`: `kind = line | lump`, `mu`, `p1`, `p2`, grid, Newton
/// controls and an optional continuation list `mus`.
#[derive(Debug, Clone)]
pub struct ModeSettings {
    pub kind: ModeKind,
    pub mu: f64,
    pub p1: f64,
    pub p2: f64,
    pub grid: Arc<EnvelopeGrid>,
    pub newton: NewtonOptions,
    pub mus: Vec<f64>,
}

impl ModeSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        const S: &str = "solve-mode";
        cfg.check_keys(S, &["kind", "mu", "p1", "p2", "n1", "n2", "l1", "l2", "tol", "max_outer", "max_inner", "mus"])?;
        let tau = 2.0 * std::f64::consts::PI;
        let (kind, grid) = match cfg.string(S, "kind", "line")?.as_str() {
            "line" => {
                if cfg.get(S, "n1")?.is_some() || cfg.get(S, "l1")?.is_some() {
                    return Err(Error::Config("[solve-mode] line modes fix n1 = 2; drop n1/l1".into()));
                }
                let n2 = cfg.usize_in(S, "n2", 256, 4, 1 << 16)?;
                let l2 = cfg.f64_in(S, "l2", 10.0 * tau, 1e-3, 1e5)?;
                (ModeKind::Line, line_grid(n2, l2).map_err(|e| Error::Config(format!("[{S}] {e}")))?)
            }
            "lump" => (ModeKind::Lump, grid_in(cfg, S, [256, 256], [20.0 * tau, 20.0 * tau])?),
            other => return Err(Error::Config(format!("[solve-mode] kind = '{other}' (expected line or lump)"))),
        };
        let d = NewtonOptions::default();
        let newton = NewtonOptions {
            tol: cfg.f64_in(S, "tol", d.tol, 1e-15, 1.0)?,
            max_outer: cfg.usize_in(S, "max_outer", d.max_outer, 1, 100_000)?,
            max_inner: cfg.usize_in(S, "max_inner", d.max_inner, 1, 1_000_000)?,
            ..d
        };
        Ok(Self {
            kind,
            mu: cfg.f64_in(S, "mu", -0.8, -1e3, 1e3)?,
            p1: cfg.f64_in(S, "p1", 2.0, -1e3, 1e3)?,
            p2: cfg.f64_in(S, "p2", 1.0, -1e3, 1e3)?,
            grid: Arc::new(grid),
            newton,
            mus: cfg.f64_list(S, "mus", &[], -1e3, 1e3)?,
        })
    }
}

/// `[compare]`: desk-scale Maxwell run against the envelope prediction.
/// Keys mirror [`DeskConfig`]; `dt = 0` picks 90% of the stability bound.
/// `refine = true` repeats the run at doubled resolution.
#[derive(Debug, Clone)]
pub struct CompareSettings {
    pub desk: DeskConfig,
    pub refine: bool,
}

fn pair(cfg: &Config, s: &str, key: &str, default: [usize; 2], lo: usize, hi: usize) -> Result<[usize; 2]> {
    let v = cfg.f64_list(s, key, &[default[0] as f64, default[1] as f64], lo as f64, hi as f64)?;
    if v.len() != 2 || v.iter().any(|x| x.fract() != 0.0) {
        return Err(Error::Config(format!("[{s}] {key} needs two integers")));
    }
    Ok([v[0] as usize, v[1] as usize])
}

impl CompareSettings {
    pub fn from_config(cfg: &Config) -> Result<Self> {
        const S: &str = "compare";
        cfg.check_keys(
            S,
            &[
                "cells", "per_cell", "delta", "amplitude", "gaussian", "t_end", "dt", "samples", "envelope_grid",
                "envelope_dt", "tube", "boundary_tol", "refine", "snapshots",
            ],
        )?;
        let d = DeskConfig::default();
        let dt = cfg.f64_in(S, "dt", 0.0, 0.0, 10.0)?;
        let desk = DeskConfig {
            cells: pair(cfg, S, "cells", d.cells, 1, 4096)?,
            per_cell: pair(cfg, S, "per_cell", d.per_cell, 1, 256)?,
            delta: cfg.f64_in(S, "delta", d.delta, 1e-4, 1.0)?,
            amplitude: cfg.f64_in(S, "amplitude", d.amplitude, 1e-6, 1e3)?,
            gaussian: cfg.f64_in(S, "gaussian", d.gaussian, 1e-6, 1e3)?,
            t_end: cfg.f64_in(S, "t_end", d.t_end, 1e-6, 1e6)?,
            dt: (dt > 0.0).then_some(dt),
            samples: cfg.usize_in(S, "samples", d.samples, 1, 100_000)?,
            snapshots: cfg.usize_in(S, "snapshots", d.snapshots, 0, 10_000)?,
            envelope_grid: pair(cfg, S, "envelope_grid", d.envelope_grid, 2, 4096)?,
            envelope_dt: cfg.f64_in(S, "envelope_dt", d.envelope_dt, 1e-8, 1.0)?,
            tube: cfg.f64_in(S, "tube", d.tube, 0.0, 1e5)?,
            boundary_tol: cfg.f64_in(S, "boundary_tol", d.boundary_tol, 0.0, 1.0)?,
        };
        Ok(Self { desk, refine: cfg.bool(S, "refine", false)? })
    }
}
