//! Pseudo-spectral RK4 solver for the nonlinear Dirac envelope system
//!
//! `i∂_T α + C(iσ₁∂₁ - iσ₂∂₂)α + θ κ(X) σ₃ α + γ(|α₁|, |α₂|) α = 0`
//!
//! on a periodic rectangle. `C = θ = 1` is the rescaled form; other values
//! solve the unscaled system directly.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spectral::{derivative_wavenumbers, Fft2};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// RK4 stability limit on `dt·ν` along the imaginary axis is `2√2`; this
/// keeps a small margin.
pub const RK4_STABILITY: f64 = 2.8;

/// Periodic grid on `[-L₁/2, L₁/2) × [-L₂/2, L₂/2)` with cell-centred nodes
/// `x_j = -L/2 + (j + 1/2)Δ`. Arrays are row-major `a[i1 * n2 + i2]`.
#[derive(Debug, Clone)]
pub struct EnvelopeGrid {
    pub n1: usize,
    pub n2: usize,
    pub l1: f64,
    pub l2: f64,
    fft: Fft2,
    kd1: Vec<f64>,
    kd2: Vec<f64>,
}

impl EnvelopeGrid {
    pub fn new(n1: usize, n2: usize, l1: f64, l2: f64) -> Result<Self> {
        if !n1.is_power_of_two() || !n2.is_power_of_two() || n1 < 2 || n2 < 2 {
            return Err(Error::InvalidInput(format!("grid {n1}x{n2} must be powers of two >= 2")));
        }
        if !(l1 > 0.0 && l2 > 0.0 && l1.is_finite() && l2.is_finite()) {
            return Err(Error::InvalidInput(format!("extents {l1} x {l2} must be positive")));
        }
        Ok(Self {
            n1,
            n2,
            l1,
            l2,
            fft: Fft2::new(n1, n2),
            kd1: derivative_wavenumbers(n1, l1),
            kd2: derivative_wavenumbers(n2, l2),
        })
    }

    /// 512×256 on `[-40π, 40π) × [-20π, 20π)`.
    pub fn default_grid() -> Self {
        Self::new(512, 256, 80.0 * PI, 40.0 * PI).expect("default grid is valid")
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> [f64; 2] {
        [self.l1 / self.n1 as f64, self.l2 / self.n2 as f64]
    }

    pub fn x1(&self, i: usize) -> f64 {
        -0.5 * self.l1 + (i as f64 + 0.5) * self.l1 / self.n1 as f64
    }

    pub fn x2(&self, j: usize) -> f64 {
        -0.5 * self.l2 + (j as f64 + 0.5) * self.l2 / self.n2 as f64
    }

    pub fn point(&self, idx: usize) -> [f64; 2] {
        [self.x1(idx / self.n2), self.x2(idx % self.n2)]
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.spacing();
        h[0] * h[1]
    }

    /// Largest `|k|` of the derivative symbol.
    pub fn max_wavenumber(&self) -> f64 {
        let m1 = self.kd1.iter().fold(0.0f64, |a, &k| a.max(k.abs()));
        let m2 = self.kd2.iter().fold(0.0f64, |a, &k| a.max(k.abs()));
        (m1 * m1 + m2 * m2).sqrt()
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    pub fn derivative_wavenumbers(&self) -> (&[f64], &[f64]) {
        (&self.kd1, &self.kd2)
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> C64) -> Vec<C64> {
        (0..self.len()).map(|idx| {
            let [a, b] = self.point(idx);
            f(a, b)
        }).collect()
    }
}

/// `tanh(w d)·tanh(w(L/2 - |d|))` for `d` already wrapped into `[-L/2, L/2)`:
/// a wall at `d = 0` and a compensating one at `|d| = L/2`.
pub fn double_wall(d: f64, l: f64, w: f64) -> f64 {
    (w * d).tanh() * (w * (0.5 * l - d.abs())).tanh()
}

/// Wraps `x` into `[-L/2, L/2)`.
pub fn wrap(x: f64, l: f64) -> f64 {
    x - l * (x / l + 0.5).floor()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
}

/// Edge curve as a graph `normal = f(along)`.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeShape {
    Straight { offset: f64 },
    /// Polyline through `nodes`, flat outside, kinks rounded by softplus of
    /// width `smoothing`.
    Piecewise { nodes: Vec<[f64; 2]>, smoothing: f64 },
}

fn softplus(u: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return u.max(0.0);
    }
    let z = u / s;
    s * (z.max(0.0) + (-z.abs()).exp().ln_1p())
}

impl EdgeShape {
    /// Trapezoidal bump with 45° flanks: flat at 0, rising to 12 between
    /// `X₁ = -24` and `-12`, flat to `12`, falling back by `24`.
    pub fn piecewise_preset() -> Self {
        EdgeShape::Piecewise {
            nodes: vec![[-24.0, 0.0], [-12.0, 12.0], [12.0, 12.0], [24.0, 0.0]],
            smoothing: 1.0,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            EdgeShape::Straight { offset } => *offset,
            EdgeShape::Piecewise { nodes, smoothing } => {
                if nodes.is_empty() {
                    return 0.0;
                }
                let slope = |k: usize| -> f64 {
                    if k + 1 >= nodes.len() {
                        0.0
                    } else {
                        (nodes[k + 1][1] - nodes[k][1]) / (nodes[k + 1][0] - nodes[k][0])
                    }
                };
                let mut f = nodes[0][1];
                let mut prev = 0.0;
                for (k, n) in nodes.iter().enumerate() {
                    let m = slope(k);
                    f += (m - prev) * softplus(t - n[0], *smoothing);
                    prev = m;
                }
                f
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MassKind {
    StraightEdge,
    CurvedEdge,
    DoubleWall,
    Custom,
}

/// Construction parameters of a [`MassProfile`].
#[derive(Clone)]
pub enum MassSpec {
    /// `κ = s·tanh(w(f(t) - n))` without wrapping; not periodic.
    Edge { along: Axis, shape: EdgeShape, sign: f64, steepness: f64 },
    /// Same edge with a compensating wall half a period away:
    /// `κ = s·tanh(w d)·tanh(w(L/2 - |d|))`, `d = wrap(f(t) - n)`.
    DoubleWall { along: Axis, shape: EdgeShape, sign: f64, steepness: f64 },
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for MassSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MassSpec::Edge { along, shape, sign, steepness } => f
                .debug_struct("Edge")
                .field("along", along)
                .field("shape", shape)
                .field("sign", sign)
                .field("steepness", steepness)
                .finish(),
            MassSpec::DoubleWall { along, shape, sign, steepness } => f
                .debug_struct("DoubleWall")
                .field("along", along)
                .field("shape", shape)
                .field("sign", sign)
                .field("steepness", steepness)
                .finish(),
            MassSpec::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

impl MassSpec {
    /// `κ = tanh(-X₂)` wrapped as a double wall.
    pub fn straight_double_wall() -> Self {
        MassSpec::DoubleWall {
            along: Axis::X1,
            shape: EdgeShape::Straight { offset: 0.0 },
            sign: 1.0,
            steepness: 1.0,
        }
    }

    pub fn piecewise_double_wall() -> Self {
        MassSpec::DoubleWall {
            along: Axis::X1,
            shape: EdgeShape::piecewise_preset(),
            sign: 1.0,
            steepness: 1.0,
        }
    }

    /// Same profile with `κ → -κ`.
    pub fn flipped(&self) -> Self {
        match self.clone() {
            MassSpec::Edge { along, shape, sign, steepness } => MassSpec::Edge { along, shape, sign: -sign, steepness },
            MassSpec::DoubleWall { along, shape, sign, steepness } => {
                MassSpec::DoubleWall { along, shape, sign: -sign, steepness }
            }
            MassSpec::Custom(f) => MassSpec::Custom(Arc::new(move |a, b| -f(a, b))),
        }
    }
}

/// Edge-localized zero mode of the linear system at a locally straight edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeState {
    pub spinor: [C64; 2],
    /// Transverse decay rate `|M₀|/C`.
    pub decay: f64,
    /// Transport direction along the edge axis, `±1`.
    pub direction: f64,
    pub along: Axis,
}

#[derive(Debug, Clone)]
pub struct MassProfile {
    pub kind: MassKind,
    pub spec: MassSpec,
    pub kappa: Vec<f64>,
    /// Distance of every node to the physical edge.
    pub edge_distance: Vec<f64>,
    pub wall_steepness: f64,
    pub periodic: bool,
}

fn along_normal(along: Axis, p: [f64; 2]) -> (f64, f64) {
    match along {
        Axis::X1 => (p[0], p[1]),
        Axis::X2 => (p[1], p[0]),
    }
}

fn extents(along: Axis, grid: &EnvelopeGrid) -> (f64, f64) {
    match along {
        Axis::X1 => (grid.l1, grid.l2),
        Axis::X2 => (grid.l2, grid.l1),
    }
}

impl MassProfile {
    pub fn build(spec: MassSpec, grid: &EnvelopeGrid) -> Result<Self> {
        let (kind, kappa, steep, curve) = match &spec {
            MassSpec::Edge { along, shape, sign, steepness } | MassSpec::DoubleWall { along, shape, sign, steepness } => {
                if !(steepness.is_finite() && *steepness > 0.0) || sign.abs() != 1.0 {
                    return Err(Error::InvalidInput("mass needs sign ±1 and positive steepness".into()));
                }
                let wrapped = matches!(spec, MassSpec::DoubleWall { .. });
                let (_, ln) = extents(*along, grid);
                let kappa: Vec<f64> = (0..grid.len())
                    .map(|idx| {
                        let (t, n) = along_normal(*along, grid.point(idx));
                        let d = shape.eval(t) - n;
                        if wrapped {
                            let d = wrap(d, ln);
                            sign * double_wall(d, ln, *steepness)
                        } else {
                            sign * (steepness * d).tanh()
                        }
                    })
                    .collect();
                let kind = match (wrapped, shape) {
                    (true, _) => MassKind::DoubleWall,
                    (false, EdgeShape::Straight { .. }) => MassKind::StraightEdge,
                    (false, _) => MassKind::CurvedEdge,
                };
                let curve = edge_polyline(*along, shape, grid);
                (kind, kappa, *steepness, curve)
            }
            MassSpec::Custom(f) => {
                let kappa: Vec<f64> = (0..grid.len())
                    .map(|idx| {
                        let [a, b] = grid.point(idx);
                        f(a, b)
                    })
                    .collect();
                let curve = zero_crossings(&kappa, grid);
                if curve.is_empty() {
                    log::warn!("custom mass never changes sign; there is no topological edge");
                }
                (MassKind::Custom, kappa, 1.0, curve)
            }
        };
        let edge_distance = distances(grid, &curve);
        let periodic = is_periodic(&kappa, grid);
        Ok(Self {
            kind,
            spec,
            kappa,
            edge_distance,
            wall_steepness: steep,
            periodic,
        })
    }

    pub fn eval_kappa(&self, x1: f64, x2: f64) -> f64 {
        match &self.spec {
            MassSpec::Custom(f) => f(x1, x2),
            MassSpec::Edge { along, shape, sign, steepness } => {
                let (t, n) = along_normal(*along, [x1, x2]);
                sign * (steepness * (shape.eval(t) - n)).tanh()
            }
            MassSpec::DoubleWall { .. } => {
                // Periodic profiles are only defined through the grid.
                f64::NAN
            }
        }
    }

    /// Edge state for mass `θκ` and speed `C` at a locally flat part of the
    /// edge; `None` for custom profiles.
    pub fn edge_state(&self, theta: f64, speed: f64) -> Option<EdgeState> {
        let (along, sign, w) = match &self.spec {
            MassSpec::Edge { along, sign, steepness, .. } | MassSpec::DoubleWall { along, sign, steepness, .. } => {
                (*along, *sign, *steepness)
            }
            MassSpec::Custom(_) => return None,
        };
        // Across the edge κ ≈ M₀/θ · tanh(n - f) with n the normal coordinate.
        let m0 = -theta * sign * w;
        let one = C64::new(1.0, 0.0);
        let (spinor, direction) = match along {
            Axis::X1 => {
                if m0 < 0.0 {
                    ([one, one], 1.0)
                } else {
                    ([one, -one], -1.0)
                }
            }
            Axis::X2 => {
                if m0 > 0.0 {
                    ([one, -I], 1.0)
                } else {
                    ([one, I], -1.0)
                }
            }
        };
        Some(EdgeState {
            spinor,
            decay: m0.abs() / speed,
            direction,
            along,
        })
    }
}

fn edge_polyline(along: Axis, shape: &EdgeShape, grid: &EnvelopeGrid) -> Vec<[f64; 2]> {
    let (lt, _) = extents(along, grid);
    let n = 4 * match along {
        Axis::X1 => grid.n1,
        Axis::X2 => grid.n2,
    };
    (0..n)
        .map(|j| {
            let t = -0.5 * lt + (j as f64 + 0.5) * lt / n as f64;
            let v = shape.eval(t);
            match along {
                Axis::X1 => [t, v],
                Axis::X2 => [v, t],
            }
        })
        .collect()
}

fn zero_crossings(kappa: &[f64], grid: &EnvelopeGrid) -> Vec<[f64; 2]> {
    let mut pts = Vec::new();
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let a = kappa[i * grid.n2 + j];
            for (ii, jj) in [((i + 1) % grid.n1, j), (i, (j + 1) % grid.n2)] {
                let b = kappa[ii * grid.n2 + jj];
                if a == 0.0 || a * b < 0.0 {
                    let s = if a == 0.0 { 0.0 } else { a / (a - b) };
                    let p = grid.point(i * grid.n2 + j);
                    let q = grid.point(ii * grid.n2 + jj);
                    let dq = [wrap(q[0] - p[0], grid.l1), wrap(q[1] - p[1], grid.l2)];
                    pts.push([p[0] + s * dq[0], p[1] + s * dq[1]]);
                }
            }
        }
    }
    pts
}

fn distances(grid: &EnvelopeGrid, curve: &[[f64; 2]]) -> Vec<f64> {
    if curve.is_empty() {
        return vec![f64::INFINITY; grid.len()];
    }
    // Consecutive samples closer than this are joined into segments.
    let h = grid.spacing();
    let join = 4.0 * h[0].max(h[1]);
    (0..grid.len())
        .map(|idx| {
            let p = grid.point(idx);
            let rel = |c: &[f64; 2]| [wrap(p[0] - c[0], grid.l1), wrap(p[1] - c[1], grid.l2)];
            let mut best = f64::INFINITY;
            for (k, c) in curve.iter().enumerate() {
                let a = rel(c);
                if a[0].abs() >= best + join {
                    continue;
                }
                best = best.min(a[0].hypot(a[1]));
                if let Some(n) = curve.get(k + 1) {
                    let d = [n[0] - c[0], n[1] - c[1]];
                    let len2 = d[0] * d[0] + d[1] * d[1];
                    if len2 > 0.0 && len2.sqrt() < join {
                        let s = ((a[0] * d[0] + a[1] * d[1]) / len2).clamp(0.0, 1.0);
                        best = best.min((a[0] - s * d[0]).hypot(a[1] - s * d[1]));
                    }
                }
            }
            best
        })
        .collect()
}

fn is_periodic(kappa: &[f64], grid: &EnvelopeGrid) -> bool {
    let at = |i: usize, j: usize| kappa[i * grid.n2 + j];
    let mut interior = 0.0f64;
    let mut boundary = 0.0f64;
    for i in 0..grid.n1 {
        for j in 0..grid.n2 {
            let dj = (at(i, (j + 1) % grid.n2) - at(i, j)).abs();
            let di = (at((i + 1) % grid.n1, j) - at(i, j)).abs();
            if j + 1 == grid.n2 {
                boundary = boundary.max(dj);
            } else {
                interior = interior.max(dj);
            }
            if i + 1 == grid.n1 {
                boundary = boundary.max(di);
            } else {
                interior = interior.max(di);
            }
        }
    }
    boundary <= 2.0 * interior + 1e-12
}

/// Envelope state `(α₁, α₂)` at time `T`.
#[derive(Debug, Clone)]
pub struct EnvelopeField {
    pub grid: Arc<EnvelopeGrid>,
    pub alpha1: Vec<C64>,
    pub alpha2: Vec<C64>,
    pub time: f64,
    pub p1: f64,
    pub p2: f64,
    /// `∫|α|²` at `T = 0`.
    pub norm0: f64,
}

impl EnvelopeField {
    pub fn new(grid: Arc<EnvelopeGrid>, alpha1: Vec<C64>, alpha2: Vec<C64>) -> Result<Self> {
        if alpha1.len() != grid.len() || alpha2.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "components have {} and {} nodes, grid has {}",
                alpha1.len(),
                alpha2.len(),
                grid.len()
            )));
        }
        let mut f = Self {
            grid,
            alpha1,
            alpha2,
            time: 0.0,
            p1: 0.0,
            p2: 0.0,
            norm0: 0.0,
        };
        f.norm0 = f.norm();
        if !f.norm0.is_finite() {
            return Err(Error::InvalidInput("initial data is not finite".into()));
        }
        Ok(f)
    }

    pub fn zeros(grid: Arc<EnvelopeGrid>) -> Self {
        let n = grid.len();
        Self::new(grid, vec![ZERO; n], vec![ZERO; n]).expect("sizes match")
    }

    pub fn with_nonlinearity(mut self, p1: f64, p2: f64) -> Self {
        self.p1 = p1;
        self.p2 = p2;
        self
    }

    /// `∫(|α₁|² + |α₂|²) dX`.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.alpha1.iter().zip(&self.alpha2).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum();
        s * self.grid.cell_area()
    }

    pub fn energy_density(&self) -> Vec<f64> {
        self.alpha1.iter().zip(&self.alpha2).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.alpha1.iter().chain(&self.alpha2).fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.alpha1
            .iter()
            .zip(&other.alpha1)
            .chain(self.alpha2.iter().zip(&other.alpha2))
            .fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.alpha1.iter().chain(&self.alpha2).all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut f = self.clone();
        f.alpha1.iter_mut().chain(f.alpha2.iter_mut()).for_each(|z| *z *= c);
        f.norm0 = f.norm();
        f
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid.len() != other.grid.len() {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        let mut f = self.clone();
        f.alpha1.iter_mut().zip(&other.alpha1).for_each(|(a, b)| *a += b);
        f.alpha2.iter_mut().zip(&other.alpha2).for_each(|(a, b)| *a += b);
        f.norm0 = f.norm();
        Ok(f)
    }
}

/// `α = (1, 1) sech(X₂) g(X₁) e^{iξX₁}`.
pub fn linear_line_mode(grid: Arc<EnvelopeGrid>, xi: f64, g: impl Fn(f64) -> C64) -> EnvelopeField {
    let a = grid.sample(|x1, x2| g(x1) * C64::from_polar(1.0 / x2.cosh(), xi * x1));
    EnvelopeField::new(grid, a.clone(), a).expect("sizes match")
}

/// Exact linear solution on a straight edge: the line mode translated by
/// `T` along `X₁`, periodically wrapped.
pub fn translated_line_mode(grid: Arc<EnvelopeGrid>, xi: f64, g: impl Fn(f64) -> C64, t: f64) -> EnvelopeField {
    let l1 = grid.l1;
    let a = grid.sample(|x1, x2| {
        let s = wrap(x1 - t, l1);
        g(s) * C64::from_polar(1.0 / x2.cosh(), xi * s)
    });
    let mut f = EnvelopeField::new(grid, a.clone(), a).expect("sizes match");
    f.time = t;
    f
}

/// Edge packet `spinor · sech^{|M₀|/C}(n - n₀) e^{-0.2 (t - t₀)²}` with `n`
/// the coordinate across the edge and `t` the one along it.
pub fn curved_edge_initial(
    grid: Arc<EnvelopeGrid>,
    mass: &MassProfile,
    center: [f64; 2],
    theta: f64,
    speed: f64,
) -> Result<EnvelopeField> {
    let state = mass
        .edge_state(theta, speed)
        .ok_or_else(|| Error::InvalidInput("edge packets need an edge-type mass profile".into()))?;
    if let MassSpec::Edge { shape, along, .. } | MassSpec::DoubleWall { shape, along, .. } = &mass.spec {
        let (t, n) = along_normal(*along, center);
        if (shape.eval(t) - n).abs() > 1e-6 {
            log::warn!("packet center ({}, {}) is off the edge", center[0], center[1]);
        }
    }
    let (l1, l2) = (grid.l1, grid.l2);
    let profile = |x1: f64, x2: f64| -> f64 {
        let d1 = wrap(x1 - center[0], l1);
        let d2 = wrap(x2 - center[1], l2);
        let (t, n) = along_normal(state.along, [d1, d2]);
        (1.0 / n.cosh()).powf(state.decay) * (-0.2 * t * t).exp()
    };
    let a1 = grid.sample(|a, b| state.spinor[0] * profile(a, b));
    let a2 = grid.sample(|a, b| state.spinor[1] * profile(a, b));
    EnvelopeField::new(grid, a1, a2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportObservables {
    pub time: f64,
    pub norm: f64,
    pub energy_center: [f64; 2],
    pub edge_fraction: f64,
    pub leakage: f64,
}

pub fn observables(state: &EnvelopeField, mass: &MassProfile, tube_half_width: f64) -> TransportObservables {
    let g = &state.grid;
    let e = state.energy_density();
    let total: f64 = e.iter().sum();
    let mut c = [0.0; 2];
    let mut inside = 0.0;
    for (idx, &w) in e.iter().enumerate() {
        let p = g.point(idx);
        c[0] += w * p[0];
        c[1] += w * p[1];
        if mass.edge_distance[idx] <= tube_half_width {
            inside += w;
        }
    }
    let (center, frac) = if total > 0.0 {
        ([c[0] / total, c[1] / total], inside / total)
    } else {
        ([0.0, 0.0], 0.0)
    };
    TransportObservables {
        time: state.time,
        norm: total * g.cell_area(),
        energy_center: center,
        edge_fraction: frac,
        leakage: 1.0 - frac,
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub dt: f64,
    pub steps: usize,
    pub linear_only: bool,
    /// Cone speed `C`.
    pub speed: f64,
    /// Mass coefficient `θ`; the mass term is `θκ`.
    pub theta: f64,
    /// Observables every this many steps (0 disables).
    pub sample_every: usize,
    /// Snapshots every this many steps (0 disables).
    pub snapshot_every: usize,
    pub tube_half_width: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            dt: 0.1,
            steps: 100,
            linear_only: true,
            speed: 1.0,
            theta: 1.0,
            sample_every: 10,
            snapshot_every: 0,
            tube_half_width: 5.0,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub observables: Vec<TransportObservables>,
    pub snapshots: Vec<EnvelopeField>,
}

impl Trajectory {
    /// Least-squares velocity of the energy center.
    pub fn velocity(&self) -> [f64; 2] {
        let t: Vec<f64> = self.observables.iter().map(|o| o.time).collect();
        let mut v = [0.0; 2];
        for (c, vc) in v.iter_mut().enumerate() {
            let y: Vec<f64> = self.observables.iter().map(|o| o.energy_center[c]).collect();
            *vc = crate::dirac::linear_fit(&t, &y).0;
        }
        v
    }

    pub fn min_edge_fraction(&self) -> f64 {
        self.observables.iter().map(|o| o.edge_fraction).fold(1.0, f64::min)
    }
}

/// Time stepper holding FFT scratch space.
pub struct DiracStepper<'a> {
    grid: &'a EnvelopeGrid,
    mass: Vec<f64>,
    speed: f64,
    p: Option<(f64, f64)>,
    b1: Vec<C64>,
    b2: Vec<C64>,
}

impl<'a> DiracStepper<'a> {
    pub fn new(grid: &'a EnvelopeGrid, kappa: &[f64], theta: f64, speed: f64, nonlinear: Option<(f64, f64)>) -> Self {
        let n = grid.len();
        Self {
            grid,
            mass: kappa.iter().map(|k| theta * k).collect(),
            speed,
            p: nonlinear,
            b1: vec![ZERO; n],
            b2: vec![ZERO; n],
        }
    }

    /// Largest frequency of the linear generator plus the nonlinear shift
    /// for amplitude `amp`.
    pub fn frequency_bound(&self, amp: f64) -> f64 {
        let m = self.mass.iter().fold(0.0f64, |a, k| a.max(k.abs()));
        let nl = self.p.map_or(0.0, |(p1, p2)| (p1.abs() + p2.abs()) * amp * amp);
        self.speed * self.grid.max_wavenumber() + m + nl
    }

    /// `(Hα)₁ = C(i∂₁ - ∂₂)α₂ + mα₁`, `(Hα)₂ = C(i∂₁ + ∂₂)α₁ - mα₂`.
    pub fn apply_h(&mut self, a1: &[C64], a2: &[C64], out1: &mut [C64], out2: &mut [C64]) {
        let g = self.grid;
        let (k1, k2) = g.derivative_wavenumbers();
        self.b1.copy_from_slice(a2);
        self.b2.copy_from_slice(a1);
        g.fft().forward(&mut self.b1);
        g.fft().forward(&mut self.b2);
        let c = self.speed;
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                let idx = i * g.n2 + j;
                self.b1[idx] *= C64::new(-c * k1[i], -c * k2[j]);
                self.b2[idx] *= C64::new(-c * k1[i], c * k2[j]);
            }
        }
        g.fft().inverse(&mut self.b1);
        g.fft().inverse(&mut self.b2);
        for idx in 0..g.len() {
            out1[idx] = self.b1[idx] + self.mass[idx] * a1[idx];
            out2[idx] = self.b2[idx] - self.mass[idx] * a2[idx];
        }
    }

    /// `∂_T α = i(Hα + γα)`.
    pub fn rhs(&mut self, a1: &[C64], a2: &[C64], out1: &mut [C64], out2: &mut [C64]) {
        self.apply_h(a1, a2, out1, out2);
        if let Some((p1, p2)) = self.p {
            for idx in 0..a1.len() {
                let (s1, s2) = (a1[idx].norm_sqr(), a2[idx].norm_sqr());
                out1[idx] += (p1 * s1 + p2 * s2) * a1[idx];
                out2[idx] += (p1 * s2 + p2 * s1) * a2[idx];
            }
        }
        for z in out1.iter_mut().chain(out2.iter_mut()) {
            *z *= I;
        }
    }

    pub fn rk4_step(&mut self, a1: &mut [C64], a2: &mut [C64], dt: f64) {
        let n = a1.len();
        let mut k = [[vec![ZERO; n], vec![ZERO; n]], [vec![ZERO; n], vec![ZERO; n]], [vec![ZERO; n], vec![ZERO; n]], [vec![ZERO; n], vec![ZERO; n]]];
        let mut t1 = vec![ZERO; n];
        let mut t2 = vec![ZERO; n];
        let coef = [0.5 * dt, 0.5 * dt, dt];
        {
            let [ref mut o1, ref mut o2] = k[0];
            self.rhs(a1, a2, o1, o2);
        }
        for s in 0..3 {
            for idx in 0..n {
                t1[idx] = a1[idx] + coef[s] * k[s][0][idx];
                t2[idx] = a2[idx] + coef[s] * k[s][1][idx];
            }
            let [ref mut o1, ref mut o2] = k[s + 1];
            self.rhs(&t1, &t2, o1, o2);
        }
        let w = dt / 6.0;
        for idx in 0..n {
            a1[idx] += w * (k[0][0][idx] + 2.0 * k[1][0][idx] + 2.0 * k[2][0][idx] + k[3][0][idx]);
            a2[idx] += w * (k[0][1][idx] + 2.0 * k[1][1][idx] + 2.0 * k[2][1][idx] + k[3][1][idx]);
        }
    }
}

/// Advances `state` in place. On blowup the last finite state is restored
/// and an error is returned.
pub fn evolve(state: &mut EnvelopeField, mass: &MassProfile, opts: &EvolveOptions) -> Result<Trajectory> {
    let grid = state.grid.clone();
    if mass.kappa.len() != grid.len() {
        return Err(Error::GridMismatch("mass profile and field grids differ".into()));
    }
    if !mass.periodic {
        return Err(Error::InvalidInput(
            "mass profile jumps across the periodic boundary; use a double wall".into(),
        ));
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) || !(opts.speed > 0.0) {
        return Err(Error::InvalidInput("dt and speed must be positive".into()));
    }
    let nl = if opts.linear_only { None } else { Some((state.p1, state.p2)) };
    let mut stepper = DiracStepper::new(&grid, &mass.kappa, opts.theta, opts.speed, nl);
    let bound = RK4_STABILITY / stepper.frequency_bound(state.max_abs());
    if opts.dt > bound {
        return Err(Error::StepTooLarge { dt: opts.dt, bound });
    }
    let mut traj = Trajectory::default();
    let record = |traj: &mut Trajectory, s: &EnvelopeField, step: usize| {
        if opts.sample_every > 0 && step % opts.sample_every == 0 {
            traj.observables.push(observables(s, mass, opts.tube_half_width));
        }
        if opts.snapshot_every > 0 && step % opts.snapshot_every == 0 {
            traj.snapshots.push(s.clone());
        }
    };
    record(&mut traj, state, 0);
    let limit = 1e6 * state.norm0.max(state.norm()).max(f64::MIN_POSITIVE);
    let mut last = (state.alpha1.clone(), state.alpha2.clone(), state.time);
    for step in 1..=opts.steps {
        stepper.rk4_step(&mut state.alpha1, &mut state.alpha2, opts.dt);
        state.time += opts.dt;
        let n = state.norm();
        if !n.is_finite() || n > limit {
            state.alpha1 = last.0;
            state.alpha2 = last.1;
            state.time = last.2;
            return Err(Error::Blowup { step, time: state.time + opts.dt });
        }
        record(&mut traj, state, step);
        if step < opts.steps {
            last.0.copy_from_slice(&state.alpha1);
            last.1.copy_from_slice(&state.alpha2);
            last.2 = state.time;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small() -> Arc<EnvelopeGrid> {
        Arc::new(EnvelopeGrid::new(64, 64, 40.0, 40.0).unwrap())
    }

    #[test]
    fn grid_validation_and_nodes() {
        assert!(EnvelopeGrid::new(60, 64, 1.0, 1.0).is_err());
        assert!(EnvelopeGrid::new(64, 64, 0.0, 1.0).is_err());
        let g = small();
        assert_abs_diff_eq!(g.x1(0) + g.x1(63), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.spacing()[0], 40.0 / 64.0);
    }

    #[test]
    fn wrap_range() {
        assert_abs_diff_eq!(wrap(7.0, 10.0), -3.0);
        assert_abs_diff_eq!(wrap(-5.0, 10.0), -5.0);
        assert_abs_diff_eq!(wrap(5.0, 10.0), -5.0);
    }

    #[test]
    fn straight_mass_signs() {
        let g = small();
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        assert_eq!(m.kind, MassKind::DoubleWall);
        assert!(m.periodic);
        for idx in 0..g.len() {
            let [_, x2] = g.point(idx);
            if x2.abs() < 10.0 {
                assert!(m.kappa[idx] * x2 <= 0.0);
                assert_abs_diff_eq!(m.kappa[idx], (-x2).tanh(), epsilon = 1e-8);
            }
        }
        let e = MassProfile::build(
            MassSpec::Edge { along: Axis::X1, shape: EdgeShape::Straight { offset: 0.0 }, sign: 1.0, steepness: 1.0 },
            &g,
        )
        .unwrap();
        assert_eq!(e.kind, MassKind::StraightEdge);
        assert!(!e.periodic);
        assert_abs_diff_eq!(e.eval_kappa(0.0, -1.0), 1f64.tanh());
        assert_eq!(e.eval_kappa(3.0, 0.0), 0.0);
    }

    #[test]
    fn piecewise_edge_sign_flips_across_curve() {
        let s = EdgeShape::piecewise_preset();
        assert_abs_diff_eq!(s.eval(-60.0), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.eval(0.0), 12.0, epsilon = 1e-4);
        assert_abs_diff_eq!(s.eval(60.0), 0.0, epsilon = 1e-12);
        let spec = MassSpec::Edge { along: Axis::X1, shape: s.clone(), sign: 1.0, steepness: 1.0 };
        let g = small();
        let m = MassProfile::build(spec, &g).unwrap();
        for t in [-30.0, -18.0, -12.0, 0.0, 13.0, 24.0] {
            let f = s.eval(t);
            assert!(m.eval_kappa(t, f + 0.1) < 0.0);
            assert!(m.eval_kappa(t, f - 0.1) > 0.0);
        }
    }

    #[test]
    fn edge_distance_of_straight_edge() {
        let g = small();
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        for idx in (0..g.len()).step_by(37) {
            let [_, x2] = g.point(idx);
            assert_abs_diff_eq!(m.edge_distance[idx], x2.abs(), epsilon = 1e-9);
        }
    }

    #[test]
    fn custom_mass_edge_from_zero_set() {
        let g = small();
        let m = MassProfile::build(MassSpec::Custom(Arc::new(|_, x2| (-x2).tanh())), &g).unwrap();
        assert_eq!(m.kind, MassKind::Custom);
        let max_err = (0..g.len())
            .map(|idx| (m.edge_distance[idx] - g.point(idx)[1].abs()).abs())
            .filter(|e| e.is_finite())
            .fold(0.0, f64::max);
        // The wrap-around sign change at the top/bottom also counts as edge.
        assert!(max_err < 20.0);
        let flat = MassProfile::build(MassSpec::Custom(Arc::new(|_, _| 1.0)), &g).unwrap();
        assert!(flat.edge_distance.iter().all(|d| d.is_infinite()));
    }

    #[test]
    fn uniform_field_centers_on_domain() {
        let g = small();
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        let n = g.len();
        let f = EnvelopeField::new(g, vec![C64::new(1.0, 0.0); n], vec![ZERO; n]).unwrap();
        let o = observables(&f, &m, 5.0);
        assert!(o.energy_center[0].abs() < 1e-12 && o.energy_center[1].abs() < 1e-12);
        assert_abs_diff_eq!(o.norm, 1600.0, epsilon = 1e-9);
    }

    #[test]
    fn line_mode_is_stationary_for_the_discrete_operator() {
        let g = Arc::new(EnvelopeGrid::new(16, 512, 40.0, 60.0).unwrap());
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        let f = linear_line_mode(g.clone(), 0.0, |_| C64::new(1.0, 0.0));
        let mut st = DiracStepper::new(&g, &m.kappa, 1.0, 1.0, None);
        let n = g.len();
        let (mut o1, mut o2) = (vec![ZERO; n], vec![ZERO; n]);
        st.apply_h(&f.alpha1, &f.alpha2, &mut o1, &mut o2);
        let worst = (0..n)
            .filter(|&i| g.point(i)[1].abs() < 20.0)
            .map(|i| o1[i].norm().max(o2[i].norm()))
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn edge_state_spinors() {
        let g = small();
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        let s = m.edge_state(1.0, 1.0).unwrap();
        assert_eq!(s.direction, 1.0);
        assert_eq!(s.spinor[1], C64::new(1.0, 0.0));
        let v = MassProfile::build(
            MassSpec::DoubleWall { along: Axis::X2, shape: EdgeShape::Straight { offset: 0.0 }, sign: -1.0, steepness: 1.0 },
            &g,
        )
        .unwrap();
        // κ = tanh(X₁) with θ > 0 takes the (1, -i) spinor.
        let s = v.edge_state(0.51, 1.76).unwrap();
        assert_eq!(s.spinor[1], -I);
        assert_abs_diff_eq!(s.decay, 0.51 / 1.76);
        assert_eq!(v.edge_state(-0.5, 1.0).unwrap().spinor[1], I);
    }

    #[test]
    fn zero_data_stays_zero() {
        let g = small();
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        let mut f = EnvelopeField::zeros(g).with_nonlinearity(2.0, 1.0);
        let opts = EvolveOptions { dt: 0.1, steps: 5, linear_only: false, ..Default::default() };
        evolve(&mut f, &m, &opts).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn step_bound_enforced() {
        let g = small();
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        let mut f = linear_line_mode(g, 0.0, |_| C64::new(1.0, 0.0));
        let e = evolve(&mut f, &m, &EvolveOptions { dt: 2.0, ..Default::default() }).unwrap_err();
        assert!(matches!(e, Error::StepTooLarge { .. }));
        let e = MassProfile::build(
            MassSpec::Edge { along: Axis::X1, shape: EdgeShape::Straight { offset: 0.0 }, sign: 1.0, steepness: 1.0 },
            &f.grid,
        )
        .unwrap();
        assert!(evolve(&mut f, &e, &EvolveOptions::default()).is_err());
    }

    #[test]
    fn blowup_restores_last_state() {
        let g = small();
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        let mut f = linear_line_mode(g.clone(), 0.0, |x| C64::new((-x * x / 20.0).exp(), 0.0)).scaled(C64::new(2.0, 0.0));
        f = f.with_nonlinearity(-3.0, -3.0);
        // dt passes the amplitude check for the initial data but focusing
        // growth pushes the solution past the limit.
        let opts = EvolveOptions { dt: 0.04, steps: 4000, linear_only: false, sample_every: 0, ..Default::default() };
        match evolve(&mut f, &m, &opts) {
            Err(Error::Blowup { step, .. }) => {
                assert!(f.is_finite());
                assert!(step > 1);
            }
            Ok(_) => assert!(f.is_finite()),
            Err(e) => panic!("{e}"),
        }
    }
}
