//! Newton-CG solver for stationary modes `α = e^{-iμT} χ` of the rescaled
//! envelope system:
//!
//! `μχ + (iσ₁∂₁ - iσ₂∂₂ + κσ₃)χ + γ(|χ₁|, |χ₂|)χ = 0`.
//!
//! Line modes use a grid with two nodes along `X₁` and `X₁`-constant data,
//! which makes `∂₁` vanish identically.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::envelope::{DiracStepper, EnvelopeField, EnvelopeGrid, MassProfile, MassSpec};
use crate::error::{Error, Result};
use crate::spectral::wavenumbers;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeKind {
    Line,
    Lump,
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    /// Outer tolerance on the max-norm residual.
    pub tol: f64,
    pub max_outer: usize,
    /// Cap on the relative inner tolerance; the tolerance used is
    /// `min(inner_rel, ‖F‖∞)`.
    pub inner_rel: f64,
    pub max_inner: usize,
    /// `c` in the preconditioner `(c - Δ)⁻¹`.
    pub precond_c: f64,
    /// Backtrack the Newton step until `‖F‖₂` decreases.
    pub line_search: bool,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_outer: 200,
            inner_rel: 1e-2,
            max_inner: 2000,
            precond_c: 2.0,
            line_search: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryMode {
    pub kind: ModeKind,
    pub mu: f64,
    pub p1: f64,
    pub p2: f64,
    pub grid: Arc<EnvelopeGrid>,
    pub chi1: Vec<C64>,
    pub chi2: Vec<C64>,
    /// Max-norm residual at the last outer iteration.
    pub residual_norm: f64,
    pub iteration_log: Vec<(usize, f64)>,
    /// Converged to the zero solution.
    pub trivial: bool,
}

impl StationaryMode {
    /// `∫(|χ₁|² + |χ₂|²)`; per unit length in `X₁` for line modes.
    pub fn power(&self) -> f64 {
        let s: f64 = self.chi1.iter().zip(&self.chi2).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum();
        let area = self.grid.cell_area();
        match self.kind {
            ModeKind::Line => s * area / self.grid.l1,
            ModeKind::Lump => s * area,
        }
    }

    /// `‖ |χ₁| - |χ₂| ‖ / ‖χ‖`.
    pub fn asymmetry(&self) -> f64 {
        let d: f64 = self.chi1.iter().zip(&self.chi2).map(|(a, b)| (a.norm() - b.norm()).powi(2)).sum();
        let n: f64 = self.chi1.iter().zip(&self.chi2).map(|(a, b)| a.norm_sqr() + b.norm_sqr()).sum();
        if n == 0.0 {
            0.0
        } else {
            (d / n).sqrt()
        }
    }

    /// Cross-section over `X₂` at the first `X₁` node.
    pub fn profile(&self) -> (Vec<C64>, Vec<C64>) {
        let n2 = self.grid.n2;
        (self.chi1[..n2].to_vec(), self.chi2[..n2].to_vec())
    }

    pub fn to_field(&self) -> EnvelopeField {
        EnvelopeField::new(self.grid.clone(), self.chi1.clone(), self.chi2.clone())
            .expect("mode arrays match the grid")
            .with_nonlinearity(self.p1, self.p2)
    }

    /// Residual through the envelope time stepper's operator, independent of
    /// the Newton code path.
    pub fn independent_residual(&self, mass: &MassProfile) -> f64 {
        let g = &self.grid;
        let mut st = DiracStepper::new(g, &mass.kappa, 1.0, 1.0, None);
        let n = g.len();
        let (mut h1, mut h2) = (vec![ZERO; n], vec![ZERO; n]);
        st.apply_h(&self.chi1, &self.chi2, &mut h1, &mut h2);
        (0..n)
            .map(|i| {
                let (s1, s2) = (self.chi1[i].norm_sqr(), self.chi2[i].norm_sqr());
                let r1 = self.mu * self.chi1[i] + h1[i] + (self.p1 * s1 + self.p2 * s2) * self.chi1[i];
                let r2 = self.mu * self.chi2[i] + h2[i] + (self.p1 * s2 + self.p2 * s1) * self.chi2[i];
                r1.norm().max(r2.norm())
            })
            .fold(0.0, f64::max)
    }

    /// Fraction of `∫|χ|²` in the outer tenth of the domain on each side.
    pub fn boundary_shell_fraction(&self) -> f64 {
        let g = &self.grid;
        let mut shell = 0.0;
        let mut total = 0.0;
        for idx in 0..g.len() {
            let p = g.point(idx);
            let w = self.chi1[idx].norm_sqr() + self.chi2[idx].norm_sqr();
            total += w;
            let near1 = self.kind == ModeKind::Lump && p[0].abs() > 0.4 * g.l1;
            if near1 || p[1].abs() > 0.4 * g.l2 {
                shell += w;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            shell / total
        }
    }
}

/// Newton-side discretization: spectral `H`, the real-linear Jacobian and
/// the preconditioner.
struct System<'a> {
    grid: &'a EnvelopeGrid,
    mass: &'a [f64],
    mu: f64,
    p1: f64,
    p2: f64,
    k1: Vec<f64>,
    k2: Vec<f64>,
    precond: Vec<f64>,
}

/// Real inner product `Re Σ conj(a)·b` over both components.
fn dot(a: &[Vec<C64>; 2], b: &[Vec<C64>; 2]) -> f64 {
    (0..2).map(|c| a[c].iter().zip(&b[c]).map(|(x, y)| x.re * y.re + x.im * y.im).sum::<f64>()).sum()
}

fn axpy(y: &mut [Vec<C64>; 2], a: f64, x: &[Vec<C64>; 2]) {
    for c in 0..2 {
        y[c].iter_mut().zip(&x[c]).for_each(|(v, w)| *v += a * w);
    }
}

fn max_norm(a: &[Vec<C64>; 2]) -> f64 {
    a.iter().flatten().fold(0.0, |m, z| m.max(z.norm()))
}

impl<'a> System<'a> {
    fn new(grid: &'a EnvelopeGrid, mass: &'a [f64], mu: f64, p1: f64, p2: f64, c: f64) -> Self {
        let (kd1, kd2) = grid.derivative_wavenumbers();
        let w1 = wavenumbers(grid.n1, grid.l1);
        let w2 = wavenumbers(grid.n2, grid.l2);
        let mut precond = vec![0.0; grid.len()];
        for i in 0..grid.n1 {
            for j in 0..grid.n2 {
                precond[i * grid.n2 + j] = 1.0 / (c + w1[i] * w1[i] + w2[j] * w2[j]);
            }
        }
        Self {
            grid,
            mass,
            mu,
            p1,
            p2,
            k1: kd1.to_vec(),
            k2: kd2.to_vec(),
            precond,
        }
    }

    /// `μv + Hv`.
    fn linear(&self, v: &[Vec<C64>; 2]) -> [Vec<C64>; 2] {
        let g = self.grid;
        let fft = g.fft();
        let mut a = v[1].clone();
        let mut b = v[0].clone();
        fft.forward(&mut a);
        fft.forward(&mut b);
        for i in 0..g.n1 {
            for j in 0..g.n2 {
                let idx = i * g.n2 + j;
                // i∂₁ - ∂₂ on α₂ and i∂₁ + ∂₂ on α₁
                a[idx] *= C64::new(-self.k1[i], -self.k2[j]);
                b[idx] *= C64::new(-self.k1[i], self.k2[j]);
            }
        }
        fft.inverse(&mut a);
        fft.inverse(&mut b);
        for idx in 0..g.len() {
            a[idx] += (self.mu + self.mass[idx]) * v[0][idx];
            b[idx] += (self.mu - self.mass[idx]) * v[1][idx];
        }
        [a, b]
    }

    fn residual(&self, u: &[Vec<C64>; 2]) -> [Vec<C64>; 2] {
        let mut r = self.linear(u);
        for idx in 0..self.grid.len() {
            let (s1, s2) = (u[0][idx].norm_sqr(), u[1][idx].norm_sqr());
            r[0][idx] += (self.p1 * s1 + self.p2 * s2) * u[0][idx];
            r[1][idx] += (self.p1 * s2 + self.p2 * s1) * u[1][idx];
        }
        r
    }

    /// Real-linear Jacobian at `u` applied to `v`; self-adjoint for the
    /// real inner product.
    fn jacobian(&self, u: &[Vec<C64>; 2], v: &[Vec<C64>; 2]) -> [Vec<C64>; 2] {
        let mut r = self.linear(v);
        let (p1, p2) = (self.p1, self.p2);
        for idx in 0..self.grid.len() {
            let (u1, u2) = (u[0][idx], u[1][idx]);
            let (v1, v2) = (v[0][idx], v[1][idx]);
            let (s1, s2) = (u1.norm_sqr(), u2.norm_sqr());
            let d1 = 2.0 * (u1.conj() * v1).re;
            let d2 = 2.0 * (u2.conj() * v2).re;
            r[0][idx] += (p1 * s1 + p2 * s2) * v1 + u1 * (p1 * d1 + p2 * d2);
            r[1][idx] += (p1 * s2 + p2 * s1) * v2 + u2 * (p1 * d2 + p2 * d1);
        }
        r
    }

    fn apply_precond(&self, v: &[Vec<C64>; 2]) -> [Vec<C64>; 2] {
        let fft = self.grid.fft();
        let mut out = v.clone();
        for c in out.iter_mut() {
            fft.forward(c);
            c.iter_mut().zip(&self.precond).for_each(|(z, p)| *z *= p);
            fft.inverse(c);
        }
        out
    }

    /// Preconditioned CG on `J M⁻¹ J δ = -J M⁻¹ F`. Returns `δ` and the
    /// iteration count.
    fn newton_step(&self, u: &[Vec<C64>; 2], f: &[Vec<C64>; 2], rel: f64, max_iter: usize) -> ([Vec<C64>; 2], usize) {
        let n = self.grid.len();
        let normal = |v: &[Vec<C64>; 2]| self.jacobian(u, &self.apply_precond(&self.jacobian(u, v)));
        let mut b = self.jacobian(u, &self.apply_precond(f));
        for c in b.iter_mut() {
            c.iter_mut().for_each(|z| *z = -*z);
        }
        let mut x = [vec![ZERO; n], vec![ZERO; n]];
        let mut r = b.clone();
        let bnorm = dot(&b, &b).sqrt();
        if bnorm == 0.0 {
            return (x, 0);
        }
        let mut z = self.apply_precond(&r);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for it in 1..=max_iter {
            let ap = normal(&p);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                return (x, it);
            }
            let alpha = rz / pap;
            axpy(&mut x, alpha, &p);
            axpy(&mut r, -alpha, &ap);
            if dot(&r, &r).sqrt() <= rel * bnorm {
                return (x, it);
            }
            z = self.apply_precond(&r);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for c in 0..2 {
                p[c].iter_mut().zip(&z[c]).for_each(|(pv, zv)| *pv = zv + beta * *pv);
            }
        }
        (x, max_iter)
    }
}

/// Rotates the global phase so that `χ₁` at the node nearest the origin is
/// real and non-negative (the largest `|χ₁|` node if that value vanishes).
pub fn fix_gauge(grid: &EnvelopeGrid, chi: &mut [Vec<C64>; 2]) {
    let center = (grid.n1 / 2) * grid.n2 + grid.n2 / 2;
    let mut z = chi[0][center];
    let scale = max_norm(chi);
    if z.norm() <= 1e-6 * scale {
        z = chi[0].iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())).unwrap_or(ZERO);
    }
    if z.norm() == 0.0 {
        return;
    }
    let ph = z.conj() / z.norm();
    chi.iter_mut().flatten().for_each(|v| *v *= ph);
}

fn newton(
    kind: ModeKind,
    mu: f64,
    p1: f64,
    p2: f64,
    mass: &MassProfile,
    grid: Arc<EnvelopeGrid>,
    guess: [Vec<C64>; 2],
    opts: &NewtonOptions,
) -> Result<StationaryMode> {
    if guess[0].len() != grid.len() || guess[1].len() != grid.len() || mass.kappa.len() != grid.len() {
        return Err(Error::GridMismatch("guess, mass and grid sizes differ".into()));
    }
    let sys = System::new(&grid, &mass.kappa, mu, p1, p2, opts.precond_c);
    let mut u = guess;
    fix_gauge(&grid, &mut u);
    let mut log = Vec::new();
    let mut res = f64::INFINITY;
    for it in 0..=opts.max_outer {
        let f = sys.residual(&u);
        res = max_norm(&f);
        log.push((it, res));
        log::debug!("newton {it}: residual {res:.3e}");
        if !res.is_finite() {
            return Err(Error::NewtonFailure {
                iterations: it,
                reason: "residual is not finite".into(),
                log,
            });
        }
        if res < opts.tol {
            let trivial = max_norm(&u) < 1e-8;
            if trivial {
                log::warn!("Newton converged to the zero solution at mu = {mu}");
            }
            let [chi1, chi2] = u;
            return Ok(StationaryMode {
                kind,
                mu,
                p1,
                p2,
                grid,
                chi1,
                chi2,
                residual_norm: res,
                iteration_log: log,
                trivial,
            });
        }
        if it == opts.max_outer {
            break;
        }
        let (d, _) = sys.newton_step(&u, &f, opts.inner_rel.min(res), opts.max_inner);
        let mut step = 1.0;
        if opts.line_search {
            let f0 = dot(&f, &f).sqrt();
            let mut best = (f64::INFINITY, 1.0);
            for _ in 0..8 {
                let mut trial = u.clone();
                axpy(&mut trial, step, &d);
                let ft = sys.residual(&trial);
                let fn_ = dot(&ft, &ft).sqrt();
                if fn_ < best.0 {
                    best = (fn_, step);
                }
                if fn_ <= (1.0 - 1e-4 * step) * f0 {
                    break;
                }
                step *= 0.5;
            }
            step = best.1;
        }
        axpy(&mut u, step, &d);
        fix_gauge(&grid, &mut u);
    }
    Err(Error::NewtonFailure {
        iterations: opts.max_outer,
        reason: format!("residual {res:.3e} above tolerance {:.1e}", opts.tol),
        log,
    })
}

/// Grid for line modes: two nodes along `X₁`, `n2` along `X₂`.
pub fn line_grid(n2: usize, l2: f64) -> Result<EnvelopeGrid> {
    EnvelopeGrid::new(2, n2, 1.0, l2)
}

/// `a(1, 1)sech(X₂)` with `a² = -3μ/(2(p₁ + p₂))` when that is positive,
/// the small-amplitude estimate of the nonlinear branch; `a = 1` otherwise.
pub fn line_guess(grid: &EnvelopeGrid, mu: f64, p1: f64, p2: f64) -> [Vec<C64>; 2] {
    let a2 = -1.5 * mu / (p1 + p2);
    let a = if a2.is_finite() && a2 > 0.0 { a2.sqrt() } else { 1.0 };
    let v = grid.sample(|_, x2| C64::new(a / x2.cosh(), 0.0));
    [v.clone(), v]
}

/// Line guess multiplied by `exp(-X₁²/w²)`.
pub fn lump_guess(grid: &EnvelopeGrid, mu: f64, p1: f64, p2: f64, width: f64) -> [Vec<C64>; 2] {
    let [a, _] = line_guess(grid, mu, p1, p2);
    let v: Vec<C64> = a
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let x1 = grid.point(idx)[0];
            z * (-(x1 / width).powi(2)).exp()
        })
        .collect();
    [v.clone(), v]
}

/// Default lump setting: `[-20π, 20π)²` at 256² with the straight double wall.
pub fn default_lump_grid() -> EnvelopeGrid {
    let l = 40.0 * std::f64::consts::PI;
    EnvelopeGrid::new(256, 256, l, l).expect("valid grid")
}

pub fn solve_line_mode(
    mu: f64,
    p1: f64,
    p2: f64,
    mass: &MassProfile,
    grid: Arc<EnvelopeGrid>,
    initial_guess: Option<[Vec<C64>; 2]>,
    opts: &NewtonOptions,
) -> Result<StationaryMode> {
    if grid.n1 != 2 {
        return Err(Error::InvalidInput("line modes need a grid with two X1 nodes".into()));
    }
    let guess = initial_guess.unwrap_or_else(|| line_guess(&grid, mu, p1, p2));
    // X₁-constant data keeps ∂₁ at zero.
    let n2 = grid.n2;
    let mut g = guess;
    for c in g.iter_mut() {
        let row: Vec<C64> = c[..n2].to_vec();
        c[n2..].copy_from_slice(&row);
    }
    newton(ModeKind::Line, mu, p1, p2, mass, grid, g, opts)
}

pub fn solve_lump(
    mu: f64,
    p1: f64,
    p2: f64,
    mass: &MassProfile,
    grid: Arc<EnvelopeGrid>,
    initial_guess: Option<[Vec<C64>; 2]>,
    opts: &NewtonOptions,
) -> Result<StationaryMode> {
    let guess = initial_guess.unwrap_or_else(|| lump_guess(&grid, mu, p1, p2, 4.0));
    let mode = newton(ModeKind::Lump, mu, p1, p2, mass, grid, guess, opts)?;
    let shell = mode.boundary_shell_fraction();
    if !mode.trivial && shell > 1e-8 {
        return Err(Error::DomainTooSmall(format!(
            "boundary shell holds {shell:.2e} of the lump power"
        )));
    }
    Ok(mode)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchLoss {
    pub mu: f64,
    pub last_good: Option<f64>,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Continuation {
    pub modes: Vec<StationaryMode>,
    pub lost: Option<BranchLoss>,
}

impl Continuation {
    /// `(μ, ‖χ‖²)` along the branch.
    pub fn power_curve(&self) -> Vec<(f64, f64)> {
        self.modes.iter().map(|m| (m.mu, m.power())).collect()
    }
}

/// Solves along `mus`, seeding each solve with the previous mode.
pub fn continuation_sweep(
    mus: &[f64],
    p1: f64,
    p2: f64,
    kind: ModeKind,
    mass: &MassProfile,
    grid: Arc<EnvelopeGrid>,
    opts: &NewtonOptions,
) -> Result<Continuation> {
    if mus.is_empty() {
        return Err(Error::InvalidInput("empty mu range".into()));
    }
    let inc = mus.windows(2).all(|w| w[1] > w[0]);
    let dec = mus.windows(2).all(|w| w[1] < w[0]);
    if !(inc || dec) {
        return Err(Error::InvalidInput("mu range must be strictly monotone".into()));
    }
    let mut modes: Vec<StationaryMode> = Vec::new();
    for &mu in mus {
        let seed = modes.last().map(|m| [m.chi1.clone(), m.chi2.clone()]);
        let r = match kind {
            ModeKind::Line => solve_line_mode(mu, p1, p2, mass, grid.clone(), seed, opts),
            ModeKind::Lump => solve_lump(mu, p1, p2, mass, grid.clone(), seed, opts),
        };
        match r {
            Ok(m) if !m.trivial => modes.push(m),
            Ok(_) => {
                let last_good = modes.last().map(|m| m.mu);
                return Ok(Continuation {
                    modes,
                    lost: Some(BranchLoss { mu, last_good, reason: "collapsed to the zero solution".into() }),
                });
            }
            Err(e) => {
                let last_good = modes.last().map(|m| m.mu);
                log::warn!("branch lost at mu = {mu}: {e}");
                return Ok(Continuation {
                    modes,
                    lost: Some(BranchLoss { mu, last_good, reason: e.to_string() }),
                });
            }
        }
    }
    Ok(Continuation { modes, lost: None })
}

/// Straight double-wall mass on a line-mode grid.
pub fn line_mass(grid: &EnvelopeGrid) -> Result<MassProfile> {
    MassProfile::build(MassSpec::straight_double_wall(), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn setup() -> (Arc<EnvelopeGrid>, MassProfile) {
        let g = Arc::new(line_grid(256, 20.0 * PI).unwrap());
        let m = line_mass(&g).unwrap();
        (g, m)
    }

    #[test]
    fn jacobian_matches_finite_difference_and_is_symmetric() {
        let g = EnvelopeGrid::new(8, 16, 10.0, 12.0).unwrap();
        let m = MassProfile::build(MassSpec::straight_double_wall(), &g).unwrap();
        let sys = System::new(&g, &m.kappa, -0.3, 2.0, 1.0, 2.0);
        let f = |s: f64| -> [Vec<C64>; 2] {
            [
                g.sample(|a, b| C64::new((0.3 * a + s).sin() / b.cosh(), (0.2 * b).cos() * 0.5)),
                g.sample(|a, b| C64::new((0.1 * a * b).cos(), (0.7 * a - s).sin() * 0.3)),
            ]
        };
        let u = f(0.0);
        let v = f(1.0);
        let w = f(2.0);
        let h = 1e-6;
        let mut up = u.clone();
        axpy(&mut up, h, &v);
        let mut um = u.clone();
        axpy(&mut um, -h, &v);
        let (rp, rm) = (sys.residual(&up), sys.residual(&um));
        let jv = sys.jacobian(&u, &v);
        let mut err = 0.0f64;
        for c in 0..2 {
            for i in 0..g.len() {
                err = err.max(((rp[c][i] - rm[c][i]) / (2.0 * h) - jv[c][i]).norm());
            }
        }
        assert!(err < 1e-6, "{err}");
        let jw = sys.jacobian(&u, &w);
        let a = dot(&w, &jv);
        let b = dot(&v, &jw);
        assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{a} {b}");
    }

    #[test]
    fn linear_problem_recovers_sech_mode() {
        // Fine enough that the sech mode is an exact discrete null vector to
        // round-off; on coarser grids the only discrete solution is zero.
        let g = Arc::new(line_grid(512, 20.0 * PI).unwrap());
        let m = line_mass(&g).unwrap();
        let guess = g.sample(|_, x2| C64::new(0.7 / x2.cosh() + 0.1 * (-x2 * x2).exp(), 0.0));
        let zero = vec![ZERO; g.len()];
        let mode = solve_line_mode(0.0, 0.0, 0.0, &m, g.clone(), Some([guess, zero]), &NewtonOptions::default()).unwrap();
        assert!(!mode.trivial);
        let (c1, c2) = mode.profile();
        let j = g.n2 / 2;
        let amp = c1[j].re * g.x2(j).cosh();
        for k in (0..g.n2).filter(|&k| g.x2(k).abs() < 20.0) {
            let want = amp / g.x2(k).cosh();
            assert!((c1[k] - want).norm() < 1e-9 && (c2[k] - want).norm() < 1e-9);
        }
        assert!(mode.independent_residual(&m) < 1e-10);
    }

    #[test]
    fn zero_guess_is_trivial() {
        let (g, m) = setup();
        let zero = vec![ZERO; g.len()];
        let mode = solve_line_mode(-0.5, 2.0, 1.0, &m, g, Some([zero.clone(), zero]), &NewtonOptions::default()).unwrap();
        assert!(mode.trivial);
        assert_eq!(mode.iteration_log.len(), 1);
    }

    #[test]
    fn nonlinear_line_mode_converges_and_is_gauge_covariant() {
        let (g, m) = setup();
        let mode = solve_line_mode(-0.5, 2.0, 1.0, &m, g.clone(), None, &NewtonOptions::default()).unwrap();
        assert!(!mode.trivial);
        assert!(mode.residual_norm < 1e-10);
        assert!(mode.independent_residual(&m) < 1e-9);
        assert!(mode.asymmetry() > 0.01);
        let mut rot = mode.clone();
        let ph = C64::from_polar(1.0, 0.7);
        rot.chi1.iter_mut().chain(rot.chi2.iter_mut()).for_each(|z| *z *= ph);
        assert!((rot.independent_residual(&m) - mode.independent_residual(&m)).abs() < 1e-12);
    }

    #[test]
    fn continuation_single_entry_and_monotonicity() {
        let (g, m) = setup();
        let c = continuation_sweep(&[-0.3], 2.0, 1.0, ModeKind::Line, &m, g.clone(), &NewtonOptions::default()).unwrap();
        assert_eq!(c.modes.len(), 1);
        assert!(c.lost.is_none());
        assert!(continuation_sweep(&[-0.3, -0.2, -0.4], 2.0, 1.0, ModeKind::Line, &m, g, &NewtonOptions::default()).is_err());
    }
}
