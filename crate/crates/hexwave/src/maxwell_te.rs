//! Linear TE Maxwell evolution `i∂_tΨ = -W_e(x)𝓛Ψ` on a periodic supercell
//! with a slowly modulated weight `W_e = W + δκ(δx)V`, Bloch packet assembly,
//! and comparison against the envelope prediction.
//!
//! States are stored through a `k`-periodic part: the physical field is
//! `Ψ(x, t) = e^{iΩt} e^{ik·x} φ(x, t)` with `k` a Bloch shift (usually `K`)
//! and `Ω` a frame frequency, so `φ` obeys `∂_tφ = i(W_e𝓛_k - Ω)φ` with
//! `𝓛_k` the symbol of `𝓛` at `k + q`. The supercell only has to be spanned
//! by lattice vectors.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{Matrix2, Vector3};
use num_complex::Complex64 as C64;

use crate::bloch::BlochField;
use crate::dirac::DiracPointData;
use crate::envelope::{
    double_wall, wrap, Axis, DiracStepper, EdgeShape, EnvelopeField, EnvelopeGrid, MassProfile, MassSpec,
    RK4_STABILITY,
};
use crate::error::{Error, Result};
use crate::lattice::{rotation, HexLattice, Vec2};
use crate::material::{Mat3c, MaterialWeight, PerturbationWeight};
use crate::spectral::{signed_bin, Fft2};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Default tolerance on `max_boundary |β| / max |β|` for packet assembly.
pub const BOUNDARY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupercellShape {
    /// Multiples of `(√3, 0)` and `(0, 1)`; each rectangular cell holds two
    /// primitive cells.
    Rectangular,
    /// Multiples of `v₁` and `v₂`; closed under the 120° rotation.
    Rhombic,
}

/// Periodic supercell `{u₁a₁ + u₂a₂}` sampled at `x = (i/n₁)a₁ + (j/n₂)a₂`.
/// Arrays are row-major `f[i * n2 + j]`.
#[derive(Debug, Clone)]
pub struct Supercell {
    pub shape: SupercellShape,
    pub a1: Vec2,
    pub a2: Vec2,
    pub cells: [usize; 2],
    pub per_cell: [usize; 2],
    pub n1: usize,
    pub n2: usize,
    b1: Vec2,
    b2: Vec2,
}

impl Supercell {
    pub fn rectangular(cells: [usize; 2], per_cell: [usize; 2]) -> Result<Self> {
        let lat = HexLattice::standard();
        let a1 = (lat.v1 + lat.v2) * cells[0] as f64;
        let a2 = (lat.v1 - lat.v2) * cells[1] as f64;
        Self::build(SupercellShape::Rectangular, a1, a2, cells, per_cell)
    }

    pub fn rhombic(cells: usize, per_cell: usize) -> Result<Self> {
        let lat = HexLattice::standard();
        let s = cells as f64;
        Self::build(SupercellShape::Rhombic, lat.v1 * s, lat.v2 * s, [cells; 2], [per_cell; 2])
    }

    fn build(shape: SupercellShape, a1: Vec2, a2: Vec2, cells: [usize; 2], per_cell: [usize; 2]) -> Result<Self> {
        if cells.contains(&0) || per_cell.iter().any(|&p| p < 2) {
            return Err(Error::InvalidInput(format!(
                "supercell needs at least one cell and two points per cell, got {cells:?} / {per_cell:?}"
            )));
        }
        let det = a1.x * a2.y - a1.y * a2.x;
        let b1 = Vec2::new(a2.y, -a2.x) * (2.0 * PI / det);
        let b2 = Vec2::new(-a1.y, a1.x) * (2.0 * PI / det);
        Ok(Self {
            shape,
            a1,
            a2,
            cells,
            per_cell,
            n1: cells[0] * per_cell[0],
            n2: cells[1] * per_cell[1],
            b1,
            b2,
        })
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn area(&self) -> f64 {
        (self.a1.x * self.a2.y - self.a1.y * self.a2.x).abs()
    }

    /// Quadrature weight of one node.
    pub fn node_area(&self) -> f64 {
        self.area() / self.len() as f64
    }

    /// Dual vectors with `a_i·b_j = 2πδ_ij`.
    pub fn dual(&self) -> (Vec2, Vec2) {
        (self.b1, self.b2)
    }

    pub fn point(&self, idx: usize) -> Vec2 {
        let (i, j) = (idx / self.n2, idx % self.n2);
        self.a1 * (i as f64 / self.n1 as f64) + self.a2 * (j as f64 / self.n2 as f64)
    }

    /// Supercell coordinates `u` of `x`, wrapped into `[-1/2, 1/2)`.
    pub fn fractional(&self, x: Vec2) -> [f64; 2] {
        [wrap(x.dot(&self.b1) / (2.0 * PI), 1.0), wrap(x.dot(&self.b2) / (2.0 * PI), 1.0)]
    }

    /// Representative of `x` in the supercell centred at the origin.
    pub fn wrapped(&self, x: Vec2) -> Vec2 {
        let [u1, u2] = self.fractional(x);
        self.a1 * u1 + self.a2 * u2
    }

    /// FFT bin of a dual lattice vector `G` (which must be dual to the
    /// supercell).
    fn bin_of(&self, g: Vec2) -> (usize, usize) {
        let i = (g.dot(&self.a1) / (2.0 * PI)).round() as i64;
        let j = (g.dot(&self.a2) / (2.0 * PI)).round() as i64;
        (i.rem_euclid(self.n1 as i64) as usize, j.rem_euclid(self.n2 as i64) as usize)
    }

    /// Wavevector `k + q` of every bin, choosing among aliases the one of
    /// least norm. Bins with tied aliases get a zero symbol, so the set of
    /// retained wavevectors is invariant under any lattice symmetry that
    /// fixes `k` modulo the dual lattice.
    pub fn shifted_wavevectors(&self, k: Vec2) -> Vec<Vec2> {
        let mut out = Vec::with_capacity(self.len());
        for i in 0..self.n1 {
            for j in 0..self.n2 {
                let (si, sj) = (signed_bin(i, self.n1), signed_bin(j, self.n2));
                let mut best = f64::INFINITY;
                let mut q_best = Vec2::zeros();
                let mut tie = false;
                for a in -1i64..=1 {
                    for b in -1i64..=1 {
                        let q = k
                            + self.b1 * (si + a * self.n1 as i64) as f64
                            + self.b2 * (sj + b * self.n2 as i64) as f64;
                        let r = q.norm();
                        let tol = 1e-9 * (1.0 + r);
                        if r < best - tol {
                            best = r;
                            q_best = q;
                            tie = false;
                        } else if (r - best).abs() <= tol {
                            tie = true;
                        }
                    }
                }
                out.push(if tie { Vec2::zeros() } else { q_best });
            }
        }
        out
    }
}

pub type SlowProfile = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// `W_e(x) = W(x) + δ κ(δx) V(x)`.
#[derive(Clone)]
pub struct ModulatedWeight {
    pub base: MaterialWeight,
    pub perturbation: PerturbationWeight,
    pub delta: f64,
    /// `κ` as a function of the slow variable `X = δx`.
    pub kappa_slow: SlowProfile,
}

impl std::fmt::Debug for ModulatedWeight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModulatedWeight").field("delta", &self.delta).finish_non_exhaustive()
    }
}

/// Pointwise samples of `W_e` and `W_e^(-1)` in block form.
#[derive(Debug, Clone)]
pub struct WeightSamples {
    pub block: Vec<Matrix2<C64>>,
    pub scalar: Vec<f64>,
    pub block_inv: Vec<Matrix2<C64>>,
    pub scalar_inv: Vec<f64>,
    /// Largest eigenvalue of the 2×2 block over the grid.
    pub block_max: f64,
    pub scalar_max: f64,
    pub min_eig: f64,
    pub max_eig: f64,
}

impl ModulatedWeight {
    pub fn new(base: MaterialWeight, perturbation: PerturbationWeight, delta: f64, kappa_slow: SlowProfile) -> Result<Self> {
        if !delta.is_finite() {
            return Err(Error::InvalidInput(format!("delta {delta} is not finite")));
        }
        perturbation.check_block_diagonal()?;
        Ok(Self {
            base,
            perturbation,
            delta,
            kappa_slow,
        })
    }

    pub fn unmodulated(base: MaterialWeight) -> Self {
        Self {
            base,
            perturbation: PerturbationWeight::zero(),
            delta: 0.0,
            kappa_slow: Arc::new(|_| 0.0),
        }
    }

    pub fn eval(&self, x: Vec2) -> Mat3c {
        let w = self.base.eval(x);
        if self.delta == 0.0 {
            return w;
        }
        let s = self.delta * (self.kappa_slow)(x * self.delta);
        w + self.perturbation.eval(x) * C64::new(s, 0.0)
    }

    pub fn sample(&self, cell: &Supercell) -> Result<WeightSamples> {
        let n = cell.len();
        let mut out = WeightSamples {
            block: Vec::with_capacity(n),
            scalar: Vec::with_capacity(n),
            block_inv: Vec::with_capacity(n),
            scalar_inv: Vec::with_capacity(n),
            block_max: 0.0,
            scalar_max: 0.0,
            min_eig: f64::INFINITY,
            max_eig: 0.0,
        };
        for idx in 0..n {
            let x = cell.point(idx);
            let w = self.eval(x);
            let herm = (w - w.adjoint()).iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if herm > 1e-12 * (1.0 + w.norm()) {
                return Err(Error::NotAdmissible(format!("W_e is not Hermitian at {x:?} (residual {herm:.2e})")));
            }
            let a = Matrix2::new(w[(0, 0)], w[(0, 1)], w[(1, 0)], w[(1, 1)]);
            let s = w[(2, 2)].re;
            let eig = a.symmetric_eigenvalues();
            let lo = eig.min().min(s);
            let hi = eig.max().max(s);
            if !(lo > 0.0) {
                return Err(Error::NotPositiveDefinite(format!("W_e has eigenvalue {lo:.3e} at {x:?}")));
            }
            let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
            let inv = Matrix2::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det;
            out.block_max = out.block_max.max(eig.max());
            out.scalar_max = out.scalar_max.max(s);
            out.min_eig = out.min_eig.min(lo);
            out.max_eig = out.max_eig.max(hi);
            out.block.push(a);
            out.scalar.push(s);
            out.block_inv.push(inv);
            out.scalar_inv.push(1.0 / s);
        }
        Ok(out)
    }
}

/// Periodic part `φ` of a TE field, component-major (`psi[c * N + idx]`).
#[derive(Debug, Clone)]
pub struct MaxwellState {
    pub cell: Arc<Supercell>,
    /// Bloch shift `k`.
    pub k: Vec2,
    /// Frame frequency `Ω`.
    pub frame: f64,
    pub psi: Vec<C64>,
    pub time: f64,
}

impl MaxwellState {
    pub fn zeros(cell: Arc<Supercell>, k: Vec2, frame: f64) -> Self {
        let n = cell.len();
        Self {
            cell,
            k,
            frame,
            psi: vec![ZERO; 3 * n],
            time: 0.0,
        }
    }

    pub fn component(&self, c: usize) -> &[C64] {
        let n = self.cell.len();
        &self.psi[c * n..(c + 1) * n]
    }

    pub fn vector(&self, idx: usize) -> Vector3<C64> {
        let n = self.cell.len();
        Vector3::new(self.psi[idx], self.psi[n + idx], self.psi[2 * n + idx])
    }

    /// Physical field `Ψ(x_idx, t)`.
    pub fn physical(&self, idx: usize) -> Vector3<C64> {
        let ph = self.frame * self.time + self.k.dot(&self.cell.point(idx));
        self.vector(idx) * C64::from_polar(1.0, ph)
    }

    /// `ψ* W_e^(-1) ψ` at every node.
    pub fn energy_density(&self, w: &WeightSamples) -> Vec<f64> {
        let n = self.cell.len();
        (0..n)
            .map(|idx| {
                let (p1, p2, p3) = (self.psi[idx], self.psi[n + idx], self.psi[2 * n + idx]);
                let a = &w.block_inv[idx];
                let q1 = a[(0, 0)] * p1 + a[(0, 1)] * p2;
                let q2 = a[(1, 0)] * p1 + a[(1, 1)] * p2;
                (p1.conj() * q1 + p2.conj() * q2).re + w.scalar_inv[idx] * p3.norm_sqr()
            })
            .collect()
    }

    /// `∫ ψ* W_e^(-1) ψ dx`.
    pub fn energy(&self, w: &WeightSamples) -> f64 {
        self.energy_density(w).iter().sum::<f64>() * self.cell.node_area()
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn max_diff(&self, other: &Self) -> f64 {
        self.psi.iter().zip(&other.psi).fold(0.0, |m, (a, b)| m.max((a - b).norm()))
    }

    pub fn max_abs(&self) -> f64 {
        self.psi.iter().fold(0.0, |m, z| m.max(z.norm()))
    }
}

/// `φ ↦ (W_e𝓛_k - Ω)φ` with FFT scratch space.
pub struct MaxwellOperator {
    cell: Arc<Supercell>,
    weight: Arc<WeightSamples>,
    pub k: Vec2,
    pub frame: f64,
    q: Vec<Vec2>,
    fft: Fft2,
    buf: [Vec<C64>; 3],
}

impl MaxwellOperator {
    pub fn new(cell: Arc<Supercell>, weight: Arc<WeightSamples>, k: Vec2, frame: f64) -> Result<Self> {
        if weight.scalar.len() != cell.len() {
            return Err(Error::GridMismatch(format!(
                "weight has {} samples, supercell has {} nodes",
                weight.scalar.len(),
                cell.len()
            )));
        }
        let n = cell.len();
        Ok(Self {
            q: cell.shifted_wavevectors(k),
            fft: Fft2::new(cell.n1, cell.n2),
            buf: [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]],
            cell,
            weight,
            k,
            frame,
        })
    }

    pub fn weight(&self) -> &WeightSamples {
        &self.weight
    }

    pub fn max_wavenumber(&self) -> f64 {
        self.q.iter().fold(0.0, |m, q| m.max(q.norm()))
    }

    /// Upper bound on the spectral radius of `W_e𝓛_k - Ω`. For block
    /// diagonal `W_e` the operator is similar to `W^(1/2)𝓛W^(1/2)`, whose
    /// off-diagonal block has norm at most `√(max λ(A) · max a) · max|q|`.
    pub fn frequency_bound(&self) -> f64 {
        (self.weight.block_max * self.weight.scalar_max).sqrt() * self.max_wavenumber() + self.frame.abs()
    }

    /// Largest stable RK4 step.
    pub fn max_dt(&self) -> f64 {
        RK4_STABILITY / self.frequency_bound()
    }

    pub fn apply(&mut self, psi: &[C64], out: &mut [C64]) {
        let n = self.cell.len();
        for c in 0..3 {
            self.buf[c].copy_from_slice(&psi[c * n..(c + 1) * n]);
            self.fft.forward(&mut self.buf[c]);
        }
        for (idx, q) in self.q.iter().enumerate() {
            let (f1, f2, f3) = (self.buf[0][idx], self.buf[1][idx], self.buf[2][idx]);
            self.buf[0][idx] = -q.x * f3;
            self.buf[1][idx] = -q.y * f3;
            self.buf[2][idx] = -q.x * f1 - q.y * f2;
        }
        for b in self.buf.iter_mut() {
            self.fft.inverse(b);
        }
        let w = &self.weight;
        for idx in 0..n {
            let a = &w.block[idx];
            let (l1, l2, l3) = (self.buf[0][idx], self.buf[1][idx], self.buf[2][idx]);
            out[idx] = a[(0, 0)] * l1 + a[(0, 1)] * l2 - self.frame * psi[idx];
            out[n + idx] = a[(1, 0)] * l1 + a[(1, 1)] * l2 - self.frame * psi[n + idx];
            out[2 * n + idx] = w.scalar[idx] * l3 - self.frame * psi[2 * n + idx];
        }
    }

    fn rhs(&mut self, psi: &[C64], out: &mut [C64]) {
        self.apply(psi, out);
        out.iter_mut().for_each(|z| *z *= I);
    }

    pub fn rk4_step(&mut self, psi: &mut [C64], dt: f64, scratch: &mut Rk4Scratch) {
        let Rk4Scratch { k1, k2, k3, k4, tmp } = scratch;
        self.rhs(psi, k1);
        for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k1.iter())) {
            *t = p + k * (0.5 * dt);
        }
        self.rhs(tmp, k2);
        for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k2.iter())) {
            *t = p + k * (0.5 * dt);
        }
        self.rhs(tmp, k3);
        for (t, (p, k)) in tmp.iter_mut().zip(psi.iter().zip(k3.iter())) {
            *t = p + k * dt;
        }
        self.rhs(tmp, k4);
        for (i, p) in psi.iter_mut().enumerate() {
            *p += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0);
        }
    }
}

pub struct Rk4Scratch {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4Scratch {
    pub fn new(len: usize) -> Self {
        Self {
            k1: vec![ZERO; len],
            k2: vec![ZERO; len],
            k3: vec![ZERO; len],
            k4: vec![ZERO; len],
            tmp: vec![ZERO; len],
        }
    }
}

/// Periodic part of a Bloch field on the supercell grid. The field's
/// quasi-momentum must equal the shift `k` up to a dual vector of the
/// supercell; the offset is absorbed into the bins.
pub fn synthesize_periodic(field: &BlochField, cell: &Supercell, k: Vec2) -> Result<[Vec<C64>; 3]> {
    let lat = HexLattice::standard();
    let offset = field.k - k;
    let (oi, oj) = (offset.dot(&cell.a1) / (2.0 * PI), offset.dot(&cell.a2) / (2.0 * PI));
    if (oi - oi.round()).abs() > 1e-9 || (oj - oj.round()).abs() > 1e-9 {
        return Err(Error::GridMismatch(format!(
            "Bloch field at {:?} is not periodic on the supercell with shift {:?}",
            field.k, k
        )));
    }
    let n = cell.len();
    let fft = Fft2::new(cell.n1, cell.n2);
    let mut out: [Vec<C64>; 3] = [vec![ZERO; n], vec![ZERO; n], vec![ZERO; n]];
    for (c, slot) in out.iter_mut().enumerate() {
        for (i, m) in field.basis.indices().iter().enumerate() {
            let (a, b) = cell.bin_of(lat.dual_index(*m) + offset);
            slot[a * cell.n2 + b] += field.coeffs[3 * i + c] * n as f64;
        }
        fft.inverse(slot);
    }
    Ok(out)
}

/// `Ψ_e(x, 0) = β₁(δx)Ψ₁(x) + β₂(δx)Ψ₂(x)` with `x` taken in the supercell
/// centred at the origin.
pub fn assemble_packet(
    psi1: &BlochField,
    psi2: &BlochField,
    beta: impl Fn(Vec2) -> [C64; 2],
    delta: f64,
    cell: Arc<Supercell>,
    frame: f64,
    boundary_tol: f64,
) -> Result<MaxwellState> {
    if (psi1.k - psi2.k).norm() > 1e-12 {
        return Err(Error::InvalidInput("Bloch modes sit at different quasi-momenta".into()));
    }
    let k = psi1.k;
    let p1 = synthesize_periodic(psi1, &cell, k)?;
    let p2 = synthesize_periodic(psi2, &cell, k)?;
    let n = cell.len();
    let mut state = MaxwellState::zeros(cell.clone(), k, frame);
    let (mut peak, mut edge) = (0.0f64, 0.0f64);
    for idx in 0..n {
        let (i, j) = (idx / cell.n2, idx % cell.n2);
        let x = cell.wrapped(cell.point(idx));
        let b = beta(x * delta);
        let mag = b[0].norm().max(b[1].norm());
        peak = peak.max(mag);
        if i == cell.n1 / 2 || j == cell.n2 / 2 {
            // u = -1/2 after wrapping.
            edge = edge.max(mag);
        }
        for c in 0..3 {
            state.psi[c * n + idx] = b[0] * p1[c][idx] + b[1] * p2[c][idx];
        }
    }
    if peak == 0.0 || !peak.is_finite() {
        return Err(Error::InvalidInput("envelope vanishes or is not finite".into()));
    }
    if edge > boundary_tol * peak {
        return Err(Error::DomainTooSmall(format!(
            "envelope is {:.2e} of its peak on the supercell boundary (tolerance {boundary_tol:.1e})",
            edge / peak
        )));
    }
    Ok(state)
}

/// One recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxwellSample {
    pub time: f64,
    pub energy: f64,
    /// Energy centroid, unwrapped continuously in time.
    pub centroid: Vec2,
    /// Energy fraction with `|x₁| ≤ tube` (edge along `x₂` through the origin).
    pub edge_fraction: f64,
    /// Energy summed over `u₂`, one entry per cell column from `u₁ = -1/2`.
    pub profile: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct MaxwellTrajectory {
    pub samples: Vec<MaxwellSample>,
    /// `(t, ψ* W_e^(-1) ψ)` snapshots.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub dt: f64,
    pub wall_seconds: f64,
}

impl MaxwellTrajectory {
    /// `max_t |E(t) - E(0)| / E(0)`.
    pub fn energy_drift(&self) -> f64 {
        let Some(e0) = self.samples.first().map(|s| s.energy) else {
            return 0.0;
        };
        self.samples.iter().fold(0.0, |m, s| m.max((s.energy - e0).abs() / e0))
    }

    pub fn min_edge_fraction(&self) -> f64 {
        self.samples.iter().fold(1.0, |m, s| m.min(s.edge_fraction))
    }

    /// `t,cx,cy,edge_fraction` rows.
    pub fn centroid_rows(&self) -> Vec<[f64; 4]> {
        self.samples
            .iter()
            .map(|s| [s.time, s.centroid.x, s.centroid.y, s.edge_fraction])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct MaxwellEvolveOptions {
    pub dt: f64,
    pub steps: usize,
    pub sample_every: usize,
    pub snapshot_every: usize,
    /// Half width in `x` of the tube around the edge `x₁ = 0`.
    pub tube_half_width: f64,
}

impl Default for MaxwellEvolveOptions {
    fn default() -> Self {
        Self {
            dt: 0.02,
            steps: 100,
            sample_every: 10,
            snapshot_every: 0,
            tube_half_width: 20.0,
        }
    }
}

/// Circular mean of a periodic coordinate `u ∈ [-1/2, 1/2)`.
fn circular_mean(u: impl Iterator<Item = (f64, f64)>) -> f64 {
    let z: C64 = u.map(|(w, u)| C64::from_polar(w, 2.0 * PI * u)).sum();
    z.arg() / (2.0 * PI)
}

/// Representative of `u` (mod 1) closest to `prev`.
fn unwrap_near(u: f64, prev: f64) -> f64 {
    u + (prev - u).round()
}

fn sample_state(state: &MaxwellState, w: &WeightSamples, tube: f64, prev: Option<[f64; 2]>) -> (MaxwellSample, [f64; 2]) {
    let cell = &state.cell;
    let e = state.energy_density(w);
    let total: f64 = e.iter().sum();
    let mut inside = 0.0;
    let mut profile = vec![0.0; cell.cells[0]];
    let fr: Vec<[f64; 2]> = (0..cell.len()).map(|idx| cell.fractional(cell.point(idx))).collect();
    for (idx, &ei) in e.iter().enumerate() {
        let x = cell.wrapped(cell.point(idx));
        if x.x.abs() <= tube {
            inside += ei;
        }
        let col = (((fr[idx][0] + 0.5) * cell.cells[0] as f64).floor() as usize).min(cell.cells[0] - 1);
        profile[col] += ei;
    }
    let mut u = [0.0; 2];
    for (c, uc) in u.iter_mut().enumerate() {
        let m = circular_mean(e.iter().zip(&fr).map(|(&w, f)| (w, f[c])));
        *uc = match prev {
            Some(p) => unwrap_near(m, p[c]),
            None => m,
        };
    }
    let s = MaxwellSample {
        time: state.time,
        energy: total * cell.node_area(),
        centroid: cell.a1 * u[0] + cell.a2 * u[1],
        edge_fraction: if total > 0.0 { inside / total } else { 0.0 },
        profile: profile.iter().map(|p| p * cell.node_area()).collect(),
    };
    (s, u)
}

/// Advances `state` by RK4 and records energy, centroid and edge fraction.
pub fn evolve_linear(state: &mut MaxwellState, op: &mut MaxwellOperator, opts: &MaxwellEvolveOptions) -> Result<MaxwellTrajectory> {
    if state.cell.len() != op.cell.len() || (state.k - op.k).norm() > 1e-12 || state.frame != op.frame {
        return Err(Error::GridMismatch("state and operator use different supercells, shifts or frames".into()));
    }
    if !(opts.dt > 0.0 && opts.dt.is_finite()) {
        return Err(Error::InvalidInput(format!("dt {} must be positive", opts.dt)));
    }
    let bound = op.max_dt();
    if opts.dt > bound {
        return Err(Error::StepTooLarge { dt: opts.dt, bound });
    }
    let start = Instant::now();
    let w = op.weight.clone();
    let mut traj = MaxwellTrajectory {
        dt: opts.dt,
        ..Default::default()
    };
    let (s0, mut u) = sample_state(state, &w, opts.tube_half_width, None);
    traj.samples.push(s0);
    if opts.snapshot_every > 0 {
        traj.snapshots.push((state.time, state.energy_density(&w)));
    }
    let t0 = state.time;
    let mut scratch = Rk4Scratch::new(state.psi.len());
    for step in 1..=opts.steps {
        op.rk4_step(&mut state.psi, opts.dt, &mut scratch);
        state.time = t0 + step as f64 * opts.dt;
        let sample = opts.sample_every > 0 && step % opts.sample_every == 0;
        if sample || step == opts.steps {
            if !state.is_finite() {
                return Err(Error::Blowup { step, time: state.time });
            }
            if sample {
                let (s, un) = sample_state(state, &w, opts.tube_half_width, Some(u));
                u = un;
                traj.samples.push(s);
            }
        }
        if opts.snapshot_every > 0 && step % opts.snapshot_every == 0 {
            traj.snapshots.push((state.time, state.energy_density(&w)));
        }
    }
    traj.wall_seconds = start.elapsed().as_secs_f64();
    Ok(traj)
}

/// 120° rotation `(𝔯φ)(x) = R φ(R⁻¹x)` on a rhombic supercell grid with
/// zero Bloch shift.
pub fn rotate_state(state: &MaxwellState) -> Result<MaxwellState> {
    let cell = &state.cell;
    if cell.shape != SupercellShape::Rhombic || cell.n1 != cell.n2 || state.k.norm() > 1e-12 {
        return Err(Error::SymmetryUnavailable(
            "rotation needs a rhombic supercell with equal resolution and zero shift".into(),
        ));
    }
    let r = rotation();
    let rinv = r.transpose();
    let n = cell.n1;
    let len = cell.len();
    let mut out = state.clone();
    // u ↦ u' with R⁻¹(u₁a₁ + u₂a₂) = u'₁a₁ + u'₂a₂, an integer map.
    let (b1, b2) = cell.dual();
    let m = |a: Vec2| {
        let y = rinv * a;
        [(y.dot(&b1) / (2.0 * PI)).round() as i64, (y.dot(&b2) / (2.0 * PI)).round() as i64]
    };
    let (c1, c2) = (m(cell.a1), m(cell.a2));
    for idx in 0..len {
        let (i, j) = ((idx / n) as i64, (idx % n) as i64);
        let si = (c1[0] * i + c2[0] * j).rem_euclid(n as i64) as usize;
        let sj = (c1[1] * i + c2[1] * j).rem_euclid(n as i64) as usize;
        let src = si * n + sj;
        let v = state.vector(src);
        let e1 = C64::new(r[(0, 0)], 0.0) * v[0] + C64::new(r[(0, 1)], 0.0) * v[1];
        let e2 = C64::new(r[(1, 0)], 0.0) * v[0] + C64::new(r[(1, 1)], 0.0) * v[1];
        out.psi[idx] = e1;
        out.psi[len + idx] = e2;
        out.psi[2 * len + idx] = v[2];
    }
    Ok(out)
}

/// Envelope observables at one time, in slow variables.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSample {
    pub time: f64,
    pub centroid: [f64; 2],
    pub edge_fraction: f64,
    /// `∫|α|² dX₂` at each `X₁` node.
    pub profile: Vec<f64>,
}

fn envelope_sample(field: &EnvelopeField, tube: f64, prev: Option<[f64; 2]>) -> (EnvelopeSample, [f64; 2]) {
    let g = &field.grid;
    let e = field.energy_density();
    let total: f64 = e.iter().sum();
    let mut inside = 0.0;
    let mut profile = vec![0.0; g.n1];
    for (idx, &w) in e.iter().enumerate() {
        let p = g.point(idx);
        if p[0].abs() <= tube {
            inside += w;
        }
        profile[idx / g.n2] += w * g.spacing()[1];
    }
    let ls = [g.l1, g.l2];
    let mut u = [0.0; 2];
    for (c, uc) in u.iter_mut().enumerate() {
        let m = circular_mean(e.iter().enumerate().map(|(idx, &w)| (w, g.point(idx)[c] / ls[c])));
        *uc = match prev {
            Some(p) => unwrap_near(m, p[c]),
            None => m,
        };
    }
    (
        EnvelopeSample {
            time: field.time,
            centroid: [u[0] * g.l1, u[1] * g.l2],
            edge_fraction: if total > 0.0 { inside / total } else { 0.0 },
            profile,
        },
        u,
    )
}

/// Linear envelope run sampled at the slow times `times` (increasing, from
/// the field's current time). Steps are at most `dt_max`.
pub fn track_envelope(
    field: &mut EnvelopeField,
    mass: &MassProfile,
    theta: f64,
    speed: f64,
    times: &[f64],
    dt_max: f64,
    tube: f64,
) -> Result<Vec<EnvelopeSample>> {
    let grid = field.grid.clone();
    let mut stepper = DiracStepper::new(&grid, &mass.kappa, theta, speed, None);
    let bound = RK4_STABILITY / stepper.frequency_bound(0.0);
    if dt_max > bound {
        return Err(Error::StepTooLarge { dt: dt_max, bound });
    }
    let mut out = Vec::with_capacity(times.len());
    let mut prev = None;
    for &t in times {
        let span = t - field.time;
        if span < -1e-12 {
            return Err(Error::InvalidInput("sample times must increase".into()));
        }
        if span > 1e-12 {
            let sub = (span / dt_max).ceil().max(1.0) as usize;
            let dt = span / sub as f64;
            for _ in 0..sub {
                stepper.rk4_step(&mut field.alpha1, &mut field.alpha2, dt);
            }
            field.time = t;
        }
        if !field.is_finite() {
            return Err(Error::Blowup { step: out.len(), time: t });
        }
        let (s, u) = envelope_sample(field, tube, prev);
        prev = Some(u);
        out.push(s);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub times: Vec<f64>,
    pub maxwell_centroids: Vec<Vec2>,
    /// Envelope centroids mapped through `x = X/δ`.
    pub envelope_centroids: Vec<Vec2>,
    pub discrepancy: Vec<f64>,
    /// Envelope distance traveled over the window, in `x`.
    pub distance: f64,
    pub max_relative_discrepancy: f64,
    pub maxwell_min_edge_fraction: f64,
    pub envelope_min_edge_fraction: f64,
    /// Smallest Pearson correlation of the cross-edge profiles.
    pub profile_correlation: f64,
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Periodic linear interpolation of node values `f` at cell-centred nodes
/// of `[-L/2, L/2)`.
fn interp_periodic(f: &[f64], l: f64, x: f64) -> f64 {
    let n = f.len();
    let h = l / n as f64;
    let s = (wrap(x, l) + 0.5 * l) / h - 0.5;
    let i0 = s.floor();
    let t = s - i0;
    let a = (i0 as i64).rem_euclid(n as i64) as usize;
    let b = (a + 1) % n;
    (1.0 - t) * f[a] + t * f[b]
}

/// Compares Maxwell centroids with the envelope ones mapped to `x = X/δ`.
/// Both trajectories must be sampled at matching times `T = δt`.
pub fn compare_with_envelope(
    maxwell: &MaxwellTrajectory,
    envelope: &[EnvelopeSample],
    envelope_extent: [f64; 2],
    cell: &Supercell,
    delta: f64,
) -> Result<ComparisonReport> {
    if maxwell.samples.len() != envelope.len() || envelope.is_empty() {
        return Err(Error::InvalidInput(format!(
            "trajectory lengths differ: {} Maxwell samples, {} envelope samples",
            maxwell.samples.len(),
            envelope.len()
        )));
    }
    for (m, e) in maxwell.samples.iter().zip(envelope) {
        if (m.time * delta - e.time).abs() > 1e-6 * (1.0 + e.time.abs()) {
            return Err(Error::InvalidInput(format!(
                "sample times do not match: t = {} vs T/δ = {}",
                m.time,
                e.time / delta
            )));
        }
    }
    let mc: Vec<Vec2> = maxwell.samples.iter().map(|s| s.centroid).collect();
    let ec: Vec<Vec2> = envelope
        .iter()
        .map(|s| Vec2::new(s.centroid[0], s.centroid[1]) / delta)
        .collect();
    // Both start from the same packet; align the periodic branches at t = 0.
    let shift = mc[0] - ec[0];
    let ec: Vec<Vec2> = ec.iter().map(|c| c + shift).collect();
    let discrepancy: Vec<f64> = mc.iter().zip(&ec).map(|(a, b)| (a - b).norm()).collect();
    let distance = (ec[ec.len() - 1] - ec[0]).norm();
    let max_rel = discrepancy.iter().fold(0.0f64, |m, d| m.max(*d)) / distance.max(f64::MIN_POSITIVE);
    let mut corr = f64::INFINITY;
    for (m, e) in maxwell.samples.iter().zip(envelope) {
        let nc = cell.cells[0];
        let ev: Vec<f64> = (0..nc)
            .map(|c| {
                let x1 = (-0.5 + (c as f64 + 0.5) / nc as f64) * cell.a1.x;
                interp_periodic(&e.profile, envelope_extent[0], delta * x1)
            })
            .collect();
        corr = corr.min(pearson(&m.profile, &ev));
    }
    Ok(ComparisonReport {
        times: maxwell.samples.iter().map(|s| s.time).collect(),
        maxwell_centroids: mc,
        envelope_centroids: ec,
        discrepancy,
        distance,
        max_relative_discrepancy: max_rel,
        maxwell_min_edge_fraction: maxwell.min_edge_fraction(),
        envelope_min_edge_fraction: envelope.iter().fold(1.0, |m, s| m.min(s.edge_fraction)),
        profile_correlation: corr,
    })
}

/// `max_t |c_a(t) - c_b(t)| / d` for two runs of the same packet, with `d`
/// the distance traveled by `a`.
pub fn refinement_shift(a: &MaxwellTrajectory, b: &MaxwellTrajectory) -> Result<f64> {
    if a.samples.len() != b.samples.len() || a.samples.is_empty() {
        return Err(Error::InvalidInput("trajectory lengths differ".into()));
    }
    let d = (a.samples[a.samples.len() - 1].centroid - a.samples[0].centroid).norm();
    let m = a
        .samples
        .iter()
        .zip(&b.samples)
        .fold(0.0f64, |m, (x, y)| m.max((x.centroid - y.centroid).norm()));
    Ok(m / d.max(f64::MIN_POSITIVE))
}

/// Desk-scale straight-edge comparison. The edge runs along `x₂` through the
/// origin and is wrapped with a compensating wall across `x₁`.
#[derive(Debug, Clone)]
pub struct DeskConfig {
    /// Rectangular cells `√3 × 1`.
    pub cells: [usize; 2],
    pub per_cell: [usize; 2],
    pub delta: f64,
    /// Mass amplitude: `κ(X) = amplitude · tanh(X₁)·tanh(L/2 - |X₁|)`.
    pub amplitude: f64,
    /// Along-edge envelope `e^{-g X₂²}`.
    pub gaussian: f64,
    pub t_end: f64,
    /// `None` picks 90% of the stability bound.
    pub dt: Option<f64>,
    pub samples: usize,
    /// Energy-density snapshots over the run, in addition to `t = 0`
    /// (0 disables).
    pub snapshots: usize,
    pub envelope_grid: [usize; 2],
    pub envelope_dt: f64,
    /// Tube half width in slow units.
    pub tube: f64,
    pub boundary_tol: f64,
}

impl Default for DeskConfig {
    fn default() -> Self {
        Self {
            cells: [52, 60],
            per_cell: [6, 4],
            delta: 0.1,
            amplitude: 4.0,
            gaussian: 0.5,
            t_end: 50.0,
            dt: None,
            samples: 50,
            snapshots: 0,
            envelope_grid: [64, 64],
            envelope_dt: 0.005,
            tube: 2.0,
            boundary_tol: 2e-2,
        }
    }
}

impl DeskConfig {
    /// Same run with doubled per-cell resolution.
    pub fn refined(&self) -> Self {
        let mut c = self.clone();
        c.per_cell = [2 * self.per_cell[0], 2 * self.per_cell[1]];
        c.dt = self.dt.map(|d| 0.5 * d);
        c
    }
}

#[derive(Debug, Clone)]
pub struct DeskRun {
    pub config: DeskConfig,
    pub maxwell: MaxwellTrajectory,
    pub envelope: Vec<EnvelopeSample>,
    pub report: ComparisonReport,
    /// Energy of the assembled packet against `Σ_j ∫|β_j(δx)|² dx / |Ω|`.
    pub energy_quadrature_ratio: f64,
    pub theta: f64,
    pub speed: f64,
}

/// Envelope mass and initial data shared by both sides of the comparison.
fn desk_envelope(cfg: &DeskConfig, cell: &Supercell, dirac: &DiracPointData) -> Result<(Arc<EnvelopeGrid>, MassProfile, f64, impl Fn(Vec2) -> [C64; 2])> {
    let l = [cfg.delta * cell.a1.x, cfg.delta * cell.a2.y];
    let grid = Arc::new(EnvelopeGrid::new(cfg.envelope_grid[0], cfg.envelope_grid[1], l[0], l[1])?);
    let spec = MassSpec::DoubleWall {
        along: Axis::X2,
        shape: EdgeShape::Straight { offset: 0.0 },
        sign: -1.0,
        steepness: 1.0,
    };
    let mass = MassProfile::build(spec, &grid)?;
    let theta = dirac.theta_sharp * cfg.amplitude;
    let state = mass
        .edge_state(theta, dirac.cd)
        .ok_or_else(|| Error::InvalidInput("straight edge has no edge state".into()))?;
    let (sp, decay, g) = (state.spinor, state.decay, cfg.gaussian);
    let beta = move |x: Vec2| {
        let a = (1.0 / x.x.cosh()).powf(decay) * (-g * x.y * x.y).exp();
        [sp[0] * a, sp[1] * a]
    };
    Ok((grid, mass, theta, beta))
}

/// Runs the Maxwell packet and the envelope prediction and compares them.
pub fn run_desk_comparison(cfg: &DeskConfig, dirac: &DiracPointData, base: &MaterialWeight, v: &PerturbationWeight) -> Result<DeskRun> {
    let cell = Arc::new(Supercell::rectangular(cfg.cells, cfg.per_cell)?);
    let (egrid, mass, theta, beta) = desk_envelope(cfg, &cell, dirac)?;
    let lx = cfg.delta * cell.a1.x;
    let amp = cfg.amplitude;
    let kappa: SlowProfile = Arc::new(move |x: Vec2| amp * -double_wall(wrap(-x.x, lx), lx, 1.0));
    let weight = ModulatedWeight::new(base.clone(), v.clone(), cfg.delta, kappa)?;
    let samples = Arc::new(weight.sample(&cell)?);
    let mut state = assemble_packet(&dirac.psi1, &dirac.psi2, &beta, cfg.delta, cell.clone(), dirac.omega_d, cfg.boundary_tol)?;
    let mut op = MaxwellOperator::new(cell.clone(), samples.clone(), state.k, dirac.omega_d)?;

    let quad: f64 = (0..cell.len())
        .map(|idx| {
            let b = beta(cell.wrapped(cell.point(idx)) * cfg.delta);
            b[0].norm_sqr() + b[1].norm_sqr()
        })
        .sum::<f64>()
        * cell.node_area()
        / HexLattice::standard().cell_area();
    let energy_quadrature_ratio = state.energy(&samples) / quad;

    let bound = op.max_dt();
    let dt_req = cfg.dt.unwrap_or(0.9 * bound);
    let steps_per_sample = (cfg.t_end / cfg.samples as f64 / dt_req).ceil().max(1.0) as usize;
    let steps = steps_per_sample * cfg.samples;
    let dt = cfg.t_end / steps as f64;
    let opts = MaxwellEvolveOptions {
        dt,
        steps,
        sample_every: steps_per_sample,
        snapshot_every: if cfg.snapshots > 0 { steps.div_ceil(cfg.snapshots) } else { 0 },
        tube_half_width: cfg.tube / cfg.delta,
    };
    let maxwell = evolve_linear(&mut state, &mut op, &opts)?;

    let a1 = egrid.sample(|x1, x2| beta(Vec2::new(x1, x2))[0]);
    let a2 = egrid.sample(|x1, x2| beta(Vec2::new(x1, x2))[1]);
    let mut field = EnvelopeField::new(egrid.clone(), a1, a2)?;
    let times: Vec<f64> = maxwell.samples.iter().map(|s| s.time * cfg.delta).collect();
    let envelope = track_envelope(&mut field, &mass, theta, dirac.cd, &times, cfg.envelope_dt, cfg.tube)?;
    let report = compare_with_envelope(&maxwell, &envelope, [egrid.l1, egrid.l2], &cell, cfg.delta)?;
    Ok(DeskRun {
        config: cfg.clone(),
        maxwell,
        envelope,
        report,
        energy_quadrature_ratio,
        theta,
        speed: dirac.cd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::symbol;
    use crate::dirac::DiracOptions;
    use approx::assert_abs_diff_eq;

    fn identity_op(cell: Arc<Supercell>, k: Vec2) -> MaxwellOperator {
        let w = ModulatedWeight::unmodulated(MaterialWeight::identity());
        let s = Arc::new(w.sample(&cell).unwrap());
        MaxwellOperator::new(cell, s, k, 0.0).unwrap()
    }

    #[test]
    fn dual_vectors() {
        let c = Supercell::rhombic(3, 4).unwrap();
        let (b1, b2) = c.dual();
        assert_abs_diff_eq!(c.a1.dot(&b1), 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(c.a1.dot(&b2), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.a2.dot(&b2), 2.0 * PI, epsilon = 1e-12);
        let r = Supercell::rectangular([2, 3], [4, 4]).unwrap();
        assert_abs_diff_eq!(r.area(), 2.0 * 3f64.sqrt() * 3.0, epsilon = 1e-12);
    }

    #[test]
    fn plane_wave_rotates_phase() {
        let cell = Arc::new(Supercell::rectangular([1, 1], [8, 8]).unwrap());
        let (b1, b2) = cell.dual();
        let k = Vec2::new(0.3, -0.2);
        let q = k + b1 * 1.0 + b2 * 2.0;
        let omega = q.norm();
        let v = Vector3::new(C64::new(-q.x / omega, 0.0), C64::new(-q.y / omega, 0.0), C64::new(1.0, 0.0));
        let sv = symbol(q) * v;
        assert!((sv - v * C64::new(omega, 0.0)).norm() < 1e-12);
        let mut op = identity_op(cell.clone(), k);
        let mut st = MaxwellState::zeros(cell.clone(), k, 0.0);
        let n = cell.len();
        for idx in 0..n {
            let e = C64::from_polar(1.0, (q - k).dot(&cell.point(idx)));
            for c in 0..3 {
                st.psi[c * n + idx] = v[c] * e;
            }
        }
        let init = st.clone();
        let opts = MaxwellEvolveOptions {
            dt: 1e-3,
            steps: 1000,
            sample_every: 0,
            ..Default::default()
        };
        evolve_linear(&mut st, &mut op, &opts).unwrap();
        let rot = C64::from_polar(1.0, omega * st.time);
        let err = st.psi.iter().zip(&init.psi).fold(0.0f64, |m, (a, b)| m.max((a - b * rot).norm()));
        assert!(err < 1e-8, "phase error {err:e}");
    }

    #[test]
    fn step_above_bound_is_rejected() {
        let cell = Arc::new(Supercell::rectangular([1, 1], [8, 8]).unwrap());
        let mut op = identity_op(cell.clone(), Vec2::zeros());
        let mut st = MaxwellState::zeros(cell, Vec2::zeros(), 0.0);
        let opts = MaxwellEvolveOptions {
            dt: 2.0 * op.max_dt(),
            ..Default::default()
        };
        assert!(matches!(evolve_linear(&mut st, &mut op, &opts), Err(Error::StepTooLarge { .. })));
    }

    #[test]
    fn rotation_commutes_with_evolution() {
        let cell = Arc::new(Supercell::rhombic(2, 12).unwrap());
        let w = ModulatedWeight::unmodulated(MaterialWeight::example());
        let s = Arc::new(w.sample(&cell).unwrap());
        let mut op = MaxwellOperator::new(cell.clone(), s, Vec2::zeros(), 0.0).unwrap();
        let mut st = MaxwellState::zeros(cell.clone(), Vec2::zeros(), 0.0);
        let n = cell.len();
        let c0 = cell.a1 * 0.5 + cell.a2 * 0.5;
        for idx in 0..n {
            let d = cell.wrapped(cell.point(idx) - c0);
            let g = (-0.8 * d.norm_squared()).exp();
            st.psi[idx] = C64::new(g * (1.0 + d.x), 0.3 * g);
            st.psi[n + idx] = C64::new(0.5 * g * d.y, 0.0);
            st.psi[2 * n + idx] = C64::new(g, -g * d.x);
        }
        let opts = MaxwellEvolveOptions {
            dt: 0.5 * op.max_dt(),
            steps: 40,
            sample_every: 0,
            ..Default::default()
        };
        let mut a = rotate_state(&st).unwrap();
        evolve_linear(&mut a, &mut op, &opts).unwrap();
        evolve_linear(&mut st, &mut op, &opts).unwrap();
        let b = rotate_state(&st).unwrap();
        let rel = a.max_diff(&b) / a.max_abs();
        assert!(rel < 1e-8, "commutation residual {rel:e}");
    }

    #[test]
    fn energy_is_conserved_with_modulation() {
        let cell = Arc::new(Supercell::rectangular([4, 4], [6, 6]).unwrap());
        let lx = cell.a1.x * 0.2;
        let kappa: SlowProfile = Arc::new(move |x: Vec2| double_wall(wrap(x.x, lx), lx, 1.0));
        let w = ModulatedWeight::new(MaterialWeight::example(), PerturbationWeight::example(), 0.2, kappa).unwrap();
        let s = Arc::new(w.sample(&cell).unwrap());
        let mut op = MaxwellOperator::new(cell.clone(), s.clone(), Vec2::zeros(), 0.0).unwrap();
        let mut st = MaxwellState::zeros(cell.clone(), Vec2::zeros(), 0.0);
        let n = cell.len();
        for idx in 0..n {
            let d = cell.wrapped(cell.point(idx));
            let g = (-0.3 * d.norm_squared()).exp();
            st.psi[idx] = C64::new(g, 0.0);
            st.psi[2 * n + idx] = C64::new(0.0, g);
        }
        let opts = MaxwellEvolveOptions {
            dt: 0.05 * op.max_dt(),
            steps: 200,
            sample_every: 20,
            ..Default::default()
        };
        let traj = evolve_linear(&mut st, &mut op, &opts).unwrap();
        assert!(traj.energy_drift() < 1e-8, "drift {:e}", traj.energy_drift());
    }

    #[test]
    fn blowup_is_reported() {
        let cell = Arc::new(Supercell::rectangular([1, 1], [4, 4]).unwrap());
        let mut op = identity_op(cell.clone(), Vec2::zeros());
        let mut st = MaxwellState::zeros(cell, Vec2::zeros(), 0.0);
        st.psi[0] = C64::new(f64::NAN, 0.0);
        let opts = MaxwellEvolveOptions {
            dt: 0.01,
            steps: 4,
            sample_every: 2,
            ..Default::default()
        };
        assert!(matches!(evolve_linear(&mut st, &mut op, &opts), Err(Error::Blowup { step: 2, .. })));
    }

    #[test]
    fn assembled_constant_envelope_reproduces_mode_and_is_stationary() {
        let opts = DiracOptions {
            truncation: 6,
            fit: false,
            ..Default::default()
        };
        let d = DiracPointData::compute(&MaterialWeight::example(), &PerturbationWeight::example(), &opts).unwrap();
        let cell = Arc::new(Supercell::rectangular([1, 1], [16, 16]).unwrap());
        let one = C64::new(1.0, 0.0);
        let st = assemble_packet(&d.psi1, &d.psi2, |_| [one, ZERO], 0.1, cell.clone(), d.omega_d, 1.5).unwrap();
        let lat = HexLattice::standard();
        let mut err = 0.0f64;
        for idx in (0..cell.len()).step_by(7) {
            let direct = d.psi1.eval(&lat, cell.point(idx));
            err = err.max((st.physical(idx) - direct).norm());
        }
        assert!(err < 1e-10, "synthesis error {err:e}");

        let w = ModulatedWeight::unmodulated(MaterialWeight::example());
        let s = Arc::new(w.sample(&cell).unwrap());
        let mut op = MaxwellOperator::new(cell.clone(), s, st.k, d.omega_d).unwrap();
        let mut run = st.clone();
        let steps = (1.0 / (0.5 * op.max_dt())).ceil() as usize;
        let opts = MaxwellEvolveOptions {
            dt: 1.0 / steps as f64,
            steps,
            sample_every: 0,
            ..Default::default()
        };
        evolve_linear(&mut run, &mut op, &opts).unwrap();
        let rel = run.max_diff(&st) / st.max_abs();
        assert!(rel < 1e-4, "Bloch mode drifted by {rel:e} in the rotating frame");
    }

    #[test]
    fn boundary_decay_is_checked() {
        let opts = DiracOptions {
            truncation: 6,
            fit: false,
            ..Default::default()
        };
        let d = DiracPointData::compute(&MaterialWeight::example(), &PerturbationWeight::example(), &opts).unwrap();
        let cell = Arc::new(Supercell::rectangular([4, 4], [6, 4]).unwrap());
        let wide = |x: Vec2| [C64::new((-0.1 * x.norm_squared()).exp(), 0.0), ZERO];
        let r = assemble_packet(&d.psi1, &d.psi2, wide, 0.1, cell, d.omega_d, BOUNDARY_TOL);
        assert!(matches!(r, Err(Error::DomainTooSmall(_))));
    }

    #[test]
    fn circular_centroid_unwraps() {
        assert_abs_diff_eq!(unwrap_near(-0.45, 0.48), 0.55, epsilon = 1e-12);
        let m = circular_mean([(1.0, 0.49), (1.0, -0.49)].into_iter());
        assert_abs_diff_eq!(m.abs(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn comparison_rejects_length_mismatch() {
        let cell = Supercell::rectangular([2, 2], [4, 4]).unwrap();
        let t = MaxwellTrajectory::default();
        let e = vec![EnvelopeSample {
            time: 0.0,
            centroid: [0.0; 2],
            edge_fraction: 1.0,
            profile: vec![1.0; 4],
        }];
        assert!(compare_with_envelope(&t, &e, [1.0, 1.0], &cell, 0.1).is_err());
    }
}
