//! Plane-wave Bloch eigenproblem `W𝓛Ψ = ωΨ`, symmetry operators and the
//! rotation eigenspace decomposition.
//!
//! A field at quasi-momentum `k` is stored as coefficients `û_m ∈ C³` of
//! `Ψ(x) = Σ_m û_m e^{i(k + G_m)·x}` over a [`FourierIndexSet`]. The problem
//! is solved as the Hermitian pencil `L û = ω B û`, where `L` is the
//! block-diagonal symbol of `𝓛` and `B` the convolution matrix of `W^(-1)`.

use std::sync::Arc;

use faer::linalg::triangular_solve::{solve_lower_triangular_in_place, solve_upper_triangular_in_place};
use faer::{Mat, Par, Side};
use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{is_rotation_fixed, rotation, FourierIndexSet, HexLattice, KPoint, Vec2};
use crate::material::{cell_grid, FourierTable, Mat3c, MaterialWeight};
use crate::spectral::Fft2;

/// Relative cutoff below which eigenvalues are treated as the gradient kernel.
pub const ZERO_FILTER: f64 = 1e-6;
/// Eigenvalues in `[cutoff, AMBIGUITY_FACTOR·cutoff)` are rejected as ambiguous.
pub const AMBIGUITY_FACTOR: f64 = 100.0;
/// Relative distance under which eigenvalues are grouped as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-6;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Symbol of `𝓛` at wavevector `q`.
pub fn symbol(q: Vec2) -> Mat3c {
    let (a, b) = (C64::new(-q.x, 0.0), C64::new(-q.y, 0.0));
    Matrix3::new(ZERO, ZERO, a, ZERO, ZERO, b, a, b, ZERO)
}

fn rotation3() -> Matrix3<f64> {
    let r = rotation();
    Matrix3::new(r[(0, 0)], r[(0, 1)], 0.0, r[(1, 0)], r[(1, 1)], 0.0, 0.0, 0.0, 1.0)
}

/// Fourier grid large enough to hold all differences `m - n` of the set
/// without wrap-around.
pub fn table_grid_for(set: &FourierIndexSet) -> usize {
    let d = 2 * set.max_abs() as usize;
    (2 * d + 2).next_power_of_two().max(32)
}

/// Fourier tables of `W` and `W^(-1)` shared by every problem built on the
/// same weight.
#[derive(Debug, Clone)]
pub struct SpectralWeight {
    pub lattice: HexLattice,
    pub weight: MaterialWeight,
    pub inverse: FourierTable,
    pub forward: FourierTable,
}

impl SpectralWeight {
    pub fn new(weight: &MaterialWeight, grid: usize) -> Self {
        let lattice = HexLattice::standard();
        let inverse = FourierTable::compute(&lattice, |x| weight.eval_inverse(x), grid / 4, grid);
        let forward = FourierTable::compute(&lattice, |x| weight.eval(x), grid / 4, grid);
        Self {
            lattice,
            weight: weight.clone(),
            inverse,
            forward,
        }
    }

    /// Tables sized for a disk of the given truncation.
    pub fn for_truncation(weight: &MaterialWeight, truncation: usize) -> Self {
        let lat = HexLattice::standard();
        let probe = FourierIndexSet::disk(&lat, truncation, [1.0 / 3.0, -1.0 / 3.0]);
        Self::new(weight, table_grid_for(&probe))
    }

    /// `⟨a, b⟩_W = ∫_Ω a* W^(-1) b dx`.
    pub fn inner(&self, a: &BlochField, b: &BlochField) -> Result<C64> {
        a.check_same_space(b)?;
        Ok(self.lattice.cell_area() * bilinear(&self.inverse, &a.basis, &a.coeffs, &b.coeffs))
    }

    pub fn norm(&self, a: &BlochField) -> f64 {
        self.inner(a, a).map(|z| z.re.max(0.0).sqrt()).unwrap_or(f64::NAN)
    }

    /// Galerkin action of `M_W = W𝓛` on the span of the field's basis.
    pub fn apply_maxwell(&self, a: &BlochField) -> BlochField {
        let set = &a.basis;
        let lq: Vec<Vector3<C64>> = (0..set.len())
            .map(|j| {
                let q = a.wavevector(&self.lattice, j);
                symbol(q) * a.vector(j)
            })
            .collect();
        let mut out = BlochField::zeros(a.k, a.basis.clone());
        for (i, mi) in set.indices().iter().enumerate() {
            let mut acc = Vector3::zeros();
            for (j, mj) in set.indices().iter().enumerate() {
                acc += self.forward.coeff([mi[0] - mj[0], mi[1] - mj[1]]) * lq[j];
            }
            out.set_vector(i, acc);
        }
        out
    }
}

/// `Σ_{m,n} conj(a_m)ᵀ T_{m-n} b_n`.
fn bilinear(table: &FourierTable, set: &FourierIndexSet, a: &[C64], b: &[C64]) -> C64 {
    let mut acc = ZERO;
    for (i, mi) in set.indices().iter().enumerate() {
        let ai = Vector3::new(a[3 * i], a[3 * i + 1], a[3 * i + 2]);
        if ai.iter().all(|z| *z == ZERO) {
            continue;
        }
        let mut row = Vector3::zeros();
        for (j, mj) in set.indices().iter().enumerate() {
            let bj = Vector3::new(b[3 * j], b[3 * j + 1], b[3 * j + 2]);
            row += table.coeff([mi[0] - mj[0], mi[1] - mj[1]]) * bj;
        }
        acc += ai.dotc(&row);
    }
    acc
}

/// Plane-wave representation of a `k`-quasi-periodic 3-component field.
#[derive(Debug, Clone)]
pub struct BlochField {
    pub k: Vec2,
    pub basis: Arc<FourierIndexSet>,
    /// `coeffs[3 i + c]` is component `c` of `û_{m_i}`.
    pub coeffs: Vec<C64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryOp {
    Rotation,
    Parity,
    TimeReversal,
    ParityTime,
}

impl BlochField {
    pub fn zeros(k: Vec2, basis: Arc<FourierIndexSet>) -> Self {
        let n = 3 * basis.len();
        Self {
            k,
            basis,
            coeffs: vec![ZERO; n],
        }
    }

    pub fn from_coeffs(k: Vec2, basis: Arc<FourierIndexSet>, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != 3 * basis.len() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients for {} indices",
                coeffs.len(),
                basis.len()
            )));
        }
        Ok(Self { k, basis, coeffs })
    }

    pub fn vector(&self, i: usize) -> Vector3<C64> {
        Vector3::new(self.coeffs[3 * i], self.coeffs[3 * i + 1], self.coeffs[3 * i + 2])
    }

    pub fn set_vector(&mut self, i: usize, v: Vector3<C64>) {
        self.coeffs[3 * i..3 * i + 3].copy_from_slice(v.as_slice());
    }

    pub fn wavevector(&self, lattice: &HexLattice, i: usize) -> Vec2 {
        self.k + lattice.dual_index(self.basis.indices()[i])
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|z| *z *= c);
        out
    }

    /// `self + c·other`.
    pub fn add_scaled(&self, c: C64, other: &Self) -> Result<Self> {
        self.check_same_space(other)?;
        let mut out = self.clone();
        for (z, w) in out.coeffs.iter_mut().zip(&other.coeffs) {
            *z += c * w;
        }
        Ok(out)
    }

    /// Largest coefficient difference.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn check_same_space(&self, other: &Self) -> Result<()> {
        let same_basis = Arc::ptr_eq(&self.basis, &other.basis) || *self.basis == *other.basis;
        if !same_basis || (self.k - other.k).norm() > 1e-12 {
            return Err(Error::GridMismatch(
                "fields live on different quasi-momenta or index sets".into(),
            ));
        }
        Ok(())
    }

    pub fn apply(&self, op: SymmetryOp, lattice: &HexLattice) -> Result<Self> {
        match op {
            SymmetryOp::Rotation => self.rotate(lattice),
            SymmetryOp::Parity => Ok(self.reflect(false)),
            SymmetryOp::TimeReversal => Ok(self.reflect(true)),
            SymmetryOp::ParityTime => Ok(self.parity_time()),
        }
    }

    /// `𝔯Ψ(x) = diag(R, 1) Ψ(Rᵀx)`. Needs a rotation-closed basis anchored at `k`.
    pub fn rotate(&self, lattice: &HexLattice) -> Result<Self> {
        let anchor = lattice.dual_point(self.basis.anchor());
        if (anchor - self.k).norm() > 1e-9 || !is_rotation_fixed(self.basis.anchor()) {
            return Err(Error::SymmetryUnavailable(format!(
                "rotation needs a high-symmetry quasi-momentum, got ({:.6}, {:.6})",
                self.k.x, self.k.y
            )));
        }
        let perm = self.basis.rotation_permutation().ok_or_else(|| {
            Error::SymmetryUnavailable("index set is not closed under rotation".into())
        })?;
        let r = rotation3().map(|x| C64::new(x, 0.0));
        let mut out = Self::zeros(self.k, self.basis.clone());
        for (i, &j) in perm.iter().enumerate() {
            out.set_vector(j, r * self.vector(i));
        }
        Ok(out)
    }

    /// `𝔓𝔗Ψ(x) = conj(Ψ(-x))`; stays at `k`.
    pub fn parity_time(&self) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|z| *z = z.conj());
        out
    }

    /// `𝔓Ψ(x) = D Ψ(-x)` or `𝔗Ψ(x) = D conj(Ψ(x))` with `D = diag(-1, -1, 1)`;
    /// both map `k` to `-k`.
    fn reflect(&self, conjugate: bool) -> Self {
        let basis = Arc::new(self.basis.negated());
        let mut out = Self::zeros(-self.k, basis.clone());
        for (i, m) in self.basis.indices().iter().enumerate() {
            let j = basis.position([-m[0], -m[1]]).expect("negated set contains -m");
            let v = self.vector(i);
            let v = if conjugate { v.map(|z| z.conj()) } else { v };
            out.set_vector(j, Vector3::new(-v[0], -v[1], v[2]));
        }
        out
    }

    /// Periodic part `u(x) = e^{-ik·x}Ψ(x)` at the cell grid points
    /// `s = (i/n, j/n)`, one array per component, row-major in `i`.
    pub fn periodic_grid(&self, n: usize) -> Result<[Vec<C64>; 3]> {
        if n < 2 * self.basis.max_abs() as usize + 1 {
            return Err(Error::GridMismatch(format!(
                "grid {n} cannot hold indices up to {}",
                self.basis.max_abs()
            )));
        }
        let fft = Fft2::new(n, n);
        let scale = (n * n) as f64;
        let ni = n as i32;
        let mut out: [Vec<C64>; 3] = Default::default();
        for (c, slot) in out.iter_mut().enumerate() {
            let mut buf = vec![ZERO; n * n];
            for (i, m) in self.basis.indices().iter().enumerate() {
                let a = m[0].rem_euclid(ni) as usize;
                let b = m[1].rem_euclid(ni) as usize;
                buf[a * n + b] += self.coeffs[3 * i + c] * scale;
            }
            fft.inverse(&mut buf);
            *slot = buf;
        }
        Ok(out)
    }

    /// Direct evaluation of `Ψ(x)`.
    pub fn eval(&self, lattice: &HexLattice, x: Vec2) -> Vector3<C64> {
        let mut acc = Vector3::zeros();
        for i in 0..self.basis.len() {
            let ph = self.wavevector(lattice, i).dot(&x);
            acc += self.vector(i) * C64::new(ph.cos(), ph.sin());
        }
        acc
    }
}

/// Bloch eigenproblem at one quasi-momentum.
#[derive(Debug, Clone)]
pub struct BlochProblem {
    pub k: KPoint,
    pub tables: Arc<SpectralWeight>,
    pub basis: Arc<FourierIndexSet>,
}

#[derive(Debug, Clone)]
pub struct BlochEigenpair {
    pub omega: f64,
    /// 1-based index among positive bands.
    pub band: usize,
    pub field: BlochField,
    /// `‖Lû - ωBû‖ / ‖û‖`.
    pub residual: f64,
}

impl BlochProblem {
    /// Problem on a disk basis anchored at `k` itself.
    pub fn new(tables: Arc<SpectralWeight>, k: Vec2, truncation: usize) -> Self {
        let lat = tables.lattice;
        let basis = Arc::new(FourierIndexSet::disk(&lat, truncation, lat.reduced(k)));
        Self::with_basis(tables, k, basis)
    }

    pub fn with_basis(tables: Arc<SpectralWeight>, k: Vec2, basis: Arc<FourierIndexSet>) -> Self {
        let kp = KPoint {
            k,
            reduced: tables.lattice.reduced(k),
        };
        Self { k: kp, tables, basis }
    }

    pub fn dimension(&self) -> usize {
        3 * self.basis.len()
    }

    /// `(L, B)` in the plane-wave basis.
    pub fn assemble(&self) -> (Mat<C64>, Mat<C64>) {
        let n = self.dimension();
        let lat = &self.tables.lattice;
        let idx = self.basis.indices();
        let mut l = Mat::<C64>::zeros(n, n);
        for (i, m) in idx.iter().enumerate() {
            let s = symbol(self.k.k + lat.dual_index(*m));
            for a in 0..3 {
                for b in 0..3 {
                    l[(3 * i + a, 3 * i + b)] = s[(a, b)];
                }
            }
        }
        let mut bm = Mat::<C64>::zeros(n, n);
        for (i, mi) in idx.iter().enumerate() {
            for (j, mj) in idx.iter().enumerate() {
                let c = self.tables.inverse.coeff([mi[0] - mj[0], mi[1] - mj[1]]);
                for a in 0..3 {
                    for b in 0..3 {
                        bm[(3 * i + a, 3 * j + b)] = c[(a, b)];
                    }
                }
            }
        }
        (l, bm)
    }

    /// The `count` smallest positive eigenvalues with `W`-normalized fields.
    pub fn solve_bands(&self, count: usize) -> Result<Vec<BlochEigenpair>> {
        let (l, b) = self.assemble();
        let n = self.dimension();
        let llt = b.llt(Side::Lower).map_err(|e| {
            Error::NotPositiveDefinite(format!("Cholesky of B failed ({e:?}) at dimension {n}"))
        })?;
        let lf = llt.L();
        // C = L⁻¹ S L⁻ᴴ
        let mut x = l.clone();
        solve_lower_triangular_in_place(lf, x.as_mut(), Par::Seq);
        let mut c = x.adjoint().to_owned();
        solve_lower_triangular_in_place(lf, c.as_mut(), Par::Seq);
        let eig = c
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
        let vals: Vec<f64> = eig.S().column_vector().iter().map(|z| z.re).collect();
        let max_abs = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let cutoff = ZERO_FILTER * max_abs;
        if let Some(v) = vals
            .iter()
            .find(|v| v.abs() >= cutoff && v.abs() < AMBIGUITY_FACTOR * cutoff)
        {
            return Err(Error::ZeroFilterAmbiguity { omega: *v, cutoff });
        }
        let positive: Vec<usize> = (0..n).filter(|&i| vals[i] >= cutoff).take(count).collect();
        if positive.is_empty() {
            return Ok(Vec::new());
        }
        let mut y = Mat::<C64>::zeros(n, positive.len());
        for (col, &i) in positive.iter().enumerate() {
            for r in 0..n {
                y[(r, col)] = eig.U()[(r, i)];
            }
        }
        solve_upper_triangular_in_place(lf.adjoint(), y.as_mut(), Par::Seq);
        let norm = 1.0 / self.tables.lattice.cell_area().sqrt();
        let mut out = Vec::with_capacity(positive.len());
        for (col, &i) in positive.iter().enumerate() {
            let coeffs: Vec<C64> = (0..n).map(|r| y[(r, col)] * norm).collect();
            let omega = vals[i];
            let residual = pencil_residual(&l, &b, &coeffs, omega);
            out.push(BlochEigenpair {
                omega,
                band: col + 1,
                field: BlochField {
                    k: self.k.k,
                    basis: self.basis.clone(),
                    coeffs,
                },
                residual,
            });
        }
        Ok(out)
    }

    /// Relative residual of `W𝓛Ψ = ωΨ` evaluated pointwise on an `n × n`
    /// cell grid, independent of the matrix assembly.
    pub fn physical_residual(&self, pair: &BlochEigenpair, n: usize) -> Result<f64> {
        let lat = &self.tables.lattice;
        let u = pair.field.periodic_grid(n)?;
        let mut lu_field = pair.field.clone();
        for i in 0..lu_field.basis.len() {
            let q = pair.field.wavevector(lat, i);
            lu_field.set_vector(i, symbol(q) * pair.field.vector(i));
        }
        let lu = lu_field.periodic_grid(n)?;
        let (mut num, mut den) = (0.0, 0.0);
        for (p, x) in cell_grid(lat, n).enumerate() {
            let w = self.tables.weight.eval(x);
            let luv = Vector3::new(lu[0][p], lu[1][p], lu[2][p]);
            let uv = Vector3::new(u[0][p], u[1][p], u[2][p]);
            num += (w * luv - uv * C64::new(pair.omega, 0.0)).norm_squared();
            den += uv.norm_squared();
        }
        Ok((num / den).sqrt())
    }
}

fn pencil_residual(l: &Mat<C64>, b: &Mat<C64>, u: &[C64], omega: f64) -> f64 {
    let n = u.len();
    let (mut num, mut den) = (0.0, 0.0);
    for r in 0..n {
        let mut acc = ZERO;
        for c in 0..n {
            acc += (l[(r, c)] - b[(r, c)] * omega) * u[c];
        }
        num += acc.norm_sqr();
        den += u[r].norm_sqr();
    }
    (num / den).sqrt()
}

/// Groups consecutive eigenpairs whose frequencies agree within
/// `DEGENERACY_TOL` relative distance.
pub fn degenerate_groups(pairs: &[BlochEigenpair]) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=pairs.len() {
        let split = i == pairs.len()
            || (pairs[i].omega - pairs[i - 1].omega).abs() > DEGENERACY_TOL * pairs[i - 1].omega.abs().max(1e-300);
        if split {
            groups.push(start..i);
            start = i;
        }
    }
    groups
}

/// Band values `ω_b(k)` for each sampled quasi-momentum.
#[derive(Debug, Clone, PartialEq)]
pub struct BandTable {
    pub kpoints: Vec<Vec2>,
    pub omegas: Vec<Vec<f64>>,
}

/// Solves `bands` positive bands at every `k`, in parallel over `k`-points
/// with results kept in input order.
pub fn band_surface_sweep(
    weight: &MaterialWeight,
    kpoints: &[Vec2],
    bands: usize,
    truncation: usize,
) -> Result<BandTable> {
    let tables = Arc::new(SpectralWeight::for_truncation(weight, truncation));
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(kpoints.len().max(1));
    let chunk = kpoints.len().div_ceil(workers).max(1);
    let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|s| {
        let handles: Vec<_> = kpoints
            .chunks(chunk)
            .map(|ks| {
                let tables = tables.clone();
                s.spawn(move || {
                    ks.iter()
                        .map(|&k| {
                            BlochProblem::new(tables.clone(), k, truncation)
                                .solve_bands(bands)
                                .map(|p| p.iter().map(|e| e.omega).collect())
                                .map_err(|e| {
                                    Error::Eigensolver(format!("at k = ({:.6}, {:.6}): {e}", k.x, k.y))
                                })
                        })
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep worker panicked")).collect()
    });
    let mut omegas = Vec::with_capacity(kpoints.len());
    for r in results {
        omegas.extend(r?);
    }
    Ok(BandTable {
        kpoints: kpoints.to_vec(),
        omegas,
    })
}

/// Eigenvalue label of the rotation operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sigma {
    One,
    Tau,
    TauBar,
}

impl Sigma {
    pub const ALL: [Sigma; 3] = [Sigma::One, Sigma::Tau, Sigma::TauBar];

    pub fn value(self) -> C64 {
        let t = 2.0 * std::f64::consts::PI / 3.0;
        match self {
            Sigma::One => C64::new(1.0, 0.0),
            Sigma::Tau => C64::new(t.cos(), t.sin()),
            Sigma::TauBar => C64::new(t.cos(), -t.sin()),
        }
    }

    pub fn index(self) -> usize {
        match self {
            Sigma::One => 0,
            Sigma::Tau => 1,
            Sigma::TauBar => 2,
        }
    }

    pub fn conj(self) -> Self {
        match self {
            Sigma::One => Sigma::One,
            Sigma::Tau => Sigma::TauBar,
            Sigma::TauBar => Sigma::Tau,
        }
    }
}

/// `P_σ = (1/3) Σ_j σ̄^j 𝔯^j`.
pub fn project(field: &BlochField, sigma: Sigma, lattice: &HexLattice) -> Result<BlochField> {
    let r1 = field.rotate(lattice)?;
    let r2 = r1.rotate(lattice)?;
    let s = sigma.value().conj();
    let third = C64::new(1.0 / 3.0, 0.0);
    field
        .add_scaled(s, &r1)?
        .add_scaled(s * s, &r2)
        .map(|f| f.scaled(third))
}

#[derive(Debug, Clone)]
pub struct SymmetryDecomposition {
    /// `‖P_σ u‖²_W / ‖u‖²_W` per input, ordered as [`Sigma::ALL`].
    pub weights: Vec<[f64; 3]>,
    /// Dominant label per input when its weight exceeds 0.99.
    pub labels: Vec<Option<Sigma>>,
    /// `tr(P_σ)` restricted to the span of the inputs.
    pub traces: [f64; 3],
    pub multiplicities: [usize; 3],
    /// `W`-orthonormal basis of the span with one label per vector.
    pub basis: Vec<(Sigma, BlochField)>,
    /// Set when an input has no dominant label or a trace is far from an integer.
    pub flagged: bool,
}

impl SymmetryDecomposition {
    pub fn multiplicity(&self, s: Sigma) -> usize {
        self.multiplicities[s.index()]
    }

    pub fn labeled(&self, s: Sigma) -> Option<&BlochField> {
        self.basis.iter().find(|(t, _)| *t == s).map(|(_, f)| f)
    }
}

/// Splits the span of `fields` (taken at a rotation-fixed quasi-momentum)
/// into rotation eigenspaces.
pub fn decompose_rotation_eigenspaces(
    tables: &SpectralWeight,
    fields: &[BlochField],
) -> Result<SymmetryDecomposition> {
    let lat = &tables.lattice;
    let n = fields.len();
    let mut proj: Vec<Vec<BlochField>> = Vec::with_capacity(3);
    for s in Sigma::ALL {
        proj.push(fields.iter().map(|f| project(f, s, lat)).collect::<Result<_>>()?);
    }
    let gram = DMatrix::<C64>::from_fn(n, n, |i, j| tables.inner(&fields[i], &fields[j]).unwrap_or(ZERO));
    let ginv = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("fields are linearly dependent".into()))?;
    let mut weights = vec![[0.0; 3]; n];
    let mut traces = [0.0; 3];
    for s in Sigma::ALL {
        let p = DMatrix::<C64>::from_fn(n, n, |i, j| {
            tables.inner(&fields[i], &proj[s.index()][j]).unwrap_or(ZERO)
        });
        traces[s.index()] = (ginv.clone() * p.clone()).trace().re;
        for i in 0..n {
            weights[i][s.index()] = p[(i, i)].re / gram[(i, i)].re;
        }
    }
    let labels: Vec<Option<Sigma>> = weights
        .iter()
        .map(|w| Sigma::ALL.into_iter().find(|s| w[s.index()] > 0.99))
        .collect();
    let multiplicities = traces.map(|t| t.round().max(0.0) as usize);
    let flagged = labels.iter().any(Option::is_none)
        || traces.iter().any(|t| (t - t.round()).abs() > 0.01);
    let mut basis = Vec::new();
    for s in Sigma::ALL {
        let want = multiplicities[s.index()];
        let mut chosen: Vec<BlochField> = Vec::new();
        let mut pool = proj[s.index()].clone();
        while chosen.len() < want {
            for c in &chosen {
                for p in pool.iter_mut() {
                    let ov = tables.inner(c, p)?;
                    *p = p.add_scaled(-ov, c)?;
                }
            }
            let (best, norm) = pool
                .iter()
                .enumerate()
                .map(|(i, p)| (i, tables.norm(p)))
                .fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
            if norm <= 1e-8 {
                break;
            }
            let v = pool[best].scaled(C64::new(1.0 / norm, 0.0));
            chosen.push(v);
        }
        basis.extend(chosen.into_iter().map(|f| (s, f)));
    }
    Ok(SymmetryDecomposition {
        weights,
        labels,
        traces,
        multiplicities,
        basis,
        flagged,
    })
}
