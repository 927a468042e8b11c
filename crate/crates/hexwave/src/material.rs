//! Material weights `W(x) = diag(A(x), a(x))`, perturbations `V(x)`,
//! symmetry certification and cell Fourier tables.
//!
//! All sampling happens in lattice coordinates `x = s1 v1 + s2 v2` with
//! `s ∈ [0, 1)²`, so the non-rectangular cell becomes a square and a plain
//! 2D FFT computes Fourier coefficients.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::{rotation, HexLattice, Vec2};
use crate::spectral::{signed_bin, Fft2};

pub type Mat2c = Matrix2<C64>;
pub type Mat3c = Matrix3<C64>;

type MatFn = Arc<dyn Fn(Vec2) -> Mat2c + Send + Sync>;
type RealFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
type Mat3Fn = Arc<dyn Fn(Vec2) -> Mat3c + Send + Sync>;

pub const DEFAULT_CERT_GRID: usize = 64;
pub const DEFAULT_CERT_TOL: f64 = 1e-10;

const I: C64 = C64 { re: 0.0, im: 1.0 };

/// `h(x) = cos(k1·x) + cos(k2·x) + cos(k3·x)` with `k3 = -k1 - k2`.
pub fn eval_h(x: Vec2) -> f64 {
    let l = HexLattice::standard();
    let k3 = -l.k1 - l.k2;
    l.k1.dot(&x).cos() + l.k2.dot(&x).cos() + k3.dot(&x).cos()
}

/// Grid of sample points `s1 v1 + s2 v2`, `s_j = i_j / n`.
pub fn cell_grid(lattice: &HexLattice, n: usize) -> impl Iterator<Item = Vec2> + '_ {
    (0..n * n).map(move |idx| {
        let (i, j) = (idx / n, idx % n);
        lattice.point([i as f64 / n as f64, j as f64 / n as f64])
    })
}

fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn embed(a: &Mat2c, s: C64) -> Mat3c {
    let z = C64::new(0.0, 0.0);
    Matrix3::new(a[(0, 0)], a[(0, 1)], z, a[(1, 0)], a[(1, 1)], z, z, z, s)
}

fn rotation3() -> Mat3c {
    let r = rotation();
    let z = C64::new(0.0, 0.0);
    Matrix3::new(
        real(r[(0, 0)]),
        real(r[(0, 1)]),
        z,
        real(r[(1, 0)]),
        real(r[(1, 1)]),
        z,
        z,
        z,
        real(1.0),
    )
}

fn max_abs3(m: &Mat3c) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Smallest and largest eigenvalue of a Hermitian 2×2 matrix.
fn hermitian2_eigs(a: &Mat2c) -> (f64, f64) {
    let p = 0.5 * (a[(0, 0)].re + a[(1, 1)].re);
    let q = 0.5 * (a[(0, 0)].re - a[(1, 1)].re);
    let r = (q * q + a[(0, 1)].norm_sqr()).sqrt();
    (p - r, p + r)
}

/// Block-diagonal Hermitian weight with callable evaluators.
#[derive(Clone)]
pub struct MaterialWeight {
    a: MatFn,
    scalar: RealFn,
    bounds: (f64, f64),
}

impl fmt::Debug for MaterialWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MaterialWeight")
            .field("ellipticity", &self.bounds)
            .finish_non_exhaustive()
    }
}

impl MaterialWeight {
    /// Builds a weight and certifies Hermiticity and ellipticity on the
    /// default grid.
    pub fn new(
        a: impl Fn(Vec2) -> Mat2c + Send + Sync + 'static,
        scalar: impl Fn(Vec2) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        let mut w = Self {
            a: Arc::new(a),
            scalar: Arc::new(scalar),
            bounds: (0.0, 0.0),
        };
        let lat = HexLattice::standard();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in cell_grid(&lat, DEFAULT_CERT_GRID) {
            let a = w.eval_a(x);
            let herm = (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if herm > DEFAULT_CERT_TOL {
                return Err(Error::NotAdmissible(format!(
                    "A is not Hermitian at ({:.4}, {:.4}), residual {herm:.2e}",
                    x.x, x.y
                )));
            }
            let (e0, e1) = hermitian2_eigs(&a);
            let s = w.eval_scalar(x);
            lo = lo.min(e0).min(s);
            hi = hi.max(e1).max(s);
        }
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::NotAdmissible(format!(
                "ellipticity bounds ({lo:.3e}, {hi:.3e}) are not positive and finite"
            )));
        }
        w.bounds = (lo, hi);
        Ok(w)
    }

    pub fn identity() -> Self {
        Self::new(|_| Mat2c::identity(), |_| 1.0).expect("identity is admissible")
    }

    /// `a = (1 - h/5)^(-1)`, `A = (10 - h) I₂`.
    pub fn example() -> Self {
        Self::new(
            |x| Mat2c::identity() * real(10.0 - eval_h(x)),
            |x| 1.0 / (1.0 - eval_h(x) / 5.0),
        )
        .expect("example weight is admissible")
    }

    /// Weight given by finite Fourier series `Σ c_m e^{i G_m·x}` for the
    /// 2×2 block and the scalar entry.
    pub fn from_fourier_series(
        a_terms: Vec<([i32; 2], Mat2c)>,
        scalar_terms: Vec<([i32; 2], C64)>,
    ) -> Result<Self> {
        let lat = HexLattice::standard();
        let imag_bound: f64 = {
            let mut worst = 0.0f64;
            for (m, c) in &scalar_terms {
                let partner = scalar_terms
                    .iter()
                    .find(|(n, _)| n[0] == -m[0] && n[1] == -m[1])
                    .map(|(_, d)| d.conj())
                    .unwrap_or(C64::new(0.0, 0.0));
                worst = worst.max((c - partner).norm());
            }
            worst
        };
        if imag_bound > 1e-12 {
            return Err(Error::NotAdmissible(
                "scalar series is not real (c_{-m} != conj c_m)".into(),
            ));
        }
        let at: Vec<(Vec2, Mat2c)> = a_terms.into_iter().map(|(m, c)| (lat.dual_index(m), c)).collect();
        let st: Vec<(Vec2, C64)> = scalar_terms
            .into_iter()
            .map(|(m, c)| (lat.dual_index(m), c))
            .collect();
        Self::new(
            move |x| {
                at.iter().fold(Mat2c::zeros(), |acc, (g, c)| {
                    let ph = g.dot(&x);
                    acc + c * C64::new(ph.cos(), ph.sin())
                })
            },
            move |x| {
                st.iter()
                    .map(|(g, c)| {
                        let ph = g.dot(&x);
                        (c * C64::new(ph.cos(), ph.sin())).re
                    })
                    .sum()
            },
        )
    }

    pub fn eval_a(&self, x: Vec2) -> Mat2c {
        (self.a)(x)
    }

    pub fn eval_scalar(&self, x: Vec2) -> f64 {
        (self.scalar)(x)
    }

    pub fn eval(&self, x: Vec2) -> Mat3c {
        embed(&self.eval_a(x), real(self.eval_scalar(x)))
    }

    /// `W^(-1)(x)`, inverting the 2×2 block and the scalar separately.
    pub fn eval_inverse(&self, x: Vec2) -> Mat3c {
        let a = self.eval_a(x);
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let inv = Mat2c::new(a[(1, 1)], -a[(0, 1)], -a[(1, 0)], a[(0, 0)]) / det;
        embed(&inv, real(1.0 / self.eval_scalar(x)))
    }

    /// `(c, C)` with `c|ξ|² ≤ ξ*W ξ ≤ C|ξ|²` on the certification grid.
    pub fn ellipticity_bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// `W + δV`. `V` must respect the block structure.
    pub fn perturbed(&self, v: &PerturbationWeight, delta: f64) -> Result<Self> {
        let k = Arc::new(|_: Vec2| 1.0);
        self.modulated(v, delta, k)
    }

    /// `W(x) + δ κ(x) V(x)` for a real modulation `κ`.
    pub fn modulated(
        &self,
        v: &PerturbationWeight,
        delta: f64,
        kappa: Arc<dyn Fn(Vec2) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        v.check_block_diagonal()?;
        let (a0, s0) = (self.a.clone(), self.scalar.clone());
        let (v1, v2) = (v.f.clone(), v.f.clone());
        let k2 = kappa.clone();
        Self::new(
            move |x| {
                let m = v1(x);
                let vb = Mat2c::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                a0(x) + vb * real(delta * kappa(x))
            },
            move |x| s0(x) + delta * k2(x) * v2(x)[(2, 2)].re,
        )
    }

    /// Honeycomb certificate on an `n × n` lattice-coordinate grid.
    pub fn check_honeycomb(&self, n: usize) -> Result<HoneycombCertificate> {
        check_honeycomb_with(self, n, DEFAULT_CERT_TOL)
    }
}

/// One certified condition with its worst residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub passed: bool,
    pub max_residual: f64,
    pub worst_point: Vec2,
}

impl ConditionCheck {
    fn from_residuals(tol: f64, it: impl Iterator<Item = (Vec2, f64)>) -> Self {
        let mut worst = (Vec2::zeros(), 0.0f64);
        for (x, r) in it {
            if r > worst.1 || r.is_nan() {
                worst = (x, r);
            }
        }
        Self {
            passed: worst.1 <= tol,
            max_residual: worst.1,
            worst_point: worst.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoneycombCertificate {
    pub admissible: ConditionCheck,
    pub rot_invariant: ConditionCheck,
    pub pt_invariant: ConditionCheck,
    pub ellipticity: (f64, f64),
}

impl HoneycombCertificate {
    pub fn is_honeycomb(&self) -> bool {
        self.admissible.passed && self.rot_invariant.passed && self.pt_invariant.passed
    }

    /// Human-readable list of the failing conditions.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (name, c) in [
            ("admissible", &self.admissible),
            ("rotation", &self.rot_invariant),
            ("PT", &self.pt_invariant),
        ] {
            if !c.passed {
                out.push(format!(
                    "{name}: residual {:.3e} at ({:.4}, {:.4})",
                    c.max_residual, c.worst_point.x, c.worst_point.y
                ));
            }
        }
        out
    }
}

pub fn check_honeycomb_with(w: &MaterialWeight, n: usize, tol: f64) -> Result<HoneycombCertificate> {
    if n < 16 {
        return Err(Error::InvalidInput(format!(
            "certification grid {n} is below the 16x16 minimum"
        )));
    }
    let lat = HexLattice::standard();
    let admissible = ConditionCheck::from_residuals(
        tol,
        cell_grid(&lat, n).map(|x| {
            let a = w.eval_a(x);
            let herm = (a - a.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            let (e0, _) = hermitian2_eigs(&a);
            let s = w.eval_scalar(x);
            let neg = (-e0).max(-s).max(0.0);
            let r = herm.max(if neg > 0.0 || e0 == 0.0 || s == 0.0 { 1.0 + neg } else { 0.0 });
            (x, r)
        }),
    );
    let (rot, pt) = symmetry_residuals(&lat, n, tol, |x| w.eval(x));
    Ok(HoneycombCertificate {
        admissible,
        rot_invariant: rot,
        pt_invariant: pt,
        ellipticity: w.ellipticity_bounds(),
    })
}

/// Rotation and PT residuals of a block field:
/// `F(Rᵀx) = R̃ᵀ F(x) R̃` and `conj(F(-x)) = F(x)`, with `R̃ = diag(R, 1)`.
pub fn symmetry_residuals(
    lat: &HexLattice,
    n: usize,
    tol: f64,
    f: impl Fn(Vec2) -> Mat3c,
) -> (ConditionCheck, ConditionCheck) {
    let r = rotation();
    let r3 = rotation3();
    let rot = ConditionCheck::from_residuals(
        tol,
        cell_grid(lat, n).map(|x| {
            let lhs = f(r.transpose() * x);
            let rhs = r3.transpose() * f(x) * r3;
            (x, max_abs3(&(lhs - rhs)))
        }),
    );
    let pt = ConditionCheck::from_residuals(
        tol,
        cell_grid(lat, n).map(|x| (x, max_abs3(&(f(-x).map(|z| z.conj()) - f(x))))),
    );
    (rot, pt)
}

/// Hermitian perturbation field `V(x)`.
#[derive(Clone)]
pub struct PerturbationWeight {
    f: Mat3Fn,
    anti_pt: bool,
}

impl fmt::Debug for PerturbationWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerturbationWeight")
            .field("anti_pt_certified", &self.anti_pt)
            .finish_non_exhaustive()
    }
}

impl PerturbationWeight {
    pub fn new(v: impl Fn(Vec2) -> Mat3c + Send + Sync + 'static) -> Result<Self> {
        let f: Mat3Fn = Arc::new(v);
        let lat = HexLattice::standard();
        for x in cell_grid(&lat, DEFAULT_CERT_GRID) {
            let m = f(x);
            let r = max_abs3(&(m - m.adjoint()));
            if r > DEFAULT_CERT_TOL {
                return Err(Error::NotAdmissible(format!(
                    "perturbation is not Hermitian at ({:.4}, {:.4}), residual {r:.2e}",
                    x.x, x.y
                )));
            }
        }
        let anti = cell_grid(&lat, DEFAULT_CERT_GRID)
            .map(|x| max_abs3(&(f(-x).map(|z| z.conj()) + f(x))))
            .fold(0.0, f64::max);
        Ok(Self {
            f,
            anti_pt: anti <= DEFAULT_CERT_TOL,
        })
    }

    /// `V₁₂ = i h`, `V₂₁ = -i h`, zero elsewhere.
    pub fn example() -> Self {
        Self::new(|x| {
            let h = eval_h(x);
            let z = C64::new(0.0, 0.0);
            Matrix3::new(z, I * h, z, -I * h, z, z, z, z, z)
        })
        .expect("example perturbation is Hermitian")
    }

    /// `s(x) I₃` for a real scalar field.
    pub fn scalar(s: impl Fn(Vec2) -> f64 + Send + Sync + 'static) -> Result<Self> {
        Self::new(move |x| Mat3c::identity() * real(s(x)))
    }

    pub fn zero() -> Self {
        Self::new(|_| Mat3c::zeros()).expect("zero is Hermitian")
    }

    pub fn eval(&self, x: Vec2) -> Mat3c {
        (self.f)(x)
    }

    pub fn anti_pt_certified(&self) -> bool {
        self.anti_pt
    }

    pub(crate) fn check_block_diagonal(&self) -> Result<()> {
        let lat = HexLattice::standard();
        for x in cell_grid(&lat, 16) {
            let m = self.eval(x);
            let off = [m[(0, 2)], m[(1, 2)], m[(2, 0)], m[(2, 1)]]
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if off > DEFAULT_CERT_TOL {
                return Err(Error::InvalidInput(
                    "perturbation couples the in-plane block to the scalar entry".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Cell Fourier coefficients `c_m = |Ω|⁻¹ ∫_Ω e^{-i G_m·y} f(y) dy` of a
/// 3×3 matrix field, computed by FFT on an `n × n` lattice-coordinate grid.
///
/// Coefficients are periodic in `m` with period `n`; indices are wrapped.
#[derive(Debug, Clone)]
pub struct FourierTable {
    n: usize,
    truncation: usize,
    data: Vec<Mat3c>,
}

impl FourierTable {
    pub fn compute(
        lattice: &HexLattice,
        f: impl Fn(Vec2) -> Mat3c,
        truncation: usize,
        n: usize,
    ) -> Self {
        if n < 2 * (2 * truncation + 1) {
            log::warn!(
                "Fourier grid {n} is below 2(2M+1) = {} for M = {truncation}; coefficients may alias",
                2 * (2 * truncation + 1)
            );
        }
        let samples: Vec<Mat3c> = cell_grid(lattice, n).map(f).collect();
        let fft = Fft2::new(n, n);
        let mut data = vec![Mat3c::zeros(); n * n];
        let mut buf = vec![C64::new(0.0, 0.0); n * n];
        let scale = 1.0 / (n * n) as f64;
        for c in 0..9 {
            for (b, s) in buf.iter_mut().zip(&samples) {
                *b = s[c];
            }
            fft.forward(&mut buf);
            for (d, b) in data.iter_mut().zip(&buf) {
                d[c] = b * scale;
            }
        }
        Self { n, truncation, data }
    }

    /// Table of a scalar field, stored on the diagonal.
    pub fn compute_scalar(
        lattice: &HexLattice,
        f: impl Fn(Vec2) -> C64,
        truncation: usize,
        n: usize,
    ) -> Self {
        Self::compute(lattice, |x| Mat3c::identity() * f(x), truncation, n)
    }

    pub fn grid(&self) -> usize {
        self.n
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn coeff(&self, m: [i32; 2]) -> Mat3c {
        let n = self.n as i32;
        let i = m[0].rem_euclid(n) as usize;
        let j = m[1].rem_euclid(n) as usize;
        self.data[i * self.n + j]
    }

    pub fn scalar(&self, m: [i32; 2]) -> C64 {
        self.coeff(m)[(0, 0)]
    }

    /// `max_m |c(-m) - c(m)*|`.
    pub fn hermitian_residual(&self) -> f64 {
        let n = self.n as i32;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                let d = self.coeff([-a, -b]) - self.coeff([a, b]).adjoint();
                worst = worst.max(max_abs3(&d));
            }
        }
        worst
    }

    /// Evaluates `Σ c_m e^{i G_m·x}` over the signed frequency range.
    pub fn synthesize(&self, lattice: &HexLattice, x: Vec2) -> Mat3c {
        let mut acc = Mat3c::zeros();
        for i in 0..self.n {
            for j in 0..self.n {
                let m = [signed_bin(i, self.n) as i32, signed_bin(j, self.n) as i32];
                let ph = lattice.dual_index(m).dot(&x);
                acc += self.data[i * self.n + j] * C64::new(ph.cos(), ph.sin());
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn random_points(count: usize, seed: u64) -> Vec<Vec2> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 8.0 - 4.0
        };
        (0..count).map(|_| Vec2::new(next(), next())).collect()
    }

    #[test]
    fn h_values() {
        assert_abs_diff_eq!(eval_h(Vec2::zeros()), 3.0, epsilon = 1e-15);
        let l = HexLattice::standard();
        let r = rotation();
        for x in random_points(100, 7) {
            assert_abs_diff_eq!(eval_h(x + l.v1), eval_h(x), epsilon = 1e-12);
            assert_abs_diff_eq!(eval_h(r.transpose() * x), eval_h(x), epsilon = 1e-12);
        }
    }

    #[test]
    fn h_range_by_dense_scan() {
        let l = HexLattice::standard();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for x in cell_grid(&l, 300) {
            let h = eval_h(x);
            lo = lo.min(h);
            hi = hi.max(h);
        }
        assert_abs_diff_eq!(lo, -1.5, epsilon = 1e-3);
        assert_abs_diff_eq!(hi, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn example_weight_values() {
        let w = MaterialWeight::example();
        let m = w.eval(Vec2::zeros());
        assert_abs_diff_eq!(m[(2, 2)].re, 2.5, epsilon = 1e-14);
        assert_abs_diff_eq!(m[(0, 0)].re, 7.0, epsilon = 1e-14);
        assert_abs_diff_eq!(m[(1, 1)].re, 7.0, epsilon = 1e-14);
        let (c, big) = w.ellipticity_bounds();
        assert!(c >= (7.0f64).min(1.0 / (1.0 + 1.5 / 5.0)) - 1e-9);
        assert!(big <= 11.5 + 1e-9);
        let inv = w.eval_inverse(Vec2::new(0.3, -0.2));
        let prod = w.eval(Vec2::new(0.3, -0.2)) * inv;
        assert!(max_abs3(&(prod - Mat3c::identity())) < 1e-14);
    }

    #[test]
    fn certificates() {
        assert!(MaterialWeight::identity().check_honeycomb(64).unwrap().is_honeycomb());
        assert!(MaterialWeight::example().check_honeycomb(64).unwrap().is_honeycomb());
        let v = PerturbationWeight::example();
        let w = MaterialWeight::example().perturbed(&v, 0.1).unwrap();
        let cert = w.check_honeycomb(64).unwrap();
        assert!(cert.admissible.passed);
        assert!(cert.rot_invariant.passed);
        assert!(!cert.pt_invariant.passed);
        assert!(cert.pt_invariant.max_residual > 0.1);
        assert!(MaterialWeight::example().check_honeycomb(8).is_err());
    }

    #[test]
    fn rotation_breaking_weight_fails() {
        let k1 = HexLattice::standard().k1;
        let w = MaterialWeight::new(move |x| Mat2c::identity() * real(2.0 + k1.dot(&x).cos()), |_| 1.0)
        .unwrap();
        let cert = w.check_honeycomb(32).unwrap();
        assert!(!cert.rot_invariant.passed);
        assert!(!cert.failures().is_empty());
    }

    #[test]
    fn not_elliptic_is_rejected() {
        assert!(MaterialWeight::new(|x| Mat2c::identity() * real(eval_h(x)), |_| 1.0).is_err());
    }

    #[test]
    fn example_perturbation() {
        let v = PerturbationWeight::example();
        assert!(v.anti_pt_certified());
        let m = v.eval(Vec2::zeros());
        assert_abs_diff_eq!(m[(0, 1)].im, 3.0, epsilon = 1e-15);
        for x in random_points(50, 3) {
            let m = v.eval(x);
            assert_eq!(m[(1, 0)], m[(0, 1)].conj());
            let r = v.eval(-x).map(|z| z.conj()) + m;
            assert!(max_abs3(&r) < 1e-12);
        }
        let s = PerturbationWeight::scalar(eval_h).unwrap();
        assert!(!s.anti_pt_certified());
    }

    #[test]
    fn fourier_of_h() {
        let l = HexLattice::standard();
        let t = FourierTable::compute_scalar(&l, |x| real(eval_h(x)), 4, 32);
        for m in [[1, 0], [0, 1], [-1, -1], [-1, 0], [0, -1], [1, 1]] {
            assert_abs_diff_eq!(t.scalar(m).re, 0.5, epsilon = 1e-14);
            assert_abs_diff_eq!(t.scalar(m).im, 0.0, epsilon = 1e-14);
        }
        assert_abs_diff_eq!(t.scalar([0, 0]).norm(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(t.scalar([1, -1]).norm(), 0.0, epsilon = 1e-14);
        let c = FourierTable::compute_scalar(&l, |_| real(2.5), 4, 16);
        assert_abs_diff_eq!(c.scalar([0, 0]).re, 2.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.scalar([2, 1]).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fourier_of_resolvent_matches_fine_quadrature() {
        let l = HexLattice::standard();
        let f = |x: Vec2| real(1.0 / (10.0 - eval_h(x)));
        let coarse = FourierTable::compute_scalar(&l, f, 4, 32);
        let fine = FourierTable::compute_scalar(&l, f, 4, 128);
        let mean: f64 = cell_grid(&l, 256).map(|x| f(x).re).sum::<f64>() / 65536.0;
        assert_abs_diff_eq!(coarse.scalar([0, 0]).im, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(coarse.scalar([0, 0]).re, mean, epsilon = 1e-13);
        for m in [[1, 0], [2, 1], [-3, 1], [4, 4]] {
            assert!((coarse.scalar(m) - fine.scalar(m)).norm() < 1e-12);
        }
        assert!(coarse.hermitian_residual() < 1e-12);
    }

    #[test]
    fn table_round_trip_for_band_limited_field() {
        let l = HexLattice::standard();
        let g1 = l.dual_index([2, -1]);
        let g2 = l.dual_index([0, 3]);
        let f = move |x: Vec2| {
            let a = C64::new(g1.dot(&x).cos(), 0.3 * g2.dot(&x).sin());
            Mat3c::new(a, a * 2.0, C64::new(0.0, 0.0), a.conj(), real(1.0), a, real(0.5), a * I, a)
        };
        let t = FourierTable::compute(&l, f, 3, 16);
        let x = Vec2::new(0.123, -0.77);
        let y = t.synthesize(&l, x);
        assert!(max_abs3(&(y - f(x))) < 1e-12);
        let resampled = t.clone();
        let t2 = FourierTable::compute(&l, |x| resampled.synthesize(&l, x), 3, 16);
        for a in -3..=3 {
            for b in -3..=3 {
                assert!(max_abs3(&(t2.coeff([a, b]) - t.coeff([a, b]))) < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_series_weight() {
        let half = C64::new(0.5, 0.0);
        let mut a_terms = vec![([0, 0], Mat2c::identity() * real(10.0))];
        let mut s_terms = vec![([0, 0], real(2.0))];
        for m in [[1, 0], [0, 1], [-1, -1], [-1, 0], [0, -1], [1, 1]] {
            a_terms.push((m, Mat2c::identity() * -half));
            s_terms.push((m, half * 0.2));
        }
        let w = MaterialWeight::from_fourier_series(a_terms, s_terms).unwrap();
        let x = Vec2::new(0.4, 0.1);
        assert_abs_diff_eq!(w.eval_a(x)[(0, 0)].re, 10.0 - eval_h(x), epsilon = 1e-12);
        assert_abs_diff_eq!(w.eval_scalar(x), 2.0 + 0.2 * eval_h(x), epsilon = 1e-12);
        assert!(w.check_honeycomb(32).unwrap().is_honeycomb());
        let bad = MaterialWeight::from_fourier_series(
            vec![([0, 0], Mat2c::identity())],
            vec![([0, 0], real(1.0)), ([1, 0], real(0.1))],
        );
        assert!(bad.is_err());
    }
}
