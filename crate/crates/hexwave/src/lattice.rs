//! Triangular lattice geometry: periods, dual lattice, the 120° rotation and
//! truncated Fourier index sets.
//!
//! Quasi-momenta are handled in two coordinate systems. Cartesian `Vec2`
//! values are used for physics, and reduced coordinates `θ` with
//! `k = θ1 k1 + θ2 k2` are used for anything that has to be exact modulo the
//! dual lattice.

use std::collections::HashMap;

use nalgebra::{Matrix2, Vector2};

pub type Vec2 = Vector2<f64>;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Tolerance used when deciding whether a reduced coordinate is an integer.
const LATTICE_EPS: f64 = 1e-9;

/// The honeycomb period lattice `Λ = Z v1 ⊕ Z v2` and its dual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HexLattice {
    pub v1: Vec2,
    pub v2: Vec2,
    pub k1: Vec2,
    pub k2: Vec2,
}

impl Default for HexLattice {
    fn default() -> Self {
        Self::standard()
    }
}

/// A quasi-momentum together with its reduced coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KPoint {
    pub k: Vec2,
    pub reduced: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HighSymmetry {
    Gamma,
    K,
    KPrime,
}

impl HighSymmetry {
    pub fn reduced(self) -> [f64; 2] {
        match self {
            HighSymmetry::Gamma => [0.0, 0.0],
            HighSymmetry::K => [1.0 / 3.0, -1.0 / 3.0],
            HighSymmetry::KPrime => [-1.0 / 3.0, 1.0 / 3.0],
        }
    }

    pub fn negated(self) -> Self {
        match self {
            HighSymmetry::Gamma => HighSymmetry::Gamma,
            HighSymmetry::K => HighSymmetry::KPrime,
            HighSymmetry::KPrime => HighSymmetry::K,
        }
    }
}

/// The 120° rotation `R` acting on Cartesian vectors.
pub fn rotation() -> Matrix2<f64> {
    Matrix2::new(-0.5, 0.5 * SQRT3, -0.5 * SQRT3, -0.5)
}

/// Action of `R` on reduced dual coordinates: `R(θ1 k1 + θ2 k2)`.
pub fn rotate_reduced(t: [f64; 2]) -> [f64; 2] {
    [-t[1], t[0] - t[1]]
}

/// Integer version of [`rotate_reduced`].
pub fn rotate_index(m: [i32; 2]) -> [i32; 2] {
    [-m[1], m[0] - m[1]]
}

impl HexLattice {
    pub fn standard() -> Self {
        let c = 4.0 * std::f64::consts::PI / SQRT3;
        Self {
            v1: Vec2::new(0.5 * SQRT3, 0.5),
            v2: Vec2::new(0.5 * SQRT3, -0.5),
            k1: Vec2::new(0.5 * c, 0.5 * SQRT3 * c),
            k2: Vec2::new(0.5 * c, -0.5 * SQRT3 * c),
        }
    }

    /// Area of the fundamental cell `Ω`.
    pub fn cell_area(&self) -> f64 {
        (self.v1.x * self.v2.y - self.v1.y * self.v2.x).abs()
    }

    /// `s1 v1 + s2 v2`.
    pub fn point(&self, s: [f64; 2]) -> Vec2 {
        self.v1 * s[0] + self.v2 * s[1]
    }

    /// Lattice coordinates of a Cartesian point, `s_j = x·k_j / 2π`.
    pub fn lattice_coords(&self, x: Vec2) -> [f64; 2] {
        let tau = 2.0 * std::f64::consts::PI;
        [x.dot(&self.k1) / tau, x.dot(&self.k2) / tau]
    }

    /// `θ1 k1 + θ2 k2`.
    pub fn dual_point(&self, t: [f64; 2]) -> Vec2 {
        self.k1 * t[0] + self.k2 * t[1]
    }

    pub fn dual_index(&self, m: [i32; 2]) -> Vec2 {
        self.dual_point([m[0] as f64, m[1] as f64])
    }

    /// Reduced coordinates of a quasi-momentum, `θ_j = k·v_j / 2π`.
    pub fn reduced(&self, k: Vec2) -> [f64; 2] {
        let tau = 2.0 * std::f64::consts::PI;
        [k.dot(&self.v1) / tau, k.dot(&self.v2) / tau]
    }

    /// Representative of `k` in the fundamental dual cell `θ ∈ [-1/2, 1/2)²`.
    pub fn reduce_to_fundamental(&self, k: Vec2) -> KPoint {
        let t = self.reduced(k);
        let r = [wrap_half(t[0]), wrap_half(t[1])];
        KPoint {
            k: self.dual_point(r),
            reduced: r,
        }
    }

    pub fn high_symmetry(&self, p: HighSymmetry) -> Vec2 {
        self.dual_point(p.reduced())
    }

    /// `K = (k1 - k2)/3`.
    pub fn k_point(&self) -> Vec2 {
        self.high_symmetry(HighSymmetry::K)
    }

    pub fn k_prime_point(&self) -> Vec2 {
        self.high_symmetry(HighSymmetry::KPrime)
    }

    /// Scans an `n × n` grid of reduced coordinates for points with
    /// `Rk ≡ k` modulo the dual lattice.
    pub fn rotation_fixed_points(&self, n: usize) -> Vec<KPoint> {
        let mut found = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let t = [i as f64 / n as f64 - 0.5, j as f64 / n as f64 - 0.5];
                let rt = rotate_reduced(t);
                let d = [rt[0] - t[0], rt[1] - t[1]];
                let off = (d[0] - d[0].round()).abs().max((d[1] - d[1].round()).abs());
                if off < 0.5 / n as f64 {
                    found.push(self.reduce_to_fundamental(self.dual_point(t)));
                }
            }
        }
        found
    }

    /// Squared Cartesian length of the dual vector with reduced coordinates `t`.
    pub fn dual_norm_sq(&self, t: [f64; 2]) -> f64 {
        self.dual_point(t).norm_squared()
    }
}

fn wrap_half(t: f64) -> f64 {
    let r = t - (t + 0.5).floor();
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Checks whether a reduced point is fixed by `R` modulo the dual lattice.
pub fn is_rotation_fixed(t: [f64; 2]) -> bool {
    let rt = rotate_reduced(t);
    let d = [rt[0] - t[0], rt[1] - t[1]];
    (d[0] - d[0].round()).abs() < LATTICE_EPS && (d[1] - d[1].round()).abs() < LATTICE_EPS
}

/// A finite set of dual-lattice indices `m = (m1, m2)` used as plane-wave
/// basis `e^{i(k + m1 k1 + m2 k2)·x}`.
///
/// The ordering is row-major in `(m1, m2)`. The `disk` family is closed under
/// the rotation about its anchor, which makes `R` act as an exact
/// permutation on coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierIndexSet {
    truncation: usize,
    anchor: [f64; 2],
    indices: Vec<[i32; 2]>,
    position: HashMap<[i32; 2], usize>,
}

impl FourierIndexSet {
    fn from_indices(truncation: usize, anchor: [f64; 2], mut indices: Vec<[i32; 2]>) -> Self {
        indices.sort();
        let position = indices.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        Self {
            truncation,
            anchor,
            indices,
            position,
        }
    }

    /// The square set `{|m1|, |m2| ≤ M}` with `(2M+1)²` entries.
    pub fn square(truncation: usize) -> Self {
        let m = truncation as i32;
        let indices = (-m..=m)
            .flat_map(|a| (-m..=m).map(move |b| [a, b]))
            .collect();
        Self::from_indices(truncation, [0.0, 0.0], indices)
    }

    /// The disk `{m : |k0 + G_m| ≤ M|k1| + |K|}` around the reduced anchor `k0`.
    pub fn disk(lattice: &HexLattice, truncation: usize, anchor: [f64; 2]) -> Self {
        let radius = truncation as f64 * lattice.k1.norm() + lattice.k_point().norm();
        let r2 = radius * radius * (1.0 + 1e-12);
        let span = (2 * truncation + 3) as i32;
        let mut indices = Vec::new();
        for a in -span..=span {
            for b in -span..=span {
                let t = [anchor[0] + a as f64, anchor[1] + b as f64];
                if lattice.dual_norm_sq(t) <= r2 {
                    indices.push([a, b]);
                }
            }
        }
        Self::from_indices(truncation, anchor, indices)
    }

    pub fn around(lattice: &HexLattice, truncation: usize, point: HighSymmetry) -> Self {
        Self::disk(lattice, truncation, point.reduced())
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn anchor(&self) -> [f64; 2] {
        self.anchor
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[[i32; 2]] {
        &self.indices
    }

    pub fn position(&self, m: [i32; 2]) -> Option<usize> {
        self.position.get(&m).copied()
    }

    /// Largest `|m_i|` over the set.
    pub fn max_abs(&self) -> i32 {
        self.indices
            .iter()
            .map(|m| m[0].abs().max(m[1].abs()))
            .max()
            .unwrap_or(0)
    }

    /// The set `{-m}` anchored at `-k0`.
    pub fn negated(&self) -> Self {
        let indices = self.indices.iter().map(|m| [-m[0], -m[1]]).collect();
        Self::from_indices(self.truncation, [-self.anchor[0], -self.anchor[1]], indices)
    }

    /// For an anchor fixed by `R` modulo the dual lattice, the permutation
    /// `perm[i] = j` with `R(k0 + G_{m_i}) = k0 + G_{m_j}`.
    pub fn rotation_permutation(&self) -> Option<Vec<usize>> {
        if !is_rotation_fixed(self.anchor) {
            return None;
        }
        let ra = rotate_reduced(self.anchor);
        let shift = [
            (ra[0] - self.anchor[0]).round() as i32,
            (ra[1] - self.anchor[1]).round() as i32,
        ];
        self.indices
            .iter()
            .map(|&m| {
                let r = rotate_index(m);
                self.position([r[0] + shift[0], r[1] + shift[1]])
            })
            .collect()
    }
}
