//! Dirac point data at `K`: location, phase fixing, the `𝓕` functional,
//! the conical constant `C_D`, the mass coefficient `θ♯`, nonlinear
//! coefficients, gap sweeps and the low-contrast check.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;

use crate::bloch::{
    decompose_rotation_eigenspaces, degenerate_groups, BlochEigenpair, BlochField, BlochProblem,
    Sigma, SpectralWeight, SymmetryDecomposition,
};
use crate::error::{Error, Result};
use crate::lattice::{rotation, FourierIndexSet, HexLattice, HighSymmetry, KPoint, Vec2};
use crate::material::{FourierTable, MaterialWeight, PerturbationWeight};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Number of positive bands searched for a Dirac pair.
pub const SEARCH_BANDS: usize = 12;
pub const DEFAULT_RADII: [f64; 3] = [0.005, 0.01, 0.02];
/// Offset of the default fit directions `π j / 3 + offset`.
pub const DIRECTION_OFFSET: f64 = PI / 12.0;
pub const Q_TOL: f64 = 1e-8;

/// `𝓕(Ψ, Φ) = ∫_Ω [conj(Ψ⊥) Φ₃ + conj(Ψ₃) Φ⊥] dx`.
pub fn compute_f(lattice: &HexLattice, psi: &BlochField, phi: &BlochField) -> Result<[C64; 2]> {
    psi.check_same_space(phi)?;
    let mut f = [ZERO; 2];
    for i in 0..psi.basis.len() {
        let a = psi.vector(i);
        let b = phi.vector(i);
        for c in 0..2 {
            f[c] += a[c].conj() * b[2] + a[2].conj() * b[c];
        }
    }
    let area = lattice.cell_area();
    Ok([f[0] * area, f[1] * area])
}

/// `(1/2)|𝓕·(1, -i)|` with the bilinear dot product.
pub fn compute_cd(f: [C64; 2]) -> f64 {
    0.5 * (f[0] - I * f[1]).norm()
}

/// Lowest two-fold degeneracy at `K` with rotation labels `τ, τ̄`.
#[derive(Debug, Clone)]
pub struct DiracCandidate {
    pub problem: BlochProblem,
    pub omega: f64,
    /// Index of the lower band of the pair (1-based).
    pub band: usize,
    pub pair: [BlochEigenpair; 2],
    pub decomposition: SymmetryDecomposition,
    /// Every band computed at `K`, for diagnostics.
    pub bands: Vec<BlochEigenpair>,
}

pub fn k_problem(tables: Arc<SpectralWeight>, truncation: usize) -> BlochProblem {
    let lat = tables.lattice;
    let basis = Arc::new(FourierIndexSet::around(&lat, truncation, HighSymmetry::K));
    BlochProblem::with_basis(tables, lat.k_point(), basis)
}

pub fn locate_dirac_point(weight: &MaterialWeight, truncation: usize) -> Result<DiracCandidate> {
    let tables = Arc::new(SpectralWeight::for_truncation(weight, truncation));
    locate_with_tables(tables, truncation)
}

pub fn locate_with_tables(tables: Arc<SpectralWeight>, truncation: usize) -> Result<DiracCandidate> {
    let problem = k_problem(tables.clone(), truncation);
    let bands = problem.solve_bands(SEARCH_BANDS)?;
    let mut rejected = Vec::new();
    for g in degenerate_groups(&bands) {
        if g.len() != 2 {
            if g.len() > 2 {
                rejected.push(format!("multiplicity {} at {:.6}", g.len(), bands[g.start].omega));
            }
            continue;
        }
        let fields: Vec<BlochField> = bands[g.clone()].iter().map(|e| e.field.clone()).collect();
        let d = decompose_rotation_eigenspaces(&tables, &fields)?;
        if d.multiplicity(Sigma::Tau) == 1 && d.multiplicity(Sigma::TauBar) == 1 {
            return Ok(DiracCandidate {
                problem,
                omega: 0.5 * (bands[g.start].omega + bands[g.start + 1].omega),
                band: g.start + 1,
                pair: [bands[g.start].clone(), bands[g.start + 1].clone()],
                decomposition: d,
                bands,
            });
        }
        rejected.push(format!(
            "pair at {:.6} has labels {:?}",
            bands[g.start].omega, d.multiplicities
        ));
    }
    Err(Error::NoDiracPoint(format!(
        "no tau/tau-bar pair among the lowest {} bands ({})",
        bands.len(),
        if rejected.is_empty() { "no degeneracy".to_string() } else { rejected.join("; ") }
    )))
}

#[derive(Debug, Clone)]
pub struct PhaseFixedPair {
    pub psi1: BlochField,
    pub psi2: BlochField,
    /// `𝓕(ψ1, ψ2) = C₀ (1, i)` after fixing; real and non-negative.
    pub c0: C64,
    pub f: [C64; 2],
    /// Set when `𝓕` vanishes and the cone is degenerate.
    pub degenerate: bool,
}

/// Rotates the `τ` mode so that `𝓕(ψ1, 𝔓𝔗ψ1)·(1, -i)/2 ≥ 0` and sets
/// `ψ2 = 𝔓𝔗ψ1`. The remaining sign is fixed by making the largest
/// coefficient of `ψ1` have positive real part.
pub fn fix_phase(tables: &SpectralWeight, decomposition: &SymmetryDecomposition) -> Result<PhaseFixedPair> {
    let phi1 = decomposition
        .labeled(Sigma::Tau)
        .ok_or_else(|| Error::NoDiracPoint("pair has no tau component".into()))?;
    fix_phase_of(tables, phi1)
}

pub fn fix_phase_of(tables: &SpectralWeight, phi1: &BlochField) -> Result<PhaseFixedPair> {
    let lat = &tables.lattice;
    let nrm = tables.norm(phi1);
    let phi1 = phi1.scaled(C64::new(1.0 / nrm, 0.0));
    let f = compute_f(lat, &phi1, &phi1.parity_time())?;
    let c0 = 0.5 * (f[0] - I * f[1]);
    let scale = f[0].norm().max(f[1].norm());
    let degenerate = c0.norm() <= 1e-12 * scale.max(1.0);
    if degenerate {
        log::warn!("F(psi1, psi2) vanishes; the cone is degenerate");
    }
    let phase = if degenerate { C64::new(1.0, 0.0) } else { C64::from_polar(1.0, 0.5 * c0.arg()) };
    let mut psi1 = phi1.scaled(phase);
    let lead = psi1
        .coeffs
        .iter()
        .copied()
        .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        .unwrap_or(ZERO);
    if lead.re < 0.0 {
        psi1 = psi1.scaled(C64::new(-1.0, 0.0));
    }
    let psi2 = psi1.parity_time();
    let f = compute_f(lat, &psi1, &psi2)?;
    let c0 = 0.5 * (f[0] - I * f[1]);
    Ok(PhaseFixedPair {
        psi1,
        psi2,
        c0,
        f,
        degenerate,
    })
}

/// `Q_jl = ω_D ∫ ψ_j* W⁻¹ V W⁻¹ ψ_l dx`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassMatrix {
    pub q: [[C64; 2]; 2],
}

impl MassMatrix {
    pub fn theta_sharp(&self) -> f64 {
        self.q[0][0].re
    }

    pub fn off_diagonal(&self) -> f64 {
        self.q[0][1].norm()
    }

    pub fn trace_residual(&self) -> f64 {
        (self.q[0][0] + self.q[1][1]).norm()
    }
}

/// Assembles `Q`. Use [`compute_theta_sharp`] for the checked value.
pub fn mass_matrix(
    tables: &SpectralWeight,
    psi1: &BlochField,
    psi2: &BlochField,
    omega_d: f64,
    v: &PerturbationWeight,
) -> Result<MassMatrix> {
    let w = &tables.weight;
    let n = tables.inverse.grid();
    let dt = FourierTable::compute(
        &tables.lattice,
        |x| {
            let wi = w.eval_inverse(x);
            wi * v.eval(x) * wi
        },
        tables.inverse.truncation(),
        n,
    );
    let psis = [psi1, psi2];
    let mut q = [[ZERO; 2]; 2];
    for j in 0..2 {
        for l in 0..2 {
            q[j][l] = omega_d * tables.lattice.cell_area() * sandwich(&dt, psis[j], psis[l])?;
        }
    }
    Ok(MassMatrix { q })
}

fn sandwich(table: &FourierTable, a: &BlochField, b: &BlochField) -> Result<C64> {
    a.check_same_space(b)?;
    let idx = a.basis.indices();
    let mut acc = ZERO;
    for (i, mi) in idx.iter().enumerate() {
        let mut row = Vector3::zeros();
        for (j, mj) in idx.iter().enumerate() {
            row += table.coeff([mi[0] - mj[0], mi[1] - mj[1]]) * b.vector(j);
        }
        acc += a.vector(i).dotc(&row);
    }
    Ok(acc)
}

/// `θ♯ = Q₁₁` after checking `|Q₁₂|` and `|Q₁₁ + Q₂₂|` against `tol`.
pub fn compute_theta_sharp(
    tables: &SpectralWeight,
    psi1: &BlochField,
    psi2: &BlochField,
    omega_d: f64,
    v: &PerturbationWeight,
    tol: f64,
) -> Result<(f64, MassMatrix)> {
    let q = mass_matrix(tables, psi1, psi2, omega_d, v)?;
    if q.off_diagonal() > tol || q.trace_residual() > tol {
        return Err(Error::SymmetryViolation(format!(
            "|Q12| = {:.3e}, |Q11 + Q22| = {:.3e} exceed {tol:.1e}",
            q.off_diagonal(),
            q.trace_residual()
        )));
    }
    Ok((q.theta_sharp(), q))
}

/// `⟨Ψ̃_j, W(Ψ̃_n* Ψ̃_l) Ψ̃_k⟩_W = ∫ (ψ_j⊥* ψ_k⊥)(ψ_n⊥* ψ_l⊥) dx` for all
/// sixteen index combinations.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearCoefficients {
    pub beta1: f64,
    pub beta2: f64,
    /// `combos[j][k][n][l]`, zero-based.
    pub combos: [[[[C64; 2]; 2]; 2]; 2],
    /// Largest modulus among the symmetry-forbidden combinations.
    pub forbidden_max: f64,
    /// Largest deviation of the other `β₂` combinations from `β₂`.
    pub beta2_spread: f64,
    /// Largest imaginary part among `β₁`, `β₂`.
    pub imag_max: f64,
}

impl NonlinearCoefficients {
    /// `(p₁, p₂) = (-ω_D ϱ β₁, -2 ω_D ϱ β₂)`.
    pub fn envelope_coefficients(&self, omega_d: f64, rho: f64) -> (f64, f64) {
        (-omega_d * rho * self.beta1, -2.0 * omega_d * rho * self.beta2)
    }
}

pub fn nonlinear_coefficients(
    lattice: &HexLattice,
    psi1: &BlochField,
    psi2: &BlochField,
    tol: f64,
) -> Result<NonlinearCoefficients> {
    psi1.check_same_space(psi2)?;
    let n = (4 * psi1.basis.max_abs() as usize + 2).next_power_of_two().max(16);
    let u = [psi1.periodic_grid(n)?, psi2.periodic_grid(n)?];
    let npts = n * n;
    // d[j][k](x) = ψ_j⊥* · ψ_k⊥
    let mut d = vec![vec![vec![ZERO; npts]; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            for p in 0..npts {
                d[j][k][p] = u[j][0][p].conj() * u[k][0][p] + u[j][1][p].conj() * u[k][1][p];
            }
        }
    }
    let area = lattice.cell_area();
    let mut combos = [[[[ZERO; 2]; 2]; 2]; 2];
    for j in 0..2 {
        for k in 0..2 {
            for nn in 0..2 {
                for l in 0..2 {
                    let s: C64 = (0..npts).map(|p| d[j][k][p] * d[nn][l][p]).sum();
                    combos[j][k][nn][l] = s * (area / npts as f64);
                }
            }
        }
    }
    let allowed = |j: usize, k: usize, n: usize, l: usize| {
        let e = |i: usize| if i == 0 { 1i32 } else { -1 };
        -e(j) + e(k) - e(n) + e(l) == 0
    };
    let mut forbidden_max = 0.0f64;
    for j in 0..2 {
        for k in 0..2 {
            for nn in 0..2 {
                for l in 0..2 {
                    if !allowed(j, k, nn, l) {
                        forbidden_max = forbidden_max.max(combos[j][k][nn][l].norm());
                    }
                }
            }
        }
    }
    let b1 = combos[0][0][0][0];
    let b2 = combos[1][0][0][1];
    let beta2_spread = [combos[0][0][1][1], combos[1][1][0][0], combos[0][1][1][0]]
        .iter()
        .map(|c| (c - b2).norm())
        .fold(0.0, f64::max);
    let imag_max = b1.im.abs().max(b2.im.abs());
    let scale = b1.norm().max(1.0);
    if forbidden_max > tol * scale {
        return Err(Error::SymmetryViolation(format!(
            "forbidden nonlinear combination has modulus {forbidden_max:.3e}"
        )));
    }
    if imag_max > tol * scale {
        return Err(Error::SymmetryViolation(format!(
            "nonlinear coefficients have imaginary part {imag_max:.3e}"
        )));
    }
    Ok(NonlinearCoefficients {
        beta1: b1.re,
        beta2: b2.re,
        combos,
        forbidden_max,
        beta2_spread,
        imag_max,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicalFit {
    pub directions: Vec<Vec2>,
    pub radii: Vec<f64>,
    /// `(ω_{b+1} - ω_D)/r` per direction and radius.
    pub slopes_plus: Vec<Vec<f64>>,
    /// `(ω_D - ω_b)/r` per direction and radius.
    pub slopes_minus: Vec<Vec<f64>>,
    /// `r → 0` intercept of the mean slope, per direction.
    pub fitted: Vec<f64>,
    /// Mean of `fitted`.
    pub cone: f64,
    /// `(max - min)/mean` of `fitted`.
    pub spread: f64,
    /// `max |e±|/r` with `ω± - ω_D = ±C r (1 + e±)`.
    pub residual_bound: f64,
}

pub fn default_directions() -> Vec<Vec2> {
    (0..6)
        .map(|j| {
            let a = PI * j as f64 / 3.0 + DIRECTION_OFFSET;
            Vec2::new(a.cos(), a.sin())
        })
        .collect()
}

/// Samples the two cone bands at `K + r d` and fits `ω± - ω_D = ±C r(1 + a r)`.
pub fn conical_fit(
    candidate: &DiracCandidate,
    radii: &[f64],
    directions: &[Vec2],
) -> Result<ConicalFit> {
    if radii.is_empty() || directions.is_empty() {
        return Err(Error::InvalidInput("conical fit needs radii and directions".into()));
    }
    let b = candidate.band;
    let wd = candidate.omega;
    let prob = &candidate.problem;
    let count = b + 2;
    let mut slopes_plus = Vec::new();
    let mut slopes_minus = Vec::new();
    let mut samples = Vec::new();
    for d in directions {
        let d = d.normalize();
        let (mut sp, mut sm) = (Vec::new(), Vec::new());
        for &r in radii {
            let k = prob.k.k + d * r;
            let p = BlochProblem::with_basis(prob.tables.clone(), k, prob.basis.clone());
            let bands = p.solve_bands(count)?;
            if bands.len() < count {
                return Err(Error::Eigensolver(format!("only {} bands at r = {r}", bands.len())));
            }
            let lower = bands[b - 1].omega;
            let upper = bands[b].omega;
            let third = bands[b + 1].omega;
            let below = if b >= 2 { bands[b - 2].omega } else { f64::NEG_INFINITY };
            let half = (upper - lower).max(0.0);
            if third < upper + half || below > lower - half {
                return Err(Error::BandCrossing(format!(
                    "third band within the cone at r = {r}, direction ({:.3}, {:.3})",
                    d.x, d.y
                )));
            }
            sp.push((upper - wd) / r);
            sm.push((wd - lower) / r);
            samples.push((r, upper - wd, wd - lower));
        }
        slopes_plus.push(sp);
        slopes_minus.push(sm);
    }
    let fitted: Vec<f64> = slopes_plus
        .iter()
        .zip(&slopes_minus)
        .map(|(sp, sm)| {
            let mean: Vec<f64> = sp.iter().zip(sm).map(|(a, b)| 0.5 * (a + b)).collect();
            linear_intercept(radii, &mean)
        })
        .collect();
    let cone = fitted.iter().sum::<f64>() / fitted.len() as f64;
    let (lo, hi) = fitted
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
    let residual_bound = samples
        .iter()
        .map(|&(r, up, down)| {
            let ep = up / (cone * r) - 1.0;
            let em = down / (cone * r) - 1.0;
            ep.abs().max(em.abs()) / r
        })
        .fold(0.0, f64::max);
    Ok(ConicalFit {
        directions: directions.to_vec(),
        radii: radii.to_vec(),
        slopes_plus,
        slopes_minus,
        fitted,
        cone,
        spread: (hi - lo) / cone,
        residual_bound,
    })
}

/// Intercept of the least-squares line through `(x, y)`; the mean for a
/// single point.
fn linear_intercept(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    if x.len() == 1 {
        return y[0];
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    my - sxy / sxx * mx
}

/// Least-squares slope, intercept and `r²`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, my - slope * mx, r2)
}

/// `(δ, ω_{b+1}(K) - ω_b(K))` for `W + δV`.
pub fn gap_sweep(
    weight: &MaterialWeight,
    v: &PerturbationWeight,
    deltas: &[f64],
    truncation: usize,
    band: usize,
) -> Result<Vec<(f64, f64)>> {
    deltas
        .iter()
        .map(|&delta| {
            let w = weight.perturbed(v, delta)?;
            let tables = Arc::new(SpectralWeight::for_truncation(&w, truncation));
            let bands = k_problem(tables, truncation).solve_bands(band + 1)?;
            if bands.len() < band + 1 {
                return Err(Error::Eigensolver(format!("too few bands at delta = {delta}")));
            }
            Ok((delta, bands[band].omega - bands[band - 1].omega))
        })
        .collect()
}

/// Full Dirac point characterization.
#[derive(Debug, Clone)]
pub struct DiracPointData {
    pub k: KPoint,
    pub omega_d: f64,
    pub band: usize,
    pub psi1: BlochField,
    pub psi2: BlochField,
    pub f: [C64; 2],
    pub cd: f64,
    pub theta_sharp: f64,
    pub mass: MassMatrix,
    pub nonlinear: NonlinearCoefficients,
    pub fit: Option<ConicalFit>,
    pub degeneracy_split: f64,
    pub next_gap: f64,
    pub tables: Arc<SpectralWeight>,
    pub truncation: usize,
}

#[derive(Debug, Clone)]
pub struct DiracOptions {
    pub truncation: usize,
    pub radii: Vec<f64>,
    pub directions: Vec<Vec2>,
    pub fit: bool,
}

impl Default for DiracOptions {
    fn default() -> Self {
        Self {
            truncation: 10,
            radii: DEFAULT_RADII.to_vec(),
            directions: default_directions(),
            fit: true,
        }
    }
}

impl DiracPointData {
    pub fn compute(weight: &MaterialWeight, v: &PerturbationWeight, opts: &DiracOptions) -> Result<Self> {
        let cand = locate_dirac_point(weight, opts.truncation)?;
        let tables = cand.problem.tables.clone();
        let fixed = fix_phase(&tables, &cand.decomposition)?;
        let cd = compute_cd(fixed.f);
        let (theta, mass) = compute_theta_sharp(&tables, &fixed.psi1, &fixed.psi2, cand.omega, v, Q_TOL)?;
        let nonlinear = nonlinear_coefficients(&tables.lattice, &fixed.psi1, &fixed.psi2, 1e-10)?;
        let fit = if opts.fit {
            Some(conical_fit(&cand, &opts.radii, &opts.directions)?)
        } else {
            None
        };
        let b = cand.band;
        let split = (cand.pair[1].omega - cand.pair[0].omega).abs() / cand.omega;
        let next_gap = cand.bands.get(b + 1).map(|e| e.omega - cand.omega).unwrap_or(f64::NAN);
        Ok(Self {
            k: cand.problem.k,
            omega_d: cand.omega,
            band: b,
            psi1: fixed.psi1,
            psi2: fixed.psi2,
            f: fixed.f,
            cd,
            theta_sharp: theta,
            mass,
            nonlinear,
            fit,
            degeneracy_split: split,
            next_gap,
            tables,
            truncation: opts.truncation,
        })
    }
}

/// One `ε` sample of the low-contrast check.
#[derive(Debug, Clone, PartialEq)]
pub struct LowContrastSample {
    pub epsilon: f64,
    pub omega_d: f64,
    pub omega_one: f64,
    pub cd: f64,
    /// First-order predictions from `ζ = (K̂, 1)`.
    pub stated_pair: f64,
    pub stated_one: f64,
    /// First-order predictions from the 3×3 degenerate perturbation matrix.
    pub corrected_pair: f64,
    pub corrected_one: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowContrastReport {
    pub omega0: f64,
    /// `ζᵀW¹₀₀ζ` and `ζᵀW¹₀,₋₁ζ`.
    pub zeta_00: f64,
    pub zeta_0m1: f64,
    /// Eigenvalues of the first-order matrix `H/ω₀` for the pair and the
    /// simple branch.
    pub h_pair: f64,
    pub h_one: f64,
    pub samples: Vec<LowContrastSample>,
}

fn ratios(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| w[0] / w[1]).collect()
}

impl LowContrastReport {
    pub fn stated_pair_errors(&self) -> Vec<f64> {
        self.samples.iter().map(|s| (s.omega_d - s.stated_pair).abs()).collect()
    }
    pub fn stated_one_errors(&self) -> Vec<f64> {
        self.samples.iter().map(|s| (s.omega_one - s.stated_one).abs()).collect()
    }
    pub fn corrected_pair_errors(&self) -> Vec<f64> {
        self.samples.iter().map(|s| (s.omega_d - s.corrected_pair).abs()).collect()
    }
    pub fn corrected_one_errors(&self) -> Vec<f64> {
        self.samples.iter().map(|s| (s.omega_one - s.corrected_one).abs()).collect()
    }
    pub fn cd_deviations(&self) -> Vec<f64> {
        self.samples.iter().map(|s| (s.cd - 0.5).abs()).collect()
    }
    /// Error ratios between consecutive `ε` (halving gives 4 for `O(ε²)`).
    pub fn richardson(errors: &[f64]) -> Vec<f64> {
        ratios(errors)
    }
    /// Slope of `log err` against `log ε`.
    pub fn log_slope(&self, errors: &[f64]) -> f64 {
        let x: Vec<f64> = self.samples.iter().map(|s| s.epsilon.ln()).collect();
        let y: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
        linear_fit(&x, &y).0
    }
}

/// Checks the low-contrast expansion for `W_ε = I + ε W¹` at each `ε`.
pub fn low_contrast_validate(
    w1: &PerturbationWeight,
    epsilons: &[f64],
    truncation: usize,
) -> Result<LowContrastReport> {
    let lat = HexLattice::standard();
    let omega0 = lat.k_point().norm();
    let table = FourierTable::compute(&lat, |x| w1.eval(x), 4, 32);
    let r = rotation();
    let khat = lat.k_point() / omega0;
    let zeta = Vector3::new(C64::new(khat.x, 0.0), C64::new(khat.y, 0.0), C64::new(1.0, 0.0));
    let bil = |a: &Vector3<C64>, m: [i32; 2], b: &Vector3<C64>| (a.transpose() * table.coeff(m) * b)[(0, 0)];
    let zeta_00 = bil(&zeta, [0, 0], &zeta).re;
    let zeta_0m1 = bil(&zeta, [0, -1], &zeta).re;
    // Plane waves K, RK, R²K with indices (0,0), (0,1), (-1,0) and the
    // positive-frequency symbol eigenvectors (-q̂, 1)/√2.
    let qs = [lat.k_point(), r * lat.k_point(), r * r * lat.k_point()];
    let ms = [[0, 0], [0, 1], [-1, 0]];
    let xi: Vec<Vector3<C64>> = qs
        .iter()
        .map(|q| {
            let h = q / q.norm();
            Vector3::new(C64::new(-h.x, 0.0), C64::new(-h.y, 0.0), C64::new(1.0, 0.0)) / C64::new(2f64.sqrt(), 0.0)
        })
        .collect();
    let h = Matrix3::<C64>::from_fn(|i, j| {
        let m = [ms[i][0] - ms[j][0], ms[i][1] - ms[j][1]];
        (xi[i].adjoint() * table.coeff(m) * xi[j])[(0, 0)]
    });
    let v1 = Vector3::new(C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)) / C64::new(3f64.sqrt(), 0.0);
    let tau = Sigma::Tau.value();
    let vt = Vector3::new(C64::new(1.0, 0.0), tau.conj(), tau) / C64::new(3f64.sqrt(), 0.0);
    let h_one = (v1.adjoint() * h * v1)[(0, 0)].re;
    let h_pair = (vt.adjoint() * h * vt)[(0, 0)].re;
    if h_pair.abs() < 1e-12 && zeta_0m1.abs() < 1e-12 {
        return Err(Error::InvalidInput(
            "non-degeneracy condition fails: the first-order coupling vanishes".into(),
        ));
    }
    let mut samples = Vec::new();
    for &eps in epsilons {
        let w = MaterialWeight::identity().perturbed(w1, eps)?;
        let cand = locate_dirac_point(&w, truncation)?;
        let tables = cand.problem.tables.clone();
        let fixed = fix_phase(&tables, &cand.decomposition)?;
        let cd = compute_cd(fixed.f);
        let near: Vec<f64> = cand
            .bands
            .iter()
            .map(|e| e.omega)
            .filter(|w| (w - omega0).abs() < 0.5 * omega0 * eps.max(0.05))
            .collect();
        let omega_one = near
            .iter()
            .copied()
            .filter(|w| (w - cand.omega).abs() > 1e-6 * omega0)
            .min_by(|a, b| (a - omega0).abs().total_cmp(&(b - omega0).abs()))
            .ok_or_else(|| Error::NoDiracPoint(format!("no simple branch near omega0 at eps = {eps}")))?;
        samples.push(LowContrastSample {
            epsilon: eps,
            omega_d: cand.omega,
            omega_one,
            cd,
            stated_pair: omega0 + eps * omega0 / 2.0 * (zeta_00 - zeta_0m1),
            stated_one: omega0 + eps * omega0 / 2.0 * (zeta_00 + 2.0 * zeta_0m1),
            corrected_pair: omega0 * (1.0 + eps * h_pair),
            corrected_one: omega0 * (1.0 + eps * h_one),
        });
    }
    Ok(LowContrastReport {
        omega0,
        zeta_00,
        zeta_0m1,
        h_pair,
        h_one,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::project;
    use crate::material::eval_h;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_weight_has_no_dirac_pair() {
        let e = locate_dirac_point(&MaterialWeight::identity(), 3).unwrap_err();
        assert!(matches!(e, Error::NoDiracPoint(_)), "{e}");
        assert!(e.to_string().contains("multiplicity 3"));
    }

    fn example(m: usize) -> (DiracCandidate, PhaseFixedPair) {
        let cand = locate_dirac_point(&MaterialWeight::example(), m).unwrap();
        let fixed = fix_phase(&cand.problem.tables, &cand.decomposition).unwrap();
        (cand, fixed)
    }

    #[test]
    fn example_phase_fixing() {
        let (cand, fixed) = example(4);
        assert_eq!(cand.band, 1);
        let f = fixed.f;
        let c = f[0] - I * f[1];
        assert!(c.im.abs() < 1e-10);
        assert!(c.re > 0.0);
        // F ∝ (1, i)
        assert!((f[0] * I - f[1]).norm() < 1e-10);
        let t = &cand.problem.tables;
        let again = fix_phase_of(t, &fixed.psi1).unwrap();
        assert!(again.psi1.max_diff(&fixed.psi1) < 1e-12);
        for ph in [0.3, 2.0, -1.1] {
            let g = fix_phase_of(t, &fixed.psi1.scaled(C64::from_polar(1.0, ph))).unwrap();
            assert!(g.psi1.max_diff(&fixed.psi1) < 1e-10);
            assert_abs_diff_eq!(compute_cd(g.f), compute_cd(fixed.f), epsilon = 1e-12);
        }
    }

    #[test]
    fn f_functional_properties() {
        let (cand, fixed) = example(4);
        let lat = cand.problem.tables.lattice;
        let (p1, p2) = (&fixed.psi1, &fixed.psi2);
        for a in [p1, p2] {
            let f = compute_f(&lat, a, a).unwrap();
            assert!(f[0].norm() < 1e-10 && f[1].norm() < 1e-10);
        }
        let c = C64::new(0.3, -1.7);
        let f1 = compute_f(&lat, &p1.scaled(c), p2).unwrap();
        let f0 = compute_f(&lat, p1, p2).unwrap();
        assert!((f1[0] - c.conj() * f0[0]).norm() < 1e-12);
        let fr = compute_f(&lat, &p1.rotate(&lat).unwrap(), &p2.rotate(&lat).unwrap()).unwrap();
        let r = rotation();
        for i in 0..2 {
            let want = f0[0] * r[(i, 0)] + f0[1] * r[(i, 1)];
            assert!((fr[i] - want).norm() < 1e-10);
        }
        let fx = compute_f(&lat, p2, p1).unwrap();
        assert!((fx[0] - f0[0].conj()).norm() < 1e-12);
        // F(ψ1, ψ2) ∝ (1, i) and F(ψ2, ψ1) ∝ (1, -i)
        assert!((f0[0] - I * f0[1]).norm() > 1.0);
        assert!((f0[0] + I * f0[1]).norm() < 1e-10);
        assert!((fx[0] + I * fx[1]).norm() > 1.0);
        assert!((fx[0] - I * fx[1]).norm() < 1e-10);
    }

    #[test]
    fn zero_perturbation_gives_zero_mass() {
        let (cand, fixed) = example(3);
        let (theta, q) = compute_theta_sharp(
            &cand.problem.tables,
            &fixed.psi1,
            &fixed.psi2,
            cand.omega,
            &PerturbationWeight::zero(),
            1e-10,
        )
        .unwrap();
        assert_eq!(theta, 0.0);
        assert_eq!(q.off_diagonal(), 0.0);
    }

    #[test]
    fn mass_matrix_structure() {
        let (cand, fixed) = example(4);
        let t = &cand.problem.tables;
        let q = mass_matrix(t, &fixed.psi1, &fixed.psi2, cand.omega, &PerturbationWeight::example()).unwrap();
        assert!((q.q[0][1] - q.q[1][0].conj()).norm() < 1e-12);
        assert!(q.off_diagonal() < 1e-10);
        assert!(q.trace_residual() < 1e-10);
        assert!(q.q[0][0].im.abs() < 1e-12);
        // A PT-symmetric perturbation does not split the pair at first order.
        let s = PerturbationWeight::scalar(eval_h).unwrap();
        let res = compute_theta_sharp(t, &fixed.psi1, &fixed.psi2, cand.omega, &s, 1e-8);
        assert!(matches!(res, Err(Error::SymmetryViolation(_))));
    }

    #[test]
    fn nonlinear_pattern() {
        let (cand, fixed) = example(4);
        let nl = nonlinear_coefficients(&cand.problem.tables.lattice, &fixed.psi1, &fixed.psi2, 1e-10).unwrap();
        assert!(nl.beta1 > 0.0 && nl.beta2 > 0.0);
        assert!(nl.combos[0][1][0][0].norm() < 1e-10);
        assert!((nl.combos[1][1][1][1] - nl.combos[0][0][0][0]).norm() < 1e-10);
        let (p1, p2) = nl.envelope_coefficients(cand.omega, 1.0);
        assert!(p1 < 0.0 && p2 < 0.0);
    }

    #[test]
    fn projections_label_tau_pair() {
        let (cand, fixed) = example(3);
        let lat = cand.problem.tables.lattice;
        let p = project(&fixed.psi1, Sigma::Tau, &lat).unwrap();
        assert!(p.max_diff(&fixed.psi1) < 1e-12);
        let p = project(&fixed.psi2, Sigma::TauBar, &lat).unwrap();
        assert!(p.max_diff(&fixed.psi2) < 1e-12);
    }

    #[test]
    fn linear_fit_exact_line() {
        let (s, b, r2) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]);
        assert_abs_diff_eq!(s, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r2, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(linear_intercept(&[0.01, 0.02], &[1.1, 1.2]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn gap_closes_without_perturbation() {
        let g = gap_sweep(&MaterialWeight::example(), &PerturbationWeight::example(), &[0.0], 3, 1).unwrap();
        assert!(g[0].1.abs() < 1e-9);
    }
}
