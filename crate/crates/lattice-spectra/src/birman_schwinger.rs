//! Birman–Schwinger analysis at and below the spectral threshold.
//!
//! For a one-particle operator `h = ε(p)· + v` the Birman–Schwinger
//! operator at spectral parameter λ is the integral operator with kernel
//! `G(p,q;λ) = (2π)^{−3/2}·v(p−q)/(ε(q)−λ)`.  Its eigenvalue −1 at
//! `λ = ε(0)` marks a threshold eigenvalue or a virtual level of `h`:
//! the distinction is whether the eigenfunction ψ of `G` vanishes at the
//! origin (then `f = ψ/(ε−ε(0))` is square-integrable — a genuine bound
//! state at the band edge) or not (then `f` escapes L² — a resonance).
//!
//! This module discretises `G` with the Nyström method on the shifted
//! midpoint grid, locates eigenvalues near −1, extends eigenfunctions to
//! off-grid points (notably the origin) through the eigenvalue equation,
//! probes L² membership across a resolution schedule, and combines the
//! pieces into a five-way threshold classification.

use ndarray::Array2;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice_model::{DispersionRelation, HoppingCoefficients};
use crate::linalg;
use crate::torus_grid::{self, TorusGrid};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One-particle model: an analysed dispersion plus a real interaction.
#[derive(Debug, Clone)]
pub struct OneParticleModel {
    dispersion: DispersionRelation,
    interaction: HoppingCoefficients,
}

impl OneParticleModel {
    /// Validates that the interaction is real-valued (which, with
    /// hermiticity, makes `v(p) = conj(v(−p))` hold automatically).
    pub fn new(
        dispersion: DispersionRelation,
        interaction: HoppingCoefficients,
    ) -> Result<Self> {
        if !interaction.is_real() {
            return Err(Error::ModelValidation(
                "interaction amplitudes must be real".into(),
            ));
        }
        Ok(OneParticleModel {
            dispersion,
            interaction,
        })
    }

    /// Builds the model from raw hoppings, analysing the dispersion with
    /// the default scan resolution.
    pub fn from_hoppings(
        hopping: HoppingCoefficients,
        interaction: HoppingCoefficients,
    ) -> Result<Self> {
        let dispersion = DispersionRelation::analyze_default(hopping)?;
        Self::new(dispersion, interaction)
    }

    pub fn dispersion(&self) -> &DispersionRelation {
        &self.dispersion
    }

    pub fn interaction(&self) -> &HoppingCoefficients {
        &self.interaction
    }

    /// The threshold energy: the dispersion value at its minimum, which
    /// for threshold-classifiable models equals ε(0).
    pub fn threshold(&self) -> f64 {
        self.dispersion.min_value()
    }

    /// True when both the hopping and the interaction are real, so every
    /// discretised operator is a real symmetric matrix.
    pub fn is_real(&self) -> bool {
        self.dispersion.hopping().is_real() && self.interaction.is_real()
    }
}

/// Dense matrix that is real symmetric when the model is real-even and
/// complex Hermitian otherwise.
#[derive(Debug, Clone)]
pub enum KernelMatrix {
    Real(Array2<f64>),
    Complex(Array2<Complex64>),
}

impl KernelMatrix {
    pub fn dim(&self) -> usize {
        match self {
            KernelMatrix::Real(a) => a.nrows(),
            KernelMatrix::Complex(a) => a.nrows(),
        }
    }

    /// A complex view regardless of storage (copies).
    pub fn to_complex(&self) -> Array2<Complex64> {
        match self {
            KernelMatrix::Real(a) => a.mapv(|x| Complex64::new(x, 0.0)),
            KernelMatrix::Complex(a) => a.clone(),
        }
    }

    /// Eigenvalues assuming the matrix is Hermitian (clones the storage).
    pub fn hermitian_eigenvalues(&self) -> Result<Vec<f64>> {
        match self {
            KernelMatrix::Real(a) => linalg::eigvalsh_real(a.clone()),
            KernelMatrix::Complex(a) => linalg::eigvalsh_complex(a.clone()),
        }
    }
}

/// Nyström discretisation of G(λ) on a torus grid: the plain matrix, its
/// Hermitian symmetrized twin, and the data needed to map between them.
#[derive(Debug, Clone)]
pub struct BirmanSchwingerDiscretization {
    lambda: f64,
    grid: TorusGrid,
    interaction: HoppingCoefficients,
    plain: KernelMatrix,
    symmetrized: KernelMatrix,
    /// ε(p_j) − λ per node; strictly positive by construction.
    denominators: Vec<f64>,
}

impl BirmanSchwingerDiscretization {
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn grid(&self) -> &TorusGrid {
        self.grid_ref()
    }

    fn grid_ref(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn interaction(&self) -> &HoppingCoefficients {
        &self.interaction
    }

    pub fn plain_matrix(&self) -> &KernelMatrix {
        &self.plain
    }

    pub fn symmetrized_matrix(&self) -> &KernelMatrix {
        &self.symmetrized
    }

    pub fn denominators(&self) -> &[f64] {
        &self.denominators
    }
}

/// ε(p_j) − λ at every node, failing when the parameter reaches the band.
fn node_denominators(
    dispersion: &DispersionRelation,
    lambda: f64,
    grid: &TorusGrid,
) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.node_count());
    for (j, &p) in grid.nodes().iter().enumerate() {
        let d = dispersion.eval(p) - lambda;
        if d <= 0.0 {
            return Err(Error::SpectralParameter(format!(
                "ε(p) − λ = {d:.3e} ≤ 0 at node {j} ({:.4}, {:.4}, {:.4}); \
                 λ = {lambda} lies inside the sampled band",
                p[0], p[1], p[2]
            )));
        }
        out.push(d);
    }
    Ok(out)
}

/// Kernel numerator `(2π)^{−3/2}·v(p_i−p_j)` over all node pairs, exploiting
/// the separability `v(p−q) = (2π)^{−3/2}·Σ_s v̂(s)·e^{i(s,p)}·conj(e^{i(s,q)})`
/// to assemble with one rank-1 update per support site.  The net prefactor
/// is `(2π)^{−3}`: one `(2π)^{−3/2}` from the kernel, one from v itself.
pub(crate) fn kernel_numerator(interaction: &HoppingCoefficients, grid: &TorusGrid, real: bool) -> KernelMatrix {
    let m = grid.node_count();
    let norm = TWO_PI.powi(-3);
    if real {
        let mut out = Array2::<f64>::zeros((m, m));
        let mut visited: Vec<[i64; 3]> = Vec::new();
        for (&s, &amp) in interaction.entries() {
            let neg = [-s[0], -s[1], -s[2]];
            if visited.contains(&s) {
                continue;
            }
            visited.push(s);
            visited.push(neg);
            let coef = amp.re * norm;
            if s == [0, 0, 0] {
                out += coef;
                continue;
            }
            // sites s and −s together contribute 2·v̂(s)·cos(s·(p_i−p_j))
            let factor = if s == neg { 1.0 } else { 2.0 };
            let (mut c, mut sn) = (Vec::with_capacity(m), Vec::with_capacity(m));
            for &p in grid.nodes() {
                let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
                c.push(phase.cos());
                sn.push(phase.sin());
            }
            for i in 0..m {
                let (ci, si) = (c[i], sn[i]);
                let row = out.row_mut(i);
                let row = row.into_slice().expect("contiguous row");
                for j in 0..m {
                    row[j] += factor * coef * (ci * c[j] + si * sn[j]);
                }
            }
        }
        KernelMatrix::Real(out)
    } else {
        let mut out = Array2::<Complex64>::zeros((m, m));
        for (&s, &amp) in interaction.entries() {
            let coef = amp * norm;
            let mut u = Vec::with_capacity(m);
            for &p in grid.nodes() {
                let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
                u.push(Complex64::new(phase.cos(), phase.sin()));
            }
            for i in 0..m {
                let ui = coef * u[i];
                let row = out.row_mut(i);
                let row = row.into_slice().expect("contiguous row");
                for j in 0..m {
                    row[j] += ui * u[j].conj();
                }
            }
        }
        KernelMatrix::Complex(out)
    }
}

/// Builds the Nyström discretisation of G(λ) on the given grid:
/// plain form `M[i][j] = (2π)^{−3/2}·v(p_i−p_j)·w/(ε(p_j)−λ)` and the
/// Hermitian symmetrized twin with `(ε−λ)^{−1/2}` split on both sides.
pub fn build_bs(
    model: &OneParticleModel,
    lambda: f64,
    grid: &TorusGrid,
) -> Result<BirmanSchwingerDiscretization> {
    let denominators = node_denominators(&model.dispersion, lambda, grid)?;
    let w = grid.weight();
    let real = model.is_real();
    let numer = kernel_numerator(&model.interaction, grid, real);
    let m = grid.node_count();

    let (plain, symmetrized) = match numer {
        KernelMatrix::Real(k) => {
            let mut plain = k.clone();
            let mut sym = k;
            let inv_sqrt: Vec<f64> = denominators.iter().map(|d| 1.0 / d.sqrt()).collect();
            for i in 0..m {
                for j in 0..m {
                    plain[[i, j]] *= w / denominators[j];
                    sym[[i, j]] *= w * inv_sqrt[i] * inv_sqrt[j];
                }
            }
            (KernelMatrix::Real(plain), KernelMatrix::Real(sym))
        }
        KernelMatrix::Complex(k) => {
            let mut plain = k.clone();
            let mut sym = k;
            let inv_sqrt: Vec<f64> = denominators.iter().map(|d| 1.0 / d.sqrt()).collect();
            for i in 0..m {
                for j in 0..m {
                    plain[[i, j]] *= w / denominators[j];
                    sym[[i, j]] *= w * inv_sqrt[i] * inv_sqrt[j];
                }
            }
            (KernelMatrix::Complex(plain), KernelMatrix::Complex(sym))
        }
    };

    Ok(BirmanSchwingerDiscretization {
        lambda,
        grid: grid.clone(),
        interaction: model.interaction.clone(),
        plain,
        symmetrized,
        denominators,
    })
}

/// Builds only the symmetrized matrix and the node denominators — the
/// parts the classifier needs — halving peak memory on fine grids.
fn symmetrized_only(
    model: &OneParticleModel,
    lambda: f64,
    grid: &TorusGrid,
) -> Result<(KernelMatrix, Vec<f64>)> {
    let denominators = node_denominators(&model.dispersion, lambda, grid)?;
    let w = grid.weight();
    let real = model.is_real();
    let mut numer = kernel_numerator(&model.interaction, grid, real);
    let m = grid.node_count();
    let inv_sqrt: Vec<f64> = denominators.iter().map(|d| 1.0 / d.sqrt()).collect();
    match &mut numer {
        KernelMatrix::Real(k) => {
            for i in 0..m {
                for j in 0..m {
                    k[[i, j]] *= w * inv_sqrt[i] * inv_sqrt[j];
                }
            }
        }
        KernelMatrix::Complex(k) => {
            for i in 0..m {
                for j in 0..m {
                    k[[i, j]] *= w * inv_sqrt[i] * inv_sqrt[j];
                }
            }
        }
    }
    Ok((numer, denominators))
}

/// Makes the first significant component of `v` positive real in place
/// (the deterministic phase convention used for every reported vector).
pub fn normalize_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * max) {
        let phase = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= phase;
        }
    }
}

/// Replaces ψ by whichever of ψ ± φ, φ(p) = conj(ψ(−p)), has the larger
/// norm, making |ψ| an even function on the node set.
pub fn evenize(grid: &TorusGrid, psi: &[Complex64]) -> Vec<Complex64> {
    let m = psi.len();
    let mut plus = Vec::with_capacity(m);
    let mut minus = Vec::with_capacity(m);
    for j in 0..m {
        let phi = psi[grid.negation_index(j)].conj();
        plus.push(psi[j] + phi);
        minus.push(psi[j] - phi);
    }
    let norm = |v: &[Complex64]| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if norm(&plus) >= norm(&minus) {
        plus
    } else {
        minus
    }
}

/// Scales ψ to unit L²(T³) norm under the grid quadrature.
pub(crate) fn l2_normalize(grid: &TorusGrid, psi: &mut [Complex64]) {
    let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.weight();
    if n2 > 0.0 {
        let s = 1.0 / n2.sqrt();
        for z in psi.iter_mut() {
            *z *= s;
        }
    }
}

/// An eigenpair of the discretised Birman–Schwinger operator: the
/// eigenvalue of the symmetrized matrix and the plain-form eigenfunction
/// samples, evenized, L²(grid)-normalized, and phase-normalized.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub eigenvalue: f64,
    pub samples: Vec<Complex64>,
}

fn hermitian_eigenpairs(matrix: KernelMatrix) -> Result<(Vec<f64>, Vec<Vec<Complex64>>)> {
    match matrix {
        KernelMatrix::Real(a) => {
            let (w, vecs) = linalg::eigh_real(a)?;
            let out = (0..w.len())
                .map(|k| {
                    vecs.vector(k)
                        .iter()
                        .map(|&x| Complex64::new(x, 0.0))
                        .collect()
                })
                .collect();
            Ok((w, out))
        }
        KernelMatrix::Complex(a) => {
            let (w, vecs) = linalg::eigh_complex(a)?;
            let out = (0..w.len())
                .map(|k| vecs.vector(k).iter().copied().collect())
                .collect();
            Ok((w, out))
        }
    }
}

/// The `count` eigenvalues of the symmetrized matrix nearest `target`,
/// with eigenvectors mapped back to plain-form eigenfunction samples via
/// the diagonal similarity `ψ_j = (ε(p_j)−λ)^{1/2}·x_j` and evenized.
pub fn eigenpairs_near(
    bs: &BirmanSchwingerDiscretization,
    target: f64,
    count: usize,
) -> Result<Vec<EigenPair>> {
    let (evs, vecs) = hermitian_eigenpairs(bs.symmetrized.clone())?;
    let mut order: Vec<usize> = (0..evs.len()).collect();
    order.sort_by(|&a, &b| {
        (evs[a] - target)
            .abs()
            .total_cmp(&(evs[b] - target).abs())
    });
    let mut out = Vec::new();
    for &k in order.iter().take(count) {
        let mut psi: Vec<Complex64> = vecs[k]
            .iter()
            .zip(&bs.denominators)
            .map(|(&x, &d)| x * d.sqrt())
            .collect();
        psi = evenize(&bs.grid, &psi);
        l2_normalize(&bs.grid, &mut psi);
        normalize_phase(&mut psi);
        out.push(EigenPair {
            eigenvalue: evs[k],
            samples: psi,
        });
    }
    Ok(out)
}

/// Off-grid evaluation of a Birman–Schwinger eigenfunction through its
/// eigenvalue equation.
///
/// For `Mψ = μψ` the function `ψ(p) = (1/μ)·(2π)^{−3/2}·Σ_j v(p−p_j)·w·
/// ψ_j/(ε(p_j)−λ)` reproduces the nodal values exactly and extends ψ to
/// every point of the torus.  Because the kernel is a finite trigonometric
/// sum, the extension reduces to one coefficient per support site,
/// evaluated here once so that repeated evaluations are cheap.
#[derive(Debug, Clone)]
pub struct EigenfunctionExtension {
    terms: Vec<([i64; 3], Complex64)>,
}

/// Site coefficients of the extension, from raw discretisation parts.
fn extension_from_parts(
    grid: &TorusGrid,
    interaction: &HoppingCoefficients,
    denominators: &[f64],
    psi: &[Complex64],
    mu: f64,
) -> Result<EigenfunctionExtension> {
    if mu.abs() < 1e-8 {
        return Err(Error::Numerical(format!(
            "cannot extend through an eigenvalue of magnitude {:.2e}",
            mu.abs()
        )));
    }
    if psi.len() != grid.node_count() {
        return Err(Error::InvalidArgument(
            "eigenvector length does not match the grid".into(),
        ));
    }
    let w = grid.weight();
    let norm = TWO_PI.powi(-3); // kernel prefactor × v's own prefactor
    let mut terms = Vec::new();
    for (&s, &amp) in interaction.entries() {
        // C_s = Σ_j e^{−i(s,p_j)}·w·ψ_j/(ε_j−λ)
        let mut c = Complex64::new(0.0, 0.0);
        for (j, &p) in grid.nodes().iter().enumerate() {
            let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
            c += Complex64::new(phase.cos(), -phase.sin()) * psi[j] / denominators[j];
        }
        terms.push((s, amp * c * w * norm / mu));
    }
    Ok(EigenfunctionExtension { terms })
}

/// Rayleigh quotient of the plain matrix on `psi` — the eigenvalue μ when
/// `psi` is an eigenvector, as the extension's precondition demands.
fn plain_rayleigh(bs: &BirmanSchwingerDiscretization, psi: &[Complex64]) -> Result<f64> {
    if psi.len() != bs.grid.node_count() {
        return Err(Error::InvalidArgument(
            "eigenvector length does not match the grid".into(),
        ));
    }
    let den: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
    if den == 0.0 {
        return Err(Error::InvalidArgument(
            "cannot extend the zero vector".into(),
        ));
    }
    let mut num = Complex64::new(0.0, 0.0);
    match &bs.plain {
        KernelMatrix::Real(a) => {
            for (i, row) in a.rows().into_iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &x) in row.iter().enumerate() {
                    acc += psi[j] * x;
                }
                num += psi[i].conj() * acc;
            }
        }
        KernelMatrix::Complex(a) => {
            for (i, row) in a.rows().into_iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &x) in row.iter().enumerate() {
                    acc += psi[j] * x;
                }
                num += psi[i].conj() * acc;
            }
        }
    }
    Ok((num / den).re)
}

impl EigenfunctionExtension {
    /// Precomputes the site coefficients for the plain-form eigenfunction
    /// samples `psi`, deriving the eigenvalue μ from the plain matrix.
    pub fn new(bs: &BirmanSchwingerDiscretization, psi: &[Complex64]) -> Result<Self> {
        let mu = plain_rayleigh(bs, psi)?;
        extension_from_parts(&bs.grid, &bs.interaction, &bs.denominators, psi, mu)
    }

    /// Same, with the eigenvalue supplied by the caller (useful when it is
    /// already known from the symmetrized eigensolve).
    pub fn with_eigenvalue(
        bs: &BirmanSchwingerDiscretization,
        psi: &[Complex64],
        mu: f64,
    ) -> Result<Self> {
        extension_from_parts(&bs.grid, &bs.interaction, &bs.denominators, psi, mu)
    }

    /// Evaluates the extension at an arbitrary torus point.
    pub fn eval(&self, p: [f64; 3]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for &(s, c) in &self.terms {
            let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
            acc += c * Complex64::new(phase.cos(), phase.sin());
        }
        acc
    }
}

/// One-shot eigenfunction extension (see [`EigenfunctionExtension`]).
pub fn extend_eigenfunction(
    bs: &BirmanSchwingerDiscretization,
    psi: &[Complex64],
    p: [f64; 3],
) -> Result<Complex64> {
    Ok(EigenfunctionExtension::new(bs, psi)?.eval(p))
}

/// Verdict of the L² membership probe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProbeVerdict {
    /// `ψ/(ε−ε(0))` escapes L²: the witness behaves like a virtual level.
    Divergent,
    /// The quotient stays square-integrable: threshold-eigenvalue behaviour.
    Convergent,
    /// The growth exponent falls between the calibrated cutoffs.
    Indeterminate,
}

/// Result of probing `‖ψ/(ε−ε(0))‖²` across a resolution schedule.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeResult {
    /// `(N, I_N)` with `I_N = Σ_j w·|ψ(p_j)/(ε(p_j)−ε(0))|²` and ψ
    /// normalized to unit L²(grid) norm per resolution.
    pub i_values: Vec<(usize, f64)>,
    /// Log-log slope of the last schedule pair.
    pub slope: f64,
    pub verdict: ProbeVerdict,
}

/// Probes L² membership of `ψ/(ε−ε(0))` from eigenfunction samples given
/// on each grid of a schedule.
///
/// The integral `I_N` diverges like a power of N when the quotient leaves
/// L² (the origin-avoiding nodes approach the singularity as the grid is
/// refined), and stalls when it converges.  The slope of `log I_N` against
/// `log N` over the last schedule pair decides: > 0.5 divergent, < 0.1
/// convergent, otherwise indeterminate.
pub fn l2_membership_probe(
    model: &OneParticleModel,
    samples_per_grid: &[(usize, Vec<Complex64>)],
) -> Result<ProbeResult> {
    if samples_per_grid.len() < 2 {
        return Err(Error::InvalidArgument(
            "the membership probe needs samples on at least two grids".into(),
        ));
    }
    let threshold = model.threshold();
    let mut i_values = Vec::with_capacity(samples_per_grid.len());
    for (n, samples) in samples_per_grid {
        let grid = torus_grid::make_grid(*n)?;
        if samples.len() != grid.node_count() {
            return Err(Error::InvalidArgument(format!(
                "sample count {} does not match grid {n}³",
                samples.len()
            )));
        }
        let mut psi = samples.clone();
        l2_normalize(&grid, &mut psi);
        let mut acc = 0.0;
        for (j, &p) in grid.nodes().iter().enumerate() {
            let d = model.dispersion.eval(p) - threshold;
            acc += (psi[j] / d).norm_sqr();
        }
        i_values.push((*n, acc * grid.weight()));
    }
    let (np, ip) = i_values[i_values.len() - 2];
    let (nl, il) = i_values[i_values.len() - 1];
    let slope = if ip > 0.0 && il > 0.0 {
        (il / ip).ln() / (nl as f64 / np as f64).ln()
    } else {
        0.0
    };
    let verdict = if slope > 0.5 {
        ProbeVerdict::Divergent
    } else if slope < 0.1 {
        ProbeVerdict::Convergent
    } else {
        ProbeVerdict::Indeterminate
    };
    Ok(ProbeResult {
        i_values,
        slope,
        verdict,
    })
}

/// Threshold classification labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    /// −1 is not an eigenvalue of G(ε(0)).
    I,
    /// A simple virtual level: one witness, ψ(0) ≠ 0.
    II,
    /// Threshold eigenvalue(s) only: every witness has ψ(0) = 0 with a
    /// convergent probe.
    III,
    /// Coexistence: several witnesses, exactly one with ψ(0) ≠ 0.
    IV,
    /// Two or more independent witnesses with ψ(0) ≠ 0.
    V,
}

/// Whether the evidence behind the case label is internally consistent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportStatus {
    Determinate,
    Indeterminate,
}

/// Real/imaginary pair for JSON-friendly complex values.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

/// Per-witness evidence in a threshold report.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    /// Eigenvalue of the symmetrized discretisation on the finest grid.
    pub eigenvalue: f64,
    /// Matched eigenvalue per schedule grid (functional-form matching).
    pub eigenvalue_ladder: Vec<(usize, f64)>,
    /// Extension of the (L²-normalized) witness to the origin, finest grid.
    pub psi0: ComplexValue,
    /// The same extension per schedule grid.
    pub psi0_ladder: Vec<(usize, ComplexValue)>,
    /// |ψ(0)| < τ·max_j|ψ(p_j)| on the finest grid.
    pub origin_vanishes: bool,
    /// Log-log growth exponent of the membership integral (last pair).
    pub slope: f64,
    pub probe: ProbeVerdict,
    /// `(N, I_N)` membership-integral ladder.
    pub i_values: Vec<(usize, f64)>,
    /// Evenized, normalized eigenfunction samples per schedule grid
    /// (kept for downstream overlap analysis; not serialized).
    #[serde(skip)]
    pub samples_per_grid: Vec<(usize, Vec<Complex64>)>,
}

impl WitnessReport {
    /// Samples on the finest grid of the schedule.
    pub fn finest_samples(&self) -> &(usize, Vec<Complex64>) {
        self.samples_per_grid
            .last()
            .expect("witness carries at least one grid")
    }
}

/// Numerical tolerances the classification was decided with.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Tolerances {
    /// Relative Richardson estimate of the quadrature error, from the
    /// `∫1/(ε−λ)` ladder on the last two schedule grids.
    pub est_rel: f64,
    /// Eigenvalue capture distance from −1 on the finest grid.
    pub tol_ev: f64,
    /// ψ(0) zero-test threshold relative to max_j|ψ(p_j)|.
    pub tau: f64,
    /// Capture distance used when matching witnesses on coarser grids.
    pub capture_window: f64,
}

/// Classification of the threshold of a one-particle operator.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    pub case: CaseLabel,
    /// The spectral parameter used (the band minimum ε(0)).
    pub lambda: f64,
    /// All finest-grid eigenvalues within `tol_ev` of −1, ascending.
    pub eigenvalues: Vec<f64>,
    pub witnesses: Vec<WitnessReport>,
    pub tolerances: Tolerances,
    pub provenance_notes: Vec<String>,
    pub status: ReportStatus,
    pub schedule: Vec<usize>,
}

const REGULARITY_NOTE: &str = "the psi(0) dichotomy presumes interaction regularity \
     (Holder exponent above 1/2); it is assumed here, not verified numerically";
const CASE_V_NOTE: &str = "Case V is excluded for regular interactions; this verdict \
     most likely signals a discretization artifact";

/// Classifies the threshold of `h = ε(p)· + v` into Cases I–V.
///
/// Builds G(ε(0)) on every grid of the schedule, gathers the finest-grid
/// eigenvalues within a resolution-aware tolerance of −1, matches each
/// witness across the coarser grids by functional form (extension +
/// projection onto the near-(−1) eigenspace, robust against degenerate
/// rotations), extends every witness to the origin, and probes L²
/// membership of ψ/(ε−ε(0)) along the schedule.
pub fn classify_threshold(
    model: &OneParticleModel,
    n_schedule: &[usize],
) -> Result<ThresholdReport> {
    torus_grid::validate_schedule(n_schedule)?;
    if !model.dispersion.threshold_classifiable() {
        return Err(Error::HypothesisViolation(
            "threshold classification needs a unique non-degenerate dispersion \
             minimum at the origin"
            .into(),
        ));
    }
    let lambda = model.threshold();

    // Resolution-aware tolerances from the a-type integral ∫1/(ε−λ).
    let inv = |p: [f64; 3]| 1.0 / (model.dispersion.eval(p) - lambda);
    let refined = torus_grid::integrate_refined(inv, n_schedule)?;
    let est_rel = (refined.error_estimate / refined.value).abs();
    let tol_ev = (5.0 * est_rel).max(0.05);
    let tau = 10.0 * est_rel;
    let capture_window = (2.0 * tol_ev).max(0.15);
    let tolerances = Tolerances {
        est_rel,
        tol_ev,
        tau,
        capture_window,
    };

    // Eigendata per grid: every pair within the capture window of −1.
    struct GridData {
        grid: TorusGrid,
        denominators: Vec<f64>,
        captured: Vec<(f64, Vec<Complex64>)>, // symmetrized-coordinate vectors
    }
    let mut per_grid = Vec::with_capacity(n_schedule.len());
    for &n in n_schedule {
        let grid = torus_grid::make_grid(n)?;
        let (sym, denominators) = symmetrized_only(model, lambda, &grid)?;
        let (evs, vecs) = hermitian_eigenpairs(sym)?;
        let captured: Vec<(f64, Vec<Complex64>)> = evs
            .iter()
            .zip(vecs)
            .filter(|(ev, _)| (**ev + 1.0).abs() <= capture_window)
            .map(|(ev, v)| (*ev, v))
            .collect();
        per_grid.push(GridData {
            grid,
            denominators,
            captured,
        });
    }

    let finest = per_grid.last().expect("schedule has at least two grids");
    let mut cluster: Vec<(f64, Vec<Complex64>)> = finest
        .captured
        .iter()
        .filter(|(ev, _)| (ev + 1.0).abs() <= tol_ev)
        .cloned()
        .collect();
    cluster.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut provenance_notes = vec![REGULARITY_NOTE.to_string()];

    if cluster.is_empty() {
        return Ok(ThresholdReport {
            case: CaseLabel::I,
            lambda,
            eigenvalues: Vec::new(),
            witnesses: Vec::new(),
            tolerances,
            provenance_notes,
            status: ReportStatus::Determinate,
            schedule: n_schedule.to_vec(),
        });
    }

    // A lightweight handle for building extensions on any schedule grid.
    let extension_for = |g: &GridData, psi: &[Complex64], mu: f64| -> Result<EigenfunctionExtension> {
        extension_from_parts(&g.grid, &model.interaction, &g.denominators, psi, mu)
    };

    let mut witnesses = Vec::new();
    for (ev_fine, x_fine) in &cluster {
        // plain-form witness on the finest grid
        let mut psi_fine: Vec<Complex64> = x_fine
            .iter()
            .zip(&finest.denominators)
            .map(|(&x, &d)| x * d.sqrt())
            .collect();
        psi_fine = evenize(&finest.grid, &psi_fine);
        l2_normalize(&finest.grid, &mut psi_fine);
        normalize_phase(&mut psi_fine);

        let fine_ext = extension_for(finest, &psi_fine, *ev_fine)?;

        // Match the witness on every coarser grid by functional form.
        let mut samples_per_grid: Vec<(usize, Vec<Complex64>)> = Vec::new();
        let mut eigenvalue_ladder: Vec<(usize, f64)> = Vec::new();
        let mut psi0_ladder: Vec<(usize, ComplexValue)> = Vec::new();
        for g in per_grid.iter().take(per_grid.len() - 1) {
            let n = g.grid.n_per_axis();
            // interpolated plain-form values on this grid
            let interp: Vec<Complex64> =
                g.grid.nodes().iter().map(|&p| fine_ext.eval(p)).collect();
            // symmetrized coordinates of the interpolant
            let y: Vec<Complex64> = interp
                .iter()
                .zip(&g.denominators)
                .map(|(&v, &d)| v * d.sqrt())
                .collect();
            let mut matched_ev = 0.0;
            let mut weight_total = 0.0;
            let mut combo = vec![Complex64::new(0.0, 0.0); y.len()];
            for (ev, x) in &g.captured {
                let c: Complex64 = x
                    .iter()
                    .zip(&y)
                    .map(|(&a, &b)| a.conj() * b)
                    .sum();
                matched_ev += c.norm_sqr() * ev;
                weight_total += c.norm_sqr();
                for (o, &a) in combo.iter_mut().zip(x.iter()) {
                    *o += c * a;
                }
            }
            if weight_total <= 1e-24 {
                // No overlap with any captured mode: fall back to the
                // interpolant itself (still a legitimate sample).
                let mut psi = interp;
                psi = evenize(&g.grid, &psi);
                l2_normalize(&g.grid, &mut psi);
                normalize_phase(&mut psi);
                let ext = extension_for(g, &psi, *ev_fine)?;
                psi0_ladder.push((n, ext.eval([0.0, 0.0, 0.0]).into()));
                eigenvalue_ladder.push((n, *ev_fine));
                samples_per_grid.push((n, psi));
                continue;
            }
            let matched_ev = matched_ev / weight_total;
            // plain-form projected witness on this grid
            let mut psi: Vec<Complex64> = combo
                .iter()
                .zip(&g.denominators)
                .map(|(&x, &d)| x * d.sqrt())
                .collect();
            psi = evenize(&g.grid, &psi);
            l2_normalize(&g.grid, &mut psi);
            normalize_phase(&mut psi);
            let ext = extension_for(g, &psi, matched_ev)?;
            psi0_ladder.push((n, ext.eval([0.0, 0.0, 0.0]).into()));
            eigenvalue_ladder.push((n, matched_ev));
            samples_per_grid.push((n, psi));
        }

        let n_fine = finest.grid.n_per_axis();
        let psi0_fine = fine_ext.eval([0.0, 0.0, 0.0]);
        psi0_ladder.push((n_fine, psi0_fine.into()));
        eigenvalue_ladder.push((n_fine, *ev_fine));
        samples_per_grid.push((n_fine, psi_fine.clone()));

        let probe = l2_membership_probe(model, &samples_per_grid)?;
        let sup = psi_fine.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let origin_vanishes = psi0_fine.norm() < tau * sup;

        witnesses.push(WitnessReport {
            eigenvalue: *ev_fine,
            eigenvalue_ladder,
            psi0: psi0_fine.into(),
            psi0_ladder,
            origin_vanishes,
            slope: probe.slope,
            probe: probe.verdict,
            i_values: probe.i_values,
            samples_per_grid,
        });
    }

    let nonvanishing = witnesses.iter().filter(|w| !w.origin_vanishes).count();
    let case = if witnesses.len() == 1 {
        if nonvanishing == 1 {
            CaseLabel::II
        } else {
            CaseLabel::III
        }
    } else if nonvanishing == 0 {
        CaseLabel::III
    } else if nonvanishing == 1 {
        CaseLabel::IV
    } else {
        CaseLabel::V
    };
    if case == CaseLabel::V {
        provenance_notes.push(CASE_V_NOTE.to_string());
    }

    // The probes must corroborate the ψ(0) dichotomy.
    let mut status = ReportStatus::Determinate;
    for (i, w) in witnesses.iter().enumerate() {
        let contradiction = match (w.origin_vanishes, w.probe) {
            (_, ProbeVerdict::Indeterminate) => true,
            (true, ProbeVerdict::Divergent) => true,
            (false, ProbeVerdict::Convergent) => true,
            _ => false,
        };
        if contradiction {
            status = ReportStatus::Indeterminate;
            provenance_notes.push(format!(
                "witness {i}: membership probe (slope {:.3}) does not corroborate \
                 the psi(0) test; verdict left indeterminate",
                w.slope
            ));
        }
    }

    Ok(ThresholdReport {
        case,
        lambda,
        eigenvalues: cluster.iter().map(|(ev, _)| *ev).collect(),
        witnesses,
        tolerances,
        provenance_notes,
        status,
        schedule: n_schedule.to_vec(),
    })
}
