//! One-particle hopping data and dispersion relations.
//!
//! A lattice Hamiltonian in coordinate representation is a Toeplitz-type
//! hopping operator plus a diagonal potential,
//! `(ĥψ̂)(x) = Σ_s ε̂(s)ψ̂(x+s) + v̂(x)ψ̂(x)`.  In momentum representation
//! the hopping part becomes multiplication by the dispersion relation
//! `ε(p) = Σ_s ε̂(s)·e^{i(p,s)}`, a trigonometric polynomial on the torus.
//! This module stores the finitely supported coefficients `ε̂`, evaluates
//! `ε` and its derivatives, locates and characterises the dispersion
//! minimum, tests conditional negative definiteness (the generalized-
//! Laplacian property), and provides the coordinate-space application and
//! semigroup positivity checks.

use std::collections::BTreeMap;

use ndarray::Array2;
use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::linalg;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const PI: f64 = std::f64::consts::PI;

/// Wraps an angle into (−π, π].
pub(crate) fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TWO_PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

/// Torus distance between two points: max over axes of the wrapped gap.
pub(crate) fn torus_distance(p: [f64; 3], q: [f64; 3]) -> f64 {
    (0..3)
        .map(|a| {
            let d = (p[a] - q[a]).rem_euclid(TWO_PI);
            d.min(TWO_PI - d)
        })
        .fold(0.0, f64::max)
}

/// Finitely supported map `Z³ → C` of hopping amplitudes.
///
/// The constructor enforces the hermiticity condition
/// `entry(s) = conj(entry(−s))`, which makes the dispersion real-valued.
/// The same type carries interaction potentials `v̂`; those are additionally
/// required to be real where the theory demands `v(p) = conj(v(−p))`
/// together with a real-valued site potential (note that a real hermitian
/// map is automatically even).
#[derive(Debug, Clone, PartialEq)]
pub struct HoppingCoefficients {
    entries: BTreeMap<[i64; 3], Complex64>,
}

impl HoppingCoefficients {
    /// Builds the coefficient map, validating hermiticity.
    ///
    /// Exact-zero amplitudes are dropped; duplicated sites are rejected.
    pub fn new<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ([i64; 3], Complex64)>,
    {
        let mut map = BTreeMap::new();
        for (s, z) in entries {
            if z == Complex64::new(0.0, 0.0) {
                continue;
            }
            if map.insert(s, z).is_some() {
                return Err(Error::ModelValidation(format!(
                    "duplicate amplitude for site ({}, {}, {})",
                    s[0], s[1], s[2]
                )));
            }
        }
        let out = HoppingCoefficients { entries: map };
        out.check_hermiticity()?;
        Ok(out)
    }

    /// Convenience constructor from real amplitudes.
    pub fn from_real<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ([i64; 3], f64)>,
    {
        Self::new(
            entries
                .into_iter()
                .map(|(s, x)| (s, Complex64::new(x, 0.0))),
        )
    }

    /// Builds the map filling in omitted conjugate partners; sites given on
    /// both ends are cross-checked against each other.
    pub fn with_auto_conjugates<I>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = ([i64; 3], Complex64)>,
    {
        let mut given: BTreeMap<[i64; 3], Complex64> = BTreeMap::new();
        for (s, z) in entries {
            if given.insert(s, z).is_some() {
                return Err(Error::ModelValidation(format!(
                    "duplicate amplitude for site ({}, {}, {})",
                    s[0], s[1], s[2]
                )));
            }
        }
        let mut full = given.clone();
        for (&s, &z) in &given {
            let neg = [-s[0], -s[1], -s[2]];
            full.entry(neg).or_insert_with(|| z.conj());
        }
        Self::new(full)
    }

    fn check_hermiticity(&self) -> Result<()> {
        let scale = self.l1_norm().max(1.0);
        for (&s, &z) in &self.entries {
            let neg = [-s[0], -s[1], -s[2]];
            let partner = self.entry(neg);
            let defect = (z - partner.conj()).norm();
            if defect > 1e-12 * scale {
                return Err(Error::ModelValidation(format!(
                    "hermiticity defect {defect:.3e} at site ({}, {}, {}): \
                     amplitude {z} vs conjugate partner {partner}",
                    s[0], s[1], s[2]
                )));
            }
        }
        Ok(())
    }

    /// The standard discrete Laplacian, `ε̂(0)=6`, `ε̂(s)=−1` for |s|=1,
    /// whose dispersion is `ε(p) = 2Σ(1−cos p_i)`.
    pub fn standard_laplacian() -> Self {
        Self::generalized_laplacian(1.0)
    }

    /// Nearest-neighbour Laplacian scaled by `t`: `ε̂(0)=6t`, `ε̂(|s|=1)=−t`,
    /// with dispersion `2t·Σ(1−cos p_i)`.
    pub fn generalized_laplacian(t: f64) -> Self {
        let mut entries = vec![([0i64, 0, 0], 6.0 * t)];
        for a in 0..3usize {
            for sign in [-1i64, 1] {
                let mut s = [0i64; 3];
                s[a] = sign;
                entries.push((s, -t));
            }
        }
        Self::from_real(entries).expect("nearest-neighbour map is hermitian")
    }

    /// Amplitude at a site (zero if absent).
    pub fn entry(&self, s: [i64; 3]) -> Complex64 {
        self.entries
            .get(&s)
            .copied()
            .unwrap_or_else(|| Complex64::new(0.0, 0.0))
    }

    /// Iterator over the nonzero amplitudes.
    pub fn entries(&self) -> impl Iterator<Item = (&[i64; 3], &Complex64)> {
        self.entries.iter()
    }

    /// Max ‖s‖∞ of the support.
    pub fn support_radius(&self) -> i64 {
        self.entries
            .keys()
            .map(|s| s.iter().map(|x| x.abs()).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Σ|ε̂(s)|.
    pub fn l1_norm(&self) -> f64 {
        self.entries.values().map(|z| z.norm()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every amplitude is real (within 1e−12 of the ℓ¹ scale).
    /// Together with hermiticity this forces the map to be even, so the
    /// dispersion and the momentum kernel are real and even.
    pub fn is_real(&self) -> bool {
        let tol = 1e-12 * self.l1_norm().max(1.0);
        self.entries.values().all(|z| z.im.abs() <= tol)
    }

    /// Dispersion value `ε(p) = Σ_s ε̂(s)·e^{i(p,s)}`.
    ///
    /// The imaginary part cancels by hermiticity and is discarded after a
    /// tolerance check in debug builds.
    pub fn dispersion(&self, p: [f64; 3]) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&s, &z) in &self.entries {
            let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
            acc += z * Complex64::new(phase.cos(), phase.sin());
        }
        debug_assert!(
            acc.im.abs() <= 1e-12 * self.l1_norm().max(1.0),
            "imaginary residue {} in dispersion",
            acc.im
        );
        acc.re
    }

    /// Momentum-space kernel `v(p) = (2π)^{−3/2}·Σ_s v̂(s)·e^{i(p,s)}`,
    /// the convolution symbol of the potential.
    pub fn momentum_kernel(&self, p: [f64; 3]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&s, &z) in &self.entries {
            let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
            acc += z * Complex64::new(phase.cos(), phase.sin());
        }
        acc * TWO_PI.powf(-1.5)
    }

    /// Analytic gradient of the dispersion.
    pub fn gradient(&self, p: [f64; 3]) -> [f64; 3] {
        let mut g = [Complex64::new(0.0, 0.0); 3];
        for (&s, &z) in &self.entries {
            let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
            let e = Complex64::new(phase.cos(), phase.sin());
            for a in 0..3 {
                g[a] += z * Complex64::new(0.0, s[a] as f64) * e;
            }
        }
        [g[0].re, g[1].re, g[2].re]
    }

    /// Analytic Hessian of the dispersion.
    pub fn hessian(&self, p: [f64; 3]) -> [[f64; 3]; 3] {
        let mut h = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (&s, &z) in &self.entries {
            let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
            let e = Complex64::new(phase.cos(), phase.sin());
            for a in 0..3 {
                for b in 0..3 {
                    h[a][b] -= z * (s[a] as f64 * s[b] as f64) * e;
                }
            }
        }
        let mut out = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                out[a][b] = h[a][b].re;
            }
        }
        out
    }

    /// Lévy–Khinchin criterion for real-valued dispersions: the hopping
    /// generates a positivity-preserving semigroup (is a generalized
    /// Laplacian) iff every off-origin amplitude is real and ≤ 0.
    pub fn is_conditionally_negative_definite(&self) -> bool {
        self.entries
            .iter()
            .filter(|(&s, _)| s != [0, 0, 0])
            .all(|(_, z)| z.im.abs() <= 1e-12 && z.re <= 1e-12)
    }
}

/// Evaluates the dispersion relation of a hermitian hopping at `p`.
pub fn dispersion_eval(hopping: &HoppingCoefficients, p: [f64; 3]) -> f64 {
    hopping.dispersion(p)
}

/// Outcome of the global-minimum search for a dispersion relation.
#[derive(Debug, Clone)]
pub struct MinimumReport {
    pub minimizer: [f64; 3],
    pub value: f64,
    pub hessian: [[f64; 3]; 3],
    pub smallest_hessian_eigenvalue: f64,
    /// Exactly one refined scan minimum attains the global value.
    pub unique: bool,
    /// The Hessian at the minimum has an eigenvalue below tolerance; the
    /// minimum is then flat in some direction and downstream threshold
    /// analysis is unreliable.
    pub degenerate: bool,
}

pub(crate) fn modified_newton_refine(hopping: &HoppingCoefficients, start: [f64; 3]) -> [f64; 3] {
    let mut p = start;
    for _ in 0..60 {
        let g = hopping.gradient(p);
        let gnorm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if gnorm < 1e-13 {
            break;
        }
        let h = hopping.hessian(p);
        let mut hm = Array2::<f64>::zeros((3, 3));
        for a in 0..3 {
            for b in 0..3 {
                hm[[a, b]] = h[a][b];
            }
        }
        // Positive-definite modification: descend even through saddles.
        let dir = match linalg::eigh_real(hm) {
            Ok((w, vecs)) => {
                let floor = 1e-9_f64.max(w.iter().fold(0.0_f64, |m, x| m.max(x.abs())) * 1e-9);
                let mut d = [0.0; 3];
                for k in 0..3 {
                    let v = vecs.vector(k);
                    let proj = v[0] * g[0] + v[1] * g[1] + v[2] * g[2];
                    let lam = w[k].abs().max(floor);
                    for a in 0..3 {
                        d[a] -= v[a] * proj / lam;
                    }
                }
                d
            }
            Err(_) => [-g[0], -g[1], -g[2]],
        };
        let slope = dir[0] * g[0] + dir[1] * g[1] + dir[2] * g[2];
        let dir = if slope < 0.0 {
            dir
        } else {
            [-g[0], -g[1], -g[2]]
        };
        let slope = dir[0] * g[0] + dir[1] * g[1] + dir[2] * g[2];
        let base = hopping.dispersion(p);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-12 {
            let cand = [
                wrap_angle(p[0] + t * dir[0]),
                wrap_angle(p[1] + t * dir[1]),
                wrap_angle(p[2] + t * dir[2]),
            ];
            if hopping.dispersion(cand) <= base + 1e-4 * t * slope {
                p = cand;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    p
}

/// Grid scan plus damped-Newton refinement for the global dispersion
/// minimum, with a uniqueness decision over all refined scan minima.
pub fn find_global_minimum(
    hopping: &HoppingCoefficients,
    scan_resolution: usize,
) -> Result<MinimumReport> {
    if scan_resolution < 8 {
        return Err(Error::InvalidArgument(format!(
            "scan resolution must be at least 8, got {scan_resolution}"
        )));
    }
    if hopping.is_empty() {
        return Err(Error::ModelValidation(
            "cannot search the minimum of an empty hopping".into(),
        ));
    }
    let n = scan_resolution;
    let axis: Vec<f64> = (0..n).map(|j| -PI + TWO_PI * j as f64 / n as f64).collect();
    let value = |i: usize, j: usize, k: usize| hopping.dispersion([axis[i], axis[j], axis[k]]);

    // Cache the scan values; n ≤ a few dozen keeps this small.
    let mut scan = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                scan[(i * n + j) * n + k] = value(i, j, k);
            }
        }
    }
    let at = |i: isize, j: isize, k: isize| -> f64 {
        let m = n as isize;
        let (i, j, k) = (
            i.rem_euclid(m) as usize,
            j.rem_euclid(m) as usize,
            k.rem_euclid(m) as usize,
        );
        scan[(i * n + j) * n + k]
    };

    // Local minima of the scan (≤ all six axis neighbours, periodic).
    let mut seeds = Vec::new();
    for i in 0..n as isize {
        for j in 0..n as isize {
            for k in 0..n as isize {
                let v = at(i, j, k);
                let neighbours = [
                    at(i + 1, j, k),
                    at(i - 1, j, k),
                    at(i, j + 1, k),
                    at(i, j - 1, k),
                    at(i, j, k + 1),
                    at(i, j, k - 1),
                ];
                if neighbours.iter().all(|&u| v <= u) {
                    seeds.push([
                        axis[i as usize],
                        axis[j as usize],
                        axis[k as usize],
                    ]);
                }
            }
        }
    }

    // Refine every seed and merge coincident minimizers.
    let mut refined: Vec<([f64; 3], f64)> = Vec::new();
    for seed in seeds {
        let p = modified_newton_refine(hopping, seed);
        let v = hopping.dispersion(p);
        if let Some(existing) = refined
            .iter_mut()
            .find(|(q, _)| torus_distance(*q, p) < 1e-6)
        {
            if v < existing.1 {
                *existing = (p, v);
            }
        } else {
            refined.push((p, v));
        }
    }
    refined.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (best_p, best_v) = refined[0];
    let global_count = refined.iter().filter(|(_, v)| *v <= best_v + 1e-9).count();

    let hessian = hopping.hessian(best_p);
    let mut hm = Array2::<f64>::zeros((3, 3));
    for a in 0..3 {
        for b in 0..3 {
            hm[[a, b]] = hessian[a][b];
        }
    }
    let evs = linalg::eigvalsh_real(hm)?;
    let smallest = evs[0];

    Ok(MinimumReport {
        minimizer: best_p,
        value: best_v,
        hessian,
        smallest_hessian_eigenvalue: smallest,
        unique: global_count == 1,
        degenerate: smallest < 1e-9,
    })
}

/// A dispersion relation analysed for its global minimum.
#[derive(Debug, Clone)]
pub struct DispersionRelation {
    hopping: HoppingCoefficients,
    value_at_origin: f64,
    minimum: MinimumReport,
}

impl DispersionRelation {
    /// Default per-axis scan resolution for the minimum search.
    pub const DEFAULT_SCAN_RESOLUTION: usize = 32;

    /// Analyses the hopping with the given scan resolution.
    pub fn analyze(hopping: HoppingCoefficients, scan_resolution: usize) -> Result<Self> {
        let minimum = find_global_minimum(&hopping, scan_resolution)?;
        let value_at_origin = hopping.dispersion([0.0, 0.0, 0.0]);
        Ok(DispersionRelation {
            hopping,
            value_at_origin,
            minimum,
        })
    }

    /// Analyses with the default scan resolution.
    pub fn analyze_default(hopping: HoppingCoefficients) -> Result<Self> {
        Self::analyze(hopping, Self::DEFAULT_SCAN_RESOLUTION)
    }

    pub fn eval(&self, p: [f64; 3]) -> f64 {
        self.hopping.dispersion(p)
    }

    pub fn hopping(&self) -> &HoppingCoefficients {
        &self.hopping
    }

    pub fn value_at_origin(&self) -> f64 {
        self.value_at_origin
    }

    pub fn minimum(&self) -> &MinimumReport {
        &self.minimum
    }

    pub fn min_value(&self) -> f64 {
        self.minimum.value
    }

    /// Threshold analysis requires a unique non-degenerate minimum sitting
    /// at the origin (within 1e−9).
    pub fn threshold_classifiable(&self) -> bool {
        self.minimum.unique
            && !self.minimum.degenerate
            && torus_distance(self.minimum.minimizer, [0.0, 0.0, 0.0]) < 1e-9
    }
}

/// The conditional-negative-definiteness defect functional
/// `F(p,q) = ε(p) + ε(q) − ½(ε(p+q) + ε(p−q)) − ε(0)`.
///
/// For a conditionally negative definite dispersion with a unique minimum
/// at the origin, `F(p,q) ≥ 0` everywhere and `> 0` for `q ≠ 0` outside a
/// measure-zero exceptional set of `p`.
pub fn cnd_inequality_value(hopping: &HoppingCoefficients, p: [f64; 3], q: [f64; 3]) -> f64 {
    let plus = [p[0] + q[0], p[1] + q[1], p[2] + q[2]];
    let minus = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    hopping.dispersion(p) + hopping.dispersion(q)
        - 0.5 * (hopping.dispersion(plus) + hopping.dispersion(minus))
        - hopping.dispersion([0.0, 0.0, 0.0])
}

fn halton(index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let mut i = index;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Minimum of `F(p,q)` over a quasi-random sample of `p`, excluding the
/// measure-zero set where `F` vanishes identically in the factorised form.
///
/// A sample point is kept when some off-origin site `s` with a strictly
/// negative amplitude satisfies both `1−cos(q·s) > 0` and
/// `1−cos(p·s) > 0`; when no site qualifies for the given `q` (notably at
/// `q = 0`) the exclusion is vacuous and all samples are used.
pub fn cnd_inequality_margin(
    hopping: &HoppingCoefficients,
    q: [f64; 3],
    sample_count: usize,
) -> f64 {
    let negative_sites: Vec<[i64; 3]> = hopping
        .entries()
        .filter(|(&s, &z)| s != [0, 0, 0] && z.re < -1e-12)
        .map(|(&s, _)| s)
        .collect();
    let active_sites: Vec<[i64; 3]> = negative_sites
        .iter()
        .copied()
        .filter(|s| {
            let phase = q[0] * s[0] as f64 + q[1] * s[1] as f64 + q[2] * s[2] as f64;
            1.0 - phase.cos() > 1e-8
        })
        .collect();

    let mut min_f = f64::INFINITY;
    let mut kept = 0usize;
    for idx in 1..=sample_count.max(1) {
        let p = [
            -PI + TWO_PI * halton(idx, 2),
            -PI + TWO_PI * halton(idx, 3),
            -PI + TWO_PI * halton(idx, 5),
        ];
        if !active_sites.is_empty() {
            let qualifies = active_sites.iter().any(|s| {
                let phase = p[0] * s[0] as f64 + p[1] * s[1] as f64 + p[2] * s[2] as f64;
                1.0 - phase.cos() > 1e-8
            });
            if !qualifies {
                continue;
            }
        }
        kept += 1;
        min_f = min_f.min(cnd_inequality_value(hopping, p, q));
    }
    if kept == 0 {
        // Everything was excluded; fall back to the unfiltered sample.
        for idx in 1..=sample_count.max(1) {
            let p = [
                -PI + TWO_PI * halton(idx, 2),
                -PI + TWO_PI * halton(idx, 3),
                -PI + TWO_PI * halton(idx, 5),
            ];
            min_f = min_f.min(cnd_inequality_value(hopping, p, q));
        }
    }
    min_f
}

/// Result of applying the coordinate-representation Hamiltonian on a
/// truncated box.
#[derive(Debug, Clone)]
pub struct CoordinateApplication {
    pub box_radius: i64,
    /// Nonzero output values, indexed by lattice site inside the box.
    pub values: BTreeMap<[i64; 3], Complex64>,
    /// Set when the state support touches the hopping-radius margin of the
    /// box, so the zero-padding truncates genuine contributions.
    pub truncation_warning: bool,
}

fn validate_real_potential(potential: &HoppingCoefficients) -> Result<()> {
    if !potential.is_real() {
        return Err(Error::ModelValidation(
            "site potential must be real-valued".into(),
        ));
    }
    Ok(())
}

/// Applies `(ĥψ̂)(x) = Σ_s ε̂(s)ψ̂(x+s) + v̂(x)ψ̂(x)` on the box
/// `‖x‖∞ ≤ box_radius`, treating the state as zero outside the box.
pub fn apply_coordinate_hamiltonian(
    hopping: &HoppingCoefficients,
    potential: Option<&HoppingCoefficients>,
    state: &BTreeMap<[i64; 3], Complex64>,
    box_radius: i64,
) -> Result<CoordinateApplication> {
    if box_radius < 1 {
        return Err(Error::InvalidArgument(format!(
            "box radius must be positive, got {box_radius}"
        )));
    }
    if let Some(v) = potential {
        validate_real_potential(v)?;
    }
    let margin = box_radius - hopping.support_radius();
    let inside = |x: &[i64; 3]| x.iter().all(|c| c.abs() <= box_radius);
    let truncation_warning = state
        .iter()
        .any(|(x, z)| z.norm() > 0.0 && x.iter().any(|c| c.abs() > margin));

    let mut out: BTreeMap<[i64; 3], Complex64> = BTreeMap::new();
    // Hopping term: scatter each state value to the sites it feeds.
    // (Σ_s ε̂(s)ψ̂(x+s) contributes ψ̂(y)·ε̂(y−x) to position x = y − s.)
    for (&y, &amp) in state {
        if !inside(&y) {
            continue; // zero-padding: the state is truncated to the box
        }
        for (&s, &eps) in hopping.entries() {
            let x = [y[0] - s[0], y[1] - s[1], y[2] - s[2]];
            if inside(&x) {
                *out.entry(x).or_insert_with(|| Complex64::new(0.0, 0.0)) += eps * amp;
            }
        }
    }
    // Diagonal potential term.
    if let Some(v) = potential {
        for (&x, &amp) in state {
            if !inside(&x) {
                continue;
            }
            let vx = v.entry(x);
            if vx.norm() > 0.0 {
                *out.entry(x).or_insert_with(|| Complex64::new(0.0, 0.0)) += vx * amp;
            }
        }
    }
    out.retain(|_, z| z.norm() > 0.0);
    Ok(CoordinateApplication {
        box_radius,
        values: out,
        truncation_warning,
    })
}

/// Verdict of the positivity check for the semigroup `e^{−tĥ}`.
#[derive(Debug, Clone)]
pub struct SemigroupCheck {
    /// All entries of the truncated-box semigroup exceed −1e−12 (and, for
    /// complex hoppings, carry no imaginary residue above tolerance).
    pub positive: bool,
    /// The most negative entry (real part) found.
    pub min_entry: f64,
    /// Side length cubed of the truncated box matrix.
    pub dimension: usize,
}

/// Builds the truncated coordinate-representation matrix of `ĥ` on the box
/// `‖x‖∞ ≤ box_radius`, exponentiates, and checks entrywise positivity.
pub fn semigroup_positivity_check(
    hopping: &HoppingCoefficients,
    potential: Option<&HoppingCoefficients>,
    box_radius: i64,
    t: f64,
) -> Result<SemigroupCheck> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "semigroup time must be positive, got {t}"
        )));
    }
    if box_radius < 2 * hopping.support_radius() {
        return Err(Error::InvalidArgument(format!(
            "box radius {box_radius} too small for hopping support radius {}",
            hopping.support_radius()
        )));
    }
    if let Some(v) = potential {
        validate_real_potential(v)?;
    }
    let side = (2 * box_radius + 1) as usize;
    let dim = side * side * side;
    let sites: Vec<[i64; 3]> = {
        let mut v = Vec::with_capacity(dim);
        for x in -box_radius..=box_radius {
            for y in -box_radius..=box_radius {
                for z in -box_radius..=box_radius {
                    v.push([x, y, z]);
                }
            }
        }
        v
    };

    let tol = 1e-12;
    if hopping.is_real() {
        let mut h = Array2::<f64>::zeros((dim, dim));
        for (i, &xi) in sites.iter().enumerate() {
            for (j, &xj) in sites.iter().enumerate() {
                let s = [xj[0] - xi[0], xj[1] - xi[1], xj[2] - xi[2]];
                h[[i, j]] = hopping.entry(s).re;
            }
            if let Some(v) = potential {
                h[[i, i]] += v.entry(xi).re;
            }
        }
        let e = linalg::expm_neg_real(h, t)?;
        let min_entry = e.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(SemigroupCheck {
            positive: min_entry >= -tol,
            min_entry,
            dimension: dim,
        })
    } else {
        let mut h = Array2::<Complex64>::zeros((dim, dim));
        for (i, &xi) in sites.iter().enumerate() {
            for (j, &xj) in sites.iter().enumerate() {
                let s = [xj[0] - xi[0], xj[1] - xi[1], xj[2] - xi[2]];
                h[[i, j]] = hopping.entry(s);
            }
            if let Some(v) = potential {
                h[[i, i]] += v.entry(xi);
            }
        }
        let e = linalg::expm_neg_complex(h, t)?;
        let min_entry = e.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
        let max_imag = e.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        Ok(SemigroupCheck {
            positive: min_entry >= -tol && max_imag <= tol,
            min_entry,
            dimension: dim,
        })
    }
}

#[derive(Deserialize)]
struct SiteAmplitude {
    s: [i64; 3],
    re: f64,
    #[serde(default)]
    im: f64,
}

#[derive(Deserialize)]
struct SiteValue {
    s: [i64; 3],
    value: f64,
}

#[derive(Deserialize)]
struct ModelFile {
    hopping: Vec<SiteAmplitude>,
    #[serde(default)]
    potential: Vec<SiteValue>,
}

/// Parses the JSON model format:
/// `{"hopping": [{"s": [i,j,k], "re": …, "im": …}, …],
///   "potential": [{"s": [i,j,k], "value": …}, …]}`.
///
/// Omitted conjugate partners are auto-filled; sites present on both ends
/// are cross-checked.  Returns the hopping map and the (possibly empty)
/// interaction potential.
pub fn parse_model_file(json: &str) -> Result<(HoppingCoefficients, HoppingCoefficients)> {
    let file: ModelFile = serde_json::from_str(json)
        .map_err(|e| Error::ModelValidation(format!("model file: {e}")))?;
    let hopping = HoppingCoefficients::with_auto_conjugates(
        file.hopping
            .iter()
            .map(|a| (a.s, Complex64::new(a.re, a.im))),
    )?;
    let potential = HoppingCoefficients::with_auto_conjugates(
        file.potential
            .iter()
            .map(|a| (a.s, Complex64::new(a.value, 0.0))),
    )?;
    if !potential.is_real() {
        return Err(Error::ModelValidation(
            "interaction potential must be real-valued".into(),
        ));
    }
    Ok((hopping, potential))
}
