//! Quadrature on the torus T³ = (−π, π]³.
//!
//! All integrals in this crate are taken over the torus, and the integrands
//! of interest (1/ε, Birman–Schwinger kernels) have an integrable
//! singularity at the origin.  The grid therefore uses shifted midpoints,
//! `p_j = −π + (j + ½)·2π/N` per axis with even `N`, so that no node ever
//! lands on the origin (or on any point with a coordinate equal to 0 or π).
//! The rule is spectrally accurate for smooth periodic integrands and
//! converges at a slow but reliable first-order rate in 1/N for the
//! singular ones; a Richardson step over a resolution schedule recovers an
//! extrapolated value together with an error estimate.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Shifted-midpoint tensor grid on T³ with uniform weights.
///
/// Nodes are ordered lexicographically in the axis indices `(j₁, j₂, j₃)`,
/// which fixes the row/column ordering of every matrix built on the grid.
#[derive(Debug, Clone)]
pub struct TorusGrid {
    n_per_axis: usize,
    axis_nodes: Vec<f64>,
    nodes: Vec<[f64; 3]>,
    weight: f64,
}

impl TorusGrid {
    /// Number of nodes per axis.
    pub fn n_per_axis(&self) -> usize {
        self.n_per_axis
    }

    /// Total number of nodes, `N³`.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// All nodes in lexicographic order.
    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    /// The `i`-th node.
    pub fn node(&self, i: usize) -> [f64; 3] {
        self.nodes[i]
    }

    /// Uniform quadrature weight `(2π/N)³`.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// One-dimensional node coordinates shared by the three axes.
    pub fn axis_nodes(&self) -> &[f64] {
        &self.axis_nodes
    }

    /// Index of the node at `−p_i` (the midpoint grid is symmetric under
    /// `p ↦ −p`; per axis the reflection maps slot `j` to `N − 1 − j`).
    pub fn negation_index(&self, i: usize) -> usize {
        let n = self.n_per_axis;
        let (j1, j2, j3) = self.split(i);
        self.fuse(n - 1 - j1, n - 1 - j2, n - 1 - j3)
    }

    /// Index of the node reached from node `i` by shifting each axis slot
    /// by the given (possibly negative) number of grid steps, with periodic
    /// wraparound.  Shifting by `d` steps moves the node by `d·2π/N`.
    pub fn shifted_index(&self, i: usize, steps: [i64; 3]) -> usize {
        let n = self.n_per_axis as i64;
        let (j1, j2, j3) = self.split(i);
        let wrap = |j: usize, d: i64| -> usize { (j as i64 + d).rem_euclid(n) as usize };
        self.fuse(wrap(j1, steps[0]), wrap(j2, steps[1]), wrap(j3, steps[2]))
    }

    fn split(&self, i: usize) -> (usize, usize, usize) {
        let n = self.n_per_axis;
        (i / (n * n), (i / n) % n, i % n)
    }

    fn fuse(&self, j1: usize, j2: usize, j3: usize) -> usize {
        let n = self.n_per_axis;
        (j1 * n + j2) * n + j3
    }
}

/// Builds the shifted-midpoint grid with `n_per_axis` nodes per axis.
pub fn make_grid(n_per_axis: usize) -> Result<TorusGrid> {
    if n_per_axis < 4 || n_per_axis % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "grid size must be an even integer >= 4, got {n_per_axis}"
        )));
    }
    let n = n_per_axis;
    let h = TWO_PI / n as f64;
    let axis_nodes: Vec<f64> = (0..n)
        .map(|j| -std::f64::consts::PI + (j as f64 + 0.5) * h)
        .collect();
    let mut nodes = Vec::with_capacity(n * n * n);
    for &x in &axis_nodes {
        for &y in &axis_nodes {
            for &z in &axis_nodes {
                nodes.push([x, y, z]);
            }
        }
    }
    Ok(TorusGrid {
        n_per_axis: n,
        axis_nodes,
        nodes,
        weight: h * h * h,
    })
}

/// Midpoint-rule quadrature of `f` over T³ at a single resolution.
///
/// Streams over the nodes without materialising them, so it is usable at
/// scalar-integral resolutions (N up to several hundred) where a full
/// `TorusGrid` would be wasteful.
pub fn midpoint_quadrature<F>(f: F, n_per_axis: usize) -> Result<f64>
where
    F: Fn([f64; 3]) -> f64,
{
    if n_per_axis < 4 || n_per_axis % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "grid size must be an even integer >= 4, got {n_per_axis}"
        )));
    }
    let n = n_per_axis;
    let h = TWO_PI / n as f64;
    let axis: Vec<f64> = (0..n)
        .map(|j| -std::f64::consts::PI + (j as f64 + 0.5) * h)
        .collect();
    let mut sum = 0.0;
    for &x in &axis {
        for &y in &axis {
            for &z in &axis {
                let v = f([x, y, z]);
                if !v.is_finite() {
                    return Err(Error::Evaluation(format!(
                        "integrand is not finite at node ({x:.6}, {y:.6}, {z:.6})"
                    )));
                }
                sum += v;
            }
        }
    }
    Ok(sum * h * h * h)
}

/// Result of a refined quadrature: the extrapolated value, a conservative
/// error estimate, and the raw midpoint values per resolution.
#[derive(Debug, Clone)]
pub struct RefinedIntegral {
    /// Richardson extrapolation (first order in 1/N) of the last two raw values.
    pub value: f64,
    /// |last raw value − previous raw value|.
    pub error_estimate: f64,
    /// `(n, raw midpoint value)` for every resolution of the schedule.
    pub samples: Vec<(usize, f64)>,
}

/// First-order-in-1/N Richardson extrapolation from two (N, value) pairs.
pub fn richardson(coarse: (usize, f64), fine: (usize, f64)) -> f64 {
    let (np, vp) = (coarse.0 as f64, coarse.1);
    let (nl, vl) = (fine.0 as f64, fine.1);
    (nl * vl - np * vp) / (nl - np)
}

/// Midpoint quadrature of `f` over a schedule of resolutions with
/// Richardson extrapolation on the last two.
///
/// The schedule must contain at least two strictly increasing even values.
pub fn integrate_refined<F>(f: F, n_schedule: &[usize]) -> Result<RefinedIntegral>
where
    F: Fn([f64; 3]) -> f64,
{
    validate_schedule(n_schedule)?;
    let mut samples = Vec::with_capacity(n_schedule.len());
    for &n in n_schedule {
        samples.push((n, midpoint_quadrature(&f, n)?));
    }
    let last = samples[samples.len() - 1];
    let prev = samples[samples.len() - 2];
    Ok(RefinedIntegral {
        value: richardson(prev, last),
        error_estimate: (last.1 - prev.1).abs(),
        samples,
    })
}

/// Checks that a resolution schedule is usable for refinement: at least two
/// entries, all even and >= 4, strictly increasing.
pub fn validate_schedule(n_schedule: &[usize]) -> Result<()> {
    if n_schedule.len() < 2 {
        return Err(Error::InvalidArgument(
            "refinement schedule needs at least two resolutions".into(),
        ));
    }
    for &n in n_schedule {
        if n < 4 || n % 2 != 0 {
            return Err(Error::InvalidArgument(format!(
                "schedule entries must be even integers >= 4, got {n}"
            )));
        }
    }
    for w in n_schedule.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::InvalidArgument(format!(
                "schedule must be strictly increasing, got {} after {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// Nyström matrix of the convolution operator
/// `(v f)(p) = (2π)^{−3/2} ∫ v(p−q) f(q) dq`.
///
/// The plain form is `M[i][j] = (2π)^{−3/2} v(p_i−p_j)·w`; the symmetrized
/// form uses `√w · v · √w`, which coincides with the plain form on this
/// uniform-weight grid but is kept distinct for future non-uniform rules.
/// The matrix is Hermitian whenever `v(p) = conj(v(−p))`.
pub fn convolution_matrix<F>(v: F, grid: &TorusGrid, symmetrized: bool) -> Array2<Complex64>
where
    F: Fn([f64; 3]) -> Complex64,
{
    let m = grid.node_count();
    let norm = (TWO_PI).powf(-1.5);
    let mut out = Array2::<Complex64>::zeros((m, m));
    let nodes = grid.nodes();
    let w = grid.weight();
    let sw = w.sqrt();
    for i in 0..m {
        let pi = nodes[i];
        for j in 0..m {
            let pj = nodes[j];
            let d = [pi[0] - pj[0], pi[1] - pj[1], pi[2] - pj[2]];
            let val = v(d) * norm;
            out[[i, j]] = if symmetrized { val * sw * sw } else { val * w };
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg;
    use approx::assert_abs_diff_eq;

    fn standard_dispersion(p: [f64; 3]) -> f64 {
        2.0 * ((1.0 - p[0].cos()) + (1.0 - p[1].cos()) + (1.0 - p[2].cos()))
    }

    #[test]
    fn grid_of_four_has_expected_shape() {
        let g = make_grid(4).unwrap();
        assert_eq!(g.node_count(), 64);
        let total: f64 = g.weight() * g.node_count() as f64;
        assert_abs_diff_eq!(total, TWO_PI.powi(3), epsilon = 1e-9);
        let min_norm = g
            .nodes()
            .iter()
            .map(|p| (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert_abs_diff_eq!(
            min_norm,
            3f64.sqrt() * std::f64::consts::PI / 4.0,
            epsilon = 1e-12
        );
        assert!(min_norm > 0.0);
    }

    #[test]
    fn odd_or_tiny_grids_are_rejected() {
        assert!(make_grid(5).is_err());
        assert!(make_grid(2).is_err());
        assert!(midpoint_quadrature(|_| 1.0, 7).is_err());
    }

    #[test]
    fn negation_index_maps_node_to_its_reflection() {
        let g = make_grid(6).unwrap();
        for i in 0..g.node_count() {
            let p = g.node(i);
            let q = g.node(g.negation_index(i));
            for a in 0..3 {
                // equal modulo 2π
                let diff = (p[a] + q[a]).rem_euclid(TWO_PI);
                let diff = diff.min(TWO_PI - diff);
                assert!(diff < 1e-12, "axis {a}: {} vs {}", p[a], q[a]);
            }
            assert_eq!(g.negation_index(g.negation_index(i)), i);
        }
    }

    #[test]
    fn shifted_index_moves_by_grid_steps() {
        let g = make_grid(8).unwrap();
        let h = TWO_PI / 8.0;
        let i = 137;
        let j = g.shifted_index(i, [2, -1, 8]);
        let p = g.node(i);
        let q = g.node(j);
        let expect = [p[0] + 2.0 * h, p[1] - h, p[2]];
        for a in 0..3 {
            let diff = (q[a] - expect[a]).rem_euclid(TWO_PI);
            let diff = diff.min(TWO_PI - diff);
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn constant_integrates_to_torus_volume() {
        for n in [4, 8, 12] {
            let v = midpoint_quadrature(|_| 1.0, n).unwrap();
            assert_abs_diff_eq!(v, TWO_PI.powi(3), epsilon = 1e-9);
        }
    }

    #[test]
    fn cosine_integrates_to_zero() {
        let v = midpoint_quadrature(|p| p[0].cos(), 8).unwrap();
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trig_monomials_below_aliasing_are_exact() {
        // e^{i(p,s)} integrates to 0 for 0 < ‖s‖∞ < N; check the real part
        // for all |s| ≤ 3 at N = 8.
        for s1 in -3i64..=3 {
            for s2 in -3i64..=3 {
                for s3 in -3i64..=3 {
                    if (s1, s2, s3) == (0, 0, 0) {
                        continue;
                    }
                    let v = midpoint_quadrature(
                        |p| (s1 as f64 * p[0] + s2 as f64 * p[1] + s3 as f64 * p[2]).cos(),
                        8,
                    )
                    .unwrap();
                    assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn refined_integral_of_smooth_function_is_tight() {
        let r = integrate_refined(|p| p[0].cos() * p[0].cos(), &[4, 8]).unwrap();
        // ∫cos² = ½ per axis → ½·(2π)³
        assert_abs_diff_eq!(r.value, 0.5 * TWO_PI.powi(3), epsilon = 1e-9);
        assert!(r.error_estimate < 1e-9);
    }

    #[test]
    fn schedule_validation_rejects_bad_inputs() {
        assert!(integrate_refined(|_| 1.0, &[8]).is_err());
        assert!(integrate_refined(|_| 1.0, &[8, 8]).is_err());
        assert!(integrate_refined(|_| 1.0, &[8, 6]).is_err());
        assert!(integrate_refined(|_| 1.0, &[6, 9]).is_err());
    }

    #[test]
    fn non_finite_integrand_is_reported_with_its_node() {
        let err = midpoint_quadrature(|p| 1.0 / (p[0] - p[0]), 4).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("not finite"), "message was: {msg}");
    }

    #[test]
    fn inverse_dispersion_error_estimates_decrease() {
        // 1/ε has an integrable singularity at the origin; successive
        // midpoint differences must shrink along a doubling schedule.
        let f = |p: [f64; 3]| 1.0 / standard_dispersion(p);
        let raw: Vec<f64> = [32usize, 64, 128, 256]
            .iter()
            .map(|&n| midpoint_quadrature(f, n).unwrap())
            .collect();
        let d1 = (raw[1] - raw[0]).abs();
        let d2 = (raw[2] - raw[1]).abs();
        let d3 = (raw[3] - raw[2]).abs();
        assert!(d1 > d2 && d2 > d3, "diffs {d1} {d2} {d3}");
    }

    #[test]
    fn constant_kernel_fills_matrix_uniformly() {
        // v̂ = {0→μ} gives v(p) = (2π)^{−3/2}·μ, hence entries μ/N³.
        let mu = 2.5;
        let g = make_grid(4).unwrap();
        let v = |_d: [f64; 3]| Complex64::new(TWO_PI.powf(-1.5) * mu, 0.0);
        let m = convolution_matrix(v, &g, false);
        let expect = mu / 64.0;
        for &x in m.iter() {
            assert_abs_diff_eq!(x.re, expect, epsilon = 1e-14);
            assert_abs_diff_eq!(x.im, 0.0, epsilon = 1e-14);
        }
        // symmetrized form coincides on the uniform grid
        let s = convolution_matrix(v, &g, true);
        for (a, b) in m.iter().zip(s.iter()) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
        }
    }

    #[test]
    fn cosine_kernel_has_rank_at_most_six() {
        // v(p) = (2π)^{−3/2}·2Σcos p_i separates into 6 products.
        let g = make_grid(4).unwrap();
        let v = |d: [f64; 3]| {
            Complex64::new(
                TWO_PI.powf(-1.5) * 2.0 * (d[0].cos() + d[1].cos() + d[2].cos()),
                0.0,
            )
        };
        let m = convolution_matrix(v, &g, true);
        let evs = linalg::eigvalsh_complex(m).unwrap();
        let top = evs.iter().map(|e| e.abs()).fold(0.0, f64::max);
        let rank = evs.iter().filter(|e| e.abs() > 1e-10 * top).count();
        assert!(rank <= 6, "rank {rank}");
    }

    #[test]
    fn real_even_kernel_gives_hermitian_matrix() {
        let g = make_grid(4).unwrap();
        let v = |d: [f64; 3]| Complex64::new(TWO_PI.powf(-1.5) * (1.0 + d[0].cos()), 0.0);
        let m = convolution_matrix(v, &g, false);
        let mut defect = 0.0f64;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                defect = defect.max((m[[i, j]] - m[[j, i]].conj()).norm());
            }
        }
        assert!(defect < 1e-14);
    }
}
