//! Thin wrappers around the LAPACK divide-and-conquer Hermitian eigensolvers
//! (`dsyevd`/`zheevd`) from the system BLAS/LAPACK library.
//!
//! The matrices this crate produces are dense Hermitian (real symmetric in
//! the common case of real, even hopping amplitudes), with dimensions up to
//! a few thousand.  Divide-and-conquer is the right tool at that scale; the
//! tridiagonal-QR routines are an order of magnitude slower at n ≈ 4000.
//!
//! Storage convention: `ndarray` is row-major while LAPACK expects
//! column-major.  A real symmetric matrix equals its transpose, so the
//! buffer can be handed over as-is; on exit with `jobz = 'V'` the
//! eigenvectors sit in LAPACK columns, i.e. in the *rows* of the row-major
//! array.  For complex Hermitian input the same hand-over presents
//! conj(A) to LAPACK, which has the same (real) eigenvalues and conjugated
//! eigenvectors; the wrapper conjugates the vectors back on return.

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;

use crate::error::{Error, Result};

extern "C" {
    fn dsyevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        w: *mut f64,
        work: *mut f64,
        lwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );

    fn zheevd_(
        jobz: *const u8,
        uplo: *const u8,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        w: *mut f64,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        lrwork: *const i32,
        iwork: *mut i32,
        liwork: *const i32,
        info: *mut i32,
    );

    fn dgeev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        wr: *mut f64,
        wi: *mut f64,
        vl: *mut f64,
        ldvl: *const i32,
        vr: *mut f64,
        ldvr: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );
}

/// Eigenvectors of a Hermitian matrix, stored one per row.
///
/// Row `k` is the (unit-norm) eigenvector belonging to `values[k]`;
/// eigenvalues are in ascending order as returned by LAPACK.
#[derive(Debug, Clone)]
pub struct EigenVectors<T> {
    rows: Array2<T>,
}

impl<T> EigenVectors<T> {
    /// View of the `k`-th eigenvector.
    pub fn vector(&self, k: usize) -> ArrayView1<'_, T> {
        self.rows.row(k)
    }

    pub fn count(&self) -> usize {
        self.rows.nrows()
    }
}

fn lapack_status(routine: &str, info: i32) -> Error {
    Error::Numerical(format!("{routine} failed with info = {info}"))
}

/// Eigenvalues of a real symmetric matrix, ascending.  Consumes the matrix.
pub fn eigvalsh_real(mut a: Array2<f64>) -> Result<Vec<f64>> {
    let n = checked_square(&a)?;
    let mut w = vec![0.0; n];
    dsyevd_call(b'N', &mut a, &mut w)?;
    Ok(w)
}

/// Full eigendecomposition of a real symmetric matrix.  Consumes the matrix.
pub fn eigh_real(mut a: Array2<f64>) -> Result<(Vec<f64>, EigenVectors<f64>)> {
    let n = checked_square(&a)?;
    let mut w = vec![0.0; n];
    dsyevd_call(b'V', &mut a, &mut w)?;
    Ok((w, EigenVectors { rows: a }))
}

/// Eigenvalues of a complex Hermitian matrix, ascending.  Consumes the matrix.
pub fn eigvalsh_complex(mut a: Array2<Complex64>) -> Result<Vec<f64>> {
    let n = checked_square(&a)?;
    let mut w = vec![0.0; n];
    zheevd_call(b'N', &mut a, &mut w)?;
    Ok(w)
}

/// Full eigendecomposition of a complex Hermitian matrix.  Consumes the matrix.
pub fn eigh_complex(mut a: Array2<Complex64>) -> Result<(Vec<f64>, EigenVectors<Complex64>)> {
    let n = checked_square(&a)?;
    let mut w = vec![0.0; n];
    zheevd_call(b'V', &mut a, &mut w)?;
    // The buffer held conj(A); conjugate the returned vectors back.
    a.mapv_inplace(|z| z.conj());
    Ok((w, EigenVectors { rows: a }))
}

fn checked_square<T>(a: &Array2<T>) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::InvalidArgument(format!(
            "eigensolver needs a square matrix, got {r}x{c}"
        )));
    }
    if r == 0 {
        return Err(Error::InvalidArgument("empty matrix".into()));
    }
    Ok(r)
}

fn dsyevd_call(jobz: u8, a: &mut Array2<f64>, w: &mut [f64]) -> Result<()> {
    let n = w.len() as i32;
    let uplo = b'L';
    let buf = a
        .as_slice_mut()
        .ok_or_else(|| Error::Numerical("matrix buffer not contiguous".into()))?;
    let mut info = 0i32;

    // Workspace query.
    let mut wkopt = 0.0f64;
    let mut iwkopt = 0i32;
    let query = -1i32;
    unsafe {
        dsyevd_(
            &jobz,
            &uplo,
            &n,
            buf.as_mut_ptr(),
            &n,
            w.as_mut_ptr(),
            &mut wkopt,
            &query,
            &mut iwkopt,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_status("dsyevd (workspace query)", info));
    }

    let lwork = wkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        dsyevd_(
            &jobz,
            &uplo,
            &n,
            buf.as_mut_ptr(),
            &n,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_status("dsyevd", info));
    }
    Ok(())
}

fn zheevd_call(jobz: u8, a: &mut Array2<Complex64>, w: &mut [f64]) -> Result<()> {
    let n = w.len() as i32;
    let uplo = b'L';
    let buf = a
        .as_slice_mut()
        .ok_or_else(|| Error::Numerical("matrix buffer not contiguous".into()))?;
    let mut info = 0i32;

    let mut wkopt = Complex64::new(0.0, 0.0);
    let mut rwkopt = 0.0f64;
    let mut iwkopt = 0i32;
    let query = -1i32;
    unsafe {
        zheevd_(
            &jobz,
            &uplo,
            &n,
            buf.as_mut_ptr(),
            &n,
            w.as_mut_ptr(),
            &mut wkopt,
            &query,
            &mut rwkopt,
            &query,
            &mut iwkopt,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_status("zheevd (workspace query)", info));
    }

    let lwork = wkopt.re as i32;
    let lrwork = rwkopt as i32;
    let liwork = iwkopt;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0f64; lrwork.max(1) as usize];
    let mut iwork = vec![0i32; liwork.max(1) as usize];
    unsafe {
        zheevd_(
            &jobz,
            &uplo,
            &n,
            buf.as_mut_ptr(),
            &n,
            w.as_mut_ptr(),
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_status("zheevd", info));
    }
    Ok(())
}

/// Eigenvalues of a general (possibly nonsymmetric) real matrix.
/// Consumes the matrix; no eigenvectors are computed.
///
/// The row-major buffer presents the transpose to LAPACK, which has the
/// same spectrum, so no copy is needed.
pub fn eig_general_real(mut a: Array2<f64>) -> Result<Vec<Complex64>> {
    let n = checked_square(&a)?;
    let ni = n as i32;
    let buf = a
        .as_slice_mut()
        .ok_or_else(|| Error::Numerical("matrix buffer not contiguous".into()))?;
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    let jobn = b'N';
    let mut info = 0i32;
    let mut wkopt = 0.0f64;
    let query = -1i32;
    let one = 1i32;
    unsafe {
        dgeev_(
            &jobn,
            &jobn,
            &ni,
            buf.as_mut_ptr(),
            &ni,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &one,
            std::ptr::null_mut(),
            &one,
            &mut wkopt,
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_status("dgeev (workspace query)", info));
    }
    let lwork = wkopt as i32;
    let mut work = vec![0.0f64; lwork.max(1) as usize];
    unsafe {
        dgeev_(
            &jobn,
            &jobn,
            &ni,
            buf.as_mut_ptr(),
            &ni,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &one,
            std::ptr::null_mut(),
            &one,
            work.as_mut_ptr(),
            &lwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(lapack_status("dgeev", info));
    }
    Ok(wr
        .into_iter()
        .zip(wi)
        .map(|(re, im)| Complex64::new(re, im))
        .collect())
}

/// Entrywise matrix exponential `exp(-t H)` of a real symmetric `H`,
/// computed from the full eigendecomposition.
pub fn expm_neg_real(h: Array2<f64>, t: f64) -> Result<Array2<f64>> {
    let n = h.nrows();
    let (w, vecs) = eigh_real(h)?;
    // exp(-tH)[i][j] = sum_k exp(-t w_k) v_k[i] v_k[j]  with v_k = row k.
    let mut scaled = vecs.rows.clone();
    for (k, row) in scaled.outer_iter_mut().enumerate() {
        let f = (-t * w[k]).exp();
        for x in row {
            *x *= f;
        }
    }
    let mut out = Array2::<f64>::zeros((n, n));
    ndarray::linalg::general_mat_mul(1.0, &vecs.rows.t(), &scaled, 0.0, &mut out);
    Ok(out)
}

/// Entrywise matrix exponential `exp(-t H)` of a complex Hermitian `H`.
pub fn expm_neg_complex(h: Array2<Complex64>, t: f64) -> Result<Array2<Complex64>> {
    let n = h.nrows();
    let (w, vecs) = eigh_complex(h)?;
    let mut out = Array2::<Complex64>::zeros((n, n));
    for k in 0..w.len() {
        let f = (-t * w[k]).exp();
        let v = vecs.vector(k);
        for i in 0..n {
            let vi = v[i] * f;
            for j in 0..n {
                out[[i, j]] += vi * v[j].conj();
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn real_two_by_two() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = array![[2.0, 1.0], [1.0, 2.0]];
        let w = eigvalsh_real(a).unwrap();
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn real_vectors_orthonormal_and_consistent() {
        let a = array![[2.0, 1.0, 0.0], [1.0, 0.0, -1.0], [0.0, -1.0, 1.0]];
        let (w, vecs) = eigh_real(a.clone()).unwrap();
        for k in 0..3 {
            let v = vecs.vector(k);
            // residual ||A v - w v||
            for i in 0..3 {
                let mut av = 0.0;
                for j in 0..3 {
                    av += a[[i, j]] * v[j];
                }
                assert_abs_diff_eq!(av, w[k] * v[i], epsilon = 1e-10);
            }
            let norm: f64 = v.iter().map(|x| x * x).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn complex_hermitian_pauli_like() {
        // [[0, -i],[i, 0]] has eigenvalues -1 and 1.
        let i = Complex64::new(0.0, 1.0);
        let a = array![
            [Complex64::new(0.0, 0.0), -i],
            [i, Complex64::new(0.0, 0.0)]
        ];
        let (w, vecs) = eigh_complex(a.clone()).unwrap();
        assert_abs_diff_eq!(w[0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0, epsilon = 1e-12);
        for k in 0..2 {
            let v = vecs.vector(k);
            for r in 0..2 {
                let av = a[[r, 0]] * v[0] + a[[r, 1]] * v[1];
                let diff = av - v[r] * w[k];
                assert!(diff.norm() < 1e-10, "eigenpair residual {}", diff.norm());
            }
        }
    }

    #[test]
    fn real_and_complex_paths_agree() {
        let a = array![[1.0, 0.5, 0.0], [0.5, -1.0, 0.25], [0.0, 0.25, 0.5]];
        let ac = a.mapv(|x| Complex64::new(x, 0.0));
        let wr = eigvalsh_real(a).unwrap();
        let wc = eigvalsh_complex(ac).unwrap();
        for (r, c) in wr.iter().zip(&wc) {
            assert_abs_diff_eq!(r, c, epsilon = 1e-12);
        }
    }

    #[test]
    fn general_real_eigenvalues() {
        // [[0, 1], [-2, 3]] has eigenvalues 1 and 2.
        let a = array![[0.0, 1.0], [-2.0, 3.0]];
        let mut evs = eig_general_real(a).unwrap();
        evs.sort_by(|x, y| x.re.total_cmp(&y.re));
        assert_abs_diff_eq!(evs[0].re, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(evs[1].re, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(evs[0].im, 0.0, epsilon = 1e-12);
        // rotation-like matrix has a complex pair
        let r = array![[0.0, -1.0], [1.0, 0.0]];
        let evs = eig_general_real(r).unwrap();
        assert!(evs.iter().any(|z| z.im > 0.5));
    }

    #[test]
    fn expm_of_zero_is_identity() {
        let h = Array2::<f64>::zeros((4, 4));
        let e = expm_neg_real(h, 1.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(e[[i, j]], expect, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn expm_matches_scalar_case() {
        let h = array![[3.0, 0.0], [0.0, -2.0]];
        let e = expm_neg_real(h, 0.5).unwrap();
        assert_abs_diff_eq!(e[[0, 0]], (-1.5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[[1, 1]], (1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(e[[0, 1]], 0.0, epsilon = 1e-13);
    }
}
