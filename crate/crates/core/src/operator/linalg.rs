//! Thin wrappers over the system LAPACK/BLAS (OpenBLAS).
//!
//! All routines take and return matrices in standard (row-major) layout. The
//! LAPACK drivers get a column-major copy, which keeps the conjugation
//! bookkeeping out of the callers.

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use num_complex::Complex64;
use std::os::raw::c_char;

use crate::error::{Error, Result};

extern crate openblas_src as _;

type C64 = Complex64;

fn to_fortran(a: &ArrayView2<C64>) -> Array2<C64> {
    let mut f = Array2::<C64>::zeros(a.raw_dim().f());
    f.assign(a);
    f
}

fn to_standard(a: Array2<C64>) -> Array2<C64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

/// Eigenvalues (ascending) and, optionally, orthonormal eigenvectors of a
/// Hermitian matrix. Uses the divide-and-conquer driver `zheevd`.
pub fn eigh(a: &ArrayView2<C64>, vectors: bool) -> Result<(Array1<f64>, Option<Array2<C64>>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("eigh on {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), vectors.then(|| Array2::zeros((0, 0)))));
    }
    let mut f = to_fortran(a);
    let mut w = vec![0.0f64; n];
    let jobz = if vectors { b'V' } else { b'N' } as c_char;
    let uplo = b'L' as c_char;
    let ni = n as i32;
    let mut info = 0i32;

    let mut work_q = [C64::new(0.0, 0.0)];
    let mut rwork_q = [0.0f64];
    let mut iwork_q = [0i32];
    let query = -1i32;
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &ni,
            f.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr(),
            work_q.as_mut_ptr() as *mut _,
            &query,
            rwork_q.as_mut_ptr(),
            &query,
            iwork_q.as_mut_ptr(),
            &query,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigensolver(format!("zheevd workspace query info={info}")));
    }
    let lwork = (work_q[0].re as i32).max(1);
    let lrwork = (rwork_q[0] as i32).max(1);
    let liwork = iwork_q[0].max(1);
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    unsafe {
        lapack_sys::zheevd_(
            &jobz,
            &uplo,
            &ni,
            f.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigensolver(format!("zheevd info={info}")));
    }
    let vecs = vectors.then(|| to_standard(f));
    Ok((Array1::from(w), vecs))
}

/// Eigenpairs of a Hermitian matrix with eigenvalues in `(vl, vu]`, ascending,
/// via `zheevr`. Eigenvectors are the columns of the returned `n × m` block.
pub fn eigh_window(a: &ArrayView2<C64>, vl: f64, vu: f64) -> Result<(Array1<f64>, Array2<C64>)> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("eigh_window on {}x{} matrix", n, a.ncols())));
    }
    if !(vl < vu) {
        return Err(Error::InvalidArgument(format!("empty window ({vl}, {vu}]")));
    }
    if n == 0 {
        return Ok((Array1::zeros(0), Array2::zeros((0, 0))));
    }
    let mut f = to_fortran(a);
    let ni = n as i32;
    let (jobz, range, uplo) = (b'V' as c_char, b'V' as c_char, b'L' as c_char);
    let (il, iu, abstol) = (1i32, ni, 0.0f64);
    let mut m = 0i32;
    let mut w = vec![0.0f64; n];
    let mut z = Array2::<C64>::zeros((n, n).f());
    let mut isuppz = vec![0i32; 2 * n];
    let mut info = 0i32;
    let mut call = |work: &mut [C64], lwork: i32, rwork: &mut [f64], lrwork: i32, iwork: &mut [i32], liwork: i32| unsafe {
        lapack_sys::zheevr_(
            &jobz,
            &range,
            &uplo,
            &ni,
            f.as_mut_ptr() as *mut _,
            &ni,
            &vl,
            &vu,
            &il,
            &iu,
            &abstol,
            &mut m,
            w.as_mut_ptr(),
            z.as_mut_ptr() as *mut _,
            &ni,
            isuppz.as_mut_ptr(),
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &lrwork,
            iwork.as_mut_ptr(),
            &liwork,
            &mut info,
        );
        info
    };
    let mut work_q = [C64::new(0.0, 0.0)];
    let mut rwork_q = [0.0f64];
    let mut iwork_q = [0i32];
    if call(&mut work_q, -1, &mut rwork_q, -1, &mut iwork_q, -1) != 0 {
        return Err(Error::Eigensolver("zheevr workspace query failed".into()));
    }
    let lwork = (work_q[0].re as i32).max(2 * ni);
    let lrwork = (rwork_q[0] as i32).max(24 * ni);
    let liwork = iwork_q[0].max(10 * ni);
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    let mut rwork = vec![0.0f64; lrwork as usize];
    let mut iwork = vec![0i32; liwork as usize];
    let code = call(&mut work, lwork, &mut rwork, lrwork, &mut iwork, liwork);
    if code != 0 {
        return Err(Error::Eigensolver(format!("zheevr info={code}")));
    }
    let m = m as usize;
    let vecs = z.slice(ndarray::s![.., ..m]).as_standard_layout().into_owned();
    Ok((Array1::from(w[..m].to_vec()), vecs))
}

/// Singular value decomposition `a = u diag(s) vh` via `zgesdd`.
///
/// Singular values are returned in descending order. With `vectors` set, the
/// full square `u` and `vh` are returned.
pub fn svd(
    a: &ArrayView2<C64>,
    vectors: bool,
) -> Result<(Array1<f64>, Option<(Array2<C64>, Array2<C64>)>)> {
    let (m, n) = a.dim();
    let k = m.min(n);
    if k == 0 {
        let vecs = vectors.then(|| (Array2::eye(m), Array2::eye(n)));
        return Ok((Array1::zeros(0), vecs));
    }
    let mut f = to_fortran(a);
    let mut s = vec![0.0f64; k];
    let jobz = if vectors { b'A' } else { b'N' } as c_char;
    let (mi, ni) = (m as i32, n as i32);
    let (ldu, ldvt) = if vectors { (mi, ni) } else { (1, 1) };
    let mut u = if vectors {
        Array2::<C64>::zeros((m, m).f())
    } else {
        Array2::<C64>::zeros((1, 1).f())
    };
    let mut vt = if vectors {
        Array2::<C64>::zeros((n, n).f())
    } else {
        Array2::<C64>::zeros((1, 1).f())
    };
    let mx = m.max(n);
    let lrwork = if vectors {
        (5 * k * k + 5 * k).max(2 * mx * k + 2 * k * k + k)
    } else {
        7 * k
    };
    let mut rwork = vec![0.0f64; lrwork.max(1)];
    let mut iwork = vec![0i32; 8 * k];
    let mut info = 0i32;
    let mut work_q = [C64::new(0.0, 0.0)];
    let query = -1i32;
    unsafe {
        lapack_sys::zgesdd_(
            &jobz,
            &mi,
            &ni,
            f.as_mut_ptr() as *mut _,
            &mi,
            s.as_mut_ptr(),
            u.as_mut_ptr() as *mut _,
            &ldu,
            vt.as_mut_ptr() as *mut _,
            &ldvt,
            work_q.as_mut_ptr() as *mut _,
            &query,
            rwork.as_mut_ptr(),
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigensolver(format!("zgesdd workspace query info={info}")));
    }
    let lwork = (work_q[0].re as i32).max(1);
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    unsafe {
        lapack_sys::zgesdd_(
            &jobz,
            &mi,
            &ni,
            f.as_mut_ptr() as *mut _,
            &mi,
            s.as_mut_ptr(),
            u.as_mut_ptr() as *mut _,
            &ldu,
            vt.as_mut_ptr() as *mut _,
            &ldvt,
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigensolver(format!("zgesdd info={info}")));
    }
    let vecs = vectors.then(|| (to_standard(u), to_standard(vt)));
    Ok((Array1::from(s), vecs))
}

/// Eigenvalues of a general complex matrix (`zgeev`, no vectors).
pub fn eigvals_general(a: &ArrayView2<C64>) -> Result<Array1<C64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Dimension(format!("eig on {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok(Array1::zeros(0));
    }
    let mut f = to_fortran(a);
    let mut w = vec![C64::new(0.0, 0.0); n];
    let job = b'N' as c_char;
    let ni = n as i32;
    let one = 1i32;
    let mut dummy = [C64::new(0.0, 0.0)];
    let mut rwork = vec![0.0f64; 2 * n];
    let mut info = 0i32;
    let mut work_q = [C64::new(0.0, 0.0)];
    let query = -1i32;
    unsafe {
        lapack_sys::zgeev_(
            &job,
            &job,
            &ni,
            f.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr() as *mut _,
            dummy.as_mut_ptr() as *mut _,
            &one,
            dummy.as_mut_ptr() as *mut _,
            &one,
            work_q.as_mut_ptr() as *mut _,
            &query,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigensolver(format!("zgeev workspace query info={info}")));
    }
    let lwork = (work_q[0].re as i32).max(1);
    let mut work = vec![C64::new(0.0, 0.0); lwork as usize];
    unsafe {
        lapack_sys::zgeev_(
            &job,
            &job,
            &ni,
            f.as_mut_ptr() as *mut _,
            &ni,
            w.as_mut_ptr() as *mut _,
            dummy.as_mut_ptr() as *mut _,
            &one,
            dummy.as_mut_ptr() as *mut _,
            &one,
            work.as_mut_ptr() as *mut _,
            &lwork,
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Eigensolver(format!("zgeev info={info}")));
    }
    Ok(Array1::from(w))
}

/// Which form of an operand enters a product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    /// `a`
    N,
    /// `a†`
    H,
}

/// General product `op(a) · op(b)` through `zgemm`.
pub fn gemm(a: &ArrayView2<C64>, op_a: Op, b: &ArrayView2<C64>, op_b: Op) -> Array2<C64> {
    use cblas_sys::{CBLAS_LAYOUT, CBLAS_TRANSPOSE};

    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let (m, ka) = match op_a {
        Op::N => a.dim(),
        Op::H => (a.ncols(), a.nrows()),
    };
    let (kb, n) = match op_b {
        Op::N => b.dim(),
        Op::H => (b.ncols(), b.nrows()),
    };
    assert_eq!(ka, kb, "gemm inner dimension mismatch");
    let mut c = Array2::<C64>::zeros((m, n));
    if m == 0 || n == 0 || ka == 0 {
        return c;
    }
    let trans = |op: Op| match op {
        Op::N => CBLAS_TRANSPOSE::CblasNoTrans,
        Op::H => CBLAS_TRANSPOSE::CblasConjTrans,
    };
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    unsafe {
        cblas_sys::cblas_zgemm(
            CBLAS_LAYOUT::CblasRowMajor,
            trans(op_a),
            trans(op_b),
            m as i32,
            n as i32,
            ka as i32,
            &one as *const C64 as *const _,
            a.as_ptr() as *const _,
            a.ncols().max(1) as i32,
            b.as_ptr() as *const _,
            b.ncols().max(1) as i32,
            &zero as *const C64 as *const _,
            c.as_mut_ptr() as *mut _,
            n as i32,
        );
    }
    c
}

/// `a · b`
pub fn mm(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    gemm(a, Op::N, b, Op::N)
}

/// `a† · b`
pub fn mm_hn(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    gemm(a, Op::H, b, Op::N)
}

/// `a · b†`
pub fn mm_nh(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> Array2<C64> {
    gemm(a, Op::N, b, Op::H)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigh_small_hermitian() {
        let a = array![[c(2.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(2.0, 0.0)]];
        let (w, v) = eigh(&a.view(), true).unwrap();
        assert!((w[0] - 1.0).abs() < 1e-14);
        assert!((w[1] - 3.0).abs() < 1e-14);
        let v = v.unwrap();
        let recon = mm(&mm(&v.view(), &Array2::from_diag(&w.mapv(|x| c(x, 0.0))).view()).view(), &v.t().mapv(|z| z.conj()).view());
        for (x, y) in recon.iter().zip(a.iter()) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn window_matches_full_spectrum() {
        let n = 12;
        let mut a = Array2::<C64>::zeros((n, n));
        for i in 0..n {
            for j in 0..=i {
                let z = c(((i * 7 + j * 3) % 5) as f64 - 2.0, if i == j { 0.0 } else { ((i + 2 * j) % 3) as f64 - 1.0 });
                a[[i, j]] = z;
                a[[j, i]] = z.conj();
            }
        }
        let (w, _) = eigh(&a.view(), false).unwrap();
        let (ww, v) = eigh_window(&a.view(), -1.0, 2.0).unwrap();
        let inside: Vec<f64> = w.iter().copied().filter(|&x| x > -1.0 && x <= 2.0).collect();
        assert_eq!(ww.len(), inside.len());
        for (x, y) in ww.iter().zip(&inside) {
            assert!((x - y).abs() < 1e-12);
        }
        let av = mm(&a.view(), &v.view());
        for (j, &l) in ww.iter().enumerate() {
            for i in 0..n {
                assert!((av[[i, j]] - v[[i, j]] * l).norm() < 1e-11);
            }
        }
        assert!(eigh_window(&a.view(), 1.0, 1.0).is_err());
    }

    #[test]
    fn svd_diag() {
        let a = array![[c(3.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 4.0)]];
        let (s, _) = svd(&a.view(), false).unwrap();
        assert!((s[0] - 4.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gemm_conjugate_transposes() {
        let a = array![[c(1.0, 1.0), c(2.0, 0.0)], [c(0.0, -1.0), c(1.0, 0.0)]];
        let b = array![[c(0.0, 1.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let ah = a.t().mapv(|z| z.conj());
        let bh = b.t().mapv(|z| z.conj());
        let naive = |x: &Array2<C64>, y: &Array2<C64>| {
            let mut r = Array2::<C64>::zeros((2, 2));
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        r[[i, j]] += x[[i, k]] * y[[k, j]];
                    }
                }
            }
            r
        };
        let checks = [
            (mm(&a.view(), &b.view()), naive(&a, &b)),
            (mm_hn(&a.view(), &b.view()), naive(&ah, &b)),
            (mm_nh(&a.view(), &b.view()), naive(&a, &bh)),
        ];
        for (got, want) in checks.iter() {
            for (x, y) in got.iter().zip(want.iter()) {
                assert!((x - y).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn general_eigenvalues_of_rotation() {
        let a = array![[c(0.0, 0.0), c(-1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]];
        let mut w: Vec<f64> = eigvals_general(&a.view()).unwrap().iter().map(|z| z.im).collect();
        w.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((w[0] + 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }
}
