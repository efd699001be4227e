//! Dense complex operators: Hermitian, unitary and projection matrices,
//! antiunitaries, spectral decompositions and the functional calculus built
//! on them.

pub mod antiunitary;
pub mod calculus;
pub mod io;
pub mod kramers;
pub mod linalg;
pub mod schatten;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use antiunitary::{conjugate_by_antiunitary, AntiUnitary};
pub use calculus::{functional_calculus, unitary_part, PartialUnitary};
pub use kramers::kramers_basis;
pub use schatten::{mu_from_lambda, schatten_norm};

pub type C64 = Complex64;
pub type CMat = Array2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Numerical tolerances for the operator invariants. Residuals are measured
/// in the Frobenius norm, which bounds the operator norm from above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// relative: ‖M − M†‖ ≤ hermitian·‖M‖
    pub hermitian: f64,
    /// ‖UU† − 1‖
    pub unitary: f64,
    /// ‖P² − P‖, ‖P − P†‖
    pub projection: f64,
    /// rank versus trace
    pub rank: f64,
    /// relative: ‖XX† − X†X‖ ≤ normal·‖X‖²
    pub normal: f64,
    /// ‖T·conj(T) ∓ 1‖
    pub parity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            hermitian: 1e-12,
            unitary: 1e-10,
            projection: 1e-9,
            rank: 1e-8,
            normal: 1e-9,
            parity: 1e-10,
        }
    }
}

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    Array2::eye(n)
}

pub fn dagger(m: &ArrayView2<C64>) -> CMat {
    m.t().mapv(|z| z.conj())
}

pub fn fro_norm(m: &ArrayView2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Frobenius distance ‖a − b‖.
pub fn distance(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Frobenius norm of `m − 1`.
pub fn distance_to_identity(m: &ArrayView2<C64>) -> f64 {
    m.indexed_iter()
        .map(|((i, j), z)| {
            if i == j {
                (z - ONE).norm_sqr()
            } else {
                z.norm_sqr()
            }
        })
        .sum::<f64>()
        .sqrt()
}

pub fn mm(a: &CMat, b: &CMat) -> CMat {
    linalg::mm(&a.view(), &b.view())
}

/// `[a, b] = ab − ba`
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    mm(a, b) - mm(b, a)
}

/// `u · m · u†`
pub fn conjugate(u: &CMat, m: &CMat) -> CMat {
    linalg::mm_nh(&mm(u, m).view(), &u.view())
}

/// Projector `K K†` onto the span of orthonormal columns.
pub fn column_projector(cols: &ArrayView2<C64>) -> CMat {
    linalg::mm_nh(cols, cols)
}

/// Operator norm of a matrix from its largest singular value.
pub fn op_norm(m: &ArrayView2<C64>) -> Result<f64> {
    let (s, _) = linalg::svd(m, false)?;
    Ok(s.first().copied().unwrap_or(0.0))
}

fn square(m: &CMat, what: &str) -> Result<usize> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::Dimension(format!("{what} must be square, got {r}x{c}")));
    }
    Ok(r)
}

/// Dense self-adjoint matrix.
#[derive(Debug, Clone)]
pub struct HermitianOperator {
    matrix: CMat,
    label: String,
}

impl HermitianOperator {
    pub fn new(matrix: CMat, label: impl Into<String>) -> Result<Self> {
        Self::with_tolerance(matrix, label, Tolerances::default().hermitian)
    }

    /// Checks ‖M − M†‖ ≤ tol·‖M‖ and stores the exactly Hermitian part.
    pub fn with_tolerance(matrix: CMat, label: impl Into<String>, tol: f64) -> Result<Self> {
        square(&matrix, "Hermitian operator")?;
        let adj = dagger(&matrix.view());
        let residual = distance(&matrix.view(), &adj.view());
        let scale = fro_norm(&matrix.view());
        if residual > tol * scale.max(f64::MIN_POSITIVE) && residual > 0.0 {
            return Err(Error::Invariant {
                what: "self-adjointness",
                residual,
                tol: tol * scale,
            });
        }
        let matrix = (&matrix + &adj).mapv(|z| z * 0.5);
        Ok(Self {
            matrix,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn spectral_decomposition(&self) -> Result<SpectralDecomposition> {
        let (w, v) = linalg::eigh(&self.matrix.view(), true)?;
        Ok(SpectralDecomposition {
            eigenvalues: w,
            eigenvectors: v.expect("vectors requested"),
        })
    }

    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        Ok(linalg::eigh(&self.matrix.view(), false)?.0)
    }
}

/// Dense unitary matrix.
#[derive(Debug, Clone)]
pub struct UnitaryOperator {
    matrix: CMat,
}

impl UnitaryOperator {
    pub fn new(matrix: CMat) -> Result<Self> {
        Self::with_tolerance(matrix, Tolerances::default().unitary)
    }

    pub fn with_tolerance(matrix: CMat, tol: f64) -> Result<Self> {
        square(&matrix, "unitary")?;
        let residual = unitarity_residual(&matrix);
        if residual > tol {
            return Err(Error::Invariant {
                what: "unitarity",
                residual,
                tol,
            });
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: identity(n) }
    }

    /// For matrices whose unitarity was certified by other means.
    pub(crate) fn from_certified(matrix: CMat) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn adjoint(&self) -> Self {
        Self {
            matrix: dagger(&self.matrix.view()),
        }
    }
}

/// ‖UU† − 1‖ in the Frobenius norm.
pub fn unitarity_residual(u: &CMat) -> f64 {
    distance_to_identity(&linalg::mm_nh(&u.view(), &u.view()).view())
}

/// Orthogonal projection with its rank.
#[derive(Debug, Clone)]
pub struct ProjectionOperator {
    matrix: CMat,
    rank: usize,
}

impl ProjectionOperator {
    pub fn new(matrix: CMat) -> Result<Self> {
        Self::with_tolerances(matrix, &Tolerances::default())
    }

    pub fn with_tolerances(matrix: CMat, tol: &Tolerances) -> Result<Self> {
        square(&matrix, "projection")?;
        let adj = dagger(&matrix.view());
        let herm = distance(&matrix.view(), &adj.view());
        if herm > tol.projection {
            return Err(Error::Invariant {
                what: "projection self-adjointness",
                residual: herm,
                tol: tol.projection,
            });
        }
        let sq = mm(&matrix, &matrix);
        let idem = distance(&sq.view(), &matrix.view());
        if idem > tol.projection {
            return Err(Error::Invariant {
                what: "projection idempotence",
                residual: idem,
                tol: tol.projection,
            });
        }
        let trace: f64 = matrix.diag().iter().map(|z| z.re).sum();
        let rank = trace.round();
        if (trace - rank).abs() > tol.rank {
            return Err(Error::Invariant {
                what: "projection rank",
                residual: (trace - rank).abs(),
                tol: tol.rank,
            });
        }
        let matrix = (&matrix + &adj).mapv(|z| z * 0.5);
        Ok(Self {
            matrix,
            rank: rank as usize,
        })
    }

    /// Projector onto the span of orthonormal columns; exact by construction.
    pub fn from_columns(cols: &ArrayView2<C64>) -> Self {
        Self {
            matrix: column_projector(cols),
            rank: cols.ncols(),
        }
    }

    /// Diagonal 0/1 projection.
    pub fn from_mask(mask: &[bool]) -> Self {
        let n = mask.len();
        let mut matrix = Array2::zeros((n, n));
        let mut rank = 0;
        for (i, &on) in mask.iter().enumerate() {
            if on {
                matrix[[i, i]] = ONE;
                rank += 1;
            }
        }
        Self { matrix, rank }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn complement(&self) -> Self {
        Self {
            matrix: identity(self.dim()) - &self.matrix,
            rank: self.dim() - self.rank,
        }
    }
}

/// Eigenvalues sorted ascending with orthonormal eigenvector columns.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    pub eigenvalues: Array1<f64>,
    pub eigenvectors: CMat,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V f(Λ) V†`; errors if `f` is not finite on some eigenvalue.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> Result<CMat> {
        let mut scaled = self.eigenvectors.clone();
        for (j, mut col) in scaled.axis_iter_mut(Axis(1)).enumerate() {
            let lam = self.eigenvalues[j];
            let fv = f(lam);
            if !fv.re.is_finite() || !fv.im.is_finite() {
                return Err(Error::Undefined(lam));
            }
            col.mapv_inplace(|z| z * fv);
        }
        Ok(linalg::mm_nh(&scaled.view(), &self.eigenvectors.view()))
    }

    /// Eigenvector columns selected by index.
    pub fn columns(&self, idx: &[usize]) -> CMat {
        self.eigenvectors.select(Axis(1), idx)
    }

    /// ‖M − VΛV†‖ (Frobenius).
    pub fn reconstruction_error(&self, m: &CMat) -> Result<f64> {
        let recon = self.apply(|x| c(x, 0.0))?;
        Ok(distance(&recon.view(), &m.view()))
    }
}

/// Indices `i` with `|values[i] − target| < tol`, ascending.
pub fn eigen_cluster(values: &[f64], target: f64, tol: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, v)| (*v - target).abs() < tol)
        .map(|(i, _)| i)
        .collect()
}

/// Splits ascending eigenvalues into runs whose consecutive gaps are below `gap`.
pub fn group_clusters(values: &[f64], gap: f64) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match out.last_mut() {
            Some(run) if (v - values[*run.last().unwrap()]).abs() < gap => run.push(i),
            _ => out.push(vec![i]),
        }
    }
    out
}

/// Orthonormalizes columns (modified Gram-Schmidt, two passes), dropping
/// columns whose residual norm falls below `drop_tol`.
pub fn orthonormalize(cols: &CMat, drop_tol: f64) -> CMat {
    let n = cols.nrows();
    let mut kept: Vec<Array1<C64>> = Vec::new();
    for col in cols.axis_iter(Axis(1)) {
        let mut v = col.to_owned();
        for _ in 0..2 {
            for q in &kept {
                let proj: C64 = q.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
                v.zip_mut_with(q, |x, y| *x -= proj * y);
            }
        }
        let nrm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if nrm > drop_tol {
            v.mapv_inplace(|z| z / nrm);
            kept.push(v);
        }
    }
    let mut out = Array2::zeros((n, kept.len()));
    for (j, q) in kept.iter().enumerate() {
        out.column_mut(j).assign(q);
    }
    out
}

/// Largest principal-angle sine between two subspaces given by orthonormal
/// columns: ‖(1 − Π_b) a‖ (Frobenius), zero when span(a) ⊂ span(b).
pub fn subspace_leakage(a: &ArrayView2<C64>, b: &ArrayView2<C64>) -> f64 {
    let overlap = linalg::mm_hn(b, a);
    let back = linalg::mm(b, &overlap.view());
    distance(a, &back.view())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn hermitian_rejects_asymmetric() {
        let m = array![[ONE, ONE], [ZERO, ONE]];
        assert!(HermitianOperator::new(m, "bad").is_err());
    }

    #[test]
    fn projection_rank_from_trace() {
        let p = ProjectionOperator::new(Array2::from_diag(&ndarray::arr1(&[ONE, ZERO, ONE]))).unwrap();
        assert_eq!(p.rank(), 2);
        assert_eq!(p.complement().rank(), 1);
    }

    #[test]
    fn projection_rejects_non_idempotent() {
        let m = Array2::from_diag(&ndarray::arr1(&[c(0.5, 0.0), ONE]));
        assert!(ProjectionOperator::new(m).is_err());
    }

    #[test]
    fn unitary_rejects_scaled() {
        assert!(UnitaryOperator::new(identity(3) * c(1.1, 0.0)).is_err());
    }

    #[test]
    fn eigen_cluster_examples() {
        assert_eq!(eigen_cluster(&[0.999999, -1.0, 0.0], 1.0, 1e-3), vec![0]);
        assert_eq!(eigen_cluster(&[1.0, 1.0], 1.0, 1e-8), vec![0, 1]);
        assert!(eigen_cluster(&[], 1.0, 1e-3).is_empty());
    }

    #[test]
    fn grouping_splits_on_gaps() {
        let g = group_clusters(&[-1.0, -1.0 + 1e-12, 0.0, 0.5, 0.5], 1e-8);
        assert_eq!(g, vec![vec![0, 1], vec![2], vec![3, 4]]);
    }

    #[test]
    fn orthonormalize_drops_dependent_columns() {
        let m = array![[ONE, ONE, ZERO], [ZERO, ZERO, ONE]];
        let q = orthonormalize(&m, 1e-10);
        assert_eq!(q.ncols(), 2);
    }
}
