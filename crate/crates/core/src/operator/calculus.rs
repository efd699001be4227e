use ndarray::{Array2, Axis};

use super::{
    dagger, distance, fro_norm, linalg, mm, CMat, HermitianOperator, Tolerances, UnitaryOperator, C64,
};
use crate::error::{Error, Result};

/// `f(H) = V f(Λ) V†`.
pub fn functional_calculus<F: Fn(f64) -> C64>(h: &HermitianOperator, f: F) -> Result<CMat> {
    h.spectral_decomposition()?.apply(f)
}

/// Unitary part `(X†X)^{-1/2} X` of a normal matrix on the orthogonal
/// complement of its kernel.
#[derive(Debug, Clone)]
pub struct PartialUnitary {
    /// Orthonormal basis (columns) of `(ker X)^⊥`.
    pub support: CMat,
    /// The unitary in the coordinates of `support`.
    pub unitary: UnitaryOperator,
    /// Singular values of `X`, descending.
    pub singular_values: Vec<f64>,
}

impl PartialUnitary {
    pub fn rank(&self) -> usize {
        self.support.ncols()
    }

    /// The partial isometry on the full space, zero on `ker X`.
    pub fn embedded(&self) -> CMat {
        let left = linalg::mm(&self.support.view(), &self.unitary.matrix().view());
        linalg::mm_nh(&left.view(), &self.support.view())
    }
}

/// Phase of a normal matrix: same eigenvectors, eigenvalues pushed to modulus
/// one, kernel removed. Singular values below `kernel_tol` are treated as
/// kernel; a singular value within a factor of two of `kernel_tol` means the
/// threshold does not sit in a gap and is rejected.
pub fn unitary_part(x: &CMat, kernel_tol: f64) -> Result<PartialUnitary> {
    unitary_part_with(x, kernel_tol, &Tolerances::default())
}

pub fn unitary_part_with(x: &CMat, kernel_tol: f64, tol: &Tolerances) -> Result<PartialUnitary> {
    let (r, c) = x.dim();
    if r != c {
        return Err(Error::Dimension(format!("unitary_part of {r}x{c} matrix")));
    }
    let xh = dagger(&x.view());
    let xxh = mm(x, &xh);
    let xhx = mm(&xh, x);
    let scale = fro_norm(&x.view()).powi(2);
    let residual = distance(&xxh.view(), &xhx.view());
    if residual > tol.normal * scale.max(1.0) {
        return Err(Error::Invariant {
            what: "normality",
            residual,
            tol: tol.normal * scale,
        });
    }
    let gram = HermitianOperator::with_tolerance(xhx, "X†X", 1e-10)?;
    let dec = gram.spectral_decomposition()?;
    let sv: Vec<f64> = dec.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).collect();
    if let Some(&nearest) = sv
        .iter()
        .find(|&&s| s >= 0.5 * kernel_tol && s <= 2.0 * kernel_tol)
    {
        return Err(Error::NoKernelGap { kernel_tol, nearest });
    }
    let keep: Vec<usize> = (0..sv.len()).filter(|&i| sv[i] >= kernel_tol).collect();
    let support = dec.eigenvectors.select(Axis(1), &keep);
    // (X†X)^{-1/2} X restricted to the support, in support coordinates:
    // S† (X†X)^{-1/2} X S = diag(1/s) S† X S.
    let compressed = linalg::mm_hn(&support.view(), &linalg::mm(&x.view(), &support.view()).view());
    let mut u = Array2::zeros(compressed.raw_dim());
    for (i, row) in compressed.axis_iter(Axis(0)).enumerate() {
        let s = sv[keep[i]];
        u.row_mut(i).assign(&row.mapv(|z| z / s));
    }
    let unitary = UnitaryOperator::with_tolerance(u, tol.unitary.max(1e-9))?;
    let mut singular_values = sv;
    singular_values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(PartialUnitary {
        support,
        unitary,
        singular_values,
    })
}
