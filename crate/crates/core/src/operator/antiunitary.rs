use ndarray::{Array2, ArrayView2};

use super::{dagger, distance_to_identity, linalg, mm, unitarity_residual, CMat, Tolerances, C64, ONE};
use crate::error::{Error, Result};

/// Antiunitary `v ↦ T · conj(v)`, stored by its unitary part `T`.
///
/// Conjugation is taken in the standard coordinate basis. Under a change of
/// basis with orthonormal columns `B` the unitary part transforms as
/// `T ↦ B† T conj(B)`.
#[derive(Debug, Clone)]
pub struct AntiUnitary {
    unitary_part: CMat,
    parity: i8,
    /// `(column, value)` of the single nonzero per row, when `T` is monomial.
    monomial: Option<Vec<(usize, C64)>>,
}

fn monomial_rows(t: &CMat) -> Option<Vec<(usize, C64)>> {
    let mut out = Vec::with_capacity(t.nrows());
    for row in t.rows() {
        let mut hit = None;
        for (j, z) in row.iter().enumerate() {
            if *z != C64::new(0.0, 0.0) {
                if hit.is_some() {
                    return None;
                }
                hit = Some((j, *z));
            }
        }
        out.push(hit?);
    }
    Some(out)
}

impl AntiUnitary {
    pub fn new(unitary_part: CMat) -> Result<Self> {
        Self::with_tolerances(unitary_part, &Tolerances::default())
    }

    /// Verifies unitarity and that `T conj(T) = ±1`.
    pub fn with_tolerances(unitary_part: CMat, tol: &Tolerances) -> Result<Self> {
        let (r, c) = unitary_part.dim();
        if r != c {
            return Err(Error::Dimension(format!("antiunitary part is {r}x{c}")));
        }
        let res = unitarity_residual(&unitary_part);
        if res > tol.unitary {
            return Err(Error::Invariant {
                what: "unitarity of antiunitary part",
                residual: res,
                tol: tol.unitary,
            });
        }
        let square = mm(&unitary_part, &unitary_part.mapv(|z| z.conj()));
        let plus = distance_to_identity(&square.view());
        let minus = distance_to_identity(&square.mapv(|z| -z).view());
        let parity = if plus <= tol.parity {
            1
        } else if minus <= tol.parity {
            -1
        } else {
            return Err(Error::Invariant {
                what: "antiunitary square is ±1",
                residual: plus.min(minus),
                tol: tol.parity,
            });
        };
        let monomial = monomial_rows(&unitary_part);
        Ok(Self {
            unitary_part,
            parity,
            monomial,
        })
    }

    /// Plain complex conjugation `K` on `C^n`.
    pub fn conjugation(n: usize) -> Self {
        let unitary_part = Array2::eye(n);
        let monomial = monomial_rows(&unitary_part);
        Self {
            unitary_part,
            parity: 1,
            monomial,
        }
    }

    /// `⊕ [[0, −1], [1, 0]] K` over `pairs` Kramers pairs.
    pub fn standard_odd(pairs: usize) -> Self {
        let n = 2 * pairs;
        let mut t = Array2::zeros((n, n));
        for k in 0..pairs {
            t[[2 * k, 2 * k + 1]] = -ONE;
            t[[2 * k + 1, 2 * k]] = ONE;
        }
        let monomial = monomial_rows(&t);
        Self {
            unitary_part: t,
            parity: -1,
            monomial,
        }
    }

    pub fn dim(&self) -> usize {
        self.unitary_part.nrows()
    }

    pub fn unitary_part(&self) -> &CMat {
        &self.unitary_part
    }

    /// +1 or −1.
    pub fn parity(&self) -> i8 {
        self.parity
    }

    pub fn is_odd(&self) -> bool {
        self.parity < 0
    }

    /// Applies the antiunitary to each column of `v`.
    pub fn apply(&self, v: &ArrayView2<C64>) -> CMat {
        if let Some(rows) = &self.monomial {
            let mut out = Array2::zeros(v.raw_dim());
            for (i, &(j, t)) in rows.iter().enumerate() {
                out.row_mut(i).zip_mut_with(&v.row(j), |o, z| *o = t * z.conj());
            }
            return out;
        }
        linalg::mm(&self.unitary_part.view(), &v.mapv(|z| z.conj()).view())
    }

    pub fn apply_vec(&self, v: &ndarray::ArrayView1<C64>) -> ndarray::Array1<C64> {
        self.unitary_part.dot(&v.mapv(|z| z.conj()))
    }

    /// `θ M θ* = T conj(M) T†`.
    pub fn conjugate(&self, m: &CMat) -> Result<CMat> {
        conjugate_by_antiunitary(self, m)
    }

    /// `U θ` for a unitary `U`, with unitary part `U T`.
    pub fn left_multiply(&self, u: &CMat) -> Result<Self> {
        if u.dim() != self.unitary_part.dim() {
            return Err(Error::Dimension("unitary and antiunitary sizes differ".into()));
        }
        Self::new(mm(u, &self.unitary_part))
    }

    /// Representation in the basis of orthonormal columns `b` of an invariant
    /// subspace: `b† T conj(b)`.
    pub fn restrict(&self, b: &ArrayView2<C64>) -> Result<Self> {
        if b.nrows() != self.dim() {
            return Err(Error::Dimension("basis rows differ from antiunitary size".into()));
        }
        let t = linalg::mm_hn(b, &self.apply(b).view());
        Self::new(t)
    }

    /// The product `self ∘ other`, a linear unitary `T₁ conj(T₂)`.
    pub fn compose(&self, other: &AntiUnitary) -> CMat {
        mm(&self.unitary_part, &other.unitary_part.mapv(|z| z.conj()))
    }
}

/// `θ M θ*` where θ acts as `T · conj(·)`.
pub fn conjugate_by_antiunitary(theta: &AntiUnitary, m: &CMat) -> Result<CMat> {
    if m.dim() != theta.unitary_part.dim() {
        return Err(Error::Dimension(format!(
            "antiunitary of size {} applied to {:?} matrix",
            theta.dim(),
            m.dim()
        )));
    }
    if let Some(rows) = &theta.monomial {
        let n = rows.len();
        return Ok(Array2::from_shape_fn((n, n), |(i, j)| {
            let (pi, ti) = rows[i];
            let (pj, tj) = rows[j];
            ti * m[[pi, pj]].conj() * tj.conj()
        }));
    }
    let t = &theta.unitary_part;
    let left = linalg::mm(&t.view(), &m.mapv(|z| z.conj()).view());
    Ok(linalg::mm_nh(&left.view(), &t.view()))
}

/// `‖θ M θ* − target‖` (Frobenius).
pub fn covariance_residual(theta: &AntiUnitary, m: &CMat, target: &CMat) -> Result<f64> {
    let conj = conjugate_by_antiunitary(theta, m)?;
    Ok(super::distance(&conj.view(), &target.view()))
}

/// `‖θ M θ* − M†‖`, the residual of `θMθ* = M*` used for unitaries.
pub fn reversal_residual(theta: &AntiUnitary, m: &CMat) -> Result<f64> {
    covariance_residual(theta, m, &dagger(&m.view()))
}
