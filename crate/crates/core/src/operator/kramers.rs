use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::{linalg, subspace_leakage, AntiUnitary, CMat, C64};
use crate::error::{Error, Result};

const INVARIANCE_TOL: f64 = 1e-9;

/// Orthonormal basis `(φ₁, θφ₁, φ₂, θφ₂, …)` of a θ-invariant subspace.
///
/// `v` holds orthonormal columns. Each new `φ` is the normalized complement
/// projection of the coordinate vector with the largest remaining weight,
/// ties going to the lower index, so the result is deterministic.
pub fn kramers_basis(theta: &AntiUnitary, v: &ArrayView2<C64>) -> Result<CMat> {
    if !theta.is_odd() {
        return Err(Error::InvalidArgument("kramers_basis needs an odd antiunitary".into()));
    }
    if v.nrows() != theta.dim() {
        return Err(Error::Dimension(format!(
            "subspace in C^{} but antiunitary on C^{}",
            v.nrows(),
            theta.dim()
        )));
    }
    let d = v.ncols();
    if d % 2 == 1 {
        return Err(Error::OddDimension(d));
    }
    let image = theta.apply(v);
    let leak = subspace_leakage(&image.view(), v);
    if leak > INVARIANCE_TOL {
        return Err(Error::Invariant {
            what: "θ-invariance of the subspace",
            residual: leak,
            tol: INVARIANCE_TOL,
        });
    }
    // θ in the coordinates of v; odd because v is invariant.
    let t = linalg::mm_hn(v, &image.view());
    let mut chosen: Vec<Array1<C64>> = Vec::with_capacity(d);
    while chosen.len() < d {
        let mut best: Option<(usize, f64)> = None;
        let mut residuals = Vec::with_capacity(d);
        for j in 0..d {
            let mut r = Array1::<C64>::zeros(d);
            r[j] = C64::new(1.0, 0.0);
            for _ in 0..2 {
                for q in &chosen {
                    let overlap: C64 = q.iter().zip(r.iter()).map(|(a, b)| a.conj() * b).sum();
                    r.zip_mut_with(q, |x, y| *x -= overlap * y);
                }
            }
            let nrm = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if best.map_or(true, |(_, b)| nrm > b + 1e-12) {
                best = Some((j, nrm));
            }
            residuals.push(r);
        }
        let (j, nrm) = best.expect("nonempty complement");
        let phi = residuals.swap_remove(j).mapv(|z| z / nrm);
        let partner = t.dot(&phi.mapv(|z| z.conj()));
        chosen.push(phi);
        chosen.push(partner);
    }
    let mut coords = Array2::zeros((d, d));
    for (k, q) in chosen.iter().enumerate() {
        coords.column_mut(k).assign(q);
    }
    Ok(linalg::mm(v, &coords.view()))
}

/// Largest of `‖θφ_i − φ′_i‖`, `‖θφ′_i + φ_i‖` and `|⟨φ_i, φ′_i⟩|` over the pairs.
pub fn kramers_residual(theta: &AntiUnitary, basis: &CMat) -> f64 {
    let image = theta.apply(&basis.view());
    let mut worst = 0.0f64;
    for (i, pair) in basis.axis_chunks_iter(Axis(1), 2).enumerate() {
        let phi = pair.column(0);
        let phi2 = pair.column(1);
        let t0 = image.column(2 * i);
        let t1 = image.column(2 * i + 1);
        let a = t0.iter().zip(phi2.iter()).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        let b = t1.iter().zip(phi.iter()).map(|(x, y)| (x + y).norm_sqr()).sum::<f64>().sqrt();
        let ip: C64 = phi.iter().zip(phi2.iter()).map(|(x, y)| x.conj() * y).sum();
        worst = worst.max(a).max(b).max(ip.norm());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{dagger, distance, identity, mm, HermitianOperator, ONE, ZERO};
    use ndarray::{array, s};
    use proptest::prelude::*;

    fn orthonormality(b: &CMat) -> f64 {
        let g = linalg::mm_hn(&b.view(), &b.view());
        distance(&g.view(), &identity(b.ncols()).view())
    }

    #[test]
    fn standard_pair() {
        let th = AntiUnitary::standard_odd(1);
        let b = kramers_basis(&th, &identity(2).view()).unwrap();
        assert!(distance(&b.view(), &identity(2).view()) < 1e-15);
        assert!(kramers_residual(&th, &b) < 1e-15);
    }

    #[test]
    fn two_blocks_give_two_pairs() {
        let th = AntiUnitary::standard_odd(2);
        let b = kramers_basis(&th, &identity(4).view()).unwrap();
        assert_eq!(b.ncols(), 4);
        assert!(orthonormality(&b) < 1e-14);
        assert!(kramers_residual(&th, &b) < 1e-14);
    }

    #[test]
    fn odd_dimension_rejected() {
        let th = AntiUnitary::standard_odd(2);
        let v = identity(4).slice(s![.., 0..3]).to_owned();
        assert!(matches!(kramers_basis(&th, &v.view()), Err(Error::OddDimension(3))));
    }

    #[test]
    fn non_invariant_subspace_rejected() {
        let th = AntiUnitary::standard_odd(2);
        let v = array![[ONE, ZERO], [ZERO, ZERO], [ZERO, ONE], [ZERO, ZERO]];
        assert!(matches!(kramers_basis(&th, &v.view()), Err(Error::Invariant { .. })));
    }

    #[test]
    fn empty_subspace() {
        let v: CMat = Array2::zeros((4, 0));
        assert_eq!(kramers_basis(&AntiUnitary::standard_odd(2), &v.view()).unwrap().ncols(), 0);
    }

    #[test]
    fn even_theta_rejected() {
        let th = AntiUnitary::conjugation(2);
        assert!(kramers_basis(&th, &identity(2).view()).is_err());
    }

    #[test]
    fn rotated_subspace() {
        let th = AntiUnitary::standard_odd(2);
        let v = array![
            [ONE, ZERO],
            [ZERO, ONE],
            [ZERO, ZERO],
            [ZERO, ZERO]
        ];
        let u = array![[C64::new(0.6, 0.0), C64::new(0.0, 0.8)], [C64::new(0.0, 0.8), C64::new(0.6, 0.0)]];
        let rotated = mm(&v, &u);
        let b = kramers_basis(&th, &rotated.view()).unwrap();
        assert!(kramers_residual(&th, &b) < 1e-14);
        let back = mm(&dagger(&v.view()), &b);
        assert!(orthonormality(&back) < 1e-14);
    }

    fn random_hermitian(n: usize, vals: &[f64]) -> CMat {
        let g = Array2::from_shape_fn((n, n), |(i, j)| {
            let k = (3 * i + 7 * j) % vals.len();
            C64::new(vals[k], vals[(k + 5) % vals.len()] * ((i + 2 * j) as f64).sin())
        });
        (&g + &dagger(&g.view())).mapv(|z| z * 0.5)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn basis_of_symmetric_eigenspaces(vals in proptest::collection::vec(-1.0f64..1.0, 16..40), pairs in 2usize..8) {
            // A τ-symmetric Hermitian has Kramers-degenerate eigenspaces; the
            // spectral projection onto its lower half is θ-invariant.
            let n = 2 * pairs;
            let th = AntiUnitary::standard_odd(pairs);
            let g = random_hermitian(n, &vals);
            let sym = (&g + &th.conjugate(&g).unwrap()).mapv(|z| z * 0.5);
            let dec = HermitianOperator::new(sym, "h").unwrap().spectral_decomposition().unwrap();
            let d = 2 * (pairs / 2).max(1);
            let v = dec.eigenvectors.slice(s![.., 0..d]).to_owned();
            let b = kramers_basis(&th, &v.view()).unwrap();
            prop_assert!(orthonormality(&b) < 1e-10);
            prop_assert!(kramers_residual(&th, &b) < 1e-9);
            prop_assert!(subspace_leakage(&b.view(), &v.view()) < 1e-9);
        }
    }
}
