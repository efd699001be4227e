use ndarray::{Array2, ArrayView2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use super::{c, calculus::unitary_part, identity, linalg, orthonormalize, CMat, C64};
use crate::error::{Error, Result};

/// `(Σ σ_i^p)^{1/p}` over singular values; `p = ∞` gives the operator norm.
pub fn schatten_norm(m: &ArrayView2<C64>, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("Schatten exponent {p} < 1")));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let (s, _) = linalg::svd(m, false)?;
    Ok(schatten_from_singular_values(s.as_slice().unwrap(), p))
}

pub fn schatten_from_singular_values(s: &[f64], p: f64) -> f64 {
    let top = s.iter().cloned().fold(0.0f64, f64::max);
    if p.is_infinite() || top == 0.0 {
        return top;
    }
    // scaled by the largest value to keep σ^p in range
    let sum: f64 = s.iter().map(|&x| (x / top).powf(p)).sum();
    top * sum.powf(1.0 / p)
}

/// `(λ + 1)/|λ + 1| − 1`: the eigenvalue of `V − 1` paired with the
/// eigenvalue `λ` of `X − 1` when `V` is the unitary part of `X`.
pub fn mu_from_lambda(lambda: C64) -> Result<C64> {
    let z = lambda + C64::new(1.0, 0.0);
    let r = z.norm();
    if r < 1e-14 {
        return Err(Error::InvalidArgument(format!("λ = {lambda} equals −1")));
    }
    Ok(z / r - C64::new(1.0, 0.0))
}

/// `√2 − 1`: on the circle `|z − 1/2| = 1/2`, `z = cos(φ/2)e^{iφ/2}` gives
/// `|μ| = |λ|/cos(φ/4)` with `|λ| = sin(|φ|/2)`, so
/// `|μ| − |λ| ≤ (√2 − 1)|λ|²`, the supremum approached as `z → 0`.
pub const CIRCLE_QUADRATIC_BOUND: f64 = std::f64::consts::SQRT_2 - 1.0;

/// Random normal `X = Y diag(z) Y*` with `Y` unitary and each `z_i` on
/// the circle `|z − 1/2| = 1/2`, at angle `|φ| ≤ φ_max < π` from `z = 1`.
pub fn random_circle_normal(n: usize, phi_max: f64, seed: u64) -> Result<CMat> {
    if n == 0 || !(phi_max > 0.0 && phi_max < std::f64::consts::PI) {
        return Err(Error::InvalidArgument(format!("need n > 0 and 0 < φ_max < π, got {n}, {phi_max}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let unit = Uniform::new(-1.0, 1.0);
    let raw = Array2::from_shape_fn((n, n), |_| c(unit.sample(&mut rng), unit.sample(&mut rng)));
    let y = orthonormalize(&raw, 1e-8);
    if y.ncols() != n {
        return Err(Error::Eigensolver("random basis lost rank".into()));
    }
    let angle = Uniform::new_inclusive(-phi_max, phi_max);
    let mut scaled = y.clone();
    for mut col in scaled.columns_mut() {
        let phi: f64 = angle.sample(&mut rng);
        let z = (C64::new(1.0, 0.0) + C64::from_polar(1.0, phi)) * 0.5;
        col.mapv_inplace(|v| v * z);
    }
    Ok(linalg::mm_nh(&scaled.view(), &y.view()))
}

/// Comparison of `V − 1` with `X − 1` for the unitary part `V` of a normal `X`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct UnitaryPartReport {
    pub max_lambda: f64,
    /// `max_i (|μ_i| − |λ_i|)/|λ_i|²`
    pub quadratic_constant: f64,
    /// largest mismatch between the sorted `|μ_i|` predicted from `λ_i` and
    /// the singular values of `V − 1`
    pub prediction_residual: f64,
    /// `‖V − 1‖_p / (‖X − 1‖_p (1 + C·max|λ|))` at `p = 1, 2` with `C` the
    /// circle bound; at most one when the relation holds
    pub bound_ratio: [f64; 2],
}

pub fn unitary_part_report(x: &CMat) -> Result<UnitaryPartReport> {
    let n = x.nrows();
    let xm1 = x - &identity(n);
    let lambdas = linalg::eigvals_general(&xm1.view())?;
    let v = unitary_part(x, 1e-8)?;
    if v.rank() != n {
        return Err(Error::InvalidArgument("X has a kernel; the relation concerns X − 1 compact around 1".into()));
    }
    let vm1 = v.embedded() - identity(n);
    let mut predicted = Vec::with_capacity(n);
    let mut quadratic_constant = 0.0f64;
    let mut max_lambda = 0.0f64;
    for &lam in lambdas.iter() {
        let mu = mu_from_lambda(lam)?;
        let (l, m) = (lam.norm(), mu.norm());
        max_lambda = max_lambda.max(l);
        if l > 1e-8 {
            quadratic_constant = quadratic_constant.max((m - l) / (l * l));
        }
        predicted.push(m);
    }
    predicted.sort_by(|a, b| b.total_cmp(a));
    let (sv, _) = linalg::svd(&vm1.view(), false)?;
    let prediction_residual = sv
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let mut bound_ratio = [0.0; 2];
    for (slot, p) in bound_ratio.iter_mut().zip([1.0, 2.0]) {
        let top = schatten_norm(&vm1.view(), p)?;
        let bottom = schatten_norm(&xm1.view(), p)? * (1.0 + CIRCLE_QUADRATIC_BOUND * max_lambda);
        *slot = if bottom > 0.0 { top / bottom } else { 0.0 };
    }
    Ok(UnitaryPartReport {
        max_lambda,
        quadratic_constant,
        prediction_residual,
        bound_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{c, CMat, ProjectionOperator};
    use ndarray::{arr1, Array2};
    use std::f64::consts::PI;

    #[test]
    fn frobenius_of_diag_3_4() {
        let m = Array2::from_diag(&arr1(&[c(3.0, 0.0), c(4.0, 0.0)]));
        assert!((schatten_norm(&m.view(), 2.0).unwrap() - 5.0).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        let m: CMat = Array2::zeros((3, 3));
        assert_eq!(schatten_norm(&m.view(), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn trace_norm_of_projection_is_rank() {
        let p = ProjectionOperator::from_mask(&[true, false, true, true]);
        assert!((schatten_norm(&p.matrix().view(), 1.0).unwrap() - 3.0).abs() < 1e-13);
    }

    #[test]
    fn exponent_below_one_rejected() {
        let m: CMat = Array2::eye(2);
        assert!(schatten_norm(&m.view(), 0.5).is_err());
        assert!(schatten_norm(&m.view(), f64::NAN).is_err());
    }

    #[test]
    fn infinity_is_operator_norm() {
        let m = Array2::from_diag(&arr1(&[c(3.0, 0.0), c(0.0, -4.0)]));
        assert!((schatten_norm(&m.view(), f64::INFINITY).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn mu_examples() {
        assert_eq!(mu_from_lambda(c(0.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!((mu_from_lambda(c(-2.0, 0.0)).unwrap() - c(-2.0, 0.0)).norm() < 1e-15);
        let e = C64::from_polar(1.0, PI / 3.0);
        let lam = e - c(1.0, 0.0);
        assert!((mu_from_lambda(lam).unwrap() - (e - c(1.0, 0.0))).norm() < 1e-15);
        assert!(mu_from_lambda(c(-1.0, 0.0)).is_err());
    }

    #[test]
    fn circle_normals_obey_the_quadratic_relation() {
        for seed in 0..5 {
            let x = random_circle_normal(12, 2.5, seed).unwrap();
            let r = unitary_part_report(&x).unwrap();
            assert!(r.prediction_residual < 1e-9, "{r:?}");
            assert!(r.quadratic_constant <= CIRCLE_QUADRATIC_BOUND + 1e-9, "{r:?}");
            assert!(r.bound_ratio.iter().all(|&b| b <= 1.0 + 1e-9), "{r:?}");
        }
    }

    #[test]
    fn quadratic_constant_at_a_known_angle() {
        // φ = 2π/3: |λ| = sin(π/3), |μ| = 2 sin(π/6) = 1
        let phi = 2.0 * PI / 3.0;
        let z = (c(1.0, 0.0) + C64::from_polar(1.0, phi)) * 0.5;
        let x = Array2::from_diag(&arr1(&[z, c(1.0, 0.0)]));
        let r = unitary_part_report(&x).unwrap();
        let l = (PI / 3.0).sin();
        assert!((r.quadratic_constant - (1.0 - l) / (l * l)).abs() < 1e-12);
    }
}
