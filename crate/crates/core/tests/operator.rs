use kramers_core::operator::schatten::{random_circle_normal, unitary_part_report, CIRCLE_QUADRATIC_BOUND};
use kramers_core::operator::*;
use ndarray::Array2;
use proptest::prelude::*;

fn matrix(entries: &[(f64, f64)], n: usize) -> CMat {
    Array2::from_shape_fn((n, n), |(i, j)| {
        let (re, im) = entries[(i * n + j) % entries.len()];
        c(re, im)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn matrix_files_round_trip_bit_for_bit(
        entries in proptest::collection::vec((-1e6f64..1e6, -1e-6f64..1e-6), 1..40),
        n in 1usize..7,
    ) {
        let m = matrix(&entries, n);
        let mut bytes = Vec::new();
        io::write_matrices(&mut bytes, &[("M", &m), ("Mt", &m.t().to_owned())]).unwrap();
        let back = io::read_matrices(bytes.as_slice()).unwrap();
        prop_assert_eq!(&back[0].1, &m);
        prop_assert_eq!(&back[1].0, "Mt");
    }

    #[test]
    fn exponential_of_hermitian_is_unitary(entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 36)) {
        let m = matrix(&entries, 6);
        let h = (&m + &dagger(&m.view())).mapv(|z| z * 0.5);
        let h = HermitianOperator::new(h, "h").unwrap();
        let u = functional_calculus(&h, |x| C64::from_polar(1.0, x)).unwrap();
        prop_assert!(unitarity_residual(&u) < 1e-12);
        let back = functional_calculus(&h, |x| c(x, 0.0)).unwrap();
        prop_assert!(distance(&back.view(), &h.matrix().view()) < 1e-12);
    }

    #[test]
    fn schatten_norms_are_ordered(entries in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25)) {
        let m = matrix(&entries, 5);
        let p1 = schatten_norm(&m.view(), 1.0).unwrap();
        let p2 = schatten_norm(&m.view(), 2.0).unwrap();
        let pinf = schatten_norm(&m.view(), f64::INFINITY).unwrap();
        prop_assert!(pinf <= p2 + 1e-12 && p2 <= p1 + 1e-12);
        prop_assert!((p2 - fro_norm(&m.view())).abs() < 1e-10);
    }
}

#[test]
fn unitary_part_relation_on_random_normals() {
    for seed in 0..20 {
        let x = random_circle_normal(10, 3.0, seed).unwrap();
        let r = unitary_part_report(&x).unwrap();
        assert!(r.prediction_residual <= 1e-9);
        assert!(r.quadratic_constant <= CIRCLE_QUADRATIC_BOUND + 1e-9);
    }
}

#[test]
fn quadratic_constant_approaches_its_bound_near_zero() {
    // z close to 0 on the circle: φ → π
    let r = unitary_part_report(&random_circle_normal(6, 3.13, 2).unwrap()).unwrap();
    let x = Array2::from_diag(&ndarray::arr1(&[(c(1.0, 0.0) + C64::from_polar(1.0, 3.1)) * 0.5]));
    let near = unitary_part_report(&x).unwrap();
    assert!(near.quadratic_constant > 0.95 * CIRCLE_QUADRATIC_BOUND, "{near:?}");
    assert!(r.quadratic_constant <= CIRCLE_QUADRATIC_BOUND + 1e-9);
}

#[test]
fn kramers_basis_rejects_an_odd_subspace() {
    let theta = AntiUnitary::standard_odd(3);
    let v = identity(6);
    assert!(kramers_basis(&theta, &v.view()).is_ok());
    assert!(kramers_basis(&theta, &v.slice(ndarray::s![.., ..5])).is_err());
}
