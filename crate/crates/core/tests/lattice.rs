use kramers_core::lattice::*;
use kramers_core::operator::{commutator, fro_norm};
use proptest::prelude::*;

#[test]
fn clean_topological_torus_is_gapped() {
    let h = build_bulk_hamiltonian(&ModelSpec::torus(1.0, 8)).unwrap();
    let gap = spectral_gap(&h, 0.0).unwrap().expect("gap at 0");
    assert!(gap.half_width_around(0.0) >= 0.5, "{gap:?}");
    // spin blocks decouple without Rashba
    let n = h.dim();
    let spin_up = ndarray::Array2::from_shape_fn((n, n), |(i, j)| {
        if i == j && i % 2 == 0 {
            kramers_core::operator::c(1.0, 0.0)
        } else {
            kramers_core::operator::c(0.0, 0.0)
        }
    });
    assert_eq!(fro_norm(&commutator(h.matrix(), &spin_up).view()), 0.0);
}

#[test]
fn trivial_torus_is_gapped_too() {
    let h = build_bulk_hamiltonian(&ModelSpec::torus(3.0, 8)).unwrap();
    let gap = spectral_gap(&h, 0.0).unwrap().expect("gap at 0");
    assert!(gap.half_width_around(0.0) > 0.9);
}

#[test]
fn spec_round_trips_through_toml_keys() {
    let spec = ModelSpec::cylinder(1.5, 10, 6).with_disorder(0.3, 0.5, 4);
    let text = serde_json::to_string(&spec).unwrap();
    assert!(text.contains("\"Lx\":10") && text.contains("\"boundary_y\":\"open\""));
    assert_eq!(serde_json::from_str::<ModelSpec>(&text).unwrap(), spec);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_spec_is_time_reversal_symmetric(
        m in -3.5f64..3.5,
        lambda_r in 0.0f64..0.6,
        w in 0.0f64..2.0,
        seed in any::<u64>(),
        lx in 2usize..6,
        ly in 2usize..6,
        open in any::<bool>(),
    ) {
        let mut spec = ModelSpec::torus(m, lx).with_disorder(lambda_r, w, seed);
        spec.ly = ly;
        let h = if open {
            build_half_space_hamiltonian(&spec.as_cylinder()).unwrap()
        } else {
            build_bulk_hamiltonian(&spec).unwrap()
        };
        let tau = build_time_reversal(&spec.geometry().unwrap()).unwrap();
        let trs = verify_trs(h.matrix(), &tau).unwrap();
        prop_assert!(trs.pass, "residual {}", trs.residual);
        // Kramers: every eigenvalue is doubly degenerate
        let e = h.eigenvalues().unwrap();
        for pair in e.as_slice().unwrap().chunks(2) {
            prop_assert!((pair[1] - pair[0]).abs() < 1e-9);
        }
    }
}
