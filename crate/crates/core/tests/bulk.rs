use kramers_core::bulk::*;
use kramers_core::edge::pairing_residual;
use kramers_core::index::{CountingConfig, Z2};
use kramers_core::lattice::ModelSpec;
use kramers_core::Error;

fn cfg() -> CountingConfig {
    CountingConfig::default()
}

#[test]
fn topological_torus_has_odd_defect_parity() {
    let spec = ModelSpec::torus(1.0, 16);
    let s = bulk_setup(&spec, 0.0, None).unwrap();
    let b = bulk_index_from(&s, &cfg()).unwrap();
    assert_eq!(b.report.z2, Z2::One);
    assert!(b.flux_reversal_residual <= 1e-12 && b.fermi_symmetry_residual <= 1e-10);
    // the unfiltered kernel is always even on a finite torus
    assert_eq!(b.report.exact_kernel % 2, 0);
    // raw eigenvectors mix within the cluster; the localized directions do not
    let (t, _) = b.report.plateau.unwrap();
    let row = b.report.sweep.iter().find(|r| r.tol == t).unwrap();
    assert_eq!((row.filtered % 2, row.ambiguous), (1, 0));
    let values = s.a_spectrum.eigenvalues.as_slice().unwrap();
    assert!(pairing_residual(values, 1e-6) <= 1e-8);
    assert!(values.iter().all(|&v| (-1.0 - 1e-12..=1.0 + 1e-12).contains(&v)));

    let (up, down) = chern_block_oracle(&spec, 0.0).unwrap();
    assert_eq!((up.abs(), up + down), (1, 0));
}

#[test]
fn trivial_torus_has_even_parity() {
    let spec = ModelSpec::torus(3.0, 16);
    assert_eq!(bulk_index(&spec, 0.0, &cfg()).unwrap().report.z2, Z2::Zero);
    assert_eq!(chern_block_oracle(&spec, 0.0).unwrap(), (0, 0));
}

#[test]
fn parity_survives_moving_the_flux_by_a_lattice_vector() {
    let spec = ModelSpec::torus(1.0, 12);
    let a = bulk_index_at(&spec, 0.0, &cfg(), Some((5.5, 5.5))).unwrap();
    let b = bulk_index_at(&spec, 0.0, &cfg(), Some((6.5, 4.5))).unwrap();
    assert_eq!(a.report.z2, Z2::One);
    assert_eq!(a.report.z2, b.report.z2);
}

#[test]
fn weak_disorder_keeps_the_bulk_parity() {
    let spec = ModelSpec::torus(1.0, 16).with_disorder(0.3, 0.5, 1);
    let b = bulk_index(&spec, 0.0, &cfg()).unwrap();
    assert_eq!(b.report.z2, Z2::One);
    assert_eq!(b.report.exact_kernel % 2, 0);
}

#[test]
fn closed_gap_is_refused() {
    let spec = ModelSpec::torus(2.0, 8);
    assert!(matches!(bulk_index(&spec, 0.0, &cfg()), Err(Error::NoGap { .. })));
}

#[test]
fn oracle_needs_decoupled_spins() {
    let spec = ModelSpec::torus(1.0, 6).with_disorder(0.3, 0.0, 0);
    assert!(chern_block_oracle(&spec, 0.0).is_err());
}
