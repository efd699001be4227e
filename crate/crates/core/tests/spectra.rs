use kramers_core::lattice::ModelSpec;
use kramers_core::spectra::*;
use kramers_core::Error;

#[test]
fn topological_cylinder_transport_is_ballistic() {
    let spec = ModelSpec::cylinder(1.0, 16, 16);
    let cfg = SpectraConfig::default();
    let (trace, states) = ballistic_transport(&spec, 0.0, &cfg, None).unwrap();
    assert!(trace.fit.alpha >= 1.8, "{:?}", trace.fit);
    assert!(trace.norm_drift <= 1e-9 && trace.energy_drift <= 1e-9);
    assert!(time_reversal_pairing(&states, &trace).unwrap() <= 1e-6);
    // the last fitted time stays before the packet wraps around
    assert!(trace.fit.band.1 <= trace.wrap_time + 1e-12);
}

#[test]
fn topological_edge_bands_are_kramers_pairs() {
    let spec = ModelSpec::cylinder(1.0, 16, 24);
    let (report, bands) = spectrum_report(&spec, 0.0, &SpectraConfig::default()).unwrap();
    assert!(report.kramers_residual <= 1e-8, "{report:?}");
    assert!(report.edge_kramers_residual <= 1e-8, "{report:?}");
    assert!(report.reflection_residual <= 1e-10, "{report:?}");
    assert!(report.states_in_delta > 0);
    assert!(report.edge_coverage > 0.99, "{report:?}");
    assert_eq!(bands.bands(), 4 * 24);
}

#[test]
fn trivial_cylinder_has_nothing_in_the_gap() {
    let spec = ModelSpec::cylinder(3.0, 12, 12);
    let cfg = SpectraConfig::default();
    let (report, _) = spectrum_report(&spec, 0.0, &cfg).unwrap();
    assert_eq!(report.gap_filling, 0.0);
    assert_eq!(report.states_in_delta, 0);
    assert_eq!(report.edge_coverage, 0.0);
    match ballistic_transport(&spec, 0.0, &cfg, None) {
        Err(e @ Error::NoGapStates(_)) => assert!(e.to_string().contains("no gap states")),
        other => panic!("expected no gap states, got {other:?}"),
    }
}

#[test]
fn bad_config_is_rejected() {
    let cfg = SpectraConfig {
        bins: 0,
        ..Default::default()
    };
    assert!(cfg.validate().is_err());
}
