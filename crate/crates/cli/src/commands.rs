//! One function per subcommand. Each renders its artifacts into an
//! [`Outputs`] and never touches the filesystem itself.

use kramers_core::bulk::{bulk_index_from, bulk_setup, BulkIndex};
use kramers_core::edge::{bulk_edge_check, edge_index_from, edge_setup, BulkEdgeRow, EdgeIndex};
use kramers_core::index::DefectWindow;
use kramers_core::lattice::{build_bulk_hamiltonian, build_half_space_hamiltonian, Boundary, build_time_reversal, verify_trs, ModelSpec};
use kramers_core::operator::{io, ProjectionOperator, SpectralDecomposition, UnitaryOperator};
use kramers_core::spectra::{ballistic_transport, spectrum_report, time_reversal_pairing, SpectrumReport, TransportTrace};
use kramers_core::wold::{
    chain_projections, decouple_with, max_clean_depth, model_pair, random_symmetric_pair, ring_shift_pair,
    shift_extraction, synthetic_shift_chain, ChainCheck, DecoupleOptions, DecouplingSummary, ShiftReport,
    SymmetricPair, SyntheticChain,
};
use kramers_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Fixture, Format, RunConfig};
use crate::output::Outputs;
use crate::CliError;

#[derive(Serialize)]
struct EigenRow {
    index: usize,
    eigenvalue: f64,
    distance_to_one: f64,
    weight: f64,
    rms_radius: f64,
}

const EIGEN_HEADER: [&str; 5] = ["index", "eigenvalue", "distance_to_one", "weight", "rms_radius"];

fn eigen_rows(dec: &SpectralDecomposition, window: &DefectWindow) -> Vec<EigenRow> {
    dec.eigenvalues
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let v = dec.eigenvectors.column(i);
            EigenRow {
                index: i,
                eigenvalue: e,
                distance_to_one: (e - 1.0).abs(),
                weight: window.weight(&v),
                rms_radius: window.rms_radius(&v),
            }
        })
        .collect()
}

/// A closed gap is a scientific outcome, recorded as a status.
fn no_gap<T>(r: kramers_core::Result<T>) -> Result<Option<T>, CliError> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NoGap { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn index_bulk(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let spec = cfg.model()?.as_torus();
    let counting = cfg.tolerance.counting();
    let mut out = Outputs::default();
    let Some(setup) = no_gap(bulk_setup(&spec, cfg.mu, None))? else {
        if cfg.output.wants(Format::Json) {
            out.json::<BulkIndex>("bulk_index.json", "index bulk", "no-gap", cfg, None)?;
        }
        if cfg.output.wants(Format::Csv) {
            out.csv::<EigenRow>("bulk_spectrum.csv", &EIGEN_HEADER, &[])?;
        }
        return Ok(out);
    };
    let index = bulk_index_from(&setup, &counting)?;
    if cfg.output.wants(Format::Json) {
        out.json("bulk_index.json", "index bulk", index.report.z2.label(), cfg, Some(&index))?;
    }
    if cfg.output.wants(Format::Csv) {
        let window = DefectWindow::new(&setup.geometry, index.report.defect, index.report.filter_radius);
        out.csv("bulk_spectrum.csv", &EIGEN_HEADER, &eigen_rows(&setup.a_spectrum, &window))?;
    }
    Ok(out)
}

pub fn index_edge(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let spec = cfg.model()?;
    let counting = cfg.tolerance.counting();
    let mut out = Outputs::default();
    let Some(setup) = no_gap(edge_setup(spec, cfg.mu, &cfg.edge))? else {
        if cfg.output.wants(Format::Json) {
            out.json::<EdgeIndex>("edge_index.json", "index edge", "no-gap", cfg, None)?;
        }
        if cfg.output.wants(Format::Csv) {
            out.csv::<EigenRow>("edge_spectrum.csv", &EIGEN_HEADER, &[])?;
        }
        return Ok(out);
    };
    let radius = cfg.edge.radius_for(&setup.geometry);
    let index = edge_index_from(&setup, &counting, radius)?;
    if cfg.output.wants(Format::Json) {
        out.json("edge_index.json", "index edge", index.report.z2.label(), cfg, Some(&index))?;
    }
    if cfg.output.wants(Format::Csv) {
        let window = DefectWindow::new(&setup.geometry, index.report.defect, radius);
        out.csv("edge_spectrum.csv", &EIGEN_HEADER, &eigen_rows(&setup.a_spectrum, &window))?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct CompareRow<'a> {
    m: f64,
    lambda_r: f64,
    w: f64,
    seed: u64,
    z2_bulk: &'a str,
    z2_edge: &'a str,
    status: &'a str,
}

#[derive(Serialize)]
struct CompareSummary<'a> {
    rows: &'a [BulkEdgeRow],
    agree: usize,
    disagree: usize,
    inconclusive: usize,
}

/// Rows run on the ambient worker pool; `collect` keeps the scan order, so
/// the output never depends on completion order.
pub fn index_compare(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let specs = cfg.scan_specs()?;
    let counting = cfg.tolerance.counting();
    let rows: Vec<BulkEdgeRow> = specs
        .par_iter()
        .map(|s| bulk_edge_check(s, cfg.mu, &counting, &cfg.edge))
        .collect::<kramers_core::Result<_>>()?;
    let count = |s: &str| rows.iter().filter(|r| r.status == s).count();
    let summary = CompareSummary {
        rows: &rows,
        agree: count("agree"),
        disagree: count("disagree"),
        inconclusive: count("inconclusive"),
    };
    let status = if summary.disagree > 0 { "disagree" } else { "consistent" };
    let mut out = Outputs::default();
    if cfg.output.wants(Format::Json) {
        out.json("compare.json", "index compare", status, cfg, Some(&summary))?;
    }
    if cfg.output.wants(Format::Csv) {
        let table: Vec<CompareRow> = rows
            .iter()
            .map(|r| CompareRow {
                m: r.m,
                lambda_r: r.lambda_r,
                w: r.w,
                seed: r.seed,
                z2_bulk: r.z2_bulk.label(),
                z2_edge: r.z2_edge.label(),
                status: &r.status,
            })
            .collect();
        out.csv(
            "compare.csv",
            &["m", "lambda_r", "w", "seed", "z2_bulk", "z2_edge", "status"],
            &table,
        )?;
    }
    Ok(out)
}

fn fixture_pair(cfg: &RunConfig) -> Result<(SymmetricPair, Option<SyntheticChain>), CliError> {
    if let Some(path) = &cfg.wold.input {
        return Ok((SymmetricPair::read(path)?, None));
    }
    Ok(match &cfg.wold.fixture {
        Fixture::Model => (model_pair(cfg.model()?, cfg.mu)?, None),
        Fixture::Ring { sites, arc } => (ring_shift_pair(*sites, *arc)?, None),
        Fixture::Random { dim, seed } => (random_symmetric_pair(*dim, *seed)?, None),
        Fixture::Synthetic {
            sites,
            arc,
            trivial_pairs,
        } => {
            let chain = synthetic_shift_chain(*sites, *arc, *trivial_pairs)?;
            let pair = SymmetricPair::new(
                UnitaryOperator::new(chain.w.clone())?,
                ProjectionOperator::new(chain.p.clone())?,
                chain.tau.clone(),
            )?;
            (pair, Some(chain))
        }
    })
}

/// Chain projections and shift extraction on a synthetic chain, whose
/// residual states are known in closed form.
#[derive(Serialize)]
struct ChainMechanism {
    depth: usize,
    max_clean_depth: Option<usize>,
    chains: ChainCheck,
    shift: ShiftReport,
}

fn chain_mechanism(chain: &SyntheticChain, depth: Option<usize>) -> Result<ChainMechanism, CliError> {
    let (plus, minus) = (chain.plus.view(), chain.minus.view());
    let clean = max_clean_depth(&chain.w, &chain.p, &plus, &minus, &chain.tau, chain.sites)?;
    let depth = depth.or(clean).unwrap_or(0);
    let chains = chain_projections(&chain.w, &chain.p, &plus, &minus, &chain.tau, depth)?;
    let shift = shift_extraction(&chain.w, &chain.p, &chain.tau, &plus, depth)?;
    Ok(ChainMechanism {
        depth,
        max_clean_depth: clean,
        chains: chains.check,
        shift: shift.report,
    })
}

#[derive(Serialize)]
struct WoldOutput {
    decoupling: DecouplingSummary,
    chain_mechanism: Option<ChainMechanism>,
}

fn matrices(blocks: &[(&str, &kramers_core::operator::CMat)]) -> Result<Vec<u8>, CliError> {
    let mut bytes = Vec::new();
    io::write_matrices(&mut bytes, blocks)?;
    Ok(bytes)
}

/// Artifacts: `wold.json`, the decoupled `W` and `V` in `wold.cmat`, and the
/// input pair in `pair.cmat` so the run can be repeated from the file alone.
pub fn wold_run(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let (pair, synthetic) = fixture_pair(cfg)?;
    let result = decouple_with(
        &pair,
        &DecoupleOptions {
            cluster_tol: cfg.tolerance.cluster_tol,
            depth: cfg.wold.depth,
        },
    )?;
    let chain_mechanism = match &synthetic {
        Some(chain) => Some(chain_mechanism(chain, cfg.wold.depth)?),
        None => None,
    };
    let summary = WoldOutput {
        decoupling: result.summary(),
        chain_mechanism,
    };
    let status = serde_json::to_value(summary.decoupling.classification)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    let mut out = Outputs::default();
    out.json("wold.json", "wold run", &status, cfg, Some(&summary))?;
    out.add(
        "wold.cmat",
        matrices(&[("W", result.w.matrix()), ("V", result.v.matrix())])?,
    );
    out.add(
        "pair.cmat",
        matrices(&[("U", pair.u().matrix()), ("P", pair.p().matrix()), ("tau", pair.tau().unitary_part())])?,
    );
    Ok(out)
}

#[derive(Serialize)]
struct ModelSummary {
    dim: usize,
    trs_residual: f64,
}

/// The configured model's Hamiltonian and time reversal in matrix format.
pub fn model_export(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let spec = cfg.model()?;
    let h = match spec.boundary_y {
        Boundary::Periodic => build_bulk_hamiltonian(spec)?,
        Boundary::Open => build_half_space_hamiltonian(spec)?,
    };
    let tau = build_time_reversal(&spec.geometry()?)?;
    let trs = verify_trs(h.matrix(), &tau)?;
    let mut out = Outputs::default();
    out.add("model.cmat", matrices(&[("H", h.matrix()), ("tau", tau.unitary_part())])?);
    if cfg.output.wants(Format::Json) {
        let s = ModelSummary {
            dim: h.matrix().nrows(),
            trs_residual: trs.residual,
        };
        out.json("model.json", "model export", "ok", cfg, Some(&s))?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct BandRow {
    k: f64,
    band: usize,
    energy: f64,
    edge_weight: f64,
}

pub fn edge_spectrum(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let spec = cylinder(cfg.model()?);
    let mut out = Outputs::default();
    let Some((report, bands)) = no_gap(spectrum_report(&spec, cfg.mu, &cfg.spectra))? else {
        if cfg.output.wants(Format::Json) {
            out.json::<SpectrumReport>("spectrum.json", "edge spectrum", "no-gap", cfg, None)?;
        }
        if cfg.output.wants(Format::Csv) {
            out.csv::<BandRow>("bands.csv", &["k", "band", "energy", "edge_weight"], &[])?;
        }
        return Ok(out);
    };
    if cfg.output.wants(Format::Json) {
        let status = if report.states_in_delta > 0 { "gap-states" } else { "no-gap-states" };
        out.json("spectrum.json", "edge spectrum", status, cfg, Some(&report))?;
    }
    if cfg.output.wants(Format::Csv) {
        let mut rows = Vec::with_capacity(bands.k.len() * bands.bands());
        for (i, &k) in bands.k.iter().enumerate() {
            for (b, (&e, &wgt)) in bands.energies[i].iter().zip(&bands.edge_weight[i]).enumerate() {
                rows.push(BandRow {
                    k,
                    band: b,
                    energy: e,
                    edge_weight: wgt,
                });
            }
        }
        out.csv("bands.csv", &["k", "band", "energy", "edge_weight"], &rows)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct TransportRow {
    t: f64,
    mean: f64,
    spread: f64,
}

#[derive(Serialize)]
struct TransportSummary<'a> {
    #[serde(flatten)]
    trace: &'a TransportTrace,
    /// Moments of `τψ₀` run forward against those of `ψ₀` run backward.
    time_reversal_pairing: f64,
}

/// With nothing inside the gap window the run records `no-gap-states` and
/// an empty trace; that is a result, not a failure.
pub fn edge_transport(cfg: &RunConfig) -> Result<Outputs, CliError> {
    let spec = cylinder(cfg.model()?);
    let header = ["t", "mean", "spread"];
    let mut out = Outputs::default();
    let outcome = match ballistic_transport(&spec, cfg.mu, &cfg.spectra, None) {
        Ok(v) => Some(v),
        Err(Error::NoGapStates(_)) | Err(Error::NoGap { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let Some((trace, states)) = outcome else {
        if cfg.output.wants(Format::Json) {
            out.json::<TransportTrace>("transport.json", "edge transport", "no-gap-states", cfg, None)?;
        }
        if cfg.output.wants(Format::Csv) {
            out.csv::<TransportRow>("transport.csv", &header, &[])?;
        }
        return Ok(out);
    };
    if cfg.output.wants(Format::Json) {
        let summary = TransportSummary {
            trace: &trace,
            time_reversal_pairing: time_reversal_pairing(&states, &trace)?,
        };
        let status = if trace.fit.alpha >= 1.8 { "ballistic" } else { "sub-ballistic" };
        out.json("transport.json", "edge transport", status, cfg, Some(&summary))?;
    }
    if cfg.output.wants(Format::Csv) {
        let rows: Vec<TransportRow> = trace
            .times
            .iter()
            .zip(&trace.mean)
            .zip(&trace.spread)
            .map(|((&t, &mean), &spread)| TransportRow { t, mean, spread })
            .collect();
        out.csv("transport.csv", &header, &rows)?;
    }
    Ok(out)
}

fn cylinder(spec: &ModelSpec) -> ModelSpec {
    spec.as_cylinder()
}
