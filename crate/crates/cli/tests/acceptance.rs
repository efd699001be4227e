//! Acceptance report: one PASS/FAIL line per criterion, followed by the
//! measured quantities. The report itself always exits zero; a FAIL line is
//! data about the method, not a broken build.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use kramers_core::bulk::chern_block_oracle;
use kramers_core::edge::{bulk_edge_check, EdgeConfig};
use kramers_core::index::{CountingConfig, Z2};
use kramers_core::lattice::ModelSpec;
use kramers_core::operator::schatten::{random_circle_normal, unitary_part_report, CIRCLE_QUADRATIC_BOUND};
use kramers_core::operator::kramers::kramers_residual;
use kramers_core::operator::{dagger, identity, kramers_basis, mm, HermitianOperator};
use kramers_core::spectra::{ballistic_transport, spectrum_report, SpectraConfig};
use kramers_core::wold::*;
use kramers_core::Error;
use ndarray::s;

type Outcome = Result<(bool, String), String>;

struct Instance {
    name: String,
    pair: SymmetricPair,
}

fn scan_specs() -> Vec<ModelSpec> {
    let mut out = Vec::new();
    for m in [0.5, 1.0, 1.5, 2.5, 3.0] {
        let clean = ModelSpec::torus(m, 16);
        out.push(clean.clone());
        for seed in 1..=3 {
            out.push(clean.clone().with_disorder(0.3, 0.5, seed));
        }
    }
    out
}

fn criterion_1(log: &mut String) -> Outcome {
    let (cfg, ecfg) = (CountingConfig::default(), EdgeConfig::default());
    let mut ok = true;
    let (mut determined, mut agree) = (0, 0);
    for spec in scan_specs() {
        let t = Instant::now();
        let row = bulk_edge_check(&spec, 0.0, &cfg, &ecfg).map_err(|e| e.to_string())?;
        let mut oracle = String::from("-");
        if spec.w == 0.0 {
            let (up, _) = chern_block_oracle(&spec, 0.0).map_err(|e| e.to_string())?;
            let expect = Z2::from_parity(up.unsigned_abs() as usize);
            oracle = expect.label().into();
            ok &= row.z2_bulk == expect && row.z2_edge == expect;
        }
        if row.z2_bulk.is_determined() && row.z2_edge.is_determined() {
            determined += 1;
            agree += usize::from(row.z2_bulk == row.z2_edge);
        }
        ok &= row.status != "disagree";
        writeln!(
            log,
            "    m={} lambda_r={} w={} seed={}: bulk {} edge {} oracle {} {} ({:.0}s)",
            spec.m,
            spec.lambda_r,
            spec.w,
            spec.seed,
            row.z2_bulk.label(),
            row.z2_edge.label(),
            oracle,
            row.status,
            t.elapsed().as_secs_f64()
        )
        .unwrap();
    }
    Ok((ok, format!("{agree}/{determined} determined rows agree; clean rows match the Chern oracle: {ok}")))
}

fn instances() -> Result<Vec<Instance>, String> {
    let mut out = Vec::new();
    for i in 0..120u64 {
        let n = 8 + 2 * (i as usize % 29);
        out.push(Instance {
            name: format!("random n={n} seed={i}"),
            pair: random_symmetric_pair(n, i).map_err(|e| e.to_string())?,
        });
    }
    out.push(Instance {
        name: "ring 12/5".into(),
        pair: ring_shift_pair(12, 5).map_err(|e| e.to_string())?,
    });
    for m in [0.5, 1.0, 1.5, 2.5, 3.0] {
        for seed in 0..=3 {
            let mut spec = ModelSpec::torus(m, 8);
            if seed > 0 {
                spec = spec.with_disorder(0.3, 0.5, seed);
            }
            match model_pair(&spec, 0.0) {
                Ok(pair) => out.push(Instance {
                    name: format!("model m={m} seed={seed}"),
                    pair,
                }),
                Err(Error::NoGap { .. }) => continue,
                Err(e) => return Err(e.to_string()),
            }
        }
    }
    Ok(out)
}

fn criterion_2(all: &[Instance]) -> Outcome {
    let mut odd = Vec::new();
    let mut nonzero = 0;
    for inst in all {
        let d = defect_operators(&inst.pair).map_err(|e| e.to_string())?;
        let k = exact_defect_dimension(&d);
        nonzero += usize::from(k > 0);
        if k % 2 == 1 {
            odd.push(inst.name.clone());
        }
    }
    Ok((
        odd.is_empty(),
        format!("{} instances, {} with nonzero kernel, odd: {:?}", all.len(), nonzero, odd),
    ))
}

fn criterion_3(all: &[Instance]) -> Outcome {
    let ring = decouple(&ring_shift_pair(12, 5).map_err(|e| e.to_string())?, DEFAULT_CLUSTER_TOL)
        .map_err(|e| e.to_string())?;
    let rd = &ring.diagnostics;
    let ring_ok = ring.classification == Classification::Even && rd.contract_residual <= 1e-9 && rd.w_reversal <= 1e-8;
    let (mut worst_c, mut worst_r, mut failures) = (0.0f64, 0.0f64, Vec::new());
    for inst in all.iter().filter(|i| i.name.starts_with("random")) {
        match decouple(&inst.pair, DEFAULT_CLUSTER_TOL) {
            Ok(r) if r.classification == Classification::Even => {
                worst_c = worst_c.max(r.diagnostics.contract_residual);
                worst_r = worst_r.max(r.diagnostics.w_reversal);
            }
            Ok(_) => failures.push(format!("{}: odd", inst.name)),
            Err(e) => failures.push(format!("{}: {e}", inst.name)),
        }
    }
    let ok = ring_ok && failures.is_empty() && worst_c <= 1e-8 && worst_r <= 1e-8;
    Ok((
        ok,
        format!(
            "ring: even, [W,P] {:.1e}, reversal {:.1e}; random: worst [W,P] {:.1e}, reversal {:.1e}, failures {:?}",
            rd.contract_residual, rd.w_reversal, worst_c, worst_r, failures
        ),
    ))
}

fn criterion_4(all: &[Instance]) -> Outcome {
    let mut worst = [0.0f64; 8];
    let mut mid = 0;
    let mut failures = Vec::new();
    let mut refused = Vec::new();
    for inst in all {
        let r = match identity_suite(&inst.pair, DEFAULT_CLUSTER_TOL) {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("{}: {e}", inst.name));
                continue;
            }
        };
        let t = &r.tilde_tau;
        let vals = [
            r.square_residual,
            r.anticommutator_residual,
            r.x.expression_residual.max(r.x.intertwining_residual),
            r.x.normality_residual,
            r.x.circle_residual,
            t.p_to_q.max(t.b_invariance).max(t.a_reversal),
            r.symmetry.worst_leakage(),
            r.symmetry.worst_square_residual(),
        ];
        for (w, v) in worst.iter_mut().zip(vals) {
            *w = w.max(v);
        }
        mid += r.kramers_clusters;
        // the decoupler may refuse a tolerance too close to a near-defect
        if let Err(e @ Error::ClusterUnstable { .. }) = decouple(&inst.pair, DEFAULT_CLUSTER_TOL) {
            refused.push(format!("{}: {e}", inst.name));
        }
    }
    let tols = [
        DEFECT_TOL,
        DEFECT_TOL,
        X_ALGEBRA_TOL,
        X_NORMAL_TOL,
        CIRCLE_TOL,
        PAIR_TOL,
        SUBSPACE_TOL,
        SUBSPACE_TOL,
    ];
    let ok = failures.is_empty() && worst.iter().zip(tols).all(|(w, t)| *w <= t);
    Ok((
        ok,
        format!(
            "{} instances: A2+B2 {:.1e}, AB+BA {:.1e}, PX=XQ=PQ {:.1e}, XX*=B2 {:.1e}, circle {:.1e}, pairing (tilde tau) {:.1e}, \
             pairing (subspaces) {:.1e}, B2 on clusters {:.1e}; {} mid-spectrum clusters Kramers-paired; failures {:?}; \
             decoupler refusals at tol 1e-7 (unstable cluster) {:?}",
            all.len(), worst[0], worst[1], worst[2], worst[3], worst[4], worst[5], worst[6], worst[7], mid, failures, refused
        ),
    ))
}

fn criterion_5() -> Outcome {
    let syn = synthetic_shift_chain(64, 31, 2).map_err(|e| e.to_string())?;
    let (plus, minus) = (syn.plus.view(), syn.minus.view());
    let ch = chain_projections(&syn.w, &syn.p, &plus, &minus, &syn.tau, 12).map_err(|e| e.to_string())?;
    let sh = shift_extraction(&syn.w, &syn.p, &syn.tau, &plus, 12).map_err(|e| e.to_string())?;
    let (c, r) = (ch.check, sh.report);
    let worst = [c.orthogonality, c.inclusion, c.kramers, r.forward_shift, r.backward_shift, r.cross_orthogonality];
    let ok = worst.iter().all(|&w| w <= 1e-8);
    Ok((
        ok,
        format!(
            "2L=64, |k|<=12: orthogonality {:.1e}, inclusion {:.1e}, Kramers {:.1e}, forward shift {:.1e}, backward shift {:.1e}, cross {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    ))
}

fn criterion_6() -> Outcome {
    let mut worst_basis = 0.0f64;
    let mut largest = 0;
    let mut rejected = 0;
    let mut tried = 0;
    for (i, n) in (8..=80).step_by(4).enumerate() {
        let pair = random_symmetric_pair(n, 1000 + i as u64).map_err(|e| e.to_string())?;
        let dec = HermitianOperator::new(pair.p().matrix().clone(), "P")
            .and_then(|h| h.spectral_decomposition())
            .map_err(|e| e.to_string())?;
        let idx: Vec<usize> = (0..n).filter(|&j| dec.eigenvalues[j] > 0.5).collect();
        let v = dec.columns(&idx);
        let b = kramers_basis(pair.tau(), &v.view()).map_err(|e| e.to_string())?;
        let gram = mm(&dagger(&b.view()), &b) - identity(b.ncols());
        let ortho = gram.iter().map(|z| z.norm()).fold(0.0, f64::max);
        worst_basis = worst_basis.max(kramers_residual(pair.tau(), &b)).max(ortho);
        largest = largest.max(b.ncols());
        tried += 1;
        if kramers_basis(pair.tau(), &v.slice(s![.., ..idx.len() - 1])).is_err() {
            rejected += 1;
        }
    }
    let mut constant = 0.0f64;
    let mut prediction = 0.0f64;
    let mut ratio = 0.0f64;
    for seed in 0..100u64 {
        let n = 4 + (seed as usize % 13);
        let x = random_circle_normal(n, 3.0, seed).map_err(|e| e.to_string())?;
        let r = unitary_part_report(&x).map_err(|e| e.to_string())?;
        constant = constant.max(r.quadratic_constant);
        prediction = prediction.max(r.prediction_residual);
        ratio = ratio.max(r.bound_ratio[0]).max(r.bound_ratio[1]);
    }
    let ok = worst_basis <= 1e-10
        && largest == 40
        && rejected == tried
        && prediction <= 1e-8
        && constant <= CIRCLE_QUADRATIC_BOUND + 1e-9
        && ratio <= 1.0 + 1e-9;
    Ok((
        ok,
        format!(
            "kramers_basis: {tried} subspaces up to dim {largest}, residual {worst_basis:.1e}, odd rejected {rejected}/{tried}; \
             unitary part on 100 normal X: |mu| prediction {prediction:.1e}, quadratic constant {constant:.4} (bound {CIRCLE_QUADRATIC_BOUND:.4}), \
             Schatten bound ratio {ratio:.4}"
        ),
    ))
}

fn criterion_7(log: &mut String) -> Outcome {
    let cfg = SpectraConfig::default();
    let topo = ModelSpec::cylinder(1.0, 24, 24);
    let (rep, _) = spectrum_report(&topo, 0.0, &cfg).map_err(|e| e.to_string())?;
    let (trace, _) = ballistic_transport(&topo, 0.0, &cfg, None).map_err(|e| e.to_string())?;
    let trivial = ModelSpec::cylinder(3.0, 24, 24);
    let (triv, _) = spectrum_report(&trivial, 0.0, &cfg).map_err(|e| e.to_string())?;
    let transport_refused = matches!(
        ballistic_transport(&trivial, 0.0, &cfg, None),
        Err(ref e @ Error::NoGapStates(_)) if e.to_string().contains("no gap states")
    );
    let checks = [
        ("gap filling >= 0.9", rep.gap_filling >= 0.9),
        ("alpha >= 1.8", trace.fit.alpha >= 1.8),
        ("Kramers <= 1e-8", rep.kramers_residual <= 1e-8),
        ("trivial filling 0", triv.gap_filling == 0.0),
        ("trivial transport refused", transport_refused),
    ];
    for (name, pass) in checks {
        writeln!(log, "    {name}: {}", if pass { "met" } else { "not met" }).unwrap();
    }
    Ok((
        checks.iter().all(|c| c.1),
        format!(
            "m=1 24x24: gap filling {:.3} at |Delta|/{}, band-resolved edge coverage {:.3}, alpha {:.3} +- {:.3}, \
             Kramers {:.1e}; m=3: filling {:.3}, transport refused {}",
            rep.gap_filling, rep.bins, rep.edge_coverage, trace.fit.alpha, trace.fit.stderr, rep.kramers_residual,
            triv.gap_filling, transport_refused
        ),
    ))
}

const CLI_CONFIG: &str = r#"
[model]
m = 1.0
Lx = 8
Ly = 8
boundary_x = "periodic"
boundary_y = "periodic"

[spectra]
k_points = 32
time_steps = 12

[wold]
fixture = { kind = "random", dim = 16, seed = 4 }

[scan]
m = [1.0, 3.0]
disorder = [{ lambda_r = 0.3, w = 0.5 }]
seeds = [1]
"#;

fn cli_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    fs::write(dir.join("run.toml"), CLI_CONFIG).map_err(|e| e.to_string())?;
    let runs: [&[&str]; 7] = [
        &["index", "bulk"],
        &["index", "edge"],
        &["index", "compare"],
        &["wold", "run"],
        &["edge", "spectrum"],
        &["edge", "transport"],
        &["model", "export"],
    ];
    for args in runs {
        let out = Command::new(env!("CARGO_BIN_EXE_kramers"))
            .current_dir(dir)
            .args(["--config", "run.toml", "--seed", "9"])
            .args(args)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(String::from_utf8_lossy(&out.stderr).into_owned());
        }
    }
    let mut files = Vec::new();
    for e in fs::read_dir(dir.join("out")).map_err(|e| e.to_string())? {
        let e = e.map_err(|e| e.to_string())?;
        files.push((e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).map_err(|e| e.to_string())?));
    }
    files.sort();
    Ok(files)
}

fn criterion_8() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (fa, fb) = (cli_outputs(a.path())?, cli_outputs(b.path())?);
    let differing: Vec<&str> = fa
        .iter()
        .zip(&fb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    let ok = fa.len() == fb.len() && !fa.is_empty() && differing.is_empty();
    Ok((ok, format!("{} artifacts from 7 commands compared, differing: {:?}", fa.len(), differing)))
}

fn main() {
    // `cargo test -- --list` and filters come through here too
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    let start = Instant::now();
    let all = match instances() {
        Ok(v) => v,
        Err(e) => {
            println!("FAIL could not build the pair ensemble: {e}");
            return;
        }
    };
    let mut log = String::new();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut String) -> Outcome + '_>)> = vec![
        ("bulk-edge correspondence scan", Box::new(criterion_1)),
        ("finite-dimension parity", Box::new(|_| criterion_2(&all))),
        ("decoupling contract", Box::new(|_| criterion_3(&all))),
        ("algebraic identities", Box::new(|_| criterion_4(&all))),
        ("chain and shift mechanism", Box::new(|_| criterion_5())),
        ("appendix suite", Box::new(|_| criterion_6())),
        ("edge spectrum proxies", Box::new(criterion_7)),
        ("CLI determinism", Box::new(|_| criterion_8())),
    ];
    // KRAMERS_ACCEPTANCE=2,4 runs a subset
    let only: Option<Vec<usize>> = std::env::var("KRAMERS_ACCEPTANCE")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let total = only.as_ref().map_or(criteria.len(), Vec::len);
    let mut passed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        log.clear();
        let t = Instant::now();
        let (ok, detail) = match run(&mut log) {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        passed += usize::from(ok);
        println!(
            "{} {} {}: {} [{:.0}s]",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            name,
            detail,
            t.elapsed().as_secs_f64()
        );
        print!("{log}");
    }
    println!("acceptance: {passed}/{total} criteria passed in {:.0}s", start.elapsed().as_secs_f64());
}
