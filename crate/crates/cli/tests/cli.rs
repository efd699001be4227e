use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const MODEL: &str = r#"
[model]
m = 1.0
Lx = 8
Ly = 8
boundary_x = "periodic"
boundary_y = "periodic"

[spectra]
k_points = 32
time_steps = 12
"#;

fn kramers(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kramers"))
        .current_dir(cwd)
        .args(args)
        .output()
        .unwrap()
}

fn workspace(config: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

/// Every file under `out`, sorted by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir.join("out"))
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn malformed_config_fails_without_outputs() {
    let dir = workspace("[model]\nm = \"one\"\n");
    let out = kramers(dir.path(), &["--config", "run.toml", "index", "bulk"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid configuration"));
    assert!(out.stdout.is_empty());
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_keys_and_bad_values_are_refused() {
    let dir = workspace(&format!("{MODEL}\n[tolerance]\nplateau_decades = 2\n"));
    assert!(!kramers(dir.path(), &["--config", "run.toml", "index", "bulk"]).status.success());
    let dir = workspace(MODEL);
    let out = kramers(dir.path(), &["--config", "run.toml", "index", "bulk", "--tol-sweep", "0.1,-1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_model_is_a_config_error() {
    let dir = workspace("");
    let out = kramers(dir.path(), &["--config", "run.toml", "edge", "spectrum"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[model]"));
}

#[test]
fn solver_refusal_leaves_no_partial_outputs() {
    // depth 16 on a 32-site chain with arc 0..=15 exceeds the clean depth
    let dir = workspace("[wold]\nfixture = { kind = \"synthetic\", sites = 32, arc = 15 }\n");
    let out = kramers(dir.path(), &["--config", "run.toml", "wold", "run", "--depth", "16"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("depth"));
    assert!(!dir.path().join("out").exists());
    ok(&kramers(dir.path(), &["--config", "run.toml", "wold", "run"]));
    let mech = &json(&dir.path().join("out/wold.json"))["result"]["chain_mechanism"];
    assert_eq!(mech["depth"], 15);
    assert!(mech["shift"]["forward_shift"].as_f64().unwrap() <= 1e-8);
}

#[test]
fn bulk_report_embeds_config_and_version() {
    let dir = workspace(MODEL);
    ok(&kramers(dir.path(), &["--config", "run.toml", "--seed", "7", "index", "bulk", "--filter-radius", "2.5"]));
    let report = json(&dir.path().join("out/bulk_index.json"));
    assert_eq!(report["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config"]["model"]["seed"], 7);
    assert_eq!(report["config"]["tolerance"]["filter_radius"], 2.5);
    assert_eq!(report["status"], "1");
    let csv = fs::read_to_string(dir.path().join("out/bulk_spectrum.csv")).unwrap();
    assert!(csv.starts_with("index,eigenvalue,distance_to_one,weight,rms_radius\n"));
    assert_eq!(csv.lines().count(), 1 + 4 * 64);
}

#[test]
fn compare_scan_agrees_where_determined() {
    let cfg = format!("{MODEL}\n[scan]\nm = [1.0, 2.5, 3.0]\n");
    let dir = workspace(&cfg);
    ok(&kramers(dir.path(), &["--config", "run.toml", "index", "compare"]));
    let csv = fs::read_to_string(dir.path().join("out/compare.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "m,lambda_r,w,seed,z2_bulk,z2_edge,status");
    assert_eq!(&lines[1..], ["1.0,0.0,0.0,0,1,1,agree", "2.5,0.0,0.0,0,0,0,agree", "3.0,0.0,0.0,0,0,0,agree"]);
}

#[test]
fn wold_pair_file_reproduces_the_fixture_run() {
    let dir = workspace("[wold]\nfixture = { kind = \"ring\", sites = 12, arc = 5 }\n");
    ok(&kramers(dir.path(), &["--config", "run.toml", "wold", "run"]));
    let first = json(&dir.path().join("out/wold.json"));
    assert_eq!(first["status"], "even");
    assert!(first["result"]["decoupling"]["diagnostics"]["intertwining"].as_f64().unwrap() <= 1e-9);
    fs::rename(dir.path().join("out/pair.cmat"), dir.path().join("pair.cmat")).unwrap();
    ok(&kramers(dir.path(), &["wold", "run", "--input", "pair.cmat", "--out-dir", "again"]));
    let second = json(&dir.path().join("again/wold.json"));
    assert_eq!(first["result"], second["result"]);
    assert_eq!(
        fs::read(dir.path().join("out/wold.cmat")).unwrap(),
        fs::read(dir.path().join("again/wold.cmat")).unwrap()
    );
}

#[test]
fn trivial_transport_is_a_status_not_a_failure() {
    let dir = workspace(&MODEL.replace("m = 1.0", "m = 3.0"));
    ok(&kramers(dir.path(), &["--config", "run.toml", "edge", "transport"]));
    assert_eq!(json(&dir.path().join("out/transport.json"))["status"], "no-gap-states");
    assert_eq!(fs::read_to_string(dir.path().join("out/transport.csv")).unwrap(), "t,mean,spread\n");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = format!(
        "{MODEL}\n[wold]\nfixture = {{ kind = \"random\", dim = 12, seed = 3 }}\n\
         [scan]\nm = [1.0, 3.0]\ndisorder = [{{ lambda_r = 0.3, w = 0.5 }}]\nseeds = [1, 2]\n"
    );
    let runs: Vec<&[&str]> = vec![
        &["index", "bulk"],
        &["index", "edge"],
        &["wold", "run"],
        &["edge", "spectrum"],
        &["edge", "transport"],
        &["model", "export"],
    ];
    let (a, b) = (workspace(&cfg), workspace(&cfg));
    for args in &runs {
        for dir in [&a, &b] {
            let mut full = vec!["--config", "run.toml", "--seed", "5"];
            full.extend_from_slice(args);
            ok(&kramers(dir.path(), &full));
        }
    }
    // worker count must not leak into the scan output
    ok(&kramers(a.path(), &["--config", "run.toml", "--workers", "1", "index", "compare"]));
    ok(&kramers(b.path(), &["--config", "run.toml", "--workers", "3", "index", "compare"]));
    let (sa, sb) = (snapshot(a.path()), snapshot(b.path()));
    assert_eq!(sa.len(), 15);
    for ((na, ba), (nb, bb)) in sa.iter().zip(&sb) {
        assert_eq!(na, nb);
        assert!(ba == bb, "{na} differs between runs");
    }
}
