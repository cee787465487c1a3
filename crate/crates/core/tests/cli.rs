use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bs-spectra"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--out").arg(dir).args(args).output().unwrap()
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

const FAST_PROFILE: [&str; 4] = ["--resolution", "128", "--grid-size", "60"];

#[test]
fn spectrum_k50_has_100_rows_and_is_symmetric() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["spectrum", "--k", "50"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (header, rows) = read_csv(&dir.path().join("spectrum.csv"));
    assert_eq!(header, "k,j,lambda,residual");
    assert_eq!(rows.len(), 100);
    let lambdas: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    for j in 0..100 {
        assert!((lambdas[j] + lambdas[99 - j]).abs() < 1e-10);
        assert_eq!(rows[j][1], j as f64);
    }
}

#[test]
fn k_list_is_sorted_and_concatenated() {
    let dir = TempDir::new().unwrap();
    assert!(run_in(dir.path(), &["spectrum", "--k-list", "3,1,3"]).status.success());
    let (_, rows) = read_csv(&dir.path().join("spectrum.csv"));
    let ks: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    assert_eq!(ks, vec![1.0, 1.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0]);
}

#[test]
fn zero_k_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["spectrum", "--k", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("spectrum.csv").exists());
}

#[test]
fn missing_symbol_file_is_named() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope.sym");
    let out = run_in(dir.path(), &["spectrum", "--k", "4", "--symbol", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.sym"));
}

#[test]
fn malformed_symbol_file_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.sym");
    std::fs::write(&bad, "1 0 oops 0\n").unwrap();
    let out = run_in(dir.path(), &["spectrum", "--k", "4", "--symbol", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.sym"));
}

#[test]
fn bundled_symbol_file_is_harper() {
    let dir = TempDir::new().unwrap();
    let sym = concat!(env!("CARGO_MANIFEST_DIR"), "/data/harper.sym");
    assert!(run_in(dir.path(), &["operator", "--k", "7", "--symbol", sym]).status.success());
    let from_file = std::fs::read(dir.path().join("operator_k7.csv")).unwrap();
    assert!(run_in(dir.path(), &["operator", "--k", "7"]).status.success());
    assert_eq!(from_file, std::fs::read(dir.path().join("operator_k7.csv")).unwrap());
}

#[test]
fn outputs_are_deterministic_across_thread_policies() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let mut args = vec!["verify", "--k-list", "20,40"];
    args.extend(FAST_PROFILE);
    assert!(run_in(a.path(), &args).status.success());
    let mut seq = vec!["--sequential"];
    seq.extend(&args);
    assert!(run_in(b.path(), &seq).status.success());
    for name in ["verify_k20.csv", "zoom_k40.csv", "verify_summary.json"] {
        assert_eq!(
            std::fs::read(a.path().join(name)).unwrap(),
            std::fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn thread_cap_is_validated() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .env("BS_SPECTRA_THREADS", "zero")
        .arg("--out")
        .arg(dir.path())
        .args(["spectrum", "--k", "2"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_summary_matches_schema_and_zoom_file() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["verify", "--k", "60", "--levels=-2.5,-2.2"];
    args.extend(FAST_PROFILE);
    let out = run_in(dir.path(), &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let schema_path = concat!(env!("CARGO_MANIFEST_DIR"), "/schemas/verify_summary.schema.json");
    let schema: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify_summary.json")).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(&summary).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");

    let run = &summary["runs"][0];
    assert_eq!(run["k"], 60);
    assert_eq!(run["counting"].as_array().unwrap().len(), 2);
    let (header, zoom) = read_csv(&dir.path().join("zoom_k60.csv"));
    assert_eq!(header, "k,j,lambda,E_pred,residual,gap_ratio");
    assert_eq!(zoom.len() as u64, run["zoom"]["eigenvalues"].as_u64().unwrap());
    let hi = run["zoom"]["hi"].as_f64().unwrap();
    assert!(zoom.iter().all(|r| r[2] <= hi));
    let (_, full) = read_csv(&dir.path().join("verify_k60.csv"));
    assert_eq!(full.len() as u64, run["rows"].as_u64().unwrap());
}

#[test]
fn profile_and_symbol_grid_outputs() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["profile"];
    args.extend(FAST_PROFILE);
    assert!(run_in(dir.path(), &args).status.success());
    let (header, rows) = read_csv(&dir.path().join("profile.csv"));
    assert_eq!(header, "E,c0,f0");
    assert_eq!(rows.len(), 61);
    assert!(rows.windows(2).all(|w| w[1][0] > w[0][0] && w[1][2] > w[0][2]));

    assert!(run_in(dir.path(), &["symbol-grid", "--resolution", "8"]).status.success());
    let (header, rows) = read_csv(&dir.path().join("symbol_grid.csv"));
    assert_eq!(header, "q,p,value");
    assert_eq!(rows.len(), 64);
    assert!(rows.iter().any(|r| r[0] == 0.5 && r[1] == 0.5 && (r[2] + 4.0).abs() < 1e-12));
}

#[test]
fn sweep_and_eigfun_outputs() {
    let dir = TempDir::new().unwrap();
    assert!(run_in(dir.path(), &["sweep", "--k-list", "20,40,80", "--j-max", "2"]).status.success());
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(header, "j,slope,intercept");
    assert_eq!(rows.len(), 3);
    assert!(rows[0][1] < -1.5);

    let out = run_in(dir.path(), &["eigfun", "--k", "10", "--resolution", "32"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("concentration="));
    let (_, rows) = read_csv(&dir.path().join("eigfun_k10.csv"));
    assert_eq!(rows.len(), 32 * 32);
}

#[test]
fn cap_above_separatrix_is_a_contract_failure() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["verify", "--k", "10", "--e-cap", "0.5"];
    args.extend(FAST_PROFILE);
    assert_eq!(run_in(dir.path(), &args).status.code(), Some(1));
}
