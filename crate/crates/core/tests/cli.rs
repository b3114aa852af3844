use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use stable_spline::cli::{CompletionReport, IdentifyReport, KernelReport};
use stable_spline::kernel::build_kernel;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stable-spline"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn kernel_logdet() {
    let o = run(&["kernel", "--n", "3", "--alpha", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: KernelReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((r.logdet - 0.00390625_f64.ln()).abs() < 1e-12);
    assert_eq!(r.inverse.diag, vec![4.0, 12.0, 16.0]);
}

#[test]
fn kernel_scalar() {
    let o = run(&["kernel", "--n", "1", "--alpha", "0.3", "--lambda", "2"]);
    let r: KernelReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.k, vec![vec![0.6]]);
}

#[test]
fn kernel_round_trips_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("k.json");
    let o = run(&["kernel", "--n", "7", "--alpha", "0.83", "--lambda", "3.1", "--out", path_str(&out)]);
    assert!(o.status.success());
    let r: KernelReport = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    let k = build_kernel(7, 0.83, 3.1).unwrap();
    for i in 0..7 {
        for j in 0..7 {
            assert_eq!(r.k[i][j].to_bits(), k[(i, j)].to_bits());
        }
    }
}

#[test]
fn kernel_csv() {
    let o = run(&["kernel", "--n", "2", "--alpha", "0.5", "--format", "csv"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("quantity,i,j,value\nK,1,1,5.0000000000000000e-1\n"));
}

#[test]
fn kernel_alpha_domain_error() {
    let o = run(&["kernel", "--alpha", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--alpha"), "{}", stderr(&o));
}

#[test]
fn unknown_flag_is_input_error() {
    let o = run(&["kernel", "--alpha", "0.5", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn complete_tc_band_gives_kernel() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("band.json");
    fs::write(
        &input,
        r#"{"n":4,"m":1,"diagonals":[[0.5,0.25,0.125,0.0625],[0.25,0.125,0.0625]]}"#,
    )
    .unwrap();
    let o = run(&["complete", "--input", path_str(&input)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: CompletionReport = serde_json::from_str(&stdout(&o)).unwrap();
    let k = build_kernel(4, 0.5, 1.0).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            assert!((r.matrix[i][j] - k[(i, j)]).abs() < 1e-12);
        }
    }
    assert_eq!(r.l.len(), 4);
    assert_eq!(r.v.len(), 4);
    assert!((r.logdet - k.lu().determinant().ln()).abs() < 1e-10);
}

#[test]
fn complete_full_band_echoes_input() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("band.json");
    fs::write(&input, r#"{"n":3,"m":2,"diagonals":[[2,3,4],[0.5,0.25],[0.1]]}"#).unwrap();
    let o = run(&["complete", "--input", path_str(&input)]);
    let r: CompletionReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(
        r.matrix,
        vec![vec![2.0, 0.5, 0.1], vec![0.5, 3.0, 0.25], vec![0.1, 0.25, 4.0]]
    );
}

#[test]
fn complete_infeasible_exit_3() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("band.json");
    fs::write(&input, r#"{"n":2,"m":1,"diagonals":[[1,1],[2]]}"#).unwrap();
    let o = run(&["complete", "--input", path_str(&input)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("block 1 not positive definite"));
}

#[test]
fn complete_malformed_exit_1() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("band.json");
    fs::write(&input, r#"{"n":2,"m":1,"diagonals":[[1,1]]}"#).unwrap();
    assert_eq!(run(&["complete", "--input", path_str(&input)]).status.code(), Some(1));
    let missing = dir.path().join("absent.json");
    assert_eq!(run(&["complete", "--input", path_str(&missing)]).status.code(), Some(1));
}

#[test]
fn simulate_is_deterministic_and_records_seed() {
    let a = run(&["simulate", "--n", "5", "--samples", "40", "--seed", "9"]);
    let b = run(&["simulate", "--n", "5", "--samples", "40", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("# seed: 9\nt,u,y\n"));
    assert_eq!(stdout(&a).lines().count(), 42);
}

#[test]
fn simulate_then_identify() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("data.csv");
    let truth = dir.path().join("truth.json");
    let o = run(&[
        "simulate", "--seed", "5", "--out", path_str(&data), "--truth", path_str(&truth),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(&["identify", "--data", path_str(&data), "--n", "50", "--truth", path_str(&truth)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: IdentifyReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r.estimate.f_hat.len(), 50);
    assert!(r.fit.unwrap() > 80.0, "fit {:?}", r.fit);
    let again = run(&["identify", "--data", path_str(&data), "--n", "50", "--truth", path_str(&truth)]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn identify_zero_output() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("zero.csv");
    let mut text = String::from("t,u,y\n");
    for t in 1..=40 {
        text.push_str(&format!("{t},{},0\n", ((t * 7) % 5) as f64 - 2.0));
    }
    fs::write(&data, text).unwrap();
    let o = run(&["identify", "--data", path_str(&data), "--n", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: IdentifyReport = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(r.estimate.f_hat.iter().all(|&v| v == 0.0));
    assert!(r.fit.is_none());
}

#[test]
fn identify_missing_column() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("bad.csv");
    fs::write(&data, "t,u\n1,0.5\n2,0.1\n").unwrap();
    let o = run(&["identify", "--data", path_str(&data)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`y`"), "{}", stderr(&o));
}

#[test]
fn identify_rejects_bad_bounds() {
    let dir = TempDir::new().unwrap();
    let data = dir.path().join("d.csv");
    assert!(run(&["simulate", "--samples", "60", "--n", "5", "--out", path_str(&data)]).status.success());
    let o = run(&["identify", "--data", path_str(&data), "--alpha-max", "1.5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_none_is_empty() {
    let o = run(&["verify", "--suites", "none"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0/0 suites passed"));
}

#[test]
fn verify_inverse_identity_n30() {
    let o = run(&["verify", "--n-max", "30", "--suites", "inverse-identity"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let line = stdout(&o)
        .lines()
        .find(|l| l.starts_with("inverse-identity"))
        .unwrap()
        .to_owned();
    assert!(line.contains("PASS") && line.contains("max residual"), "{line}");
}

#[test]
fn verify_unknown_suite() {
    assert_eq!(run(&["verify", "--suites", "nope"]).status.code(), Some(2));
}
