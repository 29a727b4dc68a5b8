//! End-to-end tests that spawn the real binary.

use stablesketch_cli::files;
use stablesketch::rng;
use stablesketch::Matrix;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_stablesketch");

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stablesketch-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn random_matrix_file(path: &Path, rows: usize, cols: usize, seed: u64) {
    let mut r = rng::rng_from(seed);
    let mut buf = vec![0.0; rows * cols];
    rng::fill_normal(&mut r, &mut buf);
    files::write_matrix(path, &Matrix::from_vec(rows, cols, buf).unwrap()).unwrap();
}

/// Every data row of a CSV has the header's column count, and the last
/// row is the summary.
fn check_csv(path: &Path) -> Vec<Vec<String>> {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n'), "trailing newline");
    assert!(!text.contains('\r'), "LF endings only");
    let rows: Vec<Vec<String>> = text
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    let width = rows[0].len();
    for row in &rows {
        assert_eq!(row.len(), width, "constant column count in {path:?}");
    }
    assert_eq!(rows.last().unwrap()[0], "summary");
    rows
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let out = run(&[]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("usage:"));
}

#[test]
fn unknown_command_exits_2() {
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("frobnicate"));
}

#[test]
fn gen_is_deterministic_and_seed_sensitive() {
    let dir = scratch("gen");
    let p1 = dir.join("a1.mat");
    let p2 = dir.join("a2.mat");
    let p3 = dir.join("a3.mat");
    let base = ["gen", "n=24", "d=6", "spectrum=geom:0.5", "seed=7"];
    assert_eq!(code(&run(&[&base[..], &[&format!("out={}", p1.display())]].concat())), 0);
    assert_eq!(code(&run(&[&base[..], &[&format!("out={}", p2.display())]].concat())), 0);
    let out3 = run(&["gen", "n=24", "d=6", "spectrum=geom:0.5", "seed=8",
        &format!("out={}", p3.display())]);
    assert_eq!(code(&out3), 0);
    let b1 = std::fs::read(&p1).unwrap();
    assert_eq!(b1, std::fs::read(&p2).unwrap(), "same config, same bytes");
    assert_ne!(b1, std::fs::read(&p3).unwrap(), "seed matters");
    let a = files::read_matrix(&p1).unwrap();
    assert_eq!((a.rows(), a.cols()), (24, 6));
}

#[test]
fn gen_rejects_bad_spectrum_naming_the_key() {
    let dir = scratch("genbad");
    let out = run(&["gen", "n=8", "d=4", "spectrum=exp:2",
        &format!("out={}", dir.join("x.mat").display())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("spectrum"), "stderr: {}", stderr(&out));
}

#[test]
fn malformed_values_exit_2_and_name_the_key() {
    let dir = scratch("badval");
    let a = dir.join("a.mat");
    random_matrix_file(&a, 16, 4, 1);
    let out = run(&["amm", &format!("a={}", a.display()), &format!("b={}", a.display()),
        "k=oops", "eps=0.5", "family=gaussian", "m=8"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("'k'"), "stderr: {}", stderr(&out));

    let out = run(&["amm", &format!("a={}", a.display()), &format!("b={}", a.display()),
        "k=2", "eps=0.5", "family=gaussian", "m=8", "bogus=1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bogus"), "stderr: {}", stderr(&out));
}

#[test]
fn amm_identity_hook_is_exact() {
    let dir = scratch("ammid");
    let a = dir.join("a.mat");
    let b = dir.join("b.mat");
    random_matrix_file(&a, 20, 5, 2);
    random_matrix_file(&b, 20, 3, 3);
    let csv = dir.join("amm.csv");
    let out = run(&["amm", &format!("a={}", a.display()), &format!("b={}", b.display()),
        "k=2", "eps=0.3", "family=identity", "trials=4",
        &format!("out={}", csv.display())]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = check_csv(&csv);
    assert_eq!(rows[0], ["trial", "error", "bound", "pass"]);
    assert_eq!(rows.len(), 1 + 4 + 1);
    for row in &rows[1..5] {
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.0, "identity is exact");
        assert_eq!(row[3], "1");
    }
}

#[test]
fn amm_failure_predicate_drives_exit_1() {
    let dir = scratch("ammfail");
    let a = dir.join("a.mat");
    random_matrix_file(&a, 32, 8, 4);
    // One Gaussian row at a demanding tolerance fails essentially always.
    let out = run(&["amm", &format!("a={}", a.display()), &format!("b={}", a.display()),
        "k=8", "eps=0.01", "family=gaussian", "m=1", "trials=10", "max_fail=0.5"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn config_file_is_loaded_and_flags_override() {
    let dir = scratch("cfg");
    let file = dir.join("run.cfg");
    let out_a = dir.join("a.mat");
    let out_b = dir.join("b.mat");
    std::fs::write(&file, format!("n=12\nd=3\n# comment\nseed=5\nout={}\n", out_a.display()))
        .unwrap();
    assert_eq!(code(&run(&["gen", &format!("config={}", file.display())])), 0);
    assert_eq!(code(&run(&["gen", &format!("config={}", file.display()),
        &format!("out={}", out_b.display())])), 0);
    assert!(out_a.exists() && out_b.exists());
    assert_eq!(std::fs::read(&out_a).unwrap(), std::fs::read(&out_b).unwrap());
}

#[test]
fn bss_writes_selection_and_verification_line() {
    let dir = scratch("bss");
    let a = dir.join("a.mat");
    // Rows scaled so ‖A‖ = 1 and ‖A‖_F² ≤ k.
    let mut r = rng::rng_from(9);
    let mut buf = vec![0.0; 48 * 4];
    rng::fill_normal(&mut r, &mut buf);
    let raw = Matrix::from_vec(48, 4, buf).unwrap();
    let norm = stablesketch::matcore::spectral_norm(&raw).unwrap();
    files::write_matrix(&a, &raw.scale(1.0 / norm)).unwrap();

    let sel_path = dir.join("sel.txt");
    let out = run(&["bss", &format!("a={}", a.display()), "k=4", "eps=0.6",
        &format!("out={}", sel_path.display())]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let line = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(line.contains("nnz=") && line.contains("pass=true"), "stdout: {line}");
    let sel = files::read_selection(&sel_path).unwrap();
    assert!(sel.nnz > 0 && sel.nnz <= (9.0_f64 * 4.0 / 0.36).ceil() as usize);

    // Same input, same bytes.
    let sel2_path = dir.join("sel2.txt");
    let out2 = run(&["bss", &format!("a={}", a.display()), "k=4", "eps=0.6",
        &format!("out={}", sel2_path.display())]);
    assert_eq!(code(&out2), 0);
    assert_eq!(std::fs::read(&sel_path).unwrap(), std::fs::read(&sel2_path).unwrap());
}

#[test]
fn bss_rejects_unnormalized_input_with_exit_2() {
    let dir = scratch("bssbad");
    let a = dir.join("a.mat");
    random_matrix_file(&a, 16, 4, 10); // spectral norm well above 1
    let out = run(&["bss", &format!("a={}", a.display()), "k=4", "eps=0.5",
        &format!("out={}", dir.join("sel.txt").display())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn regress_reports_pass_rows() {
    let dir = scratch("regress");
    let a = dir.join("a.mat");
    let b = dir.join("b.mat");
    random_matrix_file(&a, 64, 4, 11);
    random_matrix_file(&b, 64, 2, 12);
    let csv = dir.join("r.csv");
    let out = run(&["regress", &format!("a={}", a.display()), &format!("b={}", b.display()),
        "k=8", "eps=0.5", "family=gaussian", "m=48", "trials=5", "seed=1",
        &format!("out={}", csv.display())]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = check_csv(&csv);
    assert_eq!(rows[0], ["trial", "err_sq", "bound", "pass"]);
    let summary = rows.last().unwrap();
    assert!(summary[2].parse::<f64>().unwrap() >= 0.9);
}

#[test]
fn verify_conditions_identity_low_rank_passes() {
    let dir = scratch("vc");
    let a = dir.join("a.mat");
    // Rank-1: the low-rank branch applies and the identity sketch has
    // zero distortion on it.
    let mut col = vec![0.0; 40];
    let mut r = rng::rng_from(13);
    rng::fill_normal(&mut r, &mut col);
    let u = Matrix::from_vec(40, 1, col).unwrap();
    let mut row = vec![0.0; 3];
    rng::fill_normal(&mut r, &mut row);
    let v = Matrix::from_vec(1, 3, row).unwrap();
    files::write_matrix(&a, &stablesketch::matcore::matmul(&u, &v)).unwrap();

    let csv = dir.join("vc.csv");
    let out = run(&["verify-conditions", &format!("a={}", a.display()),
        &format!("b={}", a.display()), "k=4", "eps=0.5", "family=identity",
        &format!("out={}", csv.display())]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = check_csv(&csv);
    assert_eq!(rows[0], ["kind", "level", "dimension", "value", "threshold", "pass"]);
    assert!(rows.iter().skip(1).all(|r| r[5] == "1"));
}

#[test]
fn krr_runs_and_reports_gaps() {
    let dir = scratch("krr");
    let pts = dir.join("pts.mat");
    let yf = dir.join("y.mat");
    random_matrix_file(&pts, 32, 2, 14);
    random_matrix_file(&yf, 32, 1, 15);
    let csv = dir.join("krr.csv");
    let out = run(&["krr", &format!("points={}", pts.display()), "bandwidth=1.5",
        &format!("y={}", yf.display()), "lambda=0.001", "family=gaussian", "m=24",
        "trials=3", &format!("out={}", csv.display())]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = check_csv(&csv);
    assert_eq!(rows[0], ["trial", "gap", "max_gap", "pass"]);
    for row in &rows[1..4] {
        assert!(row[1].parse::<f64>().unwrap().is_finite());
    }
}

#[test]
fn calibrate_prints_a_constant() {
    let dir = scratch("cal");
    let a = dir.join("a.mat");
    let b = dir.join("b.mat");
    let make = |path: &Path, seed: u64| {
        let spectrum: Vec<f64> = (0..8).map(|i| 2f64.powf(-(i as f64) / 2.0)).collect();
        let m = stablesketch::solvers::gen_decay(64, 8, &spectrum, seed).unwrap();
        files::write_matrix(path, &m).unwrap();
    };
    make(&a, 21);
    make(&b, 22);
    let out = run(&["calibrate", &format!("a={}", a.display()), &format!("b={}", b.display()),
        "family=gaussian", "k=4", "eps=0.4", "delta=0.1", "trials=50", "seed=3"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(text.starts_with("c="), "stdout: {text}");
    let c: f64 = text.trim()[2..].parse().unwrap();
    assert!(c > 0.0 && c <= 16.0);

    let again = run(&["calibrate", &format!("a={}", a.display()), &format!("b={}", b.display()),
        "family=gaussian", "k=4", "eps=0.4", "delta=0.1", "trials=50", "seed=3"]);
    assert_eq!(String::from_utf8_lossy(&again.stdout), text, "calibration is deterministic");
}

#[test]
fn ose_moment_identity_is_zero() {
    let dir = scratch("ose");
    let csv = dir.join("ose.csv");
    let out = run(&["ose-moment", "n=24", "d=4", "family=identity", "ell=2", "trials=5",
        "max=0.1", &format!("out={}", csv.display())]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = check_csv(&csv);
    assert_eq!(rows[0], ["statistic", "value"]);
    let moment: f64 = rows[1][1].parse().unwrap();
    assert!(moment.abs() <= 1e-12, "identity distorts nothing, got {moment}");
}

#[test]
fn lowrank_identity_recovers_truncation() {
    let dir = scratch("lr");
    let a = dir.join("a.mat");
    let spectrum: Vec<f64> = (0..12).map(|i| 1.0 / (i + 1) as f64).collect();
    let m = stablesketch::solvers::gen_decay(48, 12, &spectrum, 31).unwrap();
    files::write_matrix(&a, &m).unwrap();
    let csv = dir.join("lr.csv");
    let out = run(&["lowrank", &format!("a={}", a.display()), "k=3", "eps=0.5",
        "family=identity", "trials=2", &format!("out={}", csv.display())]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let rows = check_csv(&csv);
    // With the identity the error equals the optimum, well inside the bound.
    for row in &rows[1..3] {
        assert_eq!(row[3], "1");
    }
}
