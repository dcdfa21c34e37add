use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hypokit::gallery::ck;
use hypokit::io::parse_matrix;
use hypokit::lorentz::{random_field, LorentzField};
use hypokit::random::seeded_rng;

fn hypokit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hypokit")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 output")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 output")
}

/// Fresh directory under the target dir for this test's files.
fn scratch(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(dir: &Path, file: &str, text: &str) -> String {
    let path = dir.join(file);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn gallery_file(dir: &Path, name: &str, size: &str) -> String {
    let out = hypokit(&["gallery", name, size]);
    assert!(out.status.success(), "{}", stderr(&out));
    write(dir, &format!("{name}{size}.json"), &stdout(&out))
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(out)).expect("valid json output")
}

#[test]
fn gallery_matrix_round_trips() {
    let out = hypokit(&["gallery", "ck", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let m = parse_matrix(&stdout(&out)).unwrap();
    assert_eq!(m, ck(2).unwrap());
    assert_eq!(stdout(&hypokit(&["gallery", "ck", "2"])), stdout(&out));
}

#[test]
fn analyze_ck_reports_index_one_for_every_method() {
    let dir = scratch("analyze");
    let input = gallery_file(&dir, "ck", "2");
    let out = hypokit(&["analyze", "--input", &input]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["index"], 1);
    for method in ["c_powers_left", "c_powers_right", "commutators", "j_powers"] {
        assert_eq!(v["audit"]["index_per_method"][method], 1, "{method}");
    }
    assert_eq!(v["stability"]["stable"], true);
    assert_eq!(v["short_time_fit"]["a_rounded"], 3);
}

#[test]
fn analyze_without_decay_keeps_the_fit_error() {
    let dir = scratch("analyze_obstructed");
    let input = write(&dir, "skew.json", r#"{"n_rows":2,"n_cols":2,"entries":[0,1,-1,0]}"#);
    let out = hypokit(&["analyze", "--input", &input]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert!(v["index"].is_null());
    assert!(v["short_time_fit"].is_null());
    assert!(v["short_time_fit_error"].as_str().unwrap().contains("no decay"));
}

#[test]
fn decay_csv_has_one_row_per_step() {
    let dir = scratch("decay");
    let input = gallery_file(&dir, "ck", "1");
    let out = hypokit(&["decay", "--input", &input, "--tmax", "3", "--steps", "300"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 302);
    assert_eq!(lines[0], "t,norm");
    assert_eq!(lines[1], "0,1");
    assert!(!text.contains('\r'));
}

#[test]
fn decay_json_and_output_file() {
    let dir = scratch("decay_json");
    let input = gallery_file(&dir, "ek", "3");
    let target = dir.join("curve.json");
    let out = hypokit(&["decay", "--input", &input, "--format", "json", "--steps", "4", "--output", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(target).unwrap()).unwrap();
    assert_eq!(v["norms"].as_array().unwrap().len(), 5);
}

#[test]
fn staircase_of_ek_passes_its_checks() {
    let dir = scratch("staircase");
    let input = gallery_file(&dir, "ek", "4");
    let out = hypokit(&["staircase", "--input", &input]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["block_dims"], serde_json::json!([1, 1, 1, 1, 0]));
    assert_eq!(v["report"]["violations"], serde_json::json!([]));
}

#[test]
fn coarse_rank_tolerance_is_a_property_violation() {
    let dir = scratch("staircase_violation");
    let input = gallery_file(&dir, "ek", "4");
    let out = hypokit(&["staircase", "--input", &input, "--tol-rank", "0.9"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!json(&out)["report"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn lorentz_kappa_at_m200() {
    let out = hypokit(&["lorentz", "kappa", "--M", "200"]);
    assert_eq!(out.status.code(), Some(0));
    let kappa = json(&out)["kappa"].as_f64().unwrap();
    assert!((kappa - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-3);
    let csv = stdout(&hypokit(&["lorentz", "kappa", "--M", "25", "--format", "csv"]));
    assert!(csv.starts_with("M,kappa\n25,"));
}

#[test]
fn lorentz_lyapunov_certifies_small_modes() {
    let out = hypokit(&["lorentz", "lyapunov", "--M", "16", "--N", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["margins"].as_array().unwrap().len(), 5);
    assert_eq!(v["certified"], true);
    let csv = stdout(&hypokit(&["lorentz", "lyapunov", "--M", "16", "--N", "3", "--format", "csv"]));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn lorentz_constants_and_verify() {
    let out = hypokit(&["lorentz", "constants", "--M", "32"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["all_positive"], true);
    assert_eq!(v["relation_residual"], 0.0);

    let out = hypokit(&["lorentz", "verify", "--N", "2", "--M", "32", "--steps", "6"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["report"]["passed"], true);
    assert_eq!(v["report"]["modes_checked"], 5);
}

#[test]
fn lorentz_simulate_is_deterministic() {
    let args = ["lorentz", "simulate", "--N", "3", "--M", "8", "--steps", "5", "--seed", "7"];
    let first = hypokit(&args);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    assert_eq!(stdout(&first), stdout(&hypokit(&args)));
    let text = stdout(&first);
    assert!(text.starts_with("t,distance,bound\n"));
    assert_eq!(text.lines().count(), 7);
}

#[test]
fn lorentz_simulate_reads_a_field() {
    let dir = scratch("simulate_field");
    let field = random_field(&mut seeded_rng(2), 2, 4).unwrap();
    let input = write(&dir, "field.json", &field.to_json());
    let out = hypokit(&["lorentz", "simulate", "--input", &input, "--format", "json", "--steps", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = json(&out);
    assert_eq!(v["N"], 2);
    assert_eq!(v["M"], 4);
    let reports = v["reports"].as_array().unwrap();
    assert!(reports.iter().all(|r| r["within_bound"] == true));
    assert_eq!(reports[0]["distance"].as_f64().unwrap(), field.distance_to_equilibrium(field.mass()));
    assert!(LorentzField::from_json(&field.to_json()).is_ok());
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = scratch("validation");
    let wide = write(&dir, "wide.json", r#"{"n_rows":2,"n_cols":3,"entries":[1,2,3,4,5,6]}"#);
    let short = write(&dir, "short.json", r#"{"n_rows":2,"n_cols":2,"entries":[1,2,3]}"#);
    let broken = write(&dir, "broken.json", "{not json");
    let ck2 = gallery_file(&dir, "ck", "2");
    for args in [
        vec!["analyze", "--bogus"],
        vec!["analyze"],
        vec!["analyze", "--input", &wide],
        vec!["analyze", "--input", &short],
        vec!["staircase", "--input", &broken],
        vec!["analyze", "--input", "/nonexistent/matrix.json"],
        vec!["analyze", "--input", &ck2, "--format", "csv"],
        vec!["decay", "--input", &ck2, "--tmax", "-1"],
        vec!["gallery", "ck", "0"],
        vec!["lorentz", "kappa", "--M", "0"],
    ] {
        let out = hypokit(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", stderr(&out));
        assert_eq!(stderr(&out).trim_end().lines().count(), 1, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = scratch("numerical");
    let big = write(&dir, "big.json", r#"{"n_rows":2,"n_cols":2,"entries":[1e300,1e300,-1e300,1e300]}"#);
    let out = hypokit(&["decay", "--input", &big, "--tmax", "1", "--steps", "2"]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn thread_count_from_environment() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_hypokit"))
            .args(["lorentz", "kappa", "--M", "10"])
            .env("HYPOKIT_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(stdout(&one), stdout(&run("2")));
    assert_eq!(run("zero").status.code(), Some(1));
    assert_eq!(run("0").status.code(), Some(1));
}

#[test]
fn help_exits_successfully() {
    let out = hypokit(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("lorentz"));
}
