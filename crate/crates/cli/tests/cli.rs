use std::path::Path;
use std::process::{Command, Output};

use pt_spectra::closed_forms::{eig_gain_coupling, TwoLevelGainCoupling};
use pt_spectra::scan::{Label, Trajectory, TrajectoryPoint, Truncation};
use pt_spectra::Complex64;
use pt_spectra_cli::output::{parse_csv, trajectory_rows, write_csv, TrajectoryRow, CSV_COLUMNS};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pt-spectra"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn rows_of(text: &str) -> Vec<TrajectoryRow> {
    parse_csv(text).unwrap().1
}

#[test]
fn scan_h3_is_real_on_the_positive_side() {
    let o = run(&["scan-h3", "--eps", "0:0.5:0.05", "--levels", "5", "--trunc", "128"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("# pt-spectra "));
    let rows = rows_of(&text);
    assert_eq!(rows.len(), 5 * 11);
    assert!(rows.iter().all(|r| r.real_flag && r.trunc == "128"));
    let ground: Vec<&TrajectoryRow> = rows.iter().filter(|r| r.label == "0").collect();
    assert_eq!(ground[0].eps, 0.0);
    assert_eq!(ground[0].re_lambda, 1.0);
    assert!(ground.windows(2).all(|w| w[0].eps < w[1].eps));
}

#[test]
fn matrix2x2_matches_closed_form() {
    let o = run(&["matrix2x2", "gain", "--e1", "0", "--e2", "2", "--eps", "0:2:0.01"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.lines().any(|l| l == "# threshold = 1"));
    let rows = rows_of(&text);
    for r in &rows {
        let (hi, lo) = eig_gain_coupling(&TwoLevelGainCoupling::new(0.0, 2.0, r.eps).unwrap());
        let z = Complex64::new(r.re_lambda, r.im_lambda);
        let d = (z - hi).norm().min((z - lo).norm());
        assert!(d <= 1e-12, "eps={} {z} vs {hi}/{lo}", r.eps);
    }
    let at_threshold: Vec<&TrajectoryRow> = rows.iter().filter(|r| r.eps == 1.0).collect();
    assert_eq!(at_threshold.len(), 2);
    for r in at_threshold {
        assert!((r.re_lambda - 1.0).abs() < 1e-7 && r.im_lambda.abs() < 1e-7);
    }
    // refinement sub-steps stay on a decimal grid
    assert!(rows.iter().any(|r| r.eps == 1.003));
}

#[test]
fn rspe_two_level_radius() {
    let o = run(&["rspe", "two-level", "--e1", "0", "--e2", "2", "--order", "40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["_header"]["command"], "rspe");
    let series = v["series"].as_array().unwrap();
    assert_eq!(series.len(), 2);
    for s in series {
        let r = s["radius_estimate"].as_f64().unwrap();
        assert!((r - 1.0).abs() < 0.05, "{r}");
        assert_eq!(s["coefficients"].as_array().unwrap().len(), 41);
    }
}

#[test]
fn rspe_h2_ground_level() {
    let o = run(&[
        "rspe", "h2", "--omega1", "1", "--omega2", "2", "--r", "1", "--s", "1", "--trunc", "12x12", "--order", "6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let s = &v["series"][0];
    assert_eq!(s["label"], "(0,0)");
    assert_eq!(s["coefficients"][0][0], 3.0);
}

#[test]
fn threshold_and_convergence_reports() {
    let o = run(&[
        "threshold", "gain", "--e1", "0", "--e2", "2", "--pair", "0/1", "--real-at", "0.5", "--complex-at", "1.5",
        "--match-tol", "10",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let eps_star = v["report"]["eps_star"].as_f64().unwrap();
    assert!((eps_star - 1.0).abs() <= 1e-8, "{eps_star}");

    let o = run(&["converge", "h3", "--eps", "0", "--sizes", "8,16,32", "--levels", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for row in v["table"]["rows"].as_array().unwrap() {
        for d in row["differences"].as_array().unwrap() {
            assert_eq!(d.as_f64().unwrap(), 0.0);
        }
    }
}

#[test]
fn config_errors_exit_one() {
    for args in [
        vec!["scan-h3", "--eps", "0:1.2:0.1", "--levels", "2", "--trunc", "16"],
        vec!["scan-h2", "--eps", "0:0.1:0.05", "--r", "2", "--s", "2", "--trunc", "4x4"],
        vec!["scan-h2", "--eps", "0:0.1:0.05", "--omega1", "-1", "--trunc", "4x4"],
        vec!["matrix2x2", "gain", "--e1", "0", "--eps", "0:1:0.1"],
        vec!["scan-h3", "--bogus"],
        vec!["scan-h3", "--eps", "0,0.2,0.1", "--trunc", "16"],
        vec!["scan-h3", "--eps", "0:0.1:0.05", "--config", "/nonexistent/run.cfg"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        let err = stderr(&o);
        assert!(err.starts_with("error[config]: "), "{args:?}: {err}");
        assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    }
}

#[test]
fn numerical_errors_exit_two_with_location() {
    let o = run(&["scan-h3", "--eps", "0:0.6:0.3", "--levels", "3", "--trunc", "32", "--match-tol", "1e-6"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.starts_with("error[numerical]: "), "{err}");
    assert!(err.contains("eps = 0.3") && err.contains("(32)"), "{err}");
}

#[test]
fn unwritable_path_is_reported() {
    let o = run(&["matrix2x2", "gain", "--e1", "0", "--e2", "2", "--eps", "0:1:0.5", "--out", "/nonexistent/x.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error[io]: /nonexistent/x.csv"));
}

#[test]
fn config_file_mirrors_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# demo\ne1 = 0\ne2 = 2\neps = 0:1.5:0.25\nno_refine = true\n").unwrap();
    let from_file = run(&["matrix2x2", "gain", "--config", cfg.to_str().unwrap()]);
    let from_flags = run(&["matrix2x2", "gain", "--e1", "0", "--e2", "2", "--eps", "0:1.5:0.25", "--no-refine"]);
    assert!(from_file.status.success(), "{}", stderr(&from_file));
    assert_eq!(stdout(&from_file), stdout(&from_flags));

    let overridden = run(&["matrix2x2", "gain", "--config", cfg.to_str().unwrap(), "--e2", "4"]);
    assert!(overridden.status.success(), "{}", stderr(&overridden));
    assert!(stdout(&overridden).lines().any(|l| l == "# e2 = 4.0"));

    std::fs::write(&cfg, "e1 0\n").unwrap();
    let bad = run(&["matrix2x2", "gain", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn output_is_deterministic_across_thread_counts() {
    let args = ["scan-h3", "--eps", "-0.3:0.3:0.1", "--levels", "4", "--trunc", "48"];
    let one = bin().args(args).env("PT_SPECTRA_THREADS", "1").output().unwrap();
    let auto = bin().args(args).env("PT_SPECTRA_THREADS", "0").output().unwrap();
    let again = bin().args(args).output().unwrap();
    assert!(one.status.success() && auto.status.success());
    assert_eq!(one.stdout, auto.stdout);
    assert_eq!(one.stdout, again.stdout);

    let bad = bin().args(args).env("PT_SPECTRA_THREADS", "many").output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn json_scan_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.json");
    let o = run(&[
        "matrix2x2", "detuned", "--e", "0", "--b", "1", "--eps", "0:1:0.5", "--format", "json", "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().all(|l| l == l.trim_end()));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["trajectories"].as_array().unwrap().len(), 2);
    assert_eq!(v["_header"]["config"]["kind"], "detuned");
}

fn emit(trajectories: &[Trajectory]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, &["# test".to_string()], &trajectory_rows(trajectories)).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn empty_and_small_emission() {
    let text = emit(&[]);
    assert_eq!(text, format!("# test\n{}\n", CSV_COLUMNS.join(",")));

    let t = Trajectory {
        label: Label::Modes(1, 2),
        unperturbed: 3.0,
        degenerate: false,
        truncation: Truncation::Product(4, 4),
        points: [0.2, 0.0, 0.1]
            .iter()
            .map(|&eps| TrajectoryPoint {
                eps,
                value: Complex64::new(1.0 + eps, -eps / 3.0),
                residual: 1e-17,
                real: eps == 0.0,
            })
            .collect(),
    };
    let text = emit(&[t]);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2 + 3);
    assert_eq!(lines[2], "\"(1,2)\",0.0,1.0,-0.0,1e-17,true,4x4");
    assert!(lines[4].starts_with("\"(1,2)\",0.2,1.2,-0.06666666666666667,"));
}

#[test]
fn csv_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h2.csv");
    let o = run(&[
        "scan-h2", "--eps", "-0.1:0.1:0.05", "--levels", "4", "--trunc", "6x6", "--out", path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(Path::new(&path)).unwrap();
    let (comments, rows) = parse_csv(&text).unwrap();
    assert_eq!(rows.len(), 4 * 5);
    let mut buf = Vec::new();
    write_csv(&mut buf, &comments, &rows).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), text);
}
