use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use odefilter::cli::{read_trajectory_csv, ConfigOverrides};
use odefilter::filter::solve_ivp;
use odefilter::priors::PriorKind;

fn odefilter(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_odefilter"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn zero_step_is_a_config_error_naming_h() {
    let dir = tempfile::tempdir().unwrap();
    let out = odefilter(&[
        "solve",
        "--problem",
        "exp",
        "--h",
        "0",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("`h`"), "stderr: {stderr}");
    assert!(!dir.path().join("trajectory.csv").exists());
}

#[test]
fn unknown_problem_and_bad_theta_exit_2() {
    let out = odefilter(&["solve", "--problem", "lorenz"]);
    assert_eq!(out.status.code(), Some(2));
    let out = odefilter(&[
        "solve",
        "--problem",
        "exp",
        "--prior",
        "ioup",
        "--theta",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("theta"));
}

#[test]
fn solve_writes_a_trajectory_that_reads_back_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let out = odefilter(&[
        "solve",
        "--problem",
        "neg_exp",
        "--prior",
        "ioup",
        "--theta",
        "-1.5",
        "--T",
        "5",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let cfg = ConfigOverrides {
        theta: Some(-1.5),
        t_end: Some(5.0),
        ..ConfigOverrides::for_problem("neg_exp", PriorKind::Ioup)
    }
    .resolve()
    .unwrap();
    let traj = solve_ivp(
        &cfg.problem().unwrap(),
        &cfg.prior_model().unwrap(),
        cfg.h,
        cfg.r,
    )
    .unwrap();
    let table = read_trajectory_csv(&dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(table.times, traj.times());
    for (row, state) in table.means.iter().zip(&traj.states) {
        assert_eq!(row, &state.mean);
    }
    for (vars, state) in table.variances.iter().zip(&traj.states) {
        assert_eq!(vars.as_slice(), state.variances().as_slice());
    }

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["theta"], -1.5);
    assert_eq!(
        report["config"]["provenance"]["sigma2"],
        "default-not-paper"
    );
    assert!(report["errors"]["max_abs"][0].as_f64().unwrap() > 0.0);
}

#[test]
fn sampling_is_reproducible_per_seed() {
    let run = |seed: &str| {
        let dir = tempfile::tempdir().unwrap();
        let out = odefilter(&[
            "sample",
            "--prior",
            "ioup",
            "--theta",
            "-1",
            "--n-paths",
            "5",
            "--T",
            "2",
            "--h",
            "0.1",
            "--seed",
            seed,
            "--out",
            path_str(dir.path()),
        ]);
        assert!(out.status.success());
        fs::read(dir.path().join("samples.csv")).unwrap()
    };
    let a = run("7");
    assert_eq!(a, run("7"));
    assert_ne!(a, run("8"));
    let header = String::from_utf8_lossy(&a)
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "t,path_0,path_1,path_2,path_3,path_4");
}

#[test]
fn converge_reports_the_fitted_slope() {
    let dir = tempfile::tempdir().unwrap();
    let out = odefilter(&[
        "converge",
        "--problem",
        "exp",
        "--prior",
        "iwp",
        "--q",
        "2",
        "--out",
        path_str(dir.path()),
    ]);
    assert!(out.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("convergence.json")).unwrap())
            .unwrap();
    let slope = json["estimate"]["fit"]["slope"].as_f64().unwrap();
    assert!((slope - 3.0).abs() < 0.2, "slope {slope}");

    let out = odefilter(&["converge", "--problem", "exp", "--hs", "0.1,0.05"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn suite_writes_a_summary_row_per_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let out = odefilter(&["suite", "--out", path_str(dir.path())]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut reader = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 10);
    for row in &rows {
        assert_eq!(&row[col("status")], "ok");
        let dir = dir
            .path()
            .join(format!("{}_{}", &row[col("problem")], &row[col("prior")]));
        assert!(dir.join("trajectory.csv").exists());
        assert!(dir.join("report.json").exists());
    }
    let winner = |problem: &str| {
        rows.iter()
            .find(|r| &r[col("problem")] == problem)
            .map(|r| r[col("winner")].to_string())
            .unwrap()
    };
    assert_eq!(winner("exp"), "iwp");
    assert_eq!(winner("neg_exp"), "ioup");
    assert_eq!(winner("decay_chain"), "ioup");
    assert_eq!(winner("orbit"), "iwp");
}
