use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn pbrsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbrsim"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn pbrsim")
}

fn entries(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn simulate_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    for run in ["a", "b"] {
        let out = pbrsim(
            &[
                "simulate",
                "--scenario",
                "paper-4.2",
                "--controller",
                "ip",
                "--seed",
                "11",
                "--out",
                run,
            ],
            tmp.path(),
        );
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    for file in ["trace.csv", "metrics.csv"] {
        let a = fs::read(tmp.path().join("a").join(file)).unwrap();
        let b = fs::read(tmp.path().join("b").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
    let trace = fs::read_to_string(tmp.path().join("a/trace.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(
        lines.next(),
        Some("t,x_true,y_meas,y_ref,d_applied,q0,f_est")
    );
    assert_eq!(lines.count(), 501);
}

#[test]
fn seed_changes_the_measurements() {
    let tmp = tempfile::tempdir().unwrap();
    for (seed, dir) in [("1", "s1"), ("2", "s2")] {
        let out = pbrsim(&["simulate", "--seed", seed, "--out", dir], tmp.path());
        assert_eq!(out.status.code(), Some(0));
    }
    let a = fs::read(tmp.path().join("s1/trace.csv")).unwrap();
    let b = fs::read(tmp.path().join("s2/trace.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn fl_trace_leaves_estimate_column_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pbrsim(
        &["simulate", "--controller", "fl", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let trace = fs::read_to_string(tmp.path().join("o/trace.csv")).unwrap();
    assert!(trace.lines().skip(1).all(|l| l.ends_with(',')));
}

#[test]
fn malformed_config_exits_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("bad.toml"),
        "scenario = \"paper-4.1\"\n[set\n",
    )
    .unwrap();
    let out = pbrsim(
        &["simulate", "--config", "bad.toml", "--out", "o"],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!tmp.path().join("o").exists());
    assert_eq!(entries(tmp.path()), vec!["bad.toml".to_string()]);
}

#[test]
fn invalid_values_exit_2_without_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 6] = [
        &["simulate", "--set", "sampling.period=-1", "--out", "o"],
        &[
            "simulate",
            "--set",
            "controller.no_such_key=1",
            "--out",
            "o",
        ],
        &["simulate", "--set", "bounds.d_max=0", "--out", "o"],
        &["simulate", "--controller", "pid", "--out", "o"],
        &["sweep", "--scenario", "nope", "--out", "o"],
        &[
            "setpoint-map",
            "--min",
            "100",
            "--max",
            "1200",
            "--out",
            "o/map.csv",
        ],
    ];
    for args in cases {
        let out = pbrsim(args, tmp.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!tmp.path().join("o").exists(), "{args:?} wrote output");
    }
}

#[test]
fn config_file_drives_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(
        tmp.path().join("run.toml"),
        "scenario = \"paper-4.2\"\ncontroller = \"fl\"\nseed = 5\nout = \"cfg-out\"\n\n[set]\n\"controller.mu0\" = 0.21\n",
    )
    .unwrap();
    let out = pbrsim(&["simulate", "--config", "run.toml"], tmp.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let metrics = fs::read_to_string(tmp.path().join("cfg-out/metrics.csv")).unwrap();
    assert!(metrics
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("fl,2.10000000e-1,"));
}

#[test]
fn sweep_writes_traces_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pbrsim(&["sweep", "--mu0", "0.07,0.21", "--out", "sw"], tmp.path());
    assert_eq!(out.status.code(), Some(0));
    let files = entries(&tmp.path().join("sw"));
    assert_eq!(files.len(), 5, "{files:?}");
    let summary = fs::read_to_string(tmp.path().join("sw/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().collect();
    assert_eq!(
        rows[0],
        "controller,mu0,offset,iae,settle_time,batch_duration,status"
    );
    assert_eq!(rows.len(), 5);
    assert!(rows[1..].iter().all(|r| r.ends_with(",ok")));
}

#[test]
fn setpoint_map_writes_requested_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pbrsim(
        &[
            "setpoint-map",
            "--min",
            "100",
            "--max",
            "600",
            "--steps",
            "6",
            "--out",
            "map.csv",
        ],
        tmp.path(),
    );
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(tmp.path().join("map.csv")).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "q0,x_star,d_star,productivity");
    assert_eq!(rows.len(), 7);
    assert!(rows[6].starts_with("6.00000000e2,"));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pbrsim(&["frobnicate"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}
