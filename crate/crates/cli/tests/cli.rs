use std::fs;
use std::process::{Command, Output};

fn preqscore(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_preqscore"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn experiment_passes_with_exit_zero() {
    let d = tempfile::tempdir().unwrap();
    let out = d.path().join("res");
    let o = preqscore(&[
        "experiment",
        "variance-expectation",
        "--xi",
        "2",
        "--tauq2",
        "1",
        "--n",
        "1000",
        "--reps",
        "100",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["passed"], true);
    assert_eq!(summary["config"]["base_seed"], 42);
    assert_eq!(summary["assertions"]["log_mean_within_3se"], true);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("index,x,score_a,score_b,delta,cumulative\n"));
    assert_eq!(trace.lines().count(), 1001);
    assert!(!out.join("rep_0.csv").exists());
}

#[test]
fn usage_errors_exit_two() {
    let o = preqscore(&["experiment", "consistency"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
    assert_eq!(
        preqscore(&["experiment", "nonsense", "--out", "/tmp/x"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        preqscore(&[
            "experiment",
            "unit-change",
            "--unit-scale",
            "0",
            "--out",
            "/tmp/x"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(
        preqscore(&[
            "experiment",
            "outlier-locality",
            "--outlier-index",
            "100",
            "--out",
            "/tmp/x"
        ])
        .status
        .code(),
        Some(2)
    );
    assert_eq!(preqscore(&[]).status.code(), Some(2));
}

#[test]
fn failed_assertion_exits_one() {
    // with identical models nothing is ever selected, so the consistency assertion fails
    let d = tempfile::tempdir().unwrap();
    let o = preqscore(&[
        "experiment",
        "consistency",
        "--xi",
        "1",
        "--n",
        "200",
        "--reps",
        "20",
        "--out",
        d.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    let summary = fs::read_to_string(d.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"passed\": false"));
}

#[test]
fn trace_command() {
    let d = tempfile::tempdir().unwrap();
    let data = d.path().join("data.csv");
    fs::write(&data, "x\n0\n0\n").unwrap();
    let out = d.path().join("t");
    let o = preqscore(&[
        "trace",
        "--model-a",
        "iidnorm(0,1)",
        "--model-b",
        "iidnorm(1,1)",
        "--rule",
        "hyvarinen",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert_eq!(
        fs::read_to_string(out.join("trace.csv")).unwrap(),
        "index,x,score_a,score_b,delta,cumulative\n1,0,-2,-1,1,1\n2,0,-2,-1,1,2\n"
    );
    let s: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["chosen_id"], "iidnorm(0,1)");
    assert_eq!(s["d_n"], 2.0);

    // improper model under the log rule is an error
    let o = preqscore(&[
        "trace",
        "--model-a",
        "flatloc(1)",
        "--model-b",
        "iidnorm(0,1)",
        "--rule",
        "log",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("observation 1"));

    let o = preqscore(&[
        "trace",
        "--model-a",
        "ar(2;1)",
        "--model-b",
        "iidnorm(0,1)",
        "--rule",
        "log",
        "--data",
        data.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
}
