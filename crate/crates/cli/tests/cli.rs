use std::path::Path;
use std::process::{Command, Output};

fn seqtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_seqtrack"))
        .args(args)
        .output()
        .expect("failed to launch seqtrack")
}

fn ok(args: &[&str]) -> Output {
    let out = seqtrack(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn error_kind(out: &Output) -> String {
    let line = String::from_utf8_lossy(&out.stderr);
    let v: serde_json::Value = serde_json::from_str(line.trim()).expect("error line is JSON");
    v["error"]["kind"].as_str().unwrap().to_string()
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn simulate_map_track_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (log, map, report, rows) = (
        path(dir.path(), "log.jsonl"),
        path(dir.path(), "map.json"),
        path(dir.path(), "report.json"),
        path(dir.path(), "rows.csv"),
    );
    ok(&["simulate", "--loops", "1", "--seed", "3", "--out", &log]);
    ok(&["build-map", "--out", &map]);
    ok(&[
        "track",
        "--map",
        &map,
        "--log",
        &log,
        "--set",
        "n_particles=200",
        "--out",
        &report,
        "--rows-csv",
        &rows,
    ]);

    let r: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["mode"], "fused");
    assert_eq!(r["config"]["n_particles"], "200");
    assert!(r["summary"]["mean_error_m"].as_f64().unwrap() < 5.0);
    let timing: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{report}.timing.json")).unwrap())
            .unwrap();
    assert!(timing["updates"].as_u64().unwrap() > 0);
    let csv = std::fs::read_to_string(&rows).unwrap();
    assert!(csv.starts_with("t,x,y,theta,gt_x,gt_y,error_m\n"));

    let eval = ok(&["eval", "--report", &report]);
    let e: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(e["summary"], r["summary"]);
}

#[test]
fn track_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (log, map) = (path(dir.path(), "log.jsonl"), path(dir.path(), "map.json"));
    ok(&["simulate", "--loops", "1", "--out", &log]);
    ok(&["build-map", "--out", &map]);
    let a = ok(&["track", "--map", &map, "--log", &log, "--seed", "9"]).stdout;
    let b = ok(&["track", "--map", &map, "--log", &log, "--seed", "9"]).stdout;
    assert_eq!(a, b);
}

#[test]
fn baseline_mode_uses_survey_map() {
    let dir = tempfile::tempdir().unwrap();
    let (log, fp) = (
        path(dir.path(), "log.jsonl"),
        path(dir.path(), "survey.json"),
    );
    ok(&["simulate", "--loops", "1", "--out", &log]);
    ok(&[
        "survey",
        "--set",
        "survey_points=10",
        "--set",
        "survey_duration_s=20",
        "--out",
        &fp,
    ]);
    let surveyed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&fp).unwrap()).unwrap();
    assert_eq!(surveyed.as_array().unwrap().len(), 10);
    let out = ok(&["track", "--mode", "baseline", "--map", &fp, "--log", &log]);
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["mode"], "baseline");
}

#[test]
fn eval_scores_external_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let (log, traj) = (path(dir.path(), "log.jsonl"), path(dir.path(), "traj.csv"));
    std::fs::write(
        &log,
        "{\"type\":\"GT\",\"t\":0.0,\"x\":0.0,\"y\":0.0}\n{\"type\":\"GT\",\"t\":10.0,\"x\":10.0,\"y\":0.0}\n",
    )
    .unwrap();
    std::fs::write(&traj, "t,x,y\n0,0,1\n5,5,3\n20,0,0\n").unwrap();
    let out = ok(&["eval", "--log", &log, "--trajectory", &traj]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["summary"]["count"], 2);
    assert_eq!(v["summary"]["mean_error_m"], 2.0);
    assert_eq!(v["uncovered_rows"], 1);
}

#[test]
fn sweep_emits_csv_table() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = path(dir.path(), "scenario.toml");
    let text = String::from_utf8(ok(&["scenario"]).stdout)
        .unwrap()
        .replace("loops = 10", "loops = 1");
    std::fs::write(&scenario, text).unwrap();
    let out = ok(&[
        "sweep",
        "--scenario",
        &scenario,
        "--param",
        "n_particles",
        "--values",
        "20,50",
        "--reps",
        "2",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "parameter,value,repetitions,mean_error_m,std_error_m"
    );
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("n_particles,20,2,"));
}

#[test]
fn failures_print_a_json_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = path(dir.path(), "bad.jsonl");
    let map = path(dir.path(), "map.json");
    ok(&["build-map", "--out", &map]);
    std::fs::write(
        &bad,
        "{\"type\":\"GT\",\"t\":0,\"x\":1,\"y\":1}\n{\"type\":\"STEP\",\"t\":1}\n",
    )
    .unwrap();

    let out = seqtrack(&["track", "--map", &map, "--log", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_kind(&out), "malformed_log");
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = seqtrack(&["sweep", "--param", "gamma", "--values", "1"]);
    assert_eq!(error_kind(&out), "unknown_parameter");

    let out = seqtrack(&["config", "--set", "lambda=-1"]);
    assert_eq!(error_kind(&out), "config");

    let out = seqtrack(&["track", "--map", &map]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_kind(&out), "usage");
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = path(dir.path(), "track.cfg");
    std::fs::write(&cfg, "# tuned\nlambda = 0.5\nmode = wifi\n").unwrap();
    let out = ok(&["config", "--config", &cfg, "--mode", "imu", "--set", "k=6"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("lambda = 0.5\n"));
    assert!(text.contains("mode = imu\n"));
    assert!(text.contains("k = 6\n"));
}
