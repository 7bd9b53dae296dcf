use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn boat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boat")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|_| panic!("stderr is not JSON: {text}"))
}

#[test]
fn malformed_csv_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.csv");
    std::fs::write(&data, "unit_id,group,period\nu1,control,pre\n").unwrap();
    let o = boat(&["bdid", "--data", p(&data), "--out", p(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    let v = stderr_json(&o);
    assert_eq!(v["schema"], "boat/1");
    assert_eq!(v["error"]["kind"], "schema");
    assert!(!dir.path().join("out/summary.json").exists());
}

#[test]
fn ragged_rows_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ragged.csv");
    std::fs::write(&data, "unit_id,x,y\nu1,50,1.0\nu2,70\n").unwrap();
    let o = boat(&["brdd", "--data", p(&data), "--cutoff", "60", "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "schema");
}

#[test]
fn usage_errors_exit_two() {
    let o = boat(&["bpsm", "--draws", "many"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["error"]["kind"], "usage");
    assert_eq!(boat(&["--help"]).status.code(), Some(0));
}

#[test]
fn advise_paths() {
    let cases: [(&[&str], &str); 6] = [
        (&["--randomizable", "yes"], "randomised experiment"),
        (&["--randomizable", "no", "--covariates-known", "yes", "--multiple-covariates", "yes"], "BPSM"),
        (
            &["--randomizable", "no", "--covariates-known", "yes", "--multiple-covariates", "no", "--continuous-dominant", "yes"],
            "BRDD",
        ),
        (
            &["--randomizable", "no", "--covariates-known", "yes", "--multiple-covariates", "no", "--continuous-dominant", "no"],
            "stratification",
        ),
        (&["--randomizable", "no", "--covariates-known", "no", "--latent", "no"], "BDID"),
        (&["--randomizable", "no", "--covariates-known", "no", "--latent", "yes"], "out of BOAT scope: see instrumental variables"),
    ];
    for (flags, label) in cases {
        let mut args = vec!["advise"];
        args.extend_from_slice(flags);
        let o = boat(&args);
        assert!(o.status.success(), "{flags:?}");
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["label"], label);
    }
}

#[test]
fn advise_refuses_contradictions_and_gaps() {
    let o = boat(&["advise", "--randomizable", "no", "--covariates-known", "no", "--multiple-covariates", "yes", "--latent", "no"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["error"]["kind"], "validation");
    let o = boat(&["advise", "--randomizable", "no"]);
    assert_eq!(stderr_json(&o)["error"]["kind"], "validation");
}

#[test]
fn fleet_trips_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("fleet.json");
    std::fs::write(
        &spec,
        r#"{"n_control":30,"n_treated":12,"trips_per_vehicle":25,"true_effect_g_per_km":-5,"seed":3,"dirty_fraction":0.05}"#,
    )
    .unwrap();
    let o = boat(&["simulate", "--fleet", p(&spec), "--out", p(&d.join("sim"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = d.join("run");
    let o = boat(&[
        "bpsm",
        "--data",
        p(&d.join("sim/trips.csv")),
        "--covariates",
        "avg_trip_distance,share_hybrid_distance,avg_ambient_temp",
        "--matching",
        "nearest",
        "--draws",
        "600",
        "--warmup",
        "150",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["summary.json", "draws.csv", "report.json", "plot_data.csv", "matches.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], "boat/1");
    assert_eq!(summary["command"], "bpsm");
    assert!(summary["effect"]["point"].is_number());
    let draws = std::fs::read_to_string(out.join("draws.csv")).unwrap();
    assert_eq!(draws.lines().next().unwrap().split(',').count(), 4);
    // --draws counts warm-up iterations, which are not written
    assert_eq!(draws.lines().count(), 1 + 2 * (600 - 150));
}

#[test]
fn rdd_z_filter_changes_sample() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let spec = d.join("rdd.json");
    std::fs::write(
        &spec,
        r#"{"scenario":"cutoff_rdd","n_control":150,"n_treated":150,"true_ate":-1.2,"z_effect":0.02,"seed":4}"#,
    )
    .unwrap();
    assert!(boat(&["simulate", "--spec", p(&spec), "--out", p(&d.join("sim"))]).status.success());
    let run = |extra: &[&str], out: &str| {
        let o = d.join(out);
        let data = d.join("sim/data.csv");
        let mut args = vec!["brdd", "--data", p(&data), "--cutoff", "60", "--z-col", "z", "--draws", "500"];
        args.extend_from_slice(extra);
        let o_s = o.to_str().unwrap().to_string();
        args.extend(["--out", &o_s]);
        let r = boat(&args);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let v: Value = serde_json::from_str(&std::fs::read_to_string(o.join("summary.json")).unwrap()).unwrap();
        v["n_observations"].as_u64().unwrap()
    };
    let all = run(&[], "all");
    let high = run(&["--z-filter", "z>50"], "high");
    assert_eq!(all, 300);
    assert!(high < all && high > 0);
}
