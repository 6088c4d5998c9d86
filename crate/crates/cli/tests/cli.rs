use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

fn bandsleep() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_bandsleep"));
    cmd.env_remove("BANDSLEEP_SEED");
    cmd
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn small_run(dir: &Path, extra: &[&str]) -> Output {
    let mut cmd = bandsleep();
    cmd.args(["run", "--out-dir"])
        .arg(dir)
        .args([
            "--hidden-size",
            "6",
            "--num-layers",
            "1",
            "--epochs",
            "4",
            "--learning-rate",
            "0.01",
        ])
        .args(extra);
    cmd.output().unwrap()
}

#[test]
fn synth_piped_into_plan_gives_144_rows_per_day() {
    let synth = ok(bandsleep()
        .args(["synth", "--days", "3", "--seed", "7"])
        .output()
        .unwrap());
    let mut plan = bandsleep()
        .args(["plan", "--granularity", "10m"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    plan.stdin.take().unwrap().write_all(&synth.stdout).unwrap();
    let out = ok(plan.wait_with_output().unwrap());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("period_index,n_bands"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 3 * 144);
    assert!(rows.iter().enumerate().all(|(i, r)| r.starts_with(&format!("{i},"))));
}

#[test]
fn custom_cell_file() {
    let dir = tempfile::tempdir().unwrap();
    let cell = dir.path().join("cell.json");
    fs::write(
        &cell,
        r#"{"bands":[{"label":"low","prbs_per_tti":6,"power_weight":1.0},
                     {"label":"high","prbs_per_tti":12,"power_weight":2.0}],
            "realloc_ms":20,"activation_ms":60000}"#,
    )
    .unwrap();
    let trace = dir.path().join("trace.csv");
    ok(bandsleep()
        .args(["synth", "--days", "1", "--seed", "2", "--cell"])
        .arg(&cell)
        .arg("-o")
        .arg(&trace)
        .output()
        .unwrap());
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text
        .lines()
        .skip(1)
        .all(|l| l.contains(",low,") || l.contains(",high,")));
    let out = ok(bandsleep()
        .args(["plan", "-g", "1h", "--cell"])
        .arg(&cell)
        .arg("--trace")
        .arg(&trace)
        .output()
        .unwrap());
    let plan = String::from_utf8(out.stdout).unwrap();
    assert_eq!(plan.lines().count(), 25);
    assert!(plan.lines().skip(1).all(|l| l.ends_with(",1") || l.ends_with(",2")));

    // the default cell's labels do not match this trace
    let out = bandsleep().args(["plan", "--trace"]).arg(&trace).output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn seed_falls_back_to_environment() {
    let explicit = ok(bandsleep()
        .args(["synth", "--days", "1", "--seed", "11"])
        .output()
        .unwrap());
    let env = ok(bandsleep()
        .args(["synth", "--days", "1"])
        .env("BANDSLEEP_SEED", "11")
        .output()
        .unwrap());
    let other = ok(bandsleep()
        .args(["synth", "--days", "1", "--seed", "12"])
        .output()
        .unwrap());
    assert_eq!(explicit.stdout, env.stdout);
    assert_ne!(explicit.stdout, other.stdout);
}

#[test]
fn stages_chain_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    ok(bandsleep()
        .args(["synth", "--days", "10", "--seed", "5", "-o"])
        .arg(p("trace.csv"))
        .output()
        .unwrap());
    ok(bandsleep()
        .args(["plan", "--trace"])
        .arg(p("trace.csv"))
        .arg("-o")
        .arg(p("plan.csv"))
        .output()
        .unwrap());
    let sim = ok(bandsleep()
        .args(["simulate", "--trace"])
        .arg(p("trace.csv"))
        .arg("--plan")
        .arg(p("plan.csv"))
        .output()
        .unwrap());
    let sim: serde_json::Value = serde_json::from_slice(&sim.stdout).unwrap();
    for key in [
        "sleep_pct",
        "avg_extra_delay_us",
        "delayed_prbs",
        "max_delay_ms",
        "histogram",
        "residual_backlog",
    ] {
        assert!(sim.get(key).is_some(), "simulate output lacks {key}");
    }
    assert_eq!(sim["sleep_pct"][0], 0.0);

    ok(bandsleep()
        .args(["train", "--plan"])
        .arg(p("plan.csv"))
        .args([
            "--seed",
            "1",
            "--hidden-size",
            "4",
            "--num-layers",
            "1",
            "--epochs",
            "3",
            "-o",
        ])
        .arg(p("model.json"))
        .output()
        .unwrap());
    ok(bandsleep()
        .args(["predict", "--checkpoint"])
        .arg(p("model.json"))
        .arg("--plan")
        .arg(p("plan.csv"))
        .arg("-o")
        .arg(p("pred.csv"))
        .output()
        .unwrap());
    let pred = fs::read_to_string(p("pred.csv")).unwrap();
    assert!(pred.starts_with("period_index,n_bands,raw\n1008,"));
    assert_eq!(pred.lines().count(), 1 + 2 * 144);

    let eval = ok(bandsleep()
        .args(["evaluate", "-g", "10m", "--trace"])
        .arg(p("trace.csv"))
        .arg("--reference")
        .arg(p("plan.csv"))
        .arg("--predicted")
        .arg(p("pred.csv"))
        .arg("--csv")
        .arg(p("eval.csv"))
        .output()
        .unwrap());
    let eval: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    for key in ["rmse", "accuracy", "qos_preservation"] {
        assert!(eval["metrics"][key].is_number(), "missing metric {key}");
    }
    for model in ["model1", "model2"] {
        assert!(eval["predicted"]["energy"]["rho"][model].is_number());
        assert!(eval["reference"]["energy"]["rho"][model].is_number());
    }
    assert_eq!(fs::read_to_string(p("eval.csv")).unwrap().lines().count(), 3);

    ok(bandsleep()
        .args(["report", "--trace"])
        .arg(p("trace.csv"))
        .arg("--out-dir")
        .arg(p("report"))
        .output()
        .unwrap());
    let sweep = fs::read_to_string(p("report/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 6);
}

#[test]
fn run_is_idempotent_and_records_checksums() {
    let dir = tempfile::tempdir().unwrap();
    ok(small_run(dir.path(), &["--days", "10", "--seed", "4"]));
    let first = fs::read(dir.path().join("manifest.json")).unwrap();
    ok(small_run(dir.path(), &["--days", "10", "--seed", "4"]));
    assert_eq!(first, fs::read(dir.path().join("manifest.json")).unwrap());

    let manifest: serde_json::Value = serde_json::from_slice(&first).unwrap();
    let stages: Vec<&str> = manifest["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["name"].as_str().unwrap())
        .collect();
    assert_eq!(
        stages,
        ["synth", "plan", "simulate", "train", "predict", "evaluate", "report"]
    );
    assert_eq!(manifest["train_days"], serde_json::json!([0, 1, 2, 3, 4]));
    assert_eq!(manifest["test_days"], serde_json::json!([7, 8]));
    let digest = manifest["stages"][3]["outputs"]["model.json"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
}

#[test]
fn failing_stage_is_named_and_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_run(dir.path(), &["--days", "10", "--window-k", "5000"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `train` failed"), "{err}");
    // earlier stages completed, later ones never ran
    assert!(dir.path().join("plan.csv").exists());
    assert!(!dir.path().join("prediction.csv").exists());
    assert!(!dir.path().join("manifest.json").exists());

    let out = small_run(dir.path(), &["--days", "10", "--test-range", "3..5"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("overlap"));
    assert!(!out.status.success());
}

#[test]
fn malformed_trace_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("bad.csv");
    fs::write(&trace, "tti,band,prbs\n0,800MHz,3\n1,800MHz,x\n").unwrap();
    let out = bandsleep().args(["plan", "--trace"]).arg(&trace).output().unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("plan failed") && err.contains("line 3"), "{err}");
}
