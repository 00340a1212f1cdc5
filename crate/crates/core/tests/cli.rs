use std::path::Path;
use std::process::{Command, Output};

use biko::config::{Command as Cmd, RunConfig};
use biko::run::{run, Failure, RunOutput};

fn biko(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biko")).args(args).env_remove("BIKO_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_gaussian_five() {
    let dir = tempfile::tempdir().unwrap();
    let o = biko(&["verify", "--measure", "gaussian", "--dim", "5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&dir.path().join("verify.json"));
    assert_eq!(doc["schema_version"], 1);
    let reports = doc["reports"].as_array().unwrap();
    assert!(reports.len() > 50);
    assert!(reports.iter().all(|r| r["passed"] == true));
    assert!(doc["empirical"]["c1"].as_f64().unwrap().is_finite());
    assert!(!dir.path().join("failure.json").exists());
}

#[test]
fn kernel_csv_has_agreement() {
    let o = biko(&["kernel", "--t", "1", "--grid", "-1:1:3", "--methods", "subordination,spectral"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x1,y1,value,method,error_estimate,agreement");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 18);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn rational_guard_exits_two() {
    let o = biko(&["hypotheses", "--measure", "rational", "--alpha", "2", "--beta", "4", "--dim", "5"]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
    let o = biko(&["hypotheses", "--measure", "rational", "--alpha", "2", "--beta", "8", "--dim", "5"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"schema_version":1,"command":"spectrum","colour":"red"}"#).unwrap();
    assert_eq!(code(&biko(&["run", "--config", cfg.to_str().unwrap()])), 2);
    assert_eq!(code(&biko(&["spectrum", "--h", "0.5"])), 2);
    assert_eq!(code(&biko(&["kernel", "--grid", "1:2"])), 2);
    assert_eq!(code(&biko(&["verify", "--measure", "power", "--dim", "5"])), 2);
    assert_eq!(code(&biko(&["fly"])), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_biko")).args(["spectrum"]).env("BIKO_THREADS", "zero").output().unwrap();
    assert_eq!(code(&o), 2);
    let o = Command::new(env!("CARGO_BIN_EXE_biko")).args(["spectrum"]).env("BIKO_THREADS", "2").output().unwrap();
    assert_eq!(code(&o), 0);
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "3"), (&b, "3"), (&c, "4")] {
        let o = biko(&["evolve", "--dim", "2", "--seed", seed, "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
        let o = biko(&["verify", "--dim", "3", "--seed", seed, "--random-trials", "5", "--out", dir.path().to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    for name in ["evolve.json", "evolve.csv", "verify.json", "verify.csv"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(name)).unwrap(), "{name}");
        assert_ne!(x, std::fs::read(c.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn config_file_matches_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("flags");
    let out2 = dir.path().join("file");
    let o = biko(&["spectrum", "--measure", "power", "--m", "4", "--r-max", "4", "--k", "4", "--out", out1.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"schema_version":1,"command":"spectrum",
            "measure":{"family":"power","params":{"m":4},"dimension":1},
            "knobs":{"r_max":4,"k":4}}"#,
    )
    .unwrap();
    let o = biko(&["run", "--config", cfg.to_str().unwrap(), "--out", out2.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(out1.join("spectrum.csv")).unwrap(), std::fs::read(out2.join("spectrum.csv")).unwrap());
    let doc = json(&out1.join("spectrum.json"));
    assert!(doc["gap"].as_f64().unwrap() > 0.1);
}

#[test]
fn positivity_and_sharpness_are_soft() {
    let o = biko(&["positivity"]);
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["summary"]["t0"].as_f64().unwrap() <= 5.0);
    let o = biko(&["sharpness", "--ns", "10,100"]);
    assert_eq!(code(&o), 0);
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["probes"].as_array().unwrap().len(), 2);
}

#[test]
fn contract_failures_exit_one() {
    let out = RunOutput {
        command: Cmd::Evolve,
        artifacts: vec![],
        failures: vec![Failure { contract: "mean_conservation".into(), detail: "drift".into() }],
    };
    assert_eq!(out.exit_code(), 1);
    let rec: serde_json::Value = serde_json::from_str(&out.failure_record()).unwrap();
    assert_eq!(rec["status"], "contract_violation");
    assert_eq!(rec["failures"][0]["contract"], "mean_conservation");
    assert_eq!(run(&RunConfig::new(Cmd::Spectrum)).unwrap().exit_code(), 0);
}

#[test]
fn evolve_round_trips_its_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = biko(&["evolve", "--dim", "1", "--seed", "9", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let doc = json(&dir.path().join("evolve.json"));
    let input = dir.path().join("f.json");
    std::fs::write(&input, doc["initial"].to_string()).unwrap();
    let o = biko(&["evolve", "--dim", "1", "--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let again: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(again["results"], doc["results"]);
    let o = biko(&["evolve", "--dim", "2", "--input", input.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}
