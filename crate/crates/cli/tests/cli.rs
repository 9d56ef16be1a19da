//! The binary end to end: exit codes, error JSON, manifests, staged runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cantilever"))
}

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/reference.json")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn error_of(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("stderr has an error line");
    serde_json::from_str::<Value>(line).expect("stderr is JSON")["error"].clone()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn help_lists_every_subcommand() {
    let o = run(&["--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for c in ["simulate-campaign", "fit-spectrum", "estimate-q", "regress-noise", "budget", "csl-exclude", "pipeline"] {
        assert!(text.contains(c), "{c} missing from --help");
    }
    assert!(run(&["fit-spectrum", "--help"]).status.success());
}

#[test]
fn usage_error_exits_two_with_json() {
    let o = run(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["kind"], "usage");
}

#[test]
fn zero_force_noise_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["csl-exclude", "--config", s(&config()), "--s-f0", "0", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let e = error_of(&o);
    assert_eq!(e["exit_code"], 2);
    assert!(e["message"].as_str().unwrap().contains("s_f0"));
    assert!(!dir.path().join("manifest.json").exists());
}

#[test]
fn missing_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["estimate-q", "--gains", s(&dir.path().join("absent.csv")), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(error_of(&o)["kind"], "io_error");
}

#[test]
fn degenerate_gain_sweep_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    let gains = dir.path().join("gains.csv");
    fs::write(&gains, "inv_gain,inv_qa,sigma_inv_qa\n0.001,3e-6,1e-8\n0.001,3.1e-6,1e-8\n0.001,2.9e-6,1e-8\n").unwrap();
    let o = run(&["estimate-q", "--gains", s(&gains), "--temperature-k", "0.1", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_of(&o)["exit_code"], 3);
}

#[test]
fn exclusion_manifest_digests_match_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["csl-exclude", "--config", s(&config()), "--s-f0", "1.87e-36", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(dir.path());
    assert_eq!(m["command"], "csl-exclude");
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for f in outputs {
        let bytes = fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"], bytes.len());
        assert_eq!(f["sha256"], cantilever_core::io::sha256_hex(&bytes));
    }
    let csv = fs::read_to_string(dir.path().join("exclusion.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("r_c_m,lambda_max_per_s")));
}

#[test]
fn work_dir_variable_sets_default_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["csl-exclude", "--config", s(&config()), "--s-f0", "2e-36"])
        .env("CANTILEVER_WORK_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("csl-exclude/manifest.json").exists());
}

fn digests(dir: &Path) -> Vec<(String, String)> {
    manifest(dir)["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| (f["path"].as_str().unwrap().to_string(), f["sha256"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn staged_commands_reproduce_the_pipeline() {
    let root = tempfile::tempdir().unwrap();
    let d = |p: &str| root.path().join(p);
    let cfg = config();
    assert!(run(&["pipeline", "--config", s(&cfg), "--seed", "5", "--out", s(&d("pipe"))]).status.success());
    assert!(run(&["simulate-campaign", "--config", s(&cfg), "--seed", "5", "--out", s(&d("sim"))]).status.success());

    let pipe: std::collections::BTreeMap<_, _> = digests(&d("pipe")).into_iter().collect();
    for (path, sha) in digests(&d("sim")) {
        assert_eq!(pipe.get(&path), Some(&sha), "{path} differs between staged and pipeline runs");
    }
    let labels: Vec<String> = fs::read_dir(d("sim/spectra"))
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    assert_eq!(labels.len(), 10);
    let (mut fits, mut qs) = (Vec::new(), Vec::new());
    for l in &labels {
        let q_dir = d(&format!("q/{l}"));
        let f_dir = d(&format!("fit/{l}"));
        let o = run(&["estimate-q", "--gains", s(&d(&format!("sim/ringdowns/{l}.csv"))), "--out", s(&q_dir)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let o = run(&[
            "fit-spectrum",
            "--spectrum",
            s(&d(&format!("sim/spectra/{l}.csv"))),
            "--config",
            s(&cfg),
            "--q-report",
            s(&q_dir.join("q.json")),
            "--out",
            s(&f_dir),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(fs::read(q_dir.join("q.json")).unwrap(), fs::read(d(&format!("pipe/q/{l}.json"))).unwrap());
        assert_eq!(fs::read(f_dir.join("fit.json")).unwrap(), fs::read(d(&format!("pipe/fits/{l}.json"))).unwrap());
        fits.push(f_dir.join("fit.json"));
        qs.push(q_dir.join("q.json"));
    }
    let mut args: Vec<String> = vec!["regress-noise".into(), "--config".into(), s(&cfg).into(), "--fits".into()];
    args.extend(fits.iter().map(|p| s(p).to_string()));
    args.push("--q-reports".into());
    args.extend(qs.iter().map(|p| s(p).to_string()));
    args.extend(["--out".into(), s(&d("reg")).into()]);
    let o = bin().args(&args).output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(d("reg/regression.json")).unwrap(), fs::read(d("pipe/regression.json")).unwrap());

    let o = run(&["budget", "--regression", s(&d("reg/regression.json")), "--config", s(&cfg), "--out", s(&d("bud"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(d("bud/budget.json")).unwrap(), fs::read(d("pipe/budget.json")).unwrap());

    let o = run(&["csl-exclude", "--config", s(&cfg), "--budget", s(&d("bud/budget.json")), "--out", s(&d("csl"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(d("csl/exclusion.csv")).unwrap(), fs::read(d("pipe/exclusion.csv")).unwrap());
}
