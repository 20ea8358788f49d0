use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use densocp::ctrl::ControllerArtifact;
use densocp::pipeline::RolloutSummary;
use densocp::polybasis::Monomial;

fn densocp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densocp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = densocp(args);
    assert!(
        out.status.success(),
        "densocp {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn summary(dir: &Path) -> RolloutSummary {
    serde_json::from_str(&fs::read_to_string(dir.join("rollout_summary.json")).unwrap()).unwrap()
}

#[test]
fn example1_run_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let stdout = ok(&["run", "--preset", "example1", "--out", out]);
    assert!(stdout.contains("synthesis: optimal"), "{stdout}");
    for f in [
        "config.json",
        "data_0.csv",
        "data_0.json",
        "data_1.csv",
        "generators.json",
        "program.json",
        "sdp.txt",
        "solution.json",
        "controller.json",
        "rollout_summary.json",
        "certificate.json",
    ] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }

    let ctl = ControllerArtifact::from_json(&fs::read_to_string(dir.path().join("controller.json")).unwrap()).unwrap();
    let a0 = ctl.a.eval(&[0.0, 0.0]);
    assert!(a0 > 0.0);
    let k = ctl.c[0].scale(1.0 / a0);
    let x1x2 = k.coeff(&Monomial::from_exponents(&[1, 1])).abs();
    let (dominant, _) = k
        .terms()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .unwrap();
    assert_eq!(*dominant, Monomial::from_exponents(&[1, 1]), "k = {k}");
    assert!(x1x2 > 0.1, "k = {k}");
    assert!(summary(dir.path()).runs.iter().all(|r| r.converged));
}

#[test]
fn stages_replay_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let common = ["--preset", "example1", "--out", out];
    let stage = |name: &str| ok(&[&[name][..], &common[..]].concat());
    stage("collect");
    stage("estimate");
    let first = stage("synthesize");
    fs::remove_file(dir.path().join("generators.json")).unwrap();
    stage("estimate");
    assert_eq!(stage("synthesize"), first);
    stage("rollout");
    stage("certify");
}

#[test]
fn missing_prerequisite_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let out = densocp(&["synthesize", "--preset", "example1", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stage `synthesize`") && err.contains("generators.json"), "{err}");

    let out = densocp(&["rollout", "--preset", "example1", "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("stage `rollout`"));
}

#[test]
fn invalid_arguments_fail_before_any_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let out = out.to_str().unwrap();
    for args in [
        vec!["collect", "--out", out],
        vec!["collect", "--preset", "duffing", "--out", out],
        vec!["collect", "--preset", "example1", "--basis", "chebyshev:3", "--out", out],
        vec!["collect", "--preset", "example1", "--exclude", "-6,6", "--out", out],
        vec!["collect", "--preset", "example1", "--degree-c", "9", "--out", out],
        vec!["collect", "--preset", "example1", "--norm", "l3", "--out", out],
    ] {
        let res = densocp(&args);
        assert!(!res.status.success(), "{args:?} succeeded");
        assert!(String::from_utf8_lossy(&res.stderr).starts_with("error:"));
    }
    assert!(!dir.path().join("never").exists());
}

#[test]
fn vdp_negative_discount_synthesizes_and_stays_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["run", "--preset", "vdp", "--gamma", "-5", "--out", dir.path().to_str().unwrap()]);
    assert!(stdout.contains("synthesis: optimal"), "{stdout}");
    let s = summary(dir.path());
    assert!(!s.open_loop);
    for r in &s.runs {
        assert!(!r.diverged && r.max_norm.is_finite(), "{r:?}");
        assert!(dir.path().join(&r.csv).exists());
    }
}

#[test]
fn lorentz_open_loop_is_bounded_and_does_not_settle() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&[
        "rollout",
        "--preset",
        "lorentz",
        "--zero-control",
        "--x0",
        "1,1,1",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let s: RolloutSummary = serde_json::from_str(&stdout).unwrap();
    assert!(s.open_loop);
    let r = &s.runs[0];
    assert!(!r.diverged && r.max_norm < 100.0, "{r:?}");
    assert!(!r.converged && r.final_norm > 1.0, "{r:?}");

    let csv = fs::read_to_string(dir.path().join(&r.csv)).unwrap();
    let norms: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|s| s.parse().unwrap()).collect();
            v[1..4].iter().map(|x| x * x).sum::<f64>().sqrt()
        })
        .collect();
    assert!(norms.len() > 1000);
    // still wandering over the last quarter of the horizon
    let tail = &norms[3 * norms.len() / 4..];
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().cloned().fold(0.0, f64::max);
    assert!(hi - lo > 5.0, "tail range [{lo}, {hi}]");
}

#[test]
fn identical_config_gives_identical_datasets() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        ok(&["collect", "--preset", "vdp", "--seed", "7", "--out", d.path().to_str().unwrap()]);
    }
    for f in ["data_0.csv", "data_0.json", "data_1.csv", "data_1.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }

    let c = tempfile::tempdir().unwrap();
    ok(&["collect", "--preset", "vdp", "--seed", "8", "--out", c.path().to_str().unwrap()]);
    assert_ne!(fs::read(a.path().join("data_0.csv")).unwrap(), fs::read(c.path().join("data_0.csv")).unwrap());
}

#[test]
fn config_round_trips_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let json = ok(&["config", "--preset", "pendulum", "--gamma", "2", "--norm", "l1"]);
    let path = dir.path().join("cfg.json");
    fs::write(&path, &json).unwrap();
    assert_eq!(ok(&["config", "--config", path.to_str().unwrap()]), json);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["gamma"], 2.0);
    assert_eq!(v["norm"], "l1");
}
