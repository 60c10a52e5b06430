use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_droplet-lab"));
    c.env_remove("DROPLET_LAB_THREADS");
    c
}

fn run(args: &[&str], dir: &Path) -> i32 {
    let out = bin().args(args).current_dir(dir).output().unwrap();
    out.status.code().unwrap()
}

fn without_metadata(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("metadata");
    v
}

#[test]
fn fekete_output_is_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (threads, sub) in [("1", "a"), ("2", "b")] {
        let out = format!("{sub}/fekete.csv");
        assert_eq!(run(&["--threads", threads, "fekete", "--N", "7", "--seed", "5", "--out", &out], d), 0);
    }
    let a = std::fs::read(d.join("a/fekete.csv")).unwrap();
    let b = std::fs::read(d.join("b/fekete.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        without_metadata(&d.join("a/fekete_summary.json")),
        without_metadata(&d.join("b/fekete_summary.json"))
    );
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("idx,re,im\n"));
    assert_eq!(text.lines().count(), 8);
    assert!(d.join("a/effective_config.json").exists());
}

#[test]
fn sample_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("cfg.json");
    std::fs::write(&cfg, r#"{"grid":{"box":4.0,"nodes":64},"sample":{"N":6,"steps":12000}}"#).unwrap();
    for out in ["s1", "s2"] {
        let code = run(&["--config", cfg.to_str().unwrap(), "sample", "--chains", "2", "--seed", "3", "--out", out], d);
        assert_eq!(code, 0);
    }
    for f in ["chain-3.csv", "chain-4.csv", "marginal.f64"] {
        assert_eq!(std::fs::read(d.join("s1").join(f)).unwrap(), std::fs::read(d.join("s2").join(f)).unwrap(), "{f}");
    }
    let echo = |dir: &str| {
        let mut v: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(d.join(dir).join("effective_config.json")).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("output");
        v
    };
    assert_eq!(echo("s1"), echo("s2"));
    let diag = without_metadata(&d.join("s1/diagnostics.json"));
    assert_eq!(diag, without_metadata(&d.join("s2/diagnostics.json")));
    for key in ["acceptance", "overflow_mass", "tv_to_sigma_hat", "diagonality_stat"] {
        assert!(diag[key].is_number(), "{key}");
    }
    let header = std::fs::read_to_string(d.join("s1/chain-3.csv")).unwrap();
    assert!(header.starts_with("step,particle,re,im\n"));
}

#[test]
fn equilibrium_and_kernel_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["equilibrium", "--tau", "1", "--grid", "64", "--out", "eq"], d), 0);
    for f in ["u.f64", "indicator.f64", "sigma.f64"] {
        let field = droplet_lab::ScalarField::read_f64(d.join("eq").join(f)).unwrap();
        assert_eq!(field.grid().nodes_per_side(), 64);
    }
    let s = without_metadata(&d.join("eq/summary.json"));
    for key in ["tau", "c", "mass", "iterations", "residual", "delta", "kappa", "C_tau"] {
        assert!(s[key].is_number(), "{key}");
    }
    std::fs::write(d.join("pts.csv"), "re,im\n0,0\n0.1,-0.2\n").unwrap();
    assert_eq!(run(&["kernel", "--N", "3", "--beta", "2", "--eval", "pts.csv", "--eval-out", "k.csv"], d), 0);
    let k = std::fs::read_to_string(d.join("k.csv")).unwrap();
    let first: Vec<f64> = k.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((first[2] - 2.0 / std::f64::consts::PI).abs() < 1e-10);
    assert!(d.join("basis.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("bad.json"), r#"{"potential":{"family":"elbau_felder","a":1.5}}"#).unwrap();
    assert_eq!(run(&["--config", "bad.json", "fekete"], d), 2);
    std::fs::write(d.join("unknown.json"), r#"{"fekete":{"N":4,"colour":1}}"#).unwrap();
    assert_eq!(run(&["--config", "unknown.json", "fekete"], d), 2);
    assert_eq!(run(&["fekete", "--N", "1"], d), 2);
    assert_eq!(run(&["equilibrium", "--grid", "64", "--box", "0.5", "--out", "t"], d), 3);
    assert_eq!(run(&["verify", "--only", "nope"], d), 2);
    assert_eq!(run(&["verify", "--only", "1", "--tol", "kernel-closed-form.max_relative_error=0", "--out", "v"], d), 4);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("v/verify_report.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], false);
    assert!(report["metadata"]["timestamp"].is_number());
    let out = bin().args(["--threads", "0", "verify"]).current_dir(d).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["verify", "--only", "1"]).env("DROPLET_LAB_THREADS", "0").current_dir(d).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
