use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nlergodic"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn summary(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const CONSTANT: &str = r#"{
  "command": "ergodic",
  "source": { "family": "constant", "c0": 3.0, "m": 3.0 },
  "numeric": { "h": 0.05, "R": 3.0, "tol": 1e-12 },
  "sigma_schedule": [0.5, 0.25, 0.125]
}"#;

#[test]
fn constant_source_gives_exact_lambda() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONSTANT);
    let out = dir.path().join("s.json");
    let st = bin().arg("-c").arg(&cfg).arg("--json-out").arg(&out).arg("--csv-dir").arg(dir.path().join("csv")).status().unwrap();
    assert!(st.success());
    let s = summary(&out);
    let lam = s["result"]["lambda_star"]["value"].as_f64().unwrap();
    assert!((lam - 3.0).abs() < 1e-8, "{lam}");
    assert_eq!(s["constants"]["lambda_star"].as_f64().unwrap(), lam);
    let csv = std::fs::read_to_string(dir.path().join("csv/ergodic_profile.csv")).unwrap();
    assert!(csv.starts_with("node,x,u,psi,theta,residual\n"));
    // Profiles live on the last grid: R = 3 + 2 * 2, plus the unit band.
    assert_eq!(csv.lines().count(), 1 + 2 * 160 + 1);
}

#[test]
fn h_override_reaches_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", CONSTANT);
    let out = dir.path().join("s.json");
    let st = bin().arg("solve").arg("-c").arg(&cfg).args(["--h", "0.025", "--R", "2"]).arg("--json-out").arg(&out).status().unwrap();
    // `solve` needs a positive numeric.sigma.
    assert_eq!(st.code(), Some(2));
    let text = CONSTANT.replace("\"tol\": 1e-12", "\"tol\": 1e-12, \"sigma\": 0.25");
    let cfg = write(dir.path(), "c2.json", &text);
    let st = bin().arg("solve").arg("-c").arg(&cfg).args(["--h", "0.025", "--R", "2"]).arg("--json-out").arg(&out).status().unwrap();
    assert!(st.success());
    let s = summary(&out);
    assert_eq!(s["config"]["numeric"]["h"].as_f64(), Some(0.025));
    assert_eq!(s["config"]["numeric"]["R"].as_f64(), Some(2.0));
    assert_eq!(s["command"], "solve");
    assert!((s["result"]["lambda_sigma"].as_f64().unwrap() - 3.0).abs() < 1e-8);
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"command":"ergodic","source":{"family":"power","c":1,"alpha":2}}"#);
    let out = bin().arg("-c").arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("source") && err.contains("`m`"), "{err}");
}

#[test]
fn unknown_flag_prints_usage() {
    let out = bin().args(["-c", "x.json", "--bogus"]).output().unwrap();
    assert_ne!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn verify_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "v.json",
        r#"{"command":"verify","source":{"family":"power","c":1,"alpha":2,"m":3,"shift":1},"numeric":{"h":0.05,"R":4}}"#,
    );
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        assert!(bin().arg("-c").arg(&cfg).args(["--seed", seed]).arg("--json-out").arg(&out).status().unwrap().success());
        std::fs::read_to_string(out).unwrap()
    };
    let (a, b) = (run("a.json", "11"), run("b.json", "11"));
    assert_eq!(a, b);
    let s: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(s["result"]["passed"], true);
    assert_eq!(s["seed"], 11);
}
