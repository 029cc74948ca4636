//! End-to-end runs of the binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_e3surf"))
}

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(cmd: &str, cfg: &Path, extra: &[&str]) -> Output {
    bin().arg(cmd).arg("--config").arg(cfg).args(extra).output().unwrap()
}

const CLIFFORD: &str = "[model]\nkappa = 1.0\ntau = 1.0\n[surface]\nkind = \"clifford\"\n[grid]\nnu = 48\nnv = 48\n";

#[test]
fn verify_passes_and_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.toml", CLIFFORD);
    let (json, csv) = (dir.path().join("r.json"), dir.path().join("r.csv"));
    let out = run("verify", &cfg, &["--json", json.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["command"], "verify");
    assert_eq!(v["checks"].as_array().unwrap().len(), 12);
    let table = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(table.lines().count(), 13);
}

#[test]
fn json_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "p.toml",
        "[model]\nkappa = 1.0\ntau = 1.0\n[surface]\nkind = \"perturbed\"\n[grid]\nnu = 32\nnv = 32\n",
    );
    let reports: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let p = dir.path().join("r.json");
            run("verify", &cfg, &["--json", p.to_str().unwrap()]);
            std::fs::read(p).unwrap()
        })
        .collect();
    assert!(!reports[0].is_empty());
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "s.json",
        r#"{"checks": ["structural", "kato"], "model": {"kappa": 1, "tau": 0},
            "surface": {"kind": "slice"}, "grid": {"nu": 48, "nv": 48}}"#,
    );
    assert_eq!(run("verify", &cfg, &[]).status.code(), Some(0));
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad_model = config(dir.path(), "a.toml", "[model]\nkappa = 4.0\ntau = 1.0\n[surface]\nkind = \"clifford\"\n");
    assert_eq!(run("verify", &bad_model, &[]).status.code(), Some(2));
    let unknown = config(dir.path(), "b.toml", &format!("checks = [\"simons\", \"bogus\"]\n{CLIFFORD}"));
    assert_eq!(run("verify", &unknown, &[]).status.code(), Some(2));
    let ok = config(dir.path(), "c.toml", CLIFFORD);
    assert_eq!(run("verify", &ok, &["--grid", "8"]).status.code(), Some(2));
    assert_eq!(run("verify", &dir.path().join("missing.toml"), &[]).status.code(), Some(2));
}

#[test]
fn tight_tolerance_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        dir.path(),
        "p.toml",
        "checks = [\"simons\"]\n[model]\nkappa = 1.0\ntau = 1.0\n[surface]\nkind = \"perturbed\"\n\
         [grid]\nnu = 32\nnv = 32\n[tolerances]\npointwise = 1e-14\nintegral = 1e-14\n",
    );
    assert_eq!(run("verify", &cfg, &[]).status.code(), Some(1));
}

#[test]
fn flow_with_zero_steps_reports_the_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "f.toml", &format!("{CLIFFORD}[flow]\nr0 = 0.4\nmax_steps = 0\n"));
    let csv = dir.path().join("t.csv");
    let out = run("flow", &cfg, &["--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 2);
}

#[test]
fn flow_converges_to_the_critical_torus() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "f.toml", CLIFFORD);
    let json = dir.path().join("f.json");
    let out = run("flow", &cfg, &["--json", json.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("r_final"), "{text}");
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
    assert_eq!(v["converged"], true);
}

#[test]
fn energy_and_convergence_commands() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "c.toml", CLIFFORD);
    let out = run("energy", &cfg, &[]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!out.stdout.is_empty());
    let conv = config(
        dir.path(),
        "v.toml",
        "[model]\nkappa = 1.0\ntau = 1.0\n[surface]\nkind = \"perturbed\"\n\
         [convergence]\ncheck = \"divergence_lemma\"\nsizes = [32, 64, 128]\n",
    );
    assert_eq!(run("convergence", &conv, &[]).status.code(), Some(0));
}
