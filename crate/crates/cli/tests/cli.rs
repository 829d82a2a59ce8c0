use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn decolab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_decolab")).args(args).arg("--out").arg(out).output().unwrap()
}

fn shipped(cmd: &str, config: &str, out: &Path) -> Output {
    let path = configs().join(config);
    decolab(&[cmd, "--config", path.to_str().unwrap()], out)
}

fn inline(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn column(out: &Path, file: &str, col: usize) -> Vec<f64> {
    let mut r = csv::Reader::from_path(out.join(file)).unwrap();
    r.records().map(|rec| rec.unwrap()[col].parse().unwrap()).collect()
}

#[test]
fn demo_deficit_decays() {
    let dir = TempDir::new().unwrap();
    let out = shipped("evolve", "demo.toml", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let deficits = column(dir.path(), "decay.csv", 3);
    assert_eq!(deficits.len(), 20);
    assert!(deficits[19] < 1e-4 * deficits[0]);
    let summary = fs::read_to_string(dir.path().join("summary.toml")).unwrap();
    assert!(summary.contains("final_deficit") && summary.contains("passed = true"));
    let header = fs::read_to_string(dir.path().join("decay.csv")).unwrap();
    assert!(header.starts_with("t,expectation (rho(t)|O),equilibrium (rho*|O),deficit"));
}

#[test]
fn identity_observable_is_constant_one() {
    let dir = TempDir::new().unwrap();
    let out = shipped("evolve", "identity.toml", dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(column(dir.path(), "decay.csv", 1).iter().all(|&v| (v - 1.0).abs() < 1e-14));
}

const DIAGONAL: &str = r#"
[spectrum]
omega0 = -1.0
omega_max = 20.0
panels = 4
order = 8

[state]
kind = "energy_diagonal"
bound = [0.2]
profiles = [{ kind = "gaussian", center = 6.0, width = 2.0 }]

[observable]
kind = "random"

[evolve]
times = { kind = "log", start = 0.1, stop = 1000.0, count = 9 }
mode = "auto"
"#;

#[test]
fn energy_diagonal_state_never_decoheres() {
    let dir = TempDir::new().unwrap();
    let cfg = inline(&dir, "diag.toml", DIAGONAL);
    let out = decolab(&["evolve", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(column(&dir.path().join("o"), "decay.csv", 3).iter().all(|&v| v == 0.0));
}

#[test]
fn invalid_configs_exit_one() {
    let dir = TempDir::new().unwrap();
    let unknown = inline(&dir, "a.toml", &DIAGONAL.replace("order = 8", "order = 8\nordr = 9"));
    let out = decolab(&["evolve", "--config", &unknown], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("ordr"));

    let unresolved = inline(&dir, "b.toml", &DIAGONAL.replace("mode = \"auto\"", "mode = \"plain\"").replace("kind = \"energy_diagonal\"\nbound = [0.2]", "kind = \"pure\"\nbound = [[0.2, 0.0]]"));
    let out = decolab(&["evolve", "--config", &unresolved], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Filon"));

    let out = decolab(&["evolve", "--config", "/nonexistent.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pointer_demo_passes_and_writes_tables() {
    let dir = TempDir::new().unwrap();
    let out = shipped("pointer", "pointer.toml", dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    for f in ["eigenvalues.csv", "moments.csv", "commutators.csv", "ensemble.csv", "summary.toml"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(column(dir.path(), "ensemble.csv", 0).iter().all(|&w| w >= 0.0));
}

#[test]
fn check_suite_is_deterministic_and_catches_broken_fixtures() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert_eq!(shipped("check", "check.toml", a.path()).status.code(), Some(0));
    assert_eq!(shipped("check", "check.toml", b.path()).status.code(), Some(0));
    let read = |d: &TempDir| fs::read(d.path().join("summary.toml")).unwrap();
    assert_eq!(read(&a), read(&b));

    let c = TempDir::new().unwrap();
    let path = configs().join("check.toml");
    let out = decolab(&["check", "--config", path.to_str().unwrap(), "--seed", "99"], c.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(read(&c)).unwrap().contains("seed = 99"));

    let broken = shipped("check", "broken_hermiticity.toml", a.path());
    assert_eq!(broken.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&broken.stderr).contains("observable hermiticity"));
    assert!(String::from_utf8_lossy(&read(&a)).contains("passed = false"));
}

const WIGNER: &str = r#"
[wigner]
packet = { q0 = 5.0, sigma = 1.0, p0 = 5.0, half_width = 14.5 }
observables = [{ kind = "identity" }, { kind = "energy_function", profile = { kind = "gaussian", center = 12.0, width = 7.0 } }]
"#;

#[test]
fn wigner_packet_is_normalized_with_positive_ensemble() {
    let dir = TempDir::new().unwrap();
    let cfg = inline(&dir, "w.toml", WIGNER);
    let out = decolab(&["wigner", "--config", &cfg], &dir.path().join("o"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let o = dir.path().join("o");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("PASS normalization of rho^W") && stdout.contains("PASS ensemble weights non-negative"));
    let diffs = column(&o, "pairings.csv", 3);
    assert!(diffs.iter().all(|d| d.abs() < 1e-4));
    assert!(o.join("wigner.csv").exists() && o.join("energy_density.csv").exists());
}
