use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn pilotwave(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pilotwave"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SMALL: &str = "[grid]\npoints = 64\nlength = 20.0\n[integrator]\nsteps = 100\nrecord_every = 10\n";

#[test]
fn identical_runs_match_except_timestamp() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), format!("{SMALL}[particles]\ncount = 4\n")).unwrap();
    for out in ["a", "b"] {
        let o = pilotwave(&["trajectories", "s.toml", "--seed", "9", "--out-dir", out], dir.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for file in ["trajectories.csv", "trajectories.svg"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    let (mut ma, mut mb) = (manifest(&a), manifest(&b));
    ma.as_object_mut().unwrap().remove("timestamp");
    mb.as_object_mut().unwrap().remove("timestamp");
    assert_eq!(ma, mb);
    assert_eq!(ma["seed"], 9);
}

#[test]
fn unknown_key_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), "[potental]\nkind = \"zero\"\n").unwrap();
    let o = pilotwave(&["solve", "s.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("potental") && err.contains("`potential`"), "{err}");
}

#[test]
fn particle_outside_box_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), format!("{SMALL}[particles]\npositions = [[25.0]]\n")).unwrap();
    let o = pilotwave(&["trajectories", "s.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("particles.positions[0]"));
}

#[test]
fn equivariance_manifest_reports_the_statistic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), format!("{SMALL}[ensemble]\nsamples = 500\n")).unwrap();
    let o = pilotwave(&["equivariance", "s.toml", "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["report"]["pass"], true);
    assert!(m["report"]["checkpoints"][0]["statistic"].as_f64().unwrap() < 0.1);
    assert!(dir.path().join("out/equivariance.json").exists());
}

#[test]
fn compare_cn_adds_distance_column() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.toml"), SMALL).unwrap();
    let o = pilotwave(&["evolve", "s.toml", "--compare-cn", "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("out/evolve.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("time,norm,energy,constraint_residual,l2_to_cn"));
}

#[test]
fn numerical_failure_still_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let text = "sector = \"dirac\"\n[grid]\npoints = 32\nlength = 6.0\n[dirac]\nwaves = [{ momentum = [0.5, 0.0, 0.0], amplitude = [0.0, 0.0] }]\n";
    fs::write(dir.path().join("s.toml"), text).unwrap();
    let o = pilotwave(&["dirac", "s.toml", "--out-dir", "out"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["status"], "numerical-failure");
    assert!(m["error"].as_str().unwrap().contains("lightlike"));
}

#[test]
fn global_overrides_reach_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = pilotwave(&["scalar-field", "--hbar", "1.0", "--seed", "5", "--out-dir", "out"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&dir.path().join("out"));
    assert_eq!(m["scenario"]["sector"], "scalar-field");
    assert_eq!(m["scenario"]["seed"], 5);
    assert_eq!(m["conventions"]["lattice_delta"], "delta_ij / dx^d");
}
