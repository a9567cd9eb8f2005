use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_rcinar");

const SIMULATE: &str = r#"
experiment = "simulate"
n = 50
reps = 3
seed = 7
model.phi.kind = "degenerate"
model.phi.p = 0.5
model.z.kind = "poisson"
model.z.lambda = 2.0
"#;

const EXTREMES: &str = r#"
n = 1000
reps = 300
seed = 3
model.phi.kind = "beta_shape"
model.phi.a = 2.0
model.phi.b = 2.0
model.z.kind = "discrete_pareto"
model.z.alpha = 1.5
model.z.sigma = 1.0
"#;

fn rcinar(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SIMULATE);
    let out = dir.path().join("out");
    let o = rcinar(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("simulate.json")).unwrap()).unwrap();
    assert_eq!(summary["schema"], 1);
    assert_eq!(summary["seed"], 7);
    for key in ["experiment", "model", "n", "reps", "estimates", "targets", "ks", "pass"] {
        assert!(summary.get(key).is_some(), "missing {key}");
    }
    let csv = fs::read_to_string(out.join("simulate.csv")).unwrap();
    assert!(csv.starts_with("replica,step,x,survivors,z,phi\n"));
    assert_eq!(csv.lines().count(), 1 + 150);
    assert!(!csv.contains('\r'));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(manifest["streams"][0]["ids"].as_array().unwrap().len(), 3);
}

#[test]
fn same_seed_same_files_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ext.toml", EXTREMES);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let c = dir.path().join("c");
    let o = rcinar(&["extremes", "--config", &cfg, "--out", a.to_str().unwrap(), "--workers", "1"]);
    assert!(matches!(o.status.code(), Some(0 | 2)), "{}", String::from_utf8_lossy(&o.stderr));
    rcinar(&["extremes", "--config", &cfg, "--out", b.to_str().unwrap(), "--workers", "8"]);
    let manifest = a.join("manifest.json");
    rcinar(&["replay", "--manifest", manifest.to_str().unwrap(), "--out", c.to_str().unwrap()]);
    for file in ["extremes.json", "extremes.csv"] {
        let first = fs::read(a.join(file)).unwrap();
        assert_eq!(first, fs::read(b.join(file)).unwrap(), "{file} differs across workers");
        assert_eq!(first, fs::read(c.join(file)).unwrap(), "{file} differs on replay");
    }
}

#[test]
fn overrides_change_seed_and_reps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ext.toml", EXTREMES);
    let out = dir.path().join("o");
    rcinar(&["extremes", "--config", &cfg, "--out", out.to_str().unwrap(), "--seed", "99", "--reps", "200"]);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("extremes.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 99);
    assert_eq!(summary["reps"], 200);
}

#[test]
fn statistical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "ext.toml", &format!("{EXTREMES}tolerance = 0.0\n"));
    let o = rcinar(&["extremes", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.toml", &SIMULATE.replace("p = 0.5", "p = 1.0"));
    let o = rcinar(&["simulate", "--config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(A1)"));

    let unknown = write_config(dir.path(), "unknown.toml", &format!("{SIMULATE}model.z.rate = 1\n"));
    let o = rcinar(&["simulate", "--config", &unknown]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("model.z.rate"));

    // the output path is a file, so the directory cannot be created
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(dir.path(), "sim.toml", SIMULATE);
    let o = rcinar(&["simulate", "--config", &cfg, "--out", blocker.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("file"));

    let o = rcinar(&["nonsense", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
}
