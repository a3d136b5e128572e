use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relaxlab"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

const RELAX_MASS: &str = r#"{
  "name": "relax-mass",
  "model": {"flux": {"kind": "quadratic"}, "isotherm": {"kind": "langmuir", "beta": 1.0}},
  "grid": {"n_coarse": 20, "refine": 4},
  "scheme": {"dt": 0.05, "horizon": 0.25},
  "sweeps": {"mu": [10, 100, 1000]}
}"#;

#[test]
fn list_experiments_names_every_entry() {
    let out = bin().arg("list-experiments").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "layer-demo",
        "splitting-order",
        "stiff-regime",
        "equilibrium-limit",
        "contraction",
        "mollified-validation",
        "relax-mass",
    ] {
        assert!(text.lines().any(|l| l.starts_with(name)), "{name} missing from\n{text}");
    }
}

#[test]
fn sweep_outputs_are_byte_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", RELAX_MASS);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let status = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&a)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let status = bin()
        .args(["run", "--parallel", "3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let fa = files_under(&a);
    assert_eq!(fa, files_under(&b));
    for f in &fa {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{}", f.display());
    }
    for f in ["manifest.json", "results.json", "diagnostics.json"] {
        assert!(fa.contains(&PathBuf::from(f)), "{f}");
    }
}

#[test]
fn manifest_echoes_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"name": "layer-demo", "grid": {"n_coarse": 10}, "scheme": {"dt": 0.1, "horizon": 0.2}}"#,
    );
    let out = dir.path().join("o");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["grid"]["refine"], 8);
    assert_eq!(manifest["scheme"]["courant"], 0.9);
    assert_eq!(manifest["scheme"]["ordering"], "classical");
    assert_eq!(manifest["scheme"]["nu"], "infinite");
    assert_eq!(manifest["initial_data"]["kind"], "layer_demo");

    let run = fs::read_to_string(out.join("run.csv")).unwrap();
    assert!(run.starts_with("step,t,phase,l1_u,l1_v,tv_u,tv_v,mass_u_plus_v,relax_mass_cum,entropy_residual_max\n"));
    let pre = fs::read_to_string(out.join("fields/event_0001_pre.csv")).unwrap();
    let post = fs::read_to_string(out.join("fields/event_0001_post.csv")).unwrap();
    assert!(pre.starts_with("x,u,v\n"));
    assert_ne!(pre, post);
    let diag: serde_json::Value = serde_json::from_slice(&fs::read(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["first_event_jump"]["pass"], true);
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"name": "layer-demo", "scheme": {"dt": 0.3, "horizon": 1.0}}"#,
    );
    let out = bin().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("scheme.horizon") && err.contains("0.3"), "{err}");

    let out = bin()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.json"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn failed_checks_exit_with_two() {
    // a single coarse grid makes the refinement study too short to pass
    // the rate bound with one point; two nearly equal h values stall
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{
  "name": "equilibrium-limit",
  "grid": {"refine": 1},
  "scheme": {"courant": 1.0, "horizon": 0.5},
  "sweeps": {"h": [0.1, 0.1]}
}"#,
    );
    let out = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stderr).unwrap().contains("violation"));
}

#[test]
fn env_var_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"name": "layer-demo", "grid": {"n_coarse": 4}, "scheme": {"dt": 0.25, "horizon": 0.25}}"#,
    );
    let target = dir.path().join("from-env");
    let status = bin()
        .env("RELAXLAB_OUT", &target)
        .args(["run", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(target.join("manifest.json").is_file());
}

#[test]
fn custom_csv_resolves_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("x,u,v\n");
    for i in 0..8 {
        csv.push_str(&format!("{},{},{}\n", (i as f64 + 0.5) / 8.0, if i < 4 { 0.8 } else { 0.2 }, 0.1));
    }
    fs::write(dir.path().join("init.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{
  "name": "splitting-order",
  "grid": {"n_coarse": 4, "refine": 2},
  "scheme": {"dt": 0.25, "horizon": 0.5},
  "initial_data": {"kind": "custom_csv", "path": "init.csv"}
}"#,
    );
    let out = dir.path().join("o");
    let status = bin().args(["run", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let init = fs::read_to_string(out.join("ordering=classical/fields/initial.csv")).unwrap();
    assert_eq!(init.lines().count(), 9);
}
