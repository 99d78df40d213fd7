use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
tolerances = [8.0, 7.0]
n_particles = 60
menu = ["direct-ode-binom", "direct-ctmc-binom", "indirect-ode-pois"]
"#;

fn epiabc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epiabc"))
        .args(args)
        .current_dir(dir)
        .env_remove("EPIABC_SEED")
        .env_remove("EPIABC_THREADS")
        .output()
        .unwrap()
}

fn write_inputs(dir: &Path) {
    let mut csv = String::from("epidemic,year,a,m,c_tilde\n");
    let first = [0, 2, 5, 7, 9, 12, 14, 15, 17, 19, 20];
    for (k, c) in first.iter().enumerate() {
        csv.push_str(&format!("1,{},3,0.05,{c}\n", 1974 + k));
    }
    let second = [0, 3, 4, 6, 9, 10, 13, 15, 16, 18];
    for (k, c) in second.iter().enumerate() {
        csv.push_str(&format!("2,{},3,0.05,{c}\n", 1992 + k));
    }
    fs::write(dir.join("data.csv"), csv).unwrap();
    fs::write(dir.join("run.toml"), CONFIG).unwrap();
}

/// Every file under `root` with its bytes, keyed by relative path.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    fs::read(&path).unwrap(),
                );
            }
        }
    }
    out
}

fn infer(dir: &Path, out: &str, threads: &str) -> Output {
    epiabc(
        &[
            "infer",
            "--data",
            "data.csv",
            "--config",
            "run.toml",
            "--seed",
            "5",
            "--threads",
            threads,
            "--out",
            out,
        ],
        dir,
    )
}

#[test]
fn infer_is_deterministic_across_threads_and_leaves_inputs_alone() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let before = tree(dir.path());

    let a = infer(dir.path(), "run1", "1");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let b = infer(dir.path(), "run2", "3");
    assert!(b.status.success());

    let mut ta = tree(&dir.path().join("run1"));
    let mut tb = tree(&dir.path().join("run2"));
    assert!(ta.remove(Path::new("timing.json")).is_some());
    assert!(tb.remove(Path::new("timing.json")).is_some());
    assert_eq!(ta, tb);
    for f in [
        "data.csv",
        "generations.csv",
        "model_table.csv",
        "param_summary.csv",
        "manifest.json",
    ] {
        assert!(ta.contains_key(Path::new(f)), "missing {f}");
    }
    assert!(ta.contains_key(Path::new("populations/generation_02.csv")));

    let after = tree(dir.path());
    for (path, bytes) in &before {
        assert_eq!(after.get(path), Some(bytes), "{} changed", path.display());
    }

    let table = String::from_utf8(ta[Path::new("model_table.csv")].clone()).unwrap();
    assert_eq!(table.lines().count(), 4);
    let manifest: serde_json::Value =
        serde_json::from_slice(&ta[Path::new("manifest.json")]).unwrap();
    assert_eq!(manifest["completed"], true);
}

#[test]
fn summarize_reproduces_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    assert!(infer(dir.path(), "run", "1").status.success());
    let run = dir.path().join("run");
    let table = fs::read(run.join("model_table.csv")).unwrap();
    let summary = fs::read(run.join("param_summary.csv")).unwrap();
    fs::remove_file(run.join("model_table.csv")).unwrap();
    fs::remove_file(run.join("param_summary.csv")).unwrap();

    let s = epiabc(&["summarize", "--out", "run"], dir.path());
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    assert_eq!(fs::read(run.join("model_table.csv")).unwrap(), table);
    assert_eq!(fs::read(run.join("param_summary.csv")).unwrap(), summary);
}

#[test]
fn simulate_from_run_uses_fitted_model() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    assert!(infer(dir.path(), "run", "1").status.success());
    let s = epiabc(
        &[
            "simulate",
            "--from-run",
            "run",
            "--reps",
            "5",
            "--out",
            "sim",
        ],
        dir.path(),
    );
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let ensemble = fs::read_to_string(dir.path().join("sim/ensemble.csv")).unwrap();
    assert_eq!(ensemble.lines().count(), 1 + 5 * 21);
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("sim/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["reps"], 5);
}

#[test]
fn study_writes_aggregate_tables() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());
    let s = epiabc(
        &[
            "study",
            "--scenario",
            "b",
            "--n",
            "3",
            "--seed",
            "7",
            "--config",
            "run.toml",
            "--out",
            "study",
        ],
        dir.path(),
    );
    assert!(s.status.success(), "{}", String::from_utf8_lossy(&s.stderr));
    let out = dir.path().join("study");
    for f in [
        "outcomes.csv",
        "recovery.csv",
        "rank_distribution.csv",
        "bf_histogram.csv",
        "manifest.json",
        "timing.json",
        "datasets/dataset_01/data.csv",
        "datasets/dataset_03/data.csv",
    ] {
        assert!(out.join(f).is_file(), "missing {f}");
    }
    let outcomes = fs::read_to_string(out.join("outcomes.csv")).unwrap();
    let failures = fs::read_to_string(out.join("failures.csv")).unwrap_or_default();
    assert_eq!(
        outcomes.lines().count().saturating_sub(1) + failures.lines().count().saturating_sub(1),
        3
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    write_inputs(dir.path());

    let no_seed = epiabc(
        &[
            "infer", "--data", "data.csv", "--config", "run.toml", "--out", "x",
        ],
        dir.path(),
    );
    assert_eq!(no_seed.status.code(), Some(2));

    fs::write(dir.path().join("bad.toml"), "n_particles = 10\nbogus = 1\n").unwrap();
    let bad_cfg = epiabc(
        &[
            "infer", "--data", "data.csv", "--config", "bad.toml", "--seed", "1",
        ],
        dir.path(),
    );
    assert_eq!(bad_cfg.status.code(), Some(2));

    let no_data = epiabc(
        &[
            "infer",
            "--data",
            "missing.csv",
            "--config",
            "run.toml",
            "--seed",
            "1",
        ],
        dir.path(),
    );
    assert_eq!(no_data.status.code(), Some(3));

    fs::write(
        dir.path().join("tight.toml"),
        format!("{CONFIG}max_attempts = 50\ntolerances = [0.01]\n")
            .replace("tolerances = [8.0, 7.0]\n", ""),
    )
    .unwrap();
    let tight = epiabc(
        &[
            "infer",
            "--data",
            "data.csv",
            "--config",
            "tight.toml",
            "--seed",
            "1",
            "--out",
            "tight",
        ],
        dir.path(),
    );
    assert_eq!(tight.status.code(), Some(4));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("tight/manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["completed"], false);

    let unknown = epiabc(&["study", "--scenario", "z", "--seed", "1"], dir.path());
    assert_eq!(unknown.status.code(), Some(2));
}
