use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use geomgt_cli::pipeline::{read_report, Layout, Stage, StageTiming};
use geomgt_cli::{run_stage, CliError, PipelineConfig};

fn config_text(out: &Path, workers: usize, method: &str) -> String {
    format!(
        r#"
seed = 11
workers = {workers}
output = "{}"

[transform]
method = "{method}"
iterations = 15

[maf]
lag = 100.0

[variogram]
lag_width = 60.0
lag_count = 8

[grid]
origin = [30.0, 30.0, 0.0]
cell = [60.0, 60.0, 1.0]
counts = [16, 16, 1]

[neighborhood]
radii = [400.0, 400.0, 400.0]
octants = 4
max_per_octant = 4

[simulation]
realizations = 3
lines = 100
harmonics = 20

[validation]
energy_replicates = 39

[synth]
kind = "nonlinear"
n = 300
lines = 100
harmonics = 20
"#,
        out.display()
    )
}

fn config(out: &Path, workers: usize, method: &str) -> PipelineConfig {
    PipelineConfig::from_toml(&config_text(out, workers, method)).unwrap()
}

fn files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn run_all(cfg: &PipelineConfig) {
    run_stage(cfg, Stage::Synth).unwrap();
    run_stage(cfg, Stage::All).unwrap();
}

#[test]
fn full_run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1, "rbig-pca");
    run_all(&cfg);
    let l = Layout::new(dir.path());
    for p in
        [l.declustered(), l.model(), l.factors(), l.maf_factors(), l.decorrelation_json(), l.vario_fit(), l.report()]
    {
        assert!(p.is_file(), "{}", p.display());
    }
    for s in Stage::PIPELINE {
        assert!(l.manifest(s).is_file() && l.timing(s).is_file(), "{s}");
    }
    assert_eq!(fs::read_dir(l.gaussian()).unwrap().count(), 3);
    assert_eq!(fs::read_dir(l.original()).unwrap().count(), 3);
    let report = read_report(&l).unwrap();
    assert_eq!(report.variables, vec!["v1", "v2"]);
    assert!(report.cdf_rmse.iter().all(|v| v.is_finite()));
}

#[test]
fn artifacts_do_not_depend_on_worker_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_all(&config(a.path(), 1, "ppmt"));
    run_all(&config(b.path(), 2, "ppmt"));
    let strip = |m: BTreeMap<PathBuf, Vec<u8>>| -> BTreeMap<PathBuf, Vec<u8>> {
        m.into_iter().filter(|(p, _)| !p.starts_with("timing")).collect()
    };
    let (fa, fb) = (strip(files(a.path())), strip(files(b.path())));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (p, bytes) in &fa {
        assert!(bytes == &fb[p], "{} differs", p.display());
    }
}

#[test]
fn refitting_gives_identical_model_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1, "rbig-ica");
    run_stage(&cfg, Stage::Synth).unwrap();
    run_stage(&cfg, Stage::Decluster).unwrap();
    run_stage(&cfg, Stage::FitTransform).unwrap();
    let first = fs::read(Layout::new(dir.path()).model()).unwrap();
    run_stage(&cfg, Stage::FitTransform).unwrap();
    assert_eq!(first, fs::read(Layout::new(dir.path()).model()).unwrap());
}

#[test]
fn missing_prerequisite_names_the_file_and_records_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1, "rbig-pca");
    let err = run_stage(&cfg, Stage::Simulate).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    match &err {
        CliError::Dependency { path, .. } => assert!(path.starts_with(dir.path())),
        other => panic!("unexpected error {other}"),
    }
    let timing: StageTiming =
        serde_json::from_str(&fs::read_to_string(Layout::new(dir.path()).timing(Stage::Simulate)).unwrap()).unwrap();
    assert_eq!(timing.status, "failed");
    assert!(timing.error.is_some());
}

#[test]
fn corrupted_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), 1, "rbig-pca");
    run_stage(&cfg, Stage::Synth).unwrap();
    run_stage(&cfg, Stage::Decluster).unwrap();
    run_stage(&cfg, Stage::FitTransform).unwrap();
    let model = Layout::new(dir.path()).model();
    let text = fs::read_to_string(&model).unwrap();
    fs::write(&model, &text[..text.len() - 40]).unwrap();
    let err = run_stage(&cfg, Stage::Maf).unwrap_err();
    assert!(matches!(err, CliError::Integrity(_)), "{err}");
    assert_eq!(err.exit_code(), 4);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_geomgt"))
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, config_text(&dir.path().join("out"), 1, "rbig-pca")).unwrap();

    let status = bin().arg("synth").status().unwrap();
    assert_eq!(status.code(), Some(2));

    let out = bin().args(["--config", cfg_path.to_str().unwrap(), "vario"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.json"));

    let status = bin().args(["--config", cfg_path.to_str().unwrap(), "--stage", "maf", "vario"]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let status = bin().args(["--config", cfg_path.to_str().unwrap(), "--stage", "bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let big = u64::MAX.to_string();
    let status = bin().args(["--config", cfg_path.to_str().unwrap(), "--seed", &big, "synth"]).status().unwrap();
    assert_eq!(status.code(), Some(2));

    fs::write(&cfg_path, "seed = 1\nunknown_key = 3\n").unwrap();
    let status = bin().args(["--config", cfg_path.to_str().unwrap(), "synth"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn command_line_overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("run.toml");
    fs::write(&cfg_path, config_text(&dir.path().join("ignored"), 1, "rbig-pca")).unwrap();
    let out = dir.path().join("elsewhere");
    let status = bin()
        .args([
            "--config",
            cfg_path.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            "5",
            "--workers",
            "2",
            "synth",
        ])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(out.join("samples.csv").is_file());
    assert!(!dir.path().join("ignored").exists());
}
