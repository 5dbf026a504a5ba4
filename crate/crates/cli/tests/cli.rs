use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use linbayes_cli::artifacts::Manifest;
use linbayes_cli::{AnyModel, PipelineConfig, Problem};
use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::Value;
use tempfile::TempDir;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn linbayes(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_linbayes"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_in(dir: &Path, sub: &str, config: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    linbayes(&args)
}

fn manifest(dir: &Path) -> Manifest {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Example config with edits, written into `dir`.
fn edited(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(&fs::read_to_string(example(name)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(format!("edited-{name}"));
    fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn linear_example_runs_to_completion() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), "run", &example("linear_small.json"), &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = manifest(tmp.path());
    assert!(m.map_gradnorm_reduction.unwrap() <= 1e-6);
    assert!(m.map.as_ref().unwrap().converged);
    assert!(m.failure.is_none());
    for stage in ["map", "spectrum", "variance", "sample-prior", "sample-posterior"] {
        assert_eq!(m.stages[stage].status, "ok");
    }
    for (name, record) in &m.files {
        let bytes = fs::read(tmp.path().join(name)).unwrap();
        assert_eq!(linbayes_cli::artifacts::sha256_hex(&bytes), record.sha256, "{name}");
    }
    assert!(!tmp.path().join(".linbayes.lock").exists());
    let spectrum = m.spectrum.unwrap();
    assert_eq!(spectrum.rank, spectrum.lambdas.len());
    assert!(m.files.contains_key("eigenvector_001.csv"));
}

#[test]
fn identical_seeds_give_identical_checksums() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = run_in(dir.path(), "run", &example("linear_small.json"), &[]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    assert_eq!(manifest(a.path()).files, manifest(b.path()).files);

    let c = TempDir::new().unwrap();
    let out = run_in(c.path(), "run", &example("linear_small.json"), &["--seed-data", "5"]);
    assert!(out.status.success());
    assert_ne!(manifest(a.path()).files["map.csv"], manifest(c.path()).files["map.csv"]);
}

#[test]
fn negative_noise_is_a_config_error_with_path() {
    let tmp = TempDir::new().unwrap();
    let config = edited(tmp.path(), "linear_small.json", |v| v["model"]["noise_sigma"] = (-0.01).into());
    let out = run_in(&tmp.path().join("out"), "run", &config, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("model.noise_sigma"), "{}", stderr(&out));
}

#[test]
fn unknown_keys_are_config_errors() {
    let tmp = TempDir::new().unwrap();
    let config = edited(tmp.path(), "linear_small.json", |v| v["prior"]["gamma"] = 1.0.into());
    let out = run_in(&tmp.path().join("out"), "map", &config, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("prior"), "{}", stderr(&out));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let out = run_in(tmp.path(), "map", &tmp.path().join("nope.json"), &[]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn prior_samples_are_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let args = ["--count", "4", "--seed", "7"];
    for dir in [&a, &b] {
        let out = run_in(dir.path(), "sample-prior", &example("linear_small.json"), &args);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for k in 0..4 {
        let name = format!("prior_sample_{k:03}.csv");
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap());
    }
    assert!(!a.path().join("prior_sample_004.csv").exists());
    let samples = manifest(a.path())
        .files
        .keys()
        .filter(|k| k.starts_with("prior_sample_"))
        .count();
    assert_eq!(samples, 4);

    let c = TempDir::new().unwrap();
    run_in(c.path(), "sample-prior", &example("linear_small.json"), &["--count", "4", "--seed", "8"]);
    assert_ne!(
        fs::read(a.path().join("prior_sample_000.csv")).unwrap(),
        fs::read(c.path().join("prior_sample_000.csv")).unwrap()
    );
}

#[test]
fn spectrum_matches_dense_eigensolve() {
    let tmp = TempDir::new().unwrap();
    let config = example("linear_small.json");
    assert!(run_in(tmp.path(), "map", &config, &[]).status.success());
    let out = run_in(tmp.path(), "spectrum", &config, &[]);
    assert!(out.status.success(), "{}", stderr(&out));

    let text = fs::read_to_string(tmp.path().join("spectrum.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("index,lambda"));
    let lambdas: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();

    let problem = Problem::build(&PipelineConfig::from_path(&config).unwrap()).unwrap();
    let AnyModel::Linear(model) = &problem.model else {
        panic!("linear example")
    };
    let m = problem.prior.mspace().mass().to_dense();
    let k = problem.prior.stiffness().to_dense();
    let g = model.matrix();
    let sigma = 0.01;
    // M H̃ = M K⁻¹ M M⁻¹ Gᵀ G K⁻¹ M / σ² is symmetric; solve M H̃ x = λ M x.
    let s = k.clone().lu().solve(&m).unwrap();
    let gs = g * &s;
    let mh = gs.transpose() * &gs / (sigma * sigma);
    let l = m.clone().cholesky().unwrap().l();
    let l_inv = l.clone().try_inverse().unwrap();
    let sym = &l_inv * &mh * l_inv.transpose();
    let sym: DMatrix<f64> = (&sym + sym.transpose()) * 0.5;
    let mut dense: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    dense.sort_by(|a, b| b.total_cmp(a));

    assert!(!lambdas.is_empty());
    for (i, l) in lambdas.iter().enumerate() {
        assert!((l - dense[i]).abs() < 1e-8 * dense[0], "{i}: {l} vs {}", dense[i]);
    }
    let threshold = 0.1;
    assert_eq!(lambdas.len(), dense.iter().filter(|&&d| d >= threshold).count());
}

#[test]
fn missing_upstream_stages_exit_five() {
    let tmp = TempDir::new().unwrap();
    let config = example("linear_small.json");
    let out = run_in(tmp.path(), "variance", &config, &[]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("`spectrum`"), "{}", stderr(&out));
    assert_eq!(manifest(tmp.path()).failure.unwrap().stage, "variance");

    let out = run_in(tmp.path(), "spectrum", &config, &[]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("`map`"));

    let out = run_in(tmp.path(), "sample-posterior", &config, &[]);
    assert_eq!(out.status.code(), Some(5));
}

#[test]
fn stale_state_is_treated_as_missing() {
    let tmp = TempDir::new().unwrap();
    let config = example("linear_small.json");
    assert!(run_in(tmp.path(), "map", &config, &[]).status.success());
    let out = run_in(tmp.path(), "spectrum", &config, &["--seed-data", "99"]);
    assert_eq!(out.status.code(), Some(5));
    assert!(stderr(&out).contains("different configuration"));

    // the Lanczos seed does not affect the MAP point
    let out = run_in(tmp.path(), "spectrum", &config, &["--seed-lanczos", "4"]);
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn staged_runs_match_a_full_run() {
    let full = TempDir::new().unwrap();
    let staged = TempDir::new().unwrap();
    let config = example("linear_small.json");
    assert!(run_in(full.path(), "run", &config, &[]).status.success());
    for sub in ["map", "spectrum", "variance", "sample-prior", "sample-posterior"] {
        let out = run_in(staged.path(), sub, &config, &[]);
        assert!(out.status.success(), "{sub}: {}", stderr(&out));
    }
    let out = run_in(staged.path(), "run", &config, &["--stage", "variance"]);
    assert!(out.status.success());
    assert_eq!(manifest(full.path()).files, manifest(staged.path()).files);
}

#[test]
fn locked_output_directory_is_refused() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join(".linbayes.lock"), "1").unwrap();
    let out = run_in(tmp.path(), "sample-prior", &example("linear_small.json"), &[]);
    assert_eq!(out.status.code(), Some(4));
    assert!(stderr(&out).contains("in use"));
}

#[test]
fn thread_cap_is_validated() {
    let tmp = TempDir::new().unwrap();
    let config = example("linear_small.json");
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_linbayes"))
            .args(["sample-prior", "--config", config.to_str().unwrap()])
            .args(["--out", tmp.path().to_str().unwrap(), "--count", "1"])
            .env("LINBAYES_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run("zero").status.code(), Some(2));
    assert!(run("2").status.success());
}

#[test]
fn model_failures_exit_three_and_keep_a_failure_note() {
    let tmp = TempDir::new().unwrap();
    // a truth this fast violates the time step bound
    let config = edited(tmp.path(), "wave1d_small.json", |v| v["truth"]["amplitude"] = 0.6.into());
    let out_dir = tmp.path().join("out");
    let out = run_in(&out_dir, "run", &config, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let m = manifest(&out_dir);
    let failure = m.failure.unwrap();
    assert_eq!(failure.stage, "map");
    assert_eq!(failure.exit_code, 3);
    assert_eq!(m.stages["map"].status, "failed");
}

#[test]
fn wave_example_exports_seismograms() {
    let tmp = TempDir::new().unwrap();
    let config = example("wave1d_small.json");
    let out = run_in(tmp.path(), "map", &config, &[]);
    assert!(out.status.success(), "{}", stderr(&out));
    let m = manifest(tmp.path());
    assert!(m.map_gradnorm_reduction.unwrap() <= 1e-6);
    let objective = &m.map.unwrap().objective_history;
    assert!(objective.windows(2).all(|w| w[1] < w[0]));
    for name in ["seismograms_truth.csv", "seismograms_map.csv"] {
        let text = fs::read_to_string(tmp.path().join(name)).unwrap();
        assert!(text.starts_with("time,receiver_id,value\r\n"));
        assert_eq!(text.lines().count(), 1 + 4 * 80);
    }
}
