use std::fs;
use std::path::{Path, PathBuf};

use greenspace::pipeline::{run_pipeline, run_target, PartialConfig, PipelineConfig, Target};
use greenspace::{Error, Exec};

fn fixture(name: &str) -> PipelineConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name).join("greenspace.toml");
    PipelineConfig::resolve(PartialConfig::from_file(&path).unwrap()).unwrap()
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn hand_fixture_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture("f1f2");
    config.output_dir = tmp.path().to_path_buf();
    let summary = run_pipeline(&config).unwrap();
    let order: Vec<PathBuf> = [
        "rca_t0.csv",
        "rca_t1.csv",
        "proximity.csv",
        "new_green_products.csv",
        "relatedness.csv",
        "densities_pooled.csv",
        "regression_table.txt",
        "regression_table.csv",
        "classification_report.txt",
        "manifest.toml",
    ]
    .iter()
    .map(|n| tmp.path().join(n))
    .collect();
    assert_eq!(summary.files, order);
    assert!(!tmp.path().join(".greenspace.lock").exists());

    let new = fs::read_to_string(tmp.path().join("new_green_products.csv")).unwrap();
    assert_eq!(new, "country,product,rca_t0,rca_t1\nAAA,000004,0,3\nCCC,000002,0,1.5\n");
    let rel = fs::read_to_string(tmp.path().join("relatedness.csv")).unwrap();
    assert_eq!(rel, "country,product,d_value\nAAA,000004,0\nCCC,000002,0.5\n");
    let dens = fs::read_to_string(tmp.path().join("densities_pooled.csv")).unwrap();
    assert_eq!(dens.lines().count(), 513);
    let report = fs::read_to_string(tmp.path().join("classification_report.txt")).unwrap();
    assert!(report.contains("seed: 7"));
    assert!(report.contains("Number of countries"));
}

#[test]
fn single_country_density_is_centred_on_its_value() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture("f1f2");
    config.output_dir = tmp.path().to_path_buf();
    config.countries = vec!["AAA".into()];
    run_pipeline(&config).unwrap();
    let text = fs::read_to_string(tmp.path().join("densities_AAA.csv")).unwrap();
    let actual: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    // One observation at d = 0: the density peaks at the first grid point
    // and decreases from there.
    assert!(actual.windows(2).all(|w| w[1] <= w[0]));
    assert!(actual[0] > 0.0);
}

#[test]
fn failure_removes_partial_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture("f1f2");
    config.output_dir = tmp.path().join("out");
    // BBB adds no green products, so its counterfactual cannot run.
    config.countries = vec!["BBB".into()];
    let err = run_pipeline(&config).unwrap_err();
    match &err {
        Error::Stage { stage, .. } => assert_eq!(*stage, "counterfactual"),
        other => panic!("unexpected error {other}"),
    }
    assert_eq!(err.exit_code(), 3);
    assert!(listing(&config.output_dir).is_empty(), "{:?}", listing(&config.output_dir));
}

#[test]
fn config_errors_precede_computation() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture("f1f2");
    config.output_dir = tmp.path().join("out");
    config.t1 = config.t0;
    let err = run_pipeline(&config).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(!config.output_dir.exists());

    let mut config = fixture("f1f2");
    config.output_dir = tmp.path().join("out");
    config.green = Some(tmp.path().join("absent.txt"));
    let err = run_pipeline(&config).unwrap_err();
    assert!(err.to_string().contains("green"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn sequential_and_parallel_runs_match() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture("synthetic");
    let mut trees = Vec::new();
    for (name, exec) in [("seq", Exec::Sequential), ("par", Exec::Parallel)] {
        config.output_dir = tmp.path().join(name);
        run_target(&config, Target::Run, exec).unwrap();
        let files: Vec<(String, Vec<u8>)> = listing(&config.output_dir)
            .into_iter()
            .map(|n| {
                let bytes = fs::read(config.output_dir.join(&n)).unwrap();
                (n, bytes)
            })
            .collect();
        trees.push(files);
    }
    assert_eq!(trees[0], trees[1]);
}

#[test]
fn partial_targets() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = fixture("f1f2");
    config.seed = None;

    config.output_dir = tmp.path().join("ingest");
    run_target(&config, Target::Ingest, Exec::default()).unwrap();
    assert_eq!(listing(&config.output_dir), ["manifest.toml", "tensor.csv"]);

    config.output_dir = tmp.path().join("regress");
    run_target(&config, Target::Regress, Exec::default()).unwrap();
    assert!(listing(&config.output_dir).contains(&"regression_table.csv".to_string()));
    assert!(!listing(&config.output_dir).iter().any(|n| n.starts_with("densities")));

    config.output_dir = tmp.path().join("cf");
    let err = run_target(&config, Target::Counterfactual, Exec::default()).unwrap_err();
    assert!(err.to_string().contains("seed"));
}

#[test]
fn manifest_hashes_track_input_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/f1f2");
    for f in ["trade.csv", "green.txt", "indicators.csv", "greenspace.toml"] {
        fs::copy(src.join(f), tmp.path().join(f)).unwrap();
    }
    let load = || PipelineConfig::resolve(PartialConfig::from_file(&tmp.path().join("greenspace.toml")).unwrap()).unwrap();
    let manifest = |config: &PipelineConfig| greenspace::pipeline::render_manifest(config).unwrap();
    let before = manifest(&load());
    // Rewriting identical bytes keeps the hash.
    let green = fs::read(tmp.path().join("green.txt")).unwrap();
    fs::write(tmp.path().join("green.txt"), &green).unwrap();
    assert_eq!(manifest(&load()), before);
    fs::write(tmp.path().join("green.txt"), b"000002\n000003\n").unwrap();
    let after = manifest(&load());
    assert_ne!(after, before);
    let changed: Vec<_> = before.lines().zip(after.lines()).filter(|(a, b)| a != b).collect();
    assert_eq!(changed.len(), 1);
    assert!(changed[0].0.starts_with("green_sha256"));
}
