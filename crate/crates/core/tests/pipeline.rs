use std::fs;

use fairmap::distance::Metric;
use fairmap::error::ExitCode;
use fairmap::io::{parse_dataset, parse_distance_csv, parse_explicit_csv, parse_features_csv, parse_points_csv};
use fairmap::pipeline::{
    has_no_staging, run_pipeline, DatasetSource, PipelineConfig, DATASET_FILE, DISTANCES_FILE, EMBEDDING_FILE,
    EXPLICIT_FILE, FEATURES_FILE, REASONS_FILE,
};

fn config(preset: &str, dir: &std::path::Path) -> PipelineConfig {
    let mut c = PipelineConfig::new(DatasetSource::Preset(preset.into()), dir);
    c.seed = 7;
    c.color_features = vec!["ef_exists".into()];
    c
}

#[test]
fn small_preset_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let written = run_pipeline(&config("3x6", dir.path())).unwrap();
    for name in [
        DATASET_FILE,
        DISTANCES_FILE,
        EMBEDDING_FILE,
        EXPLICIT_FILE,
        FEATURES_FILE,
        REASONS_FILE,
    ] {
        assert!(written.contains(&dir.path().join(name)), "{name}");
    }
    for name in [
        "embedding-source.svg",
        "explicit-source.svg",
        "embedding-ef_exists.svg",
        "explicit-ef_exists.svg",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert!(has_no_staging(dir.path()));

    let read = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap();
    let records = parse_dataset(&read(DATASET_FILE), false).unwrap();
    let labels: Vec<String> = records.iter().map(|r| r.label.clone()).collect();
    let distances = parse_distance_csv(&read(DISTANCES_FILE)).unwrap();
    assert_eq!(distances.labels, labels);
    distances.check().unwrap();
    let points: Vec<String> = parse_points_csv(&read(EMBEDDING_FILE))
        .unwrap()
        .into_iter()
        .map(|p| p.0)
        .collect();
    assert_eq!(points, labels);
    let explicit: Vec<String> = parse_explicit_csv(&read(EXPLICIT_FILE))
        .unwrap()
        .into_iter()
        .map(|p| p.0)
        .collect();
    assert_eq!(explicit, labels);
    let features = parse_features_csv(&read(FEATURES_FILE)).unwrap();
    assert_eq!(features.iter().map(|f| f.label.clone()).collect::<Vec<_>>(), labels);
    assert!(features.iter().all(|f| f.missing.is_empty()));
}

#[test]
fn rerun_with_same_seed_is_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(&config("3x6", a.path())).unwrap();
    run_pipeline(&config("3x6", b.path())).unwrap();
    for name in [
        DATASET_FILE,
        DISTANCES_FILE,
        EMBEDDING_FILE,
        EXPLICIT_FILE,
        FEATURES_FILE,
        "explicit-source.svg",
    ] {
        assert_eq!(
            fs::read(a.path().join(name)).unwrap(),
            fs::read(b.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn capped_valuation_run_leaves_no_files() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = config("10x20", dir.path());
    c.metric = Metric::Valuation;
    let err = run_pipeline(&c).unwrap_err();
    assert_eq!(err.exit_code(), ExitCode::CapExceeded);
    assert!(err.to_string().contains("distances"), "{err}");
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn missing_input_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let c = PipelineConfig::new(
        DatasetSource::Files(vec![dir.path().join("absent.txt")]),
        dir.path().join("out"),
    );
    let err = run_pipeline(&c).unwrap_err();
    assert_eq!(err.exit_code(), ExitCode::Io);
    assert_eq!(fs::read_dir(dir.path().join("out")).unwrap().count(), 0);
}

#[test]
fn ingested_files_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    fs::write(&a, "2 3\n1 2 3\n3 2 1\n").unwrap();
    fs::write(&b, "2 3\n0.5 0.5 0\n0 0.5 0.5\n").unwrap();
    let mut c = PipelineConfig::new(DatasetSource::Files(vec![a.clone(), b]), dir.path().join("out"));
    let err = run_pipeline(&c).unwrap_err();
    assert_eq!(err.exit_code(), ExitCode::Validation, "{err}");
    c.normalize = true;
    c.metric = Metric::Valuation;
    run_pipeline(&c).unwrap();
    let d = parse_distance_csv(&fs::read_to_string(dir.path().join("out").join(DISTANCES_FILE)).unwrap()).unwrap();
    assert_eq!(d.len(), 2);
    assert!(d.get(0, 1) > 0.0);
}
