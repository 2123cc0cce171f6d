//! End-to-end runs: dataset, distances, both maps, features and plots.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::distance::{pairwise_distances, Metric};
use crate::embedding::{mds_embed_restarts, MdsParams};
use crate::error::Error;
use crate::features::{feature_table, FeatureCaps, FeatureRecord};
use crate::generators::gen_preset;
use crate::io::{self, IoError};
use crate::matrix::InstanceRecord;
use crate::render::{render_svg, ColorBy, PlotPoint, RenderSpec};
use crate::spectral::explicit_coords;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Preset(String),
    Files(Vec<PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub dataset: DatasetSource,
    pub seed: u64,
    /// Rescale ingested rows to sum to one.
    pub normalize: bool,
    pub metric: Metric,
    pub mds: MdsParams,
    pub restarts: usize,
    pub caps: FeatureCaps,
    /// Features used to color extra plots, besides the per-source plots.
    pub color_features: Vec<String>,
    pub out_dir: PathBuf,
}

impl PipelineConfig {
    pub fn new(dataset: DatasetSource, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            dataset,
            seed: 0,
            normalize: false,
            metric: Metric::Demand,
            mds: MdsParams::default(),
            restarts: 1,
            caps: FeatureCaps::default(),
            color_features: Vec::new(),
            out_dir: out_dir.into(),
        }
    }
}

pub const DATASET_FILE: &str = "dataset.json";
pub const DISTANCES_FILE: &str = "distances.csv";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const EXPLICIT_FILE: &str = "explicit.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const REASONS_FILE: &str = "features_reasons.csv";

/// Joins coordinates with provenance and features by label.
pub fn plot_points(
    coords: &[(String, [f64; 2])],
    records: Option<&[InstanceRecord]>,
    features: Option<&[FeatureRecord]>,
) -> Vec<PlotPoint> {
    let by_label: HashMap<&str, &InstanceRecord> = records
        .unwrap_or_default()
        .iter()
        .map(|r| (r.label.as_str(), r))
        .collect();
    let feats: HashMap<&str, &FeatureRecord> = features
        .unwrap_or_default()
        .iter()
        .map(|f| (f.label.as_str(), f))
        .collect();
    coords
        .iter()
        .map(|(label, [x, y])| {
            let rec = by_label.get(label.as_str());
            PlotPoint {
                label: label.clone(),
                x: *x,
                y: *y,
                category: rec.map(|r| r.source.category()),
                characteristic: rec.is_some_and(|r| r.source.is_characteristic()),
                features: feats.get(label.as_str()).map(|f| (*f).clone()),
            }
        })
        .collect()
}

fn load(config: &PipelineConfig) -> Result<Vec<InstanceRecord>, Error> {
    match &config.dataset {
        DatasetSource::Preset(name) => Ok(gen_preset(name, config.seed)?),
        DatasetSource::Files(paths) => {
            let mut out = Vec::new();
            for p in paths {
                out.extend(io::ingest(p, config.normalize)?);
            }
            let mut seen = std::collections::HashSet::new();
            if let Some(dup) = out.iter().find(|r| !seen.insert(r.label.clone())) {
                return Err(IoError::Invalid(format!("duplicate label {:?}", dup.label)).into());
            }
            Ok(out)
        }
    }
}

fn stage<T>(name: &'static str, result: Result<T, impl Into<Error>>) -> Result<T, Error> {
    result.map_err(|e| e.into().in_stage(name))
}

/// Runs every stage and moves the artifacts into `out_dir`.
///
/// Files are written to a staging directory inside `out_dir` first, so a
/// failing run leaves no partial artifacts behind. Returns the final paths.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<PathBuf>, Error> {
    stage(
        "setup",
        fs::create_dir_all(&config.out_dir).map_err(|source| IoError::File {
            path: config.out_dir.clone(),
            source,
        }),
    )?;
    let staging = stage(
        "setup",
        tempfile::Builder::new()
            .prefix(".staging-")
            .tempdir_in(&config.out_dir)
            .map_err(|source| IoError::File {
                path: config.out_dir.clone(),
                source,
            }),
    )?;
    let dir = staging.path();
    let mut written: Vec<String> = Vec::new();
    let mut put = |name: String, contents: &str| -> Result<(), IoError> {
        io::write_file(&dir.join(&name), contents)?;
        written.push(name);
        Ok(())
    };

    let records = stage("dataset", load(config))?;
    stage("dataset", put(DATASET_FILE.into(), &io::write_dataset(&records)))?;

    let distances = stage("distances", pairwise_distances(&records, config.metric))?;
    stage(
        "distances",
        io::write_distance_csv(&distances).and_then(|t| put(DISTANCES_FILE.into(), &t)),
    )?;

    let embedding = stage(
        "embedding",
        mds_embed_restarts(&distances, config.seed, config.mds, config.restarts),
    )?;
    stage(
        "embedding",
        io::write_embedding_csv(&embedding).and_then(|t| put(EMBEDDING_FILE.into(), &t)),
    )?;

    let explicit = explicit_coords(&records);
    stage(
        "explicit",
        io::write_explicit_csv(&explicit).and_then(|t| put(EXPLICIT_FILE.into(), &t)),
    )?;

    let features = feature_table(&records, config.caps);
    stage(
        "features",
        io::write_features_csv(&features).and_then(|t| put(FEATURES_FILE.into(), &t)),
    )?;
    stage(
        "features",
        io::write_reasons_csv(&features).and_then(|t| put(REASONS_FILE.into(), &t)),
    )?;

    let emb_coords: Vec<(String, [f64; 2])> = embedding
        .labels
        .iter()
        .cloned()
        .zip(embedding.points.iter().copied())
        .collect();
    let exp_coords: Vec<(String, [f64; 2])> = explicit
        .iter()
        .map(|(l, p)| (l.clone(), [p.sigma2, p.sigma1]))
        .collect();
    let shape = records.first().map(|r| (r.matrix.n(), r.matrix.m()));
    let mut colorings = vec![("source".to_string(), ColorBy::Source)];
    colorings.extend(
        config
            .color_features
            .iter()
            .map(|f| (f.clone(), ColorBy::Feature(f.clone()))),
    );
    for (suffix, color) in colorings {
        for (map, coords, explicit_shape) in [("embedding", &emb_coords, None), ("explicit", &exp_coords, shape)] {
            let spec = RenderSpec {
                title: format!("{map} map, colored by {suffix}"),
                color: color.clone(),
                explicit: explicit_shape,
            };
            let svg = stage(
                "render",
                render_svg(&plot_points(coords, Some(&records), Some(&features)), &spec),
            )?;
            stage("render", put(format!("{map}-{suffix}.svg"), &svg))?;
        }
    }

    let mut finals = Vec::new();
    for name in &written {
        let target = config.out_dir.join(name);
        stage(
            "finalize",
            fs::rename(dir.join(name), &target).map_err(|source| IoError::File {
                path: target.clone(),
                source,
            }),
        )?;
        finals.push(target);
    }
    Ok(finals)
}

/// Whether `dir` holds only artifacts of a completed run (no staging leftovers).
pub fn has_no_staging(dir: &Path) -> bool {
    fs::read_dir(dir).map_or(true, |entries| {
        entries
            .flatten()
            .all(|e| !e.file_name().to_string_lossy().starts_with(".staging-"))
    })
}
