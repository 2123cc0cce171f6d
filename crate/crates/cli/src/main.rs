use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fairmap::distance::{pairwise_distances_with_cap, DEFAULT_EXACT_CAP};
use fairmap::embedding::{mds_embed_restarts, MdsParams};
use fairmap::error::Error;
use fairmap::features::{feature_table, FeatureCaps};
use fairmap::generators::{gen_dataset, gen_preset, Model, SyntheticSpec};
use fairmap::io::{self, IoError};
use fairmap::pipeline::{self, plot_points, DatasetSource, PipelineConfig};
use fairmap::render::{render_svg, ColorBy, RenderSpec};
use fairmap::spectral::explicit_coords;
use fairmap::{CharacteristicKind, IidDistribution, InstanceRecord, Metric};

#[derive(Parser)]
#[command(name = "fairmap", version, about = "Maps of fair-division instances")]
struct Cli {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for default output paths.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a preset or a single generator.
    Generate(GenerateArgs),
    /// Read instance files or subsample a raw table into a dataset.
    Ingest(IngestArgs),
    /// Pairwise distance table of a dataset.
    Distance(DistanceArgs),
    /// Embed a distance table in the plane.
    Embed(EmbedArgs),
    /// Two largest singular values of every instance.
    Explicit(ExplicitArgs),
    /// Fairness features of every instance.
    Features(FeaturesArgs),
    /// Draw a map as SVG.
    Render(RenderArgs),
    /// Run every stage and write all artifacts.
    Pipeline(PipelineArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelName {
    Uniform,
    Exponential,
    Attributes,
    Resampling,
    Ind,
    Sep,
    Con,
    Wsep,
    Wsepf,
    Bic,
}

#[derive(Args)]
struct GenerateArgs {
    /// Built-in dataset: 3x6, 5x5 or 10x20.
    #[arg(long, conflicts_with = "model")]
    preset: Option<String>,
    #[arg(long, value_enum, required_unless_present = "preset")]
    model: Option<ModelName>,
    #[arg(short, long, default_value_t = 3)]
    n: usize,
    #[arg(short, long, default_value_t = 6)]
    m: usize,
    #[arg(long, default_value_t = 1)]
    count: usize,
    /// Attribute dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0.5)]
    p: f64,
    #[arg(long, default_value_t = 0.5)]
    phi: f64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct IngestArgs {
    /// Instance files, dataset documents, or one raw table with --subsample.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Rescale rows to sum to one.
    #[arg(long)]
    normalize: bool,
    /// Draw K instances of N agents and M goods from the first input.
    #[arg(long, num_args = 3, value_names = ["N", "M", "K"])]
    subsample: Option<Vec<usize>>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "demand")]
    metric: Metric,
    /// Largest n for the exact valuation search.
    #[arg(long, default_value_t = DEFAULT_EXACT_CAP)]
    cap: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    distances: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Keep the lowest-stress of R runs.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ExplicitArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 20_000_000)]
    enum_cap: u64,
    #[arg(long, default_value_t = 10_000)]
    pareto_cap: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    /// Embedding or explicit-map CSV.
    #[arg(long)]
    points: PathBuf,
    /// Dataset document, for source colors, star markers and boundary overlays.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Feature CSV, for feature colors and cross markers.
    #[arg(long)]
    features: Option<PathBuf>,
    /// `none`, `source`, or a feature name.
    #[arg(long, default_value = "none")]
    color: String,
    #[arg(long)]
    title: Option<String>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long, conflicts_with = "inputs")]
    preset: Option<String>,
    #[arg(long, num_args = 1.., required_unless_present = "preset")]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = "demand")]
    metric: Metric,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Extra plots colored by these features.
    #[arg(long = "color")]
    colors: Vec<String>,
}

fn output_path(explicit: &Option<PathBuf>, out_dir: &Path, default: &str) -> Result<PathBuf, Error> {
    if let Some(p) = explicit {
        return Ok(p.clone());
    }
    std::fs::create_dir_all(out_dir).map_err(|source| IoError::File {
        path: out_dir.to_path_buf(),
        source,
    })?;
    Ok(out_dir.join(default))
}

fn write(path: PathBuf, contents: &str) -> Result<(), Error> {
    io::write_file(&path, contents)?;
    println!("{}", path.display());
    Ok(())
}

fn load_dataset(path: &Path) -> Result<Vec<InstanceRecord>, Error> {
    Ok(io::ingest(path, false)?)
}

fn model_of(args: &GenerateArgs, name: ModelName) -> Model {
    match name {
        ModelName::Uniform => Model::Iid(IidDistribution::Uniform),
        ModelName::Exponential => Model::Iid(IidDistribution::Exponential),
        ModelName::Attributes => Model::Attributes { d: args.d },
        ModelName::Resampling => Model::Resampling {
            p: args.p,
            phi: args.phi,
        },
        ModelName::Ind => Model::Characteristic(CharacteristicKind::Ind),
        ModelName::Sep => Model::Characteristic(CharacteristicKind::Sep),
        ModelName::Con => Model::Characteristic(CharacteristicKind::Con),
        ModelName::Wsep => Model::Characteristic(CharacteristicKind::Wsep),
        ModelName::Wsepf => Model::Characteristic(CharacteristicKind::Wsepf),
        ModelName::Bic => Model::Characteristic(CharacteristicKind::Bic),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let out_dir = cli.out_dir.as_path();
    match cli.command {
        Command::Generate(args) => {
            let records = match (&args.preset, args.model) {
                (Some(name), _) => gen_preset(name, cli.seed)?,
                (None, Some(name)) => {
                    let spec = SyntheticSpec::new(model_of(&args, name), args.n, args.m, args.count, cli.seed);
                    gen_dataset(&[spec])?
                }
                (None, None) => unreachable!("clap requires --preset or --model"),
            };
            write(
                output_path(&args.output, out_dir, pipeline::DATASET_FILE)?,
                &io::write_dataset(&records),
            )
        }
        Command::Ingest(args) => {
            let records = match &args.subsample {
                Some(v) => {
                    let table = io::read_table(&args.inputs[0])?;
                    let name = args.inputs[0]
                        .file_stem()
                        .map_or("table".into(), |s| s.to_string_lossy().into_owned());
                    io::subsample(&table, &name, v[0], v[1], v[2], cli.seed)?
                }
                None => {
                    let mut all = Vec::new();
                    for p in &args.inputs {
                        all.extend(io::ingest(p, args.normalize)?);
                    }
                    all
                }
            };
            write(
                output_path(&args.output, out_dir, pipeline::DATASET_FILE)?,
                &io::write_dataset(&records),
            )
        }
        Command::Distance(args) => {
            let records = load_dataset(&args.dataset)?;
            let d = pairwise_distances_with_cap(&records, args.metric, args.cap)?;
            write(
                output_path(&args.output, out_dir, pipeline::DISTANCES_FILE)?,
                &io::write_distance_csv(&d)?,
            )
        }
        Command::Embed(args) => {
            let d = io::parse_distance_csv(&io::read_file(&args.distances)?)?;
            let params = MdsParams {
                max_iters: args.max_iters,
                tol: args.tol,
            };
            let e = mds_embed_restarts(&d, cli.seed, params, args.restarts)?;
            write(
                output_path(&args.output, out_dir, pipeline::EMBEDDING_FILE)?,
                &io::write_embedding_csv(&e)?,
            )
        }
        Command::Explicit(args) => {
            let records = load_dataset(&args.dataset)?;
            let coords = explicit_coords(&records);
            write(
                output_path(&args.output, out_dir, pipeline::EXPLICIT_FILE)?,
                &io::write_explicit_csv(&coords)?,
            )
        }
        Command::Features(args) => {
            let records = load_dataset(&args.dataset)?;
            let caps = FeatureCaps {
                enumeration: args.enum_cap,
                pareto: args.pareto_cap,
            };
            let table = feature_table(&records, caps);
            let path = output_path(&args.output, out_dir, pipeline::FEATURES_FILE)?;
            let reasons = path.with_file_name(format!(
                "{}_reasons.csv",
                path.file_stem()
                    .map_or("features".into(), |s| s.to_string_lossy().into_owned())
            ));
            write(path, &io::write_features_csv(&table)?)?;
            write(reasons, &io::write_reasons_csv(&table)?)
        }
        Command::Render(args) => {
            let text = io::read_file(&args.points)?;
            let header = text.lines().find(|l| !l.starts_with('#')).unwrap_or("");
            let explicit_map = header.trim() == "label,sigma1,sigma2";
            let coords: Vec<(String, [f64; 2])> = if explicit_map {
                io::parse_explicit_csv(&text)?
                    .into_iter()
                    .map(|(l, p)| (l, [p.sigma2, p.sigma1]))
                    .collect()
            } else {
                io::parse_points_csv(&text)?
            };
            let records = args.dataset.as_deref().map(load_dataset).transpose()?;
            let features = match &args.features {
                Some(p) => Some(io::parse_features_csv(&io::read_file(p)?)?),
                None => None,
            };
            let color = match args.color.as_str() {
                "none" => ColorBy::None,
                "source" => ColorBy::Source,
                other => ColorBy::Feature(other.to_string()),
            };
            let shape = records
                .as_ref()
                .and_then(|r| r.first())
                .map(|r| (r.matrix.n(), r.matrix.m()));
            let spec = RenderSpec {
                title: args.title.unwrap_or_else(|| {
                    if explicit_map {
                        "explicit map".into()
                    } else {
                        "embedding".into()
                    }
                }),
                color,
                explicit: if explicit_map { shape } else { None },
            };
            let points = plot_points(&coords, records.as_deref(), features.as_deref());
            let svg = render_svg(&points, &spec)?;
            write(output_path(&args.output, out_dir, "map.svg")?, &svg)
        }
        Command::Pipeline(args) => {
            let dataset = match args.preset {
                Some(name) => DatasetSource::Preset(name),
                None => DatasetSource::Files(args.inputs),
            };
            let mut config = PipelineConfig::new(dataset, out_dir);
            config.seed = cli.seed;
            config.normalize = args.normalize;
            config.metric = args.metric;
            config.restarts = args.restarts;
            config.mds = MdsParams {
                max_iters: args.max_iters,
                tol: args.tol,
            };
            config.color_features = args.colors;
            for path in pipeline::run_pipeline(&config)? {
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
