//! Instance and dataset files, ingestion, and the CSV artifacts.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance::DistanceMatrix;
use crate::embedding::Embedding;
use crate::features::{FeatureRecord, FEATURE_NAMES};
use crate::generators::{CharacteristicKind, IidDistribution};
use crate::matrix::{InstanceRecord, MatrixError, Source, UtilityMatrix};
use crate::rng::{child_seed, rng_from_seed};
use crate::spectral::SpectralPoint;

/// Attempts per subsampled instance before giving up on zero rows.
pub const SUBSAMPLE_ATTEMPTS: usize = 1000;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{context}: {source}")]
    Matrix {
        context: String,
        #[source]
        source: MatrixError,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("malformed dataset document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
}

fn parse_err(line: usize, msg: impl Into<String>) -> IoError {
    IoError::Parse { line, msg: msg.into() }
}

pub fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::File {
        path: path.to_path_buf(),
        source,
    })
}

/// Formats like C's `%.17g`: 17 significant digits, trailing zeros removed.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Data lines with comments stripped, as `(1-based line number, content)`.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let content = line.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((i + 1, content))
    })
}

fn numbers(line: usize, content: &str) -> Result<Vec<f64>, IoError> {
    content
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(line, format!("not a number: {t:?}")))
        })
        .collect()
}

/// Parses the single-instance format into raw rows: an `n m` line, then `n`
/// lines of `m` numbers separated by whitespace or commas. `#` starts a comment.
pub fn parse_table(text: &str) -> Result<Vec<Vec<f64>>, IoError> {
    let mut lines = data_lines(text);
    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty instance file"))?;
    let dims: Vec<usize> = header
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| parse_err(hline, format!("bad dimension {t:?}"))))
        .collect::<Result<_, _>>()?;
    let [n, m] = dims[..] else {
        return Err(parse_err(hline, "expected header \"n m\""));
    };
    let mut rows = Vec::with_capacity(n);
    let mut last = hline;
    for (line, content) in lines {
        if rows.len() == n {
            return Err(parse_err(line, format!("more than {n} rows")));
        }
        let row = numbers(line, content)?;
        if row.len() != m {
            return Err(parse_err(line, format!("expected {m} values, found {}", row.len())));
        }
        if let Some(x) = row.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(parse_err(line, format!("value {x} is not a finite nonnegative number")));
        }
        rows.push(row);
        last = line;
    }
    if rows.len() != n {
        return Err(parse_err(last, format!("expected {n} rows, found {}", rows.len())));
    }
    Ok(rows)
}

fn to_matrix(rows: &[Vec<f64>], normalize: bool, context: &str) -> Result<UtilityMatrix, IoError> {
    let result = if normalize {
        UtilityMatrix::normalize_rows(rows)
    } else {
        UtilityMatrix::validate(rows)
    };
    result.map_err(|source| IoError::Matrix {
        context: context.to_string(),
        source,
    })
}

pub fn parse_instance(text: &str, normalize: bool) -> Result<UtilityMatrix, IoError> {
    to_matrix(&parse_table(text)?, normalize, "instance")
}

/// Single-instance text; every value keeps 17 significant digits.
pub fn write_instance(u: &UtilityMatrix) -> String {
    let mut out = format!("{} {}\n", u.n(), u.m());
    for row in u.rows() {
        out.push_str(&row.iter().map(|&x| format_float(x)).collect::<Vec<_>>().join(" "));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum SourceDoc {
    Characteristic { kind: String },
    Iid { dist: String },
    Attributes { d: usize },
    Resampling { p: f64, phi: f64 },
    Ingested { name: String },
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    label: String,
    source: SourceDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetDoc {
    instances: Vec<InstanceDoc>,
}

fn source_doc(source: &Source) -> SourceDoc {
    match source {
        Source::Characteristic(kind) => SourceDoc::Characteristic {
            kind: kind.name().to_string(),
        },
        Source::Iid(dist) => SourceDoc::Iid {
            dist: dist.name().to_string(),
        },
        Source::Attributes { d } => SourceDoc::Attributes { d: *d },
        Source::Resampling { p, phi } => SourceDoc::Resampling { p: *p, phi: *phi },
        Source::Ingested { name } => SourceDoc::Ingested { name: name.clone() },
    }
}

fn source_from_doc(doc: SourceDoc) -> Result<Source, IoError> {
    Ok(match doc {
        SourceDoc::Characteristic { kind } => Source::Characteristic(
            kind.parse::<CharacteristicKind>()
                .map_err(|e| IoError::Invalid(e.to_string()))?,
        ),
        SourceDoc::Iid { dist } => Source::Iid(
            dist.parse::<IidDistribution>()
                .map_err(|e| IoError::Invalid(e.to_string()))?,
        ),
        SourceDoc::Attributes { d } => Source::Attributes { d },
        SourceDoc::Resampling { p, phi } => Source::Resampling { p, phi },
        SourceDoc::Ingested { name } => Source::Ingested { name },
    })
}

/// Dataset container as JSON. Floats use the shortest representation that
/// parses back to the same bits.
pub fn write_dataset(records: &[InstanceRecord]) -> String {
    let doc = DatasetDoc {
        instances: records
            .iter()
            .map(|r| InstanceDoc {
                label: r.label.clone(),
                source: source_doc(&r.source),
                seed: r.seed,
                matrix: r.matrix.to_rows(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("dataset serializes");
    out.push('\n');
    out
}

pub fn parse_dataset(text: &str, normalize: bool) -> Result<Vec<InstanceRecord>, IoError> {
    let doc: DatasetDoc = serde_json::from_str(text)?;
    let mut seen = HashSet::new();
    doc.instances
        .into_iter()
        .map(|inst| {
            if !seen.insert(inst.label.clone()) {
                return Err(IoError::Invalid(format!("duplicate label {:?}", inst.label)));
            }
            let matrix = to_matrix(&inst.matrix, normalize, &format!("instance {:?}", inst.label))?;
            let source = source_from_doc(inst.source)?;
            InstanceRecord::try_new(inst.label.clone(), matrix, source, inst.seed)
                .map_err(|e| IoError::Invalid(format!("instance {:?}: {e}", inst.label)))
        })
        .collect()
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map_or_else(|| "instance".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Reads a dataset document (starts with `{`) or a single-instance text file.
pub fn ingest(path: &Path, normalize: bool) -> Result<Vec<InstanceRecord>, IoError> {
    let text = read_file(path)?;
    if text.trim_start().starts_with('{') {
        return parse_dataset(&text, normalize);
    }
    let name = stem(path);
    let matrix = parse_instance(&text, normalize)?;
    Ok(vec![InstanceRecord::new(
        name.clone(),
        matrix,
        Source::Ingested { name },
        None,
    )])
}

/// Draws `k` instances of `n` agents and `m` goods from a wide raw table.
///
/// Agents and goods are drawn without replacement, kept in table order, and
/// rows are rescaled to sum to one. A draw containing a zero row is redrawn,
/// up to [`SUBSAMPLE_ATTEMPTS`] times per instance.
pub fn subsample(
    table: &[Vec<f64>],
    name: &str,
    n: usize,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<Vec<InstanceRecord>, IoError> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if k > 0 && (n < 2 || m < n || n > rows || m > cols) {
        return Err(IoError::Invalid(format!(
            "cannot draw {n}x{m} instances from a {rows}x{cols} table"
        )));
    }
    (0..k)
        .map(|t| {
            let instance_seed = child_seed(seed, t as u64);
            let mut rng = rng_from_seed(instance_seed);
            for _ in 0..SUBSAMPLE_ATTEMPTS {
                let mut agents = sample(&mut rng, rows, n).into_vec();
                let mut goods = sample(&mut rng, cols, m).into_vec();
                agents.sort_unstable();
                goods.sort_unstable();
                let sub: Vec<Vec<f64>> = agents
                    .iter()
                    .map(|&i| goods.iter().map(|&j| table[i][j]).collect())
                    .collect();
                if let Ok(matrix) = UtilityMatrix::normalize_rows(&sub) {
                    return Ok(InstanceRecord::new(
                        format!("{name}-{t:03}"),
                        matrix,
                        Source::Ingested { name: name.to_string() },
                        Some(instance_seed),
                    ));
                }
            }
            Err(IoError::Invalid(format!(
                "subsample {t}: every one of {SUBSAMPLE_ATTEMPTS} draws had an agent valuing no drawn good"
            )))
        })
        .collect()
}

/// Reads a raw table file (same layout as a single instance, rows unnormalized).
pub fn read_table(path: &Path) -> Result<Vec<Vec<f64>>, IoError> {
    parse_table(&read_file(path)?)
}

fn csv_string(comments: &[String], header: &[String], rows: &[Vec<String>]) -> Result<String, IoError> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(header)?;
    for row in rows {
        writer.write_record(row)?;
    }
    let body = String::from_utf8(writer.into_inner().map_err(|e| IoError::Invalid(e.to_string()))?)
        .expect("CSV of UTF-8 fields");
    let mut out: String = comments.iter().map(|c| format!("# {c}\n")).collect();
    out.push_str(&body);
    Ok(out)
}

fn csv_records(text: &str) -> Result<(Vec<String>, Vec<csv::StringRecord>), IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.iter().map(str::to_string).collect();
    let rows = reader.records().collect::<Result<_, _>>()?;
    Ok((header, rows))
}

fn float_field(record: &csv::StringRecord, idx: usize, row: usize) -> Result<f64, IoError> {
    let field = record.get(idx).unwrap_or("");
    field
        .trim()
        .parse()
        .map_err(|_| IoError::Invalid(format!("CSV row {row}, column {idx}: not a number: {field:?}")))
}

/// Header of labels, then one row of distances per instance.
pub fn write_distance_csv(d: &DistanceMatrix) -> Result<String, IoError> {
    let rows: Vec<Vec<String>> =
        d.d.iter()
            .map(|r| r.iter().map(|&x| format_float(x)).collect())
            .collect();
    csv_string(&[], &d.labels, &rows)
}

pub fn parse_distance_csv(text: &str) -> Result<DistanceMatrix, IoError> {
    let (labels, records) = csv_records(text)?;
    if records.len() != labels.len() {
        return Err(IoError::Invalid(format!(
            "{} labels but {} distance rows",
            labels.len(),
            records.len()
        )));
    }
    let d = records
        .iter()
        .enumerate()
        .map(|(r, rec)| (0..labels.len()).map(|c| float_field(rec, c, r + 1)).collect())
        .collect::<Result<_, _>>()?;
    let table = DistanceMatrix { labels, d };
    table.check().map_err(IoError::Invalid)?;
    Ok(table)
}

pub fn write_embedding_csv(e: &Embedding) -> Result<String, IoError> {
    let mut comment = format!("stress={} iterations={}", format_float(e.stress), e.iterations);
    if e.degenerate {
        comment.push_str(" degenerate=true");
    }
    let rows: Vec<Vec<String>> = e
        .labels
        .iter()
        .zip(&e.points)
        .map(|(l, p)| vec![l.clone(), format_float(p[0]), format_float(p[1])])
        .collect();
    csv_string(&[comment], &["label".into(), "x".into(), "y".into()], &rows)
}

/// Labeled 2-D points from an embedding or explicit-map CSV.
pub fn parse_points_csv(text: &str) -> Result<Vec<(String, [f64; 2])>, IoError> {
    let (header, records) = csv_records(text)?;
    if header.len() != 3 || header[0] != "label" {
        return Err(IoError::Invalid(format!("unexpected point header {header:?}")));
    }
    records
        .iter()
        .enumerate()
        .map(|(r, rec)| {
            Ok((
                rec[0].to_string(),
                [float_field(rec, 1, r + 1)?, float_field(rec, 2, r + 1)?],
            ))
        })
        .collect()
}

pub fn write_explicit_csv(points: &[(String, SpectralPoint)]) -> Result<String, IoError> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|(l, p)| vec![l.clone(), format_float(p.sigma1), format_float(p.sigma2)])
        .collect();
    csv_string(&[], &["label".into(), "sigma1".into(), "sigma2".into()], &rows)
}

pub fn parse_explicit_csv(text: &str) -> Result<Vec<(String, SpectralPoint)>, IoError> {
    Ok(parse_points_csv(text)?
        .into_iter()
        .map(|(l, [s1, s2])| (l, SpectralPoint::new(s1, s2)))
        .collect())
}

/// Feature table; absent values are empty cells and booleans are 0/1.
pub fn write_features_csv(records: &[FeatureRecord]) -> Result<String, IoError> {
    let comments = [
        "sum_max_envies is the minimum over allocations of the summed per-agent maximal envy".to_string(),
        "max_nash is the maximum over allocations of the product of bundle utilities".to_string(),
    ];
    let mut header = vec!["label".to_string()];
    header.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![r.label.clone()];
            row.extend(
                FEATURE_NAMES
                    .iter()
                    .map(|name| match r.get(name).expect("known feature") {
                        None => String::new(),
                        Some(crate::features::FeatureValue::Bool(b)) => u8::from(b).to_string(),
                        Some(crate::features::FeatureValue::Real(x)) => format_float(x),
                    }),
            );
            row
        })
        .collect();
    csv_string(&comments, &header, &rows)
}

/// Sidecar listing why each absent feature is absent.
pub fn write_reasons_csv(records: &[FeatureRecord]) -> Result<String, IoError> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .flat_map(|r| {
            r.missing
                .iter()
                .map(|(f, why)| vec![r.label.clone(), f.clone(), why.clone()])
        })
        .collect();
    csv_string(&[], &["label".into(), "feature".into(), "reason".into()], &rows)
}

pub fn parse_features_csv(text: &str) -> Result<Vec<FeatureRecord>, IoError> {
    let (header, records) = csv_records(text)?;
    if header.first().map(String::as_str) != Some("label") {
        return Err(IoError::Invalid("feature CSV must start with a label column".into()));
    }
    records
        .iter()
        .enumerate()
        .map(|(r, rec)| {
            let mut out = FeatureRecord {
                label: rec[0].to_string(),
                ..FeatureRecord::default()
            };
            for (c, name) in header.iter().enumerate().skip(1) {
                if rec.get(c).is_some_and(|s| !s.trim().is_empty()) {
                    let value = float_field(rec, c, r + 1)?;
                    out.set(name, value).map_err(|e| IoError::Invalid(e.to_string()))?;
                }
            }
            Ok(out)
        })
        .collect()
}
