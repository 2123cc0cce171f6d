//! Characteristic instances, synthetic distributions and dataset presets.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::Rng as _;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::{InstanceRecord, MatrixError, Source, UtilityMatrix};
use crate::rng::{child_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("{kind} is unsupported for shape {n}x{m}")]
    UnsupportedShape { kind: String, n: usize, m: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unknown preset {0:?} (expected one of 3x6, 5x5, 10x20)")]
    UnknownPreset(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

/// The named extreme instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CharacteristicKind {
    /// Indifference: every entry `1/m`.
    Ind,
    /// Separability: identity block, remaining goods worthless.
    Sep,
    /// Contention: everyone values only good 0.
    Con,
    /// Wide separability: `l = m / n` private goods each, leftovers worthless.
    Wsep,
    /// Wide separability with leftovers shared equally by everyone.
    Wsepf,
    /// Bicontention: two halves of the agents each want one common good.
    Bic,
}

impl CharacteristicKind {
    pub const ALL: [CharacteristicKind; 6] = [Self::Ind, Self::Sep, Self::Con, Self::Wsep, Self::Wsepf, Self::Bic];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ind => "IND",
            Self::Sep => "SEP",
            Self::Con => "CON",
            Self::Wsep => "WSEP",
            Self::Wsepf => "WSEPf",
            Self::Bic => "BIC",
        }
    }
}

impl fmt::Display for CharacteristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CharacteristicKind {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| GenError::InvalidParameter(format!("unknown characteristic instance {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IidDistribution {
    /// Uniform on `[0, 1)`.
    Uniform,
    /// Exponential with rate 1; the rate cancels under normalization.
    Exponential,
}

impl IidDistribution {
    pub fn name(self) -> &'static str {
        match self {
            Self::Uniform => "uniform",
            Self::Exponential => "exponential",
        }
    }
}

impl FromStr for IidDistribution {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" | "uniform01" => Ok(Self::Uniform),
            "exponential" | "exp" => Ok(Self::Exponential),
            _ => Err(GenError::InvalidParameter(format!("unknown iid distribution {s:?}"))),
        }
    }
}

fn check_shape(kind: &str, n: usize, m: usize) -> Result<(), GenError> {
    if n < 2 || m < n {
        return Err(GenError::UnsupportedShape {
            kind: kind.to_string(),
            n,
            m,
        });
    }
    Ok(())
}

/// Builds one of the characteristic instances.
///
/// WSEP and WSEPf give agent `i` the contiguous private goods
/// `[i*l, (i+1)*l)` with `l = m / n`; for odd `n` the lone BIC agent
/// values good 2.
pub fn gen_characteristic(kind: CharacteristicKind, n: usize, m: usize) -> Result<UtilityMatrix, GenError> {
    check_shape(kind.name(), n, m)?;
    let mut rows = vec![vec![0.0; m]; n];
    let l = m / n;
    let rest = m % n;
    match kind {
        CharacteristicKind::Ind => {
            for row in &mut rows {
                row.fill(1.0 / m as f64);
            }
        }
        CharacteristicKind::Sep => {
            for (i, row) in rows.iter_mut().enumerate() {
                row[i] = 1.0;
            }
        }
        CharacteristicKind::Con => {
            for row in &mut rows {
                row[0] = 1.0;
            }
        }
        CharacteristicKind::Wsep => {
            for (i, row) in rows.iter_mut().enumerate() {
                row[i * l..(i + 1) * l].fill(1.0 / l as f64);
            }
        }
        CharacteristicKind::Wsepf => {
            let private = n as f64 / m as f64;
            let shared = if rest > 0 {
                (1.0 - l as f64 * private) / rest as f64
            } else {
                0.0
            };
            for (i, row) in rows.iter_mut().enumerate() {
                row[i * l..(i + 1) * l].fill(private);
                row[n * l..].fill(shared);
            }
        }
        CharacteristicKind::Bic => {
            if n % 2 == 1 && m < 3 {
                return Err(GenError::UnsupportedShape {
                    kind: kind.name().into(),
                    n,
                    m,
                });
            }
            let half = n / 2;
            for (i, row) in rows.iter_mut().enumerate() {
                let good = if i < half {
                    0
                } else if i < 2 * half {
                    1
                } else {
                    2
                };
                row[good] = 1.0;
            }
        }
    }
    Ok(UtilityMatrix::validate(&rows)?)
}

fn normalize_row(row: &mut [f64]) -> bool {
    let sum: f64 = row.iter().sum();
    if sum > 0.0 {
        row.iter_mut().for_each(|x| *x /= sum);
        true
    } else {
        false
    }
}

fn iid_rows(rng: &mut Rng, n: usize, m: usize, dist: IidDistribution) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| loop {
            let mut row: Vec<f64> = (0..m)
                .map(|_| match dist {
                    IidDistribution::Uniform => rng.random::<f64>(),
                    IidDistribution::Exponential => Exp1.sample(rng),
                })
                .collect();
            if normalize_row(&mut row) {
                break row;
            }
        })
        .collect()
}

/// Each agent draws `m` i.i.d. values and rescales them to sum to one.
pub fn gen_iid(n: usize, m: usize, dist: IidDistribution, seed: u64) -> Result<UtilityMatrix, GenError> {
    check_shape("iid", n, m)?;
    let mut rng = rng_from_seed(seed);
    Ok(UtilityMatrix::normalize_rows(&iid_rows(&mut rng, n, m, dist))?)
}

/// Attribute model: utilities proportional to `<a_i, g_j>` with priority
/// vectors `a_i` and good attributes `g_j` uniform on `[0,1]^d`.
pub fn gen_attributes(n: usize, m: usize, d: usize, seed: u64) -> Result<UtilityMatrix, GenError> {
    check_shape("attributes", n, m)?;
    if d == 0 {
        return Err(GenError::InvalidParameter("attribute count d must be >= 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let goods: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| loop {
            let priority: Vec<f64> = (0..d).map(|_| rng.random()).collect();
            let mut row: Vec<f64> = goods
                .iter()
                .map(|g| g.iter().zip(&priority).map(|(x, y)| x * y).sum())
                .collect();
            if normalize_row(&mut row) {
                break row;
            }
        })
        .collect();
    Ok(UtilityMatrix::normalize_rows(&rows)?)
}

/// Size of the central approval set, `floor(p * m)`.
pub fn central_set_size(p: f64, m: usize) -> usize {
    // The epsilon keeps products like 0.6 * 5 = 2.9999999999999996 from rounding down.
    ((p * m as f64) + 1e-9).floor() as usize
}

/// Draws the approval sets of the resampling model.
///
/// Returns one boolean row per agent; every row has at least one approval.
pub fn resampling_approvals(n: usize, m: usize, p: f64, phi: f64, rng: &mut Rng) -> Vec<Vec<bool>> {
    let central_size = central_set_size(p, m).min(m);
    let mut central = vec![false; m];
    for j in sample(rng, m, central_size) {
        central[j] = true;
    }
    (0..n)
        .map(|_| {
            let mut row: Vec<bool> = (0..m)
                .map(|j| {
                    if rng.random::<f64>() < 1.0 - phi {
                        central[j]
                    } else {
                        rng.random::<f64>() < p
                    }
                })
                .collect();
            if !row.iter().any(|&a| a) {
                row[rng.random_range(0..m)] = true;
            }
            row
        })
        .collect()
}

/// Resampling model: each agent splits its utility equally over its approved goods.
pub fn gen_resampling(n: usize, m: usize, p: f64, phi: f64, seed: u64) -> Result<UtilityMatrix, GenError> {
    check_shape("resampling", n, m)?;
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&phi) {
        return Err(GenError::InvalidParameter(format!(
            "p={p}, phi={phi} must lie in [0, 1]"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = resampling_approvals(n, m, p, phi, &mut rng)
        .into_iter()
        .map(|row| {
            let count = row.iter().filter(|&&a| a).count() as f64;
            row.into_iter().map(|a| if a { 1.0 / count } else { 0.0 }).collect()
        })
        .collect();
    Ok(UtilityMatrix::validate(&rows)?)
}

/// Generative model of a [`SyntheticSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Characteristic(CharacteristicKind),
    Iid(IidDistribution),
    Attributes { d: usize },
    Resampling { p: f64, phi: f64 },
}

impl Model {
    fn label_prefix(&self) -> String {
        match *self {
            Model::Characteristic(kind) => kind.name().to_string(),
            Model::Iid(dist) => format!("iid-{}", dist.name()),
            Model::Attributes { d } => format!("attributes-d{d}"),
            Model::Resampling { p, phi } => format!("resampling-p{p}-phi{phi}"),
        }
    }

    fn source(&self) -> Source {
        match *self {
            Model::Characteristic(kind) => Source::Characteristic(kind),
            Model::Iid(dist) => Source::Iid(dist),
            Model::Attributes { d } => Source::Attributes { d },
            Model::Resampling { p, phi } => Source::Resampling { p, phi },
        }
    }

    /// Draws one instance; characteristic models ignore the seed.
    pub fn sample(&self, n: usize, m: usize, seed: u64) -> Result<UtilityMatrix, GenError> {
        match *self {
            Model::Characteristic(kind) => gen_characteristic(kind, n, m),
            Model::Iid(dist) => gen_iid(n, m, dist, seed),
            Model::Attributes { d } => gen_attributes(n, m, d, seed),
            Model::Resampling { p, phi } => gen_resampling(n, m, p, phi, seed),
        }
    }
}

/// `count` instances of one model; instance `k` uses `child_seed(seed, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub model: Model,
    pub n: usize,
    pub m: usize,
    pub count: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(model: Model, n: usize, m: usize, count: usize, seed: u64) -> Self {
        Self {
            model,
            n,
            m,
            count,
            seed,
        }
    }

    fn check(&self) -> Result<(), GenError> {
        if self.count == 0 {
            return Err(GenError::InvalidParameter("count must be >= 1".into()));
        }
        check_shape(&self.model.label_prefix(), self.n, self.m)?;
        match self.model {
            Model::Attributes { d: 0 } => Err(GenError::InvalidParameter("attribute count d must be >= 1".into())),
            Model::Resampling { p, phi } if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&phi) => Err(
                GenError::InvalidParameter(format!("p={p}, phi={phi} must lie in [0, 1]")),
            ),
            _ => Ok(()),
        }
    }
}

/// Samples every spec and concatenates the results with provenance.
pub fn gen_dataset(specs: &[SyntheticSpec]) -> Result<Vec<InstanceRecord>, GenError> {
    for spec in specs {
        spec.check()?;
    }
    let mut used = HashSet::new();
    let mut jobs = Vec::new();
    for (s, spec) in specs.iter().enumerate() {
        let mut prefix = spec.model.label_prefix();
        if !used.insert(prefix.clone()) {
            prefix = format!("{prefix}-s{s}");
            used.insert(prefix.clone());
        }
        for k in 0..spec.count {
            let label = if spec.count == 1 && matches!(spec.model, Model::Characteristic(_)) {
                prefix.clone()
            } else {
                format!("{prefix}-{k:03}")
            };
            jobs.push((spec, k, label));
        }
    }
    jobs.into_par_iter()
        .map(|(spec, k, label)| {
            let (matrix, seed) = match spec.model {
                Model::Characteristic(_) => (spec.model.sample(spec.n, spec.m, 0)?, None),
                _ => {
                    let seed = child_seed(spec.seed, k as u64);
                    (spec.model.sample(spec.n, spec.m, seed)?, Some(seed))
                }
            };
            Ok(InstanceRecord::new(label, matrix, spec.model.source(), seed))
        })
        .collect()
}

pub const PRESETS: [&str; 3] = ["3x6", "5x5", "10x20"];

/// Specs of a built-in dataset preset.
///
/// `3x6` and `5x5`: 20 attribute instances each for `d = 2` and `d = 5`,
/// 5 resampling instances for each `(p, phi)` in `{0.2,0.4,0.6,0.8} x {0.2,0.8}`,
/// 40 i.i.d. uniform, 40 i.i.d. exponential, plus CON, IND, SEP, WSEP and BIC.
/// `10x20`: 4 resampling instances for each `(p, phi)` in
/// `{0.05,0.1,0.2,0.4,0.6,0.8} x {0.05,0.1,0.25,0.5,0.75,0.9,0.95}` plus CON, IND, SEP.
pub fn preset_specs(name: &str, seed: u64) -> Result<Vec<SyntheticSpec>, GenError> {
    let mut models: Vec<(Model, usize)> = Vec::new();
    let (n, m) = match name {
        "3x6" | "5x5" => {
            models.push((Model::Attributes { d: 2 }, 20));
            models.push((Model::Attributes { d: 5 }, 20));
            let cells: Vec<(f64, f64)> = [0.2, 0.4, 0.6, 0.8]
                .iter()
                .flat_map(|&p| [0.2, 0.8].into_iter().map(move |phi| (p, phi)))
                .collect();
            let per_cell = 40 / cells.len();
            models.extend(
                cells
                    .into_iter()
                    .map(|(p, phi)| (Model::Resampling { p, phi }, per_cell)),
            );
            models.push((Model::Iid(IidDistribution::Uniform), 40));
            models.push((Model::Iid(IidDistribution::Exponential), 40));
            use CharacteristicKind::*;
            models.extend([Con, Ind, Sep, Wsep, Bic].map(|k| (Model::Characteristic(k), 1)));
            if name == "3x6" {
                (3, 6)
            } else {
                (5, 5)
            }
        }
        "10x20" => {
            for p in [0.05, 0.1, 0.2, 0.4, 0.6, 0.8] {
                for phi in [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95] {
                    models.push((Model::Resampling { p, phi }, 4));
                }
            }
            use CharacteristicKind::*;
            models.extend([Con, Ind, Sep].map(|k| (Model::Characteristic(k), 1)));
            (10, 20)
        }
        other => return Err(GenError::UnknownPreset(other.to_string())),
    };
    Ok(models
        .into_iter()
        .enumerate()
        .map(|(s, (model, count))| SyntheticSpec::new(model, n, m, count, child_seed(seed, s as u64)))
        .collect())
}

pub fn gen_preset(name: &str, seed: u64) -> Result<Vec<InstanceRecord>, GenError> {
    gen_dataset(&preset_specs(name, seed)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_rows(u: &UtilityMatrix, expected: &[&[f64]]) {
        assert_eq!(u.n(), expected.len());
        for (i, row) in expected.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                assert!((u.get(i, j) - x).abs() < 1e-15, "({i},{j}): {} vs {x}", u.get(i, j));
            }
        }
    }

    #[test]
    fn indifference_two_by_two() {
        let u = gen_characteristic(CharacteristicKind::Ind, 2, 2).unwrap();
        assert_rows(&u, &[&[0.5, 0.5], &[0.5, 0.5]]);
    }

    #[test]
    fn wsepf_two_by_five() {
        let u = gen_characteristic(CharacteristicKind::Wsepf, 2, 5).unwrap();
        assert_rows(&u, &[&[0.4, 0.4, 0.0, 0.0, 0.2], &[0.0, 0.0, 0.4, 0.4, 0.2]]);
    }

    #[test]
    fn bicontention_five_agents() {
        let u = gen_characteristic(CharacteristicKind::Bic, 5, 5).unwrap();
        let goods: Vec<usize> = u.rows().map(|r| r.iter().position(|&x| x == 1.0).unwrap()).collect();
        assert_eq!(goods, vec![0, 0, 1, 1, 2]);
        for row in u.rows() {
            assert_eq!(row.iter().filter(|&&x| x > 0.0).count(), 1);
        }
    }

    #[test]
    fn sep_square_is_identity() {
        for n in 2..7 {
            let u = gen_characteristic(CharacteristicKind::Sep, n, n).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(u.get(i, j), if i == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn wsep_matches_wsepf_when_n_divides_m() {
        for (n, m) in [(2, 4), (3, 6), (3, 9), (5, 10), (4, 4)] {
            let a = gen_characteristic(CharacteristicKind::Wsep, n, m).unwrap();
            let b = gen_characteristic(CharacteristicKind::Wsepf, n, m).unwrap();
            assert_eq!(a, b, "{n}x{m}");
        }
    }

    #[test]
    fn characteristic_shapes_are_checked() {
        assert!(gen_characteristic(CharacteristicKind::Ind, 3, 2).is_err());
        assert!(gen_characteristic(CharacteristicKind::Ind, 1, 2).is_err());
        for kind in CharacteristicKind::ALL {
            for (n, m) in [(2, 2), (3, 3), (3, 8), (5, 6), (6, 6)] {
                assert!(gen_characteristic(kind, n, m).is_ok(), "{kind} {n}x{m}");
            }
        }
    }

    #[test]
    fn iid_is_deterministic_per_seed() {
        for dist in [IidDistribution::Uniform, IidDistribution::Exponential] {
            let a = gen_iid(4, 6, dist, 99).unwrap();
            assert_eq!(a, gen_iid(4, 6, dist, 99).unwrap());
            assert_ne!(a, gen_iid(4, 6, dist, 100).unwrap());
        }
    }

    #[test]
    fn iid_mean_entry_is_one_over_m() {
        // Monte-Carlo check of the sampler: every entry has mean 1/m by symmetry.
        let samples = 10_000;
        let values: Vec<f64> = (0..samples)
            .map(|s| gen_iid(5, 5, IidDistribution::Uniform, s).unwrap().get(0, 0))
            .collect();
        let mean = values.iter().sum::<f64>() / samples as f64;
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
        let se = (var / samples as f64).sqrt();
        assert!((mean - 0.2).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn one_attribute_gives_identical_rows() {
        for seed in 0..20 {
            let u = gen_attributes(4, 7, 1, seed).unwrap();
            for i in 1..4 {
                for j in 0..7 {
                    assert!((u.get(i, j) - u.get(0, j)).abs() < 1e-15);
                }
            }
        }
        assert_eq!(gen_attributes(3, 4, 3, 5).unwrap(), gen_attributes(3, 4, 3, 5).unwrap());
        assert!(gen_attributes(3, 4, 0, 5).is_err());
    }

    #[test]
    fn resampling_without_noise_copies_central_set() {
        for seed in 0..20 {
            let u = gen_resampling(5, 8, 0.5, 0.0, seed).unwrap();
            for row in u.rows() {
                assert_eq!(row, u.row(0));
                assert_eq!(row.iter().filter(|&&x| x > 0.0).count(), 4);
            }
        }
    }

    #[test]
    fn resampling_full_central_set_is_indifference() {
        let ind = gen_characteristic(CharacteristicKind::Ind, 4, 6).unwrap();
        assert_eq!(gen_resampling(4, 6, 1.0, 0.0, 3).unwrap(), ind);
    }

    #[test]
    fn resampling_empty_central_set_falls_back_to_single_good() {
        for seed in 0..20 {
            let u = gen_resampling(5, 6, 0.1, 0.0, seed).unwrap();
            for row in u.rows() {
                assert_eq!(row.iter().filter(|&&x| x == 1.0).count(), 1);
                assert_eq!(row.iter().filter(|&&x| x > 0.0).count(), 1);
            }
        }
    }

    #[test]
    fn resampling_full_noise_approves_at_rate_p() {
        let p = 0.5;
        let samples = 10_000;
        let approvals = (0..samples)
            .filter(|&s| gen_resampling(3, 10, p, 1.0, s).unwrap().get(1, 3) > 0.0)
            .count();
        let rate = approvals as f64 / samples as f64;
        let se = (p * (1.0 - p) / samples as f64).sqrt();
        assert!((rate - p).abs() < 3.0 * se, "rate {rate}");
    }

    #[test]
    fn resampling_rejects_out_of_range() {
        assert!(gen_resampling(3, 4, 1.5, 0.0, 0).is_err());
        assert!(gen_resampling(3, 4, 0.5, -0.1, 0).is_err());
    }

    #[test]
    fn preset_sizes() {
        assert_eq!(gen_preset("10x20", 1).unwrap().len(), 6 * 7 * 4 + 3);
        assert_eq!(gen_preset("5x5", 1).unwrap().len(), 40 + 40 + 40 + 40 + 5);
        assert_eq!(gen_preset("3x6", 1).unwrap().len(), 165);
        assert!(matches!(gen_preset("4x4", 1), Err(GenError::UnknownPreset(_))));
    }

    #[test]
    fn datasets_are_reproducible_and_labels_unique() {
        let a = gen_preset("3x6", 42).unwrap();
        let b = gen_preset("3x6", 42).unwrap();
        assert_eq!(a, b);
        let labels: HashSet<_> = a.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(labels.len(), a.len());
        assert!(gen_dataset(&[]).unwrap().is_empty());
    }

    #[test]
    fn record_seed_reproduces_instance() {
        let records = gen_preset("5x5", 9).unwrap();
        for r in records.iter().filter(|r| !r.source.is_characteristic()) {
            let seed = r.seed.unwrap();
            let again = match &r.source {
                Source::Iid(d) => gen_iid(5, 5, *d, seed),
                Source::Attributes { d } => gen_attributes(5, 5, *d, seed),
                Source::Resampling { p, phi } => gen_resampling(5, 5, *p, *phi, seed),
                _ => unreachable!(),
            }
            .unwrap();
            assert_eq!(again, r.matrix);
        }
    }

    #[test]
    fn duplicate_models_get_distinct_labels() {
        let spec = SyntheticSpec::new(Model::Iid(IidDistribution::Uniform), 3, 4, 2, 1);
        let records = gen_dataset(&[spec.clone(), SyntheticSpec { seed: 2, ..spec }]).unwrap();
        let labels: HashSet<_> = records.iter().map(|r| r.label.clone()).collect();
        assert_eq!(labels.len(), 4);
    }
}
