//! The explicit map: an instance's two largest singular values.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use thiserror::Error;

use crate::assignment::solve;
use crate::generators::{gen_characteristic, CharacteristicKind, GenError};
use crate::jacobi;
use crate::matrix::{InstanceRecord, UtilityMatrix};
use crate::rng::{child_seed, rng_from_seed};

/// Default tolerance of [`boundary_report`].
pub const BOUNDARY_TOLERANCE: f64 = 1e-7;

const STRUCTURE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("resolution must be >= 2, got {0}")]
    BadResolution(usize),
    #[error("sample count must be >= 1")]
    EmptySample,
    #[error(transparent)]
    Generator(#[from] GenError),
}

/// Map coordinates `(sigma1, sigma2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPoint {
    pub sigma1: f64,
    pub sigma2: f64,
}

impl SpectralPoint {
    pub fn new(sigma1: f64, sigma2: f64) -> Self {
        Self { sigma1, sigma2 }
    }
}

/// Two largest singular values of `u`.
pub fn top_singular_values(u: &UtilityMatrix) -> SpectralPoint {
    top_singular_values_of_rows(&u.to_rows())
}

/// Two largest singular values of an arbitrary dense matrix with at least one row.
///
/// Missing values (a single row) are reported as zero.
pub fn top_singular_values_of_rows(rows: &[Vec<f64>]) -> SpectralPoint {
    let sv = jacobi::singular_values(rows);
    SpectralPoint::new(sv.first().copied().unwrap_or(0.0), sv.get(1).copied().unwrap_or(0.0))
}

/// Same quantity through the eigenvalues of the `n x n` Gram matrix `U U^T`.
///
/// Kept as a cross-check. Squaring limits the accuracy of small singular
/// values to about `1e-8`.
pub fn top_singular_values_gram(u: &UtilityMatrix) -> SpectralPoint {
    let gram: Vec<Vec<f64>> = u
        .rows()
        .map(|a| u.rows().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
        .collect();
    let eig = jacobi::symmetric_eigenvalues(&gram);
    SpectralPoint::new(eig[0].max(0.0).sqrt(), eig[1].max(0.0).sqrt())
}

pub fn explicit_coords(records: &[InstanceRecord]) -> Vec<(String, SpectralPoint)> {
    records
        .par_iter()
        .map(|r| (r.label.clone(), top_singular_values(&r.matrix)))
        .collect()
}

/// One boundary test: the spectral residual and, where one exists, the structural certificate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCheck {
    pub tight: bool,
    pub residual: f64,
    pub certificate: Option<bool>,
}

impl BoundaryCheck {
    /// Whether spectral and structural tests agree; `None` without a certificate.
    pub fn agrees(&self) -> Option<bool> {
        self.certificate.map(|c| c == self.tight)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryReport {
    pub point: SpectralPoint,
    /// `sigma2 = 0`; certificate: all rows identical.
    pub west: BoundaryCheck,
    /// `sigma1 = sqrt(n/m)`; certificate: every column sums to `n/m`.
    pub south: BoundaryCheck,
    /// `sigma1^2 + sigma2^2 = n`; certificate: single-minded agents on at most two goods.
    pub north: BoundaryCheck,
    /// `sigma1 = sigma2`. The certificate is advisory: two isomorphic
    /// connected blocks share the largest singular value.
    pub east: BoundaryCheck,
}

impl BoundaryReport {
    /// West, South and North agreement between spectral and structural tests.
    pub fn certificates_agree(&self) -> bool {
        [self.west, self.south, self.north]
            .iter()
            .all(|c| c.agrees() != Some(false))
    }
}

pub fn boundary_report(u: &UtilityMatrix, tol: f64) -> BoundaryReport {
    let (n, m) = (u.n() as f64, u.m() as f64);
    let point = top_singular_values(u);
    let check = |residual: f64, certificate: Option<bool>| BoundaryCheck {
        tight: residual <= tol,
        residual,
        certificate,
    };
    BoundaryReport {
        point,
        west: check(point.sigma2, Some(identical_rows(u))),
        south: check((point.sigma1 - (n / m).sqrt()).abs(), Some(equal_column_sums(u))),
        north: check(
            (point.sigma1 * point.sigma1 + point.sigma2 * point.sigma2 - n).abs(),
            Some(single_minded_on_two_goods(u)),
        ),
        east: check(
            point.sigma1 - point.sigma2,
            Some(isomorphic_top_blocks(u, point.sigma1)),
        ),
    }
}

fn identical_rows(u: &UtilityMatrix) -> bool {
    u.rows().all(|row| {
        row.iter()
            .zip(u.row(0))
            .all(|(x, y)| (x - y).abs() <= STRUCTURE_TOLERANCE)
    })
}

fn equal_column_sums(u: &UtilityMatrix) -> bool {
    let target = u.n() as f64 / u.m() as f64;
    u.column_sums()
        .iter()
        .all(|s| (s - target).abs() <= STRUCTURE_TOLERANCE)
}

fn single_minded_on_two_goods(u: &UtilityMatrix) -> bool {
    let single = u
        .rows()
        .all(|row| row.iter().any(|&x| (x - 1.0).abs() <= STRUCTURE_TOLERANCE));
    let valued = u.column_sums().iter().filter(|&&s| s > STRUCTURE_TOLERANCE).count();
    single && valued <= 2
}

/// Connected components of the agent-good support graph, as (agents, goods).
fn support_components(u: &UtilityMatrix) -> Vec<(Vec<usize>, Vec<usize>)> {
    let (n, m) = (u.n(), u.m());
    let mut agent_comp = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if agent_comp[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut agents = vec![start];
        let mut goods = Vec::new();
        let mut good_seen = vec![false; m];
        agent_comp[start] = id;
        let mut next = 0;
        while next < agents.len() {
            let i = agents[next];
            next += 1;
            for j in 0..m {
                if u.get(i, j) > 0.0 && !good_seen[j] {
                    good_seen[j] = true;
                    goods.push(j);
                    for k in 0..n {
                        if u.get(k, j) > 0.0 && agent_comp[k] == usize::MAX {
                            agent_comp[k] = id;
                            agents.push(k);
                        }
                    }
                }
            }
        }
        agents.sort_unstable();
        goods.sort_unstable();
        comps.push((agents, goods));
    }
    comps
}

fn submatrix(u: &UtilityMatrix, agents: &[usize], goods: &[usize]) -> Vec<Vec<f64>> {
    agents
        .iter()
        .map(|&i| goods.iter().map(|&j| u.get(i, j)).collect())
        .collect()
}

/// Alternately sorts rows and columns lexicographically until stable.
fn canonical_form(mut a: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let cmp = |x: &Vec<f64>, y: &Vec<f64>| {
        x.iter()
            .zip(y)
            .map(|(p, q)| q.total_cmp(p))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    for _ in 0..64 {
        let before = a.clone();
        a.sort_by(cmp);
        let cols = a.first().map_or(0, Vec::len);
        let mut t: Vec<Vec<f64>> = (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect();
        t.sort_by(cmp);
        a = (0..a.len()).map(|i| t.iter().map(|c| c[i]).collect()).collect();
        if a == before {
            break;
        }
    }
    a
}

fn isomorphic(a: &[Vec<f64>], b: &[Vec<f64>]) -> bool {
    let (r, c) = (a.len(), a.first().map_or(0, Vec::len));
    if b.len() != r || b.first().map_or(0, Vec::len) != c {
        return false;
    }
    if canonical_form(a.to_vec()) == canonical_form(b.to_vec()) {
        return true;
    }
    if r > 7 {
        return false;
    }
    // Exhaustive over row matchings with an optimal column matching each.
    let mut perm: Vec<usize> = (0..r).collect();
    loop {
        let cost = |x: usize, y: usize| (0..r).map(|i| (a[i][x] - b[perm[i]][y]).abs()).sum::<f64>();
        let cols = solve(c, cost);
        let total: f64 = cols.iter().enumerate().map(|(x, &y)| cost(x, y)).sum();
        if total <= STRUCTURE_TOLERANCE {
            return true;
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

pub(crate) fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn isomorphic_top_blocks(u: &UtilityMatrix, sigma1: f64) -> bool {
    let blocks: Vec<Vec<Vec<f64>>> = support_components(u)
        .into_iter()
        .map(|(agents, goods)| submatrix(u, &agents, &goods))
        .filter(|b| (top_singular_values_of_rows(b).sigma1 - sigma1).abs() <= STRUCTURE_TOLERANCE)
        .collect();
    (0..blocks.len()).any(|a| (a + 1..blocks.len()).any(|b| isomorphic(&blocks[a], &blocks[b])))
}

/// Map location of a characteristic instance.
pub fn corner_coordinates(n: usize, m: usize) -> Vec<(CharacteristicKind, SpectralPoint)> {
    let (nf, mf) = (n as f64, m as f64);
    let l = (m / n) as f64;
    let h = (n / 2) as f64;
    vec![
        (CharacteristicKind::Ind, SpectralPoint::new((nf / mf).sqrt(), 0.0)),
        (CharacteristicKind::Con, SpectralPoint::new(nf.sqrt(), 0.0)),
        (
            CharacteristicKind::Wsep,
            SpectralPoint::new((1.0 / l).sqrt(), (1.0 / l).sqrt()),
        ),
        (
            CharacteristicKind::Wsepf,
            SpectralPoint::new((nf / mf).sqrt(), l.sqrt() * nf / mf),
        ),
        (CharacteristicKind::Bic, SpectralPoint::new(h.sqrt(), h.sqrt())),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    West,
    South,
    North,
    East,
}

impl Boundary {
    pub const ALL: [Boundary; 4] = [Boundary::West, Boundary::South, Boundary::North, Boundary::East];

    pub fn name(self) -> &'static str {
        match self {
            Boundary::West => "west",
            Boundary::South => "south",
            Boundary::North => "north",
            Boundary::East => "east",
        }
    }

    /// Distance of `p` from this boundary, for `n x m` instances.
    pub fn residual(self, p: SpectralPoint, n: usize, m: usize) -> f64 {
        match self {
            Boundary::West => p.sigma2,
            Boundary::South => (p.sigma1 - (n as f64 / m as f64).sqrt()).abs(),
            Boundary::North => (p.sigma1 * p.sigma1 + p.sigma2 * p.sigma2 - n as f64).abs(),
            Boundary::East => p.sigma1 - p.sigma2,
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Boundary {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown boundary {s:?}"))
    }
}

fn steps(resolution: usize) -> impl Iterator<Item = f64> {
    (0..resolution).map(move |k| k as f64 / (resolution - 1) as f64)
}

fn single_minded(n: usize, m: usize, goods: &[usize]) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| {
            let mut row = vec![0.0; m];
            row[goods[i]] = 1.0;
            row
        })
        .collect()
}

/// Instances tracing one boundary of the map.
///
/// West and South are convex paths from IND to CON and to WSEPf. North puts
/// `t = 1..n-1` agents on good 0 and the rest on good 1 and ignores
/// `resolution`. East first moves WSEP to the separable instance where agent
/// `i` values only good `i*l`, then merges agents pairwise into two equal
/// single-minded groups ending at a copy of BIC.
pub fn boundary_interpolation(
    boundary: Boundary,
    n: usize,
    m: usize,
    resolution: usize,
) -> Result<Vec<UtilityMatrix>, SpectralError> {
    if resolution < 2 {
        return Err(SpectralError::BadResolution(resolution));
    }
    let ind = gen_characteristic(CharacteristicKind::Ind, n, m)?;
    Ok(match boundary {
        Boundary::West => {
            let con = gen_characteristic(CharacteristicKind::Con, n, m)?;
            steps(resolution).map(|t| ind.lerp(&con, t)).collect()
        }
        Boundary::South => {
            let wsepf = gen_characteristic(CharacteristicKind::Wsepf, n, m)?;
            steps(resolution).map(|t| ind.lerp(&wsepf, t)).collect()
        }
        Boundary::North => (1..n)
            .map(|t| {
                let goods: Vec<usize> = (0..n).map(|i| usize::from(i >= t)).collect();
                UtilityMatrix::validate(&single_minded(n, m, &goods)).expect("single-minded rows")
            })
            .collect(),
        Boundary::East => east_path(n, m, resolution)?,
    })
}

fn east_path(n: usize, m: usize, resolution: usize) -> Result<Vec<UtilityMatrix>, SpectralError> {
    let l = m / n;
    let h = n / 2;
    let wsep = gen_characteristic(CharacteristicKind::Wsep, n, m)?;
    let own: Vec<usize> = (0..n).map(|i| i * l).collect();
    let sep = UtilityMatrix::validate(&single_minded(n, m, &own)).expect("single-minded rows");
    let mut path: Vec<UtilityMatrix> = steps(resolution).map(|t| wsep.lerp(&sep, t)).collect();
    // Stage r: agents 0..r sit on good own[0], agents h..h+r on good own[h].
    let mut goods = own.clone();
    for r in 1..h {
        for theta in steps(resolution).skip(1) {
            let mut rows = single_minded(n, m, &goods);
            for (agent, target) in [(r, own[0]), (h + r, own[h])] {
                rows[agent][own[agent]] = 1.0 - theta;
                rows[agent][target] += theta;
            }
            path.push(UtilityMatrix::validate(&rows).expect("convex rows"));
        }
        goods[r] = own[0];
        goods[h + r] = own[h];
    }
    Ok(path)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletSample {
    pub mean_sigma1_sq: f64,
    pub std_error: f64,
    pub max_sigma2: f64,
}

/// Duplicates one flat-Dirichlet utility vector across all `n` agents, `count` times.
///
/// Sample `k` uses `child_seed(seed, k)`. The exact expectation of
/// `sigma1^2` is `n * E|v|^2 = 2n / (m + 1)`.
pub fn dirichlet_duplicated_sample(
    n: usize,
    m: usize,
    count: usize,
    seed: u64,
) -> Result<DirichletSample, SpectralError> {
    if count == 0 {
        return Err(SpectralError::EmptySample);
    }
    if n < 2 || m < n {
        return Err(GenError::UnsupportedShape {
            kind: "dirichlet".into(),
            n,
            m,
        }
        .into());
    }
    let points: Vec<SpectralPoint> = (0..count)
        .into_par_iter()
        .map(|k| {
            let mut rng = rng_from_seed(child_seed(seed, k as u64));
            let row = loop {
                let v: Vec<f64> = (0..m).map(|_| Exp1.sample(&mut rng)).collect();
                let sum: f64 = v.iter().sum();
                if sum > 0.0 {
                    break v.into_iter().map(|x| x / sum).collect::<Vec<f64>>();
                }
            };
            top_singular_values_of_rows(&vec![row; n])
        })
        .collect();
    let values: Vec<f64> = points.iter().map(|p| p.sigma1 * p.sigma1).collect();
    let mean = values.iter().sum::<f64>() / count as f64;
    let std_error = if count > 1 {
        let var = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        (var / count as f64).sqrt()
    } else {
        0.0
    };
    Ok(DirichletSample {
        mean_sigma1_sq: mean,
        std_error,
        max_sigma2: points.iter().map(|p| p.sigma2).fold(0.0, f64::max),
    })
}
