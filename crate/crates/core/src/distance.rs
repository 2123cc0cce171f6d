//! Valuation and demand distances between instances of equal shape.
//!
//! Reported distances are correctly rounded sums of the entrywise absolute
//! differences under an optimal matching, so they do not depend on argument
//! order or on the order in which terms are visited.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::assignment::solve;
use crate::matrix::{InstanceRecord, UtilityMatrix};
use crate::numeric::exact_sum;

/// Largest agent count accepted by the exact valuation search by default.
pub const DEFAULT_EXACT_CAP: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistanceError {
    #[error("shape mismatch: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("agent matching is not a permutation of 0..{0}")]
    BadPermutation(usize),
    #[error("exact valuation distance is capped at n <= {cap}, got n = {n}; use the demand metric")]
    ExactSearchCapExceeded { n: usize, cap: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    Valuation,
    Demand,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Valuation => "valuation",
            Metric::Demand => "demand",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "valuation" => Ok(Metric::Valuation),
            "demand" => Ok(Metric::Demand),
            _ => Err(format!("unknown metric {s:?} (expected valuation or demand)")),
        }
    }
}

/// Symmetric table of pairwise distances with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub d: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.d[a][b]
    }

    /// Entries above the diagonal, row by row.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let k = self.len();
        (0..k)
            .flat_map(|a| (a + 1..k).map(move |b| (a, b)))
            .map(|(a, b)| self.d[a][b])
            .collect()
    }

    /// Symmetric, zero diagonal, nonnegative and finite.
    pub fn check(&self) -> Result<(), String> {
        let k = self.len();
        if self.d.len() != k || self.d.iter().any(|r| r.len() != k) {
            return Err(format!("distance table is not {k}x{k}"));
        }
        for a in 0..k {
            if self.d[a][a] != 0.0 {
                return Err(format!("diagonal entry {a} is {}", self.d[a][a]));
            }
            for b in 0..k {
                let x = self.d[a][b];
                if !x.is_finite() || x < 0.0 {
                    return Err(format!("entry ({a}, {b}) = {x} is not a finite nonnegative number"));
                }
                if x != self.d[b][a] {
                    return Err(format!("entries ({a}, {b}) and ({b}, {a}) differ"));
                }
            }
        }
        Ok(())
    }
}

/// Upper bound on either distance for `n x m` instances.
pub fn distance_upper_bound(n: usize, m: usize) -> f64 {
    2.0 * n as f64 - 2.0 * n as f64 / m as f64
}

fn check_shapes(u1: &UtilityMatrix, u2: &UtilityMatrix) -> Result<(), DistanceError> {
    if u1.n() != u2.n() || u1.m() != u2.m() {
        return Err(DistanceError::ShapeMismatch(u1.n(), u1.m(), u2.n(), u2.m()));
    }
    Ok(())
}

/// Column `j` of `u` sorted in descending order, for every good.
pub fn demand_vectors(u: &UtilityMatrix) -> Vec<Vec<f64>> {
    (0..u.m())
        .map(|j| {
            let mut col = u.column(j);
            col.sort_by(|a, b| b.total_cmp(a));
            col
        })
        .collect()
}

/// Whether `(u1, u2)` should be swapped so both argument orders run the same computation.
///
/// Tied optimal matchings can differ in the last bit after rounding; a fixed
/// argument order makes both distances exactly symmetric.
fn swap_arguments(u1: &UtilityMatrix, u2: &UtilityMatrix) -> bool {
    let order = u1
        .as_slice()
        .iter()
        .zip(u2.as_slice())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne());
    order == Some(std::cmp::Ordering::Greater)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn matching_total(cost: &[f64], m: usize) -> f64 {
    let perm = solve(m, |a, b| cost[a * m + b]);
    perm.iter().enumerate().map(|(a, &b)| cost[a * m + b]).sum()
}

fn demand_from_vectors(d1: &[Vec<f64>], d2: &[Vec<f64>]) -> f64 {
    let m = d1.len();
    let mut cost = Vec::with_capacity(m * m);
    for a in d1 {
        for b in d2 {
            cost.push(l1(a, b));
        }
    }
    let perm = solve(m, |a, b| cost[a * m + b]);
    exact_sum(
        d1.iter()
            .zip(&perm)
            .flat_map(|(a, &b)| a.iter().zip(&d2[b]).map(|(x, y)| (x - y).abs())),
    )
}

/// Minimum-cost matching of goods under the l1 distance of their demand vectors.
pub fn demand_distance(u1: &UtilityMatrix, u2: &UtilityMatrix) -> Result<f64, DistanceError> {
    check_shapes(u1, u2)?;
    let (u1, u2) = if swap_arguments(u1, u2) { (u2, u1) } else { (u1, u2) };
    Ok(demand_from_vectors(&demand_vectors(u1), &demand_vectors(u2)))
}

/// Best good matching once agent `i` of `u1` is paired with agent `agents[i]` of `u2`.
pub fn valuation_distance_fixed_agents(
    u1: &UtilityMatrix,
    u2: &UtilityMatrix,
    agents: &[usize],
) -> Result<f64, DistanceError> {
    check_shapes(u1, u2)?;
    let n = u1.n();
    let mut seen = vec![false; n];
    if agents.len() != n || agents.iter().any(|&a| a >= n || std::mem::replace(&mut seen[a], true)) {
        return Err(DistanceError::BadPermutation(n));
    }
    Ok(fixed_agents_value(u1, u2, agents))
}

fn fixed_agents_value(u1: &UtilityMatrix, u2: &UtilityMatrix, agents: &[usize]) -> f64 {
    let (n, m) = (u1.n(), u1.m());
    let mut cost = Vec::with_capacity(m * m);
    for j in 0..m {
        for k in 0..m {
            cost.push((0..n).map(|i| (u1.get(i, j) - u2.get(agents[i], k)).abs()).sum());
        }
    }
    let goods = solve(m, |a, b| cost[a * m + b]);
    exact_sum((0..m).flat_map(|j| {
        let k = goods[j];
        (0..n).map(move |i| (u1.get(i, j) - u2.get(agents[i], k)).abs())
    }))
}

pub fn valuation_distance(u1: &UtilityMatrix, u2: &UtilityMatrix) -> Result<f64, DistanceError> {
    valuation_distance_with_cap(u1, u2, DEFAULT_EXACT_CAP)
}

/// Exact valuation distance by branch and bound over agent matchings.
///
/// A node commits some agents of `u1` to agents of `u2`. Its bound is the
/// optimal good matching under the committed rows' l1 costs plus the
/// sorted-column l1 costs of the uncommitted rows; sorting never increases
/// an l1 distance, so the bound is admissible. At the root it equals the
/// demand distance.
pub fn valuation_distance_with_cap(u1: &UtilityMatrix, u2: &UtilityMatrix, cap: usize) -> Result<f64, DistanceError> {
    check_shapes(u1, u2)?;
    let n = u1.n();
    if n > cap {
        return Err(DistanceError::ExactSearchCapExceeded { n, cap });
    }
    let (u1, u2) = if swap_arguments(u1, u2) { (u2, u1) } else { (u1, u2) };
    let mut search = Search::new(u1, u2);
    search.root_bound = search.bound();
    search.descend(0);
    Ok(search.best)
}

struct Search<'a> {
    u1: &'a UtilityMatrix,
    u2: &'a UtilityMatrix,
    order: Vec<usize>,
    /// `agents[i]` is the u2 agent matched to u1 agent `i`, or `usize::MAX`.
    agents: Vec<usize>,
    used: Vec<bool>,
    /// Committed-row costs, `m x m` row-major.
    partial: Vec<f64>,
    best: f64,
    root_bound: f64,
    done: bool,
}

impl<'a> Search<'a> {
    fn new(u1: &'a UtilityMatrix, u2: &'a UtilityMatrix) -> Self {
        let (n, m) = (u1.n(), u1.m());
        let variance = |i: usize| {
            let row = u1.row(i);
            let mean = row.iter().sum::<f64>() / m as f64;
            row.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| variance(b).total_cmp(&variance(a)).then(a.cmp(&b)));
        Self {
            u1,
            u2,
            order,
            agents: vec![usize::MAX; n],
            used: vec![false; n],
            partial: vec![0.0; m * m],
            best: f64::INFINITY,
            root_bound: 0.0,
            done: false,
        }
    }

    fn sorted_columns<F: Fn(usize) -> bool>(u: &UtilityMatrix, keep: F) -> Vec<Vec<f64>> {
        (0..u.m())
            .map(|j| {
                let mut col: Vec<f64> = (0..u.n()).filter(|&i| keep(i)).map(|i| u.get(i, j)).collect();
                col.sort_by(|a, b| b.total_cmp(a));
                col
            })
            .collect()
    }

    fn bound(&self) -> f64 {
        let m = self.u1.m();
        let rest1 = Self::sorted_columns(self.u1, |i| self.agents[i] == usize::MAX);
        let rest2 = Self::sorted_columns(self.u2, |i| !self.used[i]);
        let mut cost = self.partial.clone();
        if !rest1[0].is_empty() {
            for (a, c1) in rest1.iter().enumerate() {
                for (b, c2) in rest2.iter().enumerate() {
                    cost[a * m + b] += l1(c1, c2);
                }
            }
        }
        matching_total(&cost, m)
    }

    fn descend(&mut self, depth: usize) {
        if self.done {
            return;
        }
        let n = self.u1.n();
        if depth == n {
            let value = fixed_agents_value(self.u1, self.u2, &self.agents);
            if value < self.best {
                self.best = value;
            }
            if self.best <= self.root_bound {
                self.done = true;
            }
            return;
        }
        let m = self.u1.m();
        let i = self.order[depth];
        for k in 0..n {
            if self.used[k] {
                continue;
            }
            self.agents[i] = k;
            self.used[k] = true;
            let saved = self.partial.clone();
            for a in 0..m {
                let x = self.u1.get(i, a);
                for b in 0..m {
                    self.partial[a * m + b] += (x - self.u2.get(k, b)).abs();
                }
            }
            let lb = if depth + 1 == n {
                f64::NEG_INFINITY
            } else {
                self.bound()
            };
            if lb <= self.best + 1e-12 {
                self.descend(depth + 1);
            }
            self.partial = saved;
            self.used[k] = false;
            self.agents[i] = usize::MAX;
            if self.done {
                return;
            }
        }
    }
}

/// Pairwise distances over a collection of equal-shape instances.
pub fn pairwise_distances(records: &[InstanceRecord], metric: Metric) -> Result<DistanceMatrix, DistanceError> {
    pairwise_distances_with_cap(records, metric, DEFAULT_EXACT_CAP)
}

pub fn pairwise_distances_with_cap(
    records: &[InstanceRecord],
    metric: Metric,
    cap: usize,
) -> Result<DistanceMatrix, DistanceError> {
    let k = records.len();
    if let Some(first) = records.first() {
        for r in records {
            check_shapes(&first.matrix, &r.matrix)?;
        }
        if metric == Metric::Valuation && first.matrix.n() > cap {
            return Err(DistanceError::ExactSearchCapExceeded {
                n: first.matrix.n(),
                cap,
            });
        }
    }
    let demands: Vec<Vec<Vec<f64>>> = match metric {
        Metric::Demand => records.par_iter().map(|r| demand_vectors(&r.matrix)).collect(),
        Metric::Valuation => Vec::new(),
    };
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|a| (a + 1..k).map(move |b| (a, b))).collect();
    let values: Vec<f64> = pairs
        .par_iter()
        .map(|&(a, b)| match metric {
            Metric::Demand => {
                let (a, b) = if swap_arguments(&records[a].matrix, &records[b].matrix) {
                    (b, a)
                } else {
                    (a, b)
                };
                Ok(demand_from_vectors(&demands[a], &demands[b]))
            }
            Metric::Valuation => valuation_distance_with_cap(&records[a].matrix, &records[b].matrix, cap),
        })
        .collect::<Result<_, _>>()?;
    let mut d = vec![vec![0.0; k]; k];
    for (&(a, b), &x) in pairs.iter().zip(&values) {
        d[a][b] = x;
        d[b][a] = x;
    }
    Ok(DistanceMatrix {
        labels: records.iter().map(|r| r.label.clone()).collect(),
        d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_characteristic, gen_iid, CharacteristicKind, IidDistribution};
    use crate::matrix::Source;

    fn figure_pair() -> (UtilityMatrix, UtilityMatrix) {
        let a = [
            [2.0, 4.0, 6.0, 8.0],
            [3.0, 3.0, 6.0, 8.0],
            [6.0, 8.0, 6.0, 0.0],
            [8.0, 6.0, 0.0, 6.0],
        ];
        let b = [
            [2.0, 4.0, 6.0, 8.0],
            [3.0, 3.0, 6.0, 8.0],
            [6.0, 8.0, 0.0, 6.0],
            [8.0, 6.0, 6.0, 0.0],
        ];
        let norm = |rows: [[f64; 4]; 4]| {
            UtilityMatrix::normalize_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
        };
        (norm(a), norm(b))
    }

    #[test]
    fn demand_examples() {
        let ind = gen_characteristic(CharacteristicKind::Ind, 5, 5).unwrap();
        let con = gen_characteristic(CharacteristicKind::Con, 5, 5).unwrap();
        assert_eq!(demand_distance(&ind, &ind).unwrap(), 0.0);
        assert!((demand_distance(&ind, &con).unwrap() - 8.0).abs() < 1e-12);
        let (a, b) = figure_pair();
        assert!(demand_distance(&a, &b).unwrap().abs() < 1e-12);
        assert!(valuation_distance(&a, &b).unwrap() > 1e-3);
    }

    #[test]
    fn fixed_agents_examples() {
        let sep = gen_characteristic(CharacteristicKind::Sep, 2, 2).unwrap();
        let swapped = UtilityMatrix::validate(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(valuation_distance_fixed_agents(&sep, &swapped, &[0, 1]).unwrap(), 0.0);
        let ind = gen_characteristic(CharacteristicKind::Ind, 5, 5).unwrap();
        let con = gen_characteristic(CharacteristicKind::Con, 5, 5).unwrap();
        for perm in [[0, 1, 2, 3, 4], [4, 3, 2, 1, 0], [1, 0, 3, 2, 4]] {
            assert!((valuation_distance_fixed_agents(&con, &ind, &perm).unwrap() - 8.0).abs() < 1e-12);
        }
        assert_eq!(
            valuation_distance_fixed_agents(&con, &ind, &[0, 0, 1, 2, 3]),
            Err(DistanceError::BadPermutation(5))
        );
    }

    #[test]
    fn characteristic_instances_are_equidistant() {
        let kinds = [
            CharacteristicKind::Ind,
            CharacteristicKind::Sep,
            CharacteristicKind::Con,
        ];
        let ms: Vec<_> = kinds.iter().map(|&k| gen_characteristic(k, 5, 5).unwrap()).collect();
        for a in 0..3 {
            assert_eq!(valuation_distance(&ms[a], &ms[a]).unwrap(), 0.0);
            for b in 0..3 {
                if a != b {
                    assert!((valuation_distance(&ms[a], &ms[b]).unwrap() - 8.0).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn shape_and_cap_errors() {
        let a = gen_iid(3, 4, IidDistribution::Uniform, 1).unwrap();
        let b = gen_iid(3, 5, IidDistribution::Uniform, 1).unwrap();
        assert!(matches!(demand_distance(&a, &b), Err(DistanceError::ShapeMismatch(..))));
        let c = gen_iid(3, 4, IidDistribution::Uniform, 2).unwrap();
        assert!(matches!(
            valuation_distance_with_cap(&a, &c, 2),
            Err(DistanceError::ExactSearchCapExceeded { n: 3, cap: 2 })
        ));
    }

    #[test]
    fn pairwise_table() {
        let rec = |k: CharacteristicKind| {
            InstanceRecord::new(
                k.name(),
                gen_characteristic(k, 5, 5).unwrap(),
                Source::Characteristic(k),
                None,
            )
        };
        let single = pairwise_distances(&[rec(CharacteristicKind::Ind)], Metric::Valuation).unwrap();
        assert_eq!(single.d, vec![vec![0.0]]);
        let recs = [
            rec(CharacteristicKind::Ind),
            rec(CharacteristicKind::Sep),
            rec(CharacteristicKind::Con),
        ];
        let table = pairwise_distances(&recs, Metric::Valuation).unwrap();
        table.check().unwrap();
        for x in table.upper_triangle() {
            assert!((x - 8.0).abs() < 1e-9);
        }
        assert!(pairwise_distances(&[], Metric::Demand).unwrap().is_empty());
    }
}
