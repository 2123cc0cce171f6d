//! Exact fairness features by allocation enumeration, plus matrix statistics.

use rayon::prelude::*;
use thiserror::Error;

use crate::matrix::{InstanceRecord, UtilityMatrix};

/// Envy at or below this counts as envy-free.
pub const EF_TOLERANCE: f64 = 1e-9;
/// Slack on the MMS guarantee.
pub const MMS_TOLERANCE: f64 = 1e-9;
/// Strict improvement threshold in Pareto domination.
pub const PARETO_STRICT: f64 = 1e-9;
/// Slack on the weak part of Pareto domination.
pub const PARETO_WEAK: f64 = 1e-12;
/// Utilities above this count as valued.
pub const VALUED_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("{what}: {n}^{m} allocations exceed the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        n: usize,
        m: usize,
        cap: u64,
    },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
}

/// Limits on exhaustive computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureCaps {
    /// Largest allocation count `n^m` that is enumerated.
    pub enumeration: u64,
    /// Largest allocation count for the quadratic Pareto phase.
    pub pareto: u64,
}

impl Default for FeatureCaps {
    fn default() -> Self {
        Self {
            enumeration: 20_000_000,
            pareto: 10_000,
        }
    }
}

/// `n^m`, saturating.
pub fn allocation_count(n: usize, m: usize) -> u64 {
    (0..m).fold(1u64, |acc, _| acc.saturating_mul(n as u64))
}

fn check_cap(what: &'static str, n: usize, m: usize, cap: u64) -> Result<(), FeatureError> {
    if allocation_count(n, m) > cap {
        return Err(FeatureError::CapExceeded { what, n, m, cap });
    }
    Ok(())
}

/// All complete allocations of `m` goods to `n` agents.
///
/// Item `owner` assigns good `j` to agent `owner[j]`. Order is a base-`n`
/// counter with good 0 as the least significant digit.
pub fn enumerate_allocations(n: usize, m: usize, cap: u64) -> Result<Allocations, FeatureError> {
    check_cap("enumeration", n, m, cap)?;
    Ok(Allocations {
        n,
        owner: vec![0; m],
        done: n == 0,
    })
}

pub struct Allocations {
    n: usize,
    owner: Vec<usize>,
    done: bool,
}

impl Allocations {
    /// Advances to the next allocation; false once all have been visited.
    fn advance(&mut self) -> bool {
        for digit in self.owner.iter_mut() {
            *digit += 1;
            if *digit < self.n {
                return true;
            }
            *digit = 0;
        }
        false
    }
}

impl Iterator for Allocations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        let current = self.owner.clone();
        self.done = !self.advance();
        Some(current)
    }
}

/// Calls `f` with the bundle-value matrix `v[i * n + k] = u_i(S_k)` of every allocation.
fn for_each_bundle_matrix(u: &UtilityMatrix, cap: u64, mut f: impl FnMut(&[f64])) -> Result<(), FeatureError> {
    let (n, m) = (u.n(), u.m());
    let mut allocs = enumerate_allocations(n, m, cap)?;
    let mut v = vec![0.0; n * n];
    loop {
        v.fill(0.0);
        for i in 0..n {
            for (j, &k) in allocs.owner.iter().enumerate() {
                v[i * n + k] += u.get(i, j);
            }
        }
        f(&v);
        if !allocs.advance() {
            return Ok(());
        }
    }
}

fn max_envy(v: &[f64], n: usize) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        for k in 0..n {
            if k != i {
                worst = worst.max(v[i * n + k] - v[i * n + i]);
            }
        }
    }
    worst
}

fn sum_of_max_envies(v: &[f64], n: usize) -> f64 {
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&k| k != i)
                .map(|k| v[i * n + k] - v[i * n + i])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .sum()
}

fn nash_product(v: &[f64], n: usize) -> f64 {
    (0..n).map(|i| v[i * n + i]).product()
}

fn min_own(v: &[f64], n: usize) -> f64 {
    (0..n).map(|i| v[i * n + i]).fold(f64::INFINITY, f64::min)
}

/// Minimum over allocations of the largest pairwise envy.
pub fn minimax_envy(u: &UtilityMatrix) -> Result<f64, FeatureError> {
    let n = u.n();
    let mut best = f64::INFINITY;
    for_each_bundle_matrix(u, FeatureCaps::default().enumeration, |v| {
        best = best.min(max_envy(v, n))
    })?;
    Ok(best)
}

/// Maximum over allocations of the product of bundle utilities.
pub fn max_nash(u: &UtilityMatrix) -> Result<f64, FeatureError> {
    let n = u.n();
    let mut best = f64::NEG_INFINITY;
    for_each_bundle_matrix(u, FeatureCaps::default().enumeration, |v| {
        best = best.max(nash_product(v, n))
    })?;
    Ok(best)
}

/// Largest `alpha` such that some allocation gives every agent `alpha / n`.
pub fn prop_fraction(u: &UtilityMatrix) -> Result<f64, FeatureError> {
    let n = u.n();
    let mut best = f64::NEG_INFINITY;
    for_each_bundle_matrix(u, FeatureCaps::default().enumeration, |v| {
        best = best.max(n as f64 * min_own(v, n))
    })?;
    Ok(best)
}

/// Minimum over allocations of the summed per-agent maximal envy.
pub fn sum_max_envies(u: &UtilityMatrix) -> Result<f64, FeatureError> {
    let n = u.n();
    let mut best = f64::INFINITY;
    for_each_bundle_matrix(u, FeatureCaps::default().enumeration, |v| {
        best = best.min(sum_of_max_envies(v, n))
    })?;
    Ok(best)
}

/// Maximin shares: agent `i`'s best worst part over all `n`-partitions.
pub fn mms_shares(u: &UtilityMatrix) -> Result<Vec<f64>, FeatureError> {
    mms_shares_capped(u, FeatureCaps::default().enumeration)
}

fn mms_shares_capped(u: &UtilityMatrix, cap: u64) -> Result<Vec<f64>, FeatureError> {
    let n = u.n();
    let mut shares = vec![f64::NEG_INFINITY; n];
    for_each_bundle_matrix(u, cap, |v| {
        for (i, s) in shares.iter_mut().enumerate() {
            let worst = v[i * n..(i + 1) * n].iter().copied().fold(f64::INFINITY, f64::min);
            *s = s.max(worst);
        }
    })?;
    Ok(shares)
}

/// Whether some allocation gives every agent at least its maximin share.
pub fn mms_ok(u: &UtilityMatrix) -> Result<bool, FeatureError> {
    mms_ok_capped(u, FeatureCaps::default().enumeration)
}

fn mms_ok_capped(u: &UtilityMatrix, cap: u64) -> Result<bool, FeatureError> {
    let n = u.n();
    let shares = mms_shares_capped(u, cap)?;
    let mut ok = false;
    for_each_bundle_matrix(u, cap, |v| {
        ok = ok || (0..n).all(|i| v[i * n + i] >= shares[i] - MMS_TOLERANCE);
    })?;
    Ok(ok)
}

/// `y` Pareto-dominates `x`.
pub fn dominates(y: &[f64], x: &[f64]) -> bool {
    y.iter().zip(x).all(|(a, b)| *a >= b - PARETO_WEAK) && y.iter().zip(x).any(|(a, b)| *a > b + PARETO_STRICT)
}

/// Whether some envy-free allocation is not Pareto-dominated by any allocation.
pub fn efpo_exists(u: &UtilityMatrix) -> Result<bool, FeatureError> {
    efpo_capped(u, FeatureCaps::default())
}

fn efpo_capped(u: &UtilityMatrix, caps: FeatureCaps) -> Result<bool, FeatureError> {
    let n = u.n();
    check_cap("Pareto check", n, u.m(), caps.pareto.min(caps.enumeration))?;
    let mut profiles: Vec<Vec<f64>> = Vec::new();
    let mut envy_free: Vec<Vec<f64>> = Vec::new();
    for_each_bundle_matrix(u, caps.enumeration, |v| {
        let own: Vec<f64> = (0..n).map(|i| v[i * n + i]).collect();
        if max_envy(v, n) <= EF_TOLERANCE {
            envy_free.push(own.clone());
        }
        profiles.push(own);
    })?;
    // Only undominated profiles can dominate anything not already dominated,
    // so the skyline is enough to test against.
    let skyline: Vec<&Vec<f64>> = profiles
        .iter()
        .filter(|p| !profiles.iter().any(|q| dominates(q, p)))
        .collect();
    Ok(envy_free.iter().any(|x| !skyline.iter().any(|y| dominates(y, x))))
}

/// Maximum utilitarian welfare: each good goes to an agent valuing it most.
pub fn max_util(u: &UtilityMatrix) -> f64 {
    (0..u.m()).map(|j| u.column(j).into_iter().fold(0.0, f64::max)).sum()
}

/// Gini coefficient as relative mean absolute difference; zero for a zero-mean vector.
pub fn gini(x: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mean = x.iter().sum::<f64>() / k;
    if x.is_empty() || mean == 0.0 {
        return 0.0;
    }
    let total: f64 = x.iter().flat_map(|a| x.iter().map(move |b| (a - b).abs())).sum();
    total / (2.0 * k * k * mean)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixFeatures {
    pub max_demand: f64,
    pub preference_diversity: f64,
    pub demand_gini: f64,
    pub pickiness: f64,
    pub frac_single_minded: f64,
}

pub fn matrix_features(u: &UtilityMatrix) -> MatrixFeatures {
    let n = u.n();
    let sums = u.column_sums();
    let mut distance_total = 0.0;
    let mut pairs = 0usize;
    for a in 0..n {
        for b in a + 1..n {
            distance_total += u
                .row(a)
                .iter()
                .zip(u.row(b))
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            pairs += 1;
        }
    }
    let single = u
        .rows()
        .filter(|row| row.iter().filter(|&&x| x > VALUED_THRESHOLD).count() == 1)
        .count();
    MatrixFeatures {
        max_demand: sums.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        preference_diversity: if pairs == 0 { 0.0 } else { distance_total / pairs as f64 },
        demand_gini: gini(&sums),
        pickiness: u.rows().map(gini).sum::<f64>() / n as f64,
        frac_single_minded: single as f64 / n as f64,
    }
}

/// Column names of the feature table, in output order.
pub const FEATURE_NAMES: [&str; 13] = [
    "minimax_envy",
    "ef_exists",
    "efpo_exists",
    "max_nash",
    "max_util",
    "prop_fraction",
    "sum_max_envies",
    "mms_ok",
    "max_demand",
    "preference_diversity",
    "demand_gini",
    "pickiness",
    "frac_single_minded",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue {
    Real(f64),
    Bool(bool),
}

impl FeatureValue {
    /// Booleans map to 0 and 1.
    pub fn as_f64(self) -> f64 {
        match self {
            FeatureValue::Real(x) => x,
            FeatureValue::Bool(b) => f64::from(u8::from(b)),
        }
    }
}

/// Features of one instance. Absent values carry a reason in `missing`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureRecord {
    pub label: String,
    pub minimax_envy: Option<f64>,
    pub ef_exists: Option<bool>,
    pub efpo_exists: Option<bool>,
    pub max_nash: Option<f64>,
    pub max_util: Option<f64>,
    pub prop_fraction: Option<f64>,
    pub sum_max_envies: Option<f64>,
    pub mms_ok: Option<bool>,
    pub max_demand: Option<f64>,
    pub preference_diversity: Option<f64>,
    pub demand_gini: Option<f64>,
    pub pickiness: Option<f64>,
    pub frac_single_minded: Option<f64>,
    /// `(feature, reason)` for every absent feature.
    pub missing: Vec<(String, String)>,
}

impl FeatureRecord {
    /// Value of a named feature; `Ok(None)` when absent.
    pub fn get(&self, name: &str) -> Result<Option<FeatureValue>, FeatureError> {
        use FeatureValue::{Bool, Real};
        Ok(match name {
            "minimax_envy" => self.minimax_envy.map(Real),
            "ef_exists" => self.ef_exists.map(Bool),
            "efpo_exists" => self.efpo_exists.map(Bool),
            "max_nash" => self.max_nash.map(Real),
            "max_util" => self.max_util.map(Real),
            "prop_fraction" => self.prop_fraction.map(Real),
            "sum_max_envies" => self.sum_max_envies.map(Real),
            "mms_ok" => self.mms_ok.map(Bool),
            "max_demand" => self.max_demand.map(Real),
            "preference_diversity" => self.preference_diversity.map(Real),
            "demand_gini" => self.demand_gini.map(Real),
            "pickiness" => self.pickiness.map(Real),
            "frac_single_minded" => self.frac_single_minded.map(Real),
            other => return Err(FeatureError::UnknownFeature(other.to_string())),
        })
    }

    /// Mutable slot for a named feature, for deserialization.
    pub fn set(&mut self, name: &str, value: f64) -> Result<(), FeatureError> {
        let b = value != 0.0;
        match name {
            "minimax_envy" => self.minimax_envy = Some(value),
            "ef_exists" => self.ef_exists = Some(b),
            "efpo_exists" => self.efpo_exists = Some(b),
            "max_nash" => self.max_nash = Some(value),
            "max_util" => self.max_util = Some(value),
            "prop_fraction" => self.prop_fraction = Some(value),
            "sum_max_envies" => self.sum_max_envies = Some(value),
            "mms_ok" => self.mms_ok = Some(b),
            "max_demand" => self.max_demand = Some(value),
            "preference_diversity" => self.preference_diversity = Some(value),
            "demand_gini" => self.demand_gini = Some(value),
            "pickiness" => self.pickiness = Some(value),
            "frac_single_minded" => self.frac_single_minded = Some(value),
            other => return Err(FeatureError::UnknownFeature(other.to_string())),
        }
        Ok(())
    }
}

/// Every feature of one instance, computed in two enumeration passes.
pub fn compute_features(label: &str, u: &UtilityMatrix, caps: FeatureCaps) -> FeatureRecord {
    let n = u.n();
    let mf = matrix_features(u);
    let mut rec = FeatureRecord {
        label: label.to_string(),
        max_util: Some(max_util(u)),
        max_demand: Some(mf.max_demand),
        preference_diversity: Some(mf.preference_diversity),
        demand_gini: Some(mf.demand_gini),
        pickiness: Some(mf.pickiness),
        frac_single_minded: Some(mf.frac_single_minded),
        ..FeatureRecord::default()
    };
    let mut envy = f64::INFINITY;
    let mut nash = f64::NEG_INFINITY;
    let mut prop = f64::NEG_INFINITY;
    let mut sum_envies = f64::INFINITY;
    let pass = for_each_bundle_matrix(u, caps.enumeration, |v| {
        envy = envy.min(max_envy(v, n));
        nash = nash.max(nash_product(v, n));
        prop = prop.max(n as f64 * min_own(v, n));
        sum_envies = sum_envies.min(sum_of_max_envies(v, n));
    });
    match pass {
        Ok(()) => {
            rec.minimax_envy = Some(envy);
            rec.ef_exists = Some(envy <= EF_TOLERANCE);
            rec.max_nash = Some(nash);
            rec.prop_fraction = Some(prop);
            rec.sum_max_envies = Some(sum_envies);
            rec.mms_ok = mms_ok_capped(u, caps.enumeration).ok();
        }
        Err(e) => {
            for name in [
                "minimax_envy",
                "ef_exists",
                "max_nash",
                "prop_fraction",
                "sum_max_envies",
                "mms_ok",
            ] {
                rec.missing.push((name.to_string(), e.to_string()));
            }
        }
    }
    match efpo_capped(u, caps) {
        Ok(x) => rec.efpo_exists = Some(x),
        Err(e) => rec.missing.push(("efpo_exists".into(), e.to_string())),
    }
    rec
}

pub fn feature_table(records: &[InstanceRecord], caps: FeatureCaps) -> Vec<FeatureRecord> {
    records
        .par_iter()
        .map(|r| compute_features(&r.label, &r.matrix, caps))
        .collect()
}
