//! Independent oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use fairmap::generators::{
    gen_attributes, gen_characteristic, gen_iid, gen_resampling, CharacteristicKind, IidDistribution,
};
use fairmap::numeric::exact_sum;
use fairmap::rng::{child_seed, rng_from_seed};
use fairmap::UtilityMatrix;
use rand::Rng;

pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k - 1);
            out.push(q);
        }
    }
    out
}

/// Valuation distance by trying every agent and good permutation.
///
/// Uses correctly rounded summation, like the library, so values compare exactly.
pub fn valuation_exhaustive(a: &UtilityMatrix, b: &UtilityMatrix) -> f64 {
    let (n, m) = (a.n(), a.m());
    let goods = permutations(m);
    let mut best = f64::INFINITY;
    for pa in permutations(n) {
        for pg in &goods {
            let mut terms = Vec::with_capacity(n * m);
            for j in 0..m {
                for i in 0..n {
                    terms.push((a.get(i, j) - b.get(pa[i], pg[j])).abs());
                }
            }
            best = best.min(exact_sum(terms));
        }
    }
    best
}

pub fn sorted_column(u: &UtilityMatrix, j: usize) -> Vec<f64> {
    let mut c: Vec<f64> = (0..u.n()).map(|i| u.get(i, j)).collect();
    c.sort_by(|x, y| y.partial_cmp(x).unwrap());
    c
}

/// Demand distance by trying every good matching.
pub fn demand_exhaustive(a: &UtilityMatrix, b: &UtilityMatrix) -> f64 {
    let m = a.m();
    let da: Vec<_> = (0..m).map(|j| sorted_column(a, j)).collect();
    let db: Vec<_> = (0..m).map(|j| sorted_column(b, j)).collect();
    permutations(m)
        .iter()
        .map(|pg| exact_sum((0..m).flat_map(|j| da[j].iter().zip(&db[pg[j]]).map(|(x, y)| (x - y).abs()))))
        .fold(f64::INFINITY, f64::min)
}

/// Features recomputed from explicit bundles, by recursive enumeration.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleFeatures {
    pub minimax_envy: f64,
    pub max_nash: f64,
    pub prop_fraction: f64,
    pub sum_max_envies: f64,
    pub mms_ok: bool,
    pub efpo_exists: bool,
}

fn bundles_of(owner: &[usize], n: usize) -> Vec<Vec<usize>> {
    let mut b = vec![Vec::new(); n];
    for (j, &o) in owner.iter().enumerate() {
        b[o].push(j);
    }
    b
}

fn all_owners(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for a in 0..n {
            cur.push(a);
            rec(n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, m, &mut Vec::new(), &mut out);
    out
}

fn value(u: &UtilityMatrix, i: usize, bundle: &[usize]) -> f64 {
    let mut s = 0.0;
    for &j in bundle {
        s += u.get(i, j);
    }
    s
}

pub fn feature_oracle(u: &UtilityMatrix) -> OracleFeatures {
    let n = u.n();
    let owners = all_owners(n, u.m());
    let mut minimax = f64::INFINITY;
    let mut nash = f64::NEG_INFINITY;
    let mut prop = f64::NEG_INFINITY;
    let mut sum_env = f64::INFINITY;
    let mut shares = vec![f64::NEG_INFINITY; n];
    let mut profiles = Vec::new();
    let mut ef_profiles = Vec::new();
    for owner in &owners {
        let b = bundles_of(owner, n);
        let own: Vec<f64> = (0..n).map(|i| value(u, i, &b[i])).collect();
        let mut worst = f64::NEG_INFINITY;
        let mut total = 0.0;
        for i in 0..n {
            let mut agent_worst = f64::NEG_INFINITY;
            for k in 0..n {
                if k != i {
                    let e = value(u, i, &b[k]) - own[i];
                    agent_worst = agent_worst.max(e);
                }
            }
            worst = worst.max(agent_worst);
            total += agent_worst;
            let min_part = (0..n).map(|k| value(u, i, &b[k])).fold(f64::INFINITY, f64::min);
            shares[i] = shares[i].max(min_part);
        }
        minimax = minimax.min(worst);
        sum_env = sum_env.min(total);
        let mut product = 1.0;
        for x in &own {
            product *= x;
        }
        nash = nash.max(product);
        prop = prop.max(n as f64 * own.iter().copied().fold(f64::INFINITY, f64::min));
        if worst <= 1e-9 {
            ef_profiles.push(own.clone());
        }
        profiles.push(own);
    }
    let mms_ok = owners.iter().any(|owner| {
        let b = bundles_of(owner, n);
        (0..n).all(|i| value(u, i, &b[i]) >= shares[i] - 1e-9)
    });
    let dominated = |x: &Vec<f64>| {
        profiles
            .iter()
            .any(|y| (0..n).all(|i| y[i] >= x[i] - 1e-12) && (0..n).any(|i| y[i] > x[i] + 1e-9))
    };
    OracleFeatures {
        minimax_envy: minimax,
        max_nash: nash,
        prop_fraction: prop,
        sum_max_envies: sum_env,
        mms_ok,
        efpo_exists: ef_profiles.iter().any(|x| !dominated(x)),
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Random instance from a generator picked by `seed`, covering every family.
pub fn mixed_instance(n: usize, m: usize, seed: u64) -> UtilityMatrix {
    let s = child_seed(seed, 1);
    match seed % 8 {
        0 => gen_iid(n, m, IidDistribution::Uniform, s).unwrap(),
        1 => gen_iid(n, m, IidDistribution::Exponential, s).unwrap(),
        2 => gen_attributes(n, m, 2, s).unwrap(),
        3 => gen_attributes(n, m, 5, s).unwrap(),
        4 | 5 => {
            let mut rng = rng_from_seed(s);
            let p = [0.2, 0.4, 0.6, 0.8][rng.random_range(0..4)];
            let phi = [0.05, 0.2, 0.5, 0.8][rng.random_range(0..4)];
            gen_resampling(n, m, p, phi, child_seed(s, 2)).unwrap()
        }
        6 => gen_attributes(n, m, 1, s).unwrap(),
        _ => {
            let kinds = CharacteristicKind::ALL;
            let base = gen_characteristic(kinds[(seed / 8) as usize % kinds.len()], n, m).unwrap();
            let noise = gen_iid(n, m, IidDistribution::Uniform, s).unwrap();
            base.lerp(&noise, (seed % 3) as f64 * 0.25)
        }
    }
}
