//! Minimum-cost perfect matching on square cost matrices.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssignmentError {
    #[error("cost matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("cost ({0}, {1}) is not finite")]
    NonFinite(usize, usize),
}

/// Solves the assignment problem with the shortest-augmenting-path Hungarian method.
///
/// Returns `perm` with row `r` matched to column `perm[r]`, and the total
/// cost summed in row order. Runs in `O(k^3)`.
pub fn hungarian_min_cost(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64), AssignmentError> {
    let k = cost.len();
    for (r, row) in cost.iter().enumerate() {
        if row.len() != k {
            return Err(AssignmentError::NonSquare {
                row: r,
                len: row.len(),
                expected: k,
            });
        }
        if let Some(c) = row.iter().position(|x| !x.is_finite()) {
            return Err(AssignmentError::NonFinite(r, c));
        }
    }
    let perm = solve(k, |r, c| cost[r][c]);
    let total = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    Ok((perm, total))
}

/// Hungarian method over an implicit `k x k` cost function; inputs are assumed finite.
pub(crate) fn solve(k: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    // 1-based potentials; column 0 is the virtual source.
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut row_of = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for r in 1..=k {
        row_of[0] = r;
        let mut col = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[col] = true;
            let r0 = row_of[col];
            let mut delta = f64::INFINITY;
            let mut next = 0;
            for c in 1..=k {
                if used[c] {
                    continue;
                }
                let reduced = cost(r0 - 1, c - 1) - u[r0] - v[c];
                if reduced < minv[c] {
                    minv[c] = reduced;
                    way[c] = col;
                }
                if minv[c] < delta {
                    delta = minv[c];
                    next = c;
                }
            }
            for c in 0..=k {
                if used[c] {
                    u[row_of[c]] += delta;
                    v[c] -= delta;
                } else {
                    minv[c] -= delta;
                }
            }
            col = next;
            if row_of[col] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col];
            row_of[col] = row_of[prev];
            col = prev;
            if col == 0 {
                break;
            }
        }
    }
    let mut perm = vec![0; k];
    for c in 1..=k {
        perm[row_of[c] - 1] = c - 1;
    }
    perm
}
