//! Cyclic Jacobi methods for small dense matrices.

const MAX_SWEEPS: usize = 100;

/// Singular values of a dense `r x c` matrix given by rows, in descending order.
///
/// One-sided (Hestenes) Jacobi: plane rotations are applied to pairs of rows
/// until all rows are mutually orthogonal, which diagonalizes the row Gram
/// matrix without ever forming it. The singular values are then the row
/// norms. A rank-deficient matrix yields zero singular values at roundoff
/// level rather than at the square root of roundoff.
pub fn singular_values(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut a: Vec<Vec<f64>> = rows.to_vec();
    let r = a.len();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..r {
            for q in p + 1..r {
                let (alpha, beta, gamma) = dots(&a[p], &a[q]);
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (head, tail) = a.split_at_mut(q);
                for (x, y) in head[p].iter_mut().zip(tail[0].iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = a
        .iter()
        .map(|row| row.iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

fn dots(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mut alpha = 0.0;
    let mut beta = 0.0;
    let mut gamma = 0.0;
    for (a, b) in x.iter().zip(y) {
        alpha += a * a;
        beta += b * b;
        gamma += a * b;
    }
    (alpha, beta, gamma)
}

/// Eigenvalues of a symmetric matrix in descending order, by two-sided cyclic Jacobi.
///
/// Sweeps stop once the off-diagonal Frobenius norm drops below `1e-12`.
pub fn symmetric_eigenvalues(matrix: &[Vec<f64>]) -> Vec<f64> {
    let k = matrix.len();
    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..k)
            .flat_map(|i| (0..k).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum::<f64>()
            .sqrt();
        if off < 1e-12 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = if theta == 0.0 {
                    1.0
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..k {
                    let (arp, arq) = (a[r][p], a[r][q]);
                    a[r][p] = c * arp - s * arq;
                    a[r][q] = s * arp + c * arq;
                }
                for r in 0..k {
                    let (apr, aqr) = (a[p][r], a[q][r]);
                    a[p][r] = c * apr - s * aqr;
                    a[q][r] = s * apr + c * aqr;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..k).map(|i| a[i][i]).collect();
    eig.sort_by(|x, y| y.total_cmp(x));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    /// Number of eigenvalues of `a` strictly below `x`, from the signs of the
    /// LDL^T pivots of `a - x I` (Sylvester's law of inertia).
    fn count_below(a: &[Vec<f64>], x: f64) -> usize {
        let k = a.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        for (i, row) in m.iter_mut().enumerate() {
            row[i] -= x;
        }
        let mut negatives = 0;
        for i in 0..k {
            let mut pivot = m[i][i];
            if pivot == 0.0 {
                pivot = -1e-300;
            }
            if pivot < 0.0 {
                negatives += 1;
            }
            for r in i + 1..k {
                let f = m[r][i] / pivot;
                for c in i + 1..k {
                    m[r][c] -= f * m[i][c];
                }
            }
        }
        negatives
    }

    fn bisection_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
        let k = a.len();
        let radius: f64 = a
            .iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
            + 1.0;
        let mut out: Vec<f64> = (0..k)
            .map(|idx| {
                // Smallest x with at least idx + 1 eigenvalues below it.
                let (mut lo, mut hi) = (-radius, radius);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if count_below(a, mid) > idx {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect();
        out.reverse();
        out
    }

    #[test]
    fn eigenvalues_match_bisection() {
        let mut rng = rng_from_seed(5);
        for _ in 0..200 {
            let mut a = vec![vec![0.0; 5]; 5];
            for i in 0..5 {
                for j in i..5 {
                    let x: f64 = rng.random_range(-1.0..1.0);
                    a[i][j] = x;
                    a[j][i] = x;
                }
            }
            let jac = symmetric_eigenvalues(&a);
            let bis = bisection_eigenvalues(&a);
            for (x, y) in jac.iter().zip(&bis) {
                assert!((x - y).abs() < 1e-8, "{jac:?} vs {bis:?}");
            }
        }
    }

    #[test]
    fn singular_values_match_gram_eigenvalues() {
        let mut rng = rng_from_seed(6);
        for _ in 0..200 {
            let rows: Vec<Vec<f64>> = (0..4).map(|_| (0..7).map(|_| rng.random()).collect()).collect();
            let gram: Vec<Vec<f64>> = rows
                .iter()
                .map(|a| rows.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect())
                .collect();
            let sv = singular_values(&rows);
            let eig = symmetric_eigenvalues(&gram);
            for (s, e) in sv.iter().zip(&eig) {
                assert!((s * s - e).abs() < 1e-10, "{sv:?} vs {eig:?}");
            }
        }
    }

    #[test]
    fn identical_rows_have_roundoff_level_zero_singular_values() {
        let row = vec![0.1, 0.2, 0.3, 0.4];
        let sv = singular_values(&vec![row; 3]);
        assert!(sv[1] < 1e-15 && sv[2] < 1e-15, "{sv:?}");
        assert!((sv[0] - (3.0f64 * 0.3).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn diagonal_input() {
        assert_eq!(symmetric_eigenvalues(&[vec![1.0, 0.0], vec![0.0, 3.0]]), vec![3.0, 1.0]);
        assert_eq!(singular_values(&[vec![0.0, 2.0], vec![1.0, 0.0]]), vec![2.0, 1.0]);
    }
}
