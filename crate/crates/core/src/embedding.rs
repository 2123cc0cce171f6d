//! Metric multidimensional scaling by stress majorization (SMACOF).

use rand::Rng as _;
use rayon::prelude::*;
use thiserror::Error;

use crate::distance::DistanceMatrix;
use crate::rng::{child_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmbedError {
    #[error("need at least 2 instances to embed, got {0}")]
    TooFewPoints(usize),
    #[error("{0} points for a {1}x{1} distance table")]
    ShapeMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("invalid distance table: {0}")]
    InvalidDistances(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MdsParams {
    pub max_iters: usize,
    /// Stop once the relative stress improvement of an iteration falls below this.
    pub tol: f64,
}

impl Default for MdsParams {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub labels: Vec<String>,
    pub points: Vec<[f64; 2]>,
    /// Raw stress of `points`.
    pub stress: f64,
    pub iterations: usize,
    /// Stress of the start configuration followed by every accepted iterate.
    pub trace: Vec<f64>,
    /// Set when every target distance is zero; all points then sit at the origin.
    pub degenerate: bool,
}

fn norm(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn raw_stress(d: &[Vec<f64>], x: &[[f64; 2]]) -> f64 {
    let k = x.len();
    let mut s = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let r = d[i][j] - norm(x[i], x[j]);
            s += r * r;
        }
    }
    s
}

/// Raw stress `sum_{i<j} (d_ij - |x_i - x_j|)^2`.
pub fn stress(d: &DistanceMatrix, points: &[[f64; 2]]) -> Result<f64, EmbedError> {
    if points.len() != d.len() {
        return Err(EmbedError::ShapeMismatch(points.len(), d.len()));
    }
    Ok(raw_stress(&d.d, points))
}

/// Guttman transform with unit weights.
fn guttman(d: &[Vec<f64>], x: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let k = x.len();
    let mut out = vec![[0.0; 2]; k];
    for i in 0..k {
        let mut acc = [0.0; 2];
        for j in 0..k {
            if i == j {
                continue;
            }
            let dist = norm(x[i], x[j]);
            if dist > 0.0 {
                let b = d[i][j] / dist;
                acc[0] += b * (x[i][0] - x[j][0]);
                acc[1] += b * (x[i][1] - x[j][1]);
            }
        }
        out[i] = [acc[0] / k as f64, acc[1] / k as f64];
    }
    out
}

/// Centers the configuration and rotates the largest-norm point onto the positive x axis.
fn canonicalize(x: &mut [[f64; 2]]) {
    let k = x.len() as f64;
    let cx = x.iter().map(|p| p[0]).sum::<f64>() / k;
    let cy = x.iter().map(|p| p[1]).sum::<f64>() / k;
    for p in x.iter_mut() {
        p[0] -= cx;
        p[1] -= cy;
    }
    let mut far = 0;
    for (i, p) in x.iter().enumerate() {
        if p[0].hypot(p[1]) > x[far][0].hypot(x[far][1]) {
            far = i;
        }
    }
    let angle = x[far][1].atan2(x[far][0]);
    let (s, c) = (-angle).sin_cos();
    for p in x.iter_mut() {
        *p = [c * p[0] - s * p[1], s * p[0] + c * p[1]];
    }
    x[far][1] = 0.0;
}

/// SMACOF from a uniform random start in `[-1, 1]^2`.
///
/// An iterate whose stress exceeds its predecessor's (possible only through
/// rounding) is discarded and the run ends, so the trace never increases.
pub fn mds_embed(d: &DistanceMatrix, seed: u64, params: MdsParams) -> Result<Embedding, EmbedError> {
    let k = d.len();
    if k < 2 {
        return Err(EmbedError::TooFewPoints(k));
    }
    if params.max_iters == 0 || params.tol.is_nan() || params.tol <= 0.0 {
        return Err(EmbedError::BadParameter(format!(
            "max_iters = {}, tol = {} (need max_iters >= 1 and tol > 0)",
            params.max_iters, params.tol
        )));
    }
    d.check().map_err(EmbedError::InvalidDistances)?;
    if d.d.iter().flatten().all(|&x| x == 0.0) {
        return Ok(Embedding {
            labels: d.labels.clone(),
            points: vec![[0.0; 2]; k],
            stress: 0.0,
            iterations: 0,
            trace: vec![0.0],
            degenerate: true,
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut x: Vec<[f64; 2]> = (0..k)
        .map(|_| [rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0)])
        .collect();
    let mut current = raw_stress(&d.d, &x);
    let mut trace = vec![current];
    let mut iterations = 0;
    while iterations < params.max_iters {
        let next = guttman(&d.d, &x);
        let s = raw_stress(&d.d, &next);
        if s > current {
            break;
        }
        iterations += 1;
        let improvement = if current > 0.0 { (current - s) / current } else { 0.0 };
        x = next;
        current = s;
        trace.push(s);
        if improvement < params.tol {
            break;
        }
    }
    canonicalize(&mut x);
    Ok(Embedding {
        labels: d.labels.clone(),
        stress: raw_stress(&d.d, &x),
        points: x,
        iterations,
        trace,
        degenerate: false,
    })
}

/// Best of `restarts` runs seeded `child_seed(seed, r)`; a single run uses `seed` itself.
pub fn mds_embed_restarts(
    d: &DistanceMatrix,
    seed: u64,
    params: MdsParams,
    restarts: usize,
) -> Result<Embedding, EmbedError> {
    match restarts {
        0 => Err(EmbedError::BadParameter("restarts must be >= 1".into())),
        1 => mds_embed(d, seed, params),
        _ => {
            let runs: Vec<Embedding> = (0..restarts as u64)
                .into_par_iter()
                .map(|r| mds_embed(d, child_seed(seed, r), params))
                .collect::<Result<_, _>>()?;
            Ok(runs
                .into_iter()
                .reduce(|best, e| if e.stress < best.stress { e } else { best })
                .expect("at least one run"))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(d: Vec<Vec<f64>>) -> DistanceMatrix {
        DistanceMatrix {
            labels: (0..d.len()).map(|i| format!("p{i}")).collect(),
            d,
        }
    }

    #[test]
    fn stress_examples() {
        let d = table(vec![vec![0.0, 3.0], vec![3.0, 0.0]]);
        assert_eq!(stress(&d, &[[0.0, 0.0], [1.0, 0.0]]).unwrap(), 4.0);
        assert_eq!(stress(&d, &[[0.0, 0.0], [0.0, 3.0]]).unwrap(), 0.0);
        assert!(stress(&d, &[[0.0, 0.0]]).is_err());
    }

    #[test]
    fn two_points_embed_exactly() {
        let e = mds_embed(&table(vec![vec![0.0, 2.5], vec![2.5, 0.0]]), 1, MdsParams::default()).unwrap();
        assert!((norm(e.points[0], e.points[1]) - 2.5).abs() < 1e-6);
        assert!(e.points[0][1].abs() < 1e-12 && e.points[1][1].abs() < 1e-12);
    }

    #[test]
    fn equilateral_triangle() {
        let d = table(vec![vec![0.0, 8.0, 8.0], vec![8.0, 0.0, 8.0], vec![8.0, 8.0, 0.0]]);
        let e = mds_embed(&d, 3, MdsParams::default()).unwrap();
        let sides = [
            norm(e.points[0], e.points[1]),
            norm(e.points[0], e.points[2]),
            norm(e.points[1], e.points[2]),
        ];
        for s in sides {
            assert!((s / 8.0 - 1.0).abs() < 0.01, "{sides:?}");
        }
        assert!(e.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn degenerate_and_invalid_input() {
        let e = mds_embed(&table(vec![vec![0.0; 3]; 3]), 1, MdsParams::default()).unwrap();
        assert!(e.degenerate && e.stress == 0.0 && e.points.iter().all(|p| *p == [0.0, 0.0]));
        assert!(matches!(
            mds_embed(&table(vec![vec![0.0]]), 1, MdsParams::default()),
            Err(EmbedError::TooFewPoints(1))
        ));
        let bad = MdsParams {
            max_iters: 0,
            tol: 1e-9,
        };
        assert!(mds_embed(&table(vec![vec![0.0, 1.0], vec![1.0, 0.0]]), 1, bad).is_err());
    }

    #[test]
    fn deterministic_and_restarts_no_worse() {
        let d = table(vec![
            vec![0.0, 1.0, 2.0, 3.0],
            vec![1.0, 0.0, 1.5, 2.0],
            vec![2.0, 1.5, 0.0, 1.0],
            vec![3.0, 2.0, 1.0, 0.0],
        ]);
        let a = mds_embed(&d, 9, MdsParams::default()).unwrap();
        assert_eq!(a, mds_embed(&d, 9, MdsParams::default()).unwrap());
        let best = mds_embed_restarts(&d, 9, MdsParams::default(), 6).unwrap();
        for r in 0..6 {
            assert!(best.stress <= mds_embed(&d, child_seed(9, r), MdsParams::default()).unwrap().stress);
        }
    }
}
