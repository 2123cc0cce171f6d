//! Utility matrices and instance provenance.
//!
//! A [`UtilityMatrix`] is an `n x m` nonnegative row-stochastic matrix with
//! `m >= n >= 2`: entry `(i, j)` is agent `i`'s utility for good `j`, and every
//! agent's utility for the full bundle is normalized to one.

use std::fmt;

use thiserror::Error;

use crate::generators::{CharacteristicKind, IidDistribution};

/// Tolerance on row sums accepted by [`UtilityMatrix::validate`].
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("bad dimensions {0}x{1}: need m >= n >= 2")]
    BadDimensions(usize, usize),
    #[error("row {row} has {len} entries, expected {expected}")]
    RaggedRow { row: usize, len: usize, expected: usize },
    #[error("entry ({0}, {1}) is negative")]
    NegativeEntry(usize, usize),
    #[error("entry ({0}, {1}) is not finite")]
    NonFiniteEntry(usize, usize),
    #[error("row {0} sums to {1}, not 1")]
    RowSumViolation(usize, f64),
    #[error("row {0} sums to zero")]
    ZeroRow(usize),
}

/// An allocation instance: `n` agents, `m` goods, additive normalized utilities.
///
/// Entries are stored row-major. Values are immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityMatrix {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl UtilityMatrix {
    /// Checks the instance invariants on a raw array of rows.
    ///
    /// Rows whose sum is within [`ROW_SUM_TOLERANCE`] of one, but further from
    /// it than summation roundoff, are divided by their sum.
    pub fn validate(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let (n, m) = shape_of(rows)?;
        check_entries(rows)?;
        let mut data = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
                return Err(MatrixError::RowSumViolation(i, sum));
            }
            // Rows already one within summation roundoff are kept bit for bit,
            // which makes validation idempotent.
            if (sum - 1.0).abs() <= 4.0 * m as f64 * f64::EPSILON {
                data.extend_from_slice(row);
            } else {
                data.extend(row.iter().map(|x| x / sum));
            }
        }
        Ok(Self { n, m, data })
    }

    /// Divides each row by its sum.
    pub fn normalize_rows(rows: &[Vec<f64>]) -> Result<Self, MatrixError> {
        let (n, m) = shape_of(rows)?;
        check_entries(rows)?;
        let mut data = Vec::with_capacity(n * m);
        for (i, row) in rows.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                return Err(MatrixError::ZeroRow(i));
            }
            data.extend(row.iter().map(|x| x / sum));
        }
        // A division can leave the sum one ulp away from 1; validate tightens it.
        Self::validate(&to_rows(n, m, &data))
    }

    /// Builds a matrix from row-major data, validating it.
    pub fn from_row_major(n: usize, m: usize, data: Vec<f64>) -> Result<Self, MatrixError> {
        if data.len() != n * m {
            return Err(MatrixError::BadDimensions(n, m));
        }
        Self::validate(&to_rows(n, m, &data))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    /// Agent `i`'s utility vector.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.m)
    }

    /// Good `j`'s column (utilities from every agent).
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.m];
        for row in self.rows() {
            for (s, x) in sums.iter_mut().zip(row) {
                *s += x;
            }
        }
        sums
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        to_rows(self.n, self.m, &self.data)
    }

    /// Returns the matrix with rows reordered by `agents` and columns by `goods`:
    /// new entry `(i, j)` is old entry `(agents[i], goods[j])`.
    pub fn permuted(&self, agents: &[usize], goods: &[usize]) -> Self {
        assert_eq!(agents.len(), self.n);
        assert_eq!(goods.len(), self.m);
        let mut data = Vec::with_capacity(self.data.len());
        for &i in agents {
            for &j in goods {
                data.push(self.get(i, j));
            }
        }
        Self {
            n: self.n,
            m: self.m,
            data,
        }
    }

    /// Appends `extra` goods nobody values.
    pub fn with_zero_columns(&self, extra: usize) -> Self {
        let m = self.m + extra;
        let mut data = Vec::with_capacity(self.n * m);
        for row in self.rows() {
            data.extend_from_slice(row);
            data.extend(std::iter::repeat_n(0.0, extra));
        }
        Self { n: self.n, m, data }
    }

    /// Entrywise convex combination `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &Self, t: f64) -> Self {
        assert_eq!((self.n, self.m), (other.n, other.m));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (1.0 - t) * a + t * b)
            .collect::<Vec<_>>();
        Self::from_row_major(self.n, self.m, data).expect("convex combination stays stochastic")
    }
}

impl fmt::Display for UtilityMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:.4}")).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

fn shape_of(rows: &[Vec<f64>]) -> Result<(usize, usize), MatrixError> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != m {
            return Err(MatrixError::RaggedRow {
                row: i,
                len: row.len(),
                expected: m,
            });
        }
    }
    if n < 2 || m < n {
        return Err(MatrixError::BadDimensions(n, m));
    }
    Ok((n, m))
}

fn check_entries(rows: &[Vec<f64>]) -> Result<(), MatrixError> {
    for (i, row) in rows.iter().enumerate() {
        for (j, &x) in row.iter().enumerate() {
            if !x.is_finite() {
                return Err(MatrixError::NonFiniteEntry(i, j));
            }
            if x < 0.0 {
                return Err(MatrixError::NegativeEntry(i, j));
            }
        }
    }
    Ok(())
}

fn to_rows(n: usize, m: usize, data: &[f64]) -> Vec<Vec<f64>> {
    (0..n).map(|i| data[i * m..(i + 1) * m].to_vec()).collect()
}

/// Where an instance came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Characteristic(CharacteristicKind),
    Iid(IidDistribution),
    Attributes { d: usize },
    Resampling { p: f64, phi: f64 },
    Ingested { name: String },
}

impl Source {
    /// Short category name, used for legends and categorical coloring.
    pub fn category(&self) -> String {
        match self {
            Source::Characteristic(kind) => kind.name().to_string(),
            Source::Iid(IidDistribution::Uniform) => "iid-uniform".into(),
            Source::Iid(IidDistribution::Exponential) => "iid-exponential".into(),
            Source::Attributes { .. } => "attributes".into(),
            Source::Resampling { .. } => "resampling".into(),
            Source::Ingested { name } => name.clone(),
        }
    }

    pub fn is_characteristic(&self) -> bool {
        matches!(self, Source::Characteristic(_))
    }

    fn check(&self) -> Result<(), String> {
        match *self {
            Source::Attributes { d: 0 } => Err("attribute count must be >= 1".into()),
            Source::Resampling { p, phi } if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&phi) => {
                Err(format!("resampling parameters out of range: p={p}, phi={phi}"))
            }
            _ => Ok(()),
        }
    }
}

/// A utility matrix with its label and provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub label: String,
    pub matrix: UtilityMatrix,
    pub source: Source,
    pub seed: Option<u64>,
}

impl InstanceRecord {
    /// Panics if the source parameters are out of range; generator code only
    /// builds records from checked parameters. Use [`InstanceRecord::try_new`]
    /// on external input.
    pub fn new(label: impl Into<String>, matrix: UtilityMatrix, source: Source, seed: Option<u64>) -> Self {
        Self::try_new(label, matrix, source, seed).expect("source parameters in range")
    }

    pub fn try_new(
        label: impl Into<String>,
        matrix: UtilityMatrix,
        source: Source,
        seed: Option<u64>,
    ) -> Result<Self, String> {
        source.check()?;
        Ok(Self {
            label: label.into(),
            matrix,
            source,
            seed,
        })
    }
}
