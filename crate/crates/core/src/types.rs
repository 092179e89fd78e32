//! Shared numeric domain types and the stable softmax.
//!
//! Matrices are dense and row-major, and always carry their row and column
//! counts explicitly. Every type validates its invariants on construction and
//! is immutable afterwards.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{argmax, compensated_sum, Real};

/// Dense row-major matrix with explicit dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<R> {
    rows: usize,
    cols: usize,
    values: Vec<R>,
}

impl<R: Real> Matrix<R> {
    pub fn new(rows: usize, cols: usize, values: Vec<R>) -> Result<Self> {
        if rows.checked_mul(cols) != Some(values.len()) {
            return Err(Error::ShapeError(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows.saturating_mul(cols),
                values.len()
            )));
        }
        Ok(Self { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
            return Err(Error::ShapeError(format!(
                "row {bad} has {} columns, expected {cols}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![R::zero(); rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[R] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [R] {
        &mut self.values[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl ExactSizeIterator<Item = &[R]> + '_ {
        // chunks_exact panics on a zero chunk size
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn get(&self, row: usize, col: usize) -> R {
        self.values[row * self.cols + col]
    }

    pub fn as_slice(&self) -> &[R] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<R> {
        self.values
    }

    /// Elementwise map, keeping the shape.
    pub fn map(&self, f: impl Fn(R) -> R) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    fn first_non_finite(&self) -> Option<usize> {
        self.values.iter().position(|v| !v.is_finite())
    }
}

/// Column-wise arithmetic mean of a matrix with at least one row.
///
/// This is the conventional classifier's pre-softmax output when applied to
/// sub-patch logits.
pub fn mean_over_rows<R: Real>(matrix: &Matrix<R>) -> Result<Vec<R>> {
    if matrix.rows() == 0 || matrix.cols() == 0 {
        return Err(Error::EmptyInput);
    }
    // Shifted by the first row: identical rows give that row back exactly.
    let n = R::of_usize(matrix.rows());
    let first = matrix.row(0);
    Ok((0..matrix.cols())
        .map(|k| first[k] + compensated_sum(matrix.iter_rows().map(|r| r[k] - first[k])) / n)
        .collect())
}

macro_rules! matrix_newtype_accessors {
    ($name:ident) => {
        impl<R: Real> $name<R> {
            pub fn matrix(&self) -> &Matrix<R> {
                &self.0
            }

            pub fn into_matrix(self) -> Matrix<R> {
                self.0
            }

            pub fn rows(&self) -> usize {
                self.0.rows()
            }

            pub fn classes(&self) -> usize {
                self.0.cols()
            }

            pub fn row(&self, i: usize) -> &[R] {
                self.0.row(i)
            }

            /// Column-wise mean of the rows.
            pub fn mean_logits(&self) -> Vec<R> {
                mean_over_rows(&self.0).expect("validated non-empty")
            }
        }
    };
}

/// Sub-patch logits: `T ≥ 1` rows, `K ≥ 2` class columns, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitMatrix<R = f64>(Matrix<R>);

impl<R: Real> LogitMatrix<R> {
    pub fn new(matrix: Matrix<R>) -> Result<Self> {
        if matrix.rows() < 1 {
            return Err(Error::EmptyInput);
        }
        if matrix.cols() < 2 {
            return Err(Error::ShapeError(format!(
                "need at least 2 classes, got {}",
                matrix.cols()
            )));
        }
        if let Some(index) = matrix.first_non_finite() {
            return Err(Error::InvalidLogits { index });
        }
        Ok(Self(matrix))
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }
}

matrix_newtype_accessors!(LogitMatrix);

/// Window-averaged logits produced by [`crate::smoothing::pool_logits`].
#[derive(Debug, Clone, PartialEq)]
pub struct PooledLogits<R = f64>(Matrix<R>);

impl<R: Real> PooledLogits<R> {
    pub fn new(matrix: Matrix<R>) -> Result<Self> {
        if matrix.rows() < 1 || matrix.cols() < 1 {
            return Err(Error::EmptyInput);
        }
        if let Some(index) = matrix.first_non_finite() {
            return Err(Error::InvalidLogits { index });
        }
        Ok(Self(matrix))
    }
}

matrix_newtype_accessors!(PooledLogits);

/// Per-member logits of an ensemble: `M ≥ 2` rows, `K ≥ 2` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleLogits<R = f64>(Matrix<R>);

impl<R: Real> EnsembleLogits<R> {
    pub fn new(matrix: Matrix<R>) -> Result<Self> {
        if matrix.rows() < 2 {
            return Err(Error::InsufficientMembers {
                members: matrix.rows(),
            });
        }
        if matrix.cols() < 2 {
            return Err(Error::ShapeError(format!(
                "need at least 2 classes, got {}",
                matrix.cols()
            )));
        }
        if let Some(index) = matrix.first_non_finite() {
            return Err(Error::InvalidLogits { index });
        }
        Ok(Self(matrix))
    }

    pub fn from_rows(rows: &[Vec<R>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    pub fn members(&self) -> usize {
        self.0.rows()
    }
}

matrix_newtype_accessors!(EnsembleLogits);

/// A probability distribution over `K ≥ 2` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector<R = f64>(Vec<R>);

impl<R: Real> ProbVector<R> {
    /// Validates entries in `[0, 1]` summing to one within `R::SUM_TOLERANCE`.
    pub fn new(p: Vec<R>) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::InvalidProbabilities(format!(
                "need at least 2 classes, got {}",
                p.len()
            )));
        }
        if let Some(i) = p.iter().position(|&x| !(x >= R::zero() && x <= R::one())) {
            return Err(Error::InvalidProbabilities(format!(
                "entry {i} = {} is outside [0, 1]",
                p[i]
            )));
        }
        let total = compensated_sum(p.iter().copied()).to_f64_lossy();
        if (total - 1.0).abs() > R::SUM_TOLERANCE {
            return Err(Error::InvalidProbabilities(format!("sum is {total}")));
        }
        Ok(Self(p))
    }

    pub fn uniform(classes: usize) -> Result<Self> {
        Self::new(vec![R::one() / R::of_usize(classes); classes])
    }

    pub fn as_slice(&self) -> &[R] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<R> {
        self.0
    }

    pub fn classes(&self) -> usize {
        self.0.len()
    }

    /// Most likely class, lowest index on ties.
    pub fn argmax(&self) -> usize {
        argmax(&self.0).expect("non-empty")
    }

    /// Probability of the most likely class.
    pub fn confidence(&self) -> R {
        self.0[self.argmax()]
    }
}

impl<R> std::ops::Index<usize> for ProbVector<R> {
    type Output = R;

    fn index(&self, i: usize) -> &R {
        &self.0[i]
    }
}

/// Numerically stable softmax: `exp(z_k − max z) / Σ_j exp(z_j − max z)`.
pub fn softmax<R: Real>(logits: &[R]) -> Result<ProbVector<R>> {
    if let Some(index) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidLogits { index });
    }
    if logits.len() < 2 {
        return Err(Error::ShapeError(format!(
            "softmax needs at least 2 classes, got {}",
            logits.len()
        )));
    }
    let max = logits.iter().copied().fold(R::neg_infinity(), R::max);
    let exps: Vec<R> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total = compensated_sum(exps.iter().copied());
    Ok(ProbVector(exps.into_iter().map(|e| e / total).collect()))
}

/// Softmax of `logits / temperature` for a positive temperature.
pub(crate) fn tempered_softmax<R: Real>(logits: &[R], temperature: R) -> Result<ProbVector<R>> {
    if let Some(index) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::InvalidLogits { index });
    }
    let max = logits.iter().copied().fold(R::neg_infinity(), R::max);
    // Dividing the shifted logits keeps the maximum at exactly zero.
    let shifted: Vec<R> = logits.iter().map(|&z| (z - max) / temperature).collect();
    softmax(&shifted)
}

/// Per-class σ_k, their mean σ̄, and the floored temperature σ̃ ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaStats<R = f64> {
    pub per_class: Vec<R>,
    pub sigma_bar: R,
    pub sigma_tilde: R,
}

/// How the additive shift β of the temperature is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum BetaPolicy<R = f64> {
    /// β is given directly.
    Fixed(R),
    /// β = mean of validation σ̄ + offset.
    MeanOffset(R),
    /// β = −(q-th percentile of validation σ̄), q ∈ (0, 100).
    NegPercentile(R),
}

impl<R: Real> BetaPolicy<R> {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BetaPolicy::Fixed(v) | BetaPolicy::MeanOffset(v) if !v.is_finite() => Err(
                Error::ConfigError(format!("beta parameter {v} is not finite")),
            ),
            BetaPolicy::NegPercentile(q) if !(q > R::zero() && q < R::of(100.0)) => Err(
                Error::ConfigError(format!("percentile {q} is outside (0, 100)")),
            ),
            _ => Ok(()),
        }
    }
}

/// Hyperparameters of variance-based smoothing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig<R = f64> {
    pub alpha: R,
    pub beta_policy: BetaPolicy<R>,
    pub pool_kernel: usize,
    pub pool_stride: usize,
}

impl<R: Real> SmoothingConfig<R> {
    pub fn new(
        alpha: R,
        beta_policy: BetaPolicy<R>,
        pool_kernel: usize,
        pool_stride: usize,
    ) -> Result<Self> {
        let config = Self {
            alpha,
            beta_policy,
            pool_kernel,
            pool_stride,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > R::zero() && self.alpha.is_finite()) {
            return Err(Error::ConfigError(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if self.pool_kernel < 1 || self.pool_stride < 1 {
            return Err(Error::ConfigError(format!(
                "pooling kernel and stride must be at least 1, got {} and {}",
                self.pool_kernel, self.pool_stride
            )));
        }
        self.beta_policy.validate()
    }
}
