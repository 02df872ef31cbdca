use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{MticaError, Result};

/// `N` samples by `p` channels of real observations. Each row is one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    /// Wraps a matrix whose rows are samples. Rejects empty or non-finite input.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(MticaError::EmptyData);
        }
        for col in 0..values.ncols() {
            for row in 0..values.nrows() {
                if !values[(row, col)].is_finite() {
                    return Err(MticaError::NonFinite { row, col });
                }
            }
        }
        Ok(Self { values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map(Vec::len).ok_or(MticaError::EmptyData)?;
        for row in rows {
            if row.len() != p {
                return Err(MticaError::DimensionMismatch {
                    expected: p,
                    got: row.len(),
                });
            }
        }
        Self::new(DMatrix::from_fn(rows.len(), p, |i, j| rows[i][j]))
    }

    /// Sample count `N`.
    pub fn n_samples(&self) -> usize {
        self.values.nrows()
    }

    /// Channel count `p`.
    pub fn n_channels(&self) -> usize {
        self.values.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.values
    }

    pub fn sample(&self, n: usize) -> DVector<f64> {
        self.values.row(n).transpose()
    }

    /// Per-channel sample mean.
    pub fn mean(&self) -> DVector<f64> {
        self.values.row_mean().transpose()
    }

    /// Subtracts the sample mean from every row.
    pub fn centered(&self) -> (DataMatrix, DVector<f64>) {
        let mean = self.mean();
        let row: RowDVector<f64> = mean.transpose();
        let mut values = self.values.clone();
        for mut r in values.row_iter_mut() {
            r -= &row;
        }
        (DataMatrix { values }, mean)
    }

    /// Applies `x -> M x` to every sample, i.e. returns `X Mᵀ` in row layout.
    pub fn transform(&self, m: &DMatrix<f64>) -> Result<DataMatrix> {
        if m.ncols() != self.n_channels() {
            return Err(MticaError::DimensionMismatch {
                expected: self.n_channels(),
                got: m.ncols(),
            });
        }
        Ok(DataMatrix {
            values: &self.values * m.transpose(),
        })
    }
}

/// Covariance with `1/N` normalization, computed around the sample mean.
pub(crate) fn covariance(data: &DataMatrix) -> DMatrix<f64> {
    let (centered, _) = data.centered();
    let x = centered.as_matrix();
    let mut cov = x.transpose() * x / data.n_samples() as f64;
    symmetrize(&mut cov);
    cov
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}
