//! Dense vector kernels and the tall column-major matrix used for Ritz bases.
//!
//! All reductions run left to right in a fixed order so repeated runs give
//! bit-identical results.

use crate::error::{check_len, Result, SlrError};

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// An `nrows x ncols` matrix stored column by column, with `ncols <= nrows`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTallMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseTallMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Result<Self> {
        if ncols > nrows {
            return Err(SlrError::InvalidArgument(format!(
                "tall matrix needs ncols <= nrows, got {nrows}x{ncols}"
            )));
        }
        Ok(Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        })
    }

    /// An empty basis with room for vectors of length `nrows`.
    pub fn empty(nrows: usize) -> Self {
        Self {
            nrows,
            ncols: 0,
            data: Vec::new(),
        }
    }

    pub fn from_columns(nrows: usize, columns: &[Vec<f64>]) -> Result<Self> {
        let mut m = Self::empty(nrows);
        for c in columns {
            m.push_column(c)?;
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on a zero chunk size
        self.data.chunks(self.nrows.max(1)).take(self.ncols)
    }

    pub fn push_column(&mut self, c: &[f64]) -> Result<()> {
        check_len(self.nrows, c.len())?;
        if self.ncols == self.nrows {
            return Err(SlrError::InvalidArgument(
                "tall matrix cannot have more columns than rows".into(),
            ));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(SlrError::InvalidArgument("non-finite column entry".into()));
        }
        self.data.extend_from_slice(c);
        self.ncols += 1;
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    /// `y = self * x`
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for (c, &xj) in self.columns().zip(x) {
            axpy(xj, c, &mut y);
        }
        y
    }

    /// `self^T * x`
    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        self.columns().map(|c| dot(c, x)).collect()
    }

    /// Frobenius norm of `self^T self - I`.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.ncols {
            for j in 0..self.ncols {
                let g = dot(self.col(i), self.col(j)) - if i == j { 1.0 } else { 0.0 };
                acc += g * g;
            }
        }
        acc.sqrt()
    }
}
