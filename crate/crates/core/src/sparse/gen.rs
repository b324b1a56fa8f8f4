use super::SymSparseMatrix;
use crate::error::{Result, SlrError};

/// Dimensions of a regular grid, ordered with `x` varying fastest.
/// A 2-D grid has `nz == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridShape {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl GridShape {
    pub fn new_2d(nx: usize, ny: usize) -> Self {
        Self { nx, ny, nz: 1 }
    }

    pub fn new_3d(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub fn coords(&self, v: usize) -> [usize; 3] {
        [v % self.nx, (v / self.nx) % self.ny, v / (self.nx * self.ny)]
    }
}

/// 5-point negative Laplacian on an `nx x ny` grid with Dirichlet
/// boundary, unscaled (diagonal `4 - shift`, off-diagonals `-1`).
pub fn gen_laplacian_2d(nx: usize, ny: usize, shift: f64) -> Result<SymSparseMatrix> {
    if nx == 0 || ny == 0 {
        return Err(SlrError::InvalidArgument(format!("empty grid {nx}x{ny}")));
    }
    stencil(GridShape::new_2d(nx, ny), 4.0 - shift)
}

/// 7-point negative Laplacian on an `nx x ny x nz` grid (diagonal `6 - shift`).
pub fn gen_laplacian_3d(nx: usize, ny: usize, nz: usize, shift: f64) -> Result<SymSparseMatrix> {
    if nx == 0 || ny == 0 || nz == 0 {
        return Err(SlrError::InvalidArgument(format!("empty grid {nx}x{ny}x{nz}")));
    }
    stencil(GridShape::new_3d(nx, ny, nz), 6.0 - shift)
}

fn stencil(g: GridShape, diag: f64) -> Result<SymSparseMatrix> {
    let n = g
        .nx
        .checked_mul(g.ny)
        .and_then(|v| v.checked_mul(g.nz))
        .ok_or_else(|| SlrError::InvalidArgument("grid size overflows".into()))?;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(4 * n);
    let mut values = Vec::with_capacity(4 * n);
    row_ptr.push(0);
    for v in 0..n {
        let [x, y, z] = g.coords(v);
        // lower neighbours in increasing column order
        if z > 0 {
            col_idx.push(v - g.nx * g.ny);
            values.push(-1.0);
        }
        if y > 0 {
            col_idx.push(v - g.nx);
            values.push(-1.0);
        }
        if x > 0 {
            col_idx.push(v - 1);
            values.push(-1.0);
        }
        col_idx.push(v);
        values.push(diag);
        row_ptr.push(col_idx.len());
    }
    SymSparseMatrix::from_lower_csr(n, row_ptr, col_idx, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    /// Independent dense assembly of the 5-point stencil.
    fn dense_5pt(nx: usize, ny: usize, shift: f64) -> DMatrix<f64> {
        let n = nx * ny;
        let mut a = DMatrix::zeros(n, n);
        for y in 0..ny {
            for x in 0..nx {
                let i = y * nx + x;
                a[(i, i)] = 4.0 - shift;
                let mut link = |j: usize| a[(i, j)] = -1.0;
                if x > 0 {
                    link(i - 1);
                }
                if x + 1 < nx {
                    link(i + 1);
                }
                if y > 0 {
                    link(i - nx);
                }
                if y + 1 < ny {
                    link(i + nx);
                }
            }
        }
        a
    }

    #[test]
    fn single_node() {
        assert_eq!(gen_laplacian_2d(1, 1, 0.0).unwrap().to_dense()[(0, 0)], 4.0);
        assert_eq!(gen_laplacian_3d(1, 1, 1, 0.0).unwrap().to_dense()[(0, 0)], 6.0);
    }

    #[test]
    fn one_dimensional_slices_are_tridiagonal() {
        let a = gen_laplacian_2d(3, 1, 0.0).unwrap().to_dense();
        let expect = DMatrix::from_row_slice(3, 3, &[4., -1., 0., -1., 4., -1., 0., -1., 4.]);
        assert_eq!(a, expect);
        let a = gen_laplacian_3d(3, 1, 1, 0.0).unwrap().to_dense();
        let expect = DMatrix::from_row_slice(3, 3, &[6., -1., 0., -1., 6., -1., 0., -1., 6.]);
        assert_eq!(a, expect);
    }

    #[test]
    fn column_one_matches_dense_assembly() {
        let a = gen_laplacian_2d(4, 4, 0.0).unwrap();
        let mut e1 = vec![0.0; 16];
        e1[0] = 1.0;
        let col = a.matvec(&e1).unwrap();
        let d = dense_5pt(4, 4, 0.0);
        for i in 0..16 {
            assert_eq!(col[i], d[(i, 0)]);
        }
        assert_eq!(a.to_dense(), d);
    }

    #[test]
    fn shift_is_subtracted_from_diagonal() {
        let a = gen_laplacian_2d(5, 3, 0.01).unwrap();
        assert_eq!(a.to_dense(), dense_5pt(5, 3, 0.01));
        let a = gen_laplacian_3d(2, 2, 2, 0.05).unwrap();
        assert!(a.diagonal().iter().all(|&d| d == 6.0 - 0.05));
    }

    #[test]
    fn spectrum_2d_32() {
        let a = gen_laplacian_2d(32, 32, 0.0).unwrap().to_dense();
        let eig = a.symmetric_eigenvalues();
        let min = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min > 0.0 && max < 8.0);
        let h = std::f64::consts::PI / 66.0;
        let analytic = 4.0 * 2.0 * h.sin().powi(2);
        assert!((min - analytic).abs() < 1e-10, "{min} vs {analytic}");
    }

    #[test]
    fn laplacian_3d_is_spd() {
        let a = gen_laplacian_3d(10, 10, 10, 0.0).unwrap().to_dense();
        assert!(a.cholesky().is_some());
    }

    #[test]
    fn empty_grid_is_rejected() {
        assert!(gen_laplacian_2d(0, 3, 0.0).is_err());
        assert!(gen_laplacian_3d(2, 0, 3, 0.0).is_err());
    }
}
