//! Symmetric sparse storage (lower triangle, compressed rows), a general
//! compressed-row block for off-diagonal couplings, model-problem generators
//! and Matrix Market I/O.

mod gen;
mod mm;

pub use gen::{gen_laplacian_2d, gen_laplacian_3d, GridShape};
pub use mm::{parse_matrix_market, read_matrix_market, write_matrix_market, write_matrix_market_to};

use nalgebra::DMatrix;

use crate::error::{check_len, Result, SlrError};

/// Symmetric matrix storing the lower triangle (diagonal included) in
/// compressed sparse rows. Column indices are strictly increasing in every
/// row and never exceed the row index.
#[derive(Debug, Clone, PartialEq)]
pub struct SymSparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SymSparseMatrix {
    /// Builds from raw lower-triangular CSR arrays, validating the layout.
    pub fn from_lower_csr(
        n: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        check_len(n + 1, row_ptr.len())?;
        check_len(col_idx.len(), values.len())?;
        if row_ptr[0] != 0 || row_ptr[n] != col_idx.len() {
            return Err(SlrError::InvalidStructure("row_ptr bounds".into()));
        }
        for i in 0..n {
            let (lo, hi) = (row_ptr[i], row_ptr[i + 1]);
            if lo > hi {
                return Err(SlrError::InvalidStructure(format!("row_ptr decreases at row {i}")));
            }
            let cols = &col_idx[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(SlrError::InvalidStructure(format!(
                    "columns of row {i} not strictly increasing"
                )));
            }
            if cols.last().is_some_and(|&c| c > i) {
                return Err(SlrError::InvalidStructure(format!(
                    "row {i} has an entry above the diagonal"
                )));
            }
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Assembles from `(row, col, value)` triplets in either triangle.
    /// Upper entries are mirrored into the lower triangle and repeated
    /// coordinates are summed.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut t: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SlrError::InvalidArgument(format!(
                    "entry ({i},{j}) outside a {n}x{n} matrix"
                )));
            }
            let (r, c) = if i >= j { (i, j) } else { (j, i) };
            t.push((r, c, v));
        }
        t.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diagonal(&vec![1.0; n])
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored (lower triangle) entry count.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Entry count of the full symmetric matrix.
    pub fn nnz_full(&self) -> usize {
        let diag = (0..self.n)
            .filter(|&i| self.row(i).0.last() == Some(&i))
            .count();
        2 * self.nnz() - diag
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of the stored part of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// Logical entry `A[i][j]` of the symmetric matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).map_or(0.0, |k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x` with the stored lower triangle mirrored on the fly.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, x.len())?;
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        Ok(y)
    }

    /// Overwrites `y` with `A x`. Panics on length mismatch.
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        y.fill(0.0);
        for i in 0..self.n {
            let xi = x[i];
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let v = self.values[k];
                acc += v * x[j];
                if j != i {
                    y[j] += v * xi;
                }
            }
            y[i] += acc;
        }
    }

    /// Symmetric permutation `P A P^T`, where `perm[new] = old`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        check_len(self.n, perm.len())?;
        let inv = inverse_permutation(perm)?;
        let mut t = Vec::with_capacity(self.nnz());
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                t.push((inv[i], inv[j], v));
            }
        }
        Self::from_triplets(self.n, t)
    }

    /// Principal submatrix on `rows`, in the order given.
    pub fn principal_submatrix(&self, rows: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.n];
        for (new, &old) in rows.iter().enumerate() {
            if old >= self.n || pos[old] != usize::MAX {
                return Err(SlrError::InvalidArgument(format!(
                    "bad or repeated row index {old}"
                )));
            }
            pos[old] = new;
        }
        let mut t = Vec::new();
        for &old in rows {
            let (cols, vals) = self.row(old);
            for (&j, &v) in cols.iter().zip(vals) {
                if pos[j] != usize::MAX {
                    t.push((pos[old], pos[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), t)
    }

    /// Adjacency structure of the full symmetric pattern without the
    /// diagonal, as `(xadj, adjncy)` with neighbours sorted ascending.
    pub fn adjacency(&self) -> (Vec<usize>, Vec<usize>) {
        let n = self.n;
        let mut deg = vec![0usize; n];
        for i in 0..n {
            for &j in self.row(i).0 {
                if j != i {
                    deg[i] += 1;
                    deg[j] += 1;
                }
            }
        }
        let mut xadj = vec![0usize; n + 1];
        for i in 0..n {
            xadj[i + 1] = xadj[i] + deg[i];
        }
        let mut fill = xadj.clone();
        let mut adj = vec![0usize; xadj[n]];
        // Row-major traversal of the lower triangle: the mirrored (upper)
        // neighbours j > i arrive after all lower neighbours, in order.
        for i in 0..n {
            for &j in self.row(i).0 {
                if j != i {
                    adj[fill[i]] = j;
                    fill[i] += 1;
                }
            }
            for &j in self.row(i).0 {
                if j != i {
                    adj[fill[j]] = i;
                    fill[j] += 1;
                }
            }
        }
        for i in 0..n {
            adj[xadj[i]..xadj[i + 1]].sort_unstable();
        }
        (xadj, adj)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        d
    }

    /// Largest row sum of absolute values (the infinity norm).
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                sums[i] += v.abs();
                if j != i {
                    sums[j] += v.abs();
                }
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }
}

/// `inv[old] = new` for a permutation given as `perm[new] = old`.
pub fn inverse_permutation(perm: &[usize]) -> Result<Vec<usize>> {
    let n = perm.len();
    let mut inv = vec![usize::MAX; n];
    for (new, &old) in perm.iter().enumerate() {
        if old >= n || inv[old] != usize::MAX {
            return Err(SlrError::InvalidArgument(format!(
                "not a permutation: index {old} at position {new}"
            )));
        }
        inv[old] = new;
    }
    Ok(inv)
}

/// General (rectangular) compressed-row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBlock {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseBlock {
    /// Builds from triplets; repeated coordinates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut t: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if let Some(&(i, j, _)) = t.iter().find(|&&(i, j, _)| i >= nrows || j >= ncols) {
            return Err(SlrError::InvalidArgument(format!(
                "entry ({i},{j}) outside a {nrows}x{ncols} block"
            )));
        }
        t.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last = None;
        for (i, j, v) in t {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_ptr[i + 1] += 1;
                col_idx.push(j);
                values.push(v);
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            row_ptr: vec![0; nrows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    /// `y[r - rows.start] = (self x)[r]` for `r` in `rows`.
    pub fn mul_rows_into(&self, rows: std::ops::Range<usize>, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), rows.len());
        for (yi, r) in y.iter_mut().zip(rows) {
            let (cols, vals) = self.row(r);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    /// `y += (rows of self)^T x`, with `x` indexed relative to `rows.start`.
    pub fn mul_transpose_rows_add(&self, rows: std::ops::Range<usize>, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.ncols);
        debug_assert_eq!(x.len(), rows.len());
        for (&xi, r) in x.iter().zip(rows) {
            if xi == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&j, &v) in cols.iter().zip(vals) {
                y[j] += v * xi;
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_rows_into(0..self.nrows, x, &mut y);
        y
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.mul_transpose_rows_add(0..self.nrows, x, &mut y);
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }
}
