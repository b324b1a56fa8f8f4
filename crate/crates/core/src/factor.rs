//! Threshold-dropping incomplete factorizations of symmetric matrices.
//!
//! Both kinds are computed row by row in `L D L^T` form on a fill-reducing
//! symmetric permutation of the input. For the incomplete Cholesky kind the
//! pivots are positive and the Cholesky factor is `L D^{1/2}`.
//!
//! Dropping is dual-threshold: an entry of row `i` whose scaled magnitude
//! `|l_ij| sqrt(|d_j|)` falls below `droptol * ||a_i||_2` is discarded during
//! elimination, then at most `max_row_fill` of the survivors (largest first)
//! are kept. The pivot is accumulated from the kept entries only, so the
//! diagonal of `L D L^T` always reproduces the diagonal of the input.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{check_len, Result, SlrError};
use crate::sparse::SymSparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Incomplete Cholesky with threshold dropping; pivots must stay positive.
    Ict,
    /// Incomplete `L D L^T` with threshold dropping; pivots of either sign.
    Ildlt,
}

/// What to do when a pivot is unusable (nonpositive for ICT, zero for ILDLT).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BreakdownPolicy {
    /// Replace the pivot by `max(droptol, sqrt(eps)) * ||a_i||`, keeping its
    /// sign, and count the event.
    Perturb,
    /// Stop and report the row.
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorOptions {
    pub droptol: f64,
    /// Largest number of off-diagonal entries kept per row of `L`.
    pub max_row_fill: usize,
    pub breakdown: BreakdownPolicy,
    /// Apply the minimum-degree ordering before factoring.
    pub reorder: bool,
}

impl FactorOptions {
    /// Complete factorization: no dropping, no fill cap.
    pub fn exact() -> Self {
        Self {
            droptol: 0.0,
            max_row_fill: usize::MAX,
            breakdown: BreakdownPolicy::Fail,
            reorder: true,
        }
    }

    pub fn with_droptol(droptol: f64) -> Self {
        Self {
            droptol,
            max_row_fill: usize::MAX,
            breakdown: BreakdownPolicy::Perturb,
            reorder: true,
        }
    }
}

impl Default for FactorOptions {
    fn default() -> Self {
        Self::with_droptol(1e-3)
    }
}

#[derive(Debug, Clone)]
pub struct IncompleteFactor {
    kind: FactorKind,
    n: usize,
    /// `perm[new] = old`
    perm: Vec<usize>,
    /// Strictly lower part of the unit factor, compressed rows.
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
    pivots: Vec<f64>,
    droptol: f64,
    perturbations: usize,
}

/// Approximate-minimum-degree ordering of the symmetric pattern of `a`,
/// returned as `perm[new] = old`.
pub fn fill_reducing_order(a: &SymSparseMatrix) -> Vec<usize> {
    let n = a.n();
    if n == 0 {
        return Vec::new();
    }
    let (xadj, adj) = a.adjacency();
    // AMD reads the pattern column-wise; a symmetric pattern is its own
    // transpose, so the adjacency lists serve as CSC. The diagonal is added
    // because amd asserts nnz >= n.
    let mut ap = Vec::with_capacity(n + 1);
    let mut ai = Vec::with_capacity(adj.len() + n);
    ap.push(0);
    for v in 0..n {
        let nbrs = &adj[xadj[v]..xadj[v + 1]];
        let split = nbrs.partition_point(|&u| u < v);
        ai.extend_from_slice(&nbrs[..split]);
        ai.push(v);
        ai.extend_from_slice(&nbrs[split..]);
        ap.push(ai.len());
    }
    match amd::order(n, &ap, &ai, &amd::Control::default()) {
        Ok((p, _, _)) => p,
        // only reachable for malformed input, which adjacency() never builds
        Err(_) => (0..n).collect(),
    }
}

pub fn ict_factor(a: &SymSparseMatrix, opts: &FactorOptions) -> Result<IncompleteFactor> {
    factorize(a, FactorKind::Ict, opts)
}

pub fn ildlt_factor(a: &SymSparseMatrix, opts: &FactorOptions) -> Result<IncompleteFactor> {
    factorize(a, FactorKind::Ildlt, opts)
}

pub fn factorize(
    a: &SymSparseMatrix,
    kind: FactorKind,
    opts: &FactorOptions,
) -> Result<IncompleteFactor> {
    if !(opts.droptol >= 0.0) {
        return Err(SlrError::InvalidArgument(format!(
            "droptol must be nonnegative, got {}",
            opts.droptol
        )));
    }
    let n = a.n();
    if n >= u32::MAX as usize {
        return Err(SlrError::InvalidArgument("matrix too large for factor indices".into()));
    }
    let perm: Vec<usize> = if opts.reorder {
        fill_reducing_order(a)
    } else {
        (0..n).collect()
    };
    let ap = if opts.reorder { a.permute(&perm)? } else { a.clone() };

    // 2-norms of the full symmetric rows
    let mut rownorm = vec![0.0f64; n];
    for i in 0..n {
        let (cols, vals) = ap.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            rownorm[i] += v * v;
            if j != i {
                rownorm[j] += v * v;
            }
        }
    }
    for r in rownorm.iter_mut() {
        *r = r.sqrt();
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    row_ptr.push(0usize);
    let mut col_idx: Vec<u32> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    // Column access to the rows finished so far: singly linked lists in
    // row order through the entries of L.
    let mut entry_row: Vec<u32> = Vec::new();
    let mut next: Vec<u32> = Vec::new();
    let mut col_head = vec![u32::MAX; n];
    let mut col_tail = vec![u32::MAX; n];
    let mut pivots = vec![0.0f64; n];

    let mut w = vec![0.0f64; n];
    let mut stamp = vec![usize::MAX; n];
    let mut heap: BinaryHeap<Reverse<usize>> = BinaryHeap::new();
    let mut kept: Vec<(usize, f64)> = Vec::new();
    let mut perturbations = 0usize;
    let guard = opts.droptol.max(f64::EPSILON.sqrt());

    for i in 0..n {
        let (cols, vals) = ap.row(i);
        let mut diag = 0.0;
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag = v;
            } else {
                w[j] = v;
                stamp[j] = i;
                heap.push(Reverse(j));
            }
        }
        let tau = opts.droptol * rownorm[i];
        kept.clear();
        while let Some(Reverse(j)) = heap.pop() {
            let dj = pivots[j];
            let lij = w[j] / dj;
            if !(lij.abs() * dj.abs().sqrt() >= tau) || lij == 0.0 {
                continue;
            }
            kept.push((j, lij));
            let scale = lij * dj;
            let mut e = col_head[j];
            while e != u32::MAX {
                let k = entry_row[e as usize] as usize;
                if stamp[k] != i {
                    stamp[k] = i;
                    w[k] = 0.0;
                    heap.push(Reverse(k));
                }
                w[k] -= scale * values[e as usize];
                e = next[e as usize];
            }
        }
        if kept.len() > opts.max_row_fill {
            let by_size = |x: &(usize, f64)| x.1.abs() * pivots[x.0].abs().sqrt();
            kept.select_nth_unstable_by(opts.max_row_fill, |x, y| by_size(y).total_cmp(&by_size(x)));
            kept.truncate(opts.max_row_fill);
            kept.sort_unstable_by_key(|x| x.0);
        }
        for &(j, lij) in &kept {
            diag -= lij * lij * pivots[j];
        }

        let bad = match kind {
            FactorKind::Ict => !(diag > 0.0),
            FactorKind::Ildlt => !(diag.abs() > f64::EPSILON * rownorm[i]) || !diag.is_finite(),
        };
        if bad {
            match opts.breakdown {
                BreakdownPolicy::Fail => {
                    return Err(SlrError::Breakdown {
                        row: perm[i],
                        pivot: diag,
                    })
                }
                BreakdownPolicy::Perturb => {
                    let mag = guard * rownorm[i].max(f64::MIN_POSITIVE);
                    diag = match kind {
                        FactorKind::Ict => mag,
                        FactorKind::Ildlt if diag < 0.0 => -mag,
                        FactorKind::Ildlt => mag,
                    };
                    perturbations += 1;
                }
            }
        }
        pivots[i] = diag;

        for &(j, lij) in &kept {
            let e = values.len() as u32;
            col_idx.push(j as u32);
            values.push(lij);
            entry_row.push(i as u32);
            next.push(u32::MAX);
            if col_head[j] == u32::MAX {
                col_head[j] = e;
            } else {
                next[col_tail[j] as usize] = e;
            }
            col_tail[j] = e;
        }
        row_ptr.push(values.len());
    }

    Ok(IncompleteFactor {
        kind,
        n,
        perm,
        row_ptr,
        col_idx,
        values,
        pivots,
        droptol: opts.droptol,
        perturbations,
    })
}

impl IncompleteFactor {
    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    pub fn droptol(&self) -> f64 {
        self.droptol
    }

    /// Number of pivots replaced under [`BreakdownPolicy::Perturb`].
    pub fn perturbations(&self) -> usize {
        self.perturbations
    }

    /// Stored entries: the strictly lower part plus the diagonal.
    pub fn nnz(&self) -> usize {
        self.values.len() + self.n
    }

    /// `nnz(factor) / nnz(lower(A))`
    pub fn fill_ratio(&self, a: &SymSparseMatrix) -> f64 {
        self.nnz() as f64 / a.nnz().max(1) as f64
    }

    fn forward(&self, y: &mut [f64]) {
        for i in 0..self.n {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            let mut acc = y[i];
            for (&j, &v) in self.col_idx[r.clone()].iter().zip(&self.values[r]) {
                acc -= v * y[j as usize];
            }
            y[i] = acc;
        }
    }

    fn backward(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            let yi = y[i];
            if yi == 0.0 {
                continue;
            }
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            for (&j, &v) in self.col_idx[r.clone()].iter().zip(&self.values[r]) {
                y[j as usize] -= v * yi;
            }
        }
    }

    /// `x = (P^T L D L^T P)^{-1} b`
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, b.len())?;
        let mut x = vec![0.0; self.n];
        let mut work = vec![0.0; self.n];
        self.solve_into(b, &mut x, &mut work);
        Ok(x)
    }

    /// Allocation-free solve; `work` must have length `n`.
    pub fn solve_into(&self, b: &[f64], x: &mut [f64], work: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        assert_eq!(x.len(), self.n);
        for (wi, &p) in work.iter_mut().zip(&self.perm) {
            *wi = b[p];
        }
        self.forward(work);
        for (wi, &d) in work.iter_mut().zip(&self.pivots) {
            *wi /= d;
        }
        self.backward(work);
        for (&wi, &p) in work.iter().zip(&self.perm) {
            x[p] = wi;
        }
    }

    fn require_cholesky(&self) -> Result<()> {
        if self.kind == FactorKind::Ict {
            Ok(())
        } else {
            Err(SlrError::InvalidArgument(
                "half solves need an incomplete Cholesky factor".into(),
            ))
        }
    }

    /// With `C ~ G G^T`, `G = P^T L D^{1/2}`: returns `G^{-1} x`.
    pub fn solve_lower(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_cholesky()?;
        check_len(self.n, x.len())?;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| x[p]).collect();
        self.forward(&mut y);
        for (yi, &d) in y.iter_mut().zip(&self.pivots) {
            *yi /= d.sqrt();
        }
        Ok(y)
    }

    /// Returns `G^{-T} y` (see [`Self::solve_lower`]).
    pub fn solve_upper(&self, y: &[f64]) -> Result<Vec<f64>> {
        self.require_cholesky()?;
        check_len(self.n, y.len())?;
        let mut t: Vec<f64> = y.iter().zip(&self.pivots).map(|(v, d)| v / d.sqrt()).collect();
        self.backward(&mut t);
        let mut x = vec![0.0; self.n];
        for (&ti, &p) in t.iter().zip(&self.perm) {
            x[p] = ti;
        }
        Ok(x)
    }

    /// Returns `G^T x`, undoing [`Self::solve_upper`].
    pub fn mul_upper(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.require_cholesky()?;
        check_len(self.n, x.len())?;
        // t = L^T P x
        let px: Vec<f64> = self.perm.iter().map(|&p| x[p]).collect();
        let mut t = px.clone();
        for i in 0..self.n {
            let r = self.row_ptr[i]..self.row_ptr[i + 1];
            for (&j, &v) in self.col_idx[r.clone()].iter().zip(&self.values[r]) {
                t[j as usize] += v * px[i];
            }
        }
        for (ti, &d) in t.iter_mut().zip(&self.pivots) {
            *ti *= d.sqrt();
        }
        Ok(t)
    }

    /// Dense `(L, D)` in the permuted ordering, for small-case checks.
    pub fn dense_factors(&self) -> (nalgebra::DMatrix<f64>, Vec<f64>) {
        let mut l = nalgebra::DMatrix::identity(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                l[(i, self.col_idx[k] as usize)] = self.values[k];
            }
        }
        (l, self.pivots.clone())
    }

    /// Dense `P^T L D L^T P`, the matrix this factor represents.
    pub fn reconstruct_dense(&self) -> nalgebra::DMatrix<f64> {
        let (l, d) = self.dense_factors();
        let ld = &l * nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        let m = ld * l.transpose();
        let mut out = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out[(self.perm[i], self.perm[j])] = m[(i, j)];
            }
        }
        out
    }
}
