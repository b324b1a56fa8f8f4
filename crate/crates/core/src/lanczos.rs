//! Lanczos iteration with partial reorthogonalization for the dominant
//! eigenpairs of the interface operator `H = G^{-1} E^T B^{-1} E G^{-T}`,
//! where `C ~ G G^T` is the incomplete Cholesky factor of the interface block.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dense::{axpy, dot, norm2, scale, DenseTallMatrix};
use crate::error::{check_len, Result, SlrError};
use crate::factor::{FactorKind, IncompleteFactor};
use crate::partition::DomainDecomposition;

/// A symmetric linear map applied matrix-free.
pub trait SymmetricOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
}

/// Solves with `B = blkdiag(B_i)` using one factor per subdomain, in parallel.
/// `r` and the result are indexed by interior unknowns.
pub fn block_solve(
    dd: &DomainDecomposition,
    factors: &[IncompleteFactor],
    r: &[f64],
) -> Result<Vec<f64>> {
    check_len(dd.n_interior(), r.len())?;
    check_len(dd.p(), factors.len())?;
    let parts: Vec<Vec<f64>> = dd
        .ranges()
        .par_iter()
        .zip(factors.par_iter())
        .map(|(rg, f)| {
            if rg.is_empty() {
                Ok(Vec::new())
            } else {
                f.solve(&r[rg.clone()])
            }
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// The operator `H` built from the same factors the preconditioner uses.
pub struct InterfaceOperator<'a> {
    dd: &'a DomainDecomposition,
    b_factors: &'a [IncompleteFactor],
    c_factor: &'a IncompleteFactor,
}

impl<'a> InterfaceOperator<'a> {
    pub fn new(
        dd: &'a DomainDecomposition,
        b_factors: &'a [IncompleteFactor],
        c_factor: &'a IncompleteFactor,
    ) -> Result<Self> {
        check_len(dd.p(), b_factors.len())?;
        check_len(dd.s(), c_factor.n())?;
        if c_factor.kind() != FactorKind::Ict {
            return Err(SlrError::InvalidArgument(
                "the interface factor must be an incomplete Cholesky factor".into(),
            ));
        }
        Ok(Self {
            dd,
            b_factors,
            c_factor,
        })
    }
}

impl SymmetricOperator for InterfaceOperator<'_> {
    fn dim(&self) -> usize {
        self.dd.s()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dim(), x.len())?;
        let y = self.c_factor.solve_upper(x)?;
        let ey = self.dd.e().mul_vec(&y);
        let v = block_solve(self.dd, self.b_factors, &ey)?;
        let z = self.dd.e().mul_transpose_vec(&v);
        self.c_factor.solve_lower(&z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Number of Ritz vectors wanted; one more Ritz value is kept.
    pub k: usize,
    /// Step limit; `None` means `5k`.
    pub max_steps: Option<usize>,
    /// A pair is accepted when its residual is at most `tol * lambda_1`.
    /// With `tol = 0` the iteration always runs the full step budget.
    pub tol: f64,
    pub seed: u64,
    /// Reorthogonalize every step instead of only when the estimate demands it.
    pub full_reorth: bool,
}

impl LanczosOptions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_steps: None,
            tol: 1e-8,
            seed: 0,
            full_reorth: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RitzSpectrum {
    /// Largest `k + 1` Ritz values, descending.
    pub values: Vec<f64>,
    /// Ritz vectors for the first `k` values.
    pub vectors: DenseTallMatrix,
    /// `beta_m |y_m|` for each kept value.
    pub residuals: Vec<f64>,
    /// Smallest Ritz value of the final projection.
    pub smallest: f64,
    pub steps: usize,
    /// How many of the kept values met the acceptance test.
    pub accepted: usize,
    /// Times the recurrence broke down and was restarted.
    pub restarts: usize,
}

impl RitzSpectrum {
    pub fn k(&self) -> usize {
        self.vectors.ncols()
    }

    /// Largest discarded value, or `None` when only `k` values exist.
    pub fn lambda_k_plus_1(&self) -> Option<f64> {
        self.values.get(self.k()).copied()
    }
}

/// The `k` largest Ritz pairs of `op` (plus the `k+1`-st value).
pub fn lanczos_topk(op: &dyn SymmetricOperator, opts: &LanczosOptions) -> Result<RitzSpectrum> {
    lanczos_deflated(op, opts, None)
}

/// Lanczos on the orthogonal complement of the columns of `deflate`, which
/// should be (approximate) eigenvectors of `op` with orthonormal columns.
pub fn lanczos_deflated(
    op: &dyn SymmetricOperator,
    opts: &LanczosOptions,
    deflate: Option<&DenseTallMatrix>,
) -> Result<RitzSpectrum> {
    run(op, opts, deflate).map(|r| r.0)
}

/// The iteration proper; also returns the Lanczos basis.
fn run(
    op: &dyn SymmetricOperator,
    opts: &LanczosOptions,
    deflate: Option<&DenseTallMatrix>,
) -> Result<(RitzSpectrum, Vec<Vec<f64>>)> {
    let s = op.dim();
    let nd = deflate.map_or(0, |d| d.ncols());
    if s == 0 {
        return Err(SlrError::Lanczos("operator has dimension zero".into()));
    }
    if let Some(d) = deflate {
        check_len(s, d.nrows())?;
    }
    let avail = s - nd.min(s);
    if opts.k == 0 || opts.k >= avail {
        return Err(SlrError::InvalidArgument(format!(
            "need 1 <= k < {avail}, got k = {}",
            opts.k
        )));
    }
    let max_steps = opts.max_steps.unwrap_or(5 * opts.k).clamp(opts.k + 1, avail);

    let eps = f64::EPSILON;
    let sqrt_eps = eps.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let project = |w: &mut [f64]| {
        if let Some(d) = deflate {
            for _ in 0..2 {
                let c = d.mul_transpose_vec(w);
                for (j, col) in d.columns().enumerate() {
                    axpy(-c[j], col, w);
                }
            }
        }
    };

    let mut q: Vec<Vec<f64>> = Vec::with_capacity(max_steps + 1);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut restarts = 0;

    let first = random_orthogonal(&mut rng, s, &q, &project)
        .ok_or_else(|| SlrError::Lanczos("could not draw a start vector".into()))?;
    q.push(first);

    let mut om_prev: Vec<f64> = Vec::new();
    let mut om_cur: Vec<f64> = vec![1.0];
    let mut anorm: f64 = 0.0;
    let mut force_reorth = false;
    let mut last_eig: Option<(Vec<f64>, DMatrix<f64>)> = None;
    let check_every = 5;

    for j in 0..max_steps {
        let mut w = op.apply(&q[j])?;
        project(&mut w);
        if j > 0 {
            axpy(-beta[j - 1], &q[j - 1], &mut w);
        }
        let a = dot(&q[j], &w);
        axpy(-a, &q[j], &mut w);
        alpha.push(a);
        let mut b = norm2(&w);
        anorm = anorm.max(a.abs() + b + if j > 0 { beta[j - 1] } else { 0.0 });

        // omega recurrence: om_new[i] estimates q_{j+1}^T q_i
        let mut om_new = vec![0.0; j + 2];
        let mut need = opts.full_reorth || force_reorth;
        if b > 0.0 {
            for i in 0..j {
                let mut t = beta[i] * om_cur[i + 1] + (alpha[i] - a) * om_cur[i];
                if i > 0 {
                    t += beta[i - 1] * om_cur[i - 1];
                }
                if j > 0 && i < om_prev.len() {
                    t -= beta[j - 1] * om_prev[i];
                }
                t += t.signum() * eps * anorm;
                om_new[i] = t / b;
            }
            om_new[j] = eps * (s as f64).sqrt() * anorm / b;
            if om_new[..=j].iter().any(|v| v.abs() > sqrt_eps) {
                need = true;
            }
        }
        om_new[j + 1] = 1.0;
        force_reorth = false;
        if need && b > 0.0 {
            reorthogonalize(&mut w, &q);
            project(&mut w);
            b = norm2(&w);
            for v in om_new[..=j].iter_mut() {
                *v = eps * (s as f64).sqrt();
            }
            // the next vector inherits part of the lost orthogonality
            force_reorth = !opts.full_reorth;
        }

        let done_space = q.len() == avail;
        let breakdown = b <= eps * anorm.max(f64::MIN_POSITIVE) * (s as f64).sqrt();
        let last = j + 1 == max_steps || done_space;
        if !last && (j + 1) % check_every == 0 {
            let (vals, vecs) = tridiag_eig(&alpha, &beta);
            let ok = accepted_count(&vals, &vecs, b, opts.tol, opts.k + 1);
            last_eig = Some((vals, vecs));
            if ok >= opts.k + 1 && !breakdown {
                beta.push(b);
                break;
            }
        }
        if last {
            beta.push(if breakdown { 0.0 } else { b });
            break;
        }
        if breakdown {
            // invariant subspace: continue from a fresh orthogonal direction
            beta.push(0.0);
            restarts += 1;
            let Some(v) = random_orthogonal(&mut rng, s, &q, &project) else {
                break;
            };
            q.push(v);
            om_prev = om_cur;
            om_cur = vec![eps * (s as f64).sqrt(); j + 2];
            om_cur[j + 1] = 1.0;
            force_reorth = true;
            continue;
        }
        beta.push(b);
        scale(1.0 / b, &mut w);
        q.push(w);
        om_prev = om_cur;
        om_cur = om_new;
    }

    let m = alpha.len();
    let b_last = beta[m - 1];
    let (vals, vecs) = match last_eig {
        Some(e) if e.0.len() == m => e,
        _ => tridiag_eig(&alpha, &beta[..m - 1]),
    };
    let keep = (opts.k + 1).min(m);
    let values: Vec<f64> = vals[..keep].to_vec();
    let residuals: Vec<f64> = (0..keep).map(|i| b_last * vecs[(m - 1, i)].abs()).collect();
    let accepted = accepted_count(&vals, &vecs, b_last, opts.tol, keep);
    let mut vectors = DenseTallMatrix::empty(s);
    for i in 0..opts.k.min(m) {
        let mut u = vec![0.0; s];
        for (jj, qj) in q.iter().take(m).enumerate() {
            axpy(vecs[(jj, i)], qj, &mut u);
        }
        let nu = norm2(&u);
        scale(1.0 / nu, &mut u);
        vectors.push_column(&u)?;
    }
    q.truncate(m);
    let spectrum = RitzSpectrum {
        values,
        vectors,
        residuals,
        smallest: *vals.last().unwrap(),
        steps: m,
        accepted,
        restarts,
    };
    Ok((spectrum, q))
}

/// Eigenpairs of the symmetric tridiagonal matrix, values descending.
fn tridiag_eig(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let e = SymmetricEigen::new(t);
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]).then(a.cmp(&b)));
    let vals = idx.iter().map(|&i| e.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(m, m, |r, c| e.eigenvectors[(r, idx[c])]);
    (vals, vecs)
}

/// Leading values among the first `want` that pass the residual test.
fn accepted_count(vals: &[f64], vecs: &DMatrix<f64>, b: f64, tol: f64, want: usize) -> usize {
    let m = vals.len();
    let scale = vals.first().map_or(0.0, |v| v.abs());
    (0..want.min(m))
        .take_while(|&i| b * vecs[(m - 1, i)].abs() <= tol * scale)
        .count()
}

/// Two passes of classical Gram-Schmidt against every basis vector.
fn reorthogonalize(w: &mut [f64], q: &[Vec<f64>]) {
    for _ in 0..2 {
        let c: Vec<f64> = q.iter().map(|qi| dot(qi, w)).collect();
        for (qi, ci) in q.iter().zip(c) {
            axpy(-ci, qi, w);
        }
    }
}

fn random_orthogonal(
    rng: &mut ChaCha8Rng,
    s: usize,
    q: &[Vec<f64>],
    project: &dyn Fn(&mut [f64]),
) -> Option<Vec<f64>> {
    for _ in 0..5 {
        let mut v: Vec<f64> = (0..s).map(|_| rng.gen_range(-1.0..1.0)).collect();
        project(&mut v);
        reorthogonalize(&mut v, q);
        let nv = norm2(&v);
        if nv > 1e-8 {
            scale(1.0 / nv, &mut v);
            return Some(v);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{ict_factor, FactorOptions};
    use crate::partition::{build_dd, geometric_bisection_grid, partition_graph};
    use crate::sparse::{gen_laplacian_2d, gen_laplacian_3d, GridShape, SymSparseMatrix};

    struct Dense(DMatrix<f64>);

    impl SymmetricOperator for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok((&self.0 * nalgebra::DVector::from_column_slice(x)).as_slice().to_vec())
        }
    }

    fn exact_factors(dd: &DomainDecomposition) -> (Vec<IncompleteFactor>, IncompleteFactor) {
        let b = dd
            .blocks()
            .iter()
            .map(|b| ict_factor(b, &FactorOptions::exact()).unwrap())
            .collect();
        (b, ict_factor(dd.c(), &FactorOptions::exact()).unwrap())
    }

    /// Dense `E^T B^{-1} E`.
    fn dense_w(dd: &DomainDecomposition) -> DMatrix<f64> {
        let nb = dd.n_interior();
        let mut b = DMatrix::zeros(nb, nb);
        for (blk, r) in dd.blocks().iter().zip(dd.ranges()) {
            b.view_mut((r.start, r.start), (r.len(), r.len())).copy_from(&blk.to_dense());
        }
        let e = dd.e().to_dense();
        e.transpose() * b.cholesky().unwrap().solve(&e)
    }

    /// Dense `L^{-1} W L^{-T}` with `L` the dense Cholesky factor of C.
    fn dense_h(dd: &DomainDecomposition) -> DMatrix<f64> {
        let li = dd.c().to_dense().cholesky().unwrap().l().try_inverse().unwrap();
        &li * dense_w(dd) * li.transpose()
    }

    fn sorted_desc(m: DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    fn grid_dd(nx: usize, ny: usize, p: usize) -> DomainDecomposition {
        let a = gen_laplacian_2d(nx, ny, 0.0).unwrap();
        build_dd(&a, &geometric_bisection_grid(GridShape::new_2d(nx, ny), p).unwrap()).unwrap()
    }

    #[test]
    fn decoupled_operator_is_zero() {
        let a = SymSparseMatrix::from_diagonal(&[2.0; 4]);
        let l = crate::partition::PartitionLabels::new(2, vec![0, 0, 1, 1], vec![false, true, false, true]).unwrap();
        let dd = build_dd(&a, &l).unwrap();
        let (bf, cf) = exact_factors(&dd);
        let op = InterfaceOperator::new(&dd, &bf, &cf).unwrap();
        assert_eq!(op.apply(&[1.0, -3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn interface_operator_matches_dense() {
        let dd = grid_dd(8, 8, 2);
        let (bf, cf) = exact_factors(&dd);
        let op = InterfaceOperator::new(&dd, &bf, &cf).unwrap();
        // dense G from its transpose applied to unit vectors
        let s = dd.s();
        let mut g = DMatrix::zeros(s, s);
        for j in 0..s {
            let mut e = vec![0.0; s];
            e[j] = 1.0;
            let row = cf.mul_upper(&e).unwrap();
            for i in 0..s {
                g[(j, i)] = row[i];
            }
        }
        assert!((&g * g.transpose() - dd.c().to_dense()).norm() < 1e-12);
        let gi = g.try_inverse().unwrap();
        let h = &gi * dense_w(&dd) * gi.transpose();
        let x: Vec<f64> = (0..s).map(|i| (i as f64 * 0.37).cos()).collect();
        let hx = op.apply(&x).unwrap();
        let dx = &h * nalgebra::DVector::from_column_slice(&x);
        for i in 0..s {
            assert!((hx[i] - dx[i]).abs() < 1e-10, "{i}: {} vs {}", hx[i], dx[i]);
        }
    }

    #[test]
    fn interface_operator_is_symmetric() {
        let a = gen_laplacian_3d(7, 6, 5, 0.0).unwrap();
        let dd = build_dd(&a, &partition_graph(&a, 4).unwrap()).unwrap();
        let bf: Vec<_> = dd
            .blocks()
            .iter()
            .map(|b| ict_factor(b, &FactorOptions::with_droptol(1e-2)).unwrap())
            .collect();
        let cf = ict_factor(dd.c(), &FactorOptions::with_droptol(1e-2)).unwrap();
        let op = InterfaceOperator::new(&dd, &bf, &cf).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let x: Vec<f64> = (0..dd.s()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..dd.s()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lhs = dot(&op.apply(&x).unwrap(), &y);
            let rhs = dot(&x, &op.apply(&y).unwrap());
            assert!((lhs - rhs).abs() <= 1e-10 * norm2(&x) * norm2(&y));
        }
    }

    #[test]
    fn zero_operator_gives_zero_ritz_values() {
        let op = Dense(DMatrix::zeros(10, 10));
        let r = lanczos_topk(&op, &LanczosOptions::new(3)).unwrap();
        assert!(r.values.iter().all(|&v| v == 0.0));
        assert_eq!(r.values.len(), 4);
    }

    #[test]
    fn argument_errors() {
        let op = Dense(DMatrix::identity(4, 4));
        assert!(lanczos_topk(&op, &LanczosOptions::new(4)).is_err());
        assert!(lanczos_topk(&op, &LanczosOptions::new(0)).is_err());
        assert!(lanczos_topk(&Dense(DMatrix::zeros(0, 0)), &LanczosOptions::new(1)).is_err());
    }

    #[test]
    fn top_values_match_dense_spectrum() {
        let dd = grid_dd(20, 31, 4);
        let (bf, cf) = exact_factors(&dd);
        let op = InterfaceOperator::new(&dd, &bf, &cf).unwrap();
        let exact = sorted_desc(dense_h(&dd));
        assert!(exact.iter().all(|&v| v > -1e-8 && v < 1.0));
        let mut o = LanczosOptions::new(6);
        o.max_steps = Some(60);
        let r = lanczos_topk(&op, &o).unwrap();
        for i in 0..7 {
            assert!((r.values[i] - exact[i]).abs() < 1e-8, "{i}: {} vs {}", r.values[i], exact[i]);
        }
        assert!(r.vectors.orthogonality_defect() < 1e-8);
        assert!(r.values.windows(2).all(|w| w[0] >= w[1]));
        // Ritz vectors are eigenvectors of H
        for i in 0..6 {
            let u = r.vectors.col(i);
            let hu = op.apply(u).unwrap();
            let res: f64 = hu.iter().zip(u).map(|(a, b)| (a - r.values[i] * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-6, "pair {i} residual {res}");
        }
    }

    #[test]
    fn basis_stays_semi_orthogonal() {
        // clustered spectrum forces loss of orthogonality without reorthogonalization
        let n = 300;
        let d: Vec<f64> = (0..n).map(|i| 1.0 - (i as f64 / n as f64).powi(3)).collect();
        let op = Dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone())));
        let mut o = LanczosOptions::new(20);
        o.max_steps = Some(150);
        o.tol = 0.0;
        let r = lanczos_topk(&op, &o).unwrap();
        assert_eq!(r.steps, 150);
        assert!(r.vectors.orthogonality_defect() < 1e-8);
        // no spurious copies of converged values
        for w in r.values.windows(2) {
            assert!(w[0] - w[1] > 1e-10 || w[0] < 0.99, "duplicate Ritz value {}", w[0]);
        }
    }

    fn max_overlap(q: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..q.len() {
            for j in 0..i {
                worst = worst.max(dot(&q[i], &q[j]).abs());
            }
        }
        worst
    }

    #[test]
    fn basis_orthogonality_bound() {
        let n = 400;
        let d: Vec<f64> = (0..n).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let op = Dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d)));
        let mut o = LanczosOptions::new(10);
        o.max_steps = Some(150);
        o.tol = 0.0;
        let (_, q) = run(&op, &o, None).unwrap();
        assert_eq!(q.len(), 150);
        assert!(max_overlap(&q) <= f64::EPSILON.sqrt(), "{}", max_overlap(&q));

        let dd = grid_dd(40, 41, 4);
        let (bf, cf) = exact_factors(&dd);
        let op = InterfaceOperator::new(&dd, &bf, &cf).unwrap();
        let mut o = LanczosOptions::new(8);
        o.max_steps = Some(70);
        o.tol = 0.0;
        let (_, q) = run(&op, &o, None).unwrap();
        assert!(max_overlap(&q) <= f64::EPSILON.sqrt(), "{}", max_overlap(&q));
    }

    #[test]
    fn start_vector_independence() {
        let dd = grid_dd(30, 41, 2);
        let (bf, cf) = exact_factors(&dd);
        let op = InterfaceOperator::new(&dd, &bf, &cf).unwrap();
        let mut o = LanczosOptions::new(5);
        o.max_steps = Some(30);
        let r1 = lanczos_topk(&op, &o).unwrap();
        o.seed = 99;
        let r2 = lanczos_topk(&op, &o).unwrap();
        for i in 0..5 {
            assert!((r1.values[i] - r2.values[i]).abs() <= 1e-6 * r1.values[i]);
        }
    }

    #[test]
    fn full_and_partial_reorth_agree() {
        let dd = grid_dd(16, 16, 4);
        let (bf, cf) = exact_factors(&dd);
        let op = InterfaceOperator::new(&dd, &bf, &cf).unwrap();
        let mut o = LanczosOptions::new(4);
        let partial = lanczos_topk(&op, &o).unwrap();
        o.full_reorth = true;
        let full = lanczos_topk(&op, &o).unwrap();
        for i in 0..5 {
            assert!((partial.values[i] - full.values[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn invariant_subspace_restart() {
        // rank-2 operator: the Krylov space closes after two steps
        let mut m = DMatrix::zeros(12, 12);
        m[(0, 0)] = 0.9;
        m[(5, 5)] = 0.4;
        let op = Dense(m);
        let mut o = LanczosOptions::new(3);
        o.max_steps = Some(8);
        let r = lanczos_topk(&op, &o).unwrap();
        assert!(r.restarts >= 1);
        assert!((r.values[0] - 0.9).abs() < 1e-12);
        assert!((r.values[1] - 0.4).abs() < 1e-12);
        assert!(r.values[2].abs() < 1e-12);
        assert!(r.vectors.orthogonality_defect() < 1e-8);
    }

    #[test]
    fn deflation_finds_next_pairs() {
        let n = 80;
        let d: Vec<f64> = (0..n).map(|i| 0.95f64.powi(i as i32)).collect();
        let op = Dense(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.clone())));
        let mut o = LanczosOptions::new(3);
        o.max_steps = Some(60);
        let first = lanczos_topk(&op, &o).unwrap();
        assert_eq!(first.accepted, 4);
        o.max_steps = Some(40);
        let more = lanczos_deflated(&op, &o, Some(&first.vectors)).unwrap();
        for i in 0..3 {
            assert!((more.values[i] - d[3 + i]).abs() < 1e-8, "{} vs {}", more.values[i], d[3 + i]);
        }
    }
}
