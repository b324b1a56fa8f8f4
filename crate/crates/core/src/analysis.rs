//! Dense spectral diagnostics for small decompositions and the analytic
//! two-domain model. Everything here uses exact factorizations so that the
//! checks measure the theory, not the dropping.

use std::io::Write;

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::dense::DenseTallMatrix;
use crate::error::{Result, SlrError};
use crate::factor::{factorize, FactorKind, FactorOptions, IncompleteFactor};
use crate::lanczos::{lanczos_deflated, LanczosOptions, SymmetricOperator};
use crate::partition::DomainDecomposition;

/// Largest interface handled by the dense routines.
pub const DENSE_SCHUR_LIMIT: usize = 3000;

/// Dense interface matrices of a decomposition.
#[derive(Debug, Clone)]
pub struct DenseSchur {
    /// `S = C - E^T B^{-1} E`
    pub s: DMatrix<f64>,
    pub c: DMatrix<f64>,
    /// Lower Cholesky factor of `C`.
    pub l: DMatrix<f64>,
    /// `H = L^{-1} E^T B^{-1} E L^{-T}`
    pub h: DMatrix<f64>,
    /// `X = L^T (S^{-1} - C^{-1}) L`
    pub x: DMatrix<f64>,
    /// `S^{-1} - C^{-1}`
    pub deviation: DMatrix<f64>,
}

/// Eigenpairs of `H` sorted by decreasing value.
#[derive(Debug, Clone)]
pub struct HEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

fn exact_block_factor(b: &crate::SymSparseMatrix) -> Result<IncompleteFactor> {
    match factorize(b, FactorKind::Ict, &FactorOptions::exact()) {
        Ok(f) => Ok(f),
        Err(SlrError::Breakdown { .. }) => factorize(b, FactorKind::Ildlt, &FactorOptions::exact()),
        Err(e) => Err(e),
    }
}

fn dense_cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    Cholesky::new(m.clone())
        .ok_or_else(|| SlrError::InvalidArgument(format!("{what} is not positive definite")))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `W = E^T B^{-1} E` densely, one interface column at a time. Only the
/// subdomains that a column touches are solved.
pub fn dense_coupling(dd: &DomainDecomposition) -> Result<DMatrix<f64>> {
    let s = dd.s();
    let e = dd.e();
    let factors: Vec<IncompleteFactor> = dd
        .blocks()
        .par_iter()
        .map(exact_block_factor)
        .collect::<Result<_>>()?;

    // columns of E per subdomain
    let mut cols: Vec<Vec<Vec<(usize, f64)>>> = vec![vec![Vec::new(); dd.p()]; s];
    for (bi, rg) in dd.ranges().iter().enumerate() {
        for r in rg.clone() {
            let (ci, cv) = e.row(r);
            for (&c, &v) in ci.iter().zip(cv) {
                cols[c][bi].push((r - rg.start, v));
            }
        }
    }
    let columns: Vec<Vec<f64>> = cols
        .par_iter()
        .map(|per_block| {
            let mut w = vec![0.0; s];
            for (bi, entries) in per_block.iter().enumerate() {
                if entries.is_empty() {
                    continue;
                }
                let rg = dd.ranges()[bi].clone();
                let mut rhs = vec![0.0; rg.len()];
                for &(r, v) in entries {
                    rhs[r] = v;
                }
                let sol = factors[bi].solve(&rhs)?;
                e.mul_transpose_rows_add(rg, &sol, &mut w);
            }
            Ok(w)
        })
        .collect::<Result<_>>()?;
    let mut w = DMatrix::from_fn(s, s, |i, j| columns[j][i]);
    symmetrize(&mut w);
    Ok(w)
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Exact dense `S`, `C`, `H`, `X` for interfaces up to [`DENSE_SCHUR_LIMIT`].
/// `X` is formed from `S^{-1}` and `C^{-1}` directly, not through `H`, so the
/// relation between their spectra is a genuine check.
pub fn dense_schur(dd: &DomainDecomposition) -> Result<DenseSchur> {
    let s = dd.s();
    if s > DENSE_SCHUR_LIMIT {
        return Err(SlrError::SizeGuard {
            size: s,
            limit: DENSE_SCHUR_LIMIT,
        });
    }
    let c = dd.c().to_dense();
    let w = dense_coupling(dd)?;
    let mut smat = &c - &w;
    symmetrize(&mut smat);

    let cc = dense_cholesky(&c, "C")?;
    let l = cc.l();
    // H = L^{-1} W L^{-T}
    let linv_w = l
        .solve_lower_triangular(&w)
        .ok_or_else(|| SlrError::InvalidArgument("singular Cholesky factor".into()))?;
    let mut h = l
        .solve_lower_triangular(&linv_w.transpose())
        .ok_or_else(|| SlrError::InvalidArgument("singular Cholesky factor".into()))?;
    symmetrize(&mut h);

    let sinv = dense_cholesky(&smat, "S")?.inverse();
    let cinv = cc.inverse();
    let mut deviation = sinv - cinv;
    symmetrize(&mut deviation);
    let mut x = l.transpose() * &deviation * &l;
    symmetrize(&mut x);

    Ok(DenseSchur {
        s: smat,
        c,
        l,
        h,
        x,
        deviation,
    })
}

impl DenseSchur {
    pub fn size(&self) -> usize {
        self.c.nrows()
    }

    pub fn h_eigen(&self) -> HEigen {
        let se = SymmetricEigen::new(self.h.clone());
        let mut idx: Vec<usize> = (0..self.size()).collect();
        idx.sort_by(|&a, &b| se.eigenvalues[b].total_cmp(&se.eigenvalues[a]));
        let values = idx.iter().map(|&i| se.eigenvalues[i]).collect();
        let vectors = DMatrix::from_fn(self.size(), self.size(), |r, c| se.eigenvectors[(r, idx[c])]);
        HEigen { values, vectors }
    }

    /// `Z_k = L^{-T} U_k` for the leading `k` eigenvectors.
    pub fn leading_z(&self, eig: &HEigen, k: usize) -> Result<DenseTallMatrix> {
        let uk = eig.vectors.columns(0, k).into_owned();
        let z = self
            .l
            .transpose()
            .solve_upper_triangular(&uk)
            .ok_or_else(|| SlrError::InvalidArgument("singular Cholesky factor".into()))?;
        let cols: Vec<Vec<f64>> = z.column_iter().map(|c| c.iter().copied().collect()).collect();
        DenseTallMatrix::from_columns(self.size(), &cols)
    }

    /// The approximate inverse built from the full eigendecomposition, with
    /// the leading `k` eigenvalues kept and the rest replaced by `theta`:
    /// `C^{-1} + L^{-T} U [(I - L~)^{-1} - I] U^T L^{-1}`.
    pub fn unabridged_inverse(&self, eig: &HEigen, k: usize, theta: f64) -> Result<DMatrix<f64>> {
        let n = self.size();
        let cinv = dense_cholesky(&self.c, "C")?.inverse();
        let lt = self.l.transpose();
        let y = lt
            .solve_upper_triangular(&eig.vectors)
            .ok_or_else(|| SlrError::InvalidArgument("singular Cholesky factor".into()))?;
        let mut scaled = y.clone();
        for j in 0..n {
            let lam = if j < k { eig.values[j] } else { theta };
            let f = 1.0 / (1.0 - lam) - 1.0;
            scaled.column_mut(j).scale_mut(f);
        }
        Ok(cinv + scaled * y.transpose())
    }

    /// Eigenvalues of `S S~^{-1}` (ascending) for a symmetric approximate
    /// inverse applied through `apply`. Computed as the spectrum of the
    /// congruent matrix `R^T S~^{-1} R` with `S = R R^T`.
    pub fn preconditioned_eigs<F>(&self, apply: F) -> Result<Vec<f64>>
    where
        F: Fn(&[f64]) -> Result<Vec<f64>>,
    {
        let n = self.size();
        let mut cols = Vec::with_capacity(n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            cols.push(apply(&e)?);
            e[j] = 0.0;
        }
        let mut m = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
        symmetrize(&mut m);
        self.preconditioned_eigs_dense(&m)
    }

    pub fn preconditioned_eigs_dense(&self, sinv_approx: &DMatrix<f64>) -> Result<Vec<f64>> {
        let r = dense_cholesky(&self.s, "S")?.l();
        let mut t = r.transpose() * sinv_approx * &r;
        symmetrize(&mut t);
        Ok(sym_eigenvalues(&t))
    }
}

/// Spectra derived from a [`DenseSchur`], all ascending.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    /// Eigenvalues of `H`.
    pub lambda: Vec<f64>,
    pub x: Vec<f64>,
    /// Eigenvalues of `S^{-1} - C^{-1}`.
    pub deviation: Vec<f64>,
}

impl SpectralReport {
    pub fn from_schur(ds: &DenseSchur) -> Self {
        Self {
            lambda: sym_eigenvalues(&ds.h),
            x: sym_eigenvalues(&ds.x),
            deviation: sym_eigenvalues(&ds.deviation),
        }
    }

    /// Largest distance of an `H` eigenvalue from `[0, 1)`.
    pub fn range_violation(&self, slack_low: f64, cap: f64) -> f64 {
        self.lambda
            .iter()
            .map(|&l| (slack_low - l).max(l - cap).max(0.0))
            .fold(0.0, f64::max)
    }

    /// Largest mismatch between the eigenvalues of `X` and
    /// `lambda / (1 - lambda)`, relative to `max(1, |value|)`. Both lists are
    /// sorted, so this is a multiset comparison.
    pub fn identity_defect(&self) -> f64 {
        let mut mapped: Vec<f64> = self.lambda.iter().map(|&l| l / (1.0 - l)).collect();
        mapped.sort_by(f64::total_cmp);
        mapped
            .iter()
            .zip(&self.x)
            .map(|(a, b)| (a - b).abs() / a.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// `(capture of X, capture of S^{-1} - C^{-1})` for the `m` largest values.
    pub fn capture(&self, m: usize) -> (f64, f64) {
        let desc = |v: &[f64]| v.iter().rev().map(|x| x.max(0.0)).collect::<Vec<_>>();
        (
            capture_fraction(&desc(&self.x), m),
            capture_fraction(&desc(&self.deviation), m),
        )
    }

    /// `i,lambda,x,deviation,capture_x,capture_deviation`, largest first.
    pub fn write_decay_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "i,lambda,x,deviation,capture_x,capture_deviation")?;
        let n = self.lambda.len();
        for i in 0..n {
            let (cx, cd) = self.capture(i + 1);
            writeln!(
                w,
                "{},{:.10e},{:.10e},{:.10e},{:.6},{:.6}",
                i + 1,
                self.lambda[n - 1 - i],
                self.x[n - 1 - i],
                self.deviation[n - 1 - i],
                cx,
                cd
            )?;
        }
        Ok(())
    }
}

/// Share of the total carried by the `m` leading values of a descending,
/// nonnegative list. An all-zero list is fully captured.
pub fn capture_fraction(eigs: &[f64], m: usize) -> f64 {
    let total: f64 = eigs.iter().sum();
    if total == 0.0 {
        return 1.0;
    }
    eigs.iter().take(m).sum::<f64>() / total
}

/// Condition number of `S S~^{-1}` as a function of the shift, given the
/// smallest eigenvalue `lambda_s` and the first discarded one `lambda_k1`.
pub fn kappa_theta(lambda_s: f64, lambda_k1: f64, theta: f64) -> Result<f64> {
    if !(0.0 <= lambda_s && lambda_s <= lambda_k1 && lambda_k1 < 1.0) {
        return Err(SlrError::InvalidArgument(format!(
            "need 0 <= lambda_s <= lambda_k1 < 1, got {lambda_s}, {lambda_k1}"
        )));
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(SlrError::InvalidArgument(format!("theta {theta} outside [0, 1)")));
    }
    Ok(if theta < lambda_s {
        (1.0 - theta) / (1.0 - lambda_k1)
    } else if theta <= lambda_k1 {
        (1.0 - lambda_s) / (1.0 - lambda_k1)
    } else {
        (1.0 - lambda_s) / (1.0 - theta)
    })
}

/// `(theta, kappa)` at `theta = i / points`, `i = 0..points`.
pub fn kappa_curve(lambda_s: f64, lambda_k1: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    (0..points)
        .map(|i| {
            let t = i as f64 / points as f64;
            kappa_theta(lambda_s, lambda_k1, t).map(|k| (t, k))
        })
        .collect()
}

pub fn write_kappa_csv<W: Write>(w: &mut W, curve: &[(f64, f64)]) -> Result<()> {
    writeln!(w, "theta,kappa")?;
    for (t, k) in curve {
        writeln!(w, "{t:.6},{k:.10e}")?;
    }
    Ok(())
}

/// Eigenvalues of `T^_x / 2`: `1 + 2 sin^2(k pi / (2 (nx + 1)))`, `k = 1..nx`.
pub fn model_eta(nx: usize) -> Vec<f64> {
    (1..=nx)
        .map(|k| {
            let s = (k as f64 * std::f64::consts::PI / (2.0 * (nx as f64 + 1.0))).sin();
            1.0 + 2.0 * s * s
        })
        .collect()
}

/// Closed-form spectra of the two-domain model on an `nx x (2 ny + 1)` grid
/// split along its middle line.
#[derive(Debug, Clone)]
pub struct ModelSpectrum {
    pub eta: Vec<f64>,
    /// `acosh(eta_k)`
    pub theta: Vec<f64>,
    /// Eigenvalues of `S^{-1} - C^{-1}`.
    pub gamma: Vec<f64>,
    /// Large-`ny` limit of `gamma`.
    pub gamma_approx: Vec<f64>,
    /// Eigenvalues of `S^{-1} C - I`, `2 eta gamma`.
    pub zeta: Vec<f64>,
}

impl ModelSpectrum {
    /// Matching eigenvalues of `H`, `zeta / (1 + zeta)`.
    pub fn lambda(&self) -> Vec<f64> {
        self.zeta.iter().map(|z| z / (1.0 + z)).collect()
    }

    /// Largest relative error of the approximation.
    pub fn approx_error(&self) -> f64 {
        self.gamma
            .iter()
            .zip(&self.gamma_approx)
            .map(|(g, a)| ((a - g) / g).abs())
            .fold(0.0, f64::max)
    }

    /// `k,eta,lambda,theta,gamma,gamma_approx,zeta`
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "k,eta,lambda,theta,gamma,gamma_approx,zeta")?;
        let lam = self.lambda();
        for k in 0..self.eta.len() {
            writeln!(
                w,
                "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                k + 1,
                self.eta[k],
                lam[k],
                self.theta[k],
                self.gamma[k],
                self.gamma_approx[k],
                self.zeta[k]
            )?;
        }
        Ok(())
    }
}

pub fn model_gamma(nx: usize, ny: usize) -> ModelSpectrum {
    let eta = model_eta(nx);
    let n = ny as f64;
    let mut theta = Vec::with_capacity(nx);
    let mut gamma = Vec::with_capacity(nx);
    let mut gamma_approx = Vec::with_capacity(nx);
    for &e in &eta {
        let t = e.acosh();
        // sinh((n+2)t) / sinh(n t) without overflow
        let ratio = (2.0 * t).exp() * (-(-2.0 * (n + 2.0) * t).exp_m1()) / (-(-2.0 * n * t).exp_m1());
        gamma.push(1.0 / (e * (ratio - 1.0)));
        let root = e + (e * e - 1.0).sqrt();
        gamma_approx.push(1.0 / (e * (root * root - 1.0)));
        theta.push(t);
    }
    let zeta = eta.iter().zip(&gamma).map(|(e, g)| 2.0 * e * g).collect();
    ModelSpectrum {
        eta,
        theta,
        gamma,
        gamma_approx,
        zeta,
    }
}

/// Chebyshev polynomial of the second kind by its three-term recurrence.
pub fn chebyshev_u(t: f64, m: usize) -> f64 {
    let (mut prev, mut cur) = (1.0, 2.0 * t);
    if m == 0 {
        return prev;
    }
    for _ in 1..m {
        let next = 2.0 * t * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `d_n` of `d_1 = 2a`, `d_k = 2a - 1/d_{k-1}`.
pub fn continued_fraction_d(a: f64, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(SlrError::InvalidArgument("n must be at least 1".into()));
    }
    let mut d = 2.0 * a;
    for k in 2..=n {
        if d.abs() < f64::EPSILON {
            return Err(SlrError::InvalidArgument(format!("d_{} vanished", k - 1)));
        }
        d = 2.0 * a - 1.0 / d;
    }
    Ok(d)
}

/// Outcome of a rank search.
#[derive(Debug, Clone)]
pub struct RankEstimate {
    pub rank: usize,
    /// Eigenvalues found above the threshold, descending, followed by the
    /// largest value of the final run, which lies at or below it.
    pub values: Vec<f64>,
    pub lanczos_steps: usize,
    pub runs: usize,
}

/// Smallest `k` with `lambda_{k+1} <= 1 - 1/kappa` for the operator `op`.
///
/// Single-vector Lanczos finds one copy of a repeated eigenvalue and can
/// miss members of tight clusters, which symmetric partitions produce. The
/// search therefore runs Lanczos repeatedly for `chunk` pairs, each time
/// deflating everything found above the threshold, and stops once a run
/// finds nothing new above it.
pub fn rank_for_kappa(
    op: &dyn SymmetricOperator,
    kappa: f64,
    chunk: usize,
    seed: u64,
) -> Result<RankEstimate> {
    if !(kappa > 1.0) {
        return Err(SlrError::InvalidArgument(format!("kappa must exceed 1, got {kappa}")));
    }
    let s = op.dim();
    let threshold = 1.0 - 1.0 / kappa;
    let mut found = DenseTallMatrix::empty(s);
    let mut values: Vec<f64> = Vec::new();
    let mut steps = 0;
    let mut runs = 0;
    let mut budget_factor = 1;
    loop {
        let avail = s - found.ncols();
        if avail < 2 {
            // every remaining direction would have to be corrected
            values.sort_by(|a, b| b.total_cmp(a));
            return Ok(RankEstimate {
                rank: s,
                values,
                lanczos_steps: steps,
                runs,
            });
        }
        let k = chunk.max(1).min(avail - 1);
        let opts = LanczosOptions {
            max_steps: Some(budget_factor * (5 * k).max(k + 60)),
            tol: 1e-10,
            seed: seed.wrapping_add(runs as u64),
            ..LanczosOptions::new(k)
        };
        let deflate = (found.ncols() > 0).then_some(&found);
        let sp = lanczos_deflated(op, &opts, deflate)?;
        runs += 1;
        steps += sp.steps;
        if sp.values[0] <= threshold {
            values.sort_by(|a, b| b.total_cmp(a));
            let rank = values.len();
            values.push(sp.values[0]);
            return Ok(RankEstimate {
                rank,
                values,
                lanczos_steps: steps,
                runs,
            });
        }
        // Deflating an unconverged vector would leave part of its eigenvector
        // behind to be found, and counted, again.
        let scale = sp.values[0].abs().max(1.0);
        let mut accepted = 0;
        for i in 0..k {
            if sp.values[i] <= threshold {
                break;
            }
            if sp.residuals[i] <= CONVERGED_RESIDUAL * scale {
                found.push_column(sp.vectors.col(i))?;
                values.push(sp.values[i]);
                accepted += 1;
            }
        }
        if accepted == 0 {
            if opts.max_steps.is_some_and(|m| m >= avail) {
                return Err(SlrError::Lanczos(
                    "rank search stalled: Ritz pairs above the threshold do not converge".into(),
                ));
            }
            budget_factor *= 2;
        }
    }
}

/// Residual below which a Ritz pair is trusted for deflation.
const CONVERGED_RESIDUAL: f64 = 1e-8;
