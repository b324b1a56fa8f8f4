//! Preconditioned conjugate gradients and restarted GMRES.

use std::io::Write;
use std::time::Instant;

use crate::dense::{axpy, dot, norm2, scale};
use crate::error::{check_len, Result, SlrError};
use crate::factor::IncompleteFactor;
use crate::sparse::SymSparseMatrix;

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SymSparseMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

/// Applies `M^{-1}`.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
}

/// `M = I`
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

impl Preconditioner for IncompleteFactor {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.solve(r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovOptions {
    /// Relative residual target `||r|| <= tol ||b||`.
    pub tol: f64,
    pub maxit: usize,
    /// GMRES restart length.
    pub restart: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            maxit: 300,
            restart: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Relative residual norms, starting with the initial one.
    pub history: Vec<f64>,
    /// `||b - A x|| / ||b||` recomputed from the returned `x`.
    pub final_residual: f64,
    pub build_seconds: f64,
    pub iter_seconds: f64,
}

impl SolveReport {
    /// Two-column CSV `iteration,relres`.
    pub fn write_history_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "iteration,relres")?;
        for (i, r) in self.history.iter().enumerate() {
            writeln!(w, "{i},{r:.6e}")?;
        }
        Ok(())
    }
}

fn true_residual(a: &dyn LinearOperator, b: &[f64], x: &[f64], bnorm: f64) -> f64 {
    let mut ax = vec![0.0; b.len()];
    a.apply(x, &mut ax);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
    norm2(&r) / bnorm
}

fn zero_rhs(n: usize) -> (Vec<f64>, SolveReport) {
    let report = SolveReport {
        converged: true,
        iterations: 0,
        history: vec![0.0],
        final_residual: 0.0,
        build_seconds: 0.0,
        iter_seconds: 0.0,
    };
    (vec![0.0; n], report)
}

/// Preconditioned CG from `x0 = 0`. Stops when the recursively updated
/// residual satisfies `||r|| <= tol ||b||` or after `maxit` iterations.
pub fn pcg(
    a: &dyn LinearOperator,
    b: &[f64],
    m: &dyn Preconditioner,
    opts: &KrylovOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    check_len(n, b.len())?;
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(zero_rhs(n));
    }
    let start = Instant::now();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = m.apply(&r)?;
    let mut rz = dot(&r, &z);
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut history = vec![1.0];
    let mut converged = false;
    let mut it = 0;
    while it < opts.maxit {
        if !(rz > 0.0) {
            return Err(SlrError::Indefinite {
                iteration: it,
                what: "r^T M^{-1} r",
                value: rz,
            });
        }
        it += 1;
        a.apply(&p, &mut q);
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(SlrError::Indefinite {
                iteration: it,
                what: "p^T A p",
                value: pq,
            });
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= opts.tol {
            converged = true;
            break;
        }
        z = m.apply(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let iter_seconds = start.elapsed().as_secs_f64();
    let final_residual = true_residual(a, b, &x, bnorm);
    Ok((
        x,
        SolveReport {
            converged,
            iterations: it,
            history,
            final_residual,
            build_seconds: 0.0,
            iter_seconds,
        },
    ))
}

/// Right-preconditioned GMRES(`restart`) from `x0 = 0`, using modified
/// Gram-Schmidt Arnoldi and Givens rotations. The residual history holds
/// the least-squares residual norms, which are true residuals of `A x = b`.
pub fn gmres(
    a: &dyn LinearOperator,
    b: &[f64],
    m: &dyn Preconditioner,
    opts: &KrylovOptions,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = a.dim();
    check_len(n, b.len())?;
    if opts.restart == 0 {
        return Err(SlrError::InvalidArgument("restart must be positive".into()));
    }
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(zero_rhs(n));
    }
    let start = Instant::now();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut beta = bnorm;
    let mut history = vec![1.0];
    let mut it = 0;
    let mut converged = false;
    let mut w = vec![0.0; n];
    let mrs = opts.restart;

    while it < opts.maxit && !converged {
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(mrs + 1);
        let mut v0 = r.clone();
        scale(1.0 / beta, &mut v0);
        v.push(v0);
        // column-major Hessenberg, column j has j+2 entries
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(mrs);
        let mut cs: Vec<f64> = Vec::with_capacity(mrs);
        let mut sn: Vec<f64> = Vec::with_capacity(mrs);
        let mut g = vec![0.0; mrs + 1];
        g[0] = beta;
        let mut happy = false;

        for j in 0..mrs {
            let z = m.apply(&v[j])?;
            a.apply(&z, &mut w);
            let mut col = vec![0.0; j + 2];
            for (i, vi) in v.iter().enumerate() {
                let hij = dot(vi, &w);
                axpy(-hij, vi, &mut w);
                col[i] = hij;
            }
            let hnext = norm2(&w);
            col[j + 1] = hnext;
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let rho = col[j].hypot(col[j + 1]);
            let (c, s) = if rho == 0.0 { (1.0, 0.0) } else { (col[j] / rho, col[j + 1] / rho) };
            col[j] = rho;
            col[j + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            g[j + 1] = -s * g[j];
            g[j] *= c;
            h.push(col);
            it += 1;
            let rel = g[j + 1].abs() / bnorm;
            history.push(rel);
            if rel <= opts.tol {
                converged = true;
            }
            happy = hnext <= f64::EPSILON * beta;
            if converged || happy || it >= opts.maxit {
                break;
            }
            let mut vn = w.clone();
            scale(1.0 / hnext, &mut vn);
            v.push(vn);
        }

        // y = R^{-1} g, then x += M^{-1} V y
        let k = h.len();
        let mut y = g[..k].to_vec();
        for i in (0..k).rev() {
            let mut t = y[i];
            for jj in i + 1..k {
                t -= h[jj][i] * y[jj];
            }
            y[i] = if h[i][i] != 0.0 { t / h[i][i] } else { 0.0 };
        }
        let mut vy = vec![0.0; n];
        for (vi, &yi) in v.iter().zip(&y) {
            axpy(yi, vi, &mut vy);
        }
        let dx = m.apply(&vy)?;
        axpy(1.0, &dx, &mut x);

        a.apply(&x, &mut w);
        for ((ri, bi), wi) in r.iter_mut().zip(b).zip(&w) {
            *ri = bi - wi;
        }
        beta = norm2(&r);
        if happy {
            // the Krylov space is invariant: the current x is the best available
            converged = beta / bnorm <= opts.tol;
            break;
        }
        if beta == 0.0 {
            converged = true;
        }
    }
    let iter_seconds = start.elapsed().as_secs_f64();
    let final_residual = true_residual(a, b, &x, bnorm);
    Ok((
        x,
        SolveReport {
            converged,
            iterations: it,
            history,
            final_residual,
            build_seconds: 0.0,
            iter_seconds,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor::{ict_factor, FactorOptions};
    use crate::sparse::{gen_laplacian_2d, gen_laplacian_3d};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rhs(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn identity_one_step() {
        let a = SymSparseMatrix::identity(5);
        let b = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let (x, rep) = pcg(&a, &b, &IdentityPreconditioner, &KrylovOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
        let (x, rep) = gmres(&a, &b, &IdentityPreconditioner, &KrylovOptions::default()).unwrap();
        assert_eq!(rep.iterations, 1);
        assert_eq!(x, b);
    }

    #[test]
    fn exact_preconditioner_one_step() {
        let a = gen_laplacian_2d(16, 16, 0.0).unwrap();
        let f = ict_factor(&a, &FactorOptions::exact()).unwrap();
        let b = rhs(a.n(), 1);
        let mut o = KrylovOptions::default();
        o.tol = 1e-12;
        let (_, rep) = pcg(&a, &b, &f, &o).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.final_residual < 1e-12);
    }

    #[test]
    fn gmres_indefinite_diagonal() {
        let a = SymSparseMatrix::from_diagonal(&[1.0, -1.0]);
        let (x, rep) = gmres(&a, &[1.0, 1.0], &IdentityPreconditioner, &KrylovOptions::default()).unwrap();
        assert!(rep.iterations <= 2);
        assert!(rep.converged);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn pcg_reports_indefiniteness() {
        let a = SymSparseMatrix::from_diagonal(&[1.0, -1.0]);
        let r = pcg(&a, &[0.0, 1.0], &IdentityPreconditioner, &KrylovOptions::default());
        assert!(matches!(r, Err(SlrError::Indefinite { what: "p^T A p", .. })));
    }

    #[test]
    fn zero_rhs_and_mismatch() {
        let a = SymSparseMatrix::identity(3);
        let (x, rep) = pcg(&a, &[0.0; 3], &IdentityPreconditioner, &KrylovOptions::default()).unwrap();
        assert_eq!(x, vec![0.0; 3]);
        assert!(rep.converged);
        assert!(pcg(&a, &[1.0; 2], &IdentityPreconditioner, &KrylovOptions::default()).is_err());
        assert!(gmres(&a, &[1.0; 4], &IdentityPreconditioner, &KrylovOptions::default()).is_err());
    }

    #[test]
    fn pcg_energy_error_monotone() {
        let a = gen_laplacian_2d(12, 10, 0.0).unwrap();
        let f = ict_factor(&a, &FactorOptions::with_droptol(5e-2)).unwrap();
        let b = rhs(a.n(), 2);
        let ad = a.to_dense();
        let xs = ad.clone().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
        let mut last = f64::INFINITY;
        for k in 1..30 {
            let o = KrylovOptions { tol: 0.0, maxit: k, restart: 40 };
            let (x, _) = pcg(&a, &b, &f, &o).unwrap();
            let e = DVector::from_vec(x) - &xs;
            let en = (e.transpose() * &ad * &e)[(0, 0)].sqrt();
            assert!(en <= last * (1.0 + 1e-10) + 1e-14, "step {k}: {en} > {last}");
            last = en;
        }
    }

    #[test]
    fn gmres_residual_nonincreasing_within_cycle() {
        let a = gen_laplacian_3d(8, 8, 8, 0.5).unwrap();
        let b = rhs(a.n(), 3);
        let o = KrylovOptions { tol: 1e-10, maxit: 200, restart: 20 };
        let (x, rep) = gmres(&a, &b, &IdentityPreconditioner, &o).unwrap();
        for (c, w) in rep.history.windows(2).enumerate() {
            if c % 20 != 0 {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
        assert!(rep.converged);
        assert!((rep.final_residual - rep.history.last().unwrap()).abs() < 1e-8);
        let xd = a.to_dense().lu().solve(&DVector::from_vec(b)).unwrap();
        assert!((DVector::from_vec(x) - xd).norm() < 1e-6);
    }

    #[test]
    fn gmres_right_preconditioning_with_ict() {
        let a = gen_laplacian_2d(30, 30, 0.0).unwrap();
        let b = rhs(a.n(), 4);
        let f = ict_factor(&a, &FactorOptions::with_droptol(1e-2)).unwrap();
        let o = KrylovOptions::default();
        let (_, plain) = gmres(&a, &b, &IdentityPreconditioner, &o).unwrap();
        let (_, pre) = gmres(&a, &b, &f, &o).unwrap();
        assert!(pre.converged);
        assert!(pre.iterations < plain.iterations);
        assert!(pre.final_residual <= 1e-8 * 1.01);
    }

    #[test]
    fn maxit_without_convergence() {
        let a = gen_laplacian_2d(20, 20, 0.0).unwrap();
        let b = rhs(a.n(), 5);
        let o = KrylovOptions { tol: 1e-8, maxit: 3, restart: 40 };
        let (_, rep) = pcg(&a, &b, &IdentityPreconditioner, &o).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
        assert_eq!(rep.history.len(), 4);
        let (_, rep) = gmres(&a, &b, &IdentityPreconditioner, &o).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn gmres_restarts_still_converge() {
        let a = gen_laplacian_2d(15, 15, 0.0).unwrap();
        let b = rhs(a.n(), 6);
        let o = KrylovOptions { tol: 1e-8, maxit: 2000, restart: 5 };
        let (_, rep) = gmres(&a, &b, &IdentityPreconditioner, &o).unwrap();
        assert!(rep.converged);
        assert!(rep.final_residual < 1e-7);
    }

    #[test]
    fn history_csv() {
        let rep = SolveReport {
            converged: true,
            iterations: 1,
            history: vec![1.0, 0.5],
            final_residual: 0.5,
            build_seconds: 0.0,
            iter_seconds: 0.0,
        };
        let mut buf = Vec::new();
        rep.write_history_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "iteration,relres\n0,1.000000e0\n1,5.000000e-1\n");
    }

    #[test]
    fn dense_oracle_solution() {
        let a = gen_laplacian_3d(5, 4, 3, 0.0).unwrap();
        let b = rhs(a.n(), 7);
        let (x, rep) = pcg(&a, &b, &IdentityPreconditioner, &KrylovOptions::default()).unwrap();
        assert!(rep.converged);
        let xd = a.to_dense().cholesky().unwrap().solve(&DVector::from_vec(b));
        assert!((DVector::from_vec(x) - xd).norm() < 1e-6);
    }
}
