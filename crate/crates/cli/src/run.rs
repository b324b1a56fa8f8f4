//! The work behind each subcommand, kept free of argument parsing so tests
//! can drive it directly.

use std::io::Write;
use std::time::Instant;

use slr_core::analysis::{
    dense_schur, kappa_curve, model_gamma, rank_for_kappa, sym_eigenvalues,
    write_kappa_csv, SpectralReport,
};
use slr_core::factor::{factorize, FactorKind, FactorOptions};
use slr_core::krylov::{gmres, pcg, IdentityPreconditioner, KrylovOptions, Preconditioner, SolveReport};
use slr_core::partition::{build_dd, geometric_bisection_grid, partition_graph, DomainDecomposition};
use slr_core::slr::{build_slr, Partitioner, SlrOptions, ThetaPolicy};
use slr_core::SymSparseMatrix;

use crate::config::{parse_pairs, MatrixSource, PartitionChoice, PrecondKind, RunConfig, Solver};
use crate::error::{CliError, Result};

pub const SOLVE_HEADER: &str = "matrix,n,nnz,precond,nd,rk,fill,p-t,its,i-t,converged";

/// One line of a solve or bench report.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveRow {
    pub matrix: String,
    pub n: usize,
    /// Nonzeros of the full symmetric matrix.
    pub nnz: usize,
    pub precond: &'static str,
    pub nd: Option<usize>,
    pub rank: Option<usize>,
    pub fill: f64,
    pub build_seconds: f64,
    pub iterations: usize,
    pub iter_seconds: f64,
    pub converged: bool,
    pub report: SolveReport,
}

impl SolveRow {
    /// CSV line; the iteration column shows `F` when the solve did not converge.
    pub fn csv(&self, timing: bool) -> String {
        let t = |x: f64| if timing { format!("{x:.3}") } else { "0.000".to_string() };
        let opt = |x: Option<usize>| x.map_or("-".to_string(), |v| v.to_string());
        let its = if self.converged {
            self.iterations.to_string()
        } else {
            "F".to_string()
        };
        format!(
            "{},{},{},{},{},{},{:.2},{},{},{},{}",
            self.matrix,
            self.n,
            self.nnz,
            self.precond,
            opt(self.nd),
            opt(self.rank),
            self.fill,
            t(self.build_seconds),
            its,
            t(self.iter_seconds),
            self.converged
        )
    }
}

pub fn resolve_partitioner(cfg: &RunConfig) -> Result<Partitioner> {
    let grid = cfg.matrix.grid();
    match (cfg.partitioner, grid) {
        (PartitionChoice::Multilevel, _) => Ok(Partitioner::Multilevel),
        (PartitionChoice::Geometric, Some(g)) => Ok(Partitioner::Geometric(g)),
        (PartitionChoice::Geometric, None) => Err(CliError::Config(
            "geometric partitioning needs a generated grid".into(),
        )),
        (PartitionChoice::Auto, Some(g)) if cfg.nd.is_power_of_two() => Ok(Partitioner::Geometric(g)),
        (PartitionChoice::Auto, _) => Ok(Partitioner::Multilevel),
    }
}

pub fn slr_options(cfg: &RunConfig) -> Result<SlrOptions> {
    Ok(SlrOptions {
        p: cfg.nd,
        k: cfg.rank,
        theta: cfg.theta,
        droptol_b: cfg.droptol_b,
        droptol_c: cfg.droptol_c,
        lanczos_steps: cfg.lanczos_steps,
        seed: cfg.seed,
        partitioner: resolve_partitioner(cfg)?,
        ..SlrOptions::default()
    })
}

fn decomposition(a: &SymSparseMatrix, cfg: &RunConfig) -> Result<DomainDecomposition> {
    let labels = match resolve_partitioner(cfg)? {
        Partitioner::Geometric(g) => geometric_bisection_grid(g, cfg.nd)?,
        Partitioner::Multilevel => partition_graph(a, cfg.nd)?,
    };
    Ok(build_dd(a, &labels)?)
}

/// Right-hand side of all solves: `b = A 1`, so the exact solution is known.
pub fn rhs(a: &SymSparseMatrix) -> Vec<f64> {
    let mut b = vec![0.0; a.n()];
    a.matvec_into(&vec![1.0; a.n()], &mut b);
    b
}

pub fn solve(cfg: &RunConfig) -> Result<SolveRow> {
    cfg.validate()?;
    let a = cfg.matrix.load()?;
    solve_matrix(&a, cfg)
}

pub fn solve_matrix(a: &SymSparseMatrix, cfg: &RunConfig) -> Result<SolveRow> {
    let kopts = KrylovOptions {
        tol: cfg.tol,
        maxit: cfg.maxit,
        restart: cfg.restart,
    };
    let nnz_lower = a.nnz().max(1) as f64;
    let t = Instant::now();
    // the SLR build time excludes partitioning
    let (pre, fill, nd, rank, slr_build): (Box<dyn Preconditioner>, f64, _, _, _) = match cfg.precond {
        PrecondKind::None => (Box::new(IdentityPreconditioner), 0.0, None, None, None),
        PrecondKind::Ict | PrecondKind::Ildlt => {
            let kind = if cfg.precond == PrecondKind::Ict {
                FactorKind::Ict
            } else {
                FactorKind::Ildlt
            };
            let f = factorize(a, kind, &FactorOptions::with_droptol(cfg.droptol_b))?;
            let fill = f.nnz() as f64 / nnz_lower;
            (Box::new(f), fill, None, None, None)
        }
        PrecondKind::Slr => {
            let p = build_slr(a, &slr_options(cfg)?)?;
            let st = p.stats().clone();
            (Box::new(p), st.fill_ratio, Some(st.p), Some(st.rank), Some(st.build_seconds))
        }
    };
    let build_seconds = slr_build.unwrap_or_else(|| t.elapsed().as_secs_f64());
    let b = rhs(a);
    let (_, mut report) = match cfg.solver {
        Solver::Pcg => pcg(a, &b, &*pre, &kopts)?,
        Solver::Gmres => gmres(a, &b, &*pre, &kopts)?,
    };
    report.build_seconds = build_seconds;
    if let Some(path) = &cfg.history {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        report.write_history_csv(&mut f)?;
    }
    Ok(SolveRow {
        matrix: cfg.matrix.label(),
        n: a.n(),
        nnz: a.nnz_full(),
        precond: cfg.precond.name(),
        nd,
        rank,
        fill,
        build_seconds,
        iterations: report.iterations,
        iter_seconds: report.iter_seconds,
        converged: report.converged,
        report,
    })
}

/// Runs every config line of a suite and writes one row per line. A line
/// that fails is reported with `F` and the suite continues.
pub fn bench<W: Write>(suite: &str, out: &mut W, timing: bool) -> Result<usize> {
    writeln!(out, "{SOLVE_HEADER}")?;
    let mut rows = 0;
    for (lineno, line) in suite.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let result = parse_pairs(line.split_whitespace())
            .and_then(|p| RunConfig::from_pairs(&p))
            .and_then(|cfg| {
                let timing = timing && !cfg.no_timing;
                solve(&cfg).map(|r| r.csv(timing))
            });
        match result {
            Ok(row) => writeln!(out, "{row}")?,
            Err(e) => {
                let label = line
                    .split_whitespace()
                    .find_map(|t| t.strip_prefix("matrix="))
                    .and_then(|m| m.parse::<MatrixSource>().ok())
                    .map_or_else(|| format!("line{}", lineno + 1), |m| m.label());
                eprintln!("suite line {}: {e}", lineno + 1);
                writeln!(out, "{label},-,-,-,-,-,-,-,F,-,false")?;
            }
        }
        rows += 1;
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyzeMode {
    Decay,
    Kappa,
    Model,
    Rank(f64),
}

/// Writes the CSV of one analysis mode.
pub fn analyze<W: Write>(cfg: &RunConfig, mode: AnalyzeMode, out: &mut W) -> Result<()> {
    match mode {
        AnalyzeMode::Decay => {
            let a = cfg.matrix.load()?;
            let ds = dense_schur(&decomposition(&a, cfg)?)?;
            SpectralReport::from_schur(&ds).write_decay_csv(out)?;
        }
        AnalyzeMode::Kappa => analyze_kappa(cfg, out)?,
        AnalyzeMode::Model => analyze_model(cfg, out)?,
        AnalyzeMode::Rank(kappa) => {
            let a = cfg.matrix.load()?;
            let opts = SlrOptions {
                k: 0,
                theta: ThetaPolicy::Zero,
                droptol_b: 0.0,
                droptol_c: 0.0,
                ..slr_options(cfg)?
            };
            let pre = build_slr(&a, &opts)?;
            let op = pre.interface_operator()?;
            let est = rank_for_kappa(&op, kappa, 8, cfg.seed)?;
            let lk1 = est.values.get(est.rank).map_or("-".to_string(), |v| format!("{v:.6}"));
            writeln!(out, "matrix,nd,s,kappa,rank,lambda_k1")?;
            writeln!(
                out,
                "{},{},{},{},{},{}",
                cfg.matrix.label(),
                cfg.nd,
                pre.dd().s(),
                kappa,
                est.rank,
                lk1
            )?;
        }
    }
    Ok(())
}

/// `theta,kappa,kappa_dense`: the closed form next to the condition number
/// of the dense preconditioned Schur complement built with exact eigenpairs.
fn analyze_kappa<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    const POINTS: usize = 50;
    let a = cfg.matrix.load()?;
    let ds = dense_schur(&decomposition(&a, cfg)?)?;
    let s = ds.size();
    let k = cfg.rank;
    if k >= s {
        return Err(CliError::Config(format!("rank {k} must be below the interface size {s}")));
    }
    let eig = ds.h_eigen();
    let clamp = |x: f64| x.clamp(0.0, 1.0 - 1e-10);
    let ls = clamp(eig.values[s - 1]);
    let lk1 = clamp(eig.values[k]);
    let curve = kappa_curve(ls, lk1, POINTS)?;
    if s > 400 {
        return write_kappa_csv(out, &curve).map_err(Into::into);
    }
    writeln!(out, "theta,kappa,kappa_dense")?;
    for (t, kap) in curve {
        let inv = ds.unabridged_inverse(&eig, k, t)?;
        let sig = ds.preconditioned_eigs_dense(&inv)?;
        let dense = sig[s - 1] / sig[0];
        writeln!(out, "{t:.6},{kap:.10e},{dense:.10e}")?;
    }
    Ok(())
}

/// Closed-form two-domain spectra with the dense values alongside. The
/// matrix must be `lap2d:nx,2ny+1,0`.
fn analyze_model<W: Write>(cfg: &RunConfig, out: &mut W) -> Result<()> {
    let (nx, ny) = match cfg.matrix {
        MatrixSource::Lap2d { nx, ny, shift } if ny % 2 == 1 && ny >= 3 && shift == 0.0 => (nx, ny),
        _ => {
            return Err(CliError::Config(
                "model mode needs lap2d:nx,2ny+1,0 with an odd second size".into(),
            ))
        }
    };
    let m = model_gamma(nx, (ny - 1) / 2);
    let mcfg = RunConfig {
        nd: 2,
        partitioner: PartitionChoice::Geometric,
        ..cfg.clone()
    };
    let a = mcfg.matrix.load()?;
    let ds = dense_schur(&decomposition(&a, &mcfg)?)?;
    let mut gd = sym_eigenvalues(&ds.deviation);
    let mut zd = sym_eigenvalues(&ds.x);
    gd.reverse();
    zd.reverse();
    let lam = m.lambda();
    writeln!(out, "k,eta,lambda,theta,gamma,gamma_approx,zeta,gamma_dense,zeta_dense")?;
    for k in 0..nx {
        writeln!(
            out,
            "{},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            k + 1,
            m.eta[k],
            lam[k],
            m.theta[k],
            m.gamma[k],
            m.gamma_approx[k],
            m.zeta[k],
            gd[k],
            zd[k]
        )?;
    }
    Ok(())
}
