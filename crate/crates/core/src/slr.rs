//! The Schur low-rank preconditioner.
//!
//! With `A` permuted to `[[B, E], [E^T, C]]`, `C ~ G G^T` and the dominant
//! eigenpairs `(lambda_i, u_i)` of `H = G^{-1} E^T B^{-1} E G^{-T}`, the Schur
//! complement inverse is approximated by
//!
//! `S~^{-1} = (1 - theta)^{-1} C^{-1} + Z diag(d) Z^T`,  `Z = G^{-T} U_k`,
//!
//! with `d_i = (1 - lambda~_i)^{-1} - (1 - theta)^{-1}`. Every truncated
//! eigenvalue of `H` is replaced by `theta`.

use std::time::Instant;

use rayon::prelude::*;

use crate::dense::{axpy, DenseTallMatrix};
use crate::error::{check_len, Result, SlrError};
use crate::factor::{factorize, BreakdownPolicy, FactorKind, FactorOptions, IncompleteFactor};
use crate::krylov::Preconditioner;
use crate::lanczos::{block_solve, lanczos_deflated, InterfaceOperator, LanczosOptions, RitzSpectrum};
use crate::partition::{build_dd, geometric_bisection_grid, partition_graph, DomainDecomposition};
use crate::sparse::{GridShape, SymSparseMatrix};

/// Largest admissible eigenvalue estimate; keeps `1 - lambda` away from zero.
pub const LAMBDA_CAP: f64 = 1.0 - 1e-10;

/// How the truncated eigenvalues of `H` are replaced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaPolicy {
    /// `theta = lambda_{k+1}`, which minimizes the condition number.
    LambdaKPlus1,
    /// `theta = lambda_s`, the smallest eigenvalue estimate.
    LambdaS,
    Fixed(f64),
    /// `theta = 0`: the retained eigenvalues are corrected exactly and the
    /// rest of `H` is dropped.
    Zero,
    /// `theta = 0` and `lambda~_i = 1 - (1 - lambda_i) / eps`, which maps the
    /// retained part of the spectrum of `S S~^{-1}` to `eps`.
    Grigori(f64),
}

impl ThetaPolicy {
    fn needs_spectrum(&self) -> bool {
        matches!(self, Self::LambdaKPlus1 | Self::LambdaS)
    }

    /// Shift for this policy given the `k+1`-st and the smallest estimate.
    pub fn resolve(&self, lambda_k1: Option<f64>, lambda_min: Option<f64>) -> Result<f64> {
        let missing = || SlrError::InvalidArgument("theta policy needs a spectrum estimate".into());
        let theta = match *self {
            Self::LambdaKPlus1 => lambda_k1.ok_or_else(missing)?,
            Self::LambdaS => lambda_min.ok_or_else(missing)?,
            Self::Fixed(t) => {
                if !(0.0..1.0).contains(&t) {
                    return Err(SlrError::InvalidArgument(format!("theta {t} outside [0, 1)")));
                }
                t
            }
            Self::Zero | Self::Grigori(_) => 0.0,
        };
        Ok(theta.clamp(0.0, LAMBDA_CAP))
    }
}

/// `Z`, the retained eigenvalues, `theta` and the correction weights `d`.
#[derive(Debug, Clone)]
pub struct LowRankCorrection {
    z: DenseTallMatrix,
    lambdas: Vec<f64>,
    theta: f64,
    d: Vec<f64>,
}

impl LowRankCorrection {
    /// From orthonormal eigenvectors `u` of `H` in the coordinates of `c_factor`.
    pub fn from_eigenvectors(
        c_factor: &IncompleteFactor,
        u: &DenseTallMatrix,
        lambdas: &[f64],
        theta: f64,
        grigori: Option<f64>,
    ) -> Result<Self> {
        check_len(c_factor.n(), u.nrows())?;
        let mut z = DenseTallMatrix::empty(u.nrows());
        for col in u.columns() {
            z.push_column(&c_factor.solve_upper(col)?)?;
        }
        Self::from_z(z, lambdas, theta, grigori)
    }

    /// From `Z = L^{-T} U_k` directly; any factor `C = L L^T` gives the same `Z`.
    pub fn from_z(z: DenseTallMatrix, lambdas: &[f64], theta: f64, grigori: Option<f64>) -> Result<Self> {
        check_len(z.ncols(), lambdas.len())?;
        if !(0.0..1.0).contains(&theta) {
            return Err(SlrError::InvalidArgument(format!("theta {theta} outside [0, 1)")));
        }
        if let Some(eps) = grigori {
            if !(eps > 0.0) {
                return Err(SlrError::InvalidArgument(format!("eps must be positive, got {eps}")));
            }
        }
        let lambdas: Vec<f64> = lambdas.iter().map(|l| l.clamp(0.0, LAMBDA_CAP)).collect();
        let base = 1.0 / (1.0 - theta);
        let d = lambdas
            .iter()
            .map(|&l| match grigori {
                Some(eps) => eps / (1.0 - l) - base,
                None => 1.0 / (1.0 - l) - base,
            })
            .collect();
        Ok(Self { z, lambdas, theta, d })
    }

    /// No correction: `S~^{-1} = (1 - theta)^{-1} C^{-1}`.
    pub fn empty(s: usize, theta: f64) -> Result<Self> {
        Self::from_z(DenseTallMatrix::empty(s), &[], theta, None)
    }

    pub fn rank(&self) -> usize {
        self.z.ncols()
    }

    pub fn z(&self) -> &DenseTallMatrix {
        &self.z
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockFactorKind {
    /// Incomplete Cholesky, falling back to incomplete `L D L^T` on breakdown.
    Auto,
    Ict,
    Ildlt,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Partitioner {
    Multilevel,
    /// Axis-aligned cuts of a regular grid; `p` must be a power of two.
    Geometric(GridShape),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlrOptions {
    pub p: usize,
    pub k: usize,
    pub theta: ThetaPolicy,
    pub droptol_b: f64,
    pub droptol_c: f64,
    pub max_row_fill: usize,
    pub b_kind: BlockFactorKind,
    pub lanczos_tol: f64,
    /// `None` means five steps per requested eigenvalue.
    pub lanczos_steps: Option<usize>,
    pub full_reorth: bool,
    pub seed: u64,
    pub partitioner: Partitioner,
}

impl Default for SlrOptions {
    fn default() -> Self {
        Self {
            p: 8,
            k: 16,
            theta: ThetaPolicy::LambdaKPlus1,
            droptol_b: 1e-3,
            droptol_c: 1e-3,
            max_row_fill: usize::MAX,
            b_kind: BlockFactorKind::Auto,
            lanczos_tol: 1e-8,
            lanczos_steps: None,
            full_reorth: false,
            seed: 0,
            partitioner: Partitioner::Multilevel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildStats {
    pub n: usize,
    /// Stored (lower-triangle) nonzeros of `A`.
    pub nnz_a: usize,
    pub p: usize,
    pub s: usize,
    pub rank: usize,
    pub theta: f64,
    pub lambda_k_plus_1: Option<f64>,
    pub lambda_min: Option<f64>,
    pub nnz_b: usize,
    pub nnz_c: usize,
    pub fill_ratio: f64,
    pub lanczos_steps: usize,
    /// Subdomains factored as `L D L^T` rather than Cholesky.
    pub ildlt_blocks: usize,
    pub perturbations: usize,
    /// The interface factor had to be computed without dropping.
    pub c_exact_fallback: bool,
    pub partition_seconds: f64,
    /// Factorizations, Lanczos and assembly; partitioning excluded.
    pub build_seconds: f64,
}

impl BuildStats {
    /// `(sum nnz(B_i factors) + nnz(C factor) + s k) / nnz(A)`
    fn fill(nnz_b: usize, nnz_c: usize, s: usize, k: usize, nnz_a: usize) -> f64 {
        (nnz_b + nnz_c + s * k) as f64 / nnz_a.max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct SlrPreconditioner {
    dd: DomainDecomposition,
    b_factors: Vec<IncompleteFactor>,
    c_factor: IncompleteFactor,
    correction: LowRankCorrection,
    spectrum: Option<RitzSpectrum>,
    options: SlrOptions,
    stats: BuildStats,
}

/// Partitions `a`, then builds the preconditioner.
pub fn build_slr(a: &SymSparseMatrix, opts: &SlrOptions) -> Result<SlrPreconditioner> {
    let t = Instant::now();
    let labels = match opts.partitioner {
        Partitioner::Multilevel => partition_graph(a, opts.p)?,
        Partitioner::Geometric(shape) => {
            if shape.len() != a.n() {
                return Err(SlrError::DimensionMismatch {
                    expected: a.n(),
                    found: shape.len(),
                });
            }
            geometric_bisection_grid(shape, opts.p)?
        }
    };
    let dd = build_dd(a, &labels)?;
    let partition_seconds = t.elapsed().as_secs_f64();
    let mut pre = build_slr_with_dd(dd, opts)?;
    pre.stats.partition_seconds = partition_seconds;
    Ok(pre)
}

fn factor_block(b: &SymSparseMatrix, opts: &SlrOptions) -> Result<IncompleteFactor> {
    let mut fo = FactorOptions::with_droptol(opts.droptol_b);
    fo.max_row_fill = opts.max_row_fill;
    match opts.b_kind {
        BlockFactorKind::Ict => factorize(b, FactorKind::Ict, &fo),
        BlockFactorKind::Ildlt => factorize(b, FactorKind::Ildlt, &fo),
        BlockFactorKind::Auto => {
            let strict = FactorOptions {
                breakdown: BreakdownPolicy::Fail,
                ..fo
            };
            match factorize(b, FactorKind::Ict, &strict) {
                Ok(f) => Ok(f),
                Err(SlrError::Breakdown { .. }) => factorize(b, FactorKind::Ildlt, &fo),
                Err(e) => Err(e),
            }
        }
    }
}

/// Incomplete Cholesky of `C`; on breakdown retries without dropping, and
/// reports a non-SPD interface if that fails too.
fn factor_interface(c: &SymSparseMatrix, opts: &SlrOptions) -> Result<(IncompleteFactor, bool)> {
    let mut fo = FactorOptions::with_droptol(opts.droptol_c);
    fo.max_row_fill = opts.max_row_fill;
    fo.breakdown = BreakdownPolicy::Fail;
    match factorize(c, FactorKind::Ict, &fo) {
        Ok(f) => Ok((f, false)),
        Err(SlrError::Breakdown { .. }) => match factorize(c, FactorKind::Ict, &FactorOptions::exact()) {
            Ok(f) => Ok((f, true)),
            Err(SlrError::Breakdown { row, .. }) => Err(SlrError::SpdInterfaceRequired { row }),
            Err(e) => Err(e),
        },
        Err(e) => Err(e),
    }
}

/// Builds the preconditioner on an existing decomposition.
pub fn build_slr_with_dd(dd: DomainDecomposition, opts: &SlrOptions) -> Result<SlrPreconditioner> {
    let t = Instant::now();
    let s = dd.s();
    if opts.k > 0 && opts.k >= s {
        return Err(SlrError::InvalidArgument(format!(
            "rank {} must be below the interface size {s}",
            opts.k
        )));
    }
    let b_factors: Vec<IncompleteFactor> = dd
        .blocks()
        .par_iter()
        .map(|b| factor_block(b, opts))
        .collect::<Result<_>>()?;
    let (c_factor, c_exact_fallback) = factor_interface(dd.c(), opts)?;

    let mut spectrum = None;
    if s >= 2 && (opts.k > 0 || opts.theta.needs_spectrum()) {
        let op = InterfaceOperator::new(&dd, &b_factors, &c_factor)?;
        let kk = opts.k.max(1);
        let lo = LanczosOptions {
            k: kk,
            max_steps: opts.lanczos_steps,
            tol: opts.lanczos_tol,
            seed: opts.seed,
            full_reorth: opts.full_reorth,
        };
        spectrum = Some(lanczos_deflated(&op, &lo, None)?);
    }
    let (correction, lk1, lmin) = assemble(&c_factor, spectrum.as_ref(), opts.k, &opts.theta, s)?;

    let nnz_b: usize = b_factors.iter().map(|f| f.nnz()).sum();
    let nnz_c = c_factor.nnz();
    let nnz_a = dd.blocks().iter().map(|b| b.nnz()).sum::<usize>() + dd.e().nnz() + dd.c().nnz();
    let stats = BuildStats {
        n: dd.n(),
        nnz_a,
        p: dd.p(),
        s,
        rank: correction.rank(),
        theta: correction.theta(),
        lambda_k_plus_1: lk1,
        lambda_min: lmin,
        nnz_b,
        nnz_c,
        fill_ratio: BuildStats::fill(nnz_b, nnz_c, s, correction.rank(), nnz_a),
        lanczos_steps: spectrum.as_ref().map_or(0, |r| r.steps),
        ildlt_blocks: b_factors.iter().filter(|f| f.kind() == FactorKind::Ildlt).count(),
        perturbations: b_factors.iter().map(|f| f.perturbations()).sum(),
        c_exact_fallback,
        partition_seconds: 0.0,
        build_seconds: t.elapsed().as_secs_f64(),
    };
    Ok(SlrPreconditioner {
        dd,
        b_factors,
        c_factor,
        correction,
        spectrum,
        options: *opts,
        stats,
    })
}

type Assembled = (LowRankCorrection, Option<f64>, Option<f64>);

fn assemble(
    c_factor: &IncompleteFactor,
    spectrum: Option<&RitzSpectrum>,
    k: usize,
    policy: &ThetaPolicy,
    s: usize,
) -> Result<Assembled> {
    let Some(sp) = spectrum else {
        let theta = if policy.needs_spectrum() { 0.0 } else { policy.resolve(None, None)? };
        return Ok((LowRankCorrection::empty(s, theta)?, None, None));
    };
    let lk1 = sp.values.get(k).copied();
    let lmin = Some(sp.smallest);
    let theta = policy.resolve(lk1, lmin)?;
    let mut u = DenseTallMatrix::empty(s);
    for i in 0..k {
        u.push_column(sp.vectors.col(i))?;
    }
    let grigori = match policy {
        ThetaPolicy::Grigori(eps) => Some(*eps),
        _ => None,
    };
    let corr = LowRankCorrection::from_eigenvectors(c_factor, &u, &sp.values[..k], theta, grigori)?;
    Ok((corr, lk1, lmin))
}

impl SlrPreconditioner {
    /// Assembles a preconditioner from given factors and correction, for
    /// experiments with injected eigenpairs.
    pub fn from_parts(
        dd: DomainDecomposition,
        b_factors: Vec<IncompleteFactor>,
        c_factor: IncompleteFactor,
        correction: LowRankCorrection,
    ) -> Result<Self> {
        check_len(dd.p(), b_factors.len())?;
        for (f, r) in b_factors.iter().zip(dd.ranges()) {
            check_len(r.len(), f.n())?;
        }
        check_len(dd.s(), c_factor.n())?;
        check_len(dd.s(), correction.z().nrows())?;
        let nnz_b: usize = b_factors.iter().map(|f| f.nnz()).sum();
        let nnz_a = dd.blocks().iter().map(|b| b.nnz()).sum::<usize>() + dd.e().nnz() + dd.c().nnz();
        let stats = BuildStats {
            n: dd.n(),
            nnz_a,
            p: dd.p(),
            s: dd.s(),
            rank: correction.rank(),
            theta: correction.theta(),
            lambda_k_plus_1: None,
            lambda_min: None,
            nnz_b,
            nnz_c: c_factor.nnz(),
            fill_ratio: BuildStats::fill(nnz_b, c_factor.nnz(), dd.s(), correction.rank(), nnz_a),
            lanczos_steps: 0,
            ildlt_blocks: b_factors.iter().filter(|f| f.kind() == FactorKind::Ildlt).count(),
            perturbations: b_factors.iter().map(|f| f.perturbations()).sum(),
            c_exact_fallback: false,
            partition_seconds: 0.0,
            build_seconds: 0.0,
        };
        Ok(Self {
            dd,
            b_factors,
            c_factor,
            correction,
            spectrum: None,
            options: SlrOptions::default(),
            stats,
        })
    }

    pub fn dd(&self) -> &DomainDecomposition {
        &self.dd
    }

    pub fn b_factors(&self) -> &[IncompleteFactor] {
        &self.b_factors
    }

    pub fn c_factor(&self) -> &IncompleteFactor {
        &self.c_factor
    }

    pub fn correction(&self) -> &LowRankCorrection {
        &self.correction
    }

    pub fn spectrum(&self) -> Option<&RitzSpectrum> {
        self.spectrum.as_ref()
    }

    pub fn stats(&self) -> &BuildStats {
        &self.stats
    }

    pub fn interface_operator(&self) -> Result<InterfaceOperator<'_>> {
        InterfaceOperator::new(&self.dd, &self.b_factors, &self.c_factor)
    }

    /// `(1 - theta)^{-1} C^{-1} g + Z diag(d) Z^T g`
    pub fn apply_schur_inverse(&self, g: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dd.s(), g.len())?;
        if g.is_empty() {
            return Ok(Vec::new());
        }
        let mut y = self.c_factor.solve(g)?;
        let scale = 1.0 / (1.0 - self.correction.theta);
        for v in y.iter_mut() {
            *v *= scale;
        }
        let c = self.correction.z.mul_transpose_vec(g);
        for ((col, ci), di) in self.correction.z.columns().zip(c).zip(&self.correction.d) {
            axpy(ci * di, col, &mut y);
        }
        Ok(y)
    }

    /// `z = M^{-1} r` in the original ordering: two `B` solves and one
    /// application of `S~^{-1}`.
    pub fn apply_preconditioner(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dd.n(), r.len())?;
        let nb = self.dd.n_interior();
        let rp = self.dd.permute_vec(r);
        let (rf, rg) = rp.split_at(nb);
        let u1 = block_solve(&self.dd, &self.b_factors, rf)?;
        let mut g = rg.to_vec();
        let etu = self.dd.e().mul_transpose_vec(&u1);
        for (gi, ti) in g.iter_mut().zip(&etu) {
            *gi -= ti;
        }
        let y = self.apply_schur_inverse(&g)?;
        let ey = self.dd.e().mul_vec(&y);
        let t: Vec<f64> = rf.iter().zip(&ey).map(|(a, b)| a - b).collect();
        let mut z = block_solve(&self.dd, &self.b_factors, &t)?;
        z.extend_from_slice(&y);
        Ok(self.dd.unpermute_vec(&z))
    }

    /// Adds `k_extra` eigenpairs by Lanczos on the complement of the current
    /// Ritz vectors, then reassembles the correction.
    pub fn improve(mut self, k_extra: usize) -> Result<Self> {
        if k_extra == 0 {
            return Ok(self);
        }
        let t = Instant::now();
        let s = self.dd.s();
        let k = self.correction.rank();
        if k + k_extra >= s {
            return Err(SlrError::InvalidArgument(format!(
                "rank {} must be below the interface size {s}",
                k + k_extra
            )));
        }
        let mut old_u = DenseTallMatrix::empty(s);
        if let Some(sp) = &self.spectrum {
            for i in 0..k {
                old_u.push_column(sp.vectors.col(i))?;
            }
        }
        let lo = LanczosOptions {
            k: k_extra,
            // the deflated problem is no easier than the full one
            max_steps: Some(self.options.lanczos_steps.unwrap_or(5 * (k + k_extra))),
            tol: self.options.lanczos_tol,
            seed: self.options.seed.wrapping_add(k as u64 + 1),
            full_reorth: self.options.full_reorth,
        };
        let op = InterfaceOperator::new(&self.dd, &self.b_factors, &self.c_factor)?;
        let fresh = lanczos_deflated(&op, &lo, (k > 0).then_some(&old_u))?;

        let mut pairs: Vec<(f64, &[f64])> = Vec::with_capacity(k + k_extra);
        let old_vals: Vec<f64> = self.spectrum.as_ref().map_or(Vec::new(), |sp| sp.values[..k].to_vec());
        for i in 0..k {
            pairs.push((old_vals[i], old_u.col(i)));
        }
        for i in 0..k_extra {
            pairs.push((fresh.values[i], fresh.vectors.col(i)));
        }
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let mut vectors = DenseTallMatrix::empty(s);
        for p in &pairs {
            vectors.push_column(p.1)?;
        }
        values.push(fresh.values[k_extra]);
        let smallest = self
            .spectrum
            .as_ref()
            .map_or(fresh.smallest, |sp| sp.smallest.min(fresh.smallest));
        let residuals = vec![f64::NAN; values.len()];
        let merged = RitzSpectrum {
            values,
            vectors,
            residuals,
            smallest,
            steps: fresh.steps,
            accepted: fresh.accepted,
            restarts: fresh.restarts,
        };
        let (correction, lk1, lmin) =
            assemble(&self.c_factor, Some(&merged), k + k_extra, &self.options.theta, s)?;
        self.correction = correction;
        self.spectrum = Some(merged);
        self.options.k = k + k_extra;
        let st = &mut self.stats;
        st.rank = k + k_extra;
        st.theta = self.correction.theta;
        st.lambda_k_plus_1 = lk1;
        st.lambda_min = lmin;
        st.lanczos_steps += fresh.steps;
        st.fill_ratio = BuildStats::fill(st.nnz_b, st.nnz_c, s, st.rank, st.nnz_a);
        st.build_seconds += t.elapsed().as_secs_f64();
        Ok(self)
    }

    /// Grows the rank by `step` until `lambda_{k+1} <= 1 - 1/kappa`, the rank
    /// would exceed `max_rank`, or the interface is exhausted.
    pub fn improve_until(mut self, kappa: f64, step: usize, max_rank: usize) -> Result<Self> {
        if !(kappa > 1.0) || step == 0 {
            return Err(SlrError::InvalidArgument("need kappa > 1 and step > 0".into()));
        }
        let threshold = 1.0 - 1.0 / kappa;
        loop {
            let k = self.correction.rank();
            let lk1 = self.stats.lambda_k_plus_1.unwrap_or(0.0);
            if lk1 <= threshold || k + step > max_rank || k + step >= self.dd.s() {
                return Ok(self);
            }
            self = self.improve(step)?;
        }
    }
}

impl Preconditioner for SlrPreconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        self.apply_preconditioner(r)
    }
}

/// Smallest `k` with `lambda_{k+1} <= 1 - 1/kappa`, for values sorted descending.
pub fn required_rank(values: &[f64], kappa: f64) -> Result<usize> {
    if !(kappa > 1.0) {
        return Err(SlrError::InvalidArgument(format!("kappa must exceed 1, got {kappa}")));
    }
    let threshold = 1.0 - 1.0 / kappa;
    values
        .iter()
        .position(|&v| v <= threshold)
        .ok_or(SlrError::InsufficientSpectrum {
            threshold,
            available: values.len(),
        })
}
