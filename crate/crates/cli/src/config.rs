//! Run configuration: matrix sources, solver and preconditioner choices, and
//! the flat `key=value` format shared by config files and bench suites.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use slr_core::slr::ThetaPolicy;
use slr_core::sparse::{gen_laplacian_2d, gen_laplacian_3d, read_matrix_market};
use slr_core::{GridShape, SymSparseMatrix};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum MatrixSource {
    MatrixMarket(PathBuf),
    Lap2d { nx: usize, ny: usize, shift: f64 },
    Lap3d { nx: usize, ny: usize, nz: usize, shift: f64 },
}

impl MatrixSource {
    pub fn load(&self) -> Result<SymSparseMatrix> {
        Ok(match self {
            Self::MatrixMarket(p) => read_matrix_market(p)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
            Self::Lap2d { nx, ny, shift } => gen_laplacian_2d(*nx, *ny, *shift)?,
            Self::Lap3d { nx, ny, nz, shift } => gen_laplacian_3d(*nx, *ny, *nz, *shift)?,
        })
    }

    /// Grid layout for generated problems.
    pub fn grid(&self) -> Option<GridShape> {
        match *self {
            Self::MatrixMarket(_) => None,
            Self::Lap2d { nx, ny, .. } => Some(GridShape::new_2d(nx, ny)),
            Self::Lap3d { nx, ny, nz, .. } => Some(GridShape::new_3d(nx, ny, nz)),
        }
    }

    /// Short label for report rows.
    pub fn label(&self) -> String {
        match self {
            Self::MatrixMarket(p) => p
                .file_stem()
                .map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
            Self::Lap2d { nx, ny, shift } => format!("lap2d:{nx}x{ny}:{shift}"),
            Self::Lap3d { nx, ny, nz, shift } => format!("lap3d:{nx}x{ny}x{nz}:{shift}"),
        }
    }
}

impl FromStr for MatrixSource {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| CliError::Config(format!("matrix source '{s}' needs a kind prefix")))?;
        match kind {
            "mm" => Ok(Self::MatrixMarket(PathBuf::from(rest))),
            "lap2d" | "lap3d" => {
                let dims = if kind == "lap2d" { 2 } else { 3 };
                let mut v: Vec<f64> = rest
                    .split(',')
                    .map(|p| {
                        p.trim()
                            .parse()
                            .map_err(|_| CliError::Config(format!("bad number '{p}' in '{s}'")))
                    })
                    .collect::<Result<_>>()?;
                if v.len() == dims {
                    v.push(0.0);
                }
                if v.len() != dims + 1 {
                    return Err(CliError::Config(format!(
                        "{kind} expects {dims} grid sizes and an optional shift, got '{s}'"
                    )));
                }
                let mut d = [1usize; 3];
                for (slot, &x) in d.iter_mut().zip(&v[..dims]) {
                    if !(x >= 1.0 && x.fract() == 0.0) {
                        return Err(CliError::Config(format!("bad grid size {x} in '{s}'")));
                    }
                    *slot = x as usize;
                }
                let shift = v[dims];
                Ok(if dims == 2 {
                    Self::Lap2d { nx: d[0], ny: d[1], shift }
                } else {
                    Self::Lap3d { nx: d[0], ny: d[1], nz: d[2], shift }
                })
            }
            other => Err(CliError::Config(format!("unknown matrix kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    Pcg,
    Gmres,
}

impl FromStr for Solver {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pcg" | "cg" => Ok(Self::Pcg),
            "gmres" => Ok(Self::Gmres),
            _ => Err(CliError::Config(format!("unknown solver '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrecondKind {
    Slr,
    Ict,
    Ildlt,
    None,
}

impl PrecondKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Slr => "slr",
            Self::Ict => "ict",
            Self::Ildlt => "ildlt",
            Self::None => "none",
        }
    }
}

impl FromStr for PrecondKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slr" => Ok(Self::Slr),
            "ict" => Ok(Self::Ict),
            "ildlt" => Ok(Self::Ildlt),
            "none" => Ok(Self::None),
            _ => Err(CliError::Config(format!("unknown preconditioner '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionChoice {
    /// Geometric cuts for generated grids when `nd` is a power of two,
    /// multilevel bisection otherwise.
    Auto,
    Multilevel,
    Geometric,
}

impl FromStr for PartitionChoice {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(Self::Auto),
            "multilevel" => Ok(Self::Multilevel),
            "geometric" => Ok(Self::Geometric),
            _ => Err(CliError::Config(format!("unknown partitioner '{s}'"))),
        }
    }
}

/// `lk1`, `ls`, `zero`, `grigori:<eps>` or a number in `[0, 1)`.
pub fn parse_theta(s: &str) -> Result<ThetaPolicy> {
    match s {
        "lk1" | "lambda_k_plus_1" => Ok(ThetaPolicy::LambdaKPlus1),
        "ls" | "lambda_s" => Ok(ThetaPolicy::LambdaS),
        "zero" => Ok(ThetaPolicy::Zero),
        _ => {
            if let Some(eps) = s.strip_prefix("grigori:") {
                let e: f64 = eps
                    .parse()
                    .map_err(|_| CliError::Config(format!("bad grigori parameter '{eps}'")))?;
                return Ok(ThetaPolicy::Grigori(e));
            }
            let t: f64 = s
                .parse()
                .map_err(|_| CliError::Config(format!("unknown theta policy '{s}'")))?;
            if !(0.0..1.0).contains(&t) {
                return Err(CliError::Config(format!("theta {t} outside [0, 1)")));
            }
            Ok(ThetaPolicy::Fixed(t))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub matrix: MatrixSource,
    pub solver: Solver,
    pub precond: PrecondKind,
    /// Number of subdomains.
    pub nd: usize,
    pub rank: usize,
    pub theta: ThetaPolicy,
    pub droptol_b: f64,
    pub droptol_c: f64,
    pub tol: f64,
    pub maxit: usize,
    pub restart: usize,
    pub seed: u64,
    pub partitioner: PartitionChoice,
    pub lanczos_steps: Option<usize>,
    /// Report zero timings so that output is reproducible byte for byte.
    pub no_timing: bool,
    pub history: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(matrix: MatrixSource) -> Self {
        Self {
            matrix,
            solver: Solver::Pcg,
            precond: PrecondKind::Slr,
            nd: 8,
            rank: 16,
            theta: ThetaPolicy::LambdaKPlus1,
            droptol_b: 1e-3,
            droptol_c: 1e-3,
            tol: 1e-8,
            maxit: 300,
            restart: 40,
            seed: 0,
            partitioner: PartitionChoice::Auto,
            lanczos_steps: None,
            no_timing: false,
            history: None,
        }
    }

    /// Builds a config from `key=value` pairs; `matrix` is required.
    pub fn from_pairs(pairs: &BTreeMap<String, String>) -> Result<Self> {
        let m = pairs
            .get("matrix")
            .ok_or_else(|| CliError::Config("missing 'matrix'".into()))?;
        let mut cfg = Self::new(m.parse()?);
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| CliError::Config(format!("bad value '{v}' for '{key}'")))
        }
        match key {
            "matrix" => self.matrix = value.parse()?,
            "solver" => self.solver = value.parse()?,
            "precond" => self.precond = value.parse()?,
            "nd" => self.nd = num(key, value)?,
            "rank" => self.rank = num(key, value)?,
            "theta" => self.theta = parse_theta(value)?,
            "droptol-b" => self.droptol_b = num(key, value)?,
            "droptol-c" => self.droptol_c = num(key, value)?,
            "tol" => self.tol = num(key, value)?,
            "maxit" => self.maxit = num(key, value)?,
            "restart" => self.restart = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "partitioner" => self.partitioner = value.parse()?,
            "lanczos-steps" => self.lanczos_steps = Some(num(key, value)?),
            "no-timing" => self.no_timing = num(key, value)?,
            "history" => self.history = Some(PathBuf::from(value)),
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.nd == 0 {
            return Err(CliError::Config("nd must be at least 1".into()));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Config("tol must be positive".into()));
        }
        if self.solver == Solver::Pcg && self.precond == PrecondKind::Ildlt {
            return Err(CliError::Config(
                "pcg needs a positive definite preconditioner; use gmres with ildlt".into(),
            ));
        }
        if self.solver == Solver::Gmres && self.restart == 0 {
            return Err(CliError::Config("restart must be positive".into()));
        }
        Ok(())
    }
}

/// Parses `key=value` tokens. Blank input yields an empty map.
pub fn parse_pairs<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for tok in tokens {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("expected key=value, got '{tok}'")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

/// Reads a config file: one `key=value` per line, `#` starts a comment.
pub fn read_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    parse_pairs(
        text.lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty()),
    )
}
