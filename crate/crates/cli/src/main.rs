use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use slr_cli::config::{read_config_file, RunConfig};
use slr_cli::run::{analyze, bench, solve, AnalyzeMode, SOLVE_HEADER};
use slr_cli::{CliError, Result};
use slr_core::sparse::write_matrix_market_to;

#[derive(Parser)]
#[command(name = "slr", version, about = "Schur low-rank preconditioned sparse solvers")]
struct Cli {
    /// Worker threads for subdomain solves.
    #[arg(long, global = true, env = "SLR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated or loaded matrix in Matrix Market format.
    Gen {
        #[arg(long)]
        matrix: String,
        /// Output file; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a preconditioner, solve `A x = A 1` and print one CSV row.
    Solve {
        #[command(flatten)]
        run: RunArgs,
        /// Residual history CSV.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Dense spectral diagnostics.
    Analyze {
        #[arg(value_enum)]
        mode: Mode,
        /// Condition number target for `rank`.
        kappa: Option<f64>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run every line of a suite file (`key=value` pairs per line).
    Bench {
        suite: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_timing: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Decay,
    Kappa,
    Model,
    Rank,
}

#[derive(Args)]
struct RunArgs {
    /// `mm:<path>`, `lap2d:nx,ny[,c]` or `lap3d:nx,ny,nz[,c]`.
    #[arg(long)]
    matrix: Option<String>,
    /// `pcg` or `gmres`.
    #[arg(long)]
    solver: Option<String>,
    /// `slr`, `ict`, `ildlt` or `none`.
    #[arg(long)]
    precond: Option<String>,
    /// Number of subdomains.
    #[arg(long)]
    nd: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    /// `lk1`, `ls`, `zero`, `grigori:<eps>` or a fixed value.
    #[arg(long)]
    theta: Option<String>,
    #[arg(long)]
    droptol_b: Option<f64>,
    #[arg(long)]
    droptol_c: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    #[arg(long)]
    restart: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// `auto`, `multilevel` or `geometric`.
    #[arg(long)]
    partitioner: Option<String>,
    #[arg(long)]
    lanczos_steps: Option<usize>,
    /// File of `key=value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print zero timings for byte-reproducible output.
    #[arg(long)]
    no_timing: bool,
}

impl RunArgs {
    fn config(&self) -> Result<RunConfig> {
        let mut pairs: BTreeMap<String, String> = match &self.config {
            Some(p) => read_config_file(p)?,
            None => BTreeMap::new(),
        };
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.insert(k.to_string(), v);
            }
        };
        put("matrix", self.matrix.clone());
        put("solver", self.solver.clone());
        put("precond", self.precond.clone());
        put("nd", self.nd.map(|v| v.to_string()));
        put("rank", self.rank.map(|v| v.to_string()));
        put("theta", self.theta.clone());
        put("droptol-b", self.droptol_b.map(|v| v.to_string()));
        put("droptol-c", self.droptol_c.map(|v| v.to_string()));
        put("tol", self.tol.map(|v| v.to_string()));
        put("maxit", self.maxit.map(|v| v.to_string()));
        put("restart", self.restart.map(|v| v.to_string()));
        put("seed", self.seed.map(|v| v.to_string()));
        put("partitioner", self.partitioner.clone());
        put("lanczos-steps", self.lanczos_steps.map(|v| v.to_string()));
        if self.no_timing {
            put("no-timing", Some("true".into()));
        }
        RunConfig::from_pairs(&pairs)
    }

    fn writer(&self) -> Result<Box<dyn Write>> {
        output(self.out.as_ref())
    }
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// Exit status: 0 on success, 2 when a solve did not converge.
fn run(cli: Cli) -> Result<u8> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Gen { matrix, out } => {
            let a = matrix.parse::<slr_cli::MatrixSource>()?.load()?;
            let mut w = output(out.as_ref())?;
            write_matrix_market_to(&mut w, &a)?;
            w.flush()?;
            Ok(0)
        }
        Command::Solve { run, history } => {
            let mut cfg = run.config()?;
            cfg.history = history.or(cfg.history);
            let row = solve(&cfg)?;
            let mut w = run.writer()?;
            writeln!(w, "{SOLVE_HEADER}")?;
            writeln!(w, "{}", row.csv(!cfg.no_timing))?;
            w.flush()?;
            Ok(if row.converged { 0 } else { 2 })
        }
        Command::Analyze { mode, kappa, run } => {
            let cfg = run.config()?;
            let mode = match mode {
                Mode::Decay => AnalyzeMode::Decay,
                Mode::Kappa => AnalyzeMode::Kappa,
                Mode::Model => AnalyzeMode::Model,
                Mode::Rank => AnalyzeMode::Rank(
                    kappa.ok_or_else(|| CliError::Config("rank mode needs a kappa target".into()))?,
                ),
            };
            let mut w = run.writer()?;
            analyze(&cfg, mode, &mut w)?;
            w.flush()?;
            Ok(0)
        }
        Command::Bench { suite, out, no_timing } => {
            let text = std::fs::read_to_string(&suite)
                .map_err(|e| CliError::Input(format!("{}: {e}", suite.display())))?;
            let mut w = output(out.as_ref())?;
            bench(&text, &mut w, !no_timing)?;
            w.flush()?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
