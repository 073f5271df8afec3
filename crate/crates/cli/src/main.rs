use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use sparsetopk::{PhiKind, Solver};
use sparsetopk_cli::bench::{self, BenchConfig, BenchOp, BenchSolver};
use sparsetopk_cli::curve::{self, CurveConfig};
use sparsetopk_cli::eval::{run_eval, EvalDefaults};
use sparsetopk_cli::gradcheck::{run_gradcheck, GradOp, GradcheckConfig};

/// Sparse differentiable top-k operators.
#[derive(Parser)]
#[command(name = "sparsetopk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Io {
    /// Read from this file instead of standard input.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    /// Write to this file instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate newline-delimited JSON records.
    Eval {
        /// p used when a record has none.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// λ used when a record has none.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Solver used when a record has none: pav, dykstra or dual_bca.
        #[arg(long, default_value = "pav")]
        solver: Solver,
        #[command(flatten)]
        io: Io,
    },
    /// Sweep θ(s) = (3, 1, s - 1, s) and write s,hard,relaxed as CSV.
    Curve {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 4.0 / 3.0)]
        p: f64,
        #[arg(long, default_value_t = 0.3)]
        lambda: f64,
        #[arg(long, default_value = "identity")]
        phi: PhiKind,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        grid_start: f64,
        #[arg(long, default_value_t = 6.0, allow_negative_numbers = true)]
        grid_end: f64,
        /// Number of grid intervals.
        #[arg(long, default_value_t = 600)]
        grid_steps: usize,
        #[command(flatten)]
        io: Io,
    },
    /// Compare Jacobian products with central finite differences.
    Gradcheck {
        #[arg(long, default_value = "soft_topkmag")]
        op: GradOp,
        #[arg(long, default_value_t = 16)]
        n: usize,
        /// Defaults to max(1, n/4).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 50)]
        trials: usize,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        io: Io,
    },
    /// Time the hard and relaxed operators for several sizes.
    Bench {
        #[arg(long, value_delimiter = ',', default_value = "1000,10000,100000,1000000")]
        n_list: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        k_ratio: f64,
        #[arg(long, value_delimiter = ',', default_value = "hard,pav,dykstra")]
        solvers: Vec<BenchSolver>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// soft_topkmask or soft_topkmag.
        #[arg(long, default_value = "soft_topkmask")]
        op: BenchOp,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[command(flatten)]
        io: Io,
    },
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn open_input(path: &Option<PathBuf>) -> Result<Box<dyn BufRead>> {
    Ok(match path {
        Some(p) => Box::new(BufReader::new(File::open(p).with_context(|| format!("opening {}", p.display()))?)),
        None => Box::new(io::stdin().lock()),
    })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Eval { p, lambda, solver, io } => {
            let summary =
                run_eval(open_input(&io.input)?, open_output(&io.output)?, &EvalDefaults { p, lambda, solver })?;
            Ok(summary.exit_code() as u8)
        }
        Command::Curve { k, p, lambda, phi, grid_start, grid_end, grid_steps, io } => {
            let cfg = CurveConfig { k, p, lambda, phi, grid_start, grid_end, grid_steps };
            curve::write_csv(&curve::curve(&cfg)?, open_output(&io.output)?)?;
            Ok(0)
        }
        Command::Gradcheck { op, n, k, trials, p, lambda, seed, io } => {
            let report = run_gradcheck(&GradcheckConfig { op, n, k, trials, p, lambda, seed })?;
            let mut out = open_output(&io.output)?;
            writeln!(out, "{report}")?;
            out.flush()?;
            Ok(if report.passed { 0 } else { 3 })
        }
        Command::Bench { n_list, k_ratio, solvers, repeats, seed, op, p, lambda, io } => {
            let cfg = BenchConfig { n_list, k_ratio, solvers, repeats, seed, op, p, lambda };
            bench::write_csv(&bench::run_bench(&cfg)?, open_output(&io.output)?)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
