//! `bench`: median wall-clock time of the relaxed operators per solver.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsetopk::{relaxed_apply, topkmag, topkmask, OperatorSpec, PhiKind, Regularizer, Solver};

use crate::fmt::g17;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchSolver {
    /// The non-differentiable operator, as a baseline.
    Hard,
    Relaxed(Solver),
}

impl BenchSolver {
    pub fn name(&self) -> &'static str {
        match self {
            BenchSolver::Hard => "hard",
            BenchSolver::Relaxed(s) => s.name(),
        }
    }
}

impl fmt::Display for BenchSolver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchSolver {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "hard" {
            return Ok(BenchSolver::Hard);
        }
        Ok(BenchSolver::Relaxed(s.parse()?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchOp {
    SoftTopkmask,
    SoftTopkmag,
}

impl BenchOp {
    fn phi(self) -> PhiKind {
        match self {
            BenchOp::SoftTopkmask => PhiKind::Identity,
            BenchOp::SoftTopkmag => PhiKind::HalfSquare,
        }
    }
}

impl FromStr for BenchOp {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "soft_topkmask" => Ok(BenchOp::SoftTopkmask),
            "soft_topkmag" => Ok(BenchOp::SoftTopkmag),
            other => bail!("bench does not support op '{other}'"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub n_list: Vec<usize>,
    pub k_ratio: f64,
    pub solvers: Vec<BenchSolver>,
    pub repeats: usize,
    pub seed: u64,
    pub op: BenchOp,
    pub p: f64,
    pub lambda: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_list: vec![1_000, 10_000, 100_000, 1_000_000],
            k_ratio: 0.1,
            solvers: vec![
                BenchSolver::Hard,
                BenchSolver::Relaxed(Solver::Pav),
                BenchSolver::Relaxed(Solver::dykstra()),
            ],
            repeats: 5,
            seed: 0,
            op: BenchOp::SoftTopkmask,
            p: 2.0,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub n: usize,
    pub k: usize,
    pub solver: String,
    pub median_seconds: f64,
    pub max_abs_diff_vs_pav: f64,
}

/// `k = ⌈ratio · n⌉`, kept within `1..=n`.
pub fn k_for(n: usize, ratio: f64) -> usize {
    ((ratio * n as f64).ceil() as usize).clamp(1, n)
}

/// Benchmark input: i.i.d. uniform on `[0, n)`.
pub fn bench_input(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    (0..n).map(|_| rng.random::<f64>() * n as f64).collect()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

fn evaluate(op: BenchOp, solver: BenchSolver, x: &[f64], spec: &OperatorSpec<f64>, k: usize) -> Result<Vec<f64>> {
    Ok(match solver {
        BenchSolver::Hard => match op {
            BenchOp::SoftTopkmask => topkmask(x, k)?,
            BenchOp::SoftTopkmag => topkmag(x, k)?,
        },
        BenchSolver::Relaxed(s) => relaxed_apply(x, spec, s)?.y,
    })
}

/// Median seconds over `repeats` calls, plus the last output.
pub fn time_op(
    op: BenchOp,
    solver: BenchSolver,
    x: &[f64],
    spec: &OperatorSpec<f64>,
    k: usize,
    repeats: usize,
) -> Result<(f64, Vec<f64>)> {
    let mut times = Vec::with_capacity(repeats);
    let mut y = Vec::new();
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        y = evaluate(op, solver, x, spec, k)?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok((median(times), y))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    if cfg.n_list.contains(&0) {
        bail!("n-list entries must be positive");
    }
    let reg = Regularizer::new(cfg.p, cfg.lambda)?;
    let mut records = Vec::new();
    for &n in &cfg.n_list {
        let k = k_for(n, cfg.k_ratio);
        let x = bench_input(n, cfg.seed);
        let spec = OperatorSpec::topk(cfg.op.phi(), reg, k);
        let reference = relaxed_apply(&x, &spec, Solver::Pav)?.y;
        for &solver in &cfg.solvers {
            let (median_seconds, y) = time_op(cfg.op, solver, &x, &spec, k, cfg.repeats)?;
            let diff = y.iter().zip(&reference).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
            records.push(BenchRecord {
                n,
                k,
                solver: solver.name().to_string(),
                median_seconds,
                max_abs_diff_vs_pav: diff,
            });
        }
    }
    Ok(records)
}

pub fn write_csv<W: Write>(records: &[BenchRecord], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,k,solver,median_seconds,max_abs_diff_vs_pav")?;
    for r in records {
        writeln!(out, "{},{},{},{},{}", r.n, r.k, r.solver, g17(r.median_seconds), g17(r.max_abs_diff_vs_pav))?;
    }
    out.flush()
}
