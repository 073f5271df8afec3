//! `gradcheck`: analytic Jacobian products against central differences.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Result};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sparsetopk::{
    relaxed_apply, reversing, topkmask, JacobianPlan, OperatorSpec, PhiKind, Regularizer, RelaxedOutput, Solver,
    Weights,
};
use sparsetopk_testkit::fd_jacobian;

pub const THRESHOLD: f64 = 1e-4;
pub const ADJOINT_TOL: f64 = 1e-10;
/// Smallest gap between sorted coordinates of generated inputs.
pub const MIN_GAP: f64 = 1e-2;
/// Give up after this many inputs sitting on a partition change.
const MAX_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradOp {
    SoftTopkmask,
    SoftTopkmag,
    SoftSignedTopkmask,
    SoftRank,
    Topkmask,
}

impl GradOp {
    pub fn name(self) -> &'static str {
        match self {
            GradOp::SoftTopkmask => "soft_topkmask",
            GradOp::SoftTopkmag => "soft_topkmag",
            GradOp::SoftSignedTopkmask => "soft_signed_topkmask",
            GradOp::SoftRank => "soft_rank",
            GradOp::Topkmask => "topkmask",
        }
    }

    fn phi(self) -> PhiKind {
        match self {
            GradOp::SoftTopkmag => PhiKind::HalfSquare,
            GradOp::SoftSignedTopkmask => PhiKind::Absolute,
            _ => PhiKind::Identity,
        }
    }
}

impl fmt::Display for GradOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GradOp {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "soft_topkmask" => GradOp::SoftTopkmask,
            "soft_topkmag" => GradOp::SoftTopkmag,
            "soft_signed_topkmask" => GradOp::SoftSignedTopkmask,
            "soft_rank" => GradOp::SoftRank,
            "topkmask" => GradOp::Topkmask,
            other => bail!("gradcheck does not support op '{other}'"),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GradcheckConfig {
    pub op: GradOp,
    pub n: usize,
    /// Defaults to `max(1, n / 4)`.
    pub k: Option<usize>,
    pub trials: usize,
    pub p: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        GradcheckConfig { op: GradOp::SoftTopkmag, n: 16, k: None, trials: 50, p: 2.0, lambda: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckReport {
    pub op: GradOp,
    pub trials: usize,
    /// Worst `max_ij |J - J_fd| / max(1, max_ij |J_fd|)` over trials and both products.
    pub max_rel_err: f64,
    /// Worst `|⟨g, J t⟩ - ⟨Jᵀ g, t⟩|`.
    pub max_adjoint_err: f64,
    /// Inputs redrawn because the block partition changed within one step.
    pub resampled: usize,
    pub passed: bool,
    pub note: Option<String>,
}

impl fmt::Display for GradcheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "op: {}", self.op)?;
        writeln!(f, "trials: {}", self.trials)?;
        writeln!(f, "max_rel_err: {:.3e}", self.max_rel_err)?;
        writeln!(f, "max_adjoint_err: {:.3e}", self.max_adjoint_err)?;
        writeln!(f, "resampled: {}", self.resampled)?;
        if let Some(note) = &self.note {
            writeln!(f, "note: {note}")?;
        }
        write!(f, "{} (threshold {THRESHOLD:e})", if self.passed { "PASS" } else { "FAIL" })
    }
}

/// Random input whose sort key (`x` or `|x|`) has gaps of at least [`MIN_GAP`].
pub fn gapped_input<R: Rng>(rng: &mut R, n: usize, by_magnitude: bool) -> Vec<f64> {
    let mut level = if by_magnitude { MIN_GAP + rng.random::<f64>() * 0.2 } else { -1.5 + rng.random::<f64>() };
    let mut x = Vec::with_capacity(n);
    for _ in 0..n {
        x.push(level);
        level += MIN_GAP + rng.random::<f64>() * 3.0 / n as f64;
    }
    if by_magnitude {
        for v in &mut x {
            if rng.random::<bool>() {
                *v = -*v;
            }
        }
    }
    x.shuffle(rng);
    x
}

fn random_direction<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn run_gradcheck(cfg: &GradcheckConfig) -> Result<GradcheckReport> {
    if cfg.n == 0 {
        bail!("n must be positive");
    }
    let k = cfg.k.unwrap_or((cfg.n / 4).max(1));
    let reg = Regularizer::new(cfg.p, cfg.lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (mut worst, mut worst_adj) = (0.0_f64, 0.0_f64);

    let mut resampled = 0;
    let step_for = |x: &[f64]| x.iter().map(|&v| 1e-6 * v.abs().max(1.0)).fold(0.0, f64::max);

    for _ in 0..cfg.trials {
        // the Jacobian jumps where blocks merge or clamp; such points are redrawn
        let x = loop {
            let x = gapped_input(&mut rng, cfg.n, cfg.op.phi().is_even());
            if cfg.op == GradOp::Topkmask || stable_partition(cfg.op, &x, k, reg, step_for(&x))? {
                break x;
            }
            resampled += 1;
            if resampled > MAX_RESAMPLES {
                bail!("more than {MAX_RESAMPLES} inputs landed on a partition change");
            }
        };
        let step = step_for(&x);

        let (analytic_cols, analytic_rows, fd, adj) = if cfg.op == GradOp::Topkmask {
            let fd = fd_jacobian(|z: &[f64]| topkmask(z, k), &x, step)?;
            let zero = vec![vec![0.0; cfg.n]; cfg.n];
            (zero.clone(), zero, fd, 0.0)
        } else {
            let (input, spec, sign) = operator(cfg.op, &x, k, reg);
            let out = relaxed_apply(&input, &spec, Solver::Pav)?;
            let plan = JacobianPlan::new(&out);
            let basis = |j: usize| {
                let mut e = vec![0.0; cfg.n];
                e[j] = 1.0;
                e
            };
            // columns J e_j and rows e_iᵀ J, mapped back through the input sign
            let mut cols = Vec::with_capacity(cfg.n);
            let mut rows = Vec::with_capacity(cfg.n);
            for j in 0..cfg.n {
                cols.push(plan.jvp(&basis(j))?.into_iter().map(|v| sign * v).collect::<Vec<_>>());
                rows.push(plan.vjp(&basis(j))?.into_iter().map(|v| sign * v).collect::<Vec<_>>());
            }
            let fd = fd_jacobian(
                |z: &[f64]| {
                    let (input, spec, _) = operator(cfg.op, z, k, reg);
                    Ok(relaxed_apply(&input, &spec, Solver::Pav)?.y)
                },
                &x,
                step,
            )?;
            let g = random_direction(&mut rng, cfg.n);
            let t = random_direction(&mut rng, cfg.n);
            let adj = (dot(&g, &plan.jvp(&t)?) - dot(&plan.vjp(&g)?, &t)).abs();
            (cols, rows, fd, adj)
        };

        let scale = fd.iter().flatten().fold(1.0_f64, |m, v| m.max(v.abs()));
        for i in 0..cfg.n {
            for j in 0..cfg.n {
                let f = fd[i][j];
                worst = worst.max((analytic_cols[j][i] - f).abs() / scale);
                worst = worst.max((analytic_rows[i][j] - f).abs() / scale);
            }
        }
        worst_adj = worst_adj.max(adj);
    }

    let note =
        (cfg.op == GradOp::Topkmask).then(|| "hard operator: Jacobian is identically zero away from ties".to_string());
    Ok(GradcheckReport {
        op: cfg.op,
        trials: cfg.trials,
        max_rel_err: worst,
        max_adjoint_err: worst_adj,
        resampled,
        passed: worst <= THRESHOLD && worst_adj <= ADJOINT_TOL,
        note,
    })
}

fn partition(out: &RelaxedOutput<f64>) -> Vec<(usize, bool)> {
    out.solution.blocks.iter().map(|b| (b.end, b.clamped)).collect()
}

/// Whether the block partition is the same at every finite-difference probe.
fn stable_partition(op: GradOp, x: &[f64], k: usize, reg: Regularizer<f64>, step: f64) -> Result<bool> {
    let solve = |z: &[f64]| -> Result<Vec<(usize, bool)>> {
        let (input, spec, _) = operator(op, z, k, reg);
        Ok(partition(&relaxed_apply(&input, &spec, Solver::Pav)?))
    };
    let base = solve(x)?;
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        for delta in [step, -step] {
            probe[j] = x[j] + delta;
            if solve(&probe)? != base {
                return Ok(false);
            }
        }
        probe[j] = x[j];
    }
    Ok(true)
}

/// Input, spec and chain-rule sign so that the operator equals `relaxed_apply(input, spec)`.
fn operator(op: GradOp, x: &[f64], k: usize, reg: Regularizer<f64>) -> (Vec<f64>, OperatorSpec<f64>, f64) {
    match op {
        GradOp::SoftRank => {
            let neg = x.iter().map(|v| -v).collect();
            let spec = OperatorSpec::new(PhiKind::Identity, reg, Weights::Explicit(reversing(x.len())));
            (neg, spec, -1.0)
        }
        _ => (x.to_vec(), OperatorSpec::topk(op.phi(), reg, k), 1.0),
    }
}
