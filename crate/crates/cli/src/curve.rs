//! `curve`: sweeps `θ(s) = (3, 1, s - 1, s)` and records the mass that the
//! hard and relaxed masks put on the last two coordinates.

use std::io::Write;

use anyhow::{bail, Result};
use sparsetopk::{relaxed_apply, topkmask, OperatorSpec, PhiKind, Regularizer, Solver};

use crate::fmt::g17;

#[derive(Debug, Clone, Copy)]
pub struct CurveConfig {
    pub k: usize,
    pub p: f64,
    pub lambda: f64,
    pub phi: PhiKind,
    pub grid_start: f64,
    pub grid_end: f64,
    /// Number of grid intervals; the sweep has `grid_steps + 1` points.
    pub grid_steps: usize,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            k: 2,
            p: 4.0 / 3.0,
            lambda: 0.3,
            phi: PhiKind::Identity,
            grid_start: 0.0,
            grid_end: 6.0,
            grid_steps: 600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub s: f64,
    pub hard: f64,
    pub relaxed: f64,
}

pub fn theta(s: f64) -> [f64; 4] {
    [3.0, 1.0, s - 1.0, s]
}

pub fn curve(cfg: &CurveConfig) -> Result<Vec<CurvePoint>> {
    if cfg.grid_steps == 0 {
        bail!("grid-steps must be positive");
    }
    if !(cfg.grid_start.is_finite() && cfg.grid_end.is_finite()) {
        bail!("grid bounds must be finite");
    }
    let spec = OperatorSpec::topk(cfg.phi, Regularizer::new(cfg.p, cfg.lambda)?, cfg.k);
    let width = cfg.grid_end - cfg.grid_start;
    (0..=cfg.grid_steps)
        .map(|i| {
            let s = cfg.grid_start + width * i as f64 / cfg.grid_steps as f64;
            let x = theta(s);
            let hard = topkmask(&x, cfg.k)?;
            let relaxed = relaxed_apply(&x, &spec, Solver::Pav)?.y;
            Ok(CurvePoint { s, hard: hard[2] + hard[3], relaxed: relaxed[2] + relaxed[3] })
        })
        .collect()
}

pub fn write_csv<W: Write>(points: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "s,hard,relaxed")?;
    for pt in points {
        writeln!(out, "{},{},{}", g17(pt.s), g17(pt.hard), g17(pt.relaxed))?;
    }
    out.flush()
}
