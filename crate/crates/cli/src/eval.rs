//! `eval`: one JSON object per input line in, one per line out.

use std::io::{BufRead, Write};

use serde::Deserialize;
use sparsetopk::{
    fy_topk_loss, lmo, relaxed_apply, soft_rank, soft_signed_topkmask, soft_sort, soft_topkmag, soft_topkmask, topk,
    topkmag, topkmask, LossConfig, OperatorSpec, PhiKind, Regularizer, Solver, Weights,
};

use crate::fmt::{json_array, json_matrix};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Record {
    pub op: String,
    pub x: Data,
    pub k: Option<usize>,
    pub w: Option<Vec<f64>>,
    pub phi: Option<String>,
    pub p: Option<f64>,
    pub lambda: Option<f64>,
    pub solver: Option<String>,
    /// Targets for `fy_loss`, shaped like `x`.
    pub target: Option<Data>,
}

/// A single vector or, for `fy_loss`, a batch of rows.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Data {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

/// Values used when a record leaves a field out.
#[derive(Debug, Clone, Copy)]
pub struct EvalDefaults {
    pub p: f64,
    pub lambda: f64,
    pub solver: Solver,
}

impl Default for EvalDefaults {
    fn default() -> Self {
        EvalDefaults { p: 2.0, lambda: 1.0, solver: Solver::Pav }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Vector(Vec<f64>),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub y: Output,
    pub value: Option<f64>,
}

impl Evaluation {
    fn vector(y: Vec<f64>) -> Self {
        Evaluation { y: Output::Vector(y), value: None }
    }

    pub fn to_json(&self) -> String {
        let y = match &self.y {
            Output::Vector(v) => json_array(v),
            Output::Matrix(m) => json_matrix(m),
        };
        match self.value {
            Some(v) => format!("{{\"y\":{y},\"value\":{}}}", crate::fmt::g17(v)),
            None => format!("{{\"y\":{y}}}"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalSummary {
    pub succeeded: usize,
    pub failed: usize,
}

impl EvalSummary {
    /// 0 unless every record failed, in which case 2.
    pub fn exit_code(&self) -> i32 {
        if self.failed > 0 && self.succeeded == 0 {
            2
        } else {
            0
        }
    }
}

fn required_k(rec: &Record) -> Result<usize, String> {
    rec.k.ok_or_else(|| format!("op '{}' needs k", rec.op))
}

fn vector(data: &Data, name: &str) -> Result<Vec<f64>, String> {
    match data {
        Data::Vector(v) => Ok(v.clone()),
        Data::Matrix(_) => Err(format!("{name} must be a flat array for this op")),
    }
}

fn rows(data: &Data) -> Vec<Vec<f64>> {
    match data {
        Data::Vector(v) => vec![v.clone()],
        Data::Matrix(m) => m.clone(),
    }
}

/// Evaluates one parsed record.
pub fn evaluate(rec: &Record, defaults: &EvalDefaults) -> Result<Evaluation, String> {
    let reg = || -> Result<Regularizer<f64>, String> {
        Regularizer::new(rec.p.unwrap_or(defaults.p), rec.lambda.unwrap_or(defaults.lambda)).map_err(|e| e.to_string())
    };
    let solver = match &rec.solver {
        Some(name) => name.parse::<Solver>().map_err(|e| e.to_string())?,
        None => defaults.solver,
    };
    let phi = match &rec.phi {
        Some(name) => name.parse::<PhiKind>().map_err(|e| e.to_string())?,
        None => PhiKind::Identity,
    };
    let s = |e: sparsetopk::Error| e.to_string();

    if rec.op == "fy_loss" {
        return fy_loss(rec, reg()?);
    }
    let x = vector(&rec.x, "x")?;
    let out = match rec.op.as_str() {
        "topkmask" => Evaluation::vector(topkmask(&x, required_k(rec)?).map_err(s)?),
        "topk" => Evaluation::vector(topk(&x, required_k(rec)?).map_err(s)?),
        "topkmag" => Evaluation::vector(topkmag(&x, required_k(rec)?).map_err(s)?),
        "soft_topkmask" => Evaluation::vector(soft_topkmask(&x, required_k(rec)?, reg()?, solver).map_err(s)?),
        "soft_topkmag" => Evaluation::vector(soft_topkmag(&x, required_k(rec)?, reg()?, solver).map_err(s)?),
        "soft_signed_topkmask" => {
            Evaluation::vector(soft_signed_topkmask(&x, required_k(rec)?, reg()?, solver).map_err(s)?)
        }
        "soft_sort" => Evaluation::vector(soft_sort(&x, reg()?).map_err(s)?),
        "soft_rank" => Evaluation::vector(soft_rank(&x, reg()?).map_err(s)?),
        "lmo" => {
            let w = rec.w.as_ref().ok_or("op 'lmo' needs w")?;
            let out = lmo(&x, w).map_err(s)?;
            Evaluation { y: Output::Vector(out.argmax), value: Some(out.value) }
        }
        "f_value" => {
            let weights = match (&rec.w, rec.k) {
                (Some(w), _) => Weights::Explicit(w.clone()),
                (None, Some(k)) => Weights::TopK(k),
                (None, None) => return Err("op 'f_value' needs w or k".into()),
            };
            let out = relaxed_apply(&x, &OperatorSpec::new(phi, reg()?, weights), solver).map_err(s)?;
            let value = out.value();
            Evaluation { y: Output::Vector(out.y), value: Some(value) }
        }
        other => return Err(format!("unknown op '{other}'")),
    };
    Ok(out)
}

/// Mean Fenchel-Young loss over the rows of `x` and its gradient.
fn fy_loss(rec: &Record, reg: Regularizer<f64>) -> Result<Evaluation, String> {
    let target = rec.target.as_ref().ok_or("op 'fy_loss' needs target")?;
    let cfg = LossConfig { k: required_k(rec)?, reg };
    let (xs, ts) = (rows(&rec.x), rows(target));
    if xs.len() != ts.len() {
        return Err(format!("x has {} rows but target has {}", xs.len(), ts.len()));
    }
    if xs.is_empty() {
        return Err("fy_loss needs at least one row".into());
    }
    let scale = 1.0 / xs.len() as f64;
    let mut value = 0.0;
    let mut grads = Vec::with_capacity(xs.len());
    for (x, t) in xs.iter().zip(&ts) {
        let loss = fy_topk_loss(x, t, &cfg).map_err(|e| e.to_string())?;
        value += scale * loss.value;
        grads.push(loss.gradient.into_iter().map(|g| scale * g).collect::<Vec<_>>());
    }
    let y = match rec.x {
        Data::Vector(_) => Output::Vector(grads.pop().expect("one row")),
        Data::Matrix(_) => Output::Matrix(grads),
    };
    Ok(Evaluation { y, value: Some(value) })
}

/// Parses and evaluates one input line, producing the output line.
pub fn eval_line(line: &str, defaults: &EvalDefaults) -> Result<String, String> {
    let rec: Record = serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    evaluate(&rec, defaults).map(|e| e.to_json())
}

fn error_json(msg: &str) -> String {
    format!("{{\"error\":{}}}", serde_json::to_string(msg).expect("strings serialize"))
}

/// Streams records from `input` to `output`; blank lines are skipped.
pub fn run_eval<R: BufRead, W: Write>(
    input: R,
    mut output: W,
    defaults: &EvalDefaults,
) -> std::io::Result<EvalSummary> {
    let mut summary = EvalSummary::default();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match eval_line(&line, defaults) {
            Ok(out) => {
                summary.succeeded += 1;
                writeln!(output, "{out}")?;
            }
            Err(msg) => {
                summary.failed += 1;
                writeln!(output, "{}", error_json(&msg))?;
            }
        }
    }
    output.flush()?;
    Ok(summary)
}
