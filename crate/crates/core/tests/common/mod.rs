#![allow(dead_code)]

use proptest::prelude::*;
use sparsetopk::{IsotonicProblem, PhiKind, Regularizer};

pub const PS: [f64; 2] = [2.0, 4.0 / 3.0];

pub fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

pub fn vector(len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0..5.0f64, len)
}

/// Shuffled vector whose sorted entries (or magnitudes) are at least `gap` apart.
pub fn gapped(len: std::ops::RangeInclusive<usize>, gap: f64, by_magnitude: bool) -> impl Strategy<Value = Vec<f64>> {
    len.prop_flat_map(move |n| {
        (-3.0..3.0f64, prop::collection::vec(gap..gap + 1.5, n), prop::collection::vec(any::<bool>(), n))
    })
    .prop_map(move |(start, steps, flips)| {
        let mut level = if by_magnitude { start.abs() + gap } else { start };
        steps
            .iter()
            .zip(&flips)
            .map(|(&step, &flip)| {
                let v = level;
                level += step;
                if by_magnitude && flip {
                    -v
                } else {
                    v
                }
            })
            .collect::<Vec<f64>>()
    })
    .prop_shuffle()
}

pub fn regularizer() -> impl Strategy<Value = Regularizer<f64>> {
    (prop::sample::select(PS.to_vec()), 0.05..3.0f64).prop_map(|(p, l)| Regularizer::new(p, l).unwrap())
}

pub fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Random isotonic problem; `w` may be negative only for the identity.
pub fn isotonic_problem(
    len: std::ops::RangeInclusive<usize>,
    phi: PhiKind,
    reg: impl Strategy<Value = Regularizer<f64>>,
) -> impl Strategy<Value = IsotonicProblem<f64>> {
    let w_low = if phi == PhiKind::Identity { -1.0 } else { 0.0 };
    (len.prop_flat_map(move |n| (prop::collection::vec(-4.0..4.0f64, n), prop::collection::vec(w_low..2.0f64, n))), reg)
        .prop_map(move |((s, w), reg)| IsotonicProblem::new(sorted_desc(s), sorted_desc(w), phi, reg).unwrap())
}

pub fn phi() -> impl Strategy<Value = PhiKind> {
    prop::sample::select(vec![PhiKind::Identity, PhiKind::HalfSquare, PhiKind::Absolute])
}
