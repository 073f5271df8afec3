//! Brute-force references for `sparsetopk`.
//!
//! Everything here is deliberately naive: permutations are enumerated,
//! block partitions are enumerated, derivatives are finite differences.
//! None of it reuses the solver code it is meant to check.

use itertools::Itertools;
use sparsetopk::{Block, Error, IsotonicProblem, IsotonicSolution, LmoOutput, PhiKind, Result, Scalar};

pub const MAX_LMO_LEN: usize = 8;
pub const MAX_ISOTONIC_LEN: usize = 12;

/// Exhaustive `max_π ⟨x, w_π⟩` over all `n!` permutations.
///
/// Among maximizers the lexicographically largest `y` wins, which is the
/// assignment a stable descending sort produces.
pub fn brute_lmo<T: Scalar>(x: &[T], w: &[T]) -> Result<LmoOutput<T>> {
    let n = x.len();
    if n != w.len() {
        return Err(Error::LengthMismatch(n, w.len()));
    }
    if n == 0 || n > MAX_LMO_LEN {
        return Err(Error::InvalidArgument(format!("brute_lmo needs 1 <= n <= {MAX_LMO_LEN}, got {n}")));
    }
    let scale: f64 = 1.0 + x.iter().zip(w).map(|(a, b)| (a.as_f64() * b.as_f64()).abs()).sum::<f64>();
    let mut best: Option<(f64, Vec<T>)> = None;
    for perm in (0..n).permutations(n) {
        let y: Vec<T> = perm.iter().map(|&j| w[j]).collect();
        let value: f64 = x.iter().zip(&y).map(|(a, b)| a.as_f64() * b.as_f64()).sum();
        let better = match &best {
            None => true,
            Some((v, incumbent)) => {
                if value > v + 1e-13 * scale {
                    true
                } else if value >= v - 1e-13 * scale {
                    y.iter().zip(incumbent).find(|(a, b)| a != b).is_some_and(|(a, b)| a > b)
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((value, y));
        }
    }
    let (_, argmax) = best.expect("n >= 1");
    let value = x.iter().zip(&argmax).map(|(&a, &b)| a * b).sum();
    Ok(LmoOutput { value, argmax })
}

/// `Σ_i h_i(v_i)` evaluated from scratch.
pub fn isotonic_objective<T: Scalar>(prob: &IsotonicProblem<T>, v: &[T]) -> f64 {
    let (s, w) = (prob.s(), prob.w());
    (0..v.len())
        .map(|i| conj(prob, s[i].as_f64() - v[i].as_f64()) + w[i].as_f64() * phi_value(prob.phi(), v[i].as_f64()))
        .sum()
}

fn exponent<T: Scalar>(prob: &IsotonicProblem<T>) -> (f64, f64) {
    let p = prob.reg().p().as_f64();
    (p / (p - 1.0), prob.reg().lambda().as_f64())
}

fn conj<T: Scalar>(prob: &IsotonicProblem<T>, t: f64) -> f64 {
    let (q, lambda) = exponent(prob);
    lambda.powf(1.0 - q) * t.abs().powf(q) / q
}

/// `φ` as it enters the isotonic objective; `|v|` only ever meets `v >= 0`.
fn phi_value(phi: PhiKind, v: f64) -> f64 {
    match phi {
        PhiKind::HalfSquare => 0.5 * v * v,
        PhiKind::Identity | PhiKind::Absolute => v,
    }
}

fn phi_slope(phi: PhiKind, v: f64) -> f64 {
    match phi {
        PhiKind::HalfSquare => v,
        PhiKind::Identity | PhiKind::Absolute => 1.0,
    }
}

/// Minimizer of `Σ_{i∈B} h_i(γ)`, optionally restricted to `γ >= 0`.
///
/// The block objective is convex, so its derivative is bisected; value-based
/// searches lose too much accuracy when `q > 2` flattens the minimum.
fn block_minimizer<T: Scalar>(prob: &IsotonicProblem<T>, range: std::ops::Range<usize>, nonneg: bool) -> f64 {
    let (q, lambda) = exponent(prob);
    let c = lambda.powf(1.0 - q);
    let s: Vec<f64> = prob.s()[range.clone()].iter().map(|v| v.as_f64()).collect();
    let w: Vec<f64> = prob.w()[range].iter().map(|v| v.as_f64()).collect();
    let slope = |g: f64| -> f64 {
        s.iter()
            .zip(&w)
            .map(|(&si, &wi)| {
                let t = g - si;
                c * t.signum() * t.abs().powf(q - 1.0) + wi * phi_slope(prob.phi(), g)
            })
            .sum()
    };
    if nonneg && slope(0.0) >= 0.0 {
        return 0.0;
    }
    let centre = s.iter().sum::<f64>() / s.len() as f64;
    let mut step = 1.0;
    let (mut lo, mut hi) = (centre - step, centre + step);
    while slope(lo) > 0.0 {
        step *= 2.0;
        lo = centre - step;
    }
    step = 1.0;
    while slope(hi) < 0.0 {
        step *= 2.0;
        hi = centre + step;
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let g = 0.5 * (lo + hi);
    if nonneg {
        g.max(0.0)
    } else {
        g
    }
}

fn brute_partitions<T: Scalar>(prob: &IsotonicProblem<T>, nonneg: bool) -> Result<IsotonicSolution<T>> {
    let n = prob.len();
    if n == 0 || n > MAX_ISOTONIC_LEN {
        return Err(Error::InvalidArgument(format!("brute_isotonic needs 1 <= n <= {MAX_ISOTONIC_LEN}, got {n}")));
    }
    // minimizer for every contiguous interval a..b, indexed [a][b - a - 1]
    let gamma: Vec<Vec<f64>> =
        (0..n).map(|a| (a + 1..=n).map(|b| block_minimizer(prob, a..b, nonneg)).collect()).collect();

    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        // bit i set means a cut between coordinates i and i+1
        let mut bounds = Vec::new();
        let mut start = 0;
        for i in 0..n {
            if i + 1 == n || mask & (1 << i) != 0 {
                bounds.push((start, i + 1));
                start = i + 1;
            }
        }
        let values: Vec<f64> = bounds.iter().map(|&(a, b)| gamma[a][b - a - 1]).collect();
        if values.windows(2).any(|p| p[0] < p[1]) {
            continue;
        }
        let mut v = Vec::with_capacity(n);
        for (&(a, b), &g) in bounds.iter().zip(&values) {
            v.extend(std::iter::repeat_n(T::lit(g), b - a));
        }
        let obj = isotonic_objective(prob, &v);
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, bounds));
        }
    }
    let (_, bounds) = best.expect("the single-block partition is always feasible");
    let blocks = bounds
        .into_iter()
        .map(|(a, b)| {
            let g = gamma[a][b - a - 1];
            Block { start: a, end: b, gamma: T::lit(g), clamped: nonneg && g == 0.0 }
        })
        .collect();
    Ok(IsotonicSolution::from_blocks(blocks))
}

/// Exact isotonic solution by enumerating all `2^(n-1)` block partitions.
pub fn brute_isotonic<T: Scalar>(prob: &IsotonicProblem<T>) -> Result<IsotonicSolution<T>> {
    brute_partitions(prob, false)
}

/// As [`brute_isotonic`], restricted to the non-negative monotone cone.
pub fn brute_isotonic_nonneg<T: Scalar>(prob: &IsotonicProblem<T>) -> Result<IsotonicSolution<T>> {
    brute_partitions(prob, true)
}

/// Central-difference Jacobian; `jac[i][j] = ∂f_i/∂x_j`.
pub fn fd_jacobian<T, F>(mut f: F, x: &[T], h: T) -> Result<Vec<Vec<T>>>
where
    T: Scalar,
    F: FnMut(&[T]) -> Result<Vec<T>>,
{
    if h.is_nan() || h <= T::zero() {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let mut cols = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        let two_h = (x[j] + h) - (x[j] - h);
        cols.push(plus.iter().zip(&minus).map(|(&a, &b)| (a - b) / two_h).collect::<Vec<T>>());
    }
    let m = cols.first().map_or(0, Vec::len);
    Ok((0..m).map(|i| cols.iter().map(|c| c[i]).collect()).collect())
}

/// Sum of the `k` largest entries of `φ(x)`.
pub fn topk_phi_sum<T: Scalar>(x: &[T], k: usize, phi: PhiKind) -> Result<T> {
    if k == 0 || k > x.len() {
        return Err(Error::InvalidArgument(format!("k must be in 1..={}, got {k}", x.len())));
    }
    let vals: Vec<f64> = x
        .iter()
        .map(|v| {
            let v = v.as_f64();
            match phi {
                PhiKind::Identity => v,
                PhiKind::HalfSquare => 0.5 * v * v,
                PhiKind::Absolute => v.abs(),
            }
        })
        .sorted_by(|a, b| b.total_cmp(a))
        .collect();
    Ok(T::lit(vals[..k].iter().sum()))
}
