//! Pool adjacent violators.

use crate::error::Result;
use crate::scalar::Scalar;

use super::pool::{euclidean_pool, pool_with_target};
use super::{Block, IsotonicProblem, IsotonicSolution};

/// Adjacent blocks are pooled when `γ_left ≤ γ_right + MERGE_TOL`, so equal
/// neighbours always end up in one maximal block.
const MERGE_TOL: f64 = 1e-12;

struct Pool<T> {
    start: usize,
    end: usize,
    gamma: T,
    sum_s: T,
    sum_w: T,
}

/// Exact minimizer of the separable isotonic problem.
///
/// Scans left to right keeping a stack of pooled blocks; every push is
/// followed by merges until the stack values are strictly decreasing. With
/// `p = 2` each merge is O(1) via running sums; otherwise the merged block
/// value is re-solved from a warm start.
pub fn pav_solve<T: Scalar>(prob: &IsotonicProblem<T>) -> Result<IsotonicSolution<T>> {
    let s = prob.s();
    let w = prob.w();
    let phi = prob.phi();
    let reg = prob.reg();
    let euclidean = reg.is_euclidean();
    let lambda = reg.lambda();
    let merge_tol = T::lit(MERGE_TOL);

    let solve = |start: usize, end: usize, sum_s: T, sum_w: T, guess: Option<T>| -> Result<T> {
        if euclidean {
            let m = T::from_count(end - start);
            Ok(euclidean_pool(phi, lambda, m, sum_s, sum_w, T::zero()))
        } else {
            pool_with_target(&s[start..end], &w[start..end], phi, reg, T::zero(), guess)
        }
    };

    let mut stack: Vec<Pool<T>> = Vec::with_capacity(s.len());
    for i in 0..s.len() {
        let gamma = solve(i, i + 1, s[i], w[i], None)?;
        stack.push(Pool { start: i, end: i + 1, gamma, sum_s: s[i], sum_w: w[i] });

        while stack.len() > 1 {
            let right = &stack[stack.len() - 1];
            let left = &stack[stack.len() - 2];
            if left.gamma > right.gamma + merge_tol {
                break;
            }
            let right = stack.pop().expect("stack has two blocks");
            let left = stack.last_mut().expect("stack has two blocks");
            let (nl, nr) = (T::from_count(left.end - left.start), T::from_count(right.end - right.start));
            let guess = (left.gamma * nl + right.gamma * nr) / (nl + nr);
            left.end = right.end;
            left.sum_s = left.sum_s + right.sum_s;
            left.sum_w = left.sum_w + right.sum_w;
            left.gamma = solve(left.start, left.end, left.sum_s, left.sum_w, Some(guess))?;
        }
    }

    let blocks =
        stack.into_iter().map(|p| Block { start: p.start, end: p.end, gamma: p.gamma, clamped: false }).collect();
    Ok(IsotonicSolution::from_blocks(blocks))
}
