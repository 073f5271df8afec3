//! Dykstra's alternating projections for the `p = 2` isotonic problem.
//!
//! With `p = 2` the objective is a weighted squared distance to a target,
//!
//! ```text
//! identity:     Σ (v_i - (s_i - λ w_i))² / 2λ
//! half_square:  Σ c_i (v_i - s_i / c_i)² / 2λ,    c_i = λ w_i + 1
//! ```
//!
//! up to constants, so the isotonic solution is the weighted projection of
//! the target onto the monotone cone `C1 ∩ C2`, with `C1` holding the
//! constraints `v0 ≥ v1, v2 ≥ v3, …` and `C2` holding `v1 ≥ v2, v3 ≥ v4, …`.
//! Projecting onto either set is a batch of independent two-element
//! projections.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::{IsotonicProblem, PhiKind};

const PAR_THRESHOLD: usize = 1 << 16;

/// Runs `iterations` Dykstra steps starting from the unconstrained target.
///
/// Zero iterations return that target unchanged. Only `p = 2` is supported;
/// other exponents need [`dual_bca_solve`](super::dual_bca_solve).
pub fn dykstra_solve<T: Scalar>(prob: &IsotonicProblem<T>, iterations: usize) -> Result<Vec<T>> {
    let reg = prob.reg();
    if !reg.is_euclidean() {
        return Err(Error::Unsupported(format!(
            "dykstra_solve requires p = 2 (got p = {}); use dual_bca_solve",
            reg.p()
        )));
    }
    let lambda = reg.lambda();
    let (target, weights): (Vec<T>, Vec<T>) = match prob.phi().isotonic_form() {
        PhiKind::Identity => {
            (prob.s().iter().zip(prob.w()).map(|(&s, &w)| s - lambda * w).collect(), vec![T::one(); prob.len()])
        }
        _ => prob
            .s()
            .iter()
            .zip(prob.w())
            .map(|(&s, &w)| {
                let c = lambda * w + T::one();
                (s / c, c)
            })
            .unzip(),
    };
    Ok(dykstra_weighted(&target, &weights, iterations))
}

/// Weighted projection of `target` onto the monotone cone by Dykstra's
/// algorithm with correction terms `p` (for `C1`) and `q` (for `C2`).
pub(crate) fn dykstra_weighted<T: Scalar>(target: &[T], weights: &[T], iterations: usize) -> Vec<T> {
    let n = target.len();
    let mut v = target.to_vec();
    let mut p = vec![T::zero(); n];
    let mut q = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    for _ in 0..iterations {
        // y = P_C1(v + p),  p ← v + p - y
        for i in 0..n {
            y[i] = v[i] + p[i];
        }
        p.copy_from_slice(&y);
        project_pairs(&mut y, weights, 0);
        for i in 0..n {
            p[i] = p[i] - y[i];
        }
        // v = P_C2(y + q),  q ← y + q - v
        for i in 0..n {
            v[i] = y[i] + q[i];
        }
        q.copy_from_slice(&v);
        project_pairs(&mut v, weights, 1);
        for i in 0..n {
            q[i] = q[i] - v[i];
        }
    }
    v
}

/// Projects every pair `(z_i, z_{i+1})`, `i = offset, offset + 2, …`, onto
/// `{z_i ≥ z_{i+1}}` in the `c`-weighted norm.
fn project_pairs<T: Scalar>(z: &mut [T], c: &[T], offset: usize) {
    if z.len() <= offset {
        return;
    }
    let z = &mut z[offset..];
    let c = &c[offset..];
    if z.len() >= PAR_THRESHOLD {
        z.par_chunks_exact_mut(2).zip(c.par_chunks_exact(2)).for_each(|(zp, cp)| project_pair(zp, cp));
    } else {
        z.chunks_exact_mut(2).zip(c.chunks_exact(2)).for_each(|(zp, cp)| project_pair(zp, cp));
    }
}

#[inline]
fn project_pair<T: Scalar>(z: &mut [T], c: &[T]) {
    if z[0] < z[1] {
        let m = (c[0] * z[0] + c[1] * z[1]) / (c[0] + c[1]);
        z[0] = m;
        z[1] = m;
    }
}
