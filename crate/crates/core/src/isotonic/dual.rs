//! Block coordinate ascent on the dual of the isotonic problem.
//!
//! The dual is `max_{α ≥ 0} -Σ_i h_i*(α_i - α_{i-1})` with one multiplier
//! `α_j` per constraint `v_j ≥ v_{j+1}` and `α_{-1} = α_{n-1} = 0`. Primal
//! values are recovered as `v_i = (h_i*)'(α_i - α_{i-1})`, i.e. the solution
//! of `h_i'(v) = α_i - α_{i-1}`.
//!
//! Multipliers with even index touch disjoint pairs of coordinates, as do
//! the odd ones, so each half-sweep is a batch of independent scalar
//! updates. This is Dykstra's algorithm in the Euclidean case and extends it
//! to any `p`.

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

use super::pool::pool_with_target;
use super::{IsotonicProblem, IsotonicSolution};

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolve<T> {
    pub solution: IsotonicSolution<T>,
    /// Final multipliers, one per adjacent constraint.
    pub alpha: Vec<T>,
    pub sweeps: usize,
    /// `false` when `max_sweeps` ran out before the primal change fell below `tol · max(1, ‖v‖∞)`.
    pub converged: bool,
}

/// Solves the isotonic problem by alternating odd/even dual updates.
///
/// Stops once a full sweep moves the recovered primal iterate by less than
/// `tol · max(1, ‖v‖∞)` in max norm. Blocks are read off the dual support (`α_j > 0`) and
/// from consecutive primal values closer than `tol`.
pub fn dual_bca_solve<T: Scalar>(prob: &IsotonicProblem<T>, tol: T, max_sweeps: usize) -> Result<DualSolve<T>> {
    if tol.is_nan() || tol <= T::zero() {
        return Err(invalid(format!("tol = {tol} must be positive")));
    }
    if max_sweeps == 0 {
        return Err(invalid("max_sweeps must be positive"));
    }
    let n = prob.len();
    let s = prob.s();
    let w = prob.w();
    let phi = prob.phi();
    let reg = prob.reg();

    let mut alpha = vec![T::zero(); n.saturating_sub(1)];
    let at = |alpha: &[T], j: isize| -> T {
        if j < 0 || j as usize >= alpha.len() {
            T::zero()
        } else {
            alpha[j as usize]
        }
    };
    let recover = |alpha: &[T], v: &mut [T]| -> Result<()> {
        for i in 0..n {
            let z = at(alpha, i as isize) - at(alpha, i as isize - 1);
            v[i] = pool_with_target(&s[i..=i], &w[i..=i], phi, reg, z, Some(v[i]))?;
        }
        Ok(())
    };

    let mut v = s.to_vec();
    recover(&alpha, &mut v)?;
    let mut next = v.clone();
    let mut sweeps = 0;
    let mut converged = n == 1;
    while !converged && sweeps < max_sweeps {
        sweeps += 1;
        for parity in 0..2 {
            for j in (parity..n - 1).step_by(2) {
                let left = at(&alpha, j as isize - 1);
                let right = at(&alpha, j as isize + 1);
                let guess = (v[j] + v[j + 1]) / T::lit(2.0);
                let x = pool_with_target(&s[j..j + 2], &w[j..j + 2], phi, reg, right - left, Some(guess))?;
                alpha[j] = (prob.dh(j, x) + left).max(T::zero());
            }
        }
        recover(&alpha, &mut next)?;
        let change = v.iter().zip(&next).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        let scale = next.iter().fold(T::one(), |m, &b| m.max(b.abs()));
        std::mem::swap(&mut v, &mut next);
        converged = change <= tol * scale;
    }

    let solution = IsotonicSolution::from_values_with(&v, tol, |j| alpha[j] > T::zero());
    Ok(DualSolve { solution, alpha, sweeps, converged })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isotonic::{pav_solve, PhiKind, Regularizer};

    #[test]
    fn two_point_projection() {
        let reg = Regularizer::squared(1.0_f64).unwrap();
        // s must be sorted, so feed the violated targets through w:
        // s - λw = (0, 1) with s = (1, 1), w = (1, 0)
        let prob = IsotonicProblem::new(vec![1.0, 1.0], vec![1.0, 0.0], PhiKind::Identity, reg).unwrap();
        let out = dual_bca_solve(&prob, 1e-12, 100).unwrap();
        assert!(out.converged);
        for v in &out.solution.v {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!((out.alpha[0] - 0.5).abs() < 1e-12);
        assert_eq!(out.solution.blocks.len(), 1);
    }

    #[test]
    fn inactive_constraints_keep_zero_duals() {
        let reg = Regularizer::four_thirds(0.2_f64).unwrap();
        let prob = IsotonicProblem::new(vec![3.0, 1.0, -1.0], vec![1.0, 0.0, 0.0], PhiKind::HalfSquare, reg).unwrap();
        let out = dual_bca_solve(&prob, 1e-12, 10).unwrap();
        assert!(out.converged);
        assert!(out.alpha.iter().all(|&a| a == 0.0));
        let exact = pav_solve(&prob).unwrap();
        for (a, b) in out.solution.v.iter().zip(&exact.v) {
            assert!((a - b).abs() < 1e-10, "{a} {b}");
        }
    }

    #[test]
    fn matches_pav_for_four_thirds() {
        let reg = Regularizer::four_thirds(0.5_f64).unwrap();
        let prob =
            IsotonicProblem::new(vec![3.0, 1.0, 0.0, -1.0], vec![1.0, 1.0, 0.0, 0.0], PhiKind::Identity, reg).unwrap();
        let out = dual_bca_solve(&prob, 1e-12, 10_000).unwrap();
        let exact = pav_solve(&prob).unwrap();
        for (a, b) in out.solution.v.iter().zip(&exact.v) {
            assert!((a - b).abs() < 1e-5, "{:?} vs {:?}", out.solution.v, exact.v);
        }
    }

    #[test]
    fn pooled_blocks_recovered_from_duals() {
        let reg = Regularizer::new(1.5_f64, 1.0).unwrap();
        let prob =
            IsotonicProblem::new(vec![1.0, 1.0, 1.0, 0.0], vec![2.0, 1.0, 0.0, 0.0], PhiKind::Identity, reg).unwrap();
        let out = dual_bca_solve(&prob, 1e-13, 100_000).unwrap();
        let exact = pav_solve(&prob).unwrap();
        assert!(out.converged);
        assert_eq!(out.solution.blocks.len(), exact.blocks.len());
        for (a, b) in out.solution.v.iter().zip(&exact.v) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn unconverged_run_is_flagged() {
        let reg = Regularizer::squared(10.0_f64).unwrap();
        let s = vec![0.0; 40];
        let w: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { 0.0 }).collect();
        let prob = IsotonicProblem::new(s, w, PhiKind::Identity, reg).unwrap();
        let out = dual_bca_solve(&prob, 1e-14, 3).unwrap();
        assert!(!out.converged);
        assert_eq!(out.sweeps, 3);
    }

    #[test]
    fn singleton_problem() {
        let reg = Regularizer::four_thirds(1.0_f64).unwrap();
        let prob = IsotonicProblem::new(vec![2.0], vec![1.0], PhiKind::Identity, reg).unwrap();
        let out = dual_bca_solve(&prob, 1e-10, 1).unwrap();
        assert!(out.converged);
        assert!((out.solution.v[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_parameters() {
        let reg = Regularizer::squared(1.0_f64).unwrap();
        let prob = IsotonicProblem::new(vec![2.0], vec![1.0], PhiKind::Identity, reg).unwrap();
        assert!(dual_bca_solve(&prob, 0.0, 1).is_err());
        assert!(dual_bca_solve(&prob, 1e-9, 0).is_err());
    }
}
