//! Relaxed top-k family operators.
//!
//! For a regularizer `R` and nonlinearity `φ`, the relaxed operator is
//! `y = ∇R*(x - u⋆)` where
//!
//! ```text
//! u⋆ = argmin_u  R*(x - u) + f_φ(u, w),    f_φ(u, w) = Σ_i w_[i] φ(u)_[i]
//! ```
//!
//! `u⋆` comes from an isotonic problem on the sorted input: on `x` itself
//! for the identity, and on `|x|` (followed by clipping at zero and
//! restoring signs) for the even nonlinearities.

use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::hard::{check_k, check_vector, sort_with_perm, sorted_desc, Permutation};
use crate::isotonic::{
    dual_bca_solve, dykstra_solve, pav_solve, refine_offset, Block, IsotonicProblem, IsotonicSolution, PhiKind,
    Regularizer,
};
use crate::scalar::Scalar;

/// Below this strength the hard operator is returned directly.
pub const HARD_LAMBDA: f64 = 1e-12;

/// Tolerance for grouping Dykstra iterates into blocks.
const DYKSTRA_BLOCK_TOL: f64 = 1e-9;

/// Weight vector of the permutahedron `P(w)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Weights<T> {
    /// `w = 1_k = (1, …, 1, 0, …, 0)` with `k` ones.
    TopK(usize),
    /// Arbitrary finite weights, sorted internally.
    Explicit(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSpec<T> {
    pub phi: PhiKind,
    pub reg: Regularizer<T>,
    pub weights: Weights<T>,
}

impl<T: Scalar> OperatorSpec<T> {
    pub fn new(phi: PhiKind, reg: Regularizer<T>, weights: Weights<T>) -> Self {
        OperatorSpec { phi, reg, weights }
    }

    pub fn topk(phi: PhiKind, reg: Regularizer<T>, k: usize) -> Self {
        Self::new(phi, reg, Weights::TopK(k))
    }

    /// Materializes `w` for an input of length `n`, sorted descending.
    pub fn sorted_weights(&self, n: usize) -> Result<Vec<T>> {
        match &self.weights {
            Weights::TopK(k) => {
                check_k(*k, n)?;
                Ok((0..n).map(|i| if i < *k { T::one() } else { T::zero() }).collect())
            }
            Weights::Explicit(w) => {
                check_vector(w, "w")?;
                if w.len() != n {
                    return Err(Error::LengthMismatch(n, w.len()));
                }
                if self.phi != PhiKind::Identity && w.iter().any(|&v| v < T::zero()) {
                    return Err(invalid(format!("w must be non-negative when phi is {}", self.phi)));
                }
                Ok(sorted_desc(w))
            }
        }
    }
}

/// Which isotonic solver backs a relaxed operator.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Solver {
    /// Exact pool adjacent violators.
    #[default]
    Pav,
    /// Dykstra's alternating projections; `p = 2` only.
    Dykstra { iterations: usize },
    /// Dual block coordinate ascent; any `p`.
    DualBca { tol: f64, max_sweeps: usize },
}

impl Solver {
    pub fn dykstra() -> Self {
        Solver::Dykstra { iterations: 100 }
    }

    pub fn dual_bca() -> Self {
        Solver::DualBca { tol: 1e-10, max_sweeps: 100_000 }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Solver::Pav => "pav",
            Solver::Dykstra { .. } => "dykstra",
            Solver::DualBca { .. } => "dual_bca",
        }
    }
}

impl FromStr for Solver {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pav" => Ok(Solver::Pav),
            "dykstra" => Ok(Solver::dykstra()),
            "dual_bca" => Ok(Solver::dual_bca()),
            other => Err(invalid(format!("unknown solver '{other}'"))),
        }
    }
}

/// Everything needed to evaluate and differentiate a relaxed operator
/// without solving again.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedOutput<T> {
    /// The operator output `y⋆ = ∇R*(x - u⋆)`.
    pub y: Vec<T>,
    pub u: Vec<T>,
    pub x: Vec<T>,
    /// Isotonic problem in sorted coordinates (`s`, sorted `w`, φ, R).
    pub problem: IsotonicProblem<T>,
    pub solution: IsotonicSolution<T>,
    /// Permutation sorting `x` (identity φ) or `|x|` (even φ).
    pub sigma: Permutation,
    /// `sign(x)` with `sign(0) = 1` for even φ, all ones otherwise.
    pub signs: Vec<T>,
    /// Set when `λ` was below [`HARD_LAMBDA`] and the hard operator was used.
    pub hard: bool,
    /// `false` when an iterative solver stopped before reaching its tolerance.
    pub converged: bool,
}

impl<T: Scalar> RelaxedOutput<T> {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn phi(&self) -> PhiKind {
        self.problem.phi()
    }

    pub fn reg(&self) -> &Regularizer<T> {
        self.problem.reg()
    }

    /// `f_{φ,R}(x, w) = R*(x - u⋆) + f_φ(u⋆, w)`.
    pub fn value(&self) -> T {
        let phi = self.phi();
        let w = self.problem.w();
        if self.hard {
            let phi_x: Vec<T> = self.x.iter().map(|&v| phi.eval(v)).collect();
            return sorted_desc(&phi_x).iter().zip(w).map(|(&a, &b)| a * b).sum();
        }
        let reg = self.reg();
        let conj: T = self.x.iter().zip(&self.u).map(|(&xi, &ui)| reg.conj(xi - ui)).sum();
        let phi_u: Vec<T> = self.u.iter().map(|&v| phi.eval(v)).collect();
        let lin: T = sorted_desc(&phi_u).iter().zip(w).map(|(&a, &b)| a * b).sum();
        conj + lin
    }
}

/// Evaluates the relaxed operator `y_{φ,R}(x, w)`.
pub fn relaxed_apply<T: Scalar>(x: &[T], spec: &OperatorSpec<T>, solver: Solver) -> Result<RelaxedOutput<T>> {
    check_vector(x, "x")?;
    let n = x.len();
    let w = spec.sorted_weights(n)?;
    let phi = spec.phi;
    let reg = spec.reg;
    if matches!(solver, Solver::Dykstra { .. }) && !reg.is_euclidean() {
        return Err(Error::Unsupported(format!("dykstra requires p = 2 (got p = {}); use dual_bca", reg.p())));
    }

    let (sigma, s, signs) = if phi.is_even() {
        let abs: Vec<T> = x.iter().map(|v| v.abs()).collect();
        let (sigma, s) = sort_with_perm(&abs);
        let signs = x.iter().map(|&v| if v < T::zero() { -T::one() } else { T::one() }).collect();
        (sigma, s, signs)
    } else {
        let (sigma, s) = sort_with_perm(x);
        (sigma, s, vec![T::one(); n])
    };
    let problem = IsotonicProblem::new(s, w, phi, reg)?;

    if reg.lambda() < T::lit(HARD_LAMBDA) {
        return Ok(hard_output(x, problem, sigma, signs));
    }

    let mut converged = true;
    let mut solution = match solver {
        Solver::Pav => pav_solve(&problem)?,
        Solver::Dykstra { iterations } => {
            let v = dykstra_solve(&problem, iterations)?;
            IsotonicSolution::from_values(&v, T::lit(DYKSTRA_BLOCK_TOL))
        }
        Solver::DualBca { tol, max_sweeps } => {
            let out = dual_bca_solve(&problem, T::tol(tol), max_sweeps)?;
            converged = out.converged;
            out.solution
        }
    };
    if phi.is_even() {
        solution.truncate_nonnegative();
    }

    // x - u in sorted order; exact blocks get residuals free of cancellation
    let sorted_residual: Vec<T> = if matches!(solver, Solver::Pav) {
        block_residuals(&problem, &solution)
    } else {
        problem.s().iter().zip(&solution.v).map(|(&s, &v)| s - v).collect()
    };
    let (mut u, mut y) = (vec![T::zero(); n], vec![T::zero(); n]);
    for ((&i, &v), &r) in sigma.as_slice().iter().zip(&solution.v).zip(&sorted_residual) {
        let sg = signs[i];
        u[i] = sg * v;
        y[i] = reg.conj_grad(sg * r);
    }
    Ok(RelaxedOutput { y, u, x: x.to_vec(), problem, solution, sigma, signs, hard: false, converged })
}

fn block_residuals<T: Scalar>(problem: &IsotonicProblem<T>, solution: &IsotonicSolution<T>) -> Vec<T> {
    let (s, w) = (problem.s(), problem.w());
    let mut r = Vec::with_capacity(s.len());
    for b in &solution.blocks {
        let range = b.range();
        if b.clamped {
            r.extend_from_slice(&s[range]);
            continue;
        }
        if b.len() == 1 && w[b.start] == T::zero() {
            // r*'(r) = 0 has the root r = 0
            r.push(T::zero());
            continue;
        }
        let s0 = s[b.start];
        let e = refine_offset(&s[range.clone()], &w[range.clone()], problem.phi(), problem.reg(), b.gamma);
        r.extend(s[range].iter().map(|&si| -(e + (s0 - si))));
    }
    r
}

/// Hard operator `φ'(x) ∘ w_{rank(φ(x))}`, packaged so that `y = ∇R*(x - u)`
/// still holds.
fn hard_output<T: Scalar>(x: &[T], problem: IsotonicProblem<T>, sigma: Permutation, signs: Vec<T>) -> RelaxedOutput<T> {
    let phi = problem.phi();
    let reg = *problem.reg();
    let placed = sigma.scatter(problem.w());
    let y: Vec<T> = x.iter().zip(&placed).map(|(&xi, &wi)| phi.deriv(xi) * wi).collect();
    let u: Vec<T> = x.iter().zip(&y).map(|(&xi, &yi)| xi - reg.grad(yi)).collect();
    let blocks = sigma
        .as_slice()
        .iter()
        .enumerate()
        .map(|(j, &i)| Block { start: j, end: j + 1, gamma: signs[i] * u[i], clamped: false })
        .collect();
    RelaxedOutput {
        y,
        u,
        x: x.to_vec(),
        problem,
        solution: IsotonicSolution::from_blocks(blocks),
        sigma,
        signs,
        hard: true,
        converged: true,
    }
}

/// Relaxed top-k mask (`φ(x) = x`, `w = 1_k`).
pub fn soft_topkmask<T: Scalar>(x: &[T], k: usize, reg: Regularizer<T>, solver: Solver) -> Result<Vec<T>> {
    Ok(relaxed_apply(x, &OperatorSpec::topk(PhiKind::Identity, reg, k), solver)?.y)
}

/// Relaxed top-k in magnitude (`φ(x) = x²/2`, `w = 1_k`).
pub fn soft_topkmag<T: Scalar>(x: &[T], k: usize, reg: Regularizer<T>, solver: Solver) -> Result<Vec<T>> {
    Ok(relaxed_apply(x, &OperatorSpec::topk(PhiKind::HalfSquare, reg, k), solver)?.y)
}

/// Relaxed signed top-k mask (`φ(x) = |x|`, `w = 1_k`), values in `[-1, 1]`.
pub fn soft_signed_topkmask<T: Scalar>(x: &[T], k: usize, reg: Regularizer<T>, solver: Solver) -> Result<Vec<T>> {
    Ok(relaxed_apply(x, &OperatorSpec::topk(PhiKind::Absolute, reg, k), solver)?.y)
}

/// `ρ = (n, n-1, …, 1)`.
pub fn reversing<T: Scalar>(n: usize) -> Vec<T> {
    (0..n).map(|i| T::from_count(n - i)).collect()
}

/// Relaxed descending sort: the regularized maximizer of `⟨ρ, y⟩` over `P(x)`.
pub fn soft_sort<T: Scalar>(x: &[T], reg: Regularizer<T>) -> Result<Vec<T>> {
    check_vector(x, "x")?;
    let rho = reversing(x.len());
    let spec = OperatorSpec::new(PhiKind::Identity, reg, Weights::Explicit(x.to_vec()));
    Ok(relaxed_apply(&rho, &spec, Solver::Pav)?.y)
}

/// Relaxed ranks in `[1, n]`, rank 1 being the largest entry.
///
/// This is the regularized maximizer of `⟨-x, y⟩` over `P(ρ)`; as `λ → 0`
/// it tends to `rank(x) + 1`.
pub fn soft_rank<T: Scalar>(x: &[T], reg: Regularizer<T>) -> Result<Vec<T>> {
    check_vector(x, "x")?;
    let neg: Vec<T> = x.iter().map(|&v| -v).collect();
    let spec = OperatorSpec::new(PhiKind::Identity, reg, Weights::Explicit(reversing(x.len())));
    Ok(relaxed_apply(&neg, &spec, Solver::Pav)?.y)
}

/// `f_{φ,R}(x, w)`, whose gradient in `x` is the relaxed operator.
pub fn f_value<T: Scalar>(x: &[T], spec: &OperatorSpec<T>) -> Result<T> {
    Ok(relaxed_apply(x, spec, Solver::Pav)?.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard::{rank, topkmag, topkmask};

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    fn r2(lambda: f64) -> Regularizer<f64> {
        Regularizer::squared(lambda).unwrap()
    }

    #[test]
    fn topkmag_example_shrinks_and_zeroes() {
        let y = soft_topkmag(&[1.0, -3.0, 2.0], 2, r2(1.0), Solver::Pav).unwrap();
        assert!(close(&y, &[0.0, -1.5, 1.0], 1e-15), "{y:?}");
        assert_eq!(y[0], 0.0);
    }

    #[test]
    fn separated_mask_is_exact() {
        let x = [3.0, 1.0, -1.0, 0.0];
        let y = soft_topkmask(&x, 2, r2(0.1), Solver::Pav).unwrap();
        assert!(close(&y, &[1.0, 1.0, 0.0, 0.0], 1e-12), "{y:?}");
        assert_eq!(y[2], 0.0);
        assert_eq!(y[3], 0.0);
    }

    #[test]
    fn large_lambda_tends_to_uniform() {
        let x = [0.3, -1.2, 2.2, 0.9, -0.4];
        let y = soft_topkmask(&x, 2, r2(1e6), Solver::Pav).unwrap();
        assert!(close(&y, &[0.4; 5], 1e-3), "{y:?}");
    }

    #[test]
    fn equal_entries_give_uniform_mask() {
        for reg in [r2(0.5), Regularizer::four_thirds(0.5).unwrap()] {
            let y = soft_topkmask(&[2.0; 4], 3, reg, Solver::Pav).unwrap();
            assert!(close(&y, &[0.75; 4], 1e-9), "{y:?}");
        }
    }

    #[test]
    fn small_lambda_topkmag_within_bound() {
        let x = [1.0, -3.0, 2.0];
        let lambda = 0.01;
        let y = soft_topkmag(&x, 2, r2(lambda), Solver::Pav).unwrap();
        let hard = topkmag(&x, 2).unwrap();
        assert!(close(&y, &hard, lambda * 3.0), "{y:?}");
    }

    #[test]
    fn topkmag_is_odd() {
        let x = [0.7, -2.1, 1.4, 0.2, -0.9];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let reg = Regularizer::four_thirds(0.4).unwrap();
        let a = soft_topkmag(&x, 2, reg, Solver::Pav).unwrap();
        let b = soft_topkmag(&neg, 2, reg, Solver::Pav).unwrap();
        for (p, q) in a.iter().zip(&b) {
            assert_eq!(*p, -q);
        }
    }

    #[test]
    fn signed_mask_examples() {
        let y = soft_signed_topkmask(&[1.0, -3.0, 2.0], 2, r2(0.1), Solver::Pav).unwrap();
        assert!(close(&y, &[0.0, -1.0, 1.0], 1e-12), "{y:?}");

        let x = [5.0, 0.5, 3.0, 0.1];
        let signed = soft_signed_topkmask(&x, 2, r2(0.1), Solver::Pav).unwrap();
        let mask = soft_topkmask(&x, 2, r2(0.1), Solver::Pav).unwrap();
        assert!(close(&signed, &mask, 1e-12));

        for c in [2.0, -2.0] {
            let y = soft_signed_topkmask(&[c, c], 1, r2(0.5), Solver::Pav).unwrap();
            let expect = 0.5 * c.signum();
            assert!(close(&y, &[expect, expect], 1e-12), "{y:?}");
        }
    }

    #[test]
    fn signed_mask_truncates_below_zero() {
        // large λ pushes the pooled value negative; the clipped output stays in [-1, 1]
        let x = [0.2, -0.1, 0.05, 0.3];
        let out = relaxed_apply(&x, &OperatorSpec::topk(PhiKind::Absolute, r2(5.0), 2), Solver::Pav).unwrap();
        assert!(out.solution.blocks.iter().any(|b| b.clamped));
        for (&yi, &xi) in out.y.iter().zip(&x) {
            assert!(yi.abs() <= 1.0 + 1e-12);
            assert!(yi == 0.0 || yi.signum() == xi.signum());
        }
    }

    #[test]
    fn soft_sort_and_rank_limits() {
        let x = [1.0, -3.0, 2.0];
        let sorted = soft_sort(&x, r2(1e-6)).unwrap();
        assert!(close(&sorted, &[2.0, 1.0, -3.0], 1e-5), "{sorted:?}");

        let ranks = soft_rank(&x, r2(1e-6)).unwrap();
        let hard: Vec<f64> = rank(&x).unwrap().as_slice().iter().map(|&r| r as f64 + 1.0).collect();
        assert!(close(&ranks, &hard, 1e-5), "{ranks:?}");

        let ranks = soft_rank(&[0.1, 0.4, -0.3, 0.35], r2(3.0)).unwrap();
        assert!(ranks.iter().all(|&r| (1.0 - 1e-12..=4.0 + 1e-12).contains(&r)));
        assert!((ranks.iter().sum::<f64>() - 10.0).abs() < 1e-9);
    }

    #[test]
    fn f_value_tends_to_topk_phi_sum() {
        let x = [1.0, -3.0, 2.0];
        let spec = OperatorSpec::topk(PhiKind::HalfSquare, r2(1e-6), 2);
        assert!((f_value(&x, &spec).unwrap() - 6.5).abs() < 1e-4);
    }

    #[test]
    fn f_value_at_zero_is_minus_min_regularizer() {
        // the minimum-norm point of P(w) is the constant vector at mean(w)
        let w = vec![2.0, 1.0, 0.5];
        let reg = r2(0.7);
        let spec = OperatorSpec::new(PhiKind::Identity, reg, Weights::Explicit(w));
        let mean = 3.5 / 3.0;
        let expect = -3.0 * reg.value(mean);
        assert!((f_value(&[0.0; 3], &spec).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn f_value_at_zero_vanishes_for_even_phi() {
        for phi in [PhiKind::HalfSquare, PhiKind::Absolute] {
            let spec = OperatorSpec::new(phi, r2(0.7), Weights::Explicit(vec![2.0, 1.0, 0.5]));
            assert_eq!(f_value(&[0.0; 3], &spec).unwrap(), 0.0);
        }
    }

    #[test]
    fn hard_short_circuit() {
        let x = [1.0, -3.0, 2.0];
        let reg = r2(1e-13);
        let out = relaxed_apply(&x, &OperatorSpec::topk(PhiKind::Identity, reg, 2), Solver::Pav).unwrap();
        assert!(out.hard);
        assert_eq!(out.y, topkmask(&x, 2).unwrap());
        assert_eq!(out.value(), 3.0);
        let y = soft_topkmag(&x, 2, reg, Solver::Pav).unwrap();
        assert_eq!(y, topkmag(&x, 2).unwrap());
    }

    #[test]
    fn dykstra_needs_p_two() {
        let reg = Regularizer::four_thirds(1.0).unwrap();
        assert!(matches!(soft_topkmask(&[1.0, 2.0], 1, reg, Solver::dykstra()), Err(Error::Unsupported(_))));
    }

    #[test]
    fn solvers_agree_on_relaxed_outputs() {
        let x = [0.9, -0.3, 2.0, 1.7, 0.0, -1.1, 1.75];
        let exact = soft_topkmag(&x, 3, r2(0.5), Solver::Pav).unwrap();
        let dyk = soft_topkmag(&x, 3, r2(0.5), Solver::Dykstra { iterations: 2000 }).unwrap();
        let bca = soft_topkmag(&x, 3, r2(0.5), Solver::dual_bca()).unwrap();
        assert!(close(&exact, &dyk, 1e-8), "{exact:?} {dyk:?}");
        assert!(close(&exact, &bca, 1e-7), "{exact:?} {bca:?}");
    }

    #[test]
    fn spec_validation() {
        let x = [1.0, 2.0];
        let spec = OperatorSpec::topk(PhiKind::Identity, r2(1.0), 3);
        assert!(relaxed_apply(&x, &spec, Solver::Pav).is_err());
        let spec = OperatorSpec::new(PhiKind::HalfSquare, r2(1.0), Weights::Explicit(vec![1.0, -1.0]));
        assert!(relaxed_apply(&x, &spec, Solver::Pav).is_err());
        let spec = OperatorSpec::new(PhiKind::Identity, r2(1.0), Weights::Explicit(vec![1.0]));
        assert_eq!(relaxed_apply(&x, &spec, Solver::Pav).unwrap_err(), Error::LengthMismatch(2, 1));
    }

    #[test]
    fn solver_names_round_trip() {
        for name in ["pav", "dykstra", "dual_bca"] {
            assert_eq!(name.parse::<Solver>().unwrap().name(), name);
        }
        assert!("simplex".parse::<Solver>().is_err());
    }
}
