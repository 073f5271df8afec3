//! Jacobian products of relaxed operators.
//!
//! Inside a pooled block of the isotonic solution, `γ` depends on the sorted
//! inputs of that block only, so `∂v/∂s` is block diagonal with rank-one
//! blocks `1 aᵀ`. Clamped blocks (pinned at zero) contribute nothing.
//! Chaining with `y = ∇R*(x - u)` gives
//!
//! ```text
//! ∂y/∂x = D (I - ∂u/∂x),    D = diag((R*)''(x - u))
//! ```
//!
//! Nothing here differentiates through solver iterations.

use crate::error::{Error, Result};
use crate::isotonic::PhiKind;
use crate::relaxed::RelaxedOutput;
use crate::scalar::Scalar;

/// Per-coordinate Jacobian weights, reusable across many products.
#[derive(Debug, Clone)]
pub struct JacobianPlan<'a, T> {
    out: &'a RelaxedOutput<T>,
    /// `a_j = ∂γ/∂s_j` in sorted order, zero on clamped blocks.
    row: Vec<T>,
    /// `(R*)''(x_i - u_i)` in original order.
    diag: Vec<T>,
}

impl<'a, T: Scalar> JacobianPlan<'a, T> {
    pub fn new(out: &'a RelaxedOutput<T>) -> Self {
        let n = out.len();
        if out.hard {
            return JacobianPlan { out, row: vec![T::zero(); n], diag: vec![T::zero(); n] };
        }
        let mut row = vec![T::zero(); n];
        for (b, block) in out.solution.blocks.iter().enumerate() {
            if !block.clamped {
                row[block.range()].copy_from_slice(&block_jacobian_row(out, b));
            }
        }
        let reg = out.reg();
        let diag = out.x.iter().zip(&out.u).map(|(&x, &u)| reg.conj_hess(x - u)).collect();
        JacobianPlan { out, row, diag }
    }

    pub fn output(&self) -> &RelaxedOutput<T> {
        self.out
    }

    /// `gᵀ ∂y/∂x`.
    pub fn vjp(&self, cotangent: &[T]) -> Result<Vec<T>> {
        let n = self.out.len();
        if cotangent.len() != n {
            return Err(Error::LengthMismatch(n, cotangent.len()));
        }
        let c: Vec<T> = cotangent.iter().zip(&self.diag).map(|(&g, &d)| d * g).collect();
        let mut grad = c.clone();
        if self.out.hard {
            return Ok(grad);
        }
        let sigma = self.out.sigma.as_slice();
        let signs = &self.out.signs;
        for block in self.out.solution.blocks.iter().filter(|b| !b.clamped) {
            let sum: T = block.range().map(|j| signs[sigma[j]] * c[sigma[j]]).sum();
            for j in block.range() {
                let i = sigma[j];
                grad[i] = grad[i] - signs[i] * self.row[j] * sum;
            }
        }
        Ok(grad)
    }

    /// `∂y/∂x · t`.
    pub fn jvp(&self, tangent: &[T]) -> Result<Vec<T>> {
        let n = self.out.len();
        if tangent.len() != n {
            return Err(Error::LengthMismatch(n, tangent.len()));
        }
        let mut du = vec![T::zero(); n];
        if !self.out.hard {
            let sigma = self.out.sigma.as_slice();
            let signs = &self.out.signs;
            for block in self.out.solution.blocks.iter().filter(|b| !b.clamped) {
                let dgamma: T = block.range().map(|j| self.row[j] * signs[sigma[j]] * tangent[sigma[j]]).sum();
                for j in block.range() {
                    du[sigma[j]] = signs[sigma[j]] * dgamma;
                }
            }
        }
        Ok(tangent.iter().zip(&du).zip(&self.diag).map(|((&t, &d_u), &d)| d * (t - d_u)).collect())
    }
}

/// `∂γ/∂s_j` for every `j` in block `b` of the solution.
///
/// Falls back to uniform weights when every curvature term vanishes, which
/// happens for `p < 2` when the block is exactly at its inputs.
pub fn block_jacobian_row<T: Scalar>(out: &RelaxedOutput<T>, b: usize) -> Vec<T> {
    let block = &out.solution.blocks[b];
    if block.clamped {
        return vec![T::zero(); block.len()];
    }
    let reg = out.reg();
    let s = &out.problem.s()[block.range()];
    let gamma = block.gamma;
    let (num, extra): (Vec<T>, T) = match out.phi().isotonic_form() {
        PhiKind::HalfSquare => {
            let qm1 = reg.q() - T::one();
            let w: T = out.problem.w()[block.range()].iter().copied().sum();
            let num = s.iter().map(|&si| qm1 * reg.curvature_weight(gamma - si)).collect();
            (num, reg.lambda().powf(qm1) * w)
        }
        _ => (s.iter().map(|&si| reg.curvature_weight(gamma - si)).collect(), T::zero()),
    };
    let denom = num.iter().copied().sum::<T>() + extra;
    if !denom.is_finite() || denom <= T::zero() {
        let m = T::from_count(block.len());
        return vec![T::one() / m; block.len()];
    }
    num.into_iter().map(|a| a / denom).collect()
}

pub fn vjp<T: Scalar>(out: &RelaxedOutput<T>, cotangent: &[T]) -> Result<Vec<T>> {
    JacobianPlan::new(out).vjp(cotangent)
}

pub fn jvp<T: Scalar>(out: &RelaxedOutput<T>, tangent: &[T]) -> Result<Vec<T>> {
    JacobianPlan::new(out).jvp(tangent)
}
