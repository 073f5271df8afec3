//! Fenchel-Young loss built on the relaxed top-k mask.

use crate::error::{Error, Result};
use crate::hard::check_vector;
use crate::isotonic::{PhiKind, Regularizer};
use crate::relaxed::{relaxed_apply, OperatorSpec, Solver};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig<T> {
    pub k: usize,
    pub reg: Regularizer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FyLoss<T> {
    pub value: T,
    pub gradient: Vec<T>,
}

/// `L(θ; t) = f(θ, 1_k) - ⟨θ, t⟩` with gradient `soft_topkmask(θ) - t`.
///
/// `f` is convex in `θ`, so the loss is convex; it reaches its minimum over
/// `θ` when the relaxed mask equals the target.
pub fn fy_topk_loss<T: Scalar>(logits: &[T], target: &[T], cfg: &LossConfig<T>) -> Result<FyLoss<T>> {
    check_vector(logits, "logits")?;
    check_vector(target, "target")?;
    if logits.len() != target.len() {
        return Err(Error::LengthMismatch(logits.len(), target.len()));
    }
    let spec = OperatorSpec::topk(PhiKind::Identity, cfg.reg, cfg.k);
    let out = relaxed_apply(logits, &spec, Solver::Pav)?;
    let inner: T = logits.iter().zip(target).map(|(&a, &b)| a * b).sum();
    let gradient = out.y.iter().zip(target).map(|(&y, &t)| y - t).collect();
    Ok(FyLoss { value: out.value() - inner, gradient })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(k: usize, lambda: f64) -> LossConfig<f64> {
        LossConfig { k, reg: Regularizer::squared(lambda).unwrap() }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let theta = [0.4, -1.0, 1.3, 0.2];
        let target = [1.0, 0.0, 1.0, 0.0];
        let c = cfg(2, 0.7);
        let loss = fy_topk_loss(&theta, &target, &c).unwrap();
        let h = 1e-6;
        for i in 0..theta.len() {
            let mut a = theta;
            let mut b = theta;
            a[i] += h;
            b[i] -= h;
            let fd = (fy_topk_loss(&a, &target, &c).unwrap().value - fy_topk_loss(&b, &target, &c).unwrap().value)
                / (2.0 * h);
            assert!((fd - loss.gradient[i]).abs() < 1e-6);
        }
    }

    fn reg_sum(t: &[f64], c: &LossConfig<f64>) -> f64 {
        t.iter().map(|&v| c.reg.value(v)).sum()
    }

    #[test]
    fn minimal_when_mask_hits_target() {
        // with θ well separated the relaxed mask is the target, so L = -R(t)
        let theta = [10.0, -10.0, 9.0];
        let target = [1.0, 0.0, 1.0];
        let c = cfg(2, 0.1);
        let loss = fy_topk_loss(&theta, &target, &c).unwrap();
        assert!(loss.gradient.iter().all(|&g| g.abs() < 1e-12), "{:?}", loss.gradient);
        assert!((loss.value + reg_sum(&target, &c)).abs() < 1e-12, "{}", loss.value);
    }

    #[test]
    fn bounded_below_by_minus_regularizer() {
        // L(θ; t) + R(t) is the full Fenchel-Young gap, non-negative for t ∈ P(1_k)
        let theta = [0.3, 0.1, -0.2];
        let c = cfg(1, 1.0);
        for target in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0 / 3.0; 3]] {
            let loss = fy_topk_loss(&theta, &target, &c).unwrap();
            assert!(loss.value + reg_sum(&target, &c) >= -1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_lengths() {
        assert_eq!(fy_topk_loss(&[1.0, 2.0], &[1.0], &cfg(1, 1.0)).unwrap_err(), Error::LengthMismatch(2, 1));
    }
}
