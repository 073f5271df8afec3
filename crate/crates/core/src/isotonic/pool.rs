//! The pooling subproblem `γ⋆_B = argmin_γ Σ_{i∈B} h_i(γ)`.

use crate::error::{invalid, Error, Result};
use crate::hard::check_vector;
use crate::scalar::{sign0, Scalar};

use super::{PhiKind, Regularizer};

const ROOT_TOL: f64 = 1e-12;
const ROOT_MAX_ITER: usize = 100;
const POLISH_STEPS: usize = 3;
// enough doublings to span the whole f64 range
const MAX_EXPANSIONS: usize = 2100;

/// Minimizer of `Σ_{i∈B} h_i(γ)` over a block of sorted targets and weights.
///
/// Closed forms are used for `p = 2` and for singleton identity blocks;
/// everything else goes through a safeguarded Newton iteration on the
/// (strictly increasing) stationarity function.
pub fn pool_subproblem<T: Scalar>(block_s: &[T], block_w: &[T], phi: PhiKind, reg: &Regularizer<T>) -> Result<T> {
    check_vector(block_s, "block_s")?;
    check_vector(block_w, "block_w")?;
    if block_s.len() != block_w.len() {
        return Err(Error::LengthMismatch(block_s.len(), block_w.len()));
    }
    if phi != PhiKind::Identity && block_w.iter().any(|&w| w < T::zero()) {
        return Err(invalid(format!("block_w must be non-negative when phi is {phi}")));
    }
    pool_with_target(block_s, block_w, phi, reg, T::zero(), None)
}

/// Solves `Σ_{i∈B} h_i'(γ) = target`.
///
/// `target = 0` is the pooling subproblem. Non-zero targets arise in the
/// dual coordinate updates and in recovering primal values from duals.
pub(crate) fn pool_with_target<T: Scalar>(
    s: &[T],
    w: &[T],
    phi: PhiKind,
    reg: &Regularizer<T>,
    target: T,
    guess: Option<T>,
) -> Result<T> {
    debug_assert!(!s.is_empty() && s.len() == w.len());
    let phi = phi.isotonic_form();
    let lambda = reg.lambda();
    let m = T::from_count(s.len());

    if reg.is_euclidean() {
        let sum_s: T = s.iter().copied().sum();
        let sum_w: T = w.iter().copied().sum();
        return Ok(euclidean_pool(phi, lambda, m, sum_s, sum_w, target));
    }
    if phi == PhiKind::Identity && s.len() == 1 {
        // r*'(γ - s) = target - w  ⇔  γ = s + ∇r(target - w)
        return Ok(s[0] + reg.grad(target - w[0]));
    }

    let g = |gamma: T| {
        let mut val = -target;
        let mut der = T::zero();
        for (&si, &wi) in s.iter().zip(w) {
            val = val + reg.conj_grad(gamma - si) + wi * phi.deriv(gamma);
            der = der + reg.conj_hess(gamma - si) + wi * phi.second_deriv(gamma);
        }
        (val, der)
    };
    let (lo, hi) = range(s);
    let guess = guess.unwrap_or_else(|| s.iter().copied().sum::<T>() / m);
    let step = (hi - lo).max(lambda).max(T::lit(1e-6));
    safeguarded_root(g, guess, step)
}

/// `γ - s[0]` for a pooled block, refined in shifted coordinates.
///
/// `γ` itself only carries absolute precision `ulp(s[0])`; the residuals
/// `s_i - γ` that feed `∇R*` can be far smaller, so the offset is polished
/// with Newton steps on `e ↦ Σ h_i'(s[0] + e)`.
pub(crate) fn refine_offset<T: Scalar>(s: &[T], w: &[T], phi: PhiKind, reg: &Regularizer<T>, gamma: T) -> T {
    let phi = phi.isotonic_form();
    let s0 = s[0];
    let mut g = |e: T| {
        let mut val = T::zero();
        let mut der = T::zero();
        for (&si, &wi) in s.iter().zip(w) {
            let d = e + (s0 - si);
            val = val + reg.conj_grad(d) + wi * phi.deriv(s0 + e);
            der = der + reg.conj_hess(d) + wi * phi.second_deriv(s0 + e);
        }
        (val, der)
    };
    polish(&mut g, gamma - s0, T::neg_infinity(), T::infinity())
}

/// Closed-form pooled value for `p = 2`, given block sums.
pub(crate) fn euclidean_pool<T: Scalar>(phi: PhiKind, lambda: T, m: T, sum_s: T, sum_w: T, target: T) -> T {
    match phi.isotonic_form() {
        // Σ (γ - s_i)/λ + Σ w_i = target
        PhiKind::Identity => (sum_s + lambda * (target - sum_w)) / m,
        // Σ (γ - s_i)/λ + γ Σ w_i = target
        _ => (sum_s + lambda * target) / (m + lambda * sum_w),
    }
}

fn range<T: Scalar>(s: &[T]) -> (T, T) {
    s.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Root of a strictly increasing function `f`, given as `x ↦ (f(x), f'(x))`.
///
/// A bracket is grown geometrically from `guess`; inside it Newton steps are
/// taken when they stay in the bracket and shrink fast enough, bisection
/// otherwise.
pub(crate) fn safeguarded_root<T: Scalar>(mut f: impl FnMut(T) -> (T, T), guess: T, step: T) -> Result<T> {
    let tol = T::tol(ROOT_TOL);
    let two = T::lit(2.0);
    let (f0, _) = f(guess);
    if f0 == T::zero() {
        return Ok(guess);
    }

    // Grow a bracket [lo, hi] with f(lo) < 0 < f(hi).
    let dir = -sign0(f0);
    let mut anchor = guess;
    let mut width = step;
    let mut other = guess;
    let mut found = false;
    for _ in 0..MAX_EXPANSIONS {
        other = anchor + dir * width;
        let (fo, _) = f(other);
        if fo == T::zero() {
            return Ok(other);
        }
        if sign0(fo) != sign0(f0) {
            found = true;
            break;
        }
        anchor = other;
        width = width * two;
        if !other.is_finite() {
            break;
        }
    }
    if !found {
        return Err(Error::NonConvergent {
            lo: anchor.min(other).as_f64(),
            hi: anchor.max(other).as_f64(),
            iterations: MAX_EXPANSIONS,
        });
    }
    let (mut lo, mut hi) = if dir > T::zero() { (anchor, other) } else { (other, anchor) };

    let mut x = if guess > lo && guess < hi { guess } else { (lo + hi) / two };
    let mut dx_old = hi - lo;
    let mut dx = dx_old;
    let (mut fx, mut dfx) = f(x);
    for _ in 0..ROOT_MAX_ITER {
        if fx == T::zero() {
            return Ok(x);
        }
        if fx < T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let use_newton = dfx > T::zero() && newton > lo && newton < hi && (two * fx).abs() <= (dx_old * dfx).abs();
        dx_old = dx;
        let next = if use_newton {
            dx = fx / dfx;
            newton
        } else {
            dx = (hi - lo) / two;
            lo + dx
        };
        let scale = T::one().max(next.abs());
        if (next - x).abs() <= tol * scale || hi - lo <= tol * scale {
            return Ok(polish(&mut f, next, lo, hi));
        }
        x = next;
        (fx, dfx) = f(x);
    }
    Err(Error::NonConvergent { lo: lo.as_f64(), hi: hi.as_f64(), iterations: ROOT_MAX_ITER })
}

/// A few extra Newton steps inside `[lo, hi]`, kept only while `|f|` shrinks.
fn polish<T: Scalar>(f: &mut impl FnMut(T) -> (T, T), mut x: T, lo: T, hi: T) -> T {
    let (mut fx, mut dfx) = f(x);
    for _ in 0..POLISH_STEPS {
        if fx == T::zero() || dfx.is_nan() || dfx <= T::zero() {
            break;
        }
        let cand = x - fx / dfx;
        if !(cand >= lo && cand <= hi) || cand == x {
            break;
        }
        let (fc, dfc) = f(cand);
        if fc.abs() >= fx.abs() {
            break;
        }
        (x, fx, dfx) = (cand, fc, dfc);
    }
    x
}
