//! Separable isotonic optimization.
//!
//! Every solver here minimizes `Σ_i h_i(v_i)` subject to `v_0 ≥ v_1 ≥ … ≥ v_{n-1}`
//! where
//!
//! ```text
//! h_i(v) = r*(s_i - v) + w_i φ(v),    r*(t) = λ^{1-q} |t|^q / q
//! ```
//!
//! is the conjugate of the p-norm regularizer `(λ/p)|y|^p` (with `1/p + 1/q = 1`)
//! composed with the sorted input `s` and sorted weights `w`.
//!
//! [`PhiKind::Absolute`] only ever reaches these solvers through the
//! reduction onto the non-negative monotone cone, where `|v| = v`. It is
//! therefore treated exactly like [`PhiKind::Identity`]; callers clip the
//! solution with [`IsotonicSolution::truncate_nonnegative`].

mod dual;
mod dykstra;
mod pav;
mod pool;

pub use dual::{dual_bca_solve, DualSolve};
pub use dykstra::dykstra_solve;
pub use pav::pav_solve;
pub use pool::pool_subproblem;
pub(crate) use pool::refine_offset;

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::hard::check_vector;
use crate::scalar::{abs_pow, sign0, Exponent, Scalar};

/// Elementwise nonlinearity applied before the linear program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhiKind {
    /// `φ(x) = x`: top-k mask, sort and rank.
    Identity,
    /// `φ(x) = x²/2`: top-k in magnitude, k-support norm.
    HalfSquare,
    /// `φ(x) = |x|`: signed top-k mask, OWL norm.
    Absolute,
}

impl PhiKind {
    pub fn eval<T: Scalar>(self, x: T) -> T {
        match self {
            PhiKind::Identity => x,
            PhiKind::HalfSquare => x * x * T::lit(0.5),
            PhiKind::Absolute => x.abs(),
        }
    }

    pub fn deriv<T: Scalar>(self, x: T) -> T {
        match self {
            PhiKind::Identity => T::one(),
            PhiKind::HalfSquare => x,
            PhiKind::Absolute => sign0(x),
        }
    }

    pub fn second_deriv<T: Scalar>(self, _x: T) -> T {
        match self {
            PhiKind::HalfSquare => T::one(),
            _ => T::zero(),
        }
    }

    /// Even nonlinearities go through the magnitude reduction.
    pub fn is_even(self) -> bool {
        !matches!(self, PhiKind::Identity)
    }

    /// The form the isotonic solvers use. `Absolute` becomes `Identity`.
    pub(crate) fn isotonic_form(self) -> PhiKind {
        match self {
            PhiKind::Absolute => PhiKind::Identity,
            other => other,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PhiKind::Identity => "identity",
            PhiKind::HalfSquare => "half_square",
            PhiKind::Absolute => "absolute",
        }
    }
}

impl fmt::Display for PhiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhiKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(PhiKind::Identity),
            "half_square" => Ok(PhiKind::HalfSquare),
            "absolute" => Ok(PhiKind::Absolute),
            other => Err(invalid(format!("unknown phi '{other}'"))),
        }
    }
}

/// The regularizer `R(y) = (λ/p) Σ |y_i|^p` with `1 < p ≤ 2`, `λ > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Regularizer<T> {
    p: T,
    lambda: T,
    q: T,
    // λ^{1-q}
    scale: T,
    q_exp: Exponent<T>,
    qm1: Exponent<T>,
    qm2: Exponent<T>,
    pm1: Exponent<T>,
}

impl<T: Scalar> Regularizer<T> {
    pub fn new(p: T, lambda: T) -> Result<Self> {
        if !(p > T::one() && p <= T::lit(2.0)) {
            return Err(invalid(format!("p = {p} must lie in (1, 2]")));
        }
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(invalid(format!("lambda = {lambda} must be positive and finite")));
        }
        let q = p / (p - T::one());
        let q = match Exponent::new(q) {
            Exponent::Int(i) => T::lit(i as f64),
            Exponent::Real(r) => r,
        };
        Ok(Regularizer {
            p,
            lambda,
            q,
            scale: lambda.powf(T::one() - q),
            q_exp: Exponent::new(q),
            qm1: Exponent::new(q - T::one()),
            qm2: Exponent::new(q - T::lit(2.0)),
            pm1: Exponent::new(p - T::one()),
        })
    }

    /// `p = 2`: squared Euclidean regularization.
    pub fn squared(lambda: T) -> Result<Self> {
        Self::new(T::lit(2.0), lambda)
    }

    /// `p = 4/3`, whose conjugate exponent is `q = 4`.
    pub fn four_thirds(lambda: T) -> Result<Self> {
        Self::new(T::lit(4.0) / T::lit(3.0), lambda)
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Conjugate exponent, `1/p + 1/q = 1`.
    pub fn q(&self) -> T {
        self.q
    }

    pub fn is_euclidean(&self) -> bool {
        self.q_exp == Exponent::Int(2)
    }

    /// `(λ/p)|y|^p` for one coordinate.
    pub fn value(&self, y: T) -> T {
        self.lambda / self.p * y.abs().powf(self.p)
    }

    /// `∇r(y) = λ sign(y) |y|^{p-1}`, the inverse map of [`conj_grad`](Self::conj_grad).
    pub fn grad(&self, y: T) -> T {
        self.lambda * sign0(y) * abs_pow(y, self.pm1)
    }

    /// `r*(t) = λ^{1-q} |t|^q / q`.
    pub fn conj(&self, t: T) -> T {
        self.scale * abs_pow(t, self.q_exp) / self.q
    }

    /// `(r*)'(t) = λ^{1-q} sign(t) |t|^{q-1}`.
    pub fn conj_grad(&self, t: T) -> T {
        self.scale * sign0(t) * abs_pow(t, self.qm1)
    }

    /// `(r*)''(t) = λ^{1-q} (q-1) |t|^{q-2}`.
    pub fn conj_hess(&self, t: T) -> T {
        self.scale * (self.q - T::one()) * abs_pow(t, self.qm2)
    }

    /// `|t|^{q-2}`, the unnormalized block Jacobian weight.
    pub(crate) fn curvature_weight(&self, t: T) -> T {
        abs_pow(t, self.qm2)
    }
}

/// A separable isotonic problem over sorted data.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicProblem<T> {
    s: Vec<T>,
    w: Vec<T>,
    phi: PhiKind,
    reg: Regularizer<T>,
}

impl<T: Scalar> IsotonicProblem<T> {
    /// `s` and `w` must both be non-increasing and of equal length; `w ≥ 0`
    /// unless `phi` is the identity.
    pub fn new(s: Vec<T>, w: Vec<T>, phi: PhiKind, reg: Regularizer<T>) -> Result<Self> {
        check_vector(&s, "s")?;
        check_vector(&w, "w")?;
        if s.len() != w.len() {
            return Err(Error::LengthMismatch(s.len(), w.len()));
        }
        if s.windows(2).any(|p| p[0] < p[1]) {
            return Err(invalid("s must be sorted non-increasing"));
        }
        if w.windows(2).any(|p| p[0] < p[1]) {
            return Err(invalid("w must be sorted non-increasing"));
        }
        if phi != PhiKind::Identity && w.iter().any(|&v| v < T::zero()) {
            return Err(invalid(format!("w must be non-negative when phi is {phi}")));
        }
        Ok(IsotonicProblem { s, w, phi, reg })
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn s(&self) -> &[T] {
        &self.s
    }

    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn phi(&self) -> PhiKind {
        self.phi
    }

    pub fn reg(&self) -> &Regularizer<T> {
        &self.reg
    }

    /// `h_i(v)` in its isotonic form.
    pub fn h(&self, i: usize, v: T) -> T {
        let phi = self.phi.isotonic_form();
        self.reg.conj(self.s[i] - v) + self.w[i] * phi.eval(v)
    }

    /// `h_i'(v)`.
    pub fn dh(&self, i: usize, v: T) -> T {
        let phi = self.phi.isotonic_form();
        self.reg.conj_grad(v - self.s[i]) + self.w[i] * phi.deriv(v)
    }

    pub fn objective(&self, v: &[T]) -> T {
        debug_assert_eq!(v.len(), self.len());
        v.iter().enumerate().map(|(i, &vi)| self.h(i, vi)).sum()
    }
}

/// A maximal run `start..end` of coordinates sharing the value `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Block<T> {
    pub start: usize,
    pub end: usize,
    pub gamma: T,
    /// Set when the value was clipped to zero by the non-negativity constraint.
    pub clamped: bool,
}

impl<T> Block<T> {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicSolution<T> {
    pub v: Vec<T>,
    pub blocks: Vec<Block<T>>,
}

impl<T: Scalar> IsotonicSolution<T> {
    /// Expands blocks, which must tile `0..n` in order, into values.
    pub fn from_blocks(blocks: Vec<Block<T>>) -> Self {
        let n = blocks.last().map_or(0, |b| b.end);
        let mut v = Vec::with_capacity(n);
        for b in &blocks {
            v.extend(std::iter::repeat_n(b.gamma, b.len()));
        }
        IsotonicSolution { v, blocks }
    }

    /// Groups adjacent coordinates whose values differ by less than `tol`
    /// (or for which `joined(i)` holds for the pair `i, i+1`) and replaces
    /// each group by its mean.
    pub(crate) fn from_values_with(v: &[T], tol: T, joined: impl Fn(usize) -> bool) -> Self {
        let mut blocks = Vec::new();
        let mut start = 0;
        for i in 0..v.len() {
            let last = i + 1 == v.len();
            if last || !((v[i] - v[i + 1]).abs() < tol || joined(i)) {
                let len = T::from_count(i + 1 - start);
                let gamma = v[start..=i].iter().copied().sum::<T>() / len;
                blocks.push(Block { start, end: i + 1, gamma, clamped: false });
                start = i + 1;
            }
        }
        Self::from_blocks(blocks)
    }

    /// Builds a block structure from an iterate of an approximate solver.
    pub fn from_values(v: &[T], tol: T) -> Self {
        Self::from_values_with(v, tol, |_| false)
    }

    pub fn gammas(&self) -> Vec<T> {
        self.blocks.iter().map(|b| b.gamma).collect()
    }

    /// Projects onto the non-negative monotone cone: blocks with a negative
    /// value are clipped to zero and merged into one trailing clamped block.
    pub fn truncate_nonnegative(&mut self) {
        let Some(first_neg) = self.blocks.iter().position(|b| b.gamma < T::zero()) else {
            return;
        };
        let start = self.blocks[first_neg].start;
        let end = self.blocks.last().map_or(start, |b| b.end);
        self.blocks.truncate(first_neg);
        self.blocks.push(Block { start, end, gamma: T::zero(), clamped: true });
        for vi in &mut self.v[start..end] {
            *vi = T::zero();
        }
    }
}
