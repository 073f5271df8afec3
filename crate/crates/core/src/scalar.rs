//! Scalar abstraction shared by every operator in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the solvers and operators are generic over.
///
/// Implemented for `f32` and `f64`. Tolerances are expressed as `f64`
/// literals and converted with [`Scalar::lit`]; on `f32` they are floored at
/// a few ulps so that convergence tests stay meaningful.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into `Self`.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable as scalar")
    }

    /// Converts a count into `Self`.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable as scalar")
    }

    /// `max(tol, 4 * epsilon)`, the smallest tolerance worth asking for.
    fn tol(tol: f64) -> Self {
        Self::lit(tol).max(Self::epsilon() * Self::lit(4.0))
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Unsigned key with the same order as the value; `-0` and `+0` share a key.
    fn order_key(self) -> u64 {
        let bits = (self.as_f64() + 0.0).to_bits();
        if bits >> 63 == 1 {
            !bits
        } else {
            bits | 1 << 63
        }
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Sign with `sign(0) = 0`.
pub(crate) fn sign0<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// `|x|^e` with a fast path for small integer exponents.
pub(crate) fn abs_pow<T: Scalar>(x: T, e: Exponent<T>) -> T {
    let a = x.abs();
    match e {
        Exponent::Int(0) => T::one(),
        Exponent::Int(1) => a,
        Exponent::Int(i) => a.powi(i),
        Exponent::Real(r) => {
            if a == T::zero() {
                if r > T::zero() {
                    T::zero()
                } else {
                    T::infinity()
                }
            } else {
                a.powf(r)
            }
        }
    }
}

/// An exponent that is either an exact small integer or a general real.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Exponent<T> {
    Int(i32),
    Real(T),
}

impl<T: Scalar> Exponent<T> {
    /// Snaps `e` to the nearest integer when within `1e-9` of it.
    pub(crate) fn new(e: T) -> Self {
        let r = e.round();
        if (e - r).abs() <= T::lit(1e-9) && r.abs() <= T::lit(64.0) {
            Exponent::Int(r.to_i32().unwrap_or(0))
        } else {
            Exponent::Real(e)
        }
    }
}
