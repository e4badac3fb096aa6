//! Scalar abstractions.
//!
//! The torus, Dirichlet and variational engines work over any [`Real`]
//! (`f32`, `f64`). The cylinder engine works over any [`ChainScalar`], which
//! includes exact rationals so that norm and doubling identities can be
//! checked without rounding.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive, Zero};

/// Floating point scalar for the flat-torus engines.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Every `Real` can represent (a rounding of) any
    /// finite `f64`, so this never fails for finite input.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Scalar for cylinder chains: either `f64` or an exact rational.
pub trait ChainScalar: Clone + PartialOrd + Debug + Display + Num + Send + Sync {
    fn from_rational(r: &BigRational) -> Self;

    fn to_f64(&self) -> f64;

    /// Exact rational value, `None` for non-finite floats.
    fn to_rational(&self) -> Option<BigRational>;

    /// Comparison slack for values that agree exactly in real arithmetic.
    fn slack() -> Self;

    fn is_exact() -> bool;

    fn from_i64(v: i64) -> Self {
        Self::from_rational(&BigRational::from_integer(BigInt::from(v)))
    }
}

impl ChainScalar for f64 {
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_rational(&self) -> Option<BigRational> {
        BigRational::from_float(*self)
    }

    fn slack() -> Self {
        1e-12
    }

    fn is_exact() -> bool {
        false
    }
}

impl ChainScalar for BigRational {
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn to_rational(&self) -> Option<BigRational> {
        Some(self.clone())
    }

    fn slack() -> Self {
        BigRational::zero()
    }

    fn is_exact() -> bool {
        true
    }
}

/// `tol`, raised to a few ulps of `T` when `T` cannot resolve it.
pub fn tolerance<T: Real>(tol: f64) -> T {
    T::lit(tol).max(T::epsilon() * T::lit(64.0))
}

/// Relative closeness `|a - b| <= tol * max(1, |a|, |b|)`.
pub fn close<T: Real>(a: T, b: T, tol: T) -> bool {
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= tol * scale
}
