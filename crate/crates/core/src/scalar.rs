use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{Num, Signed, ToPrimitive};

/// Number type that dimension forms and fitted statistics can be evaluated in.
///
/// Implemented for `f32`, `f64`, [`Rational64`] and [`BigRational`].
pub trait Scalar: Clone + Debug + PartialOrd + Num + Signed {
    fn from_i64(v: i64) -> Self;

    /// Conversion from an exact rational. Lossy for floats and for
    /// `Rational64` when the value does not fit.
    fn from_exact(v: &BigRational) -> Self;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }

    fn from_exact(v: &BigRational) -> Self {
        v.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {
    fn from_i64(v: i64) -> Self {
        v as f32
    }

    fn from_exact(v: &BigRational) -> Self {
        v.to_f32().unwrap_or(f32::NAN)
    }
}

impl Scalar for BigRational {
    fn from_i64(v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_exact(v: &BigRational) -> Self {
        v.clone()
    }
}

impl Scalar for Rational64 {
    fn from_i64(v: i64) -> Self {
        Rational64::from_integer(v)
    }

    fn from_exact(v: &BigRational) -> Self {
        match (v.numer().to_i64(), v.denom().to_i64()) {
            (Some(n), Some(d)) => Rational64::new(n, d),
            _ => panic!("rational {v} does not fit in Rational64"),
        }
    }
}
