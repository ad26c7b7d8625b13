//! Scalar abstractions.
//!
//! Fitting and correlation code is written against [`Real`] (`f32`/`f64`),
//! exact sums against [`Weight`] (integers, rationals, or floats).

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, Num, Signed};

/// Floating point type used by the correlation and fitting machinery.
pub trait Real: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Convert a `f64` constant, panicking only for unrepresentable values.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Ratio of two counts.
    fn ratio(num: u64, den: u64) -> Self {
        Self::from_u64(num).unwrap() / Self::from_u64(den).unwrap()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Coefficient type of observables. Sums over orbits are computed in this
/// type, so integer and rational instantiations are exact.
pub trait Weight: Clone + Num + Signed + PartialOrd + Debug + Display + Send + Sync {
    fn from_i64(x: i64) -> Self;
    fn from_u64(x: u64) -> Self;
    /// Lossy view, only used for trend reports.
    fn to_f64(&self) -> f64;
}

impl Weight for i64 {
    fn from_i64(x: i64) -> Self {
        x
    }
    fn from_u64(x: u64) -> Self {
        i64::try_from(x).expect("count fits in i64")
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Weight for i128 {
    fn from_i64(x: i64) -> Self {
        x as i128
    }
    fn from_u64(x: u64) -> Self {
        x as i128
    }
    fn to_f64(&self) -> f64 {
        *self as f64
    }
}

impl Weight for BigInt {
    fn from_i64(x: i64) -> Self {
        BigInt::from(x)
    }
    fn from_u64(x: u64) -> Self {
        BigInt::from(x)
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Weight for BigRational {
    fn from_i64(x: i64) -> Self {
        Ratio::from_integer(BigInt::from(x))
    }
    fn from_u64(x: u64) -> Self {
        Ratio::from_integer(BigInt::from(x))
    }
    fn to_f64(&self) -> f64 {
        num_traits::ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

impl Weight for f64 {
    fn from_i64(x: i64) -> Self {
        x as f64
    }
    fn from_u64(x: u64) -> Self {
        x as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}
