//! Scalar abstractions.
//!
//! Community-level metrics only need field arithmetic, so they are written
//! against [`Field`] and run unchanged on `f32`, `f64` and exact rationals.
//! Everything that touches infinities, logarithms or iterative solvers is
//! written against [`Real`] (`f32`/`f64`).

use std::fmt::{Debug, Display, LowerExp};

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field with a notion of finiteness.
pub trait Field: Num + Clone + PartialOrd + Debug {
    fn from_count(count: u64) -> Self;

    fn from_len(n: usize) -> Self {
        Self::from_count(n as u64)
    }

    fn is_finite_value(&self) -> bool;

    /// Lossy conversion used for diagnostics and error payloads.
    fn approx_f64(&self) -> f64;
}

macro_rules! impl_field_float {
    ($($t:ty),*) => {$(
        impl Field for $t {
            fn from_count(count: u64) -> Self {
                count as $t
            }
            fn is_finite_value(&self) -> bool {
                self.is_finite()
            }
            fn approx_f64(&self) -> f64 {
                *self as f64
            }
        }
    )*};
}
impl_field_float!(f32, f64);

macro_rules! impl_field_ratio {
    ($($t:ty),*) => {$(
        impl Field for Ratio<$t> {
            fn from_count(count: u64) -> Self {
                Ratio::from_integer(count as $t)
            }
            fn is_finite_value(&self) -> bool {
                true
            }
            fn approx_f64(&self) -> f64 {
                self.to_f64().unwrap_or(f64::NAN)
            }
        }
    )*};
}
impl_field_ratio!(i64, i128);

impl Field for BigRational {
    fn from_count(count: u64) -> Self {
        Ratio::from_integer(BigInt::from(count))
    }
    fn is_finite_value(&self) -> bool {
        true
    }
    fn approx_f64(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Floating-point scalar used by the modelling layers.
pub trait Real:
    Float + Field + FromPrimitive + Debug + Display + LowerExp + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only for types that cannot hold a
    /// finite `f64`, which no implementor does.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn pi() -> Self;
}

impl Real for f32 {
    fn pi() -> Self {
        std::f32::consts::PI
    }
}

impl Real for f64 {
    fn pi() -> Self {
        std::f64::consts::PI
    }
}

/// Shortest representation that parses back to the same value, with
/// `inf`/`-inf`/`nan` literals for the non-finite cases.
pub fn format_real<T: Real>(x: T) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x > T::zero() { "inf" } else { "-inf" }.to_string();
    }
    let v = x.to_f64_lossy();
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}
