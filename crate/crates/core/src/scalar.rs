//! Scalar traits the math modules are generic over.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive};
use rand::Rng;

use crate::Rational;

/// Floating-point scalar used by geometry, quadrature and simulation.
pub trait Real: Float + FromPrimitive + Debug + Default + Send + Sync + 'static {
    /// Uniform draw from `[0, 1)`.
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self;

    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }
}

impl Real for f64 {
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f64>()
    }
}

impl Real for f32 {
    fn sample_unit<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.gen::<f32>()
    }
}

/// A field the closed-form formulas can be evaluated in: exact rationals,
/// or floats when only an approximation is wanted.
pub trait Field: Clone + Num + PartialOrd + Debug + Send + Sync {
    fn from_ratio(numer: i64, denom: i64) -> Self;

    fn from_bigint(n: &BigInt) -> Self;

    fn to_f64(&self) -> f64;
}

impl Field for Rational {
    fn from_ratio(numer: i64, denom: i64) -> Self {
        Rational::new(numer.into(), denom.into())
    }

    fn from_bigint(n: &BigInt) -> Self {
        Rational::from_integer(n.clone())
    }

    fn to_f64(&self) -> f64 {
        crate::rational::to_f64(self)
    }
}

macro_rules! float_field {
    ($t:ty) => {
        impl Field for $t {
            fn from_ratio(numer: i64, denom: i64) -> Self {
                numer as $t / denom as $t
            }

            fn from_bigint(n: &BigInt) -> Self {
                n.to_f64().unwrap_or(f64::NAN) as $t
            }

            fn to_f64(&self) -> f64 {
                *self as f64
            }
        }
    };
}

float_field!(f32);
float_field!(f64);
