//! Scalar abstraction for the exact-algebra parts of the crate.
//!
//! Polynomial arithmetic, the cubic variance transform and the closed-form
//! ODE solution only need field operations, so they are written against
//! [`Scalar`] and work for `f32`, `f64` and exact rationals alike.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

/// A field element usable as a polynomial coefficient.
pub trait Scalar:
    Clone + Debug + PartialOrd + Signed + FromPrimitive + ToPrimitive + Send + Sync + 'static
{
    /// True when `self` is indistinguishable from zero next to a quantity of
    /// magnitude `scale`. Exact types answer `is_zero()`.
    fn is_negligible(&self, scale: &Self) -> bool;

    fn from_i64_exact(v: i64) -> Self {
        Self::from_i64(v).expect("integer fits every scalar type")
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn is_negligible(&self, scale: &Self) -> bool {
        self.abs() <= 1e-10 * scale.abs().max(1.0)
    }
}

impl Scalar for f32 {
    fn is_negligible(&self, scale: &Self) -> bool {
        self.abs() <= 1e-4 * scale.abs().max(1.0)
    }
}

impl Scalar for BigRational {
    fn is_negligible(&self, _scale: &Self) -> bool {
        self.is_zero()
    }
}

/// Exact rational from a small integer ratio.
pub fn rational(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}
