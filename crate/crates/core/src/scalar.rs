//! Numeric abstraction shared by the model, the simplex engine and branch-and-bound.
//!
//! Floating types carry nonzero tolerances; the exact rational type uses zero
//! tolerances so every comparison is exact.

use std::fmt::{Debug, Display};
use std::ops::Neg;

use num_rational::Ratio;
use num_traits::{FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Copy
    + PartialOrd
    + Debug
    + Display
    + Num
    + Neg<Output = Self>
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// Entries smaller than this in magnitude are not accepted as pivots.
    fn pivot_tol() -> Self;
    /// Primal feasibility tolerance on variable bounds.
    fn feas_tol() -> Self;
    /// Dual (reduced cost) tolerance.
    fn opt_tol() -> Self;

    fn abs(self) -> Self;
    fn floor(self) -> Self;
    fn ceil(self) -> Self;

    /// Lossy conversion used for model data given in `f64`.
    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn pivot_tol() -> Self {
        1e-9
    }
    fn feas_tol() -> Self {
        1e-9
    }
    fn opt_tol() -> Self {
        1e-9
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn floor(self) -> Self {
        f64::floor(self)
    }
    fn ceil(self) -> Self {
        f64::ceil(self)
    }
    fn from_f64_lossy(v: f64) -> Self {
        v
    }
}

impl Scalar for f32 {
    fn pivot_tol() -> Self {
        1e-5
    }
    fn feas_tol() -> Self {
        1e-4
    }
    fn opt_tol() -> Self {
        1e-5
    }
    fn abs(self) -> Self {
        f32::abs(self)
    }
    fn floor(self) -> Self {
        f32::floor(self)
    }
    fn ceil(self) -> Self {
        f32::ceil(self)
    }
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }
}

/// Exact rational arithmetic on 128-bit integers. Intended for small models
/// (tests, certificates); large tableaus overflow.
pub type Rational = Ratio<i128>;

impl Scalar for Rational {
    fn pivot_tol() -> Self {
        Ratio::from_integer(0)
    }
    fn feas_tol() -> Self {
        Ratio::from_integer(0)
    }
    fn opt_tol() -> Self {
        Ratio::from_integer(0)
    }
    fn abs(self) -> Self {
        if self < Ratio::from_integer(0) {
            -self
        } else {
            self
        }
    }
    fn floor(self) -> Self {
        Ratio::floor(&self)
    }
    fn ceil(self) -> Self {
        Ratio::ceil(&self)
    }
    fn from_f64_lossy(v: f64) -> Self {
        // Decimal data such as 0.93 has no short binary expansion; approximate
        // with a bounded denominator so later pivots do not overflow.
        let scaled = (v * 1e9).round() as i128;
        Ratio::new(scaled, 1_000_000_000)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_tolerances_are_exact() {
        assert_eq!(Rational::feas_tol(), Ratio::from_integer(0));
        let third = Ratio::new(1i128, 3);
        assert_eq!(Scalar::floor(third), Ratio::from_integer(0));
        assert_eq!(Scalar::ceil(third), Ratio::from_integer(1));
        assert_eq!(Scalar::abs(-third), third);
    }

    #[test]
    fn decimal_import_is_stable() {
        let r = Rational::from_f64_lossy(0.93);
        assert_eq!(r, Ratio::new(93, 100));
        assert_eq!(Rational::from_f64_lossy(1278.75), Ratio::new(127875, 100));
    }
}
