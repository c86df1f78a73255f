//! Scalar abstraction shared by every model computation.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type the simulator can be instantiated with.
///
/// `f64` is the production choice; `f32` works for the pure kernels but the
/// long-run conservation tolerances assume double precision.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal into the scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Magnitudes below this are treated as exact zero in ledgers.
pub const MONEY_EPS: f64 = 1e-12;

/// Rounds sub-epsilon residuals to zero.
pub fn snap<S: Real>(x: S) -> S {
    if x.abs() < S::lit(MONEY_EPS) {
        S::zero()
    } else {
        x
    }
}

/// Fixed 9-decimal rendering used by every output file. Values that round
/// to zero print without a sign.
pub fn fixed9(x: f64) -> String {
    let y = (x * 1e9).round() / 1e9;
    format!("{:.9}", if y == 0.0 { 0.0 } else { y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snap_rounds_tiny_residuals() {
        assert_eq!(snap(5e-13_f64), 0.0);
        assert_eq!(snap(-5e-13_f64), 0.0);
        assert_eq!(snap(2e-12_f64), 2e-12);
    }

    #[test]
    fn fixed9_drops_negative_zero() {
        assert_eq!(fixed9(-0.0), "0.000000000");
        assert_eq!(fixed9(-4e-10), "0.000000000");
        assert_eq!(fixed9(1.0 / 3.0), "0.333333333");
        assert_eq!(fixed9(-2.5), "-2.500000000");
    }

    #[test]
    fn literals_round_trip_for_both_widths() {
        assert_eq!(<f64 as Real>::lit(0.25), 0.25);
        assert_eq!(<f32 as Real>::lit(0.25), 0.25_f32);
        assert_eq!(<f32 as Real>::from_usize_lossy(700), 700.0);
    }
}
