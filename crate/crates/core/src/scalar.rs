//! Ordered-field abstraction shared by the binary64 fast path and the exact
//! rational oracle.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive};

/// Exact rational scalar used by the oracle.
pub type Rational = BigRational;

/// An ordered field usable by every generic routine in this crate.
pub trait Scalar:
    Num + Signed + Clone + PartialOrd + Debug + ToPrimitive + Send + Sync + 'static
{
    /// Lossy (for floats: exact) conversion from binary64.
    fn from_f64(x: f64) -> Self;

    fn from_i64(x: i64) -> Self;

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Whether the value must be treated as a zero denominator.
    fn is_singular(&self) -> bool;
}

/// Denominators below this magnitude are treated as singular in binary64.
pub const FLOAT_SINGULAR_THRESHOLD: f64 = 1e-300;

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn from_i64(x: i64) -> Self {
        x as f64
    }

    fn is_singular(&self) -> bool {
        !(self.abs() >= FLOAT_SINGULAR_THRESHOLD)
    }
}

impl Scalar for BigRational {
    /// Exact conversion of the binary64 value. Panics on non-finite input.
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("non-finite float has no rational value")
    }

    fn from_i64(x: i64) -> Self {
        BigRational::from_integer(BigInt::from(x))
    }

    fn is_singular(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
}

/// `num/den` as an exact rational.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Relative error of `approx` against an exact value (absolute error when the value is 0).
pub fn rel_err(approx: f64, exact: &Rational) -> f64 {
    let exact_f = exact.to_f64().unwrap_or(f64::NAN);
    let diff = Rational::from_float(approx).map_or(f64::INFINITY, |a| {
        (a - exact).abs().to_f64().unwrap_or(f64::INFINITY)
    });
    if exact_f == 0.0 {
        diff
    } else {
        diff / exact_f.abs()
    }
}
