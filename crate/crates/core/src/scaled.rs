//! Binary64 values carried as `mantissa · 2^scale` so that long matrix
//! products neither overflow nor underflow.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};

/// `mantissa · 2^log2_scale` with `|mantissa| ∈ [1, 2)` or `mantissa = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledEntry {
    mantissa: f64,
    log2_scale: i64,
}

/// Splits a finite nonzero `x` into `(m, e)` with `|m| ∈ [1, 2)` and `x = m·2^e`.
fn split(x: f64) -> (f64, i64) {
    if x == 0.0 || !x.is_finite() {
        return (x, 0);
    }
    let mut e = x.abs().log2().floor() as i64;
    let mut m = x * pow2(-e);
    // log2 can be off by one near powers of two.
    while m.abs() >= 2.0 {
        m *= 0.5;
        e += 1;
    }
    while m.abs() < 1.0 {
        m *= 2.0;
        e -= 1;
    }
    (m, e)
}

/// Exact `2^e`, composed in steps so that it never overflows in between.
fn pow2(e: i64) -> f64 {
    let mut remaining = e;
    let mut out = 1.0f64;
    while remaining > 1000 {
        out *= 2f64.powi(1000);
        remaining -= 1000;
    }
    while remaining < -1000 {
        out *= 2f64.powi(-1000);
        remaining += 1000;
    }
    out * 2f64.powi(remaining as i32)
}

impl ScaledEntry {
    pub const ZERO: ScaledEntry = ScaledEntry {
        mantissa: 0.0,
        log2_scale: 0,
    };

    pub fn from_f64(x: f64) -> Self {
        Self::from_parts(x, 0).expect("scale 0 cannot overflow")
    }

    /// Normalizes `mantissa · 2^scale`.
    pub fn from_parts(mantissa: f64, scale: i64) -> Result<Self> {
        if mantissa == 0.0 {
            return Ok(Self::ZERO);
        }
        let (m, e) = split(mantissa);
        let log2_scale = scale.checked_add(e).ok_or(Error::ScaleOverflow)?;
        Ok(ScaledEntry {
            mantissa: m,
            log2_scale,
        })
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    pub fn log2_scale(&self) -> i64 {
        self.log2_scale
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0.0
    }

    pub fn signum(&self) -> f64 {
        if self.mantissa == 0.0 {
            0.0
        } else {
            self.mantissa.signum()
        }
    }

    /// The plain value; saturates to ±∞ or 0 outside the binary64 range.
    pub fn to_f64(&self) -> f64 {
        self.mantissa * pow2(self.log2_scale)
    }

    /// Natural log of the absolute value.
    pub fn ln_abs(&self) -> f64 {
        if self.mantissa == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.mantissa.abs().ln() + self.log2_scale as f64 * std::f64::consts::LN_2
    }

    pub fn scale_by(&self, factor: f64) -> Result<Self> {
        Self::from_parts(self.mantissa * factor, self.log2_scale)
    }

    pub fn mul(&self, other: &ScaledEntry) -> Result<Self> {
        let scale = self
            .log2_scale
            .checked_add(other.log2_scale)
            .ok_or(Error::ScaleOverflow)?;
        Self::from_parts(self.mantissa * other.mantissa, scale)
    }

    pub fn add(&self, other: &ScaledEntry) -> Result<Self> {
        if self.is_zero() {
            return Ok(*other);
        }
        if other.is_zero() {
            return Ok(*self);
        }
        let (hi, lo) = if self.log2_scale >= other.log2_scale {
            (self, other)
        } else {
            (other, self)
        };
        let shift = hi.log2_scale - lo.log2_scale;
        let lo_m = if shift > 1100 {
            0.0
        } else {
            lo.mantissa * pow2(-shift)
        };
        Self::from_parts(hi.mantissa + lo_m, hi.log2_scale)
    }

    pub fn neg(&self) -> Self {
        ScaledEntry {
            mantissa: -self.mantissa,
            log2_scale: self.log2_scale,
        }
    }

    pub fn sub(&self, other: &ScaledEntry) -> Result<Self> {
        self.add(&other.neg())
    }

    /// `self / other` as a plain float.
    pub fn ratio_to(&self, other: &ScaledEntry) -> f64 {
        let shift = self.log2_scale.saturating_sub(other.log2_scale);
        (self.mantissa / other.mantissa) * pow2(shift.clamp(-4000, 4000))
    }
}

impl PartialOrd for ScaledEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.sub(other)
            .ok()
            .and_then(|d| d.mantissa.partial_cmp(&0.0))
    }
}

impl fmt::Display for ScaledEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.mantissa, self.log2_scale)
    }
}

/// Row vector `[x, y]` sharing one power-of-two scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledRow {
    pub v: [f64; 2],
    pub log2_scale: i64,
}

impl ScaledRow {
    pub fn unit(i: usize) -> Self {
        let v = if i == 1 { [1.0, 0.0] } else { [0.0, 1.0] };
        ScaledRow { v, log2_scale: 0 }
    }

    /// Pulls the larger component's binary exponent into the shared scale.
    pub fn renormalize(&mut self) -> Result<()> {
        let big = self.v[0].abs().max(self.v[1].abs());
        if big == 0.0 || !big.is_finite() {
            return Ok(());
        }
        let (_, e) = split(big);
        let f = pow2(-e);
        self.v[0] *= f;
        self.v[1] *= f;
        self.log2_scale = self.log2_scale.checked_add(e).ok_or(Error::ScaleOverflow)?;
        Ok(())
    }

    pub fn component(&self, j: usize) -> Result<ScaledEntry> {
        ScaledEntry::from_parts(self.v[j - 1], self.log2_scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn split_normalizes() {
        let s = ScaledEntry::from_f64(8.0);
        assert_eq!((s.mantissa(), s.log2_scale()), (1.0, 3));
        let s = ScaledEntry::from_f64(-0.75);
        assert_eq!((s.mantissa(), s.log2_scale()), (-1.5, -1));
        assert_eq!(ScaledEntry::from_f64(0.0), ScaledEntry::ZERO);
    }

    #[test]
    fn survives_overflow() {
        let big = ScaledEntry::from_f64(1e300);
        let sq = big.mul(&big).unwrap();
        assert_eq!(sq.to_f64(), f64::INFINITY);
        assert!((sq.ln_abs() - 600.0 * 10f64.ln()).abs() < 1e-9);
        assert!((sq.ratio_to(&big) / 1e300 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scale_overflow_is_reported() {
        let s = ScaledEntry::from_parts(1.0, i64::MAX).unwrap();
        assert!(matches!(s.mul(&s), Err(Error::ScaleOverflow)));
    }

    #[test]
    fn add_and_sub() {
        let a = ScaledEntry::from_f64(3.0);
        let b = ScaledEntry::from_f64(5.0);
        assert_eq!(a.add(&b).unwrap().to_f64(), 8.0);
        assert_eq!(a.sub(&b).unwrap().to_f64(), -2.0);
        assert_eq!(a.sub(&a).unwrap(), ScaledEntry::ZERO);
        assert!(a < b);
    }

    #[test]
    fn row_renormalize() {
        let mut r = ScaledRow {
            v: [1e200, 3e199],
            log2_scale: 5,
        };
        r.renormalize().unwrap();
        assert!(r.v[0] >= 1.0 && r.v[0] < 2.0);
        let x = r.component(1).unwrap();
        assert!((x.ln_abs() - (1e200f64.ln() + 5.0 * std::f64::consts::LN_2)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn normalized_roundtrip(x in -1e300f64..1e300, s in -5000i64..5000) {
            let e = ScaledEntry::from_parts(x, s).unwrap();
            if x != 0.0 {
                prop_assert!(e.mantissa().abs() >= 1.0 && e.mantissa().abs() < 2.0);
            }
            let back = ScaledEntry::from_parts(e.mantissa(), e.log2_scale() - s).unwrap();
            prop_assert_eq!(back.to_f64(), x);
        }

        #[test]
        fn mul_matches_float(x in -1e100f64..1e100, y in -1e100f64..1e100) {
            let p = ScaledEntry::from_f64(x).mul(&ScaledEntry::from_f64(y)).unwrap();
            prop_assert_eq!(p.to_f64(), x * y);
        }
    }
}
