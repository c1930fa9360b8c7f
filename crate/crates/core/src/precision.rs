//! Working precision for basis construction and evaluation.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use twofloat::TwoFloat;

use crate::error::{argument, Error};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    /// IEEE binary64.
    #[default]
    Double,
    /// Double-double (about 106 significand bits).
    Extended,
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::Double => "double",
            Precision::Extended => "extended",
        })
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "double" => Ok(Precision::Double),
            "extended" => Ok(Precision::Extended),
            other => Err(argument(format!(
                "unknown precision `{other}` (expected `double` or `extended`)"
            ))),
        }
    }
}

/// Arithmetic needed by the orthogonalization and recurrence code.
pub trait Scalar:
    Copy
    + Send
    + Sync
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    /// Rebuilds a value from its stored `(hi, lo)` split.
    fn from_parts(hi: f64, lo: f64) -> Self;
    fn parts(self) -> (f64, f64);
    fn zero() -> Self {
        Self::from_f64(0.0)
    }
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn from_parts(hi: f64, _lo: f64) -> Self {
        hi
    }
    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

/// Double-double number built on [`TwoFloat`] addition and multiplication.
///
/// Quotients and square roots are formed here by residual correction, which
/// keeps the low word accurate.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct DoubleDouble(pub TwoFloat);

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        DoubleDouble(self.0 + o.0)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        DoubleDouble(self.0 - o.0)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        DoubleDouble(self.0 * o.0)
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let d = o.0.hi();
        let q1 = self.0.hi() / d;
        let r = self.0 - o.0 * q1;
        let q2 = r.hi() / d;
        let r = r - o.0 * q2;
        let q3 = r.hi() / d;
        DoubleDouble(TwoFloat::from(q1) + q2 + q3)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble(-self.0)
    }
}

impl Scalar for DoubleDouble {
    fn from_f64(v: f64) -> Self {
        DoubleDouble(TwoFloat::from(v))
    }
    fn to_f64(self) -> f64 {
        f64::from(self.0)
    }
    fn sqrt(self) -> Self {
        let h = self.0.hi();
        if h <= 0.0 {
            return Self::from_f64(h.max(0.0).sqrt());
        }
        let s = h.sqrt();
        let r = self.0 - TwoFloat::new_mul(s, s);
        DoubleDouble(TwoFloat::from(s) + r.hi() / (2.0 * s))
    }
    fn abs(self) -> Self {
        DoubleDouble(self.0.abs())
    }
    fn from_parts(hi: f64, lo: f64) -> Self {
        DoubleDouble(TwoFloat::from(hi) + lo)
    }
    fn parts(self) -> (f64, f64) {
        (self.0.hi(), self.0.lo())
    }
}
