use std::fmt;

use serde::{Deserialize, Serialize};

use super::SoftFloatError;

/// Smallest permitted exponent width.
pub const MIN_EXP_BITS: u32 = 2;
/// Largest permitted exponent width.
pub const MAX_EXP_BITS: u32 = 19;
/// Smallest permitted stored-mantissa width.
pub const MIN_MAN_BITS: u32 = 1;
/// Largest permitted stored-mantissa width.
pub const MAX_MAN_BITS: u32 = 256;

/// A binary interchange-style format described by its exponent and stored
/// mantissa (fraction) widths. The leading significand bit is implicit, so the
/// precision is `man_bits + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FloatFormat {
    exp_bits: u32,
    man_bits: u32,
}

impl FloatFormat {
    pub const BINARY64: FloatFormat = FloatFormat { exp_bits: 11, man_bits: 52 };
    pub const BINARY32: FloatFormat = FloatFormat { exp_bits: 8, man_bits: 23 };
    pub const BINARY16: FloatFormat = FloatFormat { exp_bits: 5, man_bits: 10 };
    /// The 8-bit format with a 5-bit exponent and 2-bit mantissa.
    pub const FP8_E5M2: FloatFormat = FloatFormat { exp_bits: 5, man_bits: 2 };

    pub fn new(exp_bits: u32, man_bits: u32) -> Result<Self, SoftFloatError> {
        if !(MIN_EXP_BITS..=MAX_EXP_BITS).contains(&exp_bits) {
            return Err(SoftFloatError::ExponentRange { exp_bits });
        }
        if !(MIN_MAN_BITS..=MAX_MAN_BITS).contains(&man_bits) {
            return Err(SoftFloatError::MantissaRange { man_bits });
        }
        Ok(FloatFormat { exp_bits, man_bits })
    }

    pub fn exp_bits(self) -> u32 {
        self.exp_bits
    }

    pub fn man_bits(self) -> u32 {
        self.man_bits
    }

    /// Significand precision including the implicit bit.
    pub fn precision(self) -> u32 {
        self.man_bits + 1
    }

    /// Total encoded width: sign + exponent + mantissa.
    pub fn width(self) -> u32 {
        1 + self.exp_bits + self.man_bits
    }

    pub fn bias(self) -> i64 {
        (1i64 << (self.exp_bits - 1)) - 1
    }

    /// Exponent of the largest finite binade.
    pub fn emax(self) -> i64 {
        self.bias()
    }

    /// Exponent of the smallest normal binade.
    pub fn emin(self) -> i64 {
        1 - self.bias()
    }

    /// True when every binary64 value is exactly representable in `self`.
    pub fn contains_binary64(self) -> bool {
        self.man_bits >= 52 && self.emax() >= 1023 && self.emin() - i64::from(self.man_bits) <= -1074
    }
}

impl fmt::Display for FloatFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.exp_bits, self.man_bits)
    }
}

/// Rounding target: a format plus the underflow behaviour.
///
/// With `gradual_underflow` off, results whose rounded magnitude falls below
/// the smallest normal are flushed to a signed zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rounding {
    pub format: FloatFormat,
    pub gradual_underflow: bool,
}

impl Rounding {
    pub fn new(format: FloatFormat) -> Self {
        Rounding { format, gradual_underflow: true }
    }

    pub fn flush_to_zero(format: FloatFormat) -> Self {
        Rounding { format, gradual_underflow: false }
    }

    pub(crate) fn target(self) -> Target {
        Target {
            prec: u64::from(self.format.precision()),
            emin: self.format.emin(),
            emax: self.format.emax(),
            subnormals: self.gradual_underflow,
        }
    }
}

impl From<FloatFormat> for Rounding {
    fn from(format: FloatFormat) -> Self {
        Rounding::new(format)
    }
}

/// Internal rounding target. Unlike [`FloatFormat`] it is not bounded, so
/// transcendental evaluation can run at working precisions above the cap.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Target {
    pub prec: u64,
    pub emin: i64,
    pub emax: i64,
    pub subnormals: bool,
}
