//! Arbitrary-precision binary floating-point engine.
//!
//! Every operation is computed exactly on integer mantissas and rounded once
//! (round-to-nearest, ties-to-even) into the requested [`FloatFormat`]. Formats
//! narrower than or equal to binary64 take an allocation-free `u128` path;
//! everything else goes through `BigUint`.
//!
//! Elementary functions ([`elementary`]) are faithfully rounded: they are
//! evaluated with at least 32 guard bits and rounded once, so the result is
//! within one ulp of the exact value but not always the nearest.

mod elementary;
mod fast;
mod format;
pub mod oracle;
mod round;
mod value;
mod wide;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use elementary::ElementaryFn;
pub use format::{FloatFormat, Rounding, MAX_EXP_BITS, MAX_MAN_BITS, MIN_EXP_BITS, MIN_MAN_BITS};
pub use value::{BigFloat, FloatClass, RoundingReport};

pub(crate) use format::Target;
use value::Repr;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SoftFloatError {
    #[error("exponent width {exp_bits} outside [{MIN_EXP_BITS}, {MAX_EXP_BITS}]")]
    ExponentRange { exp_bits: u32 },
    #[error("mantissa width {man_bits} outside [{MIN_MAN_BITS}, {MAX_MAN_BITS}]")]
    MantissaRange { man_bits: u32 },
    #[error("unimplemented elementary function `{0}`")]
    Unimplemented(String),
    #[error("`{name}` expects {expected} operand(s), got {got}")]
    Arity { name: &'static str, expected: usize, got: usize },
}

/// Basic correctly-rounded operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Fma,
}

impl ArithOp {
    pub fn arity(self) -> usize {
        match self {
            ArithOp::Sqrt => 1,
            ArithOp::Fma => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ArithOp::Add => "add",
            ArithOp::Sub => "sub",
            ArithOp::Mul => "mul",
            ArithOp::Div => "div",
            ArithOp::Sqrt => "sqrt",
            ArithOp::Fma => "fma",
        }
    }
}

impl fmt::Display for ArithOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArithOp {
    type Err = SoftFloatError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "add" => ArithOp::Add,
            "sub" => ArithOp::Sub,
            "mul" => ArithOp::Mul,
            "div" => ArithOp::Div,
            "sqrt" => ArithOp::Sqrt,
            "fma" => ArithOp::Fma,
            other => return Err(SoftFloatError::Unimplemented(other.to_string())),
        })
    }
}

/// Round `x` to the nearest value representable in `rounding`'s format.
pub fn round_to_format(x: &BigFloat, rounding: impl Into<Rounding>) -> RoundingReport {
    round_to_target(x, &rounding.into().target())
}

pub(crate) fn round_to_target(x: &BigFloat, t: &Target) -> RoundingReport {
    match &x.repr {
        Repr::Finite { exp, man } => match man {
            value::Mantissa::Small(m) => round::round_mag(x.neg, *exp, u128::from(*m), false, t),
            value::Mantissa::Big(m) => round::round_mag(x.neg, *exp, m.clone(), false, t),
        },
        _ => RoundingReport::exact(x.clone()),
    }
}

#[inline]
fn use_fast(t: &Target) -> bool {
    t.prec <= u64::from(fast::MAX_BITS)
}

/// Correctly rounded `a + b`.
pub fn add(a: &BigFloat, b: &BigFloat, rounding: impl Into<Rounding>) -> RoundingReport {
    add_target(a, b, &rounding.into().target())
}

/// Correctly rounded `a - b`.
pub fn sub(a: &BigFloat, b: &BigFloat, rounding: impl Into<Rounding>) -> RoundingReport {
    let t = rounding.into().target();
    add_signed(a, b, true, &t)
}

pub(crate) fn add_target(a: &BigFloat, b: &BigFloat, t: &Target) -> RoundingReport {
    add_signed(a, b, false, t)
}

fn add_signed(a: &BigFloat, b: &BigFloat, negate_b: bool, t: &Target) -> RoundingReport {
    let bneg = b.neg != negate_b;
    match (&a.repr, &b.repr) {
        (Repr::Nan, _) | (_, Repr::Nan) => RoundingReport::exact(BigFloat::NAN),
        (Repr::Inf, Repr::Inf) if a.neg != bneg => RoundingReport::exact(BigFloat::NAN),
        (Repr::Inf, _) => RoundingReport::exact(a.clone()),
        (_, Repr::Inf) => RoundingReport::exact(BigFloat::infinity(bneg)),
        (Repr::Zero, Repr::Zero) => RoundingReport::exact(BigFloat::zero(a.neg && bneg)),
        (Repr::Zero, _) => {
            let mut r = round_to_target(b, t);
            if negate_b {
                r.rounded = -r.rounded;
            }
            r
        }
        (_, Repr::Zero) => round_to_target(a, t),
        _ => {
            if use_fast(t) {
                if let (Some(pa), Some(mut pb)) = (a.small_parts(fast::MAX_BITS), b.small_parts(fast::MAX_BITS)) {
                    pb.0 = bneg;
                    return fast::add(pa, pb, t);
                }
            }
            let pa = a.big_parts().expect("finite");
            let mut pb = b.big_parts().expect("finite");
            pb.0 = bneg;
            wide::add(pa, pb, t)
        }
    }
}

/// Correctly rounded `a * b`.
pub fn mul(a: &BigFloat, b: &BigFloat, rounding: impl Into<Rounding>) -> RoundingReport {
    mul_target(a, b, &rounding.into().target())
}

pub(crate) fn mul_target(a: &BigFloat, b: &BigFloat, t: &Target) -> RoundingReport {
    let sign = a.neg != b.neg;
    match (&a.repr, &b.repr) {
        (Repr::Nan, _) | (_, Repr::Nan) => RoundingReport::exact(BigFloat::NAN),
        (Repr::Inf, Repr::Zero) | (Repr::Zero, Repr::Inf) => RoundingReport::exact(BigFloat::NAN),
        (Repr::Inf, _) | (_, Repr::Inf) => RoundingReport::exact(BigFloat::infinity(sign)),
        (Repr::Zero, _) | (_, Repr::Zero) => RoundingReport::exact(BigFloat::zero(sign)),
        _ => {
            if use_fast(t) {
                if let (Some(pa), Some(pb)) = (a.small_parts(fast::MAX_BITS), b.small_parts(fast::MAX_BITS)) {
                    return fast::mul(pa, pb, t);
                }
            }
            wide::mul(a.big_parts().expect("finite"), b.big_parts().expect("finite"), t)
        }
    }
}

/// Correctly rounded `a / b`. Division of a non-zero by zero yields a signed
/// infinity; `0/0` and `inf/inf` yield NaN.
pub fn div(a: &BigFloat, b: &BigFloat, rounding: impl Into<Rounding>) -> RoundingReport {
    div_target(a, b, &rounding.into().target())
}

pub(crate) fn div_target(a: &BigFloat, b: &BigFloat, t: &Target) -> RoundingReport {
    let sign = a.neg != b.neg;
    match (&a.repr, &b.repr) {
        (Repr::Nan, _) | (_, Repr::Nan) => RoundingReport::exact(BigFloat::NAN),
        (Repr::Inf, Repr::Inf) | (Repr::Zero, Repr::Zero) => RoundingReport::exact(BigFloat::NAN),
        (Repr::Inf, _) | (_, Repr::Zero) => RoundingReport::exact(BigFloat::infinity(sign)),
        (Repr::Zero, _) | (_, Repr::Inf) => RoundingReport::exact(BigFloat::zero(sign)),
        _ => {
            if use_fast(t) {
                if let (Some(pa), Some(pb)) = (a.small_parts(fast::MAX_BITS), b.small_parts(fast::MAX_BITS)) {
                    return fast::div(pa, pb, t);
                }
            }
            wide::div(a.big_parts().expect("finite"), b.big_parts().expect("finite"), t)
        }
    }
}

/// Correctly rounded square root; negative non-zero operands yield NaN.
pub fn sqrt(a: &BigFloat, rounding: impl Into<Rounding>) -> RoundingReport {
    sqrt_target(a, &rounding.into().target())
}

pub(crate) fn sqrt_target(a: &BigFloat, t: &Target) -> RoundingReport {
    match &a.repr {
        Repr::Nan => RoundingReport::exact(BigFloat::NAN),
        Repr::Zero => RoundingReport::exact(a.clone()),
        _ if a.neg => RoundingReport::exact(BigFloat::NAN),
        Repr::Inf => RoundingReport::exact(a.clone()),
        Repr::Finite { .. } => {
            if use_fast(t) {
                if let Some((_, e, m)) = a.small_parts(fast::MAX_BITS) {
                    return fast::sqrt((e, m), t);
                }
            }
            let (_, e, m) = a.big_parts().expect("finite");
            wide::sqrt(e, m, t)
        }
    }
}

/// Fused `a * b + c` with a single rounding.
pub fn fma(a: &BigFloat, b: &BigFloat, c: &BigFloat, rounding: impl Into<Rounding>) -> RoundingReport {
    fma_target(a, b, c, &rounding.into().target())
}

pub(crate) fn fma_target(a: &BigFloat, b: &BigFloat, c: &BigFloat, t: &Target) -> RoundingReport {
    let psign = a.neg != b.neg;
    let product_special = match (&a.repr, &b.repr) {
        (Repr::Nan, _) | (_, Repr::Nan) => Some(BigFloat::NAN),
        (Repr::Inf, Repr::Zero) | (Repr::Zero, Repr::Inf) => Some(BigFloat::NAN),
        (Repr::Inf, _) | (_, Repr::Inf) => Some(BigFloat::infinity(psign)),
        (Repr::Zero, _) | (_, Repr::Zero) => Some(BigFloat::zero(psign)),
        _ => None,
    };
    if let Some(p) = product_special {
        // The product is exact here (zero, inf or nan), so one rounding remains.
        return add_target(&p, c, t);
    }
    match &c.repr {
        Repr::Nan => RoundingReport::exact(BigFloat::NAN),
        Repr::Inf => RoundingReport::exact(c.clone()),
        Repr::Zero => mul_target(a, b, t),
        Repr::Finite { .. } => {
            if use_fast(t) {
                if let (Some(pa), Some(pb), Some(pc)) = (
                    a.small_parts(fast::MAX_BITS),
                    b.small_parts(fast::MAX_BITS),
                    c.small_parts(fast::MAX_BITS),
                ) {
                    return fast::fma(pa, pb, pc, t);
                }
            }
            wide::fma(
                a.big_parts().expect("finite"),
                b.big_parts().expect("finite"),
                c.big_parts().expect("finite"),
                t,
            )
        }
    }
}

/// Dispatch an [`ArithOp`] over a slice of operands.
pub fn arith(op: ArithOp, operands: &[BigFloat], rounding: impl Into<Rounding>) -> Result<RoundingReport, SoftFloatError> {
    if operands.len() != op.arity() {
        return Err(SoftFloatError::Arity { name: op.name(), expected: op.arity(), got: operands.len() });
    }
    let r = rounding.into();
    Ok(match op {
        ArithOp::Add => add(&operands[0], &operands[1], r),
        ArithOp::Sub => sub(&operands[0], &operands[1], r),
        ArithOp::Mul => mul(&operands[0], &operands[1], r),
        ArithOp::Div => div(&operands[0], &operands[1], r),
        ArithOp::Sqrt => sqrt(&operands[0], r),
        ArithOp::Fma => fma(&operands[0], &operands[1], &operands[2], r),
    })
}

/// Faithfully rounded elementary function.
pub fn elementary(f: ElementaryFn, operands: &[BigFloat], rounding: impl Into<Rounding>) -> Result<RoundingReport, SoftFloatError> {
    if operands.len() != f.arity() {
        return Err(SoftFloatError::Arity { name: f.name(), expected: f.arity(), got: operands.len() });
    }
    let t = rounding.into().target();
    Ok(match f {
        ElementaryFn::Exp => elementary::exp(&operands[0], &t),
        ElementaryFn::Log => elementary::log(&operands[0], &t),
        ElementaryFn::Sin => elementary::sin_cos(&operands[0], &t, false),
        ElementaryFn::Cos => elementary::sin_cos(&operands[0], &t, true),
        ElementaryFn::Tanh => elementary::tanh(&operands[0], &t),
        ElementaryFn::Pow => elementary::pow(&operands[0], &operands[1], &t),
    })
}

/// Look up an elementary function by its libm name and evaluate it.
pub fn elementary_by_name(name: &str, operands: &[BigFloat], rounding: impl Into<Rounding>) -> Result<RoundingReport, SoftFloatError> {
    elementary(name.parse()?, operands, rounding)
}

/// Convert a machine double exactly.
pub fn from_f64(x: f64) -> BigFloat {
    BigFloat::from_f64(x)
}

/// Round into binary64 and return the machine value.
pub fn to_f64(x: &BigFloat) -> f64 {
    x.to_f64()
}

/// Round a binary64 value through `rounding` and widen it back.
#[inline]
pub fn round_f64(x: f64, rounding: impl Into<Rounding>) -> f64 {
    let r = rounding.into();
    if r.format == FloatFormat::BINARY64 && r.gradual_underflow {
        return x;
    }
    round_to_format(&BigFloat::from_f64(x), r).rounded.to_f64()
}

#[cfg(test)]
mod tests;
