//! Transcendental functions evaluated in big-integer fixed point.
//!
//! A fixed-point value `v` with scale `f` denotes `v * 2^-f`. Each function
//! picks `f` so the approximation carries at least `prec + 32` correct bits
//! relative to the result, then rounds once into the target.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};

use super::format::Target;
use super::value::BigFloat;
use super::{div_target, round_to_target, RoundingReport, SoftFloatError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementaryFn {
    Exp,
    Log,
    Sin,
    Cos,
    Pow,
    Tanh,
}

impl ElementaryFn {
    pub const ALL: [ElementaryFn; 6] =
        [ElementaryFn::Exp, ElementaryFn::Log, ElementaryFn::Sin, ElementaryFn::Cos, ElementaryFn::Pow, ElementaryFn::Tanh];

    pub fn name(self) -> &'static str {
        match self {
            ElementaryFn::Exp => "exp",
            ElementaryFn::Log => "log",
            ElementaryFn::Sin => "sin",
            ElementaryFn::Cos => "cos",
            ElementaryFn::Pow => "pow",
            ElementaryFn::Tanh => "tanh",
        }
    }

    pub fn arity(self) -> usize {
        if self == ElementaryFn::Pow {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for ElementaryFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ElementaryFn {
    type Err = SoftFloatError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ElementaryFn::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| SoftFloatError::Unimplemented(s.to_string()))
    }
}

fn working_bits(t: &Target) -> u64 {
    t.prec + 32
}

/// Transcendental results of non-trivial arguments are irrational.
fn transcendental(x: &BigFloat, t: &Target) -> RoundingReport {
    let mut r = round_to_target(x, t);
    r.inexact = true;
    r
}

fn report_overflow(neg: bool, t: &Target) -> RoundingReport {
    let huge = BigFloat::from_u64_parts(neg, t.emax.saturating_add(2), 1);
    round_to_target(&huge, t)
}

fn report_underflow(neg: bool, t: &Target) -> RoundingReport {
    let tiny = BigFloat::from_u64_parts(neg, t.emin.saturating_sub(t.prec as i64 + 3), 1);
    round_to_target(&tiny, t)
}

/// `x * 2^f`, truncated toward zero.
fn fixed_of(x: &BigFloat, f: u64) -> BigInt {
    let Some((neg, exp, man)) = x.big_parts() else {
        return BigInt::zero();
    };
    let shift = exp + f as i64;
    let mag = if shift >= 0 { man << shift as u64 } else { man >> (-shift) as u64 };
    BigInt::from_biguint(if neg { Sign::Minus } else { Sign::Plus }, mag)
}

/// Exact value `v * 2^-f`.
fn float_of(v: BigInt, f: i64) -> BigFloat {
    let (sign, mag) = v.into_parts();
    BigFloat::from_biguint_parts(sign == Sign::Minus, -f, mag)
}

fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    // nearest integer to a / b for b > 0
    let two = BigInt::from(2);
    (a * &two + b).div_floor(&(b * two))
}

pub(crate) fn ln2_fixed(f: u64) -> BigInt {
    // ln 2 = sum_{k>=1} 1 / (k 2^k)
    let g = f + 16;
    let mut sum = BigUint::zero();
    for k in 1..=g {
        sum += (BigUint::one() << (g - k)) / BigUint::from(k);
    }
    BigInt::from(sum >> 16u32)
}

fn atan_inv(n: u32, g: u64) -> BigInt {
    let n2 = BigInt::from(n * n);
    let mut x = (BigInt::one() << g) / BigInt::from(n);
    let mut sum = x.clone();
    let mut k = 1u64;
    loop {
        x /= &n2;
        let term = &x / BigInt::from(2 * k + 1);
        if term.is_zero() {
            break;
        }
        if k % 2 == 1 {
            sum -= term;
        } else {
            sum += term;
        }
        k += 1;
    }
    sum
}

pub(crate) fn pi_fixed(f: u64) -> BigInt {
    let g = f + 16;
    let pi = BigInt::from(16) * atan_inv(5, g) - BigInt::from(4) * atan_inv(239, g);
    pi >> 16u32
}

/// Taylor series of `exp(r)` for `|r| <= 1`.
fn exp_series(r: &BigInt, f: u64) -> BigInt {
    let one = BigInt::one() << f;
    let mut term = one.clone();
    let mut sum = one;
    let mut k = 1u64;
    loop {
        term = ((&term * r) >> f) / BigInt::from(k);
        if term.is_zero() {
            break;
        }
        sum += &term;
        k += 1;
    }
    sum
}

/// `exp(t)` for fixed-point `t`, returned as `(m, k)` meaning `m * 2^(k - f)`.
fn exp_reduced(t: &BigInt, f: u64) -> (BigInt, i64) {
    let ln2 = ln2_fixed(f);
    let k = round_div(t, &ln2);
    let r = t - &k * &ln2;
    (exp_series(&r, f), k.to_i64().expect("exponent shortcut bounds k"))
}

fn sin_cos_series(r: &BigInt, f: u64) -> (BigInt, BigInt) {
    let r2 = (r * r) >> f;
    let mut term = r.clone();
    let mut sin = r.clone();
    let mut k = 1u64;
    loop {
        term = -((&term * &r2) >> f) / BigInt::from((2 * k) * (2 * k + 1));
        if term.is_zero() {
            break;
        }
        sin += &term;
        k += 1;
    }
    let mut term = BigInt::one() << f;
    let mut cos = term.clone();
    let mut k = 1u64;
    loop {
        term = -((&term * &r2) >> f) / BigInt::from((2 * k - 1) * (2 * k));
        if term.is_zero() {
            break;
        }
        cos += &term;
        k += 1;
    }
    (sin, cos)
}

/// Natural log of a positive finite value, absolute error below `2^-(f-32)`.
fn log_fixed(x: &BigFloat, f: u64) -> BigInt {
    let (_, exp, man) = x.big_parts().expect("finite positive");
    let nb = man.bits();
    let mut e = exp + nb as i64 - 1;
    let mut d = nb - 1;
    // bring m = man / 2^d into [0.75, 1.5)
    if (&man << 1u32) >= (BigUint::from(3u32) << (nb - 1)) {
        e += 1;
        d += 1;
    }
    let denom_pow = BigInt::one() << d;
    let m = BigInt::from(man);
    let z = ((&m - &denom_pow) << f) / (&m + &denom_pow);
    let z2 = (&z * &z) >> f;
    let mut zp = z.clone();
    let mut sum = z;
    let mut k = 1u64;
    loop {
        zp = (&zp * &z2) >> f;
        let term = &zp / BigInt::from(2 * k + 1);
        if term.is_zero() {
            break;
        }
        sum += term;
        k += 1;
    }
    BigInt::from(e) * ln2_fixed(f) + (sum << 1u32)
}

fn abs_as_f64(x: &BigFloat) -> f64 {
    x.abs().to_f64()
}

pub(crate) fn exp(x: &BigFloat, t: &Target) -> RoundingReport {
    if x.is_nan() {
        return RoundingReport::exact(BigFloat::NAN);
    }
    if x.is_infinite() {
        return RoundingReport::exact(if x.is_sign_negative() { BigFloat::zero(false) } else { x.clone() });
    }
    if x.is_zero() {
        return RoundingReport::exact(BigFloat::one());
    }
    let tx = x.top_exponent().expect("finite");
    let hi = (t.emax as f64 + 2.0) * LN_2;
    let lo = (t.emin as f64 - t.prec as f64 - 3.0) * LN_2;
    let xf = if tx >= 64 { f64::INFINITY } else { abs_as_f64(x) };
    if !x.is_sign_negative() && xf > hi + 1.0 {
        return report_overflow(false, t);
    }
    if x.is_sign_negative() && -xf < lo - 1.0 {
        return report_underflow(false, t);
    }
    let f = working_bits(t) + 24 + tx.max(0) as u64;
    let (m, k) = exp_reduced(&fixed_of(x, f), f);
    transcendental(&float_of(m, f as i64 - k), t)
}

pub(crate) fn log(x: &BigFloat, t: &Target) -> RoundingReport {
    if x.is_nan() || (x.is_sign_negative() && !x.is_zero()) {
        return RoundingReport::exact(BigFloat::NAN);
    }
    if x.is_zero() {
        return RoundingReport::exact(BigFloat::infinity(true));
    }
    if x.is_infinite() {
        return RoundingReport::exact(x.clone());
    }
    if *x == BigFloat::one() {
        return RoundingReport::exact(BigFloat::zero(false));
    }
    let e_bits = 64 - x.top_exponent().expect("finite").unsigned_abs().leading_zeros();
    let f = working_bits(t) + x.significant_bits() + 48 + u64::from(e_bits);
    transcendental(&float_of(log_fixed(x, f), f as i64), t)
}

pub(crate) fn sin_cos(x: &BigFloat, t: &Target, want_cos: bool) -> RoundingReport {
    if x.is_nan() || x.is_infinite() {
        return RoundingReport::exact(BigFloat::NAN);
    }
    if x.is_zero() {
        return RoundingReport::exact(if want_cos { BigFloat::one() } else { x.clone() });
    }
    let w = working_bits(t);
    let tx = x.top_exponent().expect("finite");
    if tx < -(w as i64 / 2 + 2) {
        return transcendental(if want_cos { &ONE } else { x }, t);
    }
    let f = 2 * w + 64 + tx.max(0) as u64;
    let xf = fixed_of(x, f);
    let half_pi = pi_fixed(f + 1) >> 2u32;
    let n = round_div(&xf, &half_pi);
    let r = &xf - &n * &half_pi;
    let quadrant = n.mod_floor(&BigInt::from(4)).to_u8().expect("0..4");
    let (s, c) = sin_cos_series(&r, f);
    let v = match (want_cos, quadrant) {
        (false, 0) | (true, 3) => s,
        (false, 1) | (true, 0) => c,
        (false, 2) | (true, 1) => -s,
        _ => -c,
    };
    transcendental(&float_of(v, f as i64), t)
}

static ONE: BigFloat = BigFloat { neg: false, repr: super::value::Repr::Finite { exp: 0, man: super::value::Mantissa::Small(1) } };

pub(crate) fn tanh(x: &BigFloat, t: &Target) -> RoundingReport {
    if x.is_nan() {
        return RoundingReport::exact(BigFloat::NAN);
    }
    let neg = x.is_sign_negative();
    if x.is_zero() {
        return RoundingReport::exact(x.clone());
    }
    let signed_one = if neg { -BigFloat::one() } else { BigFloat::one() };
    if x.is_infinite() {
        return RoundingReport::exact(signed_one);
    }
    let w = working_bits(t);
    let tx = x.top_exponent().expect("finite");
    if tx < -(w as i64 / 2 + 2) {
        return transcendental(x, t);
    }
    if tx >= 30 || abs_as_f64(x) > (w as f64 + 4.0) * 0.35 + 1.0 {
        return transcendental(&signed_one, t);
    }
    let f = 2 * w + 64;
    let a = fixed_of(&x.abs(), f) << 1u32;
    let (m, k) = exp_reduced(&a, f);
    let e = if k >= 0 { m << k as u64 } else { m >> (-k) as u64 };
    let one = BigInt::one() << f;
    let v = ((&e - &one) << f) / (&e + &one);
    transcendental(&float_of(if neg { -v } else { v }, f as i64), t)
}

/// Exact integer power `|x|^n` for a finite non-zero `x`.
fn exact_power(x: &BigFloat, n: u32) -> BigFloat {
    let (_, exp, man) = x.big_parts().expect("finite");
    BigFloat::from_biguint_parts(false, exp * i64::from(n), num_traits::pow(man, n as usize))
}

pub(crate) fn pow(x: &BigFloat, y: &BigFloat, t: &Target) -> RoundingReport {
    let exact = RoundingReport::exact;
    if y.is_zero() {
        return exact(BigFloat::one());
    }
    if *x == BigFloat::one() {
        return exact(BigFloat::one());
    }
    if x.is_nan() || y.is_nan() {
        return exact(BigFloat::NAN);
    }
    // odd-mantissa form: integer iff exponent >= 0, odd integer iff exponent == 0
    let y_int = y.is_infinite() || y.exponent().is_some_and(|e| e >= 0);
    let y_odd = y.exponent() == Some(0);
    let y_neg = y.is_sign_negative();

    if y.is_infinite() {
        let ax = x.abs();
        let cmp = ax.partial_cmp(&BigFloat::one()).expect("not nan");
        return exact(match cmp {
            std::cmp::Ordering::Equal => BigFloat::one(),
            std::cmp::Ordering::Less => {
                if y_neg {
                    BigFloat::infinity(false)
                } else {
                    BigFloat::zero(false)
                }
            }
            std::cmp::Ordering::Greater => {
                if y_neg {
                    BigFloat::zero(false)
                } else {
                    BigFloat::infinity(false)
                }
            }
        });
    }
    let result_neg = x.is_sign_negative() && y_odd;
    if x.is_zero() {
        return exact(if y_neg { BigFloat::infinity(result_neg) } else { BigFloat::zero(result_neg) });
    }
    if x.is_infinite() {
        return exact(if y_neg { BigFloat::zero(result_neg) } else { BigFloat::infinity(result_neg) });
    }
    if x.is_sign_negative() && !y_int {
        return exact(BigFloat::NAN);
    }

    if y_int {
        if let Some(n) = y.abs().to_f64().to_u32().filter(|&n| n <= 4096) {
            if x.significant_bits() * u64::from(n) <= 1 << 16 {
                let p = exact_power(x, n);
                let p = if result_neg { -p } else { p };
                return if y_neg { div_target(&BigFloat::one(), &p, t) } else { round_to_target(&p, t) };
            }
        }
    }

    let ty = y.top_exponent().expect("finite");
    let f = working_bits(t) + 100 + ty.max(0) as u64;
    let l = log_fixed(&x.abs(), f);
    let (_, ye, ym) = y.big_parts().expect("finite");
    let prod = l * BigInt::from(ym);
    let tfix = if ye >= 0 { prod << ye as u64 } else { prod >> (-ye) as u64 };
    let tfix = if y_neg { -tfix } else { tfix };
    let tf = float_of(tfix.clone(), f as i64).to_f64();
    let hi = (t.emax as f64 + 2.0) * LN_2;
    let lo = (t.emin as f64 - t.prec as f64 - 3.0) * LN_2;
    if tf > hi + 1.0 {
        return report_overflow(result_neg, t);
    }
    if tf < lo - 1.0 {
        return report_underflow(result_neg, t);
    }
    let (m, k) = exp_reduced(&tfix, f);
    let m = if result_neg { -m } else { m };
    transcendental(&float_of(m, f as i64 - k), t)
}
