use std::cmp::Ordering;
use std::fmt;
use std::ops::Neg;

use num_bigint::BigUint;
use num_traits::ToPrimitive;

/// Coarse classification of a [`BigFloat`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FloatClass {
    Finite,
    Zero,
    Infinite,
    Nan,
}

/// Significand storage. Canonical form: odd, and `Small` whenever it fits.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Mantissa {
    Small(u64),
    Big(BigUint),
}

impl Mantissa {
    pub(crate) fn bits(&self) -> u64 {
        match self {
            Mantissa::Small(m) => u64::from(64 - m.leading_zeros()),
            Mantissa::Big(m) => m.bits(),
        }
    }

    pub(crate) fn to_biguint(&self) -> BigUint {
        match self {
            Mantissa::Small(m) => BigUint::from(*m),
            Mantissa::Big(m) => m.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub(crate) enum Repr {
    Zero,
    Inf,
    Nan,
    /// `man * 2^exp` with `man` odd.
    Finite { exp: i64, man: Mantissa },
}

/// Arbitrary-precision binary floating-point value.
///
/// A finite non-zero value is stored as `(-1)^sign * man * 2^exp` with an odd
/// integer mantissa, which makes the representation unique. NaN has a single
/// canonical (positive, quiet) encoding.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BigFloat {
    pub(crate) neg: bool,
    pub(crate) repr: Repr,
}

/// Result of rounding an exact value into a target format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RoundingReport {
    pub rounded: BigFloat,
    /// The rounded value differs from the exact result.
    pub inexact: bool,
    pub overflowed: bool,
    /// Tiny (below the smallest normal before rounding) and inexact.
    pub underflowed: bool,
}

impl RoundingReport {
    pub(crate) fn exact(rounded: BigFloat) -> Self {
        RoundingReport { rounded, inexact: false, overflowed: false, underflowed: false }
    }
}

impl BigFloat {
    pub const NAN: BigFloat = BigFloat { neg: false, repr: Repr::Nan };

    pub fn zero(negative: bool) -> Self {
        BigFloat { neg: negative, repr: Repr::Zero }
    }

    pub fn infinity(negative: bool) -> Self {
        BigFloat { neg: negative, repr: Repr::Inf }
    }

    pub fn one() -> Self {
        BigFloat { neg: false, repr: Repr::Finite { exp: 0, man: Mantissa::Small(1) } }
    }

    /// Exact value `(-1)^negative * mantissa * 2^exponent`.
    pub fn from_parts(negative: bool, exponent: i64, mantissa: BigUint) -> Self {
        Self::from_biguint_parts(negative, exponent, mantissa)
    }

    pub(crate) fn from_u128_parts(neg: bool, exp: i64, man: u128) -> Self {
        if man == 0 {
            return BigFloat::zero(neg);
        }
        let tz = man.trailing_zeros();
        let m = man >> tz;
        let exp = exp + i64::from(tz);
        let man = match u64::try_from(m) {
            Ok(s) => Mantissa::Small(s),
            Err(_) => Mantissa::Big(BigUint::from(m)),
        };
        BigFloat { neg, repr: Repr::Finite { exp, man } }
    }

    pub(crate) fn from_u64_parts(neg: bool, exp: i64, man: u64) -> Self {
        if man == 0 {
            return BigFloat::zero(neg);
        }
        let tz = man.trailing_zeros();
        BigFloat { neg, repr: Repr::Finite { exp: exp + i64::from(tz), man: Mantissa::Small(man >> tz) } }
    }

    pub(crate) fn from_biguint_parts(neg: bool, exp: i64, man: BigUint) -> Self {
        let Some(tz) = man.trailing_zeros() else {
            return BigFloat::zero(neg);
        };
        let m = man >> tz;
        let exp = exp + tz as i64;
        let man = match m.to_u64() {
            Some(s) => Mantissa::Small(s),
            None => Mantissa::Big(m),
        };
        BigFloat { neg, repr: Repr::Finite { exp, man } }
    }

    /// Exact conversion from a machine double.
    pub fn from_f64(x: f64) -> Self {
        let bits = x.to_bits();
        let neg = bits >> 63 == 1;
        let biased = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        match biased {
            0x7ff if frac != 0 => BigFloat::NAN,
            0x7ff => BigFloat::infinity(neg),
            0 if frac == 0 => BigFloat::zero(neg),
            0 => Self::from_u64_parts(neg, -1074, frac),
            _ => Self::from_u64_parts(neg, biased - 1075, frac | (1u64 << 52)),
        }
    }

    /// Nearest binary64 value (ties to even, gradual underflow).
    pub fn to_f64(&self) -> f64 {
        let r = super::round_to_format(self, super::FloatFormat::BINARY64);
        r.rounded.to_f64_exact().expect("value rounded to binary64 is representable")
    }

    /// Bit assembly for values already representable in binary64.
    pub(crate) fn to_f64_exact(&self) -> Option<f64> {
        let sign = if self.neg { 1u64 << 63 } else { 0 };
        match &self.repr {
            Repr::Nan => Some(f64::NAN),
            Repr::Inf => Some(f64::from_bits(sign | 0x7ff0_0000_0000_0000)),
            Repr::Zero => Some(f64::from_bits(sign)),
            Repr::Finite { exp, man } => {
                let Mantissa::Small(m) = man else { return None };
                let nb = i64::from(64 - m.leading_zeros());
                if nb > 53 {
                    return None;
                }
                let top = exp + nb - 1;
                if top > 1023 {
                    return None;
                }
                if top >= -1022 {
                    let m53 = m << (53 - nb);
                    let field = ((top + 1023) as u64) << 52;
                    Some(f64::from_bits(sign | field | (m53 & ((1u64 << 52) - 1))))
                } else {
                    let sh = exp + 1074;
                    if sh < 0 {
                        return None;
                    }
                    Some(f64::from_bits(sign | (m << sh)))
                }
            }
        }
    }

    pub fn class(&self) -> FloatClass {
        match self.repr {
            Repr::Zero => FloatClass::Zero,
            Repr::Inf => FloatClass::Infinite,
            Repr::Nan => FloatClass::Nan,
            Repr::Finite { .. } => FloatClass::Finite,
        }
    }

    pub fn is_nan(&self) -> bool {
        matches!(self.repr, Repr::Nan)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self.repr, Repr::Inf)
    }

    /// Finite and non-zero.
    pub fn is_finite_nonzero(&self) -> bool {
        matches!(self.repr, Repr::Finite { .. })
    }

    pub fn is_sign_negative(&self) -> bool {
        self.neg
    }

    /// Exponent of the odd-mantissa representation, for finite non-zero values.
    pub fn exponent(&self) -> Option<i64> {
        match &self.repr {
            Repr::Finite { exp, .. } => Some(*exp),
            _ => None,
        }
    }

    /// Odd integer mantissa, for finite non-zero values.
    pub fn mantissa(&self) -> Option<BigUint> {
        match &self.repr {
            Repr::Finite { man, .. } => Some(man.to_biguint()),
            _ => None,
        }
    }

    /// Number of significant bits (0 for non-finite or zero).
    pub fn significant_bits(&self) -> u64 {
        match &self.repr {
            Repr::Finite { man, .. } => man.bits(),
            _ => 0,
        }
    }

    /// Exponent of the leading bit: the value lies in `[2^e, 2^(e+1))`.
    pub fn top_exponent(&self) -> Option<i64> {
        match &self.repr {
            Repr::Finite { exp, man } => Some(exp + man.bits() as i64 - 1),
            _ => None,
        }
    }

    pub fn abs(&self) -> BigFloat {
        let mut v = self.clone();
        if !v.is_nan() {
            v.neg = false;
        }
        v
    }

    /// `(sign, exp, man)` when the mantissa fits in `max_bits` bits.
    #[inline]
    pub(crate) fn small_parts(&self, max_bits: u32) -> Option<(bool, i64, u64)> {
        match &self.repr {
            Repr::Finite { exp, man: Mantissa::Small(m) } if m.leading_zeros() >= 64 - max_bits => {
                Some((self.neg, *exp, *m))
            }
            _ => None,
        }
    }

    pub(crate) fn big_parts(&self) -> Option<(bool, i64, BigUint)> {
        match &self.repr {
            Repr::Finite { exp, man } => Some((self.neg, *exp, man.to_biguint())),
            _ => None,
        }
    }

    /// Multiply by `2^k` exactly.
    pub fn mul_pow2(&self, k: i64) -> BigFloat {
        match &self.repr {
            Repr::Finite { exp, man } => {
                BigFloat { neg: self.neg, repr: Repr::Finite { exp: exp + k, man: man.clone() } }
            }
            _ => self.clone(),
        }
    }

    fn cmp_magnitude(&self, other: &BigFloat) -> Ordering {
        match (&self.repr, &other.repr) {
            (Repr::Finite { exp: ea, man: ma }, Repr::Finite { exp: eb, man: mb }) => {
                let ta = ea + ma.bits() as i64;
                let tb = eb + mb.bits() as i64;
                if ta != tb {
                    return ta.cmp(&tb);
                }
                let base = (*ea).min(*eb);
                let a = ma.to_biguint() << (ea - base) as u64;
                let b = mb.to_biguint() << (eb - base) as u64;
                a.cmp(&b)
            }
            _ => unreachable!("magnitude comparison of finite values only"),
        }
    }
}

impl PartialOrd for BigFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        use Repr::*;
        let rank = |v: &BigFloat| -> i8 {
            match (&v.repr, v.neg) {
                (Inf, true) => -2,
                (Finite { .. }, true) => -1,
                (Zero, _) => 0,
                (Finite { .. }, false) => 1,
                (Inf, false) => 2,
                (Nan, _) => unreachable!(),
            }
        };
        if self.is_nan() || other.is_nan() {
            return None;
        }
        let (ra, rb) = (rank(self), rank(other));
        if ra != rb {
            return Some(ra.cmp(&rb));
        }
        Some(match ra {
            1 => self.cmp_magnitude(other),
            -1 => other.cmp_magnitude(self),
            _ => Ordering::Equal,
        })
    }
}

impl Neg for BigFloat {
    type Output = BigFloat;
    fn neg(mut self) -> BigFloat {
        if !self.is_nan() {
            self.neg = !self.neg;
        }
        self
    }
}

impl Neg for &BigFloat {
    type Output = BigFloat;
    fn neg(self) -> BigFloat {
        -self.clone()
    }
}

impl fmt::Display for BigFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = if self.neg { "-" } else { "" };
        match &self.repr {
            Repr::Nan => write!(f, "nan"),
            Repr::Inf => write!(f, "{s}inf"),
            Repr::Zero => write!(f, "{s}0"),
            Repr::Finite { exp, man } => write!(f, "{s}{}p{exp}", man.to_biguint()),
        }
    }
}

impl Default for BigFloat {
    fn default() -> Self {
        BigFloat::zero(false)
    }
}

impl From<f64> for BigFloat {
    fn from(x: f64) -> Self {
        BigFloat::from_f64(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_strips_trailing_zeros() {
        let a = BigFloat::from_f64(6.0);
        assert_eq!(a.exponent(), Some(1));
        assert_eq!(a.mantissa(), Some(BigUint::from(3u32)));
        assert_eq!(BigFloat::from_parts(false, -1, BigUint::from(12u32)), a);
        assert_eq!(a.top_exponent(), Some(2));
    }

    #[test]
    fn smallest_subnormal_is_exact() {
        let x = f64::from_bits(1);
        let b = BigFloat::from_f64(x);
        assert_eq!(b.exponent(), Some(-1074));
        assert_eq!(b.mantissa(), Some(BigUint::from(1u32)));
        assert_eq!(b.to_f64().to_bits(), 1);
    }

    #[test]
    fn specials_round_trip() {
        for x in [0.0, -0.0, f64::INFINITY, f64::NEG_INFINITY, f64::MAX, f64::MIN_POSITIVE, -1.5] {
            assert_eq!(BigFloat::from_f64(x).to_f64().to_bits(), x.to_bits());
        }
        assert!(BigFloat::from_f64(f64::from_bits(0x7ff0_0000_dead_beef)).is_nan());
        assert_eq!(BigFloat::from_f64(f64::NAN).to_f64().to_bits(), f64::NAN.to_bits());
    }

    #[test]
    fn ordering_matches_f64() {
        let xs = [-f64::INFINITY, -3.5, -1e-300, -0.0, 0.0, 5e-324, 1.0, 1.0000000000000002, 7.0, f64::INFINITY];
        for &a in &xs {
            for &b in &xs {
                assert_eq!(BigFloat::from(a).partial_cmp(&BigFloat::from(b)), a.partial_cmp(&b), "{a} vs {b}");
            }
        }
        assert_eq!(BigFloat::NAN.partial_cmp(&BigFloat::one()), None);
    }
}
