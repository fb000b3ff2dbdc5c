//! Single rounding step shared by every arithmetic path.
//!
//! Producers hand over an exact magnitude `mag * 2^exp`, optionally with a
//! sticky flag meaning "plus something strictly between 0 and one unit of the
//! lowest bit". Whenever sticky is set the magnitude must carry at least
//! `prec + 2` bits so the round and sticky positions stay distinguishable.

use num_bigint::BigUint;

use super::format::Target;
use super::value::{BigFloat, RoundingReport};

pub(crate) trait Mag: Clone {
    fn bits(&self) -> u64;
    fn is_zero(&self) -> bool;
    fn bit(&self, i: u64) -> bool;
    /// Any bit set strictly below position `n`.
    fn any_below(&self, n: u64) -> bool;
    fn shr(&self, n: u64) -> Self;
    fn incr(self) -> Self;
    fn into_float(self, neg: bool, exp: i64) -> BigFloat;
}

impl Mag for u128 {
    #[inline]
    fn bits(&self) -> u64 {
        u64::from(128 - self.leading_zeros())
    }
    #[inline]
    fn is_zero(&self) -> bool {
        *self == 0
    }
    #[inline]
    fn bit(&self, i: u64) -> bool {
        i < 128 && (self >> i) & 1 == 1
    }
    #[inline]
    fn any_below(&self, n: u64) -> bool {
        if n >= 128 {
            *self != 0
        } else {
            self & ((1u128 << n) - 1) != 0
        }
    }
    #[inline]
    fn shr(&self, n: u64) -> Self {
        if n >= 128 {
            0
        } else {
            self >> n
        }
    }
    #[inline]
    fn incr(self) -> Self {
        self + 1
    }
    #[inline]
    fn into_float(self, neg: bool, exp: i64) -> BigFloat {
        BigFloat::from_u128_parts(neg, exp, self)
    }
}

impl Mag for BigUint {
    fn bits(&self) -> u64 {
        BigUint::bits(self)
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn bit(&self, i: u64) -> bool {
        BigUint::bit(self, i)
    }
    fn any_below(&self, n: u64) -> bool {
        match self.trailing_zeros() {
            Some(tz) => tz < n,
            None => false,
        }
    }
    fn shr(&self, n: u64) -> Self {
        self >> n
    }
    fn incr(self) -> Self {
        self + 1u32
    }
    fn into_float(self, neg: bool, exp: i64) -> BigFloat {
        BigFloat::from_biguint_parts(neg, exp, self)
    }
}

/// Round `(-1)^neg * (mag + sticky) * 2^exp` to `t` with ties-to-even.
pub(crate) fn round_mag<M: Mag>(neg: bool, exp: i64, mag: M, sticky: bool, t: &Target) -> RoundingReport {
    if mag.is_zero() {
        debug_assert!(!sticky, "sticky bit without a magnitude");
        return RoundingReport::exact(BigFloat::zero(neg));
    }
    let prec = t.prec as i64;
    let n = mag.bits() as i64;
    let top = exp + n - 1;
    let tiny = top < t.emin;
    let ulp_exp = if tiny && t.subnormals { t.emin - prec + 1 } else { top - prec + 1 };
    let shift = ulp_exp - exp;

    let (kept, mut q, inexact) = if shift <= 0 {
        debug_assert!(!sticky, "sticky input without guard bits");
        (mag, exp, false)
    } else {
        let s = shift as u64;
        let half = mag.bit(s - 1);
        let rest = sticky || mag.any_below(s - 1);
        let mut kept = mag.shr(s);
        let odd = kept.bit(0);
        if half && (rest || odd) {
            kept = kept.incr();
        }
        (kept, ulp_exp, half || rest)
    };
    let mut kept = kept;
    if kept.bits() as i64 > prec {
        kept = kept.shr(1);
        q += 1;
    }
    let underflowed = tiny && inexact;

    if kept.is_zero() {
        return RoundingReport { rounded: BigFloat::zero(neg), inexact: true, overflowed: false, underflowed: true };
    }
    let new_top = q + kept.bits() as i64 - 1;
    if !t.subnormals && new_top < t.emin {
        return RoundingReport { rounded: BigFloat::zero(neg), inexact: true, overflowed: false, underflowed: true };
    }
    if new_top > t.emax {
        return RoundingReport { rounded: BigFloat::infinity(neg), inexact: true, overflowed: true, underflowed: false };
    }
    RoundingReport { rounded: kept.into_float(neg, q), inexact, overflowed: false, underflowed }
}
