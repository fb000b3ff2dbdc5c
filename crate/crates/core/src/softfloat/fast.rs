//! Allocation-free kernels for operands of at most 53 significant bits and
//! targets of at most 53 bits of precision. All intermediates fit in `u128`.

use num_integer::Roots;

use super::format::Target;
use super::round::round_mag;
use super::value::RoundingReport;

pub(crate) const MAX_BITS: u32 = 53;

#[inline]
fn bits(x: u128) -> i64 {
    i64::from(128 - x.leading_zeros())
}

/// Exact sum of two non-zero signed magnitudes of at most 106 bits each.
/// Returns `None` for an exact zero.
#[inline]
pub(crate) fn add_exact(
    an: bool,
    ae: i64,
    am: u128,
    bn: bool,
    be: i64,
    bm: u128,
) -> Option<(bool, i64, u128, bool)> {
    debug_assert!(am != 0 && bm != 0 && bits(am) <= 106 && bits(bm) <= 106);
    let (mut an, mut ae, mut am, mut bn, mut be, mut bm) = (an, ae, am, bn, be, bm);
    if be + bits(bm) > ae + bits(am) {
        std::mem::swap(&mut an, &mut bn);
        std::mem::swap(&mut ae, &mut be);
        std::mem::swap(&mut am, &mut bm);
    }
    // Larger operand's leading bit goes to position 125; one bit of headroom
    // remains for the carry.
    let sa = 125 - (bits(am) - 1);
    let big_a = am << sa;
    let e = ae - sa;
    let k = be - e;
    let (big_b, sticky) = if k >= 0 {
        (bm << k, false)
    } else {
        let s = -k;
        if s >= 128 {
            (0, true)
        } else {
            (bm >> s, bm & ((1u128 << s) - 1) != 0)
        }
    };
    if an == bn {
        return Some((an, e, big_a + big_b, sticky));
    }
    if big_a > big_b {
        let d = big_a - big_b;
        Some(if sticky { (an, e, d - 1, true) } else { (an, e, d, false) })
    } else if big_a < big_b {
        debug_assert!(!sticky);
        Some((bn, e, big_b - big_a, false))
    } else if sticky {
        // B exceeds A by less than one unit: impossible after the swap.
        unreachable!("aligned operands with sticky remainder cannot tie")
    } else {
        None
    }
}

#[inline]
pub(crate) fn add(a: (bool, i64, u64), b: (bool, i64, u64), t: &Target) -> RoundingReport {
    match add_exact(a.0, a.1, u128::from(a.2), b.0, b.1, u128::from(b.2)) {
        Some((n, e, m, s)) => round_mag(n, e, m, s, t),
        None => RoundingReport::exact(super::BigFloat::zero(false)),
    }
}

#[inline]
pub(crate) fn mul(a: (bool, i64, u64), b: (bool, i64, u64), t: &Target) -> RoundingReport {
    let m = u128::from(a.2) * u128::from(b.2);
    round_mag(a.0 != b.0, a.1 + b.1, m, false, t)
}

#[inline]
pub(crate) fn div(a: (bool, i64, u64), b: (bool, i64, u64), t: &Target) -> RoundingReport {
    let am = u128::from(a.2);
    let bm = u128::from(b.2);
    let s = (t.prec as i64 + 3 + bits(bm) - bits(am)).max(0);
    let num = am << s;
    let q = num / bm;
    let r = num % bm;
    round_mag(a.0 != b.0, a.1 - b.1 - s, q, r != 0, t)
}

#[inline]
pub(crate) fn sqrt(a: (i64, u64), t: &Target) -> RoundingReport {
    let (e, m) = a;
    let m = u128::from(m);
    let mut s = (2 * t.prec as i64 + 6 - bits(m)).max(0);
    if (e - s).rem_euclid(2) != 0 {
        s += 1;
    }
    let n = m << s;
    let root = n.sqrt();
    let sticky = root * root != n;
    round_mag(false, (e - s) / 2, root, sticky, t)
}

/// `a * b + c`, all three non-zero finite.
#[inline]
pub(crate) fn fma(a: (bool, i64, u64), b: (bool, i64, u64), c: (bool, i64, u64), t: &Target) -> RoundingReport {
    let pm = u128::from(a.2) * u128::from(b.2);
    match add_exact(a.0 != b.0, a.1 + b.1, pm, c.0, c.1, u128::from(c.2)) {
        Some((n, e, m, s)) => round_mag(n, e, m, s, t),
        None => RoundingReport::exact(super::BigFloat::zero(false)),
    }
}
