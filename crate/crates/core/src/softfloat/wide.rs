//! General kernels on `BigUint` magnitudes, used when an operand or the
//! target precision exceeds the `u128` fast path.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::Zero;

use super::format::Target;
use super::round::round_mag;
use super::value::{BigFloat, RoundingReport};

pub(crate) type Parts = (bool, i64, BigUint);

fn top(e: i64, m: &BigUint) -> i64 {
    e + m.bits() as i64 - 1
}

/// Exact (or sticky-collapsed) sum, `None` for an exact zero.
pub(crate) fn add_exact(a: Parts, b: Parts, prec: u64) -> Option<(bool, i64, BigUint, bool)> {
    let (a, b) = if top(b.1, &b.2) > top(a.1, &a.2) { (b, a) } else { (a, b) };
    let (an, ae, am) = a;
    let (bn, be, bm) = b;
    let ta = top(ae, &am);
    let tb = top(be, &bm);
    // Keep at least prec + 3 bits below the leading bit of the larger operand.
    let lo = ae.min(ta - prec as i64 - 3);
    if tb < lo {
        let big_a = am << (ae - lo) as u64;
        return Some(if an == bn { (an, lo, big_a, true) } else { (an, lo, big_a - 1u32, true) });
    }
    let base = ae.min(be);
    let big_a = am << (ae - base) as u64;
    let big_b = bm << (be - base) as u64;
    if an == bn {
        return Some((an, base, big_a + big_b, false));
    }
    match big_a.cmp(&big_b) {
        std::cmp::Ordering::Greater => Some((an, base, big_a - big_b, false)),
        std::cmp::Ordering::Less => Some((bn, base, big_b - big_a, false)),
        std::cmp::Ordering::Equal => None,
    }
}

pub(crate) fn add(a: Parts, b: Parts, t: &Target) -> RoundingReport {
    match add_exact(a, b, t.prec) {
        Some((n, e, m, s)) => round_mag(n, e, m, s, t),
        None => RoundingReport::exact(BigFloat::zero(false)),
    }
}

pub(crate) fn mul(a: Parts, b: Parts, t: &Target) -> RoundingReport {
    round_mag(a.0 != b.0, a.1 + b.1, a.2 * b.2, false, t)
}

pub(crate) fn div(a: Parts, b: Parts, t: &Target) -> RoundingReport {
    let s = (t.prec as i64 + 3 + b.2.bits() as i64 - a.2.bits() as i64).max(0);
    let num = a.2 << s as u64;
    let (q, r) = num.div_rem(&b.2);
    round_mag(a.0 != b.0, a.1 - b.1 - s, q, !r.is_zero(), t)
}

pub(crate) fn sqrt(e: i64, m: BigUint, t: &Target) -> RoundingReport {
    let mut s = (2 * t.prec as i64 + 6 - m.bits() as i64).max(0);
    if (e - s).rem_euclid(2) != 0 {
        s += 1;
    }
    let n = m << s as u64;
    let root = n.sqrt();
    let sticky = &root * &root != n;
    round_mag(false, (e - s) / 2, root, sticky, t)
}

pub(crate) fn fma(a: Parts, b: Parts, c: Parts, t: &Target) -> RoundingReport {
    let p = (a.0 != b.0, a.1 + b.1, a.2 * b.2);
    match add_exact(p, c, t.prec) {
        Some((n, e, m, s)) => round_mag(n, e, m, s, t),
        None => RoundingReport::exact(BigFloat::zero(false)),
    }
}
