use num_bigint::{BigInt, BigUint};
use proptest::prelude::*;

use super::oracle::{exhaustive_check, SmallFormatOracle};
use super::*;

fn fmt(e: u32, m: u32) -> FloatFormat {
    FloatFormat::new(e, m).unwrap()
}

fn bf(x: f64) -> BigFloat {
    BigFloat::from_f64(x)
}

/// ulp of a finite non-zero binary32 value.
fn ulp32(x: f32) -> f64 {
    let a = x.abs();
    (f32::from_bits(a.to_bits() + 1) as f64) - a as f64
}

#[test]
fn one_is_exact_in_fp8() {
    let r = round_to_format(&bf(1.0), FloatFormat::FP8_E5M2);
    assert_eq!(r.rounded.to_f64(), 1.0);
    assert!(!r.inexact);
}

#[test]
fn tenth_rounds_to_binary32_nearest() {
    // independent oracle: 0.1 * 2^27 = 13421772.8 -> 13421773
    let r = round_to_format(&bf(0.1), FloatFormat::BINARY32);
    assert_eq!(r.rounded, BigFloat::from_parts(false, -27, BigUint::from(13_421_773u32)));
    assert_eq!(r.rounded.to_f64(), 0.1f32 as f64);
    assert!(r.inexact);
}

#[test]
fn add_one_one_in_fp8() {
    let r = add(&bf(1.0), &bf(1.0), FloatFormat::FP8_E5M2);
    assert_eq!(r.rounded.to_f64(), 2.0);
    assert!(!r.inexact);
}

#[test]
fn third_in_binary16() {
    // 1/3 in [2^-2, 2^-1): 11 significant bits -> units of 2^-12
    let q = (1u32 << 12) / 3;
    let rem = (1u32 << 12) % 3;
    let m = if 2 * rem > 3 || (2 * rem == 3 && q % 2 == 1) { q + 1 } else { q };
    let r = div(&bf(1.0), &bf(3.0), FloatFormat::BINARY16);
    assert_eq!(r.rounded.to_f64(), m as f64 / 4096.0);
    assert_eq!(r.rounded.to_f64(), 0.333251953125);
    assert!(r.inexact);
}

#[test]
fn exhaustive_small_format_3_3() {
    let s = exhaustive_check(3, 3, &[ArithOp::Add, ArithOp::Mul, ArithOp::Div]);
    assert_eq!(s.mismatches, 0, "{:?}", s.first_mismatch);
    assert!(s.cases > 0);
}

#[test]
fn special_values() {
    let b16 = FloatFormat::BINARY16;
    assert!(div(&bf(0.0), &bf(0.0), b16).rounded.is_nan());
    assert_eq!(div(&bf(-1.0), &bf(0.0), b16).rounded.to_f64(), f64::NEG_INFINITY);
    assert!(sqrt(&bf(-2.0), b16).rounded.is_nan());
    assert_eq!(sqrt(&bf(-0.0), b16).rounded.to_f64().to_bits(), (-0.0f64).to_bits());
    assert!(add(&bf(f64::INFINITY), &bf(f64::NEG_INFINITY), b16).rounded.is_nan());
    assert_eq!(sub(&bf(1.5), &bf(1.5), b16).rounded.to_f64().to_bits(), 0.0f64.to_bits());
    assert_eq!(add(&bf(-0.0), &bf(-0.0), b16).rounded.to_f64().to_bits(), (-0.0f64).to_bits());
    assert!(mul(&bf(f64::INFINITY), &bf(0.0), b16).rounded.is_nan());
    assert!(fma(&bf(f64::INFINITY), &bf(0.0), &bf(1.0), b16).rounded.is_nan());
}

#[test]
fn overflow_follows_rne_rule() {
    let b16 = FloatFormat::BINARY16;
    // max binary16 = 65504, next binade step 32; midpoint 65520 rounds to inf
    let r = round_to_format(&bf(65519.0), b16);
    assert_eq!(r.rounded.to_f64(), 65504.0);
    let r = round_to_format(&bf(65520.0), b16);
    assert!(r.rounded.is_infinite() && r.overflowed && r.inexact);
}

#[test]
fn gradual_underflow_switch() {
    let b16 = FloatFormat::BINARY16;
    let tiny = 2f64.powi(-20); // subnormal in binary16 (min normal 2^-14)
    let r = round_to_format(&bf(tiny), b16);
    assert_eq!(r.rounded.to_f64(), tiny);
    assert!(!r.underflowed);
    let r = round_to_format(&bf(tiny * (1.0 + 2f64.powi(-6))), b16);
    assert!(r.underflowed && r.inexact);
    let r = round_to_format(&bf(tiny), Rounding::flush_to_zero(b16));
    assert!(r.rounded.is_zero() && r.underflowed);
    // normal-range values are unaffected by the switch
    let r = round_to_format(&bf(2f64.powi(-14)), Rounding::flush_to_zero(b16));
    assert_eq!(r.rounded.to_f64(), 2f64.powi(-14));
}

#[test]
fn pi_at_200_bits_to_f64() {
    // pi in hex: 3.243F6A8885A308D313198A2E03707344A4093822299F31D008
    let digits = "3243F6A8885A308D313198A2E03707344A4093822299F31D008";
    let m = BigUint::parse_bytes(digits.as_bytes(), 16).unwrap();
    let bits = m.bits() as i64;
    let pi = BigFloat::from_parts(false, -4 * (digits.len() as i64 - 1), m);
    assert!(bits >= 200);
    assert_eq!(to_f64(&pi), std::f64::consts::PI);
    // the engine's own pi agrees with the hex digits
    let f = 200;
    let mine = elementary::pi_fixed(f);
    let reference = BigInt::from(pi.mantissa().unwrap()) << (f as i64 + pi.exponent().unwrap()) as u64;
    assert!((mine - reference).magnitude().bits() <= 4);
}

/// e = sum 1/k! as an exact fraction, error below 1e-48
fn e_rational() -> (BigUint, BigUint) {
    let mut num = BigUint::from(0u32);
    let mut den = BigUint::from(1u32);
    let mut fact = BigUint::from(1u32);
    for k in 0u32..=40 {
        if k > 0 {
            fact *= k;
        }
        // num/den + 1/fact
        num = num * &fact + &den;
        den *= &fact;
    }
    (num, den)
}

#[test]
fn exp_of_one_in_binary32_within_one_ulp() {
    let r = elementary(ElementaryFn::Exp, &[bf(1.0)], FloatFormat::BINARY32).unwrap();
    let got = r.rounded.to_f64() as f32;
    assert!(r.inexact);
    // |got - e| <= ulp(got)  <=>  |got_num*den - num| <= ulp*den over a common scale
    let (num, den) = e_rational();
    let scale = 1u64 << 40;
    let g = BigInt::from((got as f64 * scale as f64) as u64);
    let u = BigInt::from((ulp32(got) * scale as f64) as u64);
    let lhs = (g * BigInt::from(den.clone()) - BigInt::from(num) * BigInt::from(scale)).magnitude().clone();
    let rhs = u.magnitude() * den;
    assert!(lhs <= rhs);
    assert_eq!(got, std::f32::consts::E);
}

#[test]
fn trivial_elementary_values_are_exact() {
    for f in [FloatFormat::FP8_E5M2, FloatFormat::BINARY16, fmt(15, 200)] {
        let r = elementary(ElementaryFn::Exp, &[bf(0.0)], f).unwrap();
        assert_eq!(r.rounded.to_f64(), 1.0);
        assert!(!r.inexact);
        let r = elementary(ElementaryFn::Log, &[bf(1.0)], f).unwrap();
        assert!(r.rounded.is_zero() && !r.inexact);
    }
}

#[test]
fn unknown_function_is_an_error() {
    let e = elementary_by_name("lgamma", &[bf(1.0)], FloatFormat::BINARY32).unwrap_err();
    assert_eq!(e, SoftFloatError::Unimplemented("lgamma".into()));
    assert!(e.to_string().contains("unimplemented elementary function `lgamma`"));
    assert!(matches!(
        elementary(ElementaryFn::Pow, &[bf(1.0)], FloatFormat::BINARY32),
        Err(SoftFloatError::Arity { .. })
    ));
}

#[test]
fn elementary_matches_libm_in_binary32() {
    let args = [-7.25, -2.0, -0.75, -1e-3, 1e-3, 0.3, 1.0, 2.5, 10.0, 31.4, 700.0];
    for &x in &args {
        let cases: Vec<(ElementaryFn, f64, Vec<BigFloat>)> = vec![
            (ElementaryFn::Exp, (x / 10.0f64).exp(), vec![bf(x / 10.0)]),
            (ElementaryFn::Sin, x.sin(), vec![bf(x)]),
            (ElementaryFn::Cos, x.cos(), vec![bf(x)]),
            (ElementaryFn::Tanh, x.tanh(), vec![bf(x)]),
            (ElementaryFn::Log, x.abs().ln(), vec![bf(x.abs())]),
            (ElementaryFn::Pow, x.abs().powf(0.37), vec![bf(x.abs()), bf(0.37)]),
        ];
        for (f, want, ops) in cases {
            let want32 = want as f32;
            let got = elementary(f, &ops, FloatFormat::BINARY32).unwrap().rounded.to_f64() as f32;
            let err = (got as f64 - want).abs();
            assert!(err <= ulp32(want32), "{f}({x}): got {got}, libm {want}");
        }
    }
}

#[test]
fn elementary_high_precision_identities() {
    let p = fmt(15, 200);
    let x = bf(0.7);
    let s = elementary(ElementaryFn::Sin, &[x.clone()], p).unwrap().rounded;
    let c = elementary(ElementaryFn::Cos, &[x], p).unwrap().rounded;
    let s2 = mul(&s, &s, p).rounded;
    let c2 = mul(&c, &c, p).rounded;
    let one = add(&s2, &c2, p).rounded;
    let d = sub(&one, &BigFloat::one(), p).rounded;
    assert!(d.is_zero() || d.top_exponent().unwrap() < -195);

    // pow(2, 0.5) is within one ulp of the correctly rounded sqrt(2)
    let r = elementary(ElementaryFn::Pow, &[bf(2.0), bf(0.5)], p).unwrap().rounded;
    let q = sqrt(&bf(2.0), p).rounded;
    let d = sub(&r, &q, fmt(15, 256)).rounded;
    assert!(d.is_zero() || d.top_exponent().unwrap() <= q.top_exponent().unwrap() - 200);

    // exp(log(x)) round trip
    let l = elementary(ElementaryFn::Log, &[bf(123.456)], p).unwrap().rounded;
    let e = elementary(ElementaryFn::Exp, &[l], p).unwrap().rounded;
    let d = sub(&e, &bf(123.456), p).rounded;
    assert!(d.is_zero() || d.top_exponent().unwrap() < 6 - 195);
}

#[test]
fn pow_special_cases() {
    let b = FloatFormat::BINARY64;
    let p = |x: f64, y: f64| elementary(ElementaryFn::Pow, &[bf(x), bf(y)], b).unwrap().rounded.to_f64();
    assert_eq!(p(2.0, 10.0), 1024.0);
    assert_eq!(p(-2.0, 3.0), -8.0);
    assert_eq!(p(2.0, -2.0), 0.25);
    assert_eq!(p(f64::NAN, 0.0), 1.0);
    assert_eq!(p(1.0, f64::NAN), 1.0);
    assert!(p(-2.0, 0.5).is_nan());
    assert_eq!(p(0.0, -1.0), f64::INFINITY);
    assert_eq!(p(-0.0, -3.0), f64::NEG_INFINITY);
    assert_eq!(p(0.5, f64::INFINITY), 0.0);
    assert_eq!(p(-1.0, f64::INFINITY), 1.0);
    assert_eq!(p(10.0, 400.0), f64::INFINITY);
    assert_eq!(p(3.0, 0.5), 3f64.sqrt());
}

#[test]
fn large_argument_reduction() {
    let b = FloatFormat::BINARY64;
    for x in [1e22, 1e300, 2f64.powi(1000)] {
        let s = elementary(ElementaryFn::Sin, &[bf(x)], b).unwrap().rounded.to_f64();
        let c = elementary(ElementaryFn::Cos, &[bf(x)], b).unwrap().rounded.to_f64();
        // glibc-quality reduction for these is within an ulp
        assert!((s - x.sin()).abs() <= 2.0 * f64::EPSILON, "sin({x})");
        assert!((c - x.cos()).abs() <= 2.0 * f64::EPSILON, "cos({x})");
    }
}

#[test]
fn double_rounding_witness_exists() {
    // Rounding through one extra bit first must disagree with single
    // rounding somewhere; the engine agrees with the oracle everywhere.
    let f = fmt(3, 2);
    let wider = fmt(3, 3);
    let oracle = SmallFormatOracle::new(f).unwrap();
    let mut witness = None;
    'outer: for &a in &oracle.finite_values() {
        for &b in &oracle.finite_values() {
            let once = add(&bf(a), &bf(b), f).rounded;
            let twice = round_to_format(&add(&bf(a), &bf(b), wider).rounded, f).rounded;
            assert_eq!(once.to_f64(), oracle.apply(ArithOp::Add, a, b));
            if once != twice {
                witness = Some((a, b));
                break 'outer;
            }
        }
    }
    assert!(witness.is_some());
}

fn arb_format() -> impl Strategy<Value = FloatFormat> {
    (2u32..=12, 1u32..=60).prop_map(|(e, m)| fmt(e, m))
}

fn arb_finite() -> impl Strategy<Value = f64> {
    any::<f64>().prop_filter("finite", |x| x.is_finite())
}

proptest! {
    #[test]
    fn round_trip_f64(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        let y = to_f64(&from_f64(x));
        if x.is_nan() {
            prop_assert!(y.is_nan());
        } else {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rounding_is_idempotent(x in arb_finite(), f in arb_format()) {
        let once = round_to_format(&bf(x), f).rounded;
        let twice = round_to_format(&once, f);
        prop_assert_eq!(&twice.rounded, &once);
        prop_assert!(!twice.inexact);
    }

    #[test]
    fn rounding_is_monotone(a in arb_finite(), b in arb_finite(), f in arb_format()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let rl = round_to_format(&bf(lo), f).rounded;
        let rh = round_to_format(&bf(hi), f).rounded;
        prop_assert!(rl <= rh);
    }

    #[test]
    fn rounding_is_sign_symmetric(x in arb_finite(), f in arb_format()) {
        let p = round_to_format(&bf(x), f).rounded;
        let n = round_to_format(&bf(-x), f).rounded;
        prop_assert_eq!(n, -p);
    }

    #[test]
    fn binary64_matches_native(a in arb_finite(), b in arb_finite(), c in arb_finite()) {
        let f = FloatFormat::BINARY64;
        let same = |x: f64, y: f64| (x.is_nan() && y.is_nan()) || x.to_bits() == y.to_bits();
        prop_assert!(same(add(&bf(a), &bf(b), f).rounded.to_f64(), a + b));
        prop_assert!(same(sub(&bf(a), &bf(b), f).rounded.to_f64(), a - b));
        prop_assert!(same(mul(&bf(a), &bf(b), f).rounded.to_f64(), a * b));
        prop_assert!(same(div(&bf(a), &bf(b), f).rounded.to_f64(), a / b));
        prop_assert!(same(sqrt(&bf(a.abs()), f).rounded.to_f64(), a.abs().sqrt()));
        prop_assert!(same(fma(&bf(a), &bf(b), &bf(c), f).rounded.to_f64(), a.mul_add(b, c)));
    }

    #[test]
    fn binary64_matches_native_near_subnormals(a in -1e-300f64..1e-300, b in -1e-10f64..1e-10) {
        let f = FloatFormat::BINARY64;
        prop_assert_eq!(mul(&bf(a), &bf(b), f).rounded.to_f64().to_bits(), (a * b).to_bits());
        prop_assert_eq!(div(&bf(a), &bf(1.0 / b), f).rounded.to_f64().to_bits(), (a / (1.0 / b)).to_bits());
        prop_assert_eq!(fma(&bf(a), &bf(b), &bf(a), f).rounded.to_f64().to_bits(), a.mul_add(b, a).to_bits());
    }

    /// Figueroa: binary64 (53 bits) is wide enough that rounding a binary64
    /// result to p <= 25 bits equals a single rounding.
    #[test]
    fn innocuous_double_rounding_regime(a in -1e6f64..1e6, b in -1e6f64..1e6, m in 1u32..=24) {
        let f = fmt(8, m);
        let ra = round_to_format(&bf(a), f).rounded;
        let rb = round_to_format(&bf(b), f).rounded;
        let (x, y) = (ra.to_f64(), rb.to_f64());
        let via = |v: f64| round_to_format(&bf(v), f).rounded;
        prop_assert_eq!(add(&ra, &rb, f).rounded, via(x + y));
        prop_assert_eq!(mul(&ra, &rb, f).rounded, via(x * y));
        if y != 0.0 {
            prop_assert_eq!(div(&ra, &rb, f).rounded, via(x / y));
        }
        prop_assert_eq!(sqrt(&ra.abs(), f).rounded, via(x.abs().sqrt()));
    }

    /// The u128 fast path and the BigUint path are independent
    /// implementations of the same contract.
    #[test]
    fn fast_and_wide_paths_agree(
        am in 1u64..(1 << 53), ae in -80i64..80, an in any::<bool>(),
        bm in 1u64..(1 << 53), be in -80i64..80, bn in any::<bool>(),
        cm in 1u64..(1 << 53), ce in -80i64..80,
        prec in 2u64..=53,
    ) {
        let t = Target { prec, emin: -60, emax: 60, subnormals: true };
        let a = BigFloat::from_u64_parts(an, ae, am);
        let b = BigFloat::from_u64_parts(bn, be, bm);
        let c = BigFloat::from_u64_parts(false, ce, cm);
        let (pa, pb, pc) = (a.small_parts(53).unwrap(), b.small_parts(53).unwrap(), c.small_parts(53).unwrap());
        let (wa, wb, wc) = (a.big_parts().unwrap(), b.big_parts().unwrap(), c.big_parts().unwrap());
        prop_assert_eq!(fast::add(pa, pb, &t), wide::add(wa.clone(), wb.clone(), &t));
        prop_assert_eq!(fast::mul(pa, pb, &t), wide::mul(wa.clone(), wb.clone(), &t));
        prop_assert_eq!(fast::div(pa, pb, &t), wide::div(wa.clone(), wb.clone(), &t));
        prop_assert_eq!(fast::sqrt((pc.1, pc.2), &t), wide::sqrt(wc.1, wc.2.clone(), &t));
        prop_assert_eq!(fast::fma(pa, pb, pc, &t), wide::fma(wa, wb, wc, &t));
    }
}
