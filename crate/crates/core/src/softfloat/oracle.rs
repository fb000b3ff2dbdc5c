//! Reference arithmetic for small formats.
//!
//! Works by enumerating every representable value of the format as a scaled
//! integer and picking the nearest one to the exact rational result. It shares
//! no code with the integer-mantissa engine and exists to check it, both from
//! the test suite and from the `selftest` subcommand.

use super::{ArithOp, FloatFormat};

/// Exact rational reference for formats with at most 5 exponent bits and at
/// most 10 mantissa bits.
#[derive(Clone, Debug)]
pub struct SmallFormatOracle {
    format: FloatFormat,
    scale: u32,
    /// Non-negative finite values times `2^scale`, indexed by encoding.
    values: Vec<i128>,
    overflow_value: i128,
}

impl SmallFormatOracle {
    pub fn new(format: FloatFormat) -> Option<Self> {
        if format.exp_bits() > 5 || format.man_bits() > 10 {
            return None;
        }
        let e = format.exp_bits();
        let m = format.man_bits();
        let bias = (1i64 << (e - 1)) - 1;
        // smallest subnormal is 2^(1 - bias - m)
        let scale = (bias - 1 + i64::from(m)) as u32;
        let mut values = Vec::new();
        for field_e in 0..(1i64 << e) - 1 {
            for field_m in 0..(1i128 << m) {
                let v = if field_e == 0 {
                    field_m
                } else {
                    ((1i128 << m) + field_m) << (field_e - 1)
                };
                values.push(v);
            }
        }
        let overflow_value = 1i128 << (2 * bias + i64::from(m));
        debug_assert_eq!(values.len() % 2, 0);
        Some(SmallFormatOracle { format, scale, values, overflow_value })
    }

    pub fn format(&self) -> FloatFormat {
        self.format
    }

    /// Every finite value, both signs, as exact binary64 numbers.
    pub fn finite_values(&self) -> Vec<f64> {
        let unit = (-(self.scale as f64)).exp2();
        let mut out = Vec::with_capacity(2 * self.values.len());
        for &v in &self.values {
            out.push(v as f64 * unit);
            out.push(-(v as f64) * unit);
        }
        out
    }

    fn to_scaled(&self, x: f64) -> i128 {
        let s = x * (self.scale as f64).exp2();
        debug_assert_eq!(s.fract(), 0.0, "{x} is not a value of the format");
        s as i128
    }

    fn widen(&self, idx: usize, neg: bool) -> f64 {
        let v = self.values[idx] as f64 * (-(self.scale as f64)).exp2();
        if neg {
            -v
        } else {
            v
        }
    }

    /// Round `num / (den * 2^scale)` with ties to even; `den > 0`, `num != 0`.
    fn round_scaled(&self, num: i128, den: i128) -> f64 {
        let neg = num < 0;
        let n = num.abs();
        // largest index with values[i] * den <= n
        let idx = self.values.partition_point(|&v| v * den <= n) - 1;
        if self.values[idx] * den == n {
            return self.widen(idx, neg);
        }
        let (lo, hi) = (self.values[idx], self.values.get(idx + 1).copied().unwrap_or(self.overflow_value));
        let twice = 2 * n;
        let mid = (lo + hi) * den;
        let pick_hi = twice > mid || (twice == mid && idx % 2 == 1);
        if !pick_hi {
            return self.widen(idx, neg);
        }
        if idx + 1 == self.values.len() {
            return if neg { f64::NEG_INFINITY } else { f64::INFINITY };
        }
        self.widen(idx + 1, neg)
    }

    /// Reference result of `a op b` for finite values of the format.
    pub fn apply(&self, op: ArithOp, a: f64, b: f64) -> f64 {
        let ia = self.to_scaled(a);
        let ib = self.to_scaled(b);
        let s = self.scale;
        match op {
            ArithOp::Add | ArithOp::Sub => {
                let (b, ib) = if op == ArithOp::Sub { (-b, -ib) } else { (b, ib) };
                let sum = ia + ib;
                if sum == 0 {
                    // exact zero: -0 only when both addends are -0
                    return if a.is_sign_negative() && b.is_sign_negative() && ia == 0 { -0.0 } else { 0.0 };
                }
                self.round_scaled(sum, 1)
            }
            ArithOp::Mul => {
                let p = ia * ib;
                if p == 0 {
                    return if a.is_sign_negative() != b.is_sign_negative() { -0.0 } else { 0.0 };
                }
                self.round_scaled(p, 1i128 << s)
            }
            ArithOp::Div => {
                let neg = a.is_sign_negative() != b.is_sign_negative();
                if ib == 0 {
                    return if ia == 0 {
                        f64::NAN
                    } else if neg {
                        f64::NEG_INFINITY
                    } else {
                        f64::INFINITY
                    };
                }
                if ia == 0 {
                    return if neg { -0.0 } else { 0.0 };
                }
                // a/b = ia/ib = (ia * 2^s / ib) / 2^s
                let (num, den) = if ib < 0 { (-ia, -ib) } else { (ia, ib) };
                self.round_scaled(num << s, den)
            }
            ArithOp::Sqrt | ArithOp::Fma => unimplemented!("oracle covers binary operations only"),
        }
    }
}

/// Summary of an exhaustive engine-versus-oracle comparison.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExhaustiveSummary {
    pub formats: usize,
    pub cases: u64,
    pub mismatches: u64,
    pub first_mismatch: Option<String>,
}

/// Compare the engine against the oracle on all finite operand pairs of every
/// format with `2 <= exp_bits <= max_exp` and `1 <= man_bits <= max_man`.
pub fn exhaustive_check(max_exp: u32, max_man: u32, ops: &[ArithOp]) -> ExhaustiveSummary {
    let mut summary = ExhaustiveSummary::default();
    for e in 2..=max_exp {
        for m in 1..=max_man {
            let fmt = FloatFormat::new(e, m).expect("small format");
            let oracle = SmallFormatOracle::new(fmt).expect("oracle format");
            let values = oracle.finite_values();
            let big: Vec<_> = values.iter().map(|&v| super::BigFloat::from_f64(v)).collect();
            summary.formats += 1;
            for &op in ops {
                for (i, &a) in values.iter().enumerate() {
                    for (j, &b) in values.iter().enumerate() {
                        let want = oracle.apply(op, a, b);
                        let got = super::arith(op, &[big[i].clone(), big[j].clone()], fmt)
                            .expect("binary op")
                            .rounded
                            .to_f64();
                        summary.cases += 1;
                        let same = (want.is_nan() && got.is_nan()) || want.to_bits() == got.to_bits();
                        if !same {
                            summary.mismatches += 1;
                            if summary.first_mismatch.is_none() {
                                summary.first_mismatch = Some(format!("{fmt} {op}({a:e}, {b:e}): engine {got:e}, oracle {want:e}"));
                            }
                        }
                    }
                }
            }
        }
    }
    summary
}
