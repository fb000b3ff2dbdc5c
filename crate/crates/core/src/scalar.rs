//! Numeric abstraction the workloads are written against, so the same code
//! runs natively on `f64` and instrumented on `TNum`.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::memmode;
use crate::opmode::TNum;

pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + 'static
{
    fn lit(x: f64) -> Self;
    fn value(self) -> f64;
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn powf(self, y: Self) -> Self;
    fn min(self, o: Self) -> Self;
    fn max(self, o: Self) -> Self;
    fn abs(self) -> Self;

    /// Release instrumentation state not reachable from `roots`.
    fn collect(_roots: &[&[Self]]) {}
}

impl Scalar for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn value(self) -> f64 {
        self
    }
    #[inline]
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    #[inline]
    fn exp(self) -> Self {
        f64::exp(self)
    }
    #[inline]
    fn ln(self) -> Self {
        f64::ln(self)
    }
    #[inline]
    fn sin(self) -> Self {
        f64::sin(self)
    }
    #[inline]
    fn cos(self) -> Self {
        f64::cos(self)
    }
    #[inline]
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    #[inline]
    fn powf(self, y: Self) -> Self {
        f64::powf(self, y)
    }
    #[inline]
    fn min(self, o: Self) -> Self {
        f64::min(self, o)
    }
    #[inline]
    fn max(self, o: Self) -> Self {
        f64::max(self, o)
    }
    #[inline]
    fn abs(self) -> Self {
        f64::abs(self)
    }
}

impl Scalar for TNum {
    #[inline]
    fn lit(x: f64) -> Self {
        TNum::new(x)
    }
    #[inline]
    fn value(self) -> f64 {
        TNum::value(self)
    }
    #[track_caller]
    fn sqrt(self) -> Self {
        TNum::sqrt(self)
    }
    #[track_caller]
    fn exp(self) -> Self {
        TNum::exp(self)
    }
    #[track_caller]
    fn ln(self) -> Self {
        TNum::ln(self)
    }
    #[track_caller]
    fn sin(self) -> Self {
        TNum::sin(self)
    }
    #[track_caller]
    fn cos(self) -> Self {
        TNum::cos(self)
    }
    #[track_caller]
    fn tanh(self) -> Self {
        TNum::tanh(self)
    }
    #[track_caller]
    fn powf(self, y: Self) -> Self {
        TNum::powf(self, y)
    }
    #[track_caller]
    fn min(self, o: Self) -> Self {
        TNum::min(self, o)
    }
    #[track_caller]
    fn max(self, o: Self) -> Self {
        TNum::max(self, o)
    }
    #[track_caller]
    fn abs(self) -> Self {
        TNum::abs(self)
    }

    fn collect(roots: &[&[Self]]) {
        memmode::collect(roots.iter().copied());
    }
}
