//! Op-mode: the instrumented number type and per-operation error statistics.
//!
//! Every arithmetic operator on [`TNum`] looks up the governing scope. Under
//! an op-mode scope the operands are rounded to the target format, the
//! operation is performed once in that format, and the result is widened back
//! to binary64. Under a mem-mode scope the work is handed to
//! [`crate::memmode`]. Without a governing scope the native operation runs and
//! is counted as full precision.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::panic::Location;

use serde::{Deserialize, Serialize};

use crate::memmode::{self, Handle};
use crate::session::{with_active, Governor, State};
use crate::softfloat::{self, ArithOp, BigFloat, ElementaryFn, FloatFormat, Rounding};

pub type Loc = &'static Location<'static>;

/// Instrumented operation kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OpKind {
    Add,
    Sub,
    Mul,
    Div,
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
    Pow,
}

impl OpKind {
    pub fn name(self) -> &'static str {
        match self {
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Sqrt => "sqrt",
            OpKind::Exp => "exp",
            OpKind::Log => "log",
            OpKind::Sin => "sin",
            OpKind::Cos => "cos",
            OpKind::Tanh => "tanh",
            OpKind::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            OpKind::Add | OpKind::Sub | OpKind::Mul | OpKind::Div | OpKind::Pow => 2,
            _ => 1,
        }
    }

    /// True for the correctly rounded kinds.
    pub fn is_arith(self) -> bool {
        self.arith().is_some()
    }

    fn arith(self) -> Option<ArithOp> {
        match self {
            OpKind::Add => Some(ArithOp::Add),
            OpKind::Sub => Some(ArithOp::Sub),
            OpKind::Mul => Some(ArithOp::Mul),
            OpKind::Div => Some(ArithOp::Div),
            OpKind::Sqrt => Some(ArithOp::Sqrt),
            _ => None,
        }
    }

    fn elementary(self) -> Option<ElementaryFn> {
        match self {
            OpKind::Exp => Some(ElementaryFn::Exp),
            OpKind::Log => Some(ElementaryFn::Log),
            OpKind::Sin => Some(ElementaryFn::Sin),
            OpKind::Cos => Some(ElementaryFn::Cos),
            OpKind::Tanh => Some(ElementaryFn::Tanh),
            OpKind::Pow => Some(ElementaryFn::Pow),
            _ => None,
        }
    }

    /// The binary64 operation.
    pub fn native(self, a: f64, b: f64) -> f64 {
        match self {
            OpKind::Add => a + b,
            OpKind::Sub => a - b,
            OpKind::Mul => a * b,
            OpKind::Div => a / b,
            OpKind::Sqrt => a.sqrt(),
            OpKind::Exp => a.exp(),
            OpKind::Log => a.ln(),
            OpKind::Sin => a.sin(),
            OpKind::Cos => a.cos(),
            OpKind::Tanh => a.tanh(),
            OpKind::Pow => a.powf(b),
        }
    }

    /// The operation on soft-float values, rounded once into `r`.
    ///
    /// Transcendentals at exactly binary64 defer to the host math library,
    /// so that identity truncation reproduces native results bit for bit.
    pub(crate) fn soft(self, a: &BigFloat, b: &BigFloat, r: Rounding) -> BigFloat {
        if let Some(op) = self.arith() {
            let t = r.target();
            return match op {
                ArithOp::Add => softfloat::add_target(a, b, &t),
                ArithOp::Sub => softfloat::add_target(a, &-b, &t),
                ArithOp::Mul => softfloat::mul_target(a, b, &t),
                ArithOp::Div => softfloat::div_target(a, b, &t),
                _ => softfloat::sqrt_target(a, &t),
            }
            .rounded;
        }
        let f = self.elementary().expect("elementary kind");
        if r == Rounding::new(FloatFormat::BINARY64) {
            return BigFloat::from_f64(self.native(a.to_f64(), b.to_f64()));
        }
        let args = [a.clone(), b.clone()];
        softfloat::elementary(f, &args[..f.arity()], r).expect("arity matches").rounded
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Local error accumulators for one (kind, location).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OpStats {
    pub count: u64,
    pub abs_err_sum: f64,
    pub abs_err_max: f64,
    pub rel_err_sum: f64,
    pub rel_err_max: f64,
}

impl OpStats {
    fn record(&mut self, truncated: f64, reference: f64) {
        self.count += 1;
        let abs = if truncated == reference || (truncated.is_nan() && reference.is_nan()) {
            0.0
        } else {
            (truncated - reference).abs()
        };
        let rel = if abs == 0.0 { 0.0 } else { abs / reference.abs().max(f64::MIN_POSITIVE) };
        self.abs_err_sum += abs;
        self.abs_err_max = self.abs_err_max.max(abs);
        self.rel_err_sum += rel;
        self.rel_err_max = self.rel_err_max.max(rel);
    }

    fn merge(&mut self, o: &OpStats) {
        self.count += o.count;
        self.abs_err_sum += o.abs_err_sum;
        self.abs_err_max = self.abs_err_max.max(o.abs_err_max);
        self.rel_err_sum += o.rel_err_sum;
        self.rel_err_max = self.rel_err_max.max(o.rel_err_max);
    }
}

/// Stats for one (kind, `file:line`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatEntry {
    pub kind: OpKind,
    pub location: String,
    pub stats: OpStats,
}

#[derive(Default)]
pub(crate) struct OpStatsTable {
    index: HashMap<(OpKind, usize), usize>,
    rows: Vec<(OpKind, Loc, OpStats)>,
}

impl OpStatsTable {
    fn record(&mut self, kind: OpKind, loc: Loc, truncated: f64, reference: f64) {
        let key = (kind, loc as *const Location<'static> as usize);
        let i = match self.index.get(&key) {
            Some(&i) => i,
            None => {
                self.rows.push((kind, loc, OpStats::default()));
                self.index.insert(key, self.rows.len() - 1);
                self.rows.len() - 1
            }
        };
        self.rows[i].2.record(truncated, reference);
    }

    pub(crate) fn snapshot(&self) -> Vec<StatEntry> {
        let mut merged: BTreeMap<(String, OpKind), OpStats> = BTreeMap::new();
        for (kind, loc, s) in &self.rows {
            merged.entry((location_key(loc), *kind)).or_default().merge(s);
        }
        merged.into_iter().map(|((location, kind), stats)| StatEntry { kind, location, stats }).collect()
    }
}

/// `file:line` of a caller location.
pub fn location_key(loc: Loc) -> String {
    format!("{}:{}", loc.file(), loc.line())
}

/// Binary64 carrier for instrumented arithmetic. Holds either a number or,
/// in mem-mode, a boxed handle.
#[derive(Clone, Copy, Default)]
#[repr(transparent)]
pub struct TNum(f64);

impl TNum {
    pub const fn new(x: f64) -> Self {
        TNum(x)
    }

    pub fn to_bits(self) -> u64 {
        self.0.to_bits()
    }

    pub(crate) fn from_handle(h: Handle) -> Self {
        TNum(f64::from_bits(h.to_bits()))
    }

    pub fn handle(self) -> Option<Handle> {
        Handle::from_bits(self.0.to_bits()).ok()
    }

    pub fn is_handle(self) -> bool {
        Handle::is_handle_bits(self.0.to_bits())
    }

    /// Numeric value: the carrier itself, or a boxed value's payload
    /// widened to binary64.
    pub fn value(self) -> f64 {
        if !self.is_handle() {
            return self.0;
        }
        memmode::payload_value(self).unwrap_or_else(|e| panic!("{e}"))
    }

    /// The carrier value; a handle's raw NaN pattern is returned unchanged.
    pub fn raw(self) -> f64 {
        self.0
    }

    #[track_caller]
    pub fn sqrt(self) -> Self {
        exec(OpKind::Sqrt, self, TNum(0.0), Location::caller())
    }

    #[track_caller]
    pub fn exp(self) -> Self {
        exec(OpKind::Exp, self, TNum(0.0), Location::caller())
    }

    #[track_caller]
    pub fn ln(self) -> Self {
        exec(OpKind::Log, self, TNum(0.0), Location::caller())
    }

    #[track_caller]
    pub fn sin(self) -> Self {
        exec(OpKind::Sin, self, TNum(0.0), Location::caller())
    }

    #[track_caller]
    pub fn cos(self) -> Self {
        exec(OpKind::Cos, self, TNum(0.0), Location::caller())
    }

    #[track_caller]
    pub fn tanh(self) -> Self {
        exec(OpKind::Tanh, self, TNum(0.0), Location::caller())
    }

    #[track_caller]
    pub fn powf(self, y: TNum) -> Self {
        exec(OpKind::Pow, self, y, Location::caller())
    }

    /// Exact in every format, so not counted as an operation.
    #[track_caller]
    pub fn min(self, o: TNum) -> Self {
        select(self, o, false)
    }

    #[track_caller]
    pub fn max(self, o: TNum) -> Self {
        select(self, o, true)
    }

    #[track_caller]
    pub fn abs(self) -> Self {
        if self.is_handle() {
            return memmode::unary_exact(self, |x| x.abs(), f64::abs);
        }
        TNum(self.0.abs())
    }
}

impl fmt::Debug for TNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.handle() {
            Some(h) => write!(f, "TNum({h:?})"),
            None => write!(f, "TNum({:?})", self.0),
        }
    }
}

impl From<f64> for TNum {
    fn from(x: f64) -> Self {
        TNum(x)
    }
}

impl PartialEq for TNum {
    fn eq(&self, o: &TNum) -> bool {
        self.value() == o.value()
    }
}

impl PartialOrd for TNum {
    fn partial_cmp(&self, o: &TNum) -> Option<Ordering> {
        self.value().partial_cmp(&o.value())
    }
}

impl Neg for TNum {
    type Output = TNum;
    #[track_caller]
    fn neg(self) -> TNum {
        if self.is_handle() {
            return memmode::unary_exact(self, |x| -x, |x| -x);
        }
        TNum(-self.0)
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $kind:expr) => {
        impl $tr for TNum {
            type Output = TNum;
            #[track_caller]
            #[inline]
            fn $m(self, rhs: TNum) -> TNum {
                exec($kind, self, rhs, Location::caller())
            }
        }
    };
}

binop!(Add, add, OpKind::Add);
binop!(Sub, sub, OpKind::Sub);
binop!(Mul, mul, OpKind::Mul);
binop!(Div, div, OpKind::Div);

#[track_caller]
fn select(a: TNum, b: TNum, want_max: bool) -> TNum {
    if a.is_handle() || b.is_handle() {
        return memmode::select(a, b, want_max);
    }
    TNum(if want_max { a.0.max(b.0) } else { a.0.min(b.0) })
}

#[inline]
fn exec(kind: OpKind, a: TNum, b: TNum, loc: Loc) -> TNum {
    let boxed = a.is_handle() || b.is_handle();
    let out = with_active(|st| {
        if boxed {
            return memmode::exec_boxed(st, kind, a, b, loc);
        }
        match st.governor {
            Governor::Native => {
                st.count_flop(None);
                TNum(kind.native(a.0, b.0))
            }
            Governor::Op(r) => TNum(op_exec_in(st, kind, a.0, b.0, r, loc)),
            Governor::Mem(_) => memmode::exec_boxed(st, kind, a, b, loc),
        }
    });
    match out {
        Some(x) => x,
        None => {
            debug_assert!(!boxed, "mem-mode handle used as a number outside its session ({loc})");
            TNum(kind.native(a.0, b.0))
        }
    }
}

fn op_exec_in(st: &mut State, kind: OpKind, a: f64, b: f64, r: Rounding, loc: Loc) -> f64 {
    let ra = softfloat::round_to_format(&BigFloat::from_f64(a), r).rounded;
    let rb = if kind.arity() == 2 { softfloat::round_to_format(&BigFloat::from_f64(b), r).rounded } else { BigFloat::zero(false) };
    let out = kind.soft(&ra, &rb, r).to_f64();
    st.count_flop(Some(r.format));
    st.stats.record(kind, loc, out, kind.native(a, b));
    out
}

/// Execute one operation on binary64 operands in the active session's
/// current region, as an instrumented `TNum` operation would.
#[track_caller]
pub fn op_exec(kind: OpKind, a: f64, b: f64) -> f64 {
    exec(kind, TNum(a), TNum(b), Location::caller()).value()
}

/// Elementary-function entry point by name. Unknown names are an error,
/// never a silent native fallback.
#[track_caller]
pub fn math_exec(name: &str, a: f64) -> Result<f64, softfloat::SoftFloatError> {
    let f: ElementaryFn = name.parse()?;
    let kind = match f {
        ElementaryFn::Exp => OpKind::Exp,
        ElementaryFn::Log => OpKind::Log,
        ElementaryFn::Sin => OpKind::Sin,
        ElementaryFn::Cos => OpKind::Cos,
        ElementaryFn::Tanh => OpKind::Tanh,
        ElementaryFn::Pow => {
            return Err(softfloat::SoftFloatError::Arity { name: "pow", expected: 2, got: 1 });
        }
    };
    Ok(exec(kind, TNum(a), TNum(0.0), Location::caller()).value())
}
