//! Mem-mode: boxed values with a binary64 shadow.
//!
//! A boxed value lives in the session's [`ValueTable`]; the `TNum` carrier
//! holds a [`Handle`], a quiet-NaN bit pattern whose payload encodes a slot
//! and a generation. Each operation on boxed values computes the payload in
//! the governing format and the shadow in native binary64, and flags the
//! call site when the two drift apart by more than the scope's threshold.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::panic::Location;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opmode::{location_key, Loc, OpKind, TNum};
use crate::session::{with_active, Governor, State};
use crate::softfloat::{self, ArithOp, BigFloat, FloatFormat, Rounding};

/// Default bound on simultaneously live boxed values.
pub const DEFAULT_CAPACITY: usize = 1 << 24;
/// Largest configurable capacity (the slot field width).
pub const MAX_CAPACITY: usize = 1 << SLOT_BITS;

const TAG: u64 = 0x7FFC_0000_0000_0000;
const TAG_MASK: u64 = 0xFFFC_0000_0000_0000;
const SLOT_BITS: u32 = 26;
const GEN_BITS: u32 = 24;
const SLOT_MASK: u64 = (1 << SLOT_BITS) - 1;
const GEN_MASK: u64 = (1 << GEN_BITS) - 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MemError {
    #[error("invalid handle: bit pattern {0:#018x} is not a boxed value")]
    InvalidHandle(u64),
    #[error("stale handle (slot {slot}, generation {generation}); the slot last held a value created at {origin}")]
    Stale { slot: u32, generation: u32, origin: String },
    #[error("value table capacity exhausted: {capacity} live values")]
    Capacity { capacity: usize },
    #[error("no active session")]
    NoSession,
}

/// Identifier of a boxed value, stored in the NaN payload space of binary64.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Handle(u64);

impl Handle {
    fn new(slot: u32, generation: u32) -> Self {
        Handle(TAG | (u64::from(generation) & GEN_MASK) << SLOT_BITS | u64::from(slot))
    }

    pub fn is_handle_bits(bits: u64) -> bool {
        bits & TAG_MASK == TAG
    }

    pub fn from_bits(bits: u64) -> Result<Self, MemError> {
        if Handle::is_handle_bits(bits) {
            Ok(Handle(bits))
        } else {
            Err(MemError::InvalidHandle(bits))
        }
    }

    pub fn to_bits(self) -> u64 {
        self.0
    }

    pub fn slot(self) -> u32 {
        (self.0 & SLOT_MASK) as u32
    }

    pub fn generation(self) -> u32 {
        ((self.0 >> SLOT_BITS) & GEN_MASK) as u32
    }

    pub fn to_tnum(self) -> TNum {
        TNum::from_handle(self)
    }
}

impl fmt::Debug for Handle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Handle(slot {}, gen {})", self.slot(), self.generation())
    }
}

#[derive(Clone, Debug)]
pub struct ValueRecord {
    pub payload: BigFloat,
    pub shadow: f64,
    pub origin: Loc,
    pub last_op: Loc,
}

struct Slot {
    generation: u32,
    record: Option<ValueRecord>,
    last_origin: Option<Loc>,
}

/// Slot table with a free list and a live-value bound.
pub struct ValueTable {
    slots: Vec<Slot>,
    free: Vec<u32>,
    live: usize,
    capacity: usize,
}

impl ValueTable {
    pub fn with_capacity(capacity: usize) -> Self {
        ValueTable { slots: Vec::new(), free: Vec::new(), live: 0, capacity: capacity.min(MAX_CAPACITY) }
    }

    pub fn live(&self) -> usize {
        self.live
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn insert(&mut self, record: ValueRecord) -> Result<Handle, MemError> {
        if self.live >= self.capacity {
            return Err(MemError::Capacity { capacity: self.capacity });
        }
        let slot = match self.free.pop() {
            Some(s) => s,
            None => {
                self.slots.push(Slot { generation: 0, record: None, last_origin: None });
                (self.slots.len() - 1) as u32
            }
        };
        let s = &mut self.slots[slot as usize];
        s.last_origin = Some(record.origin);
        s.record = Some(record);
        self.live += 1;
        Ok(Handle::new(slot, s.generation))
    }

    pub fn get(&self, h: Handle) -> Result<&ValueRecord, MemError> {
        let s = self.slots.get(h.slot() as usize).ok_or(MemError::InvalidHandle(h.0))?;
        match &s.record {
            Some(r) if s.generation == h.generation() => Ok(r),
            _ => Err(MemError::Stale {
                slot: h.slot(),
                generation: h.generation(),
                origin: s.last_origin.map_or_else(|| "<never allocated>".to_string(), location_key),
            }),
        }
    }

    pub fn release(&mut self, h: Handle) -> Result<ValueRecord, MemError> {
        self.get(h)?;
        let s = &mut self.slots[h.slot() as usize];
        let rec = s.record.take().expect("checked live");
        s.generation = (s.generation + 1) & GEN_MASK as u32;
        self.free.push(h.slot());
        self.live -= 1;
        Ok(rec)
    }

    /// Free every live record not reachable from `roots`; returns the
    /// number released.
    pub fn collect(&mut self, roots: impl IntoIterator<Item = Handle>) -> usize {
        let mut keep = vec![false; self.slots.len()];
        for h in roots {
            if self.get(h).is_ok() {
                keep[h.slot() as usize] = true;
            }
        }
        let mut freed = 0;
        for (i, s) in self.slots.iter_mut().enumerate() {
            if s.record.is_some() && !keep[i] {
                s.record = None;
                s.generation = (s.generation + 1) & GEN_MASK as u32;
                self.free.push(i as u32);
                freed += 1;
            }
        }
        self.live -= freed;
        freed
    }
}

/// Relative deviation of a payload from its shadow, with an absolute floor
/// of one binary64 ulp-scale at the operands' magnitude.
pub fn deviation(payload: f64, shadow: f64) -> f64 {
    if payload == shadow || (payload.is_nan() && shadow.is_nan()) {
        return 0.0;
    }
    if payload.is_nan() || shadow.is_nan() {
        return f64::INFINITY;
    }
    let diff = (payload - shadow).abs();
    let floor = f64::EPSILON * shadow.abs().max(payload.abs());
    diff / shadow.abs().max(floor)
}

#[derive(Clone, Copy, Debug, Default)]
struct FlagStats {
    count: u64,
    max_deviation: f64,
    first_seen: u64,
}

/// One flagged `file:line`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagEntry {
    pub location: String,
    pub count: u64,
    pub max_deviation: f64,
    pub first_seen: u64,
}

#[derive(Default)]
pub struct FlagTable {
    index: HashMap<usize, usize>,
    rows: Vec<(Loc, FlagStats)>,
}

impl FlagTable {
    fn flag(&mut self, loc: Loc, dev: f64, op_index: u64) {
        let key = loc as *const Location<'static> as usize;
        let i = *self.index.entry(key).or_insert_with(|| {
            self.rows.push((loc, FlagStats { count: 0, max_deviation: 0.0, first_seen: op_index }));
            self.rows.len() - 1
        });
        let s = &mut self.rows[i].1;
        s.count += 1;
        s.max_deviation = s.max_deviation.max(dev);
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Entries merged per `file:line`, sorted by count descending and then by
    /// location.
    pub fn snapshot(&self) -> Vec<FlagEntry> {
        let mut merged: BTreeMap<String, FlagEntry> = BTreeMap::new();
        for (loc, s) in &self.rows {
            let key = location_key(loc);
            let e = merged.entry(key.clone()).or_insert(FlagEntry {
                location: key,
                count: 0,
                max_deviation: 0.0,
                first_seen: s.first_seen,
            });
            e.count += s.count;
            e.max_deviation = e.max_deviation.max(s.max_deviation);
            e.first_seen = e.first_seen.min(s.first_seen);
        }
        let mut out: Vec<FlagEntry> = merged.into_values().collect();
        out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.location.cmp(&b.location)));
        out
    }
}

/// Human-readable listing of a flag snapshot.
pub fn format_heatmap(entries: &[FlagEntry]) -> String {
    if entries.is_empty() {
        return "no flagged locations\n".to_string();
    }
    let width = entries.iter().map(|e| e.location.len()).max().unwrap_or(8).max(8);
    let mut out = format!("{:<width$}  {:>10}  {:>13}\n", "location", "count", "max_dev");
    for e in entries {
        out += &format!("{:<width$}  {:>10}  {:>13.6e}\n", e.location, e.count, e.max_deviation);
    }
    out
}

fn operand(st: &State, x: TNum, r: Rounding) -> Result<(BigFloat, f64, Option<Loc>), MemError> {
    if x.is_handle() {
        let rec = st.values.get(Handle(x.to_bits()))?;
        Ok((rec.payload.clone(), rec.shadow, Some(rec.origin)))
    } else {
        let v = x.raw();
        Ok((softfloat::round_to_format(&BigFloat::from_f64(v), r).rounded, v, None))
    }
}

fn truncated_format(st: &State) -> Option<FloatFormat> {
    match st.governor {
        Governor::Mem(r) => Some(r.format),
        _ => None,
    }
}

pub(crate) fn try_exec(st: &mut State, kind: OpKind, a: TNum, b: TNum, loc: Loc) -> Result<TNum, MemError> {
    let r = st.mem_rounding();
    let (pa, sa, oa) = operand(st, a, r)?;
    let (pb, sb, ob) = if kind.arity() == 2 { operand(st, b, r)? } else { (BigFloat::zero(false), 0.0, None) };
    let payload = kind.soft(&pa, &pb, r);
    let shadow = kind.native(sa, sb);
    st.count_flop(truncated_format(st));
    let dev = deviation(payload.to_f64(), shadow);
    if dev > st.mem_threshold {
        let idx = st.op_index;
        st.flags.flag(loc, dev, idx);
    }
    let origin = oa.or(ob).unwrap_or(loc);
    let h = st.values.insert(ValueRecord { payload, shadow, origin, last_op: loc })?;
    Ok(h.to_tnum())
}

pub(crate) fn exec_boxed(st: &mut State, kind: OpKind, a: TNum, b: TNum, loc: Loc) -> TNum {
    try_exec(st, kind, a, b, loc).unwrap_or_else(|e| panic!("{kind} at {}: {e}", location_key(loc)))
}

/// Sign manipulation on a boxed value: exact, uncounted, never flagged.
#[track_caller]
pub(crate) fn unary_exact(x: TNum, payload: impl Fn(&BigFloat) -> BigFloat, shadow: impl Fn(f64) -> f64) -> TNum {
    let loc = Location::caller();
    with_active(|st| {
        let rec = st.values.get(Handle(x.to_bits()))?.clone();
        let h = st.values.insert(ValueRecord {
            payload: payload(&rec.payload),
            shadow: shadow(rec.shadow),
            origin: rec.origin,
            last_op: loc,
        })?;
        Ok(h.to_tnum())
    })
    .unwrap_or(Err(MemError::NoSession))
    .unwrap_or_else(|e: MemError| panic!("{e}"))
}

/// min/max with payload and shadow selected independently, so the shadow
/// follows exactly the choice a native run would make.
#[track_caller]
pub(crate) fn select(a: TNum, b: TNum, want_max: bool) -> TNum {
    let loc = Location::caller();
    with_active(|st| {
        let r = st.mem_rounding();
        let (pa, sa, oa) = operand(st, a, r)?;
        let (pb, sb, ob) = operand(st, b, r)?;
        let pick_b = match pa.partial_cmp(&pb) {
            Some(o) => (o == std::cmp::Ordering::Less) == want_max,
            None => pa.is_nan(),
        };
        let payload = if pick_b { pb } else { pa };
        let shadow = if want_max { sa.max(sb) } else { sa.min(sb) };
        let origin = oa.or(ob).unwrap_or(loc);
        let h = st.values.insert(ValueRecord { payload, shadow, origin, last_op: loc })?;
        Ok(h.to_tnum())
    })
    .unwrap_or(Err(MemError::NoSession))
    .unwrap_or_else(|e: MemError| panic!("{e}"))
}

pub(crate) fn payload_value(x: TNum) -> Result<f64, MemError> {
    with_active(|st| Ok(st.values.get(Handle(x.to_bits()))?.payload.to_f64())).unwrap_or(Err(MemError::NoSession))
}

/// Box `x`: payload rounded to the governing format, shadow `x`.
#[track_caller]
pub fn pre_convert(x: f64) -> Result<Handle, MemError> {
    let loc = Location::caller();
    with_active(|st| {
        let payload = softfloat::round_to_format(&BigFloat::from_f64(x), st.mem_rounding()).rounded;
        st.values.insert(ValueRecord { payload, shadow: x, origin: loc, last_op: loc })
    })
    .unwrap_or(Err(MemError::NoSession))
}

/// Unbox and release.
pub fn post_convert(h: Handle) -> Result<f64, MemError> {
    with_active(|st| st.values.release(h).map(|r| r.payload.to_f64())).unwrap_or(Err(MemError::NoSession))
}

/// Unbox without releasing.
pub fn post_convert_keep(h: Handle) -> Result<f64, MemError> {
    with_active(|st| st.values.get(h).map(|r| r.payload.to_f64())).unwrap_or(Err(MemError::NoSession))
}

/// Unbox a carrier: plain numbers pass through, handles are released.
pub fn unbox(x: TNum) -> Result<f64, MemError> {
    match x.handle() {
        Some(h) => post_convert(h),
        None => Ok(x.raw()),
    }
}

/// A copy of the record behind `h`.
pub fn record(h: Handle) -> Result<ValueRecord, MemError> {
    with_active(|st| st.values.get(h).cloned()).unwrap_or(Err(MemError::NoSession))
}

/// Binary operation on two boxed values.
#[track_caller]
pub fn mem_op(op: ArithOp, a: Handle, b: Handle) -> Result<Handle, MemError> {
    let kind = match op {
        ArithOp::Add => OpKind::Add,
        ArithOp::Sub => OpKind::Sub,
        ArithOp::Mul => OpKind::Mul,
        ArithOp::Div => OpKind::Div,
        ArithOp::Sqrt => OpKind::Sqrt,
        ArithOp::Fma => panic!("mem_op takes at most two operands; compose fma from mul and add"),
    };
    let loc = Location::caller();
    with_active(|st| try_exec(st, kind, a.to_tnum(), b.to_tnum(), loc))
        .unwrap_or(Err(MemError::NoSession))?
        .handle()
        .ok_or(MemError::NoSession)
}

/// Release every boxed value not reachable from `roots`.
pub fn collect<'a>(roots: impl IntoIterator<Item = &'a [TNum]>) -> usize {
    with_active(|st| st.values.collect(roots.into_iter().flatten().filter_map(|x| x.handle()))).unwrap_or(0)
}
