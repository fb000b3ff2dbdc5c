//! Profiling sessions: one scope stack, counters, op statistics, value table
//! and flag table, bound to the thread that activates it.

use std::cell::RefCell;
use std::marker::PhantomData;
use std::rc::Rc;

use thiserror::Error;

use crate::memmode::{FlagEntry, FlagTable, ValueTable, DEFAULT_CAPACITY};
use crate::opmode::{OpStatsTable, StatEntry};
use crate::profiler::Counters;
use crate::scope::{Mode, RegionTag, TruncContext, DEFAULT_THRESHOLD};
use crate::softfloat::{FloatFormat, Rounding};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScopeError {
    #[error("scope released out of order: guard at depth {released} released while depth {top} is innermost")]
    OutOfOrder { released: usize, top: usize },
    #[error("session poisoned by an earlier scope error: {0}")]
    Poisoned(String),
    #[error("unknown region `{0}` (declared regions: {1})")]
    UnknownRegion(String, String),
    #[error("no active scope to modify")]
    NoScope,
}

/// What governs binary64 carrier operations under the current region.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) enum Governor {
    Native,
    Op(Rounding),
    Mem(Rounding),
}

pub(crate) struct State {
    stack: Vec<(u64, TruncContext)>,
    next_guard: u64,
    poisoned: Option<String>,
    declared: Vec<String>,
    region: RegionTag,
    pub(crate) governor: Governor,
    pub(crate) mem_threshold: f64,
    pub(crate) counters: Counters,
    pub(crate) stats: OpStatsTable,
    pub(crate) values: ValueTable,
    pub(crate) flags: FlagTable,
    pub(crate) op_index: u64,
}

impl State {
    fn new(capacity: usize) -> Self {
        State {
            stack: Vec::new(),
            next_guard: 0,
            poisoned: None,
            declared: Vec::new(),
            region: RegionTag::UNTAGGED,
            governor: Governor::Native,
            mem_threshold: DEFAULT_THRESHOLD,
            counters: Counters::default(),
            stats: OpStatsTable::default(),
            values: ValueTable::with_capacity(capacity),
            flags: FlagTable::default(),
            op_index: 0,
        }
    }

    fn recompute(&mut self) {
        self.governor = Governor::Native;
        self.mem_threshold = self
            .stack
            .iter()
            .rev()
            .find(|(_, c)| c.mode() == Mode::Mem)
            .map_or(DEFAULT_THRESHOLD, |(_, c)| c.threshold());
        for (_, ctx) in self.stack.iter().rev() {
            let Some(r) = ctx.rounding64() else { continue };
            if ctx.enables(&self.region) {
                self.governor = match ctx.mode() {
                    Mode::Op => Governor::Op(r),
                    Mode::Mem => Governor::Mem(r),
                };
                if let Governor::Mem(_) = self.governor {
                    self.mem_threshold = ctx.threshold();
                }
                return;
            }
        }
    }

    /// Rounding used for mem-mode payloads: the governing mem format, or
    /// binary64 when the region runs at full precision.
    pub(crate) fn mem_rounding(&self) -> Rounding {
        match self.governor {
            Governor::Mem(r) => r,
            _ => Rounding::new(FloatFormat::BINARY64),
        }
    }

    pub(crate) fn count_flop(&mut self, truncated: Option<FloatFormat>) {
        self.op_index += 1;
        match truncated {
            Some(f) => self.counters.add_truncated(f, 1),
            None => self.counters.full_flops += 1,
        }
    }

    fn check_regions(&self, ctx: &TruncContext) -> Result<(), ScopeError> {
        for name in ctx.excluded() {
            if !self.declared.iter().any(|d| d == name) {
                return Err(ScopeError::UnknownRegion(name.clone(), self.declared.join(", ")));
            }
        }
        Ok(())
    }

    fn release(&mut self, id: u64) -> Result<(), ScopeError> {
        let depth = self.stack.iter().position(|(g, _)| *g == id).expect("guard belongs to this session");
        if depth + 1 != self.stack.len() {
            let err = ScopeError::OutOfOrder { released: depth, top: self.stack.len() - 1 };
            self.poisoned = Some(err.to_string());
            return Err(err);
        }
        self.stack.pop();
        self.recompute();
        Ok(())
    }
}

thread_local! {
    static ACTIVE: RefCell<Option<Rc<RefCell<State>>>> = const { RefCell::new(None) };
}

/// Run `f` against the session active on this thread, if any.
#[inline]
pub(crate) fn with_active<R>(f: impl FnOnce(&mut State) -> R) -> Option<R> {
    ACTIVE.with(|a| {
        let a = a.borrow();
        a.as_ref().map(|s| f(&mut s.borrow_mut()))
    })
}

/// A profiling session. Sessions are confined to one thread (`Session` is
/// neither `Send` nor `Sync`); independent sessions may run on other threads.
#[derive(Clone)]
pub struct Session {
    state: Rc<RefCell<State>>,
}

impl Default for Session {
    fn default() -> Self {
        Session::new()
    }
}

impl Session {
    pub fn new() -> Self {
        Session::with_capacity(DEFAULT_CAPACITY)
    }

    /// Session whose mem-mode value table holds at most `capacity` live values.
    pub fn with_capacity(capacity: usize) -> Self {
        Session { state: Rc::new(RefCell::new(State::new(capacity))) }
    }

    /// Make this the session that instrumented operations on this thread
    /// report to, until the returned guard is dropped.
    pub fn activate(&self) -> Activation {
        let prev = ACTIVE.with(|a| a.borrow_mut().replace(self.state.clone()));
        Activation { prev, _thread: PhantomData }
    }

    pub fn is_active(&self) -> bool {
        ACTIVE.with(|a| a.borrow().as_ref().is_some_and(|s| Rc::ptr_eq(s, &self.state)))
    }

    pub fn declare_region(&self, name: &str) {
        let mut st = self.state.borrow_mut();
        if !st.declared.iter().any(|d| d == name) {
            st.declared.push(name.to_string());
        }
    }

    pub fn declare_regions(&self, names: &[&str]) {
        for n in names {
            self.declare_region(n);
        }
    }

    /// Push `ctx` on the scope stack. Excluded region names must have been
    /// declared.
    pub fn enter(&self, ctx: TruncContext) -> Result<ScopeGuard, ScopeError> {
        let mut st = self.state.borrow_mut();
        if let Some(p) = &st.poisoned {
            return Err(ScopeError::Poisoned(p.clone()));
        }
        st.check_regions(&ctx)?;
        let id = st.next_guard;
        st.next_guard += 1;
        st.stack.push((id, ctx));
        st.recompute();
        Ok(ScopeGuard { state: self.state.clone(), id, released: false, _thread: PhantomData })
    }

    /// Exclude a declared region in the innermost scope.
    pub fn exclude_region(&self, tag: RegionTag) -> Result<(), ScopeError> {
        let mut st = self.state.borrow_mut();
        if !st.declared.iter().any(|d| d == tag.name) {
            return Err(ScopeError::UnknownRegion(tag.name.to_string(), st.declared.join(", ")));
        }
        let (_, ctx) = st.stack.last_mut().ok_or(ScopeError::NoScope)?;
        ctx.exclude_region(tag.name);
        st.recompute();
        Ok(())
    }

    /// Set the level cutoff of the innermost scope.
    pub fn set_level_cutoff(&self, max_level: u32, l: u32) -> Result<(), ScopeError> {
        let mut st = self.state.borrow_mut();
        let (_, ctx) = st.stack.last_mut().ok_or(ScopeError::NoScope)?;
        ctx.set_level_cutoff(max_level, l);
        st.recompute();
        Ok(())
    }

    pub fn depth(&self) -> usize {
        self.state.borrow().stack.len()
    }

    pub fn poisoned(&self) -> Option<String> {
        self.state.borrow().poisoned.clone()
    }

    pub fn region(&self) -> RegionTag {
        self.state.borrow().region
    }

    pub fn counters(&self) -> Counters {
        self.state.borrow().counters.clone()
    }

    /// Snapshot of per-location op statistics; accumulation continues.
    pub fn drain_stats(&self) -> Vec<StatEntry> {
        self.state.borrow().stats.snapshot()
    }

    /// Flagged locations, by count descending then location.
    pub fn dump_flags(&self) -> Vec<FlagEntry> {
        self.state.borrow().flags.snapshot()
    }

    pub fn live_values(&self) -> usize {
        self.state.borrow().values.live()
    }

    /// Total instrumented operations issued so far.
    pub fn op_index(&self) -> u64 {
        self.state.borrow().op_index
    }
}

/// Keeps a session active on the current thread.
#[must_use = "the session is deactivated when the guard is dropped"]
pub struct Activation {
    prev: Option<Rc<RefCell<State>>>,
    _thread: PhantomData<*const ()>,
}

impl Drop for Activation {
    fn drop(&mut self) {
        let prev = self.prev.take();
        ACTIVE.with(|a| *a.borrow_mut() = prev);
    }
}

/// Releases its scope on `exit` or drop. Scopes must be released in LIFO
/// order; dropping a guard out of order poisons the session and panics.
#[must_use = "the scope ends when the guard is dropped"]
pub struct ScopeGuard {
    state: Rc<RefCell<State>>,
    id: u64,
    released: bool,
    _thread: PhantomData<*const ()>,
}

impl ScopeGuard {
    pub fn exit(mut self) -> Result<(), ScopeError> {
        self.released = true;
        self.state.borrow_mut().release(self.id)
    }
}

impl Drop for ScopeGuard {
    fn drop(&mut self) {
        if self.released {
            return;
        }
        let r = self.state.borrow_mut().release(self.id);
        if let Err(e) = r {
            if !std::thread::panicking() {
                panic!("{e}");
            }
        }
    }
}

/// Free functions called from instrumented code. All are no-ops when no
/// session is active, so the same code runs uninstrumented.
pub mod probe {
    use super::with_active;
    use crate::scope::RegionTag;

    /// Tag the operations that follow; returns the previous tag.
    #[inline]
    pub fn region(tag: RegionTag) -> RegionTag {
        with_active(|st| {
            let prev = st.region;
            if prev != tag {
                st.region = tag;
                st.recompute();
            }
            prev
        })
        .unwrap_or(RegionTag::UNTAGGED)
    }

    /// Attribute `n` bytes of memory traffic to the current region.
    #[inline]
    pub fn bytes(n: u64) {
        with_active(|st| match st.governor {
            super::Governor::Native => st.counters.full_bytes += n,
            _ => st.counters.truncated_bytes += n,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scope::TruncSpec;

    fn fmt(e: u32, m: u32) -> FloatFormat {
        FloatFormat::new(e, m).unwrap()
    }

    fn governor() -> Governor {
        with_active(|st| st.governor).unwrap()
    }

    #[test]
    fn innermost_scope_wins() {
        let s = Session::new();
        let _a = s.activate();
        assert_eq!(governor(), Governor::Native);
        let outer = s.enter(TruncContext::op(TruncSpec::single(64, fmt(5, 10)))).unwrap();
        assert_eq!(governor(), Governor::Op(Rounding::new(fmt(5, 10))));
        let inner = s.enter(TruncContext::op(TruncSpec::identity())).unwrap();
        assert_eq!(governor(), Governor::Op(Rounding::new(FloatFormat::BINARY64)));
        inner.exit().unwrap();
        assert_eq!(governor(), Governor::Op(Rounding::new(fmt(5, 10))));
        outer.exit().unwrap();
        assert_eq!(governor(), Governor::Native);
    }

    #[test]
    fn out_of_order_exit_is_an_error() {
        let s = Session::new();
        let outer = s.enter(TruncContext::op(TruncSpec::identity())).unwrap();
        let inner = s.enter(TruncContext::op(TruncSpec::identity())).unwrap();
        assert_eq!(outer.exit(), Err(ScopeError::OutOfOrder { released: 0, top: 1 }));
        assert!(s.poisoned().is_some());
        assert!(matches!(s.enter(TruncContext::op(TruncSpec::identity())), Err(ScopeError::Poisoned(_))));
        inner.exit().unwrap();
    }

    #[test]
    #[should_panic(expected = "out of order")]
    fn out_of_order_drop_panics() {
        let s = Session::new();
        let outer = s.enter(TruncContext::op(TruncSpec::identity())).unwrap();
        let _inner = s.enter(TruncContext::op(TruncSpec::identity())).unwrap();
        drop(outer);
    }

    #[test]
    fn excluded_regions_must_be_declared() {
        let s = Session::new();
        let ctx = TruncContext::mem(TruncSpec::identity()).excluding("recon");
        assert!(matches!(s.enter(ctx.clone()), Err(ScopeError::UnknownRegion(..))));
        s.declare_regions(&["recon", "update"]);
        let g = s.enter(ctx).unwrap();
        assert!(matches!(s.exclude_region(RegionTag::new("flux")), Err(ScopeError::UnknownRegion(..))));
        s.exclude_region(RegionTag::new("update")).unwrap();
        g.exit().unwrap();
    }

    #[test]
    fn region_and_cutoff_drive_the_governor() {
        let s = Session::new();
        let _a = s.activate();
        s.declare_regions(&["flux"]);
        let g = s.enter(TruncContext::op(TruncSpec::single(64, fmt(8, 7))).with_level_cutoff(4, 1)).unwrap();
        probe::region(RegionTag::new("flux").at_level(4));
        assert_eq!(governor(), Governor::Native);
        probe::bytes(16);
        probe::region(RegionTag::new("flux").at_level(3));
        assert!(matches!(governor(), Governor::Op(_)));
        probe::bytes(8);
        let c = s.counters();
        assert_eq!((c.full_bytes, c.truncated_bytes), (16, 8));
        g.exit().unwrap();
    }

    #[test]
    fn activation_nests_and_restores() {
        let a = Session::new();
        let b = Session::new();
        let ga = a.activate();
        {
            let _gb = b.activate();
            assert!(b.is_active() && !a.is_active());
        }
        assert!(a.is_active());
        drop(ga);
        assert!(!a.is_active());
        assert!(with_active(|_| ()).is_none());
    }
}
