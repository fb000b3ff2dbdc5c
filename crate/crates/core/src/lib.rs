//! Emulated-precision profiling of numerical kernels.
//!
//! Kernels written against [`Scalar`] run natively with `f64` or
//! instrumented with [`TNum`]. Instrumented runs are governed by a
//! [`Session`]'s scope stack: op-mode rounds each operation into a target
//! format, mem-mode keeps boxed values with a binary64 shadow and flags
//! drifting call sites. Counters feed the co-design estimator.

pub mod codesign;
pub mod memmode;
pub mod opmode;
pub mod profiler;
pub mod scalar;
pub mod scope;
pub mod session;
pub mod softfloat;
pub mod workloads;

pub use codesign::{BoundClass, CodesignModel, Estimate, FpuPoint};
pub use memmode::{FlagEntry, Handle, MemError, ValueRecord};
pub use opmode::{OpKind, OpStats, StatEntry, TNum};
pub use profiler::{l1_error, Counters, ProfilerError, SweepRecord};
pub use scalar::Scalar;
pub use scope::{LevelCutoff, Mode, RegionTag, SpecError, TruncContext, TruncSpec};
pub use session::{probe, ScopeError, ScopeGuard, Session};
pub use softfloat::{BigFloat, FloatFormat, Rounding, RoundingReport};
