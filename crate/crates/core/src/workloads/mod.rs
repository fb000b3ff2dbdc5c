//! Instrumented kernels and the driver that runs them under a truncation
//! context.

pub mod eos;
pub mod riemann;
pub mod sod;
pub mod stencil;

use thiserror::Error;

use crate::memmode::{FlagEntry, DEFAULT_CAPACITY};
use crate::opmode::{StatEntry, TNum};
use crate::profiler::{self, Counters, ProfilerError, SweepRecord};
use crate::scalar::Scalar;
use crate::scope::{Mode, TruncContext, TruncSpec, DEFAULT_THRESHOLD};
use crate::session::{ScopeError, Session};

pub use eos::{EosConfig, EosTable};
pub use sod::SodConfig;
pub use stencil::StencilConfig;

#[derive(Debug, Error)]
pub enum WorkloadError {
    #[error(transparent)]
    Scope(#[from] ScopeError),
    #[error(transparent)]
    Profiler(#[from] ProfilerError),
    #[error("{workload}: non-finite state at full precision")]
    Solver { workload: &'static str },
    #[error("unknown workload `{0}` (expected sod, stencil or eos)")]
    Unknown(String),
    #[error("invalid {workload} parameter: {msg}")]
    Config { workload: &'static str, msg: String },
}

/// Field produced by a run. `diverged` marks a run that hit a non-finite
/// state or failed to converge.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub field: Vec<f64>,
    pub diverged: bool,
}

pub trait Workload: Sync {
    fn name(&self) -> &'static str;
    /// Region names the kernel tags its operations with.
    fn regions(&self) -> &'static [&'static str];
    /// Finest refinement level used in region tags.
    fn max_level(&self) -> u32;
    fn run<S: Scalar>(&self) -> Output;
}

/// How one instrumented run is set up.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub spec: TruncSpec,
    pub mode: Mode,
    pub cutoff_l: u32,
    pub threshold: f64,
    pub exclude: Vec<String>,
    pub capacity: usize,
}

impl RunConfig {
    pub fn new(spec: TruncSpec, mode: Mode) -> Self {
        RunConfig { spec, mode, cutoff_l: 0, threshold: DEFAULT_THRESHOLD, exclude: Vec::new(), capacity: DEFAULT_CAPACITY }
    }

    pub fn with_cutoff(mut self, l: u32) -> Self {
        self.cutoff_l = l;
        self
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = t;
        self
    }

    pub fn excluding(mut self, region: &str) -> Self {
        self.exclude.push(region.to_string());
        self
    }
}

#[derive(Clone, Debug)]
pub struct Instrumented {
    pub output: Output,
    pub counters: Counters,
    pub stats: Vec<StatEntry>,
    pub flags: Vec<FlagEntry>,
}

/// Uninstrumented binary64 run. A non-finite result is a solver bug.
pub fn native<W: Workload>(w: &W) -> Result<Output, WorkloadError> {
    let out = w.run::<f64>();
    if out.diverged || out.field.iter().any(|x| !x.is_finite()) {
        return Err(WorkloadError::Solver { workload: w.name() });
    }
    Ok(out)
}

/// Run `w` on `TNum` inside a fresh session on this thread.
pub fn run_instrumented<W: Workload>(w: &W, cfg: &RunConfig) -> Result<Instrumented, WorkloadError> {
    let session = Session::with_capacity(cfg.capacity);
    let _active = session.activate();
    session.declare_regions(w.regions());
    let mut ctx = TruncContext::new(cfg.spec.clone(), cfg.mode)
        .with_level_cutoff(w.max_level(), cfg.cutoff_l)
        .with_threshold(cfg.threshold);
    for r in &cfg.exclude {
        ctx.exclude_region(r);
    }
    let guard = session.enter(ctx)?;
    let mut output = w.run::<TNum>();
    guard.exit()?;
    if output.field.iter().any(|x| !x.is_finite()) {
        output.diverged = true;
    }
    Ok(Instrumented { output, counters: session.counters(), stats: session.drain_stats(), flags: session.dump_flags() })
}

/// One sweep row, with the error measured against `reference`.
pub fn record_against<W: Workload>(w: &W, cfg: &RunConfig, reference: &Output) -> Result<SweepRecord, WorkloadError> {
    let run = run_instrumented(w, cfg)?;
    let l1 = if run.output.diverged { f64::INFINITY } else { profiler::l1_error(&run.output.field, &reference.field)? };
    let rec = SweepRecord::new(w.name(), cfg.mode, &cfg.spec, cfg.cutoff_l, l1, &run.counters);
    Ok(if cfg.mode == Mode::Mem { rec.with_flags(run.flags) } else { rec })
}

pub fn sweep_point<W: Workload>(w: &W, cfg: &RunConfig) -> Result<SweepRecord, WorkloadError> {
    record_against(w, cfg, &native(w)?)
}

/// The bundled kernels, selectable by name.
#[derive(Clone, Debug, PartialEq)]
pub enum Bundled {
    Sod(SodConfig),
    Stencil(StencilConfig),
    Eos(EosConfig),
}

impl Bundled {
    pub const NAMES: [&'static str; 3] = ["sod", "stencil", "eos"];

    pub fn by_name(name: &str) -> Result<Self, WorkloadError> {
        match name {
            "sod" => Ok(Bundled::Sod(SodConfig::default())),
            "stencil" => Ok(Bundled::Stencil(StencilConfig::default())),
            "eos" => Ok(Bundled::Eos(EosConfig::default())),
            _ => Err(WorkloadError::Unknown(name.to_string())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Bundled::Sod(w) => w.name(),
            Bundled::Stencil(w) => w.name(),
            Bundled::Eos(w) => w.name(),
        }
    }

    pub fn native(&self) -> Result<Output, WorkloadError> {
        match self {
            Bundled::Sod(w) => native(w),
            Bundled::Stencil(w) => native(w),
            Bundled::Eos(w) => native(w),
        }
    }

    pub fn record_against(&self, cfg: &RunConfig, reference: &Output) -> Result<SweepRecord, WorkloadError> {
        match self {
            Bundled::Sod(w) => record_against(w, cfg, reference),
            Bundled::Stencil(w) => record_against(w, cfg, reference),
            Bundled::Eos(w) => record_against(w, cfg, reference),
        }
    }

    pub fn run_instrumented(&self, cfg: &RunConfig) -> Result<Instrumented, WorkloadError> {
        match self {
            Bundled::Sod(w) => run_instrumented(w, cfg),
            Bundled::Stencil(w) => run_instrumented(w, cfg),
            Bundled::Eos(w) => run_instrumented(w, cfg),
        }
    }
}
