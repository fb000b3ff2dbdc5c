//! Sweep plans: the cartesian product of truncation specs and level cutoffs,
//! plus the workload parameters they run against.

use std::fmt;
use std::path::{Path, PathBuf};

use raptor_lite::workloads::{Bundled, EosConfig, SodConfig, StencilConfig, Workload, WorkloadError};
use raptor_lite::{Mode, TruncSpec};
use serde::Deserialize;

/// A rejected plan, naming the flag or config key at fault.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanError {
    pub flag: String,
    pub msg: String,
}

impl PlanError {
    fn new(flag: &str, msg: impl fmt::Display) -> Self {
        PlanError { flag: flag.to_string(), msg: msg.to_string() }
    }
}

impl fmt::Display for PlanError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.flag, self.msg)
    }
}

impl std::error::Error for PlanError {}

/// Expand a template such as `64_to_E_M;32_to_8_M`: every exponent field
/// spelled `E` becomes `exp_bits`, every mantissa field spelled `M` becomes
/// `mantissa`. Numeric fields are kept.
pub fn expand_template(template: &str, exp_bits: u32, mantissa: u32) -> String {
    template
        .split(';')
        .map(|entry| {
            let Some((src, rest)) = entry.split_once("_to_") else { return entry.to_string() };
            let Some((e, m)) = rest.split_once('_') else { return entry.to_string() };
            let e = if e == "E" { exp_bits.to_string() } else { e.to_string() };
            let m = if m == "M" { mantissa.to_string() } else { m.to_string() };
            format!("{src}_to_{e}_{m}")
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Workload parameters from a config file or flags. Keys that do not
/// apply to the selected workload are rejected.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub cells: Option<usize>,
    pub t_end: Option<f64>,
    pub cfl: Option<f64>,
    pub fixed_dt: Option<bool>,
    pub levels: Option<u32>,
    pub steps: Option<usize>,
    pub r: Option<f64>,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub max_iter: Option<u32>,
    pub targets: Option<usize>,
}

impl Params {
    pub fn from_file(path: &Path) -> Result<Self, PlanError> {
        let text = std::fs::read_to_string(path).map_err(|e| PlanError::new("--config", format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, PlanError> {
        toml::from_str(text).map_err(|e| PlanError::new("--config", e.message()))
    }

    /// `other`'s set fields win.
    pub fn overlay(self, other: Params) -> Params {
        Params {
            cells: other.cells.or(self.cells),
            t_end: other.t_end.or(self.t_end),
            cfl: other.cfl.or(self.cfl),
            fixed_dt: other.fixed_dt.or(self.fixed_dt),
            levels: other.levels.or(self.levels),
            steps: other.steps.or(self.steps),
            r: other.r.or(self.r),
            seed: other.seed.or(self.seed),
            tolerance: other.tolerance.or(self.tolerance),
            max_iter: other.max_iter.or(self.max_iter),
            targets: other.targets.or(self.targets),
        }
    }

    fn set_keys(&self) -> Vec<&'static str> {
        let mut keys = Vec::new();
        let mut add = |set: bool, k| {
            if set {
                keys.push(k)
            }
        };
        add(self.cells.is_some(), "cells");
        add(self.t_end.is_some(), "t_end");
        add(self.cfl.is_some(), "cfl");
        add(self.fixed_dt.is_some(), "fixed_dt");
        add(self.levels.is_some(), "levels");
        add(self.steps.is_some(), "steps");
        add(self.r.is_some(), "r");
        add(self.seed.is_some(), "seed");
        add(self.tolerance.is_some(), "tolerance");
        add(self.max_iter.is_some(), "max_iter");
        add(self.targets.is_some(), "targets");
        keys
    }

    /// Build the named workload with these parameters applied.
    pub fn workload(&self, name: &str) -> Result<Bundled, PlanError> {
        let allowed: &[&str] = match name {
            "sod" => &["cells", "t_end", "cfl", "fixed_dt", "levels", "seed"],
            "stencil" => &["cells", "steps", "r", "levels", "seed"],
            "eos" => &["tolerance", "max_iter", "targets", "seed"],
            _ => return Err(PlanError::new("--workload", WorkloadError::Unknown(name.to_string()))),
        };
        if let Some(k) = self.set_keys().into_iter().find(|k| !allowed.contains(k)) {
            return Err(PlanError::new(k, format!("not a parameter of the {name} workload (accepted: {})", allowed.join(", "))));
        }
        let invalid = |e: WorkloadError| PlanError::new("--config", e);
        match name {
            "sod" => {
                let d = SodConfig::default();
                let w = SodConfig {
                    cells: self.cells.unwrap_or(d.cells),
                    t_end: self.t_end.unwrap_or(d.t_end),
                    cfl: self.cfl.unwrap_or(d.cfl),
                    fixed_dt: self.fixed_dt.unwrap_or(d.fixed_dt),
                    levels: self.levels.unwrap_or(d.levels),
                    ..d
                };
                w.validate().map_err(invalid)?;
                Ok(Bundled::Sod(w))
            }
            "stencil" => {
                let d = StencilConfig::default();
                let w = StencilConfig {
                    cells: self.cells.unwrap_or(d.cells),
                    steps: self.steps.unwrap_or(d.steps),
                    r: self.r.unwrap_or(d.r),
                    levels: self.levels.unwrap_or(d.levels),
                    seed: self.seed.unwrap_or(d.seed),
                };
                w.validate().map_err(invalid)?;
                Ok(Bundled::Stencil(w))
            }
            _ => {
                let d = EosConfig::default();
                let w = EosConfig {
                    tolerance: self.tolerance.unwrap_or(d.tolerance),
                    max_iter: self.max_iter.unwrap_or(d.max_iter),
                    targets: self.targets.unwrap_or(d.targets),
                    ..d
                };
                w.validate().map_err(invalid)?;
                Ok(Bundled::Eos(w))
            }
        }
    }
}

/// A validated sweep: one run per `(spec, cutoff)` pair, spec-major.
#[derive(Clone, Debug)]
pub struct SweepPlan {
    pub workload: Bundled,
    pub mode: Mode,
    pub specs: Vec<TruncSpec>,
    pub cutoffs: Vec<u32>,
    pub threshold: f64,
    pub exclude: Vec<String>,
    pub out: Option<PathBuf>,
    pub wall_time: bool,
}

/// Where the specs of a plan come from.
#[derive(Clone, Debug)]
pub enum SpecSource<'a> {
    Fixed(&'a str),
    Template { template: &'a str, exp_bits: u32, mantissas: &'a [u32] },
}

impl SweepPlan {
    pub fn specs(source: SpecSource<'_>) -> Result<Vec<TruncSpec>, PlanError> {
        match source {
            SpecSource::Fixed(text) => Ok(vec![TruncSpec::parse(text).map_err(|e| PlanError::new("--spec", e))?]),
            SpecSource::Template { template, exp_bits, mantissas } => {
                if mantissas.is_empty() {
                    return Err(PlanError::new("--mantissas", "empty mantissa list"));
                }
                if !template.contains('M') {
                    return Err(PlanError::new("--spec-template", format!("`{template}` has no `M` mantissa field")));
                }
                mantissas
                    .iter()
                    .map(|&m| {
                        TruncSpec::parse(&expand_template(template, exp_bits, m))
                            .map_err(|e| PlanError::new("--mantissas", format!("mantissa {m}: {e}")))
                    })
                    .collect()
            }
        }
    }

    pub fn check_exclusions(w: &Bundled, exclude: &[String]) -> Result<(), PlanError> {
        let regions = match w {
            Bundled::Sod(w) => w.regions(),
            Bundled::Stencil(w) => w.regions(),
            Bundled::Eos(w) => w.regions(),
        };
        match exclude.iter().find(|r| !regions.contains(&r.as_str())) {
            Some(r) => Err(PlanError::new("--exclude", format!("`{r}` is not a region of {} (regions: {})", w.name(), regions.join(", ")))),
            None => Ok(()),
        }
    }

    pub fn points(&self) -> impl Iterator<Item = (&TruncSpec, u32)> + '_ {
        self.specs.iter().flat_map(move |s| self.cutoffs.iter().map(move |&l| (s, l)))
    }

    pub fn len(&self) -> usize {
        self.specs.len() * self.cutoffs.len()
    }
}
