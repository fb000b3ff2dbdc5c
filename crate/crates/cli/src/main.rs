mod plan;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use raptor_lite::codesign::{CodesignModel, DEFAULT_BANDWIDTH};
use raptor_lite::memmode::{self, FlagEntry};
use raptor_lite::profiler::{self, ProfilerError, ReportFormat};
use raptor_lite::softfloat::{oracle, ArithOp};
use raptor_lite::workloads::RunConfig;
use raptor_lite::{Mode, SweepRecord};

use plan::{Params, PlanError, SpecSource, SweepPlan};

const TRUNCATE_ENV: &str = "RAPTOR_LITE_TRUNCATE";

#[derive(Parser)]
#[command(name = "raptor-lite", version, about = "Precision truncation sweeps and co-design estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled workload over mantissa widths and level cutoffs.
    Sweep(SweepArgs),
    /// Append co-design speedup estimates to a sweep report.
    Codesign(CodesignArgs),
    /// List flagged code locations from a mem-mode JSON report.
    Flags(FlagsArgs),
    /// Check the soft-float engine against an exact oracle on small formats.
    Selftest(SelftestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Op,
    Mem,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Op => Mode::Op,
            ModeArg::Mem => Mode::Mem,
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    /// sod, stencil or eos.
    #[arg(long, default_value = "sod")]
    workload: String,
    #[arg(long, value_enum, default_value = "op")]
    mode: ModeArg,
    /// Spec with `E` and `M` fields filled per sweep point.
    #[arg(long, default_value = "64_to_E_M")]
    spec_template: String,
    /// Fixed spec; replaces the template sweep. RAPTOR_LITE_TRUNCATE, when
    /// set, overrides this flag.
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, value_delimiter = ',', default_value = "4,8,12,18,23,34,52")]
    mantissas: Vec<u32>,
    #[arg(long, default_value_t = 11)]
    exp_bits: u32,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    cutoffs: Vec<u32>,
    /// Mem-mode deviation threshold.
    #[arg(long, default_value_t = raptor_lite::scope::DEFAULT_THRESHOLD)]
    threshold: f64,
    /// Region to keep at full precision; repeatable.
    #[arg(long)]
    exclude: Vec<String>,
    /// Report path; `.json` selects JSON, anything else CSV. Without it the
    /// CSV goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `key = value` workload parameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    cells: Option<usize>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    levels: Option<u32>,
    /// Sod: adapt the step to the CFL condition instead of a fixed dt.
    #[arg(long)]
    adaptive_dt: bool,
    /// Stencil initial condition seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock seconds per run (makes output non-reproducible).
    #[arg(long)]
    wall_time: bool,
}

#[derive(Args)]
struct CodesignArgs {
    #[arg(long)]
    report: PathBuf,
    /// Memory bandwidth in GB/s.
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH / 1e9)]
    bandwidth: f64,
    /// Double to low-precision unit throughput ratio, `a:b`.
    #[arg(long, default_value = "1:2", value_parser = parse_ratio)]
    compute_ratio: (f64, f64),
    /// Where to write the annotated report; defaults to rewriting `--report`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FlagsArgs {
    #[arg(long)]
    report: PathBuf,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(2..=5))]
    max_exp: u32,
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=6))]
    max_man: u32,
}

fn parse_ratio(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("`{s}` is not of the form a:b"))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number"));
    let (a, b) = (num(a)?, num(b)?);
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(format!("ratio terms must be positive, got {s}"));
    }
    Ok((a, b))
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<PlanError> for Failure {
    fn from(e: PlanError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<ProfilerError> for Failure {
    fn from(e: ProfilerError) -> Self {
        Failure::Run(e.to_string())
    }
}

fn build_plan(a: &SweepArgs) -> Result<SweepPlan, PlanError> {
    let env_spec = std::env::var(TRUNCATE_ENV).ok().filter(|s| !s.is_empty());
    let source = match (env_spec.as_deref(), a.spec.as_deref()) {
        (Some(s), _) => SpecSource::Fixed(s),
        (None, Some(s)) => SpecSource::Fixed(s),
        (None, None) => SpecSource::Template { template: &a.spec_template, exp_bits: a.exp_bits, mantissas: &a.mantissas },
    };
    let specs = SweepPlan::specs(source).map_err(|e| match env_spec {
        Some(_) if e.flag == "--spec" => PlanError { flag: TRUNCATE_ENV.into(), msg: e.msg },
        _ => e,
    })?;
    if a.cutoffs.is_empty() {
        return Err(PlanError { flag: "--cutoffs".into(), msg: "empty cutoff list".into() });
    }
    let file = match &a.config {
        Some(p) => Params::from_file(p)?,
        None => Params::default(),
    };
    let flags = Params {
        cells: a.cells,
        t_end: a.t_end,
        cfl: a.cfl,
        fixed_dt: a.adaptive_dt.then_some(false),
        levels: a.levels,
        seed: a.seed,
        ..Params::default()
    };
    let workload = file.overlay(flags).workload(&a.workload)?;
    SweepPlan::check_exclusions(&workload, &a.exclude)?;
    if !(a.threshold >= 0.0) {
        return Err(PlanError { flag: "--threshold".into(), msg: format!("{} is not a non-negative number", a.threshold) });
    }
    Ok(SweepPlan {
        workload,
        mode: a.mode.into(),
        specs,
        cutoffs: a.cutoffs.clone(),
        threshold: a.threshold,
        exclude: a.exclude.clone(),
        out: a.out.clone(),
        wall_time: a.wall_time,
    })
}

fn write_report(records: &[SweepRecord], out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => Ok(profiler::export_report(records, ReportFormat::for_path(path), path)?),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(profiler::to_csv(records).as_bytes()).map_err(|e| Failure::Run(e.to_string()))
        }
    }
}

fn cmd_sweep(a: &SweepArgs) -> Result<(), Failure> {
    let plan = build_plan(a)?;
    let w = &plan.workload;
    let reference = w.native().map_err(|e| Failure::Run(e.to_string()))?;
    let points: Vec<_> = plan.points().collect();
    let results: Vec<Result<SweepRecord, String>> = points
        .par_iter()
        .map(|&(spec, l)| {
            let mut cfg = RunConfig::new(spec.clone(), plan.mode).with_cutoff(l).with_threshold(plan.threshold);
            cfg.exclude = plan.exclude.clone();
            let start = Instant::now();
            let mut rec = w.record_against(&cfg, &reference).map_err(|e| format!("{spec} l={l}: {e}"))?;
            if plan.wall_time {
                rec.wall_seconds = Some(start.elapsed().as_secs_f64());
            }
            Ok(rec)
        })
        .collect();
    let mut records = Vec::with_capacity(results.len());
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(e) => errors.push(e),
        }
    }
    write_report(&records, plan.out.as_deref())?;
    if errors.is_empty() {
        eprintln!("{} of {} runs completed", records.len(), plan.len());
        Ok(())
    } else {
        Err(Failure::Run(format!("{} of {} runs failed:\n  {}", errors.len(), plan.len(), errors.join("\n  "))))
    }
}

fn cmd_codesign(a: &CodesignArgs) -> Result<(), Failure> {
    let records = profiler::import_report(&a.report).map_err(|e| match e {
        ProfilerError::Parse { msg, .. } => Failure::Run(format!("schema error in {}: {msg}", a.report.display())),
        e => Failure::Run(e.to_string()),
    })?;
    let model = CodesignModel::new(a.bandwidth * 1e9, a.compute_ratio).map_err(|e| Failure::Usage(e.to_string()))?;
    let annotated = model.annotate(&records).map_err(|e| Failure::Run(e.to_string()))?;
    let out = a.out.as_deref().unwrap_or(&a.report);
    profiler::export_report(&annotated, ReportFormat::for_path(out), out)?;
    println!("{:<10} {:<24} {:>3} {:>12} {:>12}  bound", "workload", "spec", "l", "s_compute", "s_memory");
    for r in &annotated {
        let e = r.estimate.as_ref().expect("annotated");
        println!(
            "{:<10} {:<24} {:>3} {:>12.6} {:>12.6}  {}",
            r.workload, r.spec, r.cutoff_l, e.speedup_compute, e.speedup_memory, e.bound_class
        );
    }
    Ok(())
}

fn sorted_flags(mut flags: Vec<FlagEntry>) -> Vec<FlagEntry> {
    flags.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.location.cmp(&b.location)));
    flags
}

fn cmd_flags(a: &FlagsArgs) -> Result<(), Failure> {
    if ReportFormat::for_path(&a.report) != ReportFormat::Json {
        return Err(Failure::Usage(format!("--report: {} is not a JSON report; flag listings are only kept in JSON", a.report.display())));
    }
    let records = profiler::import_report(&a.report)?;
    if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.mode != Mode::Mem) {
        return Err(Failure::Run(format!("mode mismatch: record {i} ({} {}) is a {}-mode run; flags need mem-mode", r.workload, r.spec, r.mode)));
    }
    let mut out = String::new();
    for r in &records {
        if records.len() > 1 {
            out += &format!("== {} {} l={}\n", r.workload, r.spec, r.cutoff_l);
        }
        out += &memmode::format_heatmap(&sorted_flags(r.flags.clone()));
    }
    if records.is_empty() {
        out += &memmode::format_heatmap(&[]);
    }
    print!("{out}");
    Ok(())
}

fn cmd_selftest(a: &SelftestArgs) -> Result<(), Failure> {
    let start = Instant::now();
    let s = oracle::exhaustive_check(a.max_exp, a.max_man, &[ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]);
    println!(
        "{} formats, {} cases, {} mismatches in {:.1}s",
        s.formats,
        s.cases,
        s.mismatches,
        start.elapsed().as_secs_f64()
    );
    match s.first_mismatch {
        Some(m) => Err(Failure::Run(format!("first mismatch: {m}"))),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Sweep(a) => cmd_sweep(a),
        Command::Codesign(a) => cmd_codesign(a),
        Command::Flags(a) => cmd_flags(a),
        Command::Selftest(a) => cmd_selftest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
