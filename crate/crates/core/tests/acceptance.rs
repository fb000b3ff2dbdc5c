//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use raptor_lite::codesign::{self, BoundClass, CodesignModel};
use raptor_lite::memmode;
use raptor_lite::softfloat::{oracle, ArithOp};
use raptor_lite::workloads::{self, eos, Bundled, EosConfig, RunConfig, SodConfig, StencilConfig};
use raptor_lite::{FloatFormat, Mode, Session, SweepRecord, TNum, TruncContext, TruncSpec};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn softfloat_oracle() -> Outcome {
    let start = Instant::now();
    let s = oracle::exhaustive_check(4, 4, &[ArithOp::Add, ArithOp::Sub, ArithOp::Mul, ArithOp::Div]);
    let elapsed = start.elapsed();
    let detail = format!(
        "{} formats, {} cases, {} mismatches in {:.1}s{}",
        s.formats,
        s.cases,
        s.mismatches,
        elapsed.as_secs_f64(),
        s.first_mismatch.map(|m| format!(" (first: {m})")).unwrap_or_default()
    );
    check(s.mismatches == 0 && s.formats == 12 && elapsed < Duration::from_secs(60), detail)
}

fn identity_transparency() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in Bundled::NAMES {
        let w = Bundled::by_name(name).map_err(|e| e.to_string())?;
        let reference = w.native().map_err(|e| e.to_string())?;
        for mode in [Mode::Op, Mode::Mem] {
            let cfg = RunConfig::new(TruncSpec::identity(), mode);
            let run = w.run_instrumented(&cfg).map_err(|e| e.to_string())?;
            let same = run.output.field.len() == reference.field.len()
                && run.output.field.iter().zip(&reference.field).all(|(a, b)| a.to_bits() == b.to_bits());
            let l1 = w.record_against(&cfg, &reference).map_err(|e| e.to_string())?.l1_error;
            ok &= same && l1 == 0.0 && !run.output.diverged;
            notes.push(format!("{name}/{mode}:{}", if same && l1 == 0.0 { "identical" } else { "DIFFERS" }));
        }
    }
    check(ok, notes.join(" "))
}

fn fpu_table() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    for p in codesign::fpu_table() {
        let d = p.recomputed_density();
        let rel = (d / p.density - 1.0).abs();
        ok &= rel <= 0.01;
        notes.push(format!("{} {:.3} vs {:.2}", p.name, d, p.density));
    }
    check(ok, notes.join(", "))
}

fn sod_sweep() -> Result<Vec<SweepRecord>, String> {
    let w = SodConfig::default();
    let reference = workloads::native(&w).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for m in [4u32, 8, 12, 18, 23, 34, 52] {
        for l in 0..3 {
            let spec = TruncSpec::from_template("64_to_11_M", m).map_err(|e| e.to_string())?;
            let cfg = RunConfig::new(spec, Mode::Op).with_cutoff(l);
            out.push(workloads::record_against(&w, &cfg, &reference).map_err(|e| e.to_string())?);
        }
    }
    Ok(out)
}

fn codesign_sanity(sweep: &[SweepRecord]) -> Outcome {
    let model = CodesignModel::default();
    let w = SodConfig::default();
    let reference = workloads::native(&w).map_err(|e| e.to_string())?;
    let untruncated = workloads::record_against(&w, &RunConfig::new(TruncSpec::identity(), Mode::Op), &reference)
        .map_err(|e| e.to_string())?;
    let all_full = workloads::record_against(&w, &RunConfig::new(TruncSpec::single(64, FloatFormat::BINARY16), Mode::Op).with_cutoff(4), &reference)
        .map_err(|e| e.to_string())?;
    let s_id = model.estimate_record(&untruncated)?.speedup;
    let s_full = model.estimate_record(&all_full)?.speedup;
    let mut compute_bound = 0;
    let mut min_intensity = f64::INFINITY;
    for r in sweep {
        let e = model.estimate_record(r)?;
        min_intensity = min_intensity.min(e.intensity);
        if e.bound == BoundClass::ComputeBound {
            compute_bound += 1;
        }
    }
    let balance = model.machine(FloatFormat::BINARY64).balance();
    check(
        s_id == 1.0 && s_full == 1.0 && compute_bound == sweep.len() && !sweep.is_empty(),
        format!(
            "identity speedup {s_id}, no-truncation speedup {s_full}, {compute_bound}/{} sweep rows compute-bound (intensity >= {min_intensity:.2} flop/B, balance {balance:.2})",
            sweep.len()
        ),
    )
}

fn sod_curve(sweep: &[SweepRecord], elapsed: Duration) -> Outcome {
    let err = |m: u32, l: u32| {
        sweep.iter().find(|r| r.mantissa_bits == m && r.cutoff_l == l).map(|r| r.l1_error).unwrap_or(f64::NAN)
    };
    let a = [0, 1, 2].iter().all(|&l| err(52, l) <= 1e-12);
    let bad: Vec<u32> = [4, 8, 12, 18, 23, 34, 52].into_iter().filter(|&m| !(err(m, 1) <= err(m, 0))).collect();
    let ratio = err(4, 0) / err(23, 0);
    let fast = elapsed < Duration::from_secs(600);
    check(
        a && bad.is_empty() && ratio >= 100.0 && fast,
        format!(
            "error(52) {:.1e}, l1>l0 at {:?}, error(4)/error(23) = {:.2e}, sweep {:.1}s",
            err(52, 0),
            bad,
            ratio,
            elapsed.as_secs_f64()
        ),
    )
}

/// Sum ten thousand ones in binary16 under mem-mode; returns the flag count.
fn accumulate_binary16(threshold: f64) -> Result<(usize, String), String> {
    let s = Session::new();
    let _a = s.activate();
    let g = s
        .enter(TruncContext::mem(TruncSpec::single(64, FloatFormat::BINARY16)).with_threshold(threshold))
        .map_err(|e| e.to_string())?;
    let one = memmode::pre_convert(1.0).map_err(|e| e.to_string())?.to_tnum();
    let mut acc = TNum::new(0.0);
    for _ in 0..10_000 {
        acc = acc + one;
    }
    let rec = memmode::record(acc.handle().ok_or("accumulator is not boxed")?).map_err(|e| e.to_string())?;
    g.exit().map_err(|e| e.to_string())?;
    let flags = s.dump_flags();
    let locs = flags.iter().map(|f| f.location.clone()).collect::<Vec<_>>().join(",");
    Ok((flags.len(), format!("payload {} shadow {} [{locs}]", rec.payload.to_f64(), rec.shadow)))
}

fn mem_flagging() -> Outcome {
    let (at_1e3, detail) = accumulate_binary16(1e-3)?;
    let (at_inf, _) = accumulate_binary16(f64::INFINITY)?;
    let thresholds = [1e-9, 1e-6, 1e-3, 1e-1, f64::INFINITY];
    let counts: Vec<usize> = thresholds.iter().map(|&t| accumulate_binary16(t).map(|x| x.0)).collect::<Result<_, _>>()?;
    let monotone = counts.windows(2).all(|w| w[0] >= w[1]);
    check(
        at_1e3 == 1 && at_inf == 0 && monotone,
        format!("{at_1e3} flag at 1e-3 ({detail}), {at_inf} at inf, sweep {counts:?}"),
    )
}

fn eos_phenomenon() -> Outcome {
    let w = EosConfig::default();
    let mantissas = [4u32, 8, 12, 16, 20, 24, 28, 32, 36, 40, 44, 48, 52];
    let mut results = Vec::new();
    for &m in &mantissas {
        let spec = TruncSpec::from_template("64_to_11_M", m).map_err(|e| e.to_string())?;
        let run = workloads::run_instrumented(&w, &RunConfig::new(spec, Mode::Op)).map_err(|e| e.to_string())?;
        results.push((m, !run.output.diverged));
    }
    let conv = |m: u32| results.iter().any(|&(k, ok)| k == m && ok);
    let m_star = eos::convergence_threshold(&results);
    check(
        conv(52) && !conv(4) && m_star.is_some_and(|m| m > 4 && m <= 52),
        format!("converges at 52: {}, at 4: {}, m* = {:?}", conv(52), conv(4), m_star),
    )
}

fn counter_conservation() -> Outcome {
    let w = StencilConfig::default();
    let analytic = w.analytic_flops();
    let mut totals = Vec::new();
    for l in 0..=w.levels + 1 {
        let cfg = RunConfig::new(TruncSpec::single(64, FloatFormat::BINARY16), Mode::Op).with_cutoff(l);
        let run = workloads::run_instrumented(&w, &cfg).map_err(|e| e.to_string())?;
        totals.push((l, run.counters.truncated_flops, run.counters.full_flops, run.counters.total_bytes()));
    }
    let ok = totals.iter().all(|&(_, t, f, b)| t + f == analytic && b == w.analytic_bytes());
    let split: Vec<String> = totals.iter().map(|(l, t, f, _)| format!("l{l}:{t}+{f}")).collect();
    check(ok, format!("analytic {analytic}; {}", split.join(" ")))
}

fn parse_grammar() -> Outcome {
    let text = "64_to_5_14;32_to_3_8";
    let spec = TruncSpec::parse(text).map_err(|e| e.to_string())?;
    let back = spec.to_string();
    check(back == text, format!("{text:?} -> {back:?}"))
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("1 soft-float oracle equivalence", softfloat_oracle()));
    results.push(("2 identity transparency", identity_transparency()));
    results.push(("3 density table", fpu_table()));
    let start = Instant::now();
    let sweep = sod_sweep();
    let sweep_time = start.elapsed();
    match sweep {
        Ok(sweep) => {
            results.push(("4 co-design sanity", codesign_sanity(&sweep)));
            results.push(("5 sod error curve", sod_curve(&sweep, sweep_time)));
        }
        Err(e) => {
            results.push(("4 co-design sanity", Err(e.clone())));
            results.push(("5 sod error curve", Err(e)));
        }
    }
    results.push(("6 mem-mode flagging", mem_flagging()));
    results.push(("7 eos convergence", eos_phenomenon()));
    results.push(("8 counter conservation", counter_conservation()));
    results.push(("9 spec grammar round trip", parse_grammar()));

    let mut failed = 0;
    for (name, r) in &results {
        match r {
            Ok(d) => println!("PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
