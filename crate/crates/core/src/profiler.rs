//! Counters, error norms and sweep reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

use crate::memmode::FlagEntry;
use crate::scope::{Mode, TruncSpec};
use crate::softfloat::FloatFormat;

/// The error norm named in every report.
pub const L1_FORMULA: &str = "l1_error = sum_i |c_i - r_i| / sum_i |r_i| against the full-precision run";

pub const SCHEMA_VERSION: u64 = 1;

pub const CSV_COLUMNS: [&str; 13] = [
    "workload",
    "mode",
    "spec",
    "cutoff_l",
    "mantissa_bits",
    "exp_bits",
    "l1_error",
    "truncated_flops",
    "full_flops",
    "truncated_bytes",
    "full_bytes",
    "flags_total",
    "wall_seconds",
];

pub const ESTIMATE_COLUMNS: [&str; 5] = ["speedup_compute", "speedup_memory", "bound_class", "fit_slope", "fit_intercept"];

#[derive(Debug, Error)]
pub enum ProfilerError {
    #[error("shape mismatch: candidate has {candidate} values, reference has {reference}")]
    Shape { candidate: usize, reference: usize },
    #[error("reference field is identically zero")]
    ZeroReference,
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("schema violation: {0}")]
    Schema(String),
}

/// Operation and traffic counts of one session.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub truncated_flops: u64,
    pub full_flops: u64,
    pub truncated_bytes: u64,
    pub full_bytes: u64,
    /// Truncated operations split by target format.
    pub truncated_by_format: Vec<(FloatFormat, u64)>,
}

impl Counters {
    pub(crate) fn add_truncated(&mut self, f: FloatFormat, n: u64) {
        self.truncated_flops += n;
        match self.truncated_by_format.iter_mut().find(|(g, _)| *g == f) {
            Some((_, c)) => *c += n,
            None => self.truncated_by_format.push((f, n)),
        }
    }

    pub fn total_flops(&self) -> u64 {
        self.truncated_flops + self.full_flops
    }

    pub fn total_bytes(&self) -> u64 {
        self.truncated_bytes + self.full_bytes
    }

    pub fn truncated_fraction(&self) -> f64 {
        if self.total_flops() == 0 {
            0.0
        } else {
            self.truncated_flops as f64 / self.total_flops() as f64
        }
    }
}

/// Normalized L1 distance `sum |c - r| / sum |r|`. Any non-finite candidate
/// value makes the error infinite.
pub fn l1_error(candidate: &[f64], reference: &[f64]) -> Result<f64, ProfilerError> {
    if candidate.len() != reference.len() {
        return Err(ProfilerError::Shape { candidate: candidate.len(), reference: reference.len() });
    }
    let denom: f64 = reference.iter().map(|r| r.abs()).sum();
    if denom == 0.0 {
        return Err(ProfilerError::ZeroReference);
    }
    let mut num = 0.0;
    for (c, r) in candidate.iter().zip(reference) {
        if !c.is_finite() {
            return Ok(f64::INFINITY);
        }
        num += (c - r).abs();
    }
    Ok(num / denom)
}

/// Co-design columns appended by the estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateColumns {
    pub speedup_compute: f64,
    pub speedup_memory: f64,
    pub bound_class: String,
    pub fit_slope: f64,
    pub fit_intercept: f64,
}

/// One (workload, spec, cutoff) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub workload: String,
    pub mode: Mode,
    pub spec: String,
    pub cutoff_l: u32,
    pub mantissa_bits: u32,
    pub exp_bits: u32,
    #[serde(with = "lenient_f64")]
    pub l1_error: f64,
    pub truncated_flops: u64,
    pub full_flops: u64,
    pub truncated_bytes: u64,
    pub full_bytes: u64,
    pub flags_total: u64,
    pub wall_seconds: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate: Option<EstimateColumns>,
    #[serde(default)]
    pub flags: Vec<FlagEntry>,
}

impl SweepRecord {
    pub fn new(workload: &str, mode: Mode, spec: &TruncSpec, cutoff_l: u32, l1_error: f64, counters: &Counters) -> Self {
        let fmt = spec.get(64).unwrap_or(FloatFormat::BINARY64);
        SweepRecord {
            workload: workload.to_string(),
            mode,
            spec: spec.to_string(),
            cutoff_l,
            mantissa_bits: fmt.man_bits(),
            exp_bits: fmt.exp_bits(),
            l1_error,
            truncated_flops: counters.truncated_flops,
            full_flops: counters.full_flops,
            truncated_bytes: counters.truncated_bytes,
            full_bytes: counters.full_bytes,
            flags_total: 0,
            wall_seconds: None,
            estimate: None,
            flags: Vec::new(),
        }
    }

    pub fn with_flags(mut self, flags: Vec<FlagEntry>) -> Self {
        self.flags_total = flags.iter().map(|f| f.count).sum();
        self.flags = flags;
        self
    }

    pub fn counters(&self) -> Counters {
        Counters {
            truncated_flops: self.truncated_flops,
            full_flops: self.full_flops,
            truncated_bytes: self.truncated_bytes,
            full_bytes: self.full_bytes,
            truncated_by_format: Vec::new(),
        }
    }
}

/// Non-finite floats as the strings `inf`, `-inf`, `nan`.
mod lenient_f64 {
    use super::*;

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.collect_str(x)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n.as_f64().ok_or_else(|| serde::de::Error::custom("bad number")),
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            v => Err(serde::de::Error::custom(format!("expected number, got {v}"))),
        }
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

/// CSV text: a comment line naming the norm, then the header and one row per
/// record. Estimate columns are present iff any record carries an estimate.
pub fn to_csv(records: &[SweepRecord]) -> String {
    let with_estimate = records.iter().any(|r| r.estimate.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = CSV_COLUMNS.to_vec();
    if with_estimate {
        header.extend(ESTIMATE_COLUMNS);
    }
    w.write_record(&header).expect("in-memory write");
    for r in records {
        let mut row = vec![
            r.workload.clone(),
            r.mode.to_string(),
            r.spec.clone(),
            r.cutoff_l.to_string(),
            r.mantissa_bits.to_string(),
            r.exp_bits.to_string(),
            fmt_f64(r.l1_error),
            r.truncated_flops.to_string(),
            r.full_flops.to_string(),
            r.truncated_bytes.to_string(),
            r.full_bytes.to_string(),
            r.flags_total.to_string(),
            r.wall_seconds.map(fmt_f64).unwrap_or_default(),
        ];
        if with_estimate {
            match &r.estimate {
                Some(e) => row.extend([
                    fmt_f64(e.speedup_compute),
                    fmt_f64(e.speedup_memory),
                    e.bound_class.clone(),
                    fmt_f64(e.fit_slope),
                    fmt_f64(e.fit_intercept),
                ]),
                None => row.extend(std::iter::repeat(String::new()).take(ESTIMATE_COLUMNS.len())),
            }
        }
        w.write_record(&row).expect("in-memory write");
    }
    let body = String::from_utf8(w.into_inner().expect("flush")).expect("utf-8");
    format!("# {L1_FORMULA}\n{body}")
}

pub fn from_csv(text: &str) -> Result<Vec<SweepRecord>, String> {
    let mut rd = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| header.iter().position(|h| h == name);
    for c in CSV_COLUMNS {
        if col(c).is_none() {
            return Err(format!("missing column `{c}`"));
        }
    }
    let has_estimate = ESTIMATE_COLUMNS.iter().all(|c| col(c).is_some());
    let mut out = Vec::new();
    for (n, row) in rd.records().enumerate() {
        let row = row.map_err(|e| e.to_string())?;
        let get = |name: &str| row.get(col(name).expect("checked")).unwrap_or("");
        let line = n + 1;
        fn num<T: std::str::FromStr>(v: &str, name: &str, line: usize) -> Result<T, String> {
            v.parse().map_err(|_| format!("row {line}: bad value `{v}` in `{name}`"))
        }
        let u = |name: &str| num::<u64>(get(name), name, line);
        let mode: Mode = get("mode").parse().map_err(|e| format!("row {line}: {e}"))?;
        let wall = get("wall_seconds");
        let estimate = if has_estimate && !get("bound_class").is_empty() {
            Some(EstimateColumns {
                speedup_compute: num(get("speedup_compute"), "speedup_compute", line)?,
                speedup_memory: num(get("speedup_memory"), "speedup_memory", line)?,
                bound_class: get("bound_class").to_string(),
                fit_slope: num(get("fit_slope"), "fit_slope", line)?,
                fit_intercept: num(get("fit_intercept"), "fit_intercept", line)?,
            })
        } else {
            None
        };
        out.push(SweepRecord {
            workload: get("workload").to_string(),
            mode,
            spec: get("spec").to_string(),
            cutoff_l: num(get("cutoff_l"), "cutoff_l", line)?,
            mantissa_bits: num(get("mantissa_bits"), "mantissa_bits", line)?,
            exp_bits: num(get("exp_bits"), "exp_bits", line)?,
            l1_error: num(get("l1_error"), "l1_error", line)?,
            truncated_flops: u("truncated_flops")?,
            full_flops: u("full_flops")?,
            truncated_bytes: u("truncated_bytes")?,
            full_bytes: u("full_bytes")?,
            flags_total: u("flags_total")?,
            wall_seconds: if wall.is_empty() { None } else { Some(num(wall, "wall_seconds", line)?) },
            estimate,
            flags: Vec::new(),
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u64,
    pub l1_formula: String,
    pub records: Vec<SweepRecord>,
}

impl Report {
    pub fn new(records: Vec<SweepRecord>) -> Self {
        Report { schema_version: SCHEMA_VERSION, l1_formula: L1_FORMULA.to_string(), records }
    }
}

pub fn to_json(records: &[SweepRecord]) -> String {
    let mut s = serde_json::to_string_pretty(&Report::new(records.to_vec())).expect("serializable");
    s.push('\n');
    s
}

/// Check a parsed JSON report against the documented schema.
pub fn validate_report(v: &Value) -> Result<(), ProfilerError> {
    let bad = |m: String| Err(ProfilerError::Schema(m));
    let Some(obj) = v.as_object() else { return bad("report is not an object".into()) };
    match obj.get("schema_version").and_then(Value::as_u64) {
        Some(SCHEMA_VERSION) => {}
        other => return bad(format!("schema_version must be {SCHEMA_VERSION}, got {other:?}")),
    }
    if !obj.get("l1_formula").is_some_and(Value::is_string) {
        return bad("l1_formula must be a string".into());
    }
    let Some(records) = obj.get("records").and_then(Value::as_array) else {
        return bad("records must be an array".into());
    };
    for (i, r) in records.iter().enumerate() {
        let Some(r) = r.as_object() else { return bad(format!("records[{i}] is not an object")) };
        for key in ["workload", "spec"] {
            if !r.get(key).is_some_and(Value::is_string) {
                return bad(format!("records[{i}].{key} must be a string"));
            }
        }
        if let Err(e) = TruncSpec::parse(r["spec"].as_str().unwrap_or_default()) {
            return bad(format!("records[{i}].spec: {e}"));
        }
        if !matches!(r.get("mode").and_then(Value::as_str), Some("op" | "mem")) {
            return bad(format!("records[{i}].mode must be \"op\" or \"mem\""));
        }
        for key in
            ["cutoff_l", "mantissa_bits", "exp_bits", "truncated_flops", "full_flops", "truncated_bytes", "full_bytes", "flags_total"]
        {
            if !r.get(key).is_some_and(Value::is_u64) {
                return bad(format!("records[{i}].{key} must be a non-negative integer"));
            }
        }
        let l1_ok = match r.get("l1_error") {
            Some(Value::Number(n)) => n.as_f64().is_some_and(|x| x >= 0.0),
            Some(Value::String(s)) => s == "inf",
            _ => false,
        };
        if !l1_ok {
            return bad(format!("records[{i}].l1_error must be a non-negative number or \"inf\""));
        }
        if !matches!(r.get("wall_seconds"), Some(Value::Null | Value::Number(_))) {
            return bad(format!("records[{i}].wall_seconds must be a number or null"));
        }
        let Some(flags) = r.get("flags").and_then(Value::as_array) else {
            return bad(format!("records[{i}].flags must be an array"));
        };
        for (j, f) in flags.iter().enumerate() {
            let ok = f.get("location").is_some_and(Value::is_string)
                && f.get("count").is_some_and(Value::is_u64)
                && f.get("first_seen").is_some_and(Value::is_u64)
                && f.get("max_deviation").is_some_and(|d| d.is_number() || d.is_string());
            if !ok {
                return bad(format!("records[{i}].flags[{j}] must have location, count, max_deviation, first_seen"));
            }
        }
    }
    Ok(())
}

pub fn from_json(text: &str) -> Result<Vec<SweepRecord>, ProfilerError> {
    let v: Value = serde_json::from_str(text).map_err(|e| ProfilerError::Schema(e.to_string()))?;
    validate_report(&v)?;
    let report: Report = serde_json::from_value(v).map_err(|e| ProfilerError::Schema(e.to_string()))?;
    Ok(report.records)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// By file extension; anything but `.json` is CSV.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

pub fn export_report(records: &[SweepRecord], format: ReportFormat, path: &Path) -> Result<(), ProfilerError> {
    let text = match format {
        ReportFormat::Csv => to_csv(records),
        ReportFormat::Json => to_json(records),
    };
    fs::write(path, text).map_err(|source| ProfilerError::Io { path: path.to_path_buf(), source })
}

pub fn import_report(path: &Path) -> Result<Vec<SweepRecord>, ProfilerError> {
    let text = fs::read_to_string(path).map_err(|source| ProfilerError::Io { path: path.to_path_buf(), source })?;
    match ReportFormat::for_path(path) {
        ReportFormat::Csv => from_csv(&text).map_err(|msg| ProfilerError::Parse { path: path.to_path_buf(), msg }),
        ReportFormat::Json => from_json(&text),
    }
}
