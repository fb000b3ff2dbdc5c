//! Truncation specs, region tags and truncation contexts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::softfloat::{FloatFormat, Rounding, MAX_EXP_BITS, MAX_MAN_BITS, MIN_EXP_BITS, MIN_MAN_BITS};

/// Carrier widths a spec may map.
pub const SOURCE_WIDTHS: [u32; 2] = [32, 64];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SpecError {
    #[error("malformed truncation entry at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("conflicting entries for source width {width} at byte {offset}")]
    Conflict { width: u32, offset: usize },
    #[error("{what} {value} at byte {offset} is out of range [{min}, {max}]")]
    Range { what: &'static str, value: u64, min: u64, max: u64, offset: usize },
}

/// Mapping from source width (32 or 64) to a target format. Entries keep
/// their insertion order so that printing reproduces the parsed text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct TruncSpec {
    entries: Vec<(u32, FloatFormat)>,
}

impl TruncSpec {
    pub fn new() -> Self {
        TruncSpec::default()
    }

    /// `{64 -> (11, 52)}`.
    pub fn identity() -> Self {
        TruncSpec { entries: vec![(64, FloatFormat::BINARY64)] }
    }

    pub fn single(width: u32, fmt: FloatFormat) -> Self {
        TruncSpec { entries: vec![(width, fmt)] }
    }

    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut spec = TruncSpec::new();
        let mut offset = 0;
        for entry in text.split(';') {
            let (width, fmt) = parse_entry(entry, offset)?;
            if spec.get(width).is_some() {
                return Err(SpecError::Conflict { width, offset });
            }
            spec.entries.push((width, fmt));
            offset += entry.len() + 1;
        }
        Ok(spec)
    }

    /// Expand a template such as `64_to_11_M`, substituting `mantissa` for
    /// every `M` mantissa field.
    pub fn from_template(template: &str, mantissa: u32) -> Result<Self, SpecError> {
        let expanded: Vec<String> = template
            .split(';')
            .map(|e| match e.strip_suffix("_M") {
                Some(head) => format!("{head}_{mantissa}"),
                None => e.to_string(),
            })
            .collect();
        TruncSpec::parse(&expanded.join(";"))
    }

    pub fn insert(&mut self, width: u32, fmt: FloatFormat) -> Result<(), SpecError> {
        if !SOURCE_WIDTHS.contains(&width) {
            return Err(SpecError::Range { what: "source width", value: width.into(), min: 32, max: 64, offset: 0 });
        }
        if self.get(width).is_some() {
            return Err(SpecError::Conflict { width, offset: 0 });
        }
        self.entries.push((width, fmt));
        Ok(())
    }

    pub fn get(&self, width: u32) -> Option<FloatFormat> {
        self.entries.iter().find(|(w, _)| *w == width).map(|(_, f)| *f)
    }

    pub fn entries(&self) -> &[(u32, FloatFormat)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when every entry maps a width onto its own IEEE format.
    pub fn is_identity(&self) -> bool {
        self.entries.iter().all(|&(w, f)| match w {
            64 => f == FloatFormat::BINARY64,
            32 => f == FloatFormat::BINARY32,
            _ => false,
        })
    }
}

fn parse_entry(entry: &str, offset: usize) -> Result<(u32, FloatFormat), SpecError> {
    let malformed = |reason: &str| SpecError::Malformed { offset, reason: reason.to_string() };
    if entry.is_empty() {
        return Err(malformed("empty entry"));
    }
    let (src, rest) = entry.split_once("_to_").ok_or_else(|| malformed("expected `<src>_to_<exp>_<man>`"))?;
    let (exp, man) = rest.split_once('_').ok_or_else(|| malformed("expected `<exp>_<man>` after `_to_`"))?;
    let num = |field: &str, at: usize, what: &str| -> Result<u64, SpecError> {
        if field.is_empty() || !field.bytes().all(|b| b.is_ascii_digit()) {
            return Err(SpecError::Malformed { offset: offset + at, reason: format!("{what} `{field}` is not a number") });
        }
        field
            .parse::<u64>()
            .map_err(|_| SpecError::Malformed { offset: offset + at, reason: format!("{what} `{field}` is too large") })
    };
    let exp_at = src.len() + 4;
    let man_at = exp_at + exp.len() + 1;
    let width = num(src, 0, "source width")?;
    let e = num(exp, exp_at, "exponent width")?;
    let m = num(man, man_at, "mantissa width")?;
    if width != 32 && width != 64 {
        return Err(SpecError::Range { what: "source width", value: width, min: 32, max: 64, offset });
    }
    if !(u64::from(MIN_EXP_BITS)..=u64::from(MAX_EXP_BITS)).contains(&e) {
        return Err(SpecError::Range {
            what: "exponent width",
            value: e,
            min: MIN_EXP_BITS.into(),
            max: MAX_EXP_BITS.into(),
            offset: offset + exp_at,
        });
    }
    if !(u64::from(MIN_MAN_BITS)..=u64::from(MAX_MAN_BITS)).contains(&m) {
        return Err(SpecError::Range {
            what: "mantissa width",
            value: m,
            min: MIN_MAN_BITS.into(),
            max: MAX_MAN_BITS.into(),
            offset: offset + man_at,
        });
    }
    let fmt = FloatFormat::new(e as u32, m as u32).expect("bounds checked above");
    Ok((width as u32, fmt))
}

impl fmt::Display for TruncSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (w, t)) in self.entries.iter().enumerate() {
            if i > 0 {
                f.write_str(";")?;
            }
            write!(f, "{w}_to_{}_{}", t.exp_bits(), t.man_bits())?;
        }
        Ok(())
    }
}

impl FromStr for TruncSpec {
    type Err = SpecError;
    fn from_str(s: &str) -> Result<Self, SpecError> {
        TruncSpec::parse(s)
    }
}

impl Serialize for TruncSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TruncSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TruncSpec::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Tag attached to the instrumented operations that follow it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RegionTag {
    pub name: &'static str,
    pub level: Option<u32>,
}

impl RegionTag {
    /// Operations issued before any region is set.
    pub const UNTAGGED: RegionTag = RegionTag { name: "", level: None };

    pub const fn new(name: &'static str) -> Self {
        RegionTag { name, level: None }
    }

    pub const fn at_level(self, level: u32) -> Self {
        RegionTag { name: self.name, level: Some(level) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Op,
    Mem,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Op => "op",
            Mode::Mem => "mem",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "op" => Ok(Mode::Op),
            "mem" => Ok(Mode::Mem),
            _ => Err(format!("unknown mode `{s}` (expected `op` or `mem`)")),
        }
    }
}

/// Level cutoff over levels `1..=max_level`: levels up to `max_level - l`
/// are truncated, the finer ones run at full precision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LevelCutoff {
    pub max_level: u32,
    pub l: u32,
}

impl LevelCutoff {
    pub fn truncates(self, level: u32) -> bool {
        i64::from(level) <= i64::from(self.max_level) - i64::from(self.l)
    }
}

/// Default relative deviation above which mem-mode flags an operation.
pub const DEFAULT_THRESHOLD: f64 = 1e-6;

/// One entry of a session's scope stack.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncContext {
    spec: TruncSpec,
    mode: Mode,
    cutoff: Option<LevelCutoff>,
    excluded: Vec<String>,
    threshold: f64,
    gradual_underflow: bool,
}

impl TruncContext {
    pub fn new(spec: TruncSpec, mode: Mode) -> Self {
        TruncContext { spec, mode, cutoff: None, excluded: Vec::new(), threshold: DEFAULT_THRESHOLD, gradual_underflow: true }
    }

    pub fn op(spec: TruncSpec) -> Self {
        TruncContext::new(spec, Mode::Op)
    }

    pub fn mem(spec: TruncSpec) -> Self {
        TruncContext::new(spec, Mode::Mem)
    }

    pub fn spec(&self) -> &TruncSpec {
        &self.spec
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn cutoff(&self) -> Option<LevelCutoff> {
        self.cutoff
    }

    pub fn excluded(&self) -> &[String] {
        &self.excluded
    }

    /// Truncate only levels `<= max_level - l`. `l > max_level` is allowed and
    /// disables truncation for every level.
    pub fn set_level_cutoff(&mut self, max_level: u32, l: u32) {
        self.cutoff = Some(LevelCutoff { max_level, l });
    }

    pub fn with_level_cutoff(mut self, max_level: u32, l: u32) -> Self {
        self.set_level_cutoff(max_level, l);
        self
    }

    pub fn set_threshold(&mut self, threshold: f64) {
        self.threshold = threshold;
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// Run the named region at full precision. The name is checked against
    /// the session's declared regions when the context is entered.
    pub fn exclude_region(&mut self, name: &str) {
        if !self.excluded.iter().any(|n| n == name) {
            self.excluded.push(name.to_string());
        }
    }

    pub fn excluding(mut self, name: &str) -> Self {
        self.exclude_region(name);
        self
    }

    pub fn set_gradual_underflow(&mut self, on: bool) {
        self.gradual_underflow = on;
    }

    /// Rounding applied to binary64 carrier values, if the spec maps width 64.
    pub fn rounding64(&self) -> Option<Rounding> {
        self.spec.get(64).map(|format| Rounding { format, gradual_underflow: self.gradual_underflow })
    }

    /// Whether this context truncates operations tagged `tag`.
    pub fn enables(&self, tag: &RegionTag) -> bool {
        if self.excluded.iter().any(|n| n == tag.name) {
            return false;
        }
        match (self.cutoff, tag.level) {
            (Some(c), Some(level)) => c.truncates(level),
            _ => true,
        }
    }
}
