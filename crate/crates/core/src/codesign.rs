//! FPU co-design estimates: performance density per format, area split
//! between a double and a low-precision unit, compute and memory time, and
//! roofline classification.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profiler::{Counters, EstimateColumns, SweepRecord};
use crate::scope::TruncSpec;
use crate::softfloat::FloatFormat;

/// Default memory bandwidth, bytes per second.
pub const DEFAULT_BANDWIDTH: f64 = 1024e9;
/// Double-precision peak of the modelled machine, flop per second (A64FX class).
pub const DEFAULT_PEAK_DOUBLE: f64 = 3.072e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CodesignError {
    #[error("densities must be positive (double {p_dbl}, low {p_low})")]
    Density { p_dbl: f64, p_low: f64 },
    #[error("compute ratio parts must be positive, got {0}:{1}")]
    Ratio(f64, f64),
    #[error("bandwidth must be positive, got {0}")]
    Bandwidth(f64),
    #[error("record {index}: {msg}")]
    Record { index: usize, msg: String },
}

/// One row of the published FPU table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FpuPoint {
    pub name: &'static str,
    pub format: FloatFormat,
    pub gflops: f64,
    pub area_kge: f64,
    /// Published throughput per area, normalized to the binary64 unit.
    pub density: f64,
}

impl FpuPoint {
    /// Density recomputed from throughput and area.
    pub fn recomputed_density(&self) -> f64 {
        let base = &FPU_TABLE[0];
        (self.gflops / self.area_kge) / (base.gflops / base.area_kge)
    }
}

const FPU_TABLE: [FpuPoint; 4] = [
    FpuPoint { name: "fp64", format: FloatFormat::BINARY64, gflops: 3.17, area_kge: 53.0, density: 1.00 },
    FpuPoint { name: "fp32", format: FloatFormat::BINARY32, gflops: 6.33, area_kge: 40.0, density: 2.65 },
    FpuPoint { name: "fp16", format: FloatFormat::BINARY16, gflops: 12.67, area_kge: 29.0, density: 7.30 },
    FpuPoint { name: "fp8", format: FloatFormat::FP8_E5M2, gflops: 25.33, area_kge: 23.0, density: 18.41 },
];

pub fn fpu_table() -> &'static [FpuPoint; 4] {
    &FPU_TABLE
}

pub fn table_density(fmt: FloatFormat) -> Option<f64> {
    FPU_TABLE.iter().find(|p| p.format == fmt).map(|p| p.density)
}

/// `ln(density) = intercept + slope * ln(width)`, least squares over the
/// table rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityFit {
    pub slope: f64,
    pub intercept: f64,
}

impl DensityFit {
    pub fn from_table() -> Self {
        let pts: Vec<(f64, f64)> =
            FPU_TABLE.iter().map(|p| ((p.format.width() as f64).ln(), p.density.ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        DensityFit { slope, intercept: my - slope * mx }
    }

    pub fn at_width(&self, width: u32) -> f64 {
        (self.intercept + self.slope * (width as f64).ln()).exp()
    }

    pub fn density(&self, fmt: FloatFormat) -> f64 {
        self.at_width(fmt.width())
    }
}

/// Fitted normalized density of `fmt`.
pub fn density_for(fmt: FloatFormat) -> f64 {
    DensityFit::from_table().density(fmt)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaSplit {
    pub a_dbl: f64,
    pub a_low: f64,
}

impl AreaSplit {
    pub fn ratio(&self) -> f64 {
        self.a_dbl / self.a_low
    }
}

/// Areas with `A_dbl + A_low = 1` such that the units' throughputs stand in
/// the ratio `r_dbl : r_low`.
pub fn area_split(r_dbl: f64, r_low: f64, p_dbl: f64, p_low: f64) -> Result<AreaSplit, CodesignError> {
    if !(p_dbl > 0.0 && p_low > 0.0) {
        return Err(CodesignError::Density { p_dbl, p_low });
    }
    if !(r_dbl > 0.0 && r_low > 0.0) {
        return Err(CodesignError::Ratio(r_dbl, r_low));
    }
    if p_low.is_infinite() {
        return Ok(AreaSplit { a_dbl: 1.0, a_low: 0.0 });
    }
    let a_dbl = p_low * r_dbl / (p_low * r_dbl + p_dbl * r_low);
    Ok(AreaSplit { a_dbl, a_low: 1.0 - a_dbl })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundClass {
    ComputeBound,
    MemoryBound,
}

impl BoundClass {
    pub fn name(self) -> &'static str {
        match self {
            BoundClass::ComputeBound => "compute-bound",
            BoundClass::MemoryBound => "memory-bound",
        }
    }
}

impl fmt::Display for BoundClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A two-unit machine: a double FPU and one low-precision FPU.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MachineModel {
    pub a_dbl: f64,
    pub a_low: f64,
    pub p_dbl: f64,
    pub p_low: f64,
    /// Storage width of the low format, bits.
    pub low_width: u32,
    /// True when the low unit is the double unit (identity truncation).
    pub low_is_double: bool,
    pub bandwidth: f64,
    pub peak_double: f64,
}

impl MachineModel {
    /// `sum N_i / (A_i P_i)`, in model units.
    pub fn compute_time(&self, n_dbl: f64, n_low: f64) -> f64 {
        if self.low_is_double {
            return (n_dbl + n_low) / (self.a_dbl * self.p_dbl);
        }
        let mut t = n_dbl / (self.a_dbl * self.p_dbl);
        if n_low != 0.0 {
            t += n_low / (self.a_low * self.p_low);
        }
        t
    }

    /// Seconds to move the bytes; truncated bytes shrink with the format.
    pub fn memory_time(&self, full_bytes: f64, truncated_bytes: f64) -> f64 {
        let scale = if self.low_is_double { 1.0 } else { self.low_width as f64 / 64.0 };
        (full_bytes + truncated_bytes * scale) / self.bandwidth
    }

    /// Machine balance, flop per byte.
    pub fn balance(&self) -> f64 {
        self.peak_double / self.bandwidth
    }

    pub fn classify(&self, flops: f64, bytes: f64) -> BoundClass {
        if bytes == 0.0 || flops / bytes >= self.balance() {
            BoundClass::ComputeBound
        } else {
            BoundClass::MemoryBound
        }
    }

    pub fn estimate(&self, c: &Counters) -> Estimate {
        let (nt, nf) = (c.truncated_flops as f64, c.full_flops as f64);
        let (bt, bf) = (c.truncated_bytes as f64, c.full_bytes as f64);
        let base = self.compute_time(nf + nt, 0.0);
        let mixed = self.compute_time(nf, nt);
        let speedup_compute = if mixed == 0.0 { 1.0 } else { base / mixed };
        let mem_base = (bf + bt) / self.bandwidth;
        let mem_mixed = self.memory_time(bf, bt);
        let speedup_memory = if mem_mixed == 0.0 { 1.0 } else { mem_base / mem_mixed };
        let bound = self.classify(nf + nt, bf + bt);
        let speedup = match bound {
            BoundClass::ComputeBound => speedup_compute,
            BoundClass::MemoryBound => speedup_memory,
        };
        let intensity = if bf + bt == 0.0 { f64::INFINITY } else { (nf + nt) / (bf + bt) };
        Estimate { speedup_compute, speedup_memory, bound, speedup, intensity }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub speedup_compute: f64,
    pub speedup_memory: f64,
    pub bound: BoundClass,
    /// Speedup in the binding regime.
    pub speedup: f64,
    pub intensity: f64,
}

/// Estimator configuration. Areas are solved once for a binary32 reference
/// low unit at the given compute ratio and then held fixed, so the low
/// unit's density follows the truncation format within a fixed silicon
/// budget.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CodesignModel {
    pub fit: DensityFit,
    pub areas: AreaSplit,
    pub compute_ratio: (f64, f64),
    pub bandwidth: f64,
    pub peak_double: f64,
}

impl Default for CodesignModel {
    fn default() -> Self {
        CodesignModel::new(DEFAULT_BANDWIDTH, (1.0, 2.0)).expect("default parameters are valid")
    }
}

impl CodesignModel {
    pub fn new(bandwidth: f64, compute_ratio: (f64, f64)) -> Result<Self, CodesignError> {
        if !(bandwidth > 0.0) {
            return Err(CodesignError::Bandwidth(bandwidth));
        }
        let fit = DensityFit::from_table();
        let areas = area_split(
            compute_ratio.0,
            compute_ratio.1,
            fit.density(FloatFormat::BINARY64),
            fit.density(FloatFormat::BINARY32),
        )?;
        Ok(CodesignModel { fit, areas, compute_ratio, bandwidth, peak_double: DEFAULT_PEAK_DOUBLE })
    }

    pub fn machine(&self, low: FloatFormat) -> MachineModel {
        MachineModel {
            a_dbl: self.areas.a_dbl,
            a_low: self.areas.a_low,
            p_dbl: self.fit.density(FloatFormat::BINARY64),
            p_low: self.fit.density(low),
            low_width: low.width(),
            low_is_double: low == FloatFormat::BINARY64,
            bandwidth: self.bandwidth,
            peak_double: self.peak_double,
        }
    }

    pub fn estimate_record(&self, r: &SweepRecord) -> Result<Estimate, String> {
        let spec = TruncSpec::parse(&r.spec).map_err(|e| format!("spec `{}`: {e}", r.spec))?;
        let low = spec.get(64).unwrap_or(FloatFormat::BINARY64);
        Ok(self.machine(low).estimate(&r.counters()))
    }

    /// Copies of `records` with the estimate columns filled in.
    pub fn annotate(&self, records: &[SweepRecord]) -> Result<Vec<SweepRecord>, CodesignError> {
        records
            .iter()
            .enumerate()
            .map(|(index, r)| {
                let e = self.estimate_record(r).map_err(|msg| CodesignError::Record { index, msg })?;
                let mut r = r.clone();
                r.estimate = Some(EstimateColumns {
                    speedup_compute: e.speedup_compute,
                    speedup_memory: e.speedup_memory,
                    bound_class: e.bound.to_string(),
                    fit_slope: self.fit.slope,
                    fit_intercept: self.fit.intercept,
                });
                Ok(r)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_rows() {
        let t = fpu_table();
        assert_eq!((t[0].format, t[0].gflops, t[0].area_kge, t[0].density), (FloatFormat::BINARY64, 3.17, 53.0, 1.00));
        assert_eq!((t[2].format, t[2].gflops, t[2].area_kge, t[2].density), (FloatFormat::BINARY16, 12.67, 29.0, 7.30));
        assert_eq!(t[3].format, FloatFormat::FP8_E5M2);
    }

    #[test]
    fn recomputed_density_matches_published() {
        assert!((fpu_table()[1].recomputed_density() - 2.646).abs() < 5e-4);
        for p in fpu_table() {
            assert!((p.recomputed_density() / p.density - 1.0).abs() < 0.01, "{}", p.name);
        }
    }

    #[test]
    fn fit_reproduces_end_rows_and_decreases() {
        let fit = DensityFit::from_table();
        assert!((density_for(FloatFormat::BINARY64) / 1.00 - 1.0).abs() < 0.15);
        assert!((density_for(FloatFormat::FP8_E5M2) / 18.41 - 1.0).abs() < 0.15);
        assert!(fit.slope < 0.0);
        for w in 4..300 {
            assert!(fit.at_width(w + 1) < fit.at_width(w));
        }
    }

    #[test]
    fn area_split_examples() {
        let s = area_split(1.0, 1.0, 3.0, 3.0).unwrap();
        assert_eq!((s.a_dbl, s.a_low), (0.5, 0.5));
        let s = area_split(1.0, 2.0, 1.0, 2.65).unwrap();
        assert!((s.ratio() - 1.325).abs() < 1e-12);
        assert!((s.a_dbl + s.a_low - 1.0).abs() < 1e-15);
        let s = area_split(1.0, 2.0, 1.0, 1e12).unwrap();
        assert!(s.a_dbl > 1.0 - 1e-11);
        assert!(area_split(1.0, 2.0, 0.0, 1.0).is_err());
    }

    fn machine(a: f64, p_low: f64) -> MachineModel {
        MachineModel {
            a_dbl: a,
            a_low: a,
            p_dbl: 1.0,
            p_low,
            low_width: 16,
            low_is_double: false,
            bandwidth: DEFAULT_BANDWIDTH,
            peak_double: DEFAULT_PEAK_DOUBLE,
        }
    }

    #[test]
    fn compute_time_examples() {
        let m = machine(1.0, 2.0);
        assert_eq!(m.compute_time(1000.0, 0.0), 1000.0);
        assert_eq!(m.compute_time(0.0, 0.0), 0.0);
        let m = machine(0.5, 2.0);
        assert_eq!(m.compute_time(500.0, 500.0), 0.75 * 1000.0 / 0.5);
    }

    #[test]
    fn eighty_percent_low_speedup() {
        let m = machine(1.0, 4.0);
        let c = Counters { truncated_flops: 800, full_flops: 200, ..Default::default() };
        let e = m.estimate(&c);
        assert_eq!(e.bound, BoundClass::ComputeBound);
        assert!((e.speedup - 1.0 / (0.2 + 0.8 / 4.0)).abs() < 1e-12);
    }

    #[test]
    fn identity_speedup_is_exactly_one() {
        let model = CodesignModel::default();
        let m = model.machine(FloatFormat::BINARY64);
        let c = Counters { truncated_flops: 12345, full_flops: 678, truncated_bytes: 999, full_bytes: 1, ..Default::default() };
        let e = m.estimate(&c);
        assert_eq!((e.speedup_compute, e.speedup_memory, e.speedup), (1.0, 1.0, 1.0));
        let all_full = Counters { full_flops: 10, full_bytes: 80, ..Default::default() };
        assert_eq!(model.machine(FloatFormat::BINARY16).estimate(&all_full).speedup, 1.0);
    }

    #[test]
    fn classification() {
        let m = CodesignModel::default().machine(FloatFormat::BINARY32);
        assert_eq!(m.balance(), 3.0);
        assert_eq!(m.classify(1e6, 10.0), BoundClass::ComputeBound);
        assert_eq!(m.classify(1.0, 10.0), BoundClass::MemoryBound);
        assert_eq!(m.classify(5.0, 0.0), BoundClass::ComputeBound);
        let mut wide = m;
        for bw in [1e9, 1e10, 1e11, 1e12, 1e13] {
            wide.bandwidth = bw;
            let before = wide.classify(2.5e6, 1e6);
            wide.bandwidth = bw * 10.0;
            if before == BoundClass::ComputeBound {
                assert_eq!(wide.classify(2.5e6, 1e6), BoundClass::ComputeBound);
            }
        }
    }

    #[test]
    fn fp32_reference_area_ratio() {
        let model = CodesignModel::default();
        // the fitted fp32/fp64 density ratio, halved
        assert!((model.areas.ratio() - 1.325).abs() < 0.01);
    }
}
