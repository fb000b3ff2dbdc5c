//! Newton-Raphson inversion of a tabulated equation of state: find the
//! temperature at which the bilinearly interpolated energy hits a target.

use super::{Output, Workload, WorkloadError};
use crate::scalar::Scalar;
use crate::scope::RegionTag;
use crate::session::probe;

pub const REGIONS: [&str; 2] = ["interp", "newton"];
const INTERP: RegionTag = RegionTag::new("interp").at_level(1);
const NEWTON: RegionTag = RegionTag::new("newton").at_level(1);

/// Energy on a (density, temperature) grid, density-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EosTable {
    rho: Vec<f64>,
    temp: Vec<f64>,
    values: Vec<f64>,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.len() >= 2 && v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[0] < w[1])
}

/// Grid cell containing `x`, clamped to the edge cells so that points
/// outside the table extrapolate linearly.
fn cell(axis: &[f64], x: f64) -> usize {
    let hi = axis.len() - 2;
    if x.is_nan() {
        return 0;
    }
    axis[1..=hi].partition_point(|&a| a <= x)
}

impl EosTable {
    pub fn new(rho: Vec<f64>, temp: Vec<f64>, f: impl Fn(f64, f64) -> f64) -> Result<Self, WorkloadError> {
        if !strictly_increasing(&rho) || !strictly_increasing(&temp) {
            return Err(WorkloadError::Config { workload: "eos", msg: "table axes must be finite and strictly increasing".into() });
        }
        let values: Vec<f64> = rho.iter().flat_map(|&r| temp.iter().map(move |&t| (r, t))).map(|(r, t)| f(r, t)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(WorkloadError::Config { workload: "eos", msg: "table values must be finite".into() });
        }
        Ok(EosTable { rho, temp, values })
    }

    /// `e = 1.5 T + 0.1 T^4 / rho`.
    pub fn model(rho: f64, t: f64) -> f64 {
        1.5 * t + 0.1 * t.powi(4) / rho
    }

    /// 12 densities by 64 temperatures, both uniform on `[1, 10]`.
    pub fn bundled() -> Self {
        let axis = |n: usize| (0..n).map(|i| 1.0 + 9.0 * i as f64 / (n - 1) as f64).collect::<Vec<_>>();
        EosTable::new(axis(12), axis(64), EosTable::model).expect("bundled table is valid")
    }

    pub fn rho_range(&self) -> (f64, f64) {
        (self.rho[0], self.rho[self.rho.len() - 1])
    }

    pub fn temp_range(&self) -> (f64, f64) {
        (self.temp[0], self.temp[self.temp.len() - 1])
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.temp.len() + j]
    }

    /// Interpolated energy and its temperature derivative.
    pub fn interp<S: Scalar>(&self, rho: S, t: S) -> (S, S) {
        let i = cell(&self.rho, rho.value());
        let j = cell(&self.temp, t.value());
        let (r0, r1) = (S::lit(self.rho[i]), S::lit(self.rho[i + 1]));
        let (t0, t1) = (S::lit(self.temp[j]), S::lit(self.temp[j + 1]));
        let (f00, f01) = (S::lit(self.at(i, j)), S::lit(self.at(i, j + 1)));
        let (f10, f11) = (S::lit(self.at(i + 1, j)), S::lit(self.at(i + 1, j + 1)));
        let wr = (rho - r0) / (r1 - r0);
        let dt = t1 - t0;
        let wt = (t - t0) / dt;
        let (g0, g1) = (f01 - f00, f11 - f10);
        let a = f00 + wt * g0;
        let b = f10 + wt * g1;
        let value = a + wr * (b - a);
        let slope = (g0 + wr * (g1 - g0)) / dt;
        (value, slope)
    }
}

/// Outcome of one inversion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Solve {
    pub root: f64,
    pub iterations: u32,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EosConfig {
    pub table: EosTable,
    /// Relative residual `|f(T) - target| / |target|` accepted as converged.
    pub tolerance: f64,
    pub max_iter: u32,
    /// Smallest derivative magnitude the iteration will divide by.
    pub deriv_floor: f64,
    pub targets: usize,
    pub initial_temp: f64,
}

impl Default for EosConfig {
    fn default() -> Self {
        EosConfig { table: EosTable::bundled(), tolerance: 1e-9, max_iter: 50, deriv_floor: 1e-12, targets: 16, initial_temp: 5.5 }
    }
}

impl EosConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        if !(self.tolerance > 0.0) || self.max_iter == 0 || self.targets == 0 {
            return Err(WorkloadError::Config {
                workload: "eos",
                msg: format!("tolerance = {}, max_iter = {}, targets = {}", self.tolerance, self.max_iter, self.targets),
            });
        }
        Ok(())
    }

    /// `(rho, target energy)` pairs spread over the table interior.
    pub fn problems(&self) -> Vec<(f64, f64)> {
        let (r0, r1) = self.table.rho_range();
        let (t0, t1) = self.table.temp_range();
        let phi = 0.618_033_988_749_894_9;
        (0..self.targets)
            .map(|k| {
                let a = (0.37 + phi * k as f64).fract();
                let b = (0.11 + 0.5 * phi * k as f64 + 0.5 * (k as f64 / self.targets as f64)).fract();
                let rho = r0 + (r1 - r0) * (0.05 + 0.9 * a);
                let t = t0 + (t1 - t0) * (0.05 + 0.9 * b);
                (rho, self.table.interp(rho, t).0)
            })
            .collect()
    }

    fn residual_ok(&self, rho: f64, t: f64, target: f64) -> bool {
        let (f, _) = self.table.interp::<f64>(rho, t);
        (f - target).abs() <= self.tolerance * target.abs()
    }

    /// Newton iteration in `S` arithmetic. Convergence is judged on the
    /// binary64 residual of the current iterate.
    pub fn solve<S: Scalar>(&self, rho: f64, target: f64) -> Solve {
        let prev = probe::region(NEWTON);
        let rho_s = S::lit(rho);
        let target_s = S::lit(target);
        let mut t = S::lit(self.initial_temp);
        let mut result = Solve { root: t.value(), iterations: 0, converged: false };
        for iter in 1..=self.max_iter {
            probe::region(INTERP);
            let (f, d) = self.table.interp(rho_s, t);
            if !(d.value().abs() >= self.deriv_floor) {
                break;
            }
            probe::region(NEWTON);
            t = t - (f - target_s) / d;
            result = Solve { root: t.value(), iterations: iter, converged: false };
            if !result.root.is_finite() {
                break;
            }
            if self.residual_ok(rho, result.root, target) {
                result.converged = true;
                break;
            }
        }
        probe::region(prev);
        result
    }

    pub fn solve_all<S: Scalar>(&self) -> Vec<Solve> {
        self.problems().into_iter().map(|(rho, e)| self.solve::<S>(rho, e)).collect()
    }
}

impl Workload for EosConfig {
    fn name(&self) -> &'static str {
        "eos"
    }

    fn regions(&self) -> &'static [&'static str] {
        &REGIONS
    }

    fn max_level(&self) -> u32 {
        1
    }

    fn run<S: Scalar>(&self) -> Output {
        let solves = self.solve_all::<S>();
        Output { diverged: solves.iter().any(|s| !s.converged), field: solves.iter().map(|s| s.root).collect() }
    }
}

/// Smallest tested mantissa `m` such that every tested mantissa `>= m`
/// converged. `results` holds `(mantissa, converged)` pairs.
pub fn convergence_threshold(results: &[(u32, bool)]) -> Option<u32> {
    let mut sorted = results.to_vec();
    sorted.sort_unstable();
    let mut m_star = None;
    for &(m, ok) in sorted.iter().rev() {
        if !ok {
            break;
        }
        m_star = Some(m);
    }
    m_star
}
