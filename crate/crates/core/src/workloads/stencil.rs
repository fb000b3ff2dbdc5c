//! Explicit 1D heat diffusion with fixed Dirichlet ends. Control flow does
//! not depend on values, so operation and byte counts are closed-form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Output, Workload, WorkloadError};
use crate::scalar::Scalar;
use crate::scope::RegionTag;
use crate::session::probe;

pub const REGIONS: [&str; 1] = ["diffuse"];
const DIFFUSE: RegionTag = RegionTag::new("diffuse");

/// `u + r * ((left - 2u) + right)`.
pub const OPS_PER_CELL: u64 = 5;
/// One value read, one written.
pub const BYTES_PER_CELL: u64 = 16;

#[derive(Clone, Debug, PartialEq)]
pub struct StencilConfig {
    pub cells: usize,
    pub steps: usize,
    /// Diffusion number `k dt / dx^2`; stable for `r <= 0.5`.
    pub r: f64,
    pub levels: u32,
    pub seed: u64,
}

impl Default for StencilConfig {
    fn default() -> Self {
        StencilConfig { cells: 256, steps: 100, r: 0.25, levels: 4, seed: 7 }
    }
}

impl StencilConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::Config { workload: "stencil", msg });
        if self.cells == 0 || self.steps == 0 {
            return bad(format!("cells = {}, steps = {}", self.cells, self.steps));
        }
        if !(self.r > 0.0 && self.r <= 0.5) {
            return bad(format!("r = {} (expected 0 < r <= 0.5)", self.r));
        }
        if self.levels == 0 {
            return bad("levels = 0".into());
        }
        Ok(())
    }

    pub fn analytic_flops(&self) -> u64 {
        self.cells as u64 * self.steps as u64 * OPS_PER_CELL
    }

    pub fn analytic_bytes(&self) -> u64 {
        self.cells as u64 * self.steps as u64 * BYTES_PER_CELL
    }

    /// Cells are split into `levels` equal bands, coarsest first.
    pub fn level_of(&self, cell: usize) -> u32 {
        1 + (cell as u64 * self.levels as u64 / self.cells as u64) as u32
    }

    pub fn initial(&self) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut u: Vec<f64> = (0..self.cells + 2).map(|_| rng.gen::<f64>()).collect();
        u[0] = 0.0;
        u[self.cells + 1] = 1.0;
        u
    }

    pub fn simulate<S: Scalar>(&self) -> Output {
        let n = self.cells;
        let r = S::lit(self.r);
        let two = S::lit(2.0);
        let mut u: Vec<S> = self.initial().into_iter().map(S::lit).collect();
        let mut next = u.clone();
        let prev = probe::region(RegionTag::UNTAGGED);
        for _ in 0..self.steps {
            for i in 1..=n {
                probe::region(DIFFUSE.at_level(self.level_of(i - 1)));
                next[i] = u[i] + r * ((u[i - 1] - two * u[i]) + u[i + 1]);
                probe::bytes(BYTES_PER_CELL);
            }
            std::mem::swap(&mut u, &mut next);
            S::collect(&[&u]);
        }
        probe::region(prev);
        let field: Vec<f64> = u[1..=n].iter().map(|x| x.value()).collect();
        let diverged = field.iter().any(|x| !x.is_finite());
        Output { field, diverged }
    }
}

impl Workload for StencilConfig {
    fn name(&self) -> &'static str {
        "stencil"
    }

    fn regions(&self) -> &'static [&'static str] {
        &REGIONS
    }

    fn max_level(&self) -> u32 {
        self.levels
    }

    fn run<S: Scalar>(&self) -> Output {
        self.simulate::<S>()
    }
}
