//! 1D Sod shock tube: MUSCL reconstruction with a minmod limiter, HLL flux,
//! SSP-RK2 time stepping. Cells carry a refinement level derived from the
//! local density jump.

use super::riemann::{ExactRiemann, Primitive};
use super::{Output, Workload, WorkloadError};
use crate::scalar::Scalar;
use crate::scope::RegionTag;
use crate::session::probe;

pub const GAMMA: f64 = 1.4;
pub const REGIONS: [&str; 3] = ["recon", "riemann", "update"];

const RECON: RegionTag = RegionTag::new("recon");
const RIEMANN: RegionTag = RegionTag::new("riemann");
const UPDATE: RegionTag = RegionTag::new("update");

/// Upper bound on the signal speed used to size the fixed step.
const MAX_SIGNAL_SPEED: f64 = 2.5;
/// Bytes moved per cell per step: conserved state read and written.
pub const BYTES_PER_CELL_STEP: u64 = 48;
const GHOSTS: usize = 2;
const REFINE_JUMP: f64 = 0.01;
const BUFFER: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SodConfig {
    pub cells: usize,
    pub t_end: f64,
    pub cfl: f64,
    pub fixed_dt: bool,
    /// Finest level `M`; cells are tagged `1..=M`.
    pub levels: u32,
    /// Relative density jump above which a cell is tagged at level `M`;
    /// each coarser level takes a tenth of the threshold above it.
    pub refine_jump: f64,
    /// Neighbours within this distance of a tagged cell share its level.
    pub buffer: usize,
}

impl Default for SodConfig {
    fn default() -> Self {
        SodConfig { cells: 400, t_end: 0.2, cfl: 0.8, fixed_dt: true, levels: 4, refine_jump: REFINE_JUMP, buffer: BUFFER }
    }
}

impl SodConfig {
    pub fn validate(&self) -> Result<(), WorkloadError> {
        let bad = |msg: String| Err(WorkloadError::Config { workload: "sod", msg });
        if self.cells < 50 {
            return bad(format!("cells = {} (minimum 50)", self.cells));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {}", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad(format!("cfl = {} (expected 0 < cfl <= 1)", self.cfl));
        }
        if self.levels == 0 {
            return bad("levels = 0".into());
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// Fixed step: `(dt, steps)` with `steps * dt = t_end`.
    pub fn fixed_step(&self) -> (f64, usize) {
        let dt0 = self.cfl * self.dx() / MAX_SIGNAL_SPEED;
        let steps = (self.t_end / dt0).ceil().max(1.0) as usize;
        (self.t_end / steps as f64, steps)
    }

    pub fn exact(&self) -> ExactRiemann {
        ExactRiemann::new(
            Primitive { rho: 1.0, u: 0.0, p: 1.0 },
            Primitive { rho: 0.125, u: 0.0, p: 0.1 },
            GAMMA,
        )
    }

    pub fn exact_density(&self) -> Vec<f64> {
        self.exact().density_profile(self.cells, 0.5, self.t_end)
    }

    /// Refinement level for a relative density jump.
    pub fn level_for(&self, jump: f64) -> u32 {
        let mut level = self.levels;
        let mut threshold = self.refine_jump;
        while level > 1 && jump <= threshold {
            level -= 1;
            threshold /= 10.0;
        }
        level
    }
}

struct State<S> {
    rho: Vec<S>,
    mom: Vec<S>,
    ene: Vec<S>,
}

impl<S: Scalar> State<S> {
    fn fill_ghosts(&mut self) {
        let n = self.rho.len() - 2 * GHOSTS;
        for v in [&mut self.rho, &mut self.mom, &mut self.ene] {
            for g in 0..GHOSTS {
                v[g] = v[GHOSTS];
                v[n + GHOSTS + g] = v[n + GHOSTS - 1];
            }
        }
    }

    fn finite(&self) -> bool {
        self.rho.iter().chain(&self.mom).chain(&self.ene).all(|x| x.value().is_finite())
    }
}

#[inline]
fn minmod<S: Scalar>(a: S, b: S, zero: S) -> S {
    a.min(b).max(zero) + a.max(b).min(zero)
}

struct Consts<S> {
    zero: S,
    half: S,
    gamma: S,
    gm1: S,
}

struct Side<S> {
    u: [S; 3],
    vel: S,
    c: S,
    flux: [S; 3],
}

#[inline]
fn side<S: Scalar>(u: [S; 3], k: &Consts<S>) -> Side<S> {
    let [rho, mom, ene] = u;
    let vel = mom / rho;
    let p = k.gm1 * (ene - k.half * mom * vel);
    let c = (k.gamma * p / rho).max(k.zero).sqrt();
    let flux = [mom, mom * vel + p, vel * (ene + p)];
    Side { u, vel, c, flux }
}

#[inline]
fn hll<S: Scalar>(l: &Side<S>, r: &Side<S>, k: &Consts<S>) -> [S; 3] {
    let sl = (l.vel - l.c).min(r.vel - r.c).min(k.zero);
    let sr = (l.vel + l.c).max(r.vel + r.c).max(k.zero);
    let denom = sr - sl;
    let slsr = sl * sr;
    let mut f = [k.zero; 3];
    for q in 0..3 {
        f[q] = (sr * l.flux[q] - sl * r.flux[q] + slsr * (r.u[q] - l.u[q])) / denom;
    }
    f
}

impl SodConfig {
    fn levels_of<S: Scalar>(&self, st: &State<S>) -> Vec<u32> {
        let rho: Vec<f64> = st.rho.iter().map(|x| x.value()).collect();
        let n = rho.len();
        let mut lv = vec![1; n];
        for i in 1..n - 1 {
            let jump = (rho[i] - rho[i - 1]).abs().max((rho[i + 1] - rho[i]).abs()) / rho[i].abs();
            lv[i] = if jump.is_finite() { self.level_for(jump) } else { self.levels };
        }
        lv[0] = lv[1];
        lv[n - 1] = lv[n - 2];
        if self.buffer == 0 {
            return lv;
        }
        (0..n).map(|i| *lv[i.saturating_sub(self.buffer)..(i + self.buffer + 1).min(n)].iter().max().unwrap()).collect()
    }

    /// Flux differences `F(i+1/2) - F(i-1/2)` for every interior cell.
    fn flux_divergence<S: Scalar>(&self, st: &State<S>, lv: &[u32], k: &Consts<S>) -> [Vec<S>; 3] {
        let n = self.cells;
        let total = n + 2 * GHOSTS;
        let vars = [&st.rho, &st.mom, &st.ene];
        let mut slope = [vec![k.zero; total], vec![k.zero; total], vec![k.zero; total]];
        for i in 1..total - 1 {
            probe::region(RECON.at_level(lv[i]));
            for q in 0..3 {
                let v = vars[q];
                slope[q][i] = minmod(v[i] - v[i - 1], v[i + 1] - v[i], k.zero);
            }
        }
        // interface i lies between cells i and i + 1. Each cell sees its
        // faces at its own level, so an interface between two levels is
        // evaluated once per side, as separately executed blocks would.
        let face = |i: usize, level: u32| {
            probe::region(RECON.at_level(level));
            let mut ul = [k.zero; 3];
            let mut ur = [k.zero; 3];
            for q in 0..3 {
                ul[q] = vars[q][i] + k.half * slope[q][i];
                ur[q] = vars[q][i + 1] - k.half * slope[q][i + 1];
            }
            probe::region(RIEMANN.at_level(level));
            let l = side(ul, k);
            let r = side(ur, k);
            hll(&l, &r, k)
        };
        let mut right_face = vec![[k.zero; 3]; total];
        let mut left_face = vec![[k.zero; 3]; total];
        for i in GHOSTS - 1..n + GHOSTS {
            right_face[i] = face(i, lv[i]);
            left_face[i + 1] = if lv[i + 1] == lv[i] { right_face[i] } else { face(i, lv[i + 1]) };
        }
        let mut div = [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        for j in GHOSTS..n + GHOSTS {
            probe::region(UPDATE.at_level(lv[j]));
            for q in 0..3 {
                div[q].push(right_face[j][q] - left_face[j][q]);
            }
        }
        div
    }

    fn step<S: Scalar>(&self, st: &mut State<S>, dt: f64, k: &Consts<S>) {
        let n = self.cells;
        let dtdx = S::lit(dt / self.dx());
        let lv = self.levels_of(st);

        let d0 = self.flux_divergence(st, &lv, k);
        let mut s1 = State { rho: st.rho.clone(), mom: st.mom.clone(), ene: st.ene.clone() };
        for j in 0..n {
            let c = j + GHOSTS;
            probe::region(UPDATE.at_level(lv[c]));
            s1.rho[c] = st.rho[c] - dtdx * d0[0][j];
            s1.mom[c] = st.mom[c] - dtdx * d0[1][j];
            s1.ene[c] = st.ene[c] - dtdx * d0[2][j];
        }
        s1.fill_ghosts();

        let d1 = self.flux_divergence(&s1, &lv, k);
        for j in 0..n {
            let c = j + GHOSTS;
            probe::region(UPDATE.at_level(lv[c]));
            st.rho[c] = k.half * (st.rho[c] + (s1.rho[c] - dtdx * d1[0][j]));
            st.mom[c] = k.half * (st.mom[c] + (s1.mom[c] - dtdx * d1[1][j]));
            st.ene[c] = k.half * (st.ene[c] + (s1.ene[c] - dtdx * d1[2][j]));
            probe::bytes(BYTES_PER_CELL_STEP);
        }
        st.fill_ghosts();
    }

    fn max_signal_speed<S: Scalar>(&self, st: &State<S>) -> f64 {
        let mut smax = 0.0f64;
        for i in 0..st.rho.len() {
            let (rho, mom, ene) = (st.rho[i].value(), st.mom[i].value(), st.ene[i].value());
            let u = mom / rho;
            let p = (GAMMA - 1.0) * (ene - 0.5 * mom * u);
            smax = smax.max(u.abs() + (GAMMA * p / rho).max(0.0).sqrt());
        }
        smax
    }

    /// Density after `t_end`, run in `S` arithmetic.
    pub fn simulate<S: Scalar>(&self) -> Output {
        let n = self.cells;
        let total = n + 2 * GHOSTS;
        let k = Consts { zero: S::lit(0.0), half: S::lit(0.5), gamma: S::lit(GAMMA), gm1: S::lit(GAMMA - 1.0) };
        let mut st = State { rho: Vec::with_capacity(total), mom: Vec::with_capacity(total), ene: Vec::with_capacity(total) };
        for i in 0..total {
            let x = (i as f64 - GHOSTS as f64 + 0.5) * self.dx();
            let (rho, p) = if x < 0.5 { (1.0, 1.0) } else { (0.125, 0.1) };
            st.rho.push(S::lit(rho));
            st.mom.push(S::lit(0.0));
            st.ene.push(S::lit(p / (GAMMA - 1.0)));
        }

        let prev = probe::region(RegionTag::UNTAGGED);
        let mut diverged = false;
        if self.fixed_dt {
            let (dt, steps) = self.fixed_step();
            for _ in 0..steps {
                self.step(&mut st, dt, &k);
                S::collect(&[&st.rho, &st.mom, &st.ene]);
                if !st.finite() {
                    diverged = true;
                    break;
                }
            }
        } else {
            let mut t = 0.0;
            while t < self.t_end {
                let smax = self.max_signal_speed(&st);
                if !(smax.is_finite() && smax > 0.0) {
                    diverged = true;
                    break;
                }
                let dt = (self.cfl * self.dx() / smax).min(self.t_end - t);
                self.step(&mut st, dt, &k);
                S::collect(&[&st.rho, &st.mom, &st.ene]);
                t += dt;
                if !st.finite() {
                    diverged = true;
                    break;
                }
            }
        }
        probe::region(prev);

        let field = if diverged {
            vec![f64::NAN; n]
        } else {
            st.rho[GHOSTS..n + GHOSTS].iter().map(|x| x.value()).collect()
        };
        Output { field, diverged }
    }
}

impl Workload for SodConfig {
    fn name(&self) -> &'static str {
        "sod"
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
