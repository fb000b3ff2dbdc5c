//! Exact solution of the 1D Riemann problem for an ideal gas.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive {
    pub rho: f64,
    pub u: f64,
    pub p: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ExactRiemann {
    pub left: Primitive,
    pub right: Primitive,
    pub gamma: f64,
    pub p_star: f64,
    pub u_star: f64,
}

impl ExactRiemann {
    pub fn new(left: Primitive, right: Primitive, gamma: f64) -> Self {
        let (p_star, u_star) = star_state(left, right, gamma);
        ExactRiemann { left, right, gamma, p_star, u_star }
    }

    /// State on the ray `s = x / t`.
    pub fn sample(&self, s: f64) -> Primitive {
        let g = self.gamma;
        let (ps, us) = (self.p_star, self.u_star);
        let gm = (g - 1.0) / (g + 1.0);
        if s <= us {
            let Primitive { rho, u, p } = self.left;
            let c = (g * p / rho).sqrt();
            if ps > p {
                let sl = u - c * ((g + 1.0) / (2.0 * g) * ps / p + (g - 1.0) / (2.0 * g)).sqrt();
                if s <= sl {
                    self.left
                } else {
                    let r = rho * (ps / p + gm) / (gm * ps / p + 1.0);
                    Primitive { rho: r, u: us, p: ps }
                }
            } else {
                let head = u - c;
                let cs = c * (ps / p).powf((g - 1.0) / (2.0 * g));
                let tail = us - cs;
                if s <= head {
                    self.left
                } else if s >= tail {
                    Primitive { rho: rho * (ps / p).powf(1.0 / g), u: us, p: ps }
                } else {
                    let k = 2.0 / (g + 1.0) + gm / c * (u - s);
                    let k = k.max(0.0);
                    Primitive {
                        rho: rho * k.powf(2.0 / (g - 1.0)),
                        u: 2.0 / (g + 1.0) * (c + (g - 1.0) / 2.0 * u + s),
                        p: p * k.powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        } else {
            let Primitive { rho, u, p } = self.right;
            let c = (g * p / rho).sqrt();
            if ps > p {
                let sr = u + c * ((g + 1.0) / (2.0 * g) * ps / p + (g - 1.0) / (2.0 * g)).sqrt();
                if s >= sr {
                    self.right
                } else {
                    let r = rho * (ps / p + gm) / (gm * ps / p + 1.0);
                    Primitive { rho: r, u: us, p: ps }
                }
            } else {
                let head = u + c;
                let cs = c * (ps / p).powf((g - 1.0) / (2.0 * g));
                let tail = us + cs;
                if s >= head {
                    self.right
                } else if s <= tail {
                    Primitive { rho: rho * (ps / p).powf(1.0 / g), u: us, p: ps }
                } else {
                    let k = 2.0 / (g + 1.0) - gm / c * (u - s);
                    let k = k.max(0.0);
                    Primitive {
                        rho: rho * k.powf(2.0 / (g - 1.0)),
                        u: 2.0 / (g + 1.0) * (-c + (g - 1.0) / 2.0 * u + s),
                        p: p * k.powf(2.0 * g / (g - 1.0)),
                    }
                }
            }
        }
    }

    /// Cell-center densities on `[0, 1]` with the diaphragm at `x0`.
    pub fn density_profile(&self, cells: usize, x0: f64, t: f64) -> Vec<f64> {
        let dx = 1.0 / cells as f64;
        (0..cells)
            .map(|i| {
                let x = (i as f64 + 0.5) * dx;
                self.sample((x - x0) / t).rho
            })
            .collect()
    }
}

/// Pressure function of one side and its derivative.
fn side(p: f64, s: Primitive, g: f64) -> (f64, f64) {
    let c = (g * s.p / s.rho).sqrt();
    if p > s.p {
        let a = 2.0 / ((g + 1.0) * s.rho);
        let b = (g - 1.0) / (g + 1.0) * s.p;
        let q = (a / (p + b)).sqrt();
        ((p - s.p) * q, q * (1.0 - 0.5 * (p - s.p) / (b + p)))
    } else {
        let e = (g - 1.0) / (2.0 * g);
        let r = p / s.p;
        (2.0 * c / (g - 1.0) * (r.powf(e) - 1.0), r.powf(-(g + 1.0) / (2.0 * g)) / (s.rho * c))
    }
}

fn star_state(l: Primitive, r: Primitive, g: f64) -> (f64, f64) {
    let du = r.u - l.u;
    let mut p = (0.5 * (l.p + r.p)).max(1e-12);
    for _ in 0..100 {
        let (fl, dl) = side(p, l, g);
        let (fr, dr) = side(p, r, g);
        let next = (p - (fl + fr + du) / (dl + dr)).max(1e-14);
        let change = 2.0 * (next - p).abs() / (next + p);
        p = next;
        if change < 1e-15 {
            break;
        }
    }
    let (fl, _) = side(p, l, g);
    let (fr, _) = side(p, r, g);
    (p, 0.5 * (l.u + r.u) + 0.5 * (fr - fl))
}
