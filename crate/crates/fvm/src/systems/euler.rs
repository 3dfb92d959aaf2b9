//! Compressible Euler equations with two smooth periodic test cases.
//!
//! Conserved variables are `(rho, rho*u, rho*v, E)` with
//! `E = p / (gamma - 1) + rho*(u^2 + v^2)/2`.
//!
//! Both cases ride on a uniform background advection `(1, 1)`, so the exact
//! solution at time `t` is the initial data shifted by `t` with periodic
//! wrap:
//!
//! * `Cosine`: a smooth density bump in uniform velocity and pressure. A
//!   contact structure; it is transported unchanged.
//! * `Vortex`: an isentropic vortex in radial-pressure equilibrium; the
//!   profile is steady in the co-moving frame.

use super::{wrap_unit, Axis, NonPhysical, System};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EulerCase {
    Cosine,
    Vortex,
}

/// Ideal-gas Euler system.
#[derive(Clone, Debug)]
pub struct Euler {
    gamma: f64,
    case: EulerCase,
}

/// Radius of the vortex core.
const VORTEX_RADIUS: f64 = 0.1;

impl Euler {
    pub fn new(case: EulerCase) -> Self {
        Self { gamma: 1.4, case }
    }

    pub fn cosine() -> Self {
        Self::new(EulerCase::Cosine)
    }

    pub fn vortex() -> Self {
        Self::new(EulerCase::Vortex)
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn case(&self) -> EulerCase {
        self.case
    }

    /// Conserved state from primitive variables.
    pub fn conserved(&self, rho: f64, u: f64, v: f64, p: f64) -> [f64; 4] {
        [
            rho,
            rho * u,
            rho * v,
            p / (self.gamma - 1.0) + 0.5 * rho * (u * u + v * v),
        ]
    }

    /// Pressure of a conserved state, validating positivity of density and
    /// pressure on the way.
    pub fn pressure(&self, w: &[f64]) -> Result<f64, NonPhysical> {
        let rho = w[0];
        if rho.is_nan() || rho <= 0.0 {
            return Err(NonPhysical::new(format!("non-positive density {rho}")));
        }
        let u = w[1] / rho;
        let v = w[2] / rho;
        let p = (self.gamma - 1.0) * (w[3] - 0.5 * rho * (u * u + v * v));
        if p.is_nan() || p <= 0.0 {
            return Err(NonPhysical::new(format!("non-positive pressure {p}")));
        }
        Ok(p)
    }

    /// Initial primitive state of the active case at (`x`, `y`).
    fn primitives(&self, x: f64, y: f64) -> (f64, f64, f64, f64) {
        match self.case {
            EulerCase::Cosine => {
                let r = ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5)).sqrt();
                let rho = if r < 0.25 {
                    1.0 + 0.5 * (1.0 + (4.0 * std::f64::consts::PI * r).cos())
                } else {
                    1.0
                };
                (rho, 1.0, 1.0, 1.0 / self.gamma)
            }
            EulerCase::Vortex => {
                let rx = (x - 0.5) / VORTEX_RADIUS;
                let ry = (y - 0.5) / VORTEX_RADIUS;
                let omega = (-0.5 * (rx * rx + ry * ry)).exp();
                let rho = (1.0 - 0.5 * (self.gamma - 1.0) * omega * omega)
                    .powf(1.0 / (self.gamma - 1.0));
                let u = 1.0 - ry * omega;
                let v = 1.0 + rx * omega;
                let p = rho.powf(self.gamma) / self.gamma;
                (rho, u, v, p)
            }
        }
    }
}

impl System for Euler {
    fn n_vars(&self) -> usize {
        4
    }

    fn name(&self) -> &'static str {
        match self.case {
            EulerCase::Cosine => "euler-cosine",
            EulerCase::Vortex => "euler-vortex",
        }
    }

    fn flux(&self, w: &[f64], axis: Axis, out: &mut [f64]) -> Result<(), NonPhysical> {
        let p = self.pressure(w)?;
        let rho = w[0];
        let u = w[1] / rho;
        let v = w[2] / rho;
        match axis {
            Axis::X => {
                out[0] = w[1];
                out[1] = w[1] * u + p;
                out[2] = w[1] * v;
                out[3] = u * (w[3] + p);
            }
            Axis::Y => {
                out[0] = w[2];
                out[1] = w[2] * u;
                out[2] = w[2] * v + p;
                out[3] = v * (w[3] + p);
            }
        }
        Ok(())
    }

    fn max_abs_eigenvalue(&self, w: &[f64], axis: Axis) -> Result<f64, NonPhysical> {
        let p = self.pressure(w)?;
        let rho = w[0];
        let un = match axis {
            Axis::X => w[1] / rho,
            Axis::Y => w[2] / rho,
        };
        Ok(un.abs() + (self.gamma * p / rho).sqrt())
    }

    fn initial(&self, x: f64, y: f64, out: &mut [f64]) {
        let (rho, u, v, p) = self.primitives(x, y);
        out.copy_from_slice(&self.conserved(rho, u, v, p));
    }

    fn exact(&self, x: f64, y: f64, t: f64, out: &mut [f64]) -> bool {
        self.initial(wrap_unit(x - t), wrap_unit(y - t), out);
        true
    }
}
