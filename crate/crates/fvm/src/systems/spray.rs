//! Six-moment spray model: droplet size moments advected by their own mean
//! velocity, evaporating at a constant surface rate and dragged toward a
//! steady Taylor-Green gas flow.
//!
//! Conserved variables are `(m0, m1, m2, m3, m2*u, m2*v)` where `m_j` is the
//! moment of order `j/2` of the droplet surface NDF on [0, 1] and `(u, v)`
//! is the mean droplet velocity carried by the `m2` moment. Transport moves
//! every moment with `(u, v)`; the source step closes evaporation with the
//! reconstructed NDF (which supplies the boundary flux `n(0)` and the
//! order -1/2 moment) and relaxes the velocity toward the gas with time
//! scale `theta / m0 * m2`.

use super::ndf::{realizability_violation, reconstruct_ndf};
use super::{Axis, NonPhysical, System};
use crate::grid::{Cells, Field};
use crate::mesh::Domain;

/// Fraction of the smallest initial `m3 / m1` ratio that one evaporation
/// step may consume before the run is considered under-resolved.
const STIFFNESS_MARGIN: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct Spray {
    /// Evaporation rate `K` (surface shrink per unit time).
    evap_rate: f64,
    /// Drag relaxation time scale `theta`.
    drag_theta: f64,
}

impl Spray {
    pub fn new(evap_rate: f64, drag_theta: f64) -> Self {
        Self {
            evap_rate,
            drag_theta,
        }
    }

    pub fn evap_rate(&self) -> f64 {
        self.evap_rate
    }

    pub fn drag_theta(&self) -> f64 {
        self.drag_theta
    }

    fn velocity(&self, w: &[f64]) -> Result<(f64, f64), NonPhysical> {
        let m2 = w[2];
        if m2.is_nan() || m2 <= 0.0 {
            return Err(NonPhysical::new(format!(
                "non-positive momentum-carrying moment m2 = {m2}"
            )));
        }
        Ok((w[4] / m2, w[5] / m2))
    }
}

/// Steady Taylor-Green gas velocity on the unit square.
pub fn taylor_green(x: f64, y: f64) -> (f64, f64) {
    let tx = 2.0 * std::f64::consts::PI * x;
    let ty = 2.0 * std::f64::consts::PI * y;
    (tx.sin() * ty.cos(), -(tx.cos() * ty.sin()))
}

impl System for Spray {
    fn n_vars(&self) -> usize {
        6
    }

    fn name(&self) -> &'static str {
        "spray"
    }

    fn flux(&self, w: &[f64], axis: Axis, out: &mut [f64]) -> Result<(), NonPhysical> {
        let (u, v) = self.velocity(w)?;
        let un = match axis {
            Axis::X => u,
            Axis::Y => v,
        };
        for (o, &q) in out.iter_mut().zip(w) {
            *o = q * un;
        }
        Ok(())
    }

    fn max_abs_eigenvalue(&self, w: &[f64], axis: Axis) -> Result<f64, NonPhysical> {
        let (u, v) = self.velocity(w)?;
        Ok(match axis {
            Axis::X => u.abs(),
            Axis::Y => v.abs(),
        })
    }

    fn has_source(&self) -> bool {
        true
    }

    fn source(&self, w: &[f64], x: f64, y: f64, out: &mut [f64]) -> Result<(), NonPhysical> {
        let moments = [w[0], w[1], w[2], w[3]];
        if let Some(violation) = realizability_violation(&moments) {
            return Err(NonPhysical::new(format!(
                "moment vector left the realizable set: {violation}"
            )));
        }
        let k = self.evap_rate;
        if k > 0.0 {
            let fit = reconstruct_ndf(&moments).map_err(|e| NonPhysical::new(e.to_string()))?;
            out[0] = -k * fit.n0;
            out[1] = -0.5 * k * fit.m_neg_half;
            out[2] = -k * moments[0];
            out[3] = -1.5 * k * moments[1];
        } else {
            out[..4].fill(0.0);
        }
        let (u, v) = self.velocity(w)?;
        let (ug, vg) = taylor_green(x, y);
        out[4] = -k * moments[0] * u + moments[0] * (ug - u) / self.drag_theta;
        out[5] = -k * moments[0] * v + moments[0] * (vg - v) / self.drag_theta;
        Ok(())
    }

    fn initial(&self, x: f64, y: f64, out: &mut [f64]) {
        let c = 1.0
            + 0.25
                * (2.0 * std::f64::consts::PI * x).cos()
                * (2.0 * std::f64::consts::PI * y).cos();
        let (u, v) = taylor_green(x, y);
        out[0] = c;
        out[1] = c * (2.0 / 3.0);
        out[2] = c * 0.5;
        out[3] = c * 0.4;
        out[4] = out[2] * u;
        out[5] = out[2] * v;
    }

    fn startup_check(&self, initial: &Field, domain: &Domain, dt: f64) -> Result<(), NonPhysical> {
        let mut min_ratio = f64::INFINITY;
        for j in 0..domain.ny {
            for i in 0..domain.nx {
                let w = initial.cell(i, j);
                if let Some(violation) = realizability_violation(&[w[0], w[1], w[2], w[3]]) {
                    return Err(NonPhysical::new(format!(
                        "initial moments at cell ({i}, {j}) are not realizable: {violation}"
                    )));
                }
                min_ratio = min_ratio.min(w[3] / w[1]);
            }
        }
        let budget = STIFFNESS_MARGIN * min_ratio;
        if dt * self.evap_rate > budget {
            return Err(NonPhysical::new(format!(
                "evaporation step dt*K = {:.3e} exceeds the stiffness budget {:.3e} \
                 (= {STIFFNESS_MARGIN} * min m3/m1)",
                dt * self.evap_rate,
                budget
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellsMut;
    use approx::assert_relative_eq;

    #[test]
    fn source_matches_a_hand_computed_flat_state() {
        // Flat NDF scaled to m0 = 1 with velocity (0.1, -0.2), K = 1 and no
        // drag: every size moment loses exactly 1 per unit time and the
        // momenta follow the evaporation of m2.
        let sys = Spray::new(1.0, f64::INFINITY);
        let w = [1.0, 2.0 / 3.0, 0.5, 0.4, 0.05, -0.1];
        let mut src = [0.0; 6];
        sys.source(&w, 0.3, 0.7, &mut src).unwrap();
        for s in &src[..4] {
            assert_relative_eq!(*s, -1.0, max_relative = 1e-10);
        }
        assert_relative_eq!(src[4], -0.1, max_relative = 1e-10);
        assert_relative_eq!(src[5], 0.2, max_relative = 1e-10);
    }

    #[test]
    fn drag_relaxes_velocity_toward_the_gas() {
        // Without evaporation the exact velocity is
        // u(t) = ug + (u0 - ug) * exp(-m0 * t / (m2 * theta)).
        let theta = 0.8;
        let sys = Spray::new(0.0, theta);
        let (x, y) = (0.37, 0.81);
        let (ug, vg) = taylor_green(x, y);
        let mut w = [1.0, 2.0 / 3.0, 0.5, 0.4, 0.5 * 0.3, 0.5 * (-0.4)];
        let dt = 1e-4;
        let steps = 2000;
        let mut src = [0.0; 6];
        for _ in 0..steps {
            sys.source(&w, x, y, &mut src).unwrap();
            for (q, s) in w.iter_mut().zip(&src) {
                *q += dt * s;
            }
        }
        let t = dt * steps as f64;
        let decay = (-1.0 / (0.5 * theta) * t).exp();
        let expect_u = ug + (0.3 - ug) * decay;
        let expect_v = vg + (-0.4 - vg) * decay;
        assert_relative_eq!(w[4] / w[2], expect_u, max_relative = 1e-3);
        assert_relative_eq!(w[5] / w[2], expect_v, max_relative = 1e-3);
    }

    #[test]
    fn initial_field_is_realizable_and_divergence_of_gas_flow_vanishes() {
        let sys = Spray::new(1.0, 1.0);
        let mut w = [0.0; 6];
        for (x, y) in [(0.1, 0.2), (0.5, 0.5), (0.93, 0.08)] {
            sys.initial(x, y, &mut w);
            assert!(realizability_violation(&w[..4]).is_none());
        }
        // Central finite differences of the gas field are divergence-free.
        let h = 1e-5;
        for (x, y) in [(0.3, 0.4), (0.71, 0.13)] {
            let dudx = (taylor_green(x + h, y).0 - taylor_green(x - h, y).0) / (2.0 * h);
            let dvdy = (taylor_green(x, y + h).1 - taylor_green(x, y - h).1) / (2.0 * h);
            assert!((dudx + dvdy).abs() < 1e-6);
        }
    }

    #[test]
    fn startup_check_flags_oversized_evaporation_steps() {
        let sys = Spray::new(1.0, 1.0);
        let domain = Domain::unit(8, 8);
        let mut init = Field::zeros(8, 8, 6);
        for j in 0..8 {
            for i in 0..8 {
                let (x, y) = domain.cell_center(i, j);
                let mut w = [0.0; 6];
                sys.initial(x, y, &mut w);
                init.cell_mut(i, j).copy_from_slice(&w);
            }
        }
        // m3/m1 = 0.6 everywhere initially, so the budget is 0.06.
        assert!(sys.startup_check(&init, &domain, 0.05).is_ok());
        assert!(sys.startup_check(&init, &domain, 0.07).is_err());
    }
}
