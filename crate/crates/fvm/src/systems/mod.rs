//! Conservation-law systems: physical fluxes, wave speeds, initial data, and
//! optional source terms and exact solutions.

mod euler;
pub mod ndf;
pub mod quad;
mod spray;

pub use euler::{Euler, EulerCase};
pub use spray::Spray;

use thiserror::Error;

use crate::grid::Field;
use crate::mesh::Domain;

/// Coordinate axis of a flux or wave-speed evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// A state left the physically meaningful set (negative density, vanished
/// pressure, unrealizable moments, ...).
#[derive(Clone, Debug, Error)]
#[error("{message}")]
pub struct NonPhysical {
    pub message: String,
}

impl NonPhysical {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
        }
    }
}

/// A system of conservation laws in two space dimensions.
///
/// States are vectors of `n_vars` conserved quantities per cell. All methods
/// must be pure functions of their arguments so that evaluating them from
/// different tasks, workers, or the reference integrator yields identical
/// bits.
pub trait System: Send + Sync {
    fn n_vars(&self) -> usize;

    fn name(&self) -> &'static str;

    /// Physical flux of `w` along `axis`, written into `out`.
    fn flux(&self, w: &[f64], axis: Axis, out: &mut [f64]) -> Result<(), NonPhysical>;

    /// Largest absolute characteristic speed of `w` along `axis`.
    fn max_abs_eigenvalue(&self, w: &[f64], axis: Axis) -> Result<f64, NonPhysical>;

    /// Whether the system contributes a source step after each update.
    fn has_source(&self) -> bool {
        false
    }

    /// Source term at state `w` and cell center (`x`, `y`), written into
    /// `out`. Only called when [`System::has_source`] is true.
    fn source(&self, w: &[f64], x: f64, y: f64, out: &mut [f64]) -> Result<(), NonPhysical> {
        let _ = (w, x, y, out);
        Ok(())
    }

    /// Initial state at the point (`x`, `y`).
    fn initial(&self, x: f64, y: f64, out: &mut [f64]);

    /// Exact solution at time `t`, if the system has one. Returns false and
    /// leaves `out` untouched otherwise.
    fn exact(&self, x: f64, y: f64, t: f64, out: &mut [f64]) -> bool {
        let _ = (x, y, t, out);
        false
    }

    /// Validates the discrete setup against the initial field before any
    /// step runs (stiffness of the source, global state bounds, ...).
    fn startup_check(&self, initial: &Field, domain: &Domain, dt: f64) -> Result<(), NonPhysical> {
        let _ = (initial, domain, dt);
        Ok(())
    }
}

/// Periodic wrap of a coordinate into [0, 1).
///
/// At integer `shift` and dyadic `x` the result is bit-exact, which keeps
/// exact-solution comparisons at whole-period times free of wrap error.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    x - x.floor()
}
