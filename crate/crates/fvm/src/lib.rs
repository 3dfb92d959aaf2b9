//! First-order finite-volume solver for hyperbolic conservation laws on a
//! periodic unit square, expressed as a task graph on the `taskrt` runtime.
//!
//! The domain is split into rectangular subdomains. Each time step is a fixed
//! set of task kinds per subdomain: a time-step check, overlap exchanges with
//! the four periodic neighbours, residual evaluation (interior cells from
//! per-cell flux tables, ring cells against the overlaps), the explicit
//! update, and an optional source step. A dense single-array reference
//! integrator shares the same per-cell primitives, so a task run and the
//! reference produce bitwise-identical states regardless of partitioning,
//! worker count, or scheduler.

pub mod error;
pub mod grid;
pub mod mesh;
pub mod numerics;
pub mod reference;
pub mod solver;
pub mod systems;

pub use error::FvmError;
pub use grid::{Cells, CellsMut, Field};
pub use mesh::{Domain, Partition, Side, Subdomain};
pub use solver::{run, ErrorNorms, RunConfig, RunOutcome};
pub use systems::{Axis, Euler, EulerCase, NonPhysical, Spray, System};
