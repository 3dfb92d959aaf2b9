//! Error type for mesh construction, solver runs, and field files.

use thiserror::Error;

/// Errors surfaced by the solver crate.
#[derive(Debug, Error)]
pub enum FvmError {
    /// A grid axis cannot be split evenly into the requested parts.
    #[error("axis {axis}: {cells} cells cannot be split into {parts} equal parts")]
    NotDivisible { axis: char, cells: usize, parts: usize },

    /// A subdomain is too small to carry a one-cell overlap ring.
    #[error("subdomain {index} is {nxl}x{nyl} cells; subdomains must be at least 2x2")]
    SubdomainTooSmall { index: usize, nxl: usize, nyl: usize },

    /// The runtime rejected a handle, codelet, or task operation.
    #[error("runtime error: {0}")]
    Runtime(#[from] taskrt::RuntimeError),

    /// A task kernel failed during execution.
    #[error("run failed: {0}")]
    Run(#[from] taskrt::RunError),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    /// A field file did not match the expected layout.
    #[error("bad field file: {0}")]
    Format(String),

    /// A host-side numerical check failed.
    #[error("{0}")]
    Numerics(String),
}
