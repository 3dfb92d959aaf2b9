//! Error types for submission-time misuse and drain-time failures.

use crate::codelet::KernelError;
use crate::engine::HandleState;

/// Errors raised synchronously by engine API calls.
#[derive(Debug, thiserror::Error)]
pub enum RuntimeError {
    #[error("codelet {codelet}: task supplies {given} handles, signature declares {expected}")]
    ArityMismatch {
        codelet: String,
        given: usize,
        expected: usize,
    },
    #[error("handle {handle} may not be accessed while in state {state:?}")]
    HandleNotUsable { handle: u32, state: HandleState },
    #[error("unknown handle id {0}")]
    UnknownHandle(u32),
    #[error("unknown codelet id {0}")]
    UnknownCodelet(u32),
    #[error("handle must describe at least one scalar")]
    EmptyHandle,
    #[error("block view ends at scalar {end} but the region holds {len}")]
    ViewOutOfRegion { end: usize, len: usize },
    #[error("handle {0} is not partitioned")]
    NotPartitioned(u32),
    #[error("handle {0} is already partitioned")]
    AlreadyPartitioned(u32),
    #[error("no device class provides a kernel for codelet {0}")]
    NoKernel(String),
    #[error("kernel for codelet {codelet} registered for unknown class {class}")]
    UnknownClass { codelet: String, class: usize },
    #[error("invalid machine: {0}")]
    InvalidMachine(String),
    #[error("handle {0} has in-flight tasks; direct access requires a drained engine")]
    HandleBusy(u32),
    #[error("data length {given} does not match handle window of {expected} scalars")]
    LengthMismatch { given: usize, expected: usize },
    #[error("engine is shut down")]
    ShutDown,
}

/// A failure during execution, reported when draining.
#[derive(Debug, Clone, thiserror::Error)]
pub enum RunError {
    #[error("task {task} ({codelet}) failed: {source}")]
    Kernel {
        task: u32,
        codelet: String,
        #[source]
        source: KernelError,
    },
    #[error("task {task} ({codelet}) panicked: {message}")]
    KernelPanic {
        task: u32,
        codelet: String,
        message: String,
    },
}
