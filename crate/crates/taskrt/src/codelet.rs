//! Codelets: named kernel families with declared handle access modes.

use std::sync::Arc;

use crate::engine::KernelScope;
use crate::machine::ClassId;

/// How a task uses one handle slot. Order of declaration is the order in
/// which the submitting task supplies handles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AccessMode {
    Read,
    Write,
    ReadWrite,
}

impl AccessMode {
    pub fn reads(self) -> bool {
        matches!(self, AccessMode::Read | AccessMode::ReadWrite)
    }

    pub fn writes(self) -> bool {
        matches!(self, AccessMode::Write | AccessMode::ReadWrite)
    }
}

/// Classifies a kernel failure so callers can map it to the right exit path:
/// numerical errors (CFL violations, non-realizable moments) versus I/O.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelErrorKind {
    Numerical,
    Io,
}

/// Error returned by a kernel. It aborts the drain: no further tasks are
/// dispatched, running tasks finish, and the error is surfaced to the caller.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{message}")]
pub struct KernelError {
    pub kind: KernelErrorKind,
    pub message: String,
}

impl KernelError {
    pub fn numerical(message: impl Into<String>) -> Self {
        Self {
            kind: KernelErrorKind::Numerical,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            kind: KernelErrorKind::Io,
            message: message.into(),
        }
    }
}

pub type KernelFn = dyn Fn(&mut KernelScope<'_>) -> Result<(), KernelError> + Send + Sync;

/// A named task family: fixed arity and access modes, one kernel per device
/// class (or one shared by all classes), and a perf-model key.
pub struct Codelet {
    pub name: String,
    pub modes: Vec<AccessMode>,
    pub perf_key: String,
    pub(crate) universal: Option<Arc<KernelFn>>,
    pub(crate) per_class: Vec<(ClassId, Arc<KernelFn>)>,
}

impl Codelet {
    pub fn new(name: impl Into<String>, modes: &[AccessMode]) -> Self {
        let name = name.into();
        Self {
            perf_key: name.clone(),
            name,
            modes: modes.to_vec(),
            universal: None,
            per_class: Vec::new(),
        }
    }

    pub fn perf_key(mut self, key: impl Into<String>) -> Self {
        self.perf_key = key.into();
        self
    }

    /// Register one kernel used by every device class.
    pub fn kernel<F>(mut self, f: F) -> Self
    where
        F: Fn(&mut KernelScope<'_>) -> Result<(), KernelError> + Send + Sync + 'static,
    {
        self.universal = Some(Arc::new(f));
        self
    }

    /// Register a kernel for one class, overriding the universal one.
    pub fn kernel_for<F>(mut self, class: ClassId, f: F) -> Self
    where
        F: Fn(&mut KernelScope<'_>) -> Result<(), KernelError> + Send + Sync + 'static,
    {
        self.per_class.push((class, Arc::new(f)));
        self
    }

    pub fn arity(&self) -> usize {
        self.modes.len()
    }
}
