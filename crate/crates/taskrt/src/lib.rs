//! Shared-memory task runtime with implicit dependency inference.
//!
//! Tasks declare ordered accesses (read, write, read-write) on registered data
//! handles. The runtime derives the dependency graph from those declarations
//! alone: a writer waits for the latest readers and the latest writer of each
//! of its handles, a reader waits for the latest writer. Ready tasks are
//! dispatched to a pool of worker threads grouped into device classes, under
//! one of two policies: `eager` (central FIFO) or `dmda` (completion-time
//! model using per-codelet timing history and transfer costs).
//!
//! Device classes other than the reference class are virtual: a worker runs
//! the kernel on the host and pads its wall-clock duration according to the
//! class speed factor, so traces and makespans behave like a heterogeneous
//! machine while results stay identical.

pub mod buffer;
pub mod codelet;
pub mod engine;
pub mod error;
pub mod machine;
pub mod perf;
pub mod sched;
pub mod trace;
pub mod verify;

pub use buffer::{Block, BlockDesc, BlockMut};
pub use codelet::{AccessMode, Codelet, KernelError, KernelErrorKind};
pub use engine::{
    CodeletId, Engine, EngineConfig, HandleId, HandleInfo, HandleState, KernelScope,
    RecordMode, RunReport, TaskArg, TaskId, TaskRecord, TaskState, TaskTag, WorkerStats,
};
pub use error::{RunError, RuntimeError};
pub use machine::{ClassId, DeviceClass, Machine, WorkerId};
pub use perf::PerfModel;
pub use sched::SchedulerKind;
pub use trace::TraceEvent;
