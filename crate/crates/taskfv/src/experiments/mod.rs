//! Experiment harnesses. Each takes a spec, runs the sweep sequentially
//! (the runtime parallelizes internally), writes CSV rows to the given
//! writer, and returns the measured rows for programmatic checks.

mod converge;
mod overhead;
mod scale;
mod spray;

pub use converge::{
    fit_log_slope, run_converge, ConvergeOutcome, ConvergeRow, ConvergeSpec, CONVERGE_HEADER,
};
pub use overhead::{run_overhead, OverheadError, OverheadRow, OverheadSpec, OVERHEAD_HEADER};
pub use scale::{run_scale, split_parts, ScaleRow, ScaleSpec, SCALE_HEADER};
pub use spray::{
    run_spray_sched, source_share_on, SprayMode, SprayRow, SpraySchedSpec, ACCEL_CLASS,
    SPRAY_HEADER,
};
