//! Scheduler comparison on the spray case: the same problem under eager
//! without an accelerator, eager with one, and dmda with one. The dmda run
//! receives a performance model warmed by a short eager run on the same
//! machine so its first placements are already informed.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use fvm::solver::{self, RunConfig};
use fvm::{FvmError, Spray};
use taskrt::{Machine, PerfModel, RunReport, SchedulerKind};

use crate::config::heterogeneous_machine;

#[derive(Clone, Debug)]
pub struct SpraySchedSpec {
    pub nx: usize,
    pub iters: u64,
    pub dt: f64,
    pub partitions: Vec<(usize, usize)>,
    pub cpu_workers: usize,
    pub accel_factor: f64,
    pub evap: f64,
    pub theta: f64,
    pub trace_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SprayMode {
    EagerCpu,
    EagerAccel,
    DmdaAccel,
}

impl SprayMode {
    pub fn label(self) -> &'static str {
        match self {
            SprayMode::EagerCpu => "eager-cpu",
            SprayMode::EagerAccel => "eager-accel",
            SprayMode::DmdaAccel => "dmda-accel",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SprayRow {
    pub npartx: usize,
    pub nparty: usize,
    pub mode: SprayMode,
    pub wall_s: f64,
    /// Fraction of sourceStep executions on the accelerator class.
    pub source_accel_share: f64,
}

pub const SPRAY_HEADER: &str = "npartx,nparty,mode,walltime,source_accel_share";

pub const ACCEL_CLASS: &str = "accel";

/// Fraction of `sourceStep` executions that ran on `class` workers.
pub fn source_share_on(report: &RunReport, class: &str) -> f64 {
    let Some(class_id) = report.machine.class_by_name(class) else {
        return 0.0;
    };
    let mut total = 0u64;
    let mut on_class = 0u64;
    for task in &report.tasks {
        if report.codelet_name(task.codelet) == "sourceStep" {
            total += 1;
            if task.class == class_id {
                on_class += 1;
            }
        }
    }
    if total == 0 {
        0.0
    } else {
        on_class as f64 / total as f64
    }
}

pub fn run_spray_sched(
    spec: &SpraySchedSpec,
    out: &mut dyn Write,
) -> Result<Vec<SprayRow>, FvmError> {
    let mut rows = Vec::new();
    for &(npx, npy) in &spec.partitions {
        for mode in [
            SprayMode::EagerCpu,
            SprayMode::EagerAccel,
            SprayMode::DmdaAccel,
        ] {
            let (machine, sched) = match mode {
                // One extra CPU worker keeps the thread count of the
                // accelerator machines.
                SprayMode::EagerCpu => (
                    Machine::homogeneous(spec.cpu_workers + 1),
                    SchedulerKind::Eager,
                ),
                SprayMode::EagerAccel => (
                    heterogeneous_machine(spec.cpu_workers, ACCEL_CLASS, spec.accel_factor),
                    SchedulerKind::Eager,
                ),
                SprayMode::DmdaAccel => (
                    heterogeneous_machine(spec.cpu_workers, ACCEL_CLASS, spec.accel_factor),
                    SchedulerKind::Dmda,
                ),
            };
            let perf = match mode {
                SprayMode::DmdaAccel => Some(warmup_model(spec, npx, npy)?),
                _ => None,
            };

            let sys = Arc::new(Spray::new(spec.evap, spec.theta));
            let cfg = RunConfig::new(spec.nx, spec.nx, npx, npy, spec.dt, spec.iters);
            let outcome = solver::run(sys, machine, sched, &cfg, perf)?;

            let row = SprayRow {
                npartx: npx,
                nparty: npy,
                mode,
                wall_s: outcome.report.wall_us as f64 / 1e6,
                source_accel_share: source_share_on(&outcome.report, ACCEL_CLASS),
            };
            writeln!(
                out,
                "{},{},{},{:.6},{:.4}",
                row.npartx,
                row.nparty,
                row.mode.label(),
                row.wall_s,
                row.source_accel_share
            )?;

            if let Some(dir) = &spec.trace_dir {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("spray-{npx}x{npy}-{}.trace", mode.label()));
                let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
                outcome.report.write_trace(&mut file)?;
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Measures every codelet on both classes with a short eager run.
fn warmup_model(spec: &SpraySchedSpec, npx: usize, npy: usize) -> Result<PerfModel, FvmError> {
    let sys = Arc::new(Spray::new(spec.evap, spec.theta));
    let machine = heterogeneous_machine(spec.cpu_workers, ACCEL_CLASS, spec.accel_factor);
    let cfg = RunConfig::new(spec.nx, spec.nx, npx, npy, spec.dt, 2);
    let outcome = solver::run(sys, machine, SchedulerKind::Eager, &cfg, None)?;
    Ok(outcome.report.perf)
}
