//! Task-granularity microbenchmark: independent busy-wait tasks of known
//! duration, swept over durations and worker counts. Efficiency compares the
//! ideal makespan (work / workers) with the measured one.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use taskrt::{Codelet, Engine, Machine, RunError, SchedulerKind, TaskArg};

#[derive(Clone, Debug)]
pub struct OverheadSpec {
    pub durations_us: Vec<u64>,
    pub workers: Vec<usize>,
    pub tasks: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct OverheadRow {
    pub duration_us: u64,
    pub workers: usize,
    pub wall_s: f64,
    pub efficiency: f64,
}

pub const OVERHEAD_HEADER: &str = "duration_us,workers,walltime,efficiency";

#[derive(Debug, thiserror::Error)]
pub enum OverheadError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Runtime(#[from] taskrt::RuntimeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Spins on the monotonic clock: sleeping would distort sub-millisecond
/// durations.
fn busy_wait(duration: Duration) {
    let start = Instant::now();
    while start.elapsed() < duration {
        std::hint::spin_loop();
    }
}

pub fn run_overhead(
    spec: &OverheadSpec,
    out: &mut dyn Write,
) -> Result<Vec<OverheadRow>, OverheadError> {
    let mut rows = Vec::new();
    for &duration_us in &spec.durations_us {
        for &workers in &spec.workers {
            let engine = Engine::new(Machine::homogeneous(workers), SchedulerKind::Eager);
            let codelet = engine.register_codelet(Codelet::new("busyWait", &[]).kernel(
                move |scope| {
                    busy_wait(Duration::from_micros(*scope.arg::<u64>()));
                    Ok(())
                },
            ))?;
            for _ in 0..spec.tasks {
                engine.submit_with(codelet, &[], None, Some(Arc::new(duration_us) as TaskArg))?;
            }
            engine.wait_idle()?;
            let report = engine.finish()?;

            let first = report.tasks.iter().map(|t| t.start_us).min().unwrap_or(0);
            let last = report.tasks.iter().map(|t| t.end_us).max().unwrap_or(0);
            let makespan_us = (last - first).max(1);
            let ideal_us = spec.tasks as f64 * duration_us as f64 / workers as f64;
            let row = OverheadRow {
                duration_us,
                workers,
                wall_s: makespan_us as f64 / 1e6,
                efficiency: ideal_us / makespan_us as f64,
            };
            writeln!(
                out,
                "{},{},{:.6},{:.4}",
                row.duration_us, row.workers, row.wall_s, row.efficiency
            )?;
            rows.push(row);
        }
    }
    Ok(rows)
}
