//! Strong-scaling study: fixed problem, sweep worker counts and partition
//! counts, report speedup against one worker per partitioning.

use std::io::Write;

use fvm::solver::{self, RunConfig};
use fvm::{Euler, FvmError};
use taskrt::{Machine, RecordMode, SchedulerKind};

#[derive(Clone, Debug)]
pub struct ScaleSpec {
    pub nx: usize,
    pub iters: u64,
    pub nparts: Vec<usize>,
    pub workers: Vec<usize>,
    pub sched: SchedulerKind,
}

#[derive(Clone, Copy, Debug)]
pub struct ScaleRow {
    pub workers: usize,
    pub nparts: usize,
    pub wall_s: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

pub const SCALE_HEADER: &str = "workers,nparts,walltime,speedup,efficiency";

/// Splits a partition count into per-axis factors, as square as possible.
pub fn split_parts(nparts: usize) -> (usize, usize) {
    assert!(nparts > 0);
    let mut npx = 1;
    for d in 1..=nparts.isqrt() {
        if nparts.is_multiple_of(d) {
            npx = d;
        }
    }
    (npx, nparts / npx)
}

pub fn run_scale(spec: &ScaleSpec, out: &mut dyn Write) -> Result<Vec<ScaleRow>, FvmError> {
    let mut workers = spec.workers.clone();
    workers.sort_unstable();
    workers.dedup();
    if workers.first() != Some(&1) {
        workers.insert(0, 1);
    }

    let mut rows = Vec::new();
    for &nparts in &spec.nparts {
        let (npx, npy) = split_parts(nparts);
        let mut base_wall = f64::NAN;
        for &w in &workers {
            let dt = 1.0 / (8.0 * spec.nx as f64);
            let mut cfg = RunConfig::new(spec.nx, spec.nx, npx, npy, dt, spec.iters);
            cfg.record = RecordMode::Summary;
            let outcome = solver::run(
                std::sync::Arc::new(Euler::cosine()),
                Machine::homogeneous(w),
                spec.sched,
                &cfg,
                None,
            )?;
            let wall_s = outcome.report.wall_us as f64 / 1e6;
            if w == 1 {
                base_wall = wall_s;
            }
            let speedup = base_wall / wall_s;
            let row = ScaleRow {
                workers: w,
                nparts,
                wall_s,
                speedup,
                efficiency: speedup / w as f64,
            };
            writeln!(
                out,
                "{},{},{:.6},{:.4},{:.4}",
                row.workers, row.nparts, row.wall_s, row.speedup, row.efficiency
            )?;
            rows.push(row);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_splits_stay_square_for_powers_of_two() {
        assert_eq!(split_parts(1), (1, 1));
        assert_eq!(split_parts(2), (1, 2));
        assert_eq!(split_parts(64), (8, 8));
        assert_eq!(split_parts(4096), (64, 64));
        assert_eq!(split_parts(12), (3, 4));
    }
}
