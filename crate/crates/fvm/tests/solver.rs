//! End-to-end runs on the task runtime, checked bit for bit against the
//! sequential reference integrator.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use fvm::solver::{self, output, snapshot_path, OutputConfig, RunConfig};
use fvm::{reference, Domain, Euler, FvmError, Spray};
use taskrt::{Machine, SchedulerKind};

fn bits(data: &[f64]) -> Vec<u64> {
    data.iter().map(|x| x.to_bits()).collect()
}

fn temp_prefix(tag: &str) -> PathBuf {
    std::env::temp_dir()
        .join(format!("fvm-{tag}-{}", std::process::id()))
        .join("state")
}

fn cleanup(prefix: &Path) {
    if let Some(dir) = prefix.parent() {
        let _ = std::fs::remove_dir_all(dir);
    }
}

#[test]
fn task_runs_match_the_reference_bitwise_for_every_layout() {
    let sys = Arc::new(Euler::cosine());
    let (nx, ny, dt, steps) = (32, 32, 1.0 / 256.0, 10);
    let (expected, _) = reference::integrate(&*sys, &Domain::unit(nx, ny), dt, steps).unwrap();

    for (npx, npy) in [(1, 1), (2, 2), (4, 2)] {
        for workers in [1, 3] {
            for sched in [SchedulerKind::Eager, SchedulerKind::Dmda] {
                let cfg = RunConfig::new(nx, ny, npx, npy, dt, steps);
                let out = solver::run(
                    sys.clone(),
                    Machine::homogeneous(workers),
                    sched,
                    &cfg,
                    None,
                )
                .unwrap();
                assert_eq!(
                    bits(out.field.data()),
                    bits(expected.data()),
                    "diverged for {npx}x{npy} partition, {workers} workers, {sched}"
                );
                assert_eq!(out.t_final, dt * steps as f64);
            }
        }
    }
}

#[test]
fn spray_runs_match_the_reference_and_keep_decaying_moments() {
    let sys = Arc::new(Spray::new(0.5, 0.8));
    let (nx, ny, dt, steps) = (16, 16, 1.0 / 32.0, 8);
    let domain = Domain::unit(nx, ny);
    let (expected, _) = reference::integrate(&*sys, &domain, dt, steps).unwrap();

    let cfg = RunConfig::new(nx, ny, 2, 2, dt, steps);
    let out = solver::run(
        sys.clone(),
        Machine::homogeneous(2),
        SchedulerKind::Dmda,
        &cfg,
        None,
    )
    .unwrap();
    assert_eq!(bits(out.field.data()), bits(expected.data()));

    let vol = domain.dx * domain.dy;
    let before = solver::totals(&reference::initial_field(&*sys, &domain), vol);
    let after = solver::totals(&out.field, vol);
    assert!(after[0] > 0.0 && after[0] < before[0], "m0 must decay");
}

#[test]
fn cfl_violations_surface_as_failed_tasks() {
    let sys = Arc::new(Euler::cosine());
    let cfg = RunConfig::new(16, 16, 2, 2, 1.0, 2);
    let err = solver::run(
        sys,
        Machine::homogeneous(2),
        SchedulerKind::Eager,
        &cfg,
        None,
    )
    .unwrap_err();
    assert!(matches!(err, FvmError::Run(_)), "got {err:?}");
    let msg = err.to_string();
    assert!(msg.contains("CFL"), "message should cite CFL: {msg}");
    assert!(msg.contains("subdomain"), "message should locate it: {msg}");
}

#[test]
fn undersized_subdomains_are_rejected_up_front() {
    let sys = Arc::new(Euler::cosine());
    let cfg = RunConfig::new(8, 8, 8, 1, 1.0 / 64.0, 1);
    let err = solver::run(
        sys,
        Machine::homogeneous(1),
        SchedulerKind::Eager,
        &cfg,
        None,
    )
    .unwrap_err();
    assert!(matches!(err, FvmError::SubdomainTooSmall { .. }), "got {err:?}");
}

#[test]
fn snapshots_record_intermediate_states_bitwise() {
    let sys = Arc::new(Euler::cosine());
    let (nx, ny, dt, steps) = (16, 16, 1.0 / 128.0, 8);
    let domain = Domain::unit(nx, ny);
    let prefix = temp_prefix("snapshots");

    let mut cfg = RunConfig::new(nx, ny, 2, 2, dt, steps);
    cfg.output = Some(OutputConfig {
        prefix: prefix.clone(),
        every: 4,
    });
    let out = solver::run(
        sys.clone(),
        Machine::homogeneous(2),
        SchedulerKind::Dmda,
        &cfg,
        None,
    )
    .unwrap();

    let (first, t0) = output::read_field(&snapshot_path(&prefix, 0)).unwrap();
    assert_eq!(t0, 0.0);
    assert_eq!(
        bits(first.data()),
        bits(reference::initial_field(&*sys, &domain).data())
    );

    let (mid, t4) = output::read_field(&snapshot_path(&prefix, 4)).unwrap();
    assert_eq!(t4, 4.0 * dt);
    let (expected_mid, _) = reference::integrate(&*sys, &domain, dt, 4).unwrap();
    assert_eq!(bits(mid.data()), bits(expected_mid.data()));

    let (last, t8) = output::read_field(&snapshot_path(&prefix, 8)).unwrap();
    assert_eq!(t8, 8.0 * dt);
    assert_eq!(bits(last.data()), bits(out.field.data()));

    cleanup(&prefix);
}

#[test]
fn run_reports_pass_the_runtime_verifier() {
    let sys = Arc::new(Euler::cosine());
    let prefix = temp_prefix("verified");

    for sched in [SchedulerKind::Eager, SchedulerKind::Dmda] {
        let mut cfg = RunConfig::new(16, 16, 2, 2, 1.0 / 128.0, 5);
        cfg.output = Some(OutputConfig {
            prefix: prefix.clone(),
            every: 3,
        });
        let out = solver::run(sys.clone(), Machine::homogeneous(2), sched, &cfg, None).unwrap();
        taskrt::verify::check_report(&out.report).unwrap();
        assert_eq!(out.report.n_tasks as usize, out.report.tasks.len());
    }

    cleanup(&prefix);
}
