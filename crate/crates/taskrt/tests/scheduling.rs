//! Scheduler behavior observed through full runs: eager stays FIFO, dmda
//! follows its completion-time model, traces and perf data come out usable.

use std::time::Duration;

use taskrt::{
    AccessMode, BlockDesc, Codelet, DeviceClass, Engine, Machine, PerfModel, SchedulerKind,
};

#[test]
fn eager_dispatch_is_first_come_first_served() {
    let engine = Engine::new(Machine::homogeneous(2), SchedulerKind::Eager);
    let tick = engine
        .register_codelet(Codelet::new("tick", &[]).kernel(|_| {
            std::thread::sleep(Duration::from_micros(200));
            Ok(())
        }))
        .unwrap();
    for _ in 0..40 {
        engine.submit(tick, &[]).unwrap();
    }
    let report = engine.finish().unwrap();
    taskrt::verify::check_report(&report).unwrap();

    // All tasks were ready at submission, so dispatch order must equal
    // submission order outright.
    let mut by_dispatch: Vec<_> = report.tasks.iter().map(|t| (t.dispatch_stamp, t.id)).collect();
    by_dispatch.sort();
    let ids: Vec<_> = by_dispatch.iter().map(|&(_, id)| id).collect();
    let expected: Vec<u32> = (0..40).collect();
    assert_eq!(ids, expected);
}

/// One virtual accelerator that runs "heavy" ten times faster than the cpu
/// worker. With a warmed-up model, dmda keeps every heavy task on the
/// accelerator: even queued behind its running task, the accelerator's
/// estimated completion beats the idle cpu by a wide margin.
#[test]
fn dmda_prefers_the_faster_class_once_the_model_is_warm() {
    let cpu = DeviceClass::new("cpu");
    let accel = DeviceClass::new("accel").with_speed("heavy", 10.0);
    let machine = Machine::new(vec![cpu, accel], vec![0, 1]).unwrap();
    let engine = Engine::new(machine, SchedulerKind::Dmda);

    let heavy = engine
        .register_codelet(Codelet::new("heavy", &[AccessMode::ReadWrite]).kernel(|s| {
            std::thread::sleep(Duration::from_micros(400));
            s.write(0).fill(1.0);
            Ok(())
        }))
        .unwrap();
    let handles: Vec<_> = (0..10)
        .map(|_| engine.register_handle(BlockDesc::vector(4, 1)).unwrap())
        .collect();

    let mut warm = PerfModel::new();
    warm.record("heavy", 0, &[32], 4000.0);
    warm.record("heavy", 1, &[32], 400.0);
    engine.set_perf_model(warm);

    for &h in &handles {
        engine.submit(heavy, &[(h, AccessMode::ReadWrite)]).unwrap();
    }
    let report = engine.finish().unwrap();
    taskrt::verify::worker_intervals_disjoint(&report).unwrap();
    taskrt::verify::handle_safety(&report).unwrap();
    taskrt::verify::dependencies_respected(&report).unwrap();

    assert_eq!(
        report.workers[1].n_tasks, 10,
        "warm dmda should keep all heavy tasks on the accelerator"
    );
    assert_eq!(report.workers[0].n_tasks, 0);
}

/// The cpu worker's real execution is padded to look 10x slower, so the
/// recorded durations in the perf model should differ by roughly that factor.
#[test]
fn virtual_class_padding_shows_up_in_recorded_durations() {
    let cpu = DeviceClass::new("cpu");
    let accel = DeviceClass::new("accel").with_speed("work", 10.0);
    let machine = Machine::new(vec![cpu, accel], vec![0, 0, 1]).unwrap();
    let engine = Engine::new(machine, SchedulerKind::Eager);
    let work = engine
        .register_codelet(Codelet::new("work", &[]).kernel(|_| {
            std::thread::sleep(Duration::from_millis(2));
            Ok(())
        }))
        .unwrap();
    for _ in 0..12 {
        engine.submit(work, &[]).unwrap();
    }
    let report = engine.finish().unwrap();
    let cpu_bucket = report.perf.bucket("work", 0, &[]).expect("cpu samples");
    let accel_bucket = report.perf.bucket("work", 1, &[]).expect("accel samples");
    let ratio = cpu_bucket.mean() / accel_bucket.mean();
    assert!(
        (5.0..20.0).contains(&ratio),
        "padding ratio {ratio} should be near 10"
    );
}

#[test]
fn trace_export_lists_every_task_once() {
    let engine = Engine::new(Machine::homogeneous(2), SchedulerKind::Eager);
    let tick = engine
        .register_codelet(Codelet::new("tick", &[]).kernel(|_| Ok(())))
        .unwrap();
    for _ in 0..6 {
        engine.submit(tick, &[]).unwrap();
    }
    let report = engine.finish().unwrap();
    let mut out = Vec::new();
    report.write_trace(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    for line in &lines {
        assert!(line.contains("tick"), "line should name the codelet: {line}");
    }
}

#[test]
fn perf_model_survives_save_and_reload_across_engines() {
    let machine = Machine::homogeneous(1);
    let engine = Engine::new(machine.clone(), SchedulerKind::Eager);
    let tick = engine
        .register_codelet(Codelet::new("tick", &[]).kernel(|_| Ok(())))
        .unwrap();
    for _ in 0..5 {
        engine.submit(tick, &[]).unwrap();
    }
    let report = engine.finish().unwrap();

    let mut saved = Vec::new();
    report.perf.save(&mut saved, &machine).unwrap();
    let reloaded = PerfModel::load(&mut saved.as_slice(), &machine).unwrap();

    let engine2 = Engine::new(machine, SchedulerKind::Dmda);
    engine2.set_perf_model(reloaded);
    let model = engine2.perf_model();
    let bucket = model.bucket("tick", 0, &[]).expect("bucket restored");
    assert_eq!(bucket.count(), 5);
    engine2.finish().unwrap();
}
