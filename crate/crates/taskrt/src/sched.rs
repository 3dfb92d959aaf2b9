//! Scheduling policies.
//!
//! Both policies are pull-based: an idle worker asks for its next task.
//! `Eager` hands out ready tasks strictly in submission order. `Dmda` walks
//! the ready list in submission order and gives the requesting worker the
//! first task whose estimated completion time is minimized on it, counting
//! worker availability, data transfer between device classes, and the
//! perf-model duration estimate. Ties go to the requester, so a cold model
//! behaves like `Eager`.

use std::fmt;
use std::str::FromStr;

use crate::engine::{Core, TaskId};
use crate::machine::WorkerId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchedulerKind {
    Eager,
    Dmda,
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerKind::Eager => write!(f, "eager"),
            SchedulerKind::Dmda => write!(f, "dmda"),
        }
    }
}

impl FromStr for SchedulerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "eager" => Ok(SchedulerKind::Eager),
            "dmda" => Ok(SchedulerKind::Dmda),
            other => Err(format!("unknown scheduler '{other}' (eager, dmda)")),
        }
    }
}

/// Choose the next task for worker `w`, or `None` to keep it waiting.
pub(crate) fn pick(core: &Core, w: WorkerId) -> Option<TaskId> {
    match core.sched {
        SchedulerKind::Eager => pick_eager(core, w),
        SchedulerKind::Dmda => pick_dmda(core, w),
    }
}

fn pick_eager(core: &Core, w: WorkerId) -> Option<TaskId> {
    let class = core.workers[w].class;
    core.ready
        .iter()
        .copied()
        .find(|&t| core.runnable_on(t, class))
}

fn pick_dmda(core: &Core, w: WorkerId) -> Option<TaskId> {
    let class = core.workers[w].class;
    let now = core.now_us() as f64;
    for &t in core.ready.iter() {
        if !core.runnable_on(t, class) {
            continue;
        }
        let mut best = f64::INFINITY;
        for v in 0..core.workers.len() {
            if v == w || !core.runnable_on(t, core.workers[v].class) {
                continue;
            }
            best = best.min(completion_us(core, t, v, now));
        }
        // The requester wins ties, so an uninformed model degrades to FIFO.
        if completion_us(core, t, w, now) <= best {
            return Some(t);
        }
    }
    None
}

/// Estimated completion time of `t` on worker `v`: the worker's availability,
/// plus transfer for handles resident on another device class, plus the
/// perf-model estimate of the kernel itself.
pub(crate) fn completion_us(core: &Core, t: TaskId, v: WorkerId, now: f64) -> f64 {
    let class = core.workers[v].class;
    let entry = &core.tasks[t as usize];
    let avail = now.max(core.workers[v].busy_until_us);
    let mut transfer = 0.0;
    for &(h, _) in entry.binds.iter() {
        let he = &core.handles[h as usize];
        if let Some(resident) = he.resident {
            if resident != class {
                let bytes = he.desc.byte_size() as f64;
                transfer += bytes * core.machine.class(class).transfer_us_per_byte;
            }
        }
    }
    let duration = core.perf.estimate(
        &core.codelets[entry.codelet as usize].perf_key,
        class,
        &entry.sizes,
        &core.machine,
    );
    avail + transfer + duration
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codelet::{AccessMode, Codelet};
    use crate::engine::Engine;
    use crate::machine::{DeviceClass, Machine};

    fn two_class_machine() -> Machine {
        let cpu = DeviceClass::new("cpu");
        let accel = DeviceClass::new("accel").with_speed("work", 10.0);
        Machine::new(vec![cpu, accel], vec![0, 1]).unwrap()
    }

    #[test]
    fn eager_serves_ready_tasks_in_submission_order() {
        let engine = Engine::inert(Machine::homogeneous(2), SchedulerKind::Eager);
        let c = engine
            .register_codelet(Codelet::new("work", &[]).kernel(|_| Ok(())))
            .unwrap();
        for _ in 0..3 {
            engine.submit(c, &[]).unwrap();
        }
        let core = engine.core_for_tests();
        assert_eq!(pick(&core, 0), Some(0));
        assert_eq!(pick(&core, 1), Some(0));
    }

    #[test]
    fn eager_skips_tasks_without_a_kernel_for_the_class() {
        let engine = Engine::inert(two_class_machine(), SchedulerKind::Eager);
        let accel_only = engine
            .register_codelet(Codelet::new("work", &[]).kernel_for(1, |_| Ok(())))
            .unwrap();
        let anywhere = engine
            .register_codelet(Codelet::new("other", &[]).kernel(|_| Ok(())))
            .unwrap();
        engine.submit(accel_only, &[]).unwrap();
        engine.submit(anywhere, &[]).unwrap();
        let core = engine.core_for_tests();
        assert_eq!(pick(&core, 0), Some(1), "cpu worker takes the second task");
        assert_eq!(pick(&core, 1), Some(0), "accel worker takes the first");
    }

    #[test]
    fn dmda_places_tasks_where_estimated_completion_is_lowest() {
        let engine = Engine::inert(two_class_machine(), SchedulerKind::Dmda);
        let c = engine
            .register_codelet(Codelet::new("work", &[]).kernel(|_| Ok(())))
            .unwrap();
        engine.submit(c, &[]).unwrap();
        let mut model = crate::perf::PerfModel::new();
        model.record("work", 0, &[], 10.0);
        model.record("work", 1, &[], 1.0);
        engine.set_perf_model(model);

        {
            // Both idle: the accel worker finishes sooner, so the cpu worker
            // must leave the task alone and the accel worker takes it.
            let core = engine.core_for_tests();
            assert_eq!(pick(&core, 0), None);
            assert_eq!(pick(&core, 1), Some(0));
        }
        {
            // Accel busy for a long while: 10 on the idle cpu now beats
            // waiting for the accel, so the cpu worker takes it.
            let mut core = engine.core_for_tests();
            core.workers[1].busy_until_us = 1_000_000.0;
            assert_eq!(pick(&core, 0), Some(0));
            assert_eq!(pick(&core, 1), None);
        }
    }

    #[test]
    fn dmda_charges_transfer_for_data_resident_elsewhere() {
        let cpu = DeviceClass::new("cpu").with_transfer_cost(1.0);
        let accel = DeviceClass::new("accel")
            .with_speed("work", 2.0)
            .with_transfer_cost(1.0);
        let machine = Machine::new(vec![cpu, accel], vec![0, 1]).unwrap();
        let engine = Engine::inert(machine, SchedulerKind::Dmda);
        let c = engine
            .register_codelet(
                Codelet::new("work", &[AccessMode::ReadWrite]).kernel(|_| Ok(())),
            )
            .unwrap();
        let h = engine
            .register_handle(crate::buffer::BlockDesc::vector(100, 1))
            .unwrap();
        engine.submit(c, &[(h, AccessMode::ReadWrite)]).unwrap();
        let mut model = crate::perf::PerfModel::new();
        model.record("work", 0, &[800], 10.0);
        model.record("work", 1, &[800], 5.0);
        engine.set_perf_model(model);
        let mut core = engine.core_for_tests();
        // Data lives on the cpu class: moving it costs 800 us, dwarfing the
        // 5 us the accel would save, so the cpu keeps the task.
        core.handles[h as usize].resident = Some(0);
        assert_eq!(pick(&core, 0), Some(0));
        assert_eq!(pick(&core, 1), None);
    }
}
