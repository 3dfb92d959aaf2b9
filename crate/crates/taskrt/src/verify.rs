//! Post-hoc checkers that validate scheduling invariants from a run report.
//!
//! These work on the records of a completed, successful run with
//! `RecordMode::Full`: each worker executed one task at a time, no two
//! concurrent tasks touched overlapping memory with a write involved, every
//! task started after its predecessors finished, and an eager run handed
//! tasks out in ready order.

use std::collections::BTreeSet;

use crate::buffer::BlockDesc;
use crate::engine::{RunReport, TaskId, TaskRecord};
use crate::sched::SchedulerKind;

fn ran(t: &TaskRecord) -> bool {
    t.worker != usize::MAX
}

/// No worker executed two tasks at overlapping times.
pub fn worker_intervals_disjoint(report: &RunReport) -> Result<(), String> {
    let mut by_worker: Vec<Vec<&TaskRecord>> = vec![Vec::new(); report.workers.len()];
    for t in report.tasks.iter().filter(|t| ran(t)) {
        by_worker[t.worker].push(t);
    }
    for (w, mut tasks) in by_worker.into_iter().enumerate() {
        tasks.sort_by_key(|t| t.start_us);
        for pair in tasks.windows(2) {
            if pair[0].end_us > pair[1].start_us {
                return Err(format!(
                    "worker {w}: task {} [{}, {}) overlaps task {} [{}, {})",
                    pair[0].id,
                    pair[0].start_us,
                    pair[0].end_us,
                    pair[1].id,
                    pair[1].start_us,
                    pair[1].end_us
                ));
            }
        }
    }
    Ok(())
}

fn rect(desc: &BlockDesc) -> (usize, usize, usize, usize) {
    let stride = desc.ld * desc.item;
    let row0 = desc.offset / stride;
    let col0 = (desc.offset % stride) / desc.item;
    (col0, row0, desc.cols, desc.rows)
}

/// Whether two handle windows can touch the same scalars.
fn windows_intersect(ra: usize, a: &BlockDesc, rb: usize, b: &BlockDesc) -> bool {
    if ra != rb {
        return false;
    }
    if a.span_end() <= b.offset || b.span_end() <= a.offset {
        return false;
    }
    if a.ld == b.ld && a.item == b.item {
        let (ax, ay, aw, ah) = rect(a);
        let (bx, by, bw, bh) = rect(b);
        ax < bx + bw && bx < ax + aw && ay < by + bh && by < ay + ah
    } else {
        // Mixed layouts over one region: assume the spans can collide.
        true
    }
}

fn conflict(report: &RunReport, a: &TaskRecord, b: &TaskRecord) -> Option<(u32, u32)> {
    for &(ha, ma) in a.binds.iter() {
        for &(hb, mb) in b.binds.iter() {
            if !ma.writes() && !mb.writes() {
                continue;
            }
            let ia = &report.handles[ha as usize];
            let ib = &report.handles[hb as usize];
            if windows_intersect(ia.region, &ia.desc, ib.region, &ib.desc) {
                return Some((ha, hb));
            }
        }
    }
    None
}

/// No two tasks with overlapping execution intervals touched intersecting
/// memory windows unless both only read.
pub fn handle_safety(report: &RunReport) -> Result<(), String> {
    let mut tasks: Vec<&TaskRecord> = report
        .tasks
        .iter()
        .filter(|t| ran(t) && t.end_us > t.start_us)
        .collect();
    tasks.sort_by_key(|t| t.start_us);
    let mut active: Vec<&TaskRecord> = Vec::new();
    for t in tasks {
        active.retain(|a| a.end_us > t.start_us);
        for a in &active {
            if let Some((ha, hb)) = conflict(report, a, t) {
                return Err(format!(
                    "tasks {} and {} ran concurrently with conflicting access \
                     to handles {ha} and {hb}",
                    a.id, t.id
                ));
            }
        }
        active.push(t);
    }
    Ok(())
}

/// Every task started only after each of its predecessors had finished.
pub fn dependencies_respected(report: &RunReport) -> Result<(), String> {
    for t in report.tasks.iter().filter(|t| ran(t)) {
        for &p in t.preds.iter() {
            let pr = &report.tasks[p as usize];
            if !ran(pr) {
                return Err(format!(
                    "task {} ran but its predecessor {p} never did",
                    t.id
                ));
            }
            if pr.end_us > t.start_us {
                return Err(format!(
                    "task {} started at {} before predecessor {p} ended at {}",
                    t.id, t.start_us, pr.end_us
                ));
            }
        }
    }
    Ok(())
}

/// Replay the readiness/dispatch event log of an eager run and confirm that
/// every dispatch took the oldest ready task the worker's class could run.
pub fn eager_fifo(report: &RunReport) -> Result<(), String> {
    if report.scheduler != SchedulerKind::Eager {
        return Err("report is not from an eager run".to_string());
    }
    enum Event {
        Ready(TaskId),
        Dispatch(TaskId, usize),
    }
    let mut events = Vec::new();
    for t in report.tasks.iter() {
        if t.ready_stamp > 0 {
            events.push((t.ready_stamp, Event::Ready(t.id)));
        }
        if t.dispatch_stamp > 0 {
            events.push((t.dispatch_stamp, Event::Dispatch(t.id, t.class)));
        }
    }
    events.sort_by_key(|(stamp, _)| *stamp);
    let mut ready: BTreeSet<TaskId> = BTreeSet::new();
    for (_, event) in events {
        match event {
            Event::Ready(t) => {
                ready.insert(t);
            }
            Event::Dispatch(t, class) => {
                let expected = ready.iter().copied().find(|&x| {
                    let codelet = report.tasks[x as usize].codelet as usize;
                    report.codelet_classes[codelet][class]
                });
                if expected != Some(t) {
                    return Err(format!(
                        "dispatch of task {t} was not first-come-first-served \
                         (expected {expected:?})"
                    ));
                }
                ready.remove(&t);
            }
        }
    }
    Ok(())
}

/// All of the above, as applicable, in one call.
pub fn check_report(report: &RunReport) -> Result<(), String> {
    worker_intervals_disjoint(report)?;
    handle_safety(report)?;
    dependencies_respected(report)?;
    if report.scheduler == SchedulerKind::Eager {
        eager_fifo(report)?;
    }
    Ok(())
}
