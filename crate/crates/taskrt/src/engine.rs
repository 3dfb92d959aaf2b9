//! The engine: handle registry, dependency inference, worker pool, dispatch.
//!
//! Submission and execution overlap: an orchestration thread may keep
//! submitting while workers drain, and can block on individual tasks to
//! bound its look-ahead. Dependency edges are inferred at submission time
//! from handle access declarations: a writer of `h` depends on the latest
//! readers and the latest writer of `h`, a reader depends on the latest
//! writer. A kernel failure stops dispatch, lets running tasks finish, and
//! surfaces the error from the waiting call.

use std::any::Any;
use std::collections::{BTreeSet, HashMap};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crate::buffer::{Block, BlockDesc, BlockMut, Region};
use crate::codelet::{AccessMode, Codelet, KernelFn};
use crate::error::{RunError, RuntimeError};
use crate::machine::{ClassId, Machine, WorkerId};
use crate::perf::PerfModel;
use crate::sched::{self, SchedulerKind};
use crate::trace::TraceEvent;

pub type TaskId = u32;
pub type HandleId = u32;
pub type CodeletId = u32;

/// Submission-time usability of a handle. Only `Global` handles may be bound
/// by ordinary tasks; `Partitioned` means the memory is currently described
/// by sub-handles, `Invalid` means a switch must re-validate it first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HandleState {
    Global,
    Partitioned,
    Invalid,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TaskState {
    Submitted,
    Ready,
    Running,
    Done,
}

/// Free-form task label used by callers to tie records back to their own
/// structure (the solver stores iteration and subdomain).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TaskTag {
    pub group: u32,
    pub unit: u32,
}

/// What the engine keeps for reporting. `Summary` drops per-task records and
/// trace events as tasks complete, for very long runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum RecordMode {
    #[default]
    Full,
    Summary,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct EngineConfig {
    pub record: RecordMode,
}

pub type TaskArg = Arc<dyn Any + Send + Sync>;

pub(crate) struct HandleEntry {
    pub(crate) region: usize,
    pub(crate) desc: BlockDesc,
    pub(crate) state: HandleState,
    pub(crate) last_writer: Option<TaskId>,
    pub(crate) readers: Vec<TaskId>,
    pub(crate) resident: Option<ClassId>,
    pub(crate) children: Vec<HandleId>,
    pub(crate) in_flight: u32,
}

pub(crate) struct CodeletEntry {
    pub(crate) name: String,
    pub(crate) perf_key: String,
    pub(crate) modes: Box<[AccessMode]>,
    pub(crate) kernels: Box<[Option<Arc<KernelFn>>]>,
    /// Wall-clock padding factor per class: max speed over present classes
    /// divided by this class's speed. 1.0 for the fastest class.
    pub(crate) pads: Box<[f64]>,
}

pub(crate) struct TaskEntry {
    pub(crate) codelet: CodeletId,
    pub(crate) state: TaskState,
    pub(crate) binds: Box<[(HandleId, AccessMode)]>,
    pub(crate) sizes: Box<[u64]>,
    pub(crate) preds: Box<[TaskId]>,
    pub(crate) pending: u32,
    pub(crate) succs: Vec<TaskId>,
    pub(crate) tag: Option<TaskTag>,
    pub(crate) arg: Option<TaskArg>,
    pub(crate) ready_stamp: u64,
    pub(crate) dispatch_stamp: u64,
    pub(crate) worker: usize,
    pub(crate) start_us: u64,
    pub(crate) end_us: u64,
}

pub(crate) struct WorkerState {
    pub(crate) class: ClassId,
    /// Estimated completion time of the task the worker is running, in
    /// microseconds since the epoch. Back to "now" once it finishes.
    pub(crate) busy_until_us: f64,
    pub(crate) busy_us: u64,
    pub(crate) n_tasks: u64,
}

pub(crate) struct Core {
    pub(crate) machine: Machine,
    pub(crate) sched: SchedulerKind,
    record: RecordMode,
    epoch: Instant,
    regions: Vec<Arc<Region>>,
    pub(crate) handles: Vec<HandleEntry>,
    pub(crate) codelets: Vec<CodeletEntry>,
    switch_codelets: HashMap<usize, CodeletId>,
    pub(crate) tasks: Vec<TaskEntry>,
    pub(crate) ready: BTreeSet<TaskId>,
    n_done: u64,
    n_running: u64,
    stamp: u64,
    pub(crate) workers: Vec<WorkerState>,
    pub(crate) perf: PerfModel,
    trace: Vec<TraceEvent>,
    error: Option<RunError>,
    shutdown: bool,
}

impl Core {
    pub(crate) fn now_us(&self) -> u64 {
        self.epoch.elapsed().as_micros() as u64
    }

    pub(crate) fn runnable_on(&self, task: TaskId, class: ClassId) -> bool {
        self.codelets[self.tasks[task as usize].codelet as usize].kernels[class].is_some()
    }

    fn next_stamp(&mut self) -> u64 {
        self.stamp += 1;
        self.stamp
    }

    fn mark_ready(&mut self, t: TaskId) {
        self.tasks[t as usize].state = TaskState::Ready;
        self.tasks[t as usize].ready_stamp = self.next_stamp();
        self.ready.insert(t);
    }
}

struct Shared {
    core: Mutex<Core>,
    /// Workers wait here for ready tasks or shutdown.
    cv_work: Condvar,
    /// Waiters (wait_task, wait_idle) wait here for completions or errors.
    cv_state: Condvar,
}

struct Grant {
    region: Arc<Region>,
    desc: BlockDesc,
    mode: AccessMode,
}

/// Handle and argument access granted to a kernel for one execution.
pub struct KernelScope<'a> {
    grants: &'a [Grant],
    arg: Option<&'a TaskArg>,
    class: ClassId,
    worker: WorkerId,
    task: TaskId,
}

impl<'a> KernelScope<'a> {
    pub fn n_handles(&self) -> usize {
        self.grants.len()
    }

    /// Access mode slot `i` was granted with.
    pub fn mode(&self, i: usize) -> AccessMode {
        self.grants[i].mode
    }

    /// Read view of handle slot `i`. Panics if the slot was not granted a
    /// reading mode; that is a kernel bug, not a runtime condition.
    pub fn read(&self, i: usize) -> Block<'_> {
        let g = &self.grants[i];
        assert!(
            g.mode.reads(),
            "kernel read from slot {i} granted {:?}",
            g.mode
        );
        unsafe { Block::from_raw(g.region.base(), g.desc) }
    }

    /// Write view of handle slot `i`. Panics if the slot was not granted a
    /// writing mode.
    pub fn write(&self, i: usize) -> BlockMut<'_> {
        let g = &self.grants[i];
        assert!(
            g.mode.writes(),
            "kernel write to slot {i} granted {:?}",
            g.mode
        );
        unsafe { BlockMut::from_raw(g.region.base(), g.desc) }
    }

    /// Per-task argument, downcast to the submitted type.
    pub fn arg<T: 'static>(&self) -> &T {
        self.arg
            .expect("task was submitted without an argument")
            .downcast_ref::<T>()
            .expect("task argument has a different type")
    }

    pub fn class(&self) -> ClassId {
        self.class
    }

    pub fn worker(&self) -> WorkerId {
        self.worker
    }

    pub fn task_id(&self) -> TaskId {
        self.task
    }
}

#[derive(Clone, Debug)]
pub struct WorkerStats {
    pub class: ClassId,
    pub class_name: String,
    pub busy_us: u64,
    pub n_tasks: u64,
}

/// Everything recorded about one executed task.
#[derive(Clone, Debug)]
pub struct TaskRecord {
    pub id: TaskId,
    pub codelet: CodeletId,
    pub tag: Option<TaskTag>,
    /// `usize::MAX` if the task never ran (aborted run).
    pub worker: usize,
    pub class: ClassId,
    pub start_us: u64,
    pub end_us: u64,
    /// Global event counter values: when the task became ready and when it
    /// was handed to a worker. The counter is shared by both event kinds, so
    /// readiness and dispatch order can be replayed exactly.
    pub ready_stamp: u64,
    pub dispatch_stamp: u64,
    pub preds: Box<[TaskId]>,
    pub binds: Box<[(HandleId, AccessMode)]>,
}

/// Region and window of a registered handle, for memory-safety checks.
#[derive(Clone, Debug)]
pub struct HandleInfo {
    pub region: usize,
    pub desc: BlockDesc,
}

/// Snapshot returned by [`Engine::finish`].
#[derive(Clone, Debug)]
pub struct RunReport {
    pub wall_us: u64,
    pub n_tasks: u64,
    pub workers: Vec<WorkerStats>,
    pub codelet_names: Vec<String>,
    /// Which device classes each codelet has a kernel for.
    pub codelet_classes: Vec<Box<[bool]>>,
    pub handles: Vec<HandleInfo>,
    /// Per-task records; empty under `RecordMode::Summary`.
    pub tasks: Vec<TaskRecord>,
    /// Execution intervals; empty under `RecordMode::Summary`.
    pub trace: Vec<TraceEvent>,
    pub perf: PerfModel,
    pub machine: Machine,
    pub scheduler: SchedulerKind,
}

impl RunReport {
    pub fn codelet_name(&self, id: CodeletId) -> &str {
        &self.codelet_names[id as usize]
    }

    pub fn write_trace<W: std::io::Write>(&self, w: &mut W) -> std::io::Result<()> {
        crate::trace::export_trace(w, &self.trace, &self.codelet_names)
    }

    pub fn busy_us_total(&self) -> u64 {
        self.workers.iter().map(|w| w.busy_us).sum()
    }
}

pub struct Engine {
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl Engine {
    pub fn new(machine: Machine, sched: SchedulerKind) -> Self {
        Self::with_config(machine, sched, EngineConfig::default())
    }

    pub fn with_config(machine: Machine, sched: SchedulerKind, config: EngineConfig) -> Self {
        let shared = Self::make_shared(machine, sched, config);
        let n = shared.core.lock().unwrap().workers.len();
        let threads = (0..n)
            .map(|w| {
                let shared = Arc::clone(&shared);
                std::thread::Builder::new()
                    .name(format!("worker-{w}"))
                    .spawn(move || worker_loop(shared, w))
                    .expect("spawning worker thread")
            })
            .collect();
        Self { shared, threads }
    }

    fn make_shared(machine: Machine, sched: SchedulerKind, config: EngineConfig) -> Arc<Shared> {
        let workers = (0..machine.n_workers())
            .map(|w| WorkerState {
                class: machine.class_of(w),
                busy_until_us: 0.0,
                busy_us: 0,
                n_tasks: 0,
            })
            .collect();
        let core = Core {
            machine,
            sched,
            record: config.record,
            epoch: Instant::now(),
            regions: Vec::new(),
            handles: Vec::new(),
            codelets: Vec::new(),
            switch_codelets: HashMap::new(),
            tasks: Vec::new(),
            ready: BTreeSet::new(),
            n_done: 0,
            n_running: 0,
            stamp: 0,
            workers,
            perf: PerfModel::new(),
            trace: Vec::new(),
            error: None,
            shutdown: false,
        };
        Arc::new(Shared {
            core: Mutex::new(core),
            cv_work: Condvar::new(),
            cv_state: Condvar::new(),
        })
    }

    /// An engine with no worker threads, so submitted tasks stay put.
    /// Lets scheduler tests inspect dispatch decisions deterministically.
    #[cfg(test)]
    pub(crate) fn inert(machine: Machine, sched: SchedulerKind) -> Self {
        Self {
            shared: Self::make_shared(machine, sched, EngineConfig::default()),
            threads: Vec::new(),
        }
    }

    #[cfg(test)]
    pub(crate) fn core_for_tests(&self) -> MutexGuard<'_, Core> {
        self.shared.core.lock().unwrap()
    }

    fn lock(&self) -> MutexGuard<'_, Core> {
        self.shared.core.lock().unwrap()
    }

    /// Register a fresh buffer described by `desc` (offset must be 0).
    /// Contents start zeroed; the handle starts `Global` with no writer.
    pub fn register_handle(&self, desc: BlockDesc) -> Result<HandleId, RuntimeError> {
        if desc.scalars() == 0 {
            return Err(RuntimeError::EmptyHandle);
        }
        assert_eq!(desc.offset, 0, "fresh handles start at region offset 0");
        let mut core = self.lock();
        let region = core.regions.len();
        core.regions.push(Arc::new(Region::new(desc.span_end())));
        let id = core.handles.len() as HandleId;
        core.handles.push(HandleEntry {
            region,
            desc,
            state: HandleState::Global,
            last_writer: None,
            readers: Vec::new(),
            resident: None,
            children: Vec::new(),
            in_flight: 0,
        });
        Ok(id)
    }

    /// Describe `parent`'s region a second time as a set of sub-blocks.
    /// After this call the sub-handles are the active description (`Global`)
    /// and the parent is `Partitioned`; submit a switch task to flip back.
    pub fn partition_handle(
        &self,
        parent: HandleId,
        blocks: &[BlockDesc],
    ) -> Result<Vec<HandleId>, RuntimeError> {
        let mut core = self.lock();
        let p = parent as usize;
        if p >= core.handles.len() {
            return Err(RuntimeError::UnknownHandle(parent));
        }
        if !core.handles[p].children.is_empty() {
            return Err(RuntimeError::AlreadyPartitioned(parent));
        }
        if core.handles[p].state != HandleState::Global {
            return Err(RuntimeError::HandleNotUsable {
                handle: parent,
                state: core.handles[p].state,
            });
        }
        if core.handles[p].in_flight > 0 {
            return Err(RuntimeError::HandleBusy(parent));
        }
        let region = core.handles[p].region;
        let region_len = core.regions[region].len();
        for desc in blocks {
            if desc.scalars() == 0 {
                return Err(RuntimeError::EmptyHandle);
            }
            if desc.span_end() > region_len {
                return Err(RuntimeError::ViewOutOfRegion {
                    end: desc.span_end(),
                    len: region_len,
                });
            }
        }
        let last_writer = core.handles[p].last_writer;
        let readers = core.handles[p].readers.clone();
        let resident = core.handles[p].resident;
        let mut ids = Vec::with_capacity(blocks.len());
        for desc in blocks {
            let id = core.handles.len() as HandleId;
            core.handles.push(HandleEntry {
                region,
                desc: *desc,
                state: HandleState::Global,
                last_writer,
                readers: readers.clone(),
                resident,
                children: Vec::new(),
                in_flight: 0,
            });
            ids.push(id);
        }
        core.handles[p].state = HandleState::Partitioned;
        core.handles[p].children = ids.clone();
        Ok(ids)
    }

    pub fn register_codelet(&self, codelet: Codelet) -> Result<CodeletId, RuntimeError> {
        let mut core = self.lock();
        let n_classes = core.machine.n_classes();
        let mut kernels: Vec<Option<Arc<KernelFn>>> = vec![codelet.universal.clone(); n_classes];
        for (class, k) in &codelet.per_class {
            if *class >= n_classes {
                return Err(RuntimeError::UnknownClass {
                    codelet: codelet.name.clone(),
                    class: *class,
                });
            }
            kernels[*class] = Some(Arc::clone(k));
        }
        if kernels.iter().all(|k| k.is_none()) {
            return Err(RuntimeError::NoKernel(codelet.name.clone()));
        }
        let max_speed = core.machine.max_speed_for(&codelet.perf_key);
        let pads: Box<[f64]> = (0..n_classes)
            .map(|c| max_speed / core.machine.class(c).speed_for(&codelet.perf_key))
            .collect();
        let id = core.codelets.len() as CodeletId;
        core.codelets.push(CodeletEntry {
            name: codelet.name,
            perf_key: codelet.perf_key,
            modes: codelet.modes.into_boxed_slice(),
            kernels: kernels.into_boxed_slice(),
            pads,
        });
        Ok(id)
    }

    pub fn submit(
        &self,
        codelet: CodeletId,
        binds: &[(HandleId, AccessMode)],
    ) -> Result<TaskId, RuntimeError> {
        self.submit_with(codelet, binds, None, None)
    }

    pub fn submit_with(
        &self,
        codelet: CodeletId,
        binds: &[(HandleId, AccessMode)],
        tag: Option<TaskTag>,
        arg: Option<TaskArg>,
    ) -> Result<TaskId, RuntimeError> {
        let mut core = self.lock();
        self.submit_locked(&mut core, codelet, binds, tag, arg, false)
    }

    fn submit_locked(
        &self,
        core: &mut Core,
        codelet: CodeletId,
        binds: &[(HandleId, AccessMode)],
        tag: Option<TaskTag>,
        arg: Option<TaskArg>,
        is_switch: bool,
    ) -> Result<TaskId, RuntimeError> {
        if core.shutdown {
            return Err(RuntimeError::ShutDown);
        }
        let c = codelet as usize;
        if c >= core.codelets.len() {
            return Err(RuntimeError::UnknownCodelet(codelet));
        }
        if binds.len() != core.codelets[c].modes.len() {
            return Err(RuntimeError::ArityMismatch {
                codelet: core.codelets[c].name.clone(),
                given: binds.len(),
                expected: core.codelets[c].modes.len(),
            });
        }
        for (h, _) in binds {
            let h = *h as usize;
            if h >= core.handles.len() {
                return Err(RuntimeError::UnknownHandle(h as u32));
            }
            if !is_switch && core.handles[h].state != HandleState::Global {
                return Err(RuntimeError::HandleNotUsable {
                    handle: h as u32,
                    state: core.handles[h].state,
                });
            }
        }
        let id = core.tasks.len() as TaskId;
        // Dependency inference: writers wait for latest readers and latest
        // writer, readers wait for the latest writer.
        let mut preds: BTreeSet<TaskId> = BTreeSet::new();
        for (h, mode) in binds {
            let entry = &core.handles[*h as usize];
            if mode.writes() {
                preds.extend(entry.readers.iter().copied());
                if let Some(w) = entry.last_writer {
                    preds.insert(w);
                }
            } else if let Some(w) = entry.last_writer {
                preds.insert(w);
            }
        }
        // Second pass: update handle bookkeeping for later submissions.
        for (h, mode) in binds {
            let entry = &mut core.handles[*h as usize];
            entry.in_flight += 1;
            if mode.writes() {
                entry.last_writer = Some(id);
                entry.readers.clear();
            } else {
                entry.readers.push(id);
            }
        }
        let sizes: Box<[u64]> = binds
            .iter()
            .map(|(h, _)| core.handles[*h as usize].desc.byte_size() as u64)
            .collect();
        let preds: Box<[TaskId]> = preds.into_iter().collect();
        let mut pending = 0u32;
        for &p in preds.iter() {
            if core.tasks[p as usize].state != TaskState::Done {
                core.tasks[p as usize].succs.push(id);
                pending += 1;
            }
        }
        core.tasks.push(TaskEntry {
            codelet,
            state: TaskState::Submitted,
            binds: binds.into(),
            sizes,
            preds,
            pending,
            succs: Vec::new(),
            tag,
            arg,
            ready_stamp: 0,
            dispatch_stamp: 0,
            worker: usize::MAX,
            start_us: 0,
            end_us: 0,
        });
        if pending == 0 {
            core.mark_ready(id);
            self.shared.cv_work.notify_all();
        }
        Ok(id)
    }

    fn switch_codelet(&self, core: &mut Core, arity: usize) -> CodeletId {
        if let Some(&id) = core.switch_codelets.get(&arity) {
            return id;
        }
        let n_classes = core.machine.n_classes();
        let kernel: Arc<KernelFn> = Arc::new(|_scope: &mut KernelScope<'_>| Ok(()));
        let id = core.codelets.len() as CodeletId;
        core.codelets.push(CodeletEntry {
            name: "switch".to_string(),
            perf_key: "switch".to_string(),
            modes: vec![AccessMode::ReadWrite; arity].into_boxed_slice(),
            kernels: vec![Some(kernel); n_classes].into_boxed_slice(),
            pads: vec![1.0; n_classes].into_boxed_slice(),
        });
        core.switch_codelets.insert(arity, id);
        id
    }

    /// Submit a switch task making the global description of `parent` active
    /// again; its sub-handles become `Invalid`. The task reads and writes
    /// both sides, so it orders after all in-flight users of either.
    pub fn submit_switch_to_global(&self, parent: HandleId) -> Result<TaskId, RuntimeError> {
        let mut core = self.lock();
        let p = parent as usize;
        if p >= core.handles.len() {
            return Err(RuntimeError::UnknownHandle(parent));
        }
        let children = core.handles[p].children.clone();
        if children.is_empty() {
            return Err(RuntimeError::NotPartitioned(parent));
        }
        if core.handles[p].state != HandleState::Partitioned {
            return Err(RuntimeError::HandleNotUsable {
                handle: parent,
                state: core.handles[p].state,
            });
        }
        let mut binds = vec![(parent, AccessMode::ReadWrite)];
        binds.extend(children.iter().map(|&c| (c, AccessMode::ReadWrite)));
        let codelet = self.switch_codelet(&mut core, binds.len());
        let id = self.submit_locked(&mut core, codelet, &binds, None, None, true)?;
        core.handles[p].state = HandleState::Global;
        for &c in &children {
            core.handles[c as usize].state = HandleState::Invalid;
        }
        Ok(id)
    }

    /// Submit a switch task making the sub-handles of `parent` active again;
    /// the global description becomes `Partitioned`.
    pub fn submit_switch_to_blocks(&self, parent: HandleId) -> Result<TaskId, RuntimeError> {
        let mut core = self.lock();
        let p = parent as usize;
        if p >= core.handles.len() {
            return Err(RuntimeError::UnknownHandle(parent));
        }
        let children = core.handles[p].children.clone();
        if children.is_empty() {
            return Err(RuntimeError::NotPartitioned(parent));
        }
        if core.handles[p].state != HandleState::Global {
            return Err(RuntimeError::HandleNotUsable {
                handle: parent,
                state: core.handles[p].state,
            });
        }
        let mut binds = vec![(parent, AccessMode::ReadWrite)];
        binds.extend(children.iter().map(|&c| (c, AccessMode::ReadWrite)));
        let codelet = self.switch_codelet(&mut core, binds.len());
        let id = self.submit_locked(&mut core, codelet, &binds, None, None, true)?;
        core.handles[p].state = HandleState::Partitioned;
        for &c in &children {
            core.handles[c as usize].state = HandleState::Global;
        }
        Ok(id)
    }

    /// Block until `task` is done. Returns the run error if the drain
    /// aborted before the task could finish, or if this task failed.
    pub fn wait_task(&self, task: TaskId) -> Result<(), RunError> {
        let mut core = self.lock();
        loop {
            if core.tasks[task as usize].state == TaskState::Done {
                if let Some(e) = &core.error {
                    let failed = match e {
                        RunError::Kernel { task: t, .. } => *t == task,
                        RunError::KernelPanic { task: t, .. } => *t == task,
                    };
                    if failed {
                        return Err(e.clone());
                    }
                }
                return Ok(());
            }
            if let Some(e) = &core.error {
                return Err(e.clone());
            }
            core = self.shared.cv_state.wait(core).unwrap();
        }
    }

    /// Block until every submitted task is done, or until a failure has been
    /// recorded and all running tasks have finished.
    pub fn wait_idle(&self) -> Result<(), RunError> {
        let mut core = self.lock();
        loop {
            if let Some(e) = &core.error {
                if core.n_running == 0 {
                    return Err(e.clone());
                }
            } else if core.n_done == core.tasks.len() as u64 {
                return Ok(());
            }
            core = self.shared.cv_state.wait(core).unwrap();
        }
    }

    /// Read the window of `handle` into a dense row-major vector.
    /// Only allowed while the handle has no in-flight tasks.
    pub fn read_handle(&self, handle: HandleId) -> Result<Vec<f64>, RuntimeError> {
        let core = self.lock();
        let h = handle as usize;
        if h >= core.handles.len() {
            return Err(RuntimeError::UnknownHandle(handle));
        }
        let entry = &core.handles[h];
        if entry.in_flight > 0 {
            return Err(RuntimeError::HandleBusy(handle));
        }
        let desc = entry.desc;
        let base = core.regions[entry.region].base();
        let mut out = Vec::with_capacity(desc.scalars());
        for j in 0..desc.rows {
            let row = desc.offset + j * desc.ld * desc.item;
            for k in 0..desc.cols * desc.item {
                out.push(unsafe { *base.add(row + k) });
            }
        }
        Ok(out)
    }

    /// Overwrite the window of `handle` from a dense row-major vector.
    /// Only allowed while the handle has no in-flight tasks.
    pub fn write_handle(&self, handle: HandleId, data: &[f64]) -> Result<(), RuntimeError> {
        let core = self.lock();
        let h = handle as usize;
        if h >= core.handles.len() {
            return Err(RuntimeError::UnknownHandle(handle));
        }
        let entry = &core.handles[h];
        if entry.in_flight > 0 {
            return Err(RuntimeError::HandleBusy(handle));
        }
        let desc = entry.desc;
        if data.len() != desc.scalars() {
            return Err(RuntimeError::LengthMismatch {
                given: data.len(),
                expected: desc.scalars(),
            });
        }
        let base = core.regions[entry.region].base();
        let mut src = 0;
        for j in 0..desc.rows {
            let row = desc.offset + j * desc.ld * desc.item;
            for k in 0..desc.cols * desc.item {
                unsafe { *base.add(row + k) = data[src] };
                src += 1;
            }
        }
        Ok(())
    }

    pub fn handle_state(&self, handle: HandleId) -> Result<HandleState, RuntimeError> {
        let core = self.lock();
        core.handles
            .get(handle as usize)
            .map(|h| h.state)
            .ok_or(RuntimeError::UnknownHandle(handle))
    }

    pub fn handle_byte_size(&self, handle: HandleId) -> Result<usize, RuntimeError> {
        let core = self.lock();
        core.handles
            .get(handle as usize)
            .map(|h| h.desc.byte_size())
            .ok_or(RuntimeError::UnknownHandle(handle))
    }

    /// (last writer, current readers) of a handle, for tests and debugging.
    pub fn handle_deps(
        &self,
        handle: HandleId,
    ) -> Result<(Option<TaskId>, Vec<TaskId>), RuntimeError> {
        let core = self.lock();
        core.handles
            .get(handle as usize)
            .map(|h| (h.last_writer, h.readers.clone()))
            .ok_or(RuntimeError::UnknownHandle(handle))
    }

    pub fn task_preds(&self, task: TaskId) -> Vec<TaskId> {
        let core = self.lock();
        core.tasks[task as usize].preds.to_vec()
    }

    pub fn task_state(&self, task: TaskId) -> TaskState {
        let core = self.lock();
        core.tasks[task as usize].state
    }

    pub fn n_workers(&self) -> usize {
        let core = self.lock();
        core.workers.len()
    }

    /// Install a previously saved perf model (pre-warming dmda).
    pub fn set_perf_model(&self, model: PerfModel) {
        let mut core = self.lock();
        core.perf = model;
    }

    pub fn perf_model(&self) -> PerfModel {
        let core = self.lock();
        core.perf.clone()
    }

    /// Drain, stop the workers, and return the run report.
    pub fn finish(mut self) -> Result<RunReport, RunError> {
        let drained = self.wait_idle();
        {
            let mut core = self.lock();
            core.shutdown = true;
        }
        self.shared.cv_work.notify_all();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        let mut core = self.shared.core.lock().unwrap();
        drained?;
        let wall_us = core.now_us();
        let workers = core
            .workers
            .iter()
            .map(|w| WorkerStats {
                class: w.class,
                class_name: core.machine.class(w.class).name.clone(),
                busy_us: w.busy_us,
                n_tasks: w.n_tasks,
            })
            .collect();
        let codelet_names: Vec<String> = core.codelets.iter().map(|c| c.name.clone()).collect();
        let codelet_classes = core
            .codelets
            .iter()
            .map(|c| c.kernels.iter().map(|k| k.is_some()).collect())
            .collect();
        let handles = core
            .handles
            .iter()
            .map(|h| HandleInfo {
                region: h.region,
                desc: h.desc,
            })
            .collect();
        let tasks = match core.record {
            RecordMode::Summary => Vec::new(),
            RecordMode::Full => core
                .tasks
                .iter()
                .enumerate()
                .map(|(id, t)| TaskRecord {
                    id: id as TaskId,
                    codelet: t.codelet,
                    tag: t.tag,
                    worker: t.worker,
                    class: if t.worker == usize::MAX {
                        0
                    } else {
                        core.workers[t.worker].class
                    },
                    start_us: t.start_us,
                    end_us: t.end_us,
                    ready_stamp: t.ready_stamp,
                    dispatch_stamp: t.dispatch_stamp,
                    preds: t.preds.clone(),
                    binds: t.binds.clone(),
                })
                .collect(),
        };
        let mut trace = std::mem::take(&mut core.trace);
        trace.sort_by_key(|e| (e.start_us, e.task));
        Ok(RunReport {
            wall_us,
            n_tasks: core.tasks.len() as u64,
            workers,
            codelet_names,
            codelet_classes,
            handles,
            tasks,
            trace,
            perf: core.perf.clone(),
            machine: core.machine.clone(),
            scheduler: core.sched,
        })
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        if self.threads.is_empty() {
            return;
        }
        {
            let mut core = self.shared.core.lock().unwrap();
            core.shutdown = true;
        }
        self.shared.cv_work.notify_all();
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

/// Sleep or spin until `deadline` (measured from `epoch`) has passed. Sleeps
/// for the bulk of long waits and spins the final stretch.
fn pad_until(epoch: Instant, deadline: Duration) {
    loop {
        let now = epoch.elapsed();
        if now >= deadline {
            return;
        }
        let remaining = deadline - now;
        if remaining > Duration::from_millis(1) {
            std::thread::sleep(remaining - Duration::from_micros(500));
        } else {
            std::hint::spin_loop();
        }
    }
}

struct Picked {
    task: TaskId,
    grants: Vec<Grant>,
    kernel: Arc<KernelFn>,
    pad: f64,
    arg: Option<TaskArg>,
    class: ClassId,
    epoch: Instant,
}

fn worker_loop(shared: Arc<Shared>, w: WorkerId) {
    loop {
        let picked = {
            let mut core = shared.core.lock().unwrap();
            loop {
                if core.shutdown {
                    return;
                }
                let pick = if core.error.is_none() {
                    sched::pick(&core, w)
                } else {
                    None
                };
                if let Some(t) = pick {
                    break take_task(&mut core, t, w);
                }
                core = shared.cv_work.wait(core).unwrap();
            }
        };

        let start = picked.epoch.elapsed();
        let mut scope = KernelScope {
            grants: &picked.grants,
            arg: picked.arg.as_ref(),
            class: picked.class,
            worker: w,
            task: picked.task,
        };
        let kernel = Arc::clone(&picked.kernel);
        let outcome = catch_unwind(AssertUnwindSafe(|| kernel(&mut scope)));
        let kernel_elapsed = picked.epoch.elapsed().saturating_sub(start);
        if picked.pad > 1.0 {
            pad_until(picked.epoch, start + kernel_elapsed.mul_f64(picked.pad));
        }
        let end = picked.epoch.elapsed();

        let mut core = shared.core.lock().unwrap();
        complete_task(&mut core, &picked, w, start, end, outcome);
        shared.cv_work.notify_all();
        shared.cv_state.notify_all();
    }
}

/// Transition `t` to Running on worker `w` and collect everything the kernel
/// call needs, so the lock can be released during execution.
fn take_task(core: &mut Core, t: TaskId, w: WorkerId) -> Picked {
    let ti = t as usize;
    let now = core.now_us() as f64;
    let class = core.workers[w].class;
    let codelet_id = core.tasks[ti].codelet as usize;
    let perf_key = core.codelets[codelet_id].perf_key.clone();
    let sizes = core.tasks[ti].sizes.clone();
    let est = core.perf.estimate(&perf_key, class, &sizes, &core.machine);
    core.ready.remove(&t);
    let stamp = core.next_stamp();
    core.tasks[ti].state = TaskState::Running;
    core.tasks[ti].dispatch_stamp = stamp;
    core.tasks[ti].worker = w;
    core.workers[w].busy_until_us = now + est;
    core.n_running += 1;
    let grants = core.tasks[ti]
        .binds
        .iter()
        .map(|&(h, mode)| {
            let he = &core.handles[h as usize];
            Grant {
                region: Arc::clone(&core.regions[he.region]),
                desc: he.desc,
                mode,
            }
        })
        .collect();
    let kernel = core.codelets[codelet_id].kernels[class]
        .as_ref()
        .expect("scheduler picked a class without a kernel")
        .clone();
    Picked {
        task: t,
        grants,
        kernel,
        pad: core.codelets[codelet_id].pads[class],
        arg: core.tasks[ti].arg.clone(),
        class,
        epoch: core.epoch,
    }
}

fn complete_task(
    core: &mut Core,
    picked: &Picked,
    w: WorkerId,
    start: Duration,
    end: Duration,
    outcome: std::thread::Result<Result<(), crate::codelet::KernelError>>,
) {
    let t = picked.task;
    let ti = t as usize;
    let now = core.now_us() as f64;
    let start_us = start.as_micros() as u64;
    let end_us = end.as_micros() as u64;
    let dur_us = end.saturating_sub(start).as_secs_f64() * 1e6;
    let codelet_id = core.tasks[ti].codelet;
    let perf_key = core.codelets[codelet_id as usize].perf_key.clone();
    let sizes = core.tasks[ti].sizes.clone();
    core.perf.record(&perf_key, picked.class, &sizes, dur_us);
    if core.record == RecordMode::Full {
        core.trace.push(TraceEvent {
            worker: w,
            task: t,
            codelet: codelet_id,
            start_us,
            end_us,
        });
    }
    core.workers[w].busy_us += end_us.saturating_sub(start_us);
    core.workers[w].n_tasks += 1;
    core.workers[w].busy_until_us = now;
    core.tasks[ti].state = TaskState::Done;
    core.tasks[ti].start_us = start_us;
    core.tasks[ti].end_us = end_us;
    core.tasks[ti].arg = None;
    core.n_done += 1;
    core.n_running -= 1;

    let binds = core.tasks[ti].binds.clone();
    for &(h, mode) in binds.iter() {
        let he = &mut core.handles[h as usize];
        he.in_flight -= 1;
        if mode.writes() {
            he.resident = Some(picked.class);
        }
    }

    match outcome {
        Ok(Ok(())) => {
            let succs = std::mem::take(&mut core.tasks[ti].succs);
            for s in succs {
                let st = &mut core.tasks[s as usize];
                st.pending -= 1;
                if st.pending == 0 {
                    core.mark_ready(s);
                }
            }
        }
        Ok(Err(kernel_err)) => {
            if core.error.is_none() {
                let codelet = core.codelets[codelet_id as usize].name.clone();
                core.error = Some(RunError::Kernel {
                    task: t,
                    codelet,
                    source: kernel_err,
                });
            }
        }
        Err(panic) => {
            let message = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "opaque panic payload".to_string());
            if core.error.is_none() {
                let codelet = core.codelets[codelet_id as usize].name.clone();
                core.error = Some(RunError::KernelPanic {
                    task: t,
                    codelet,
                    message,
                });
            }
        }
    }
    if core.record == RecordMode::Summary {
        let entry = &mut core.tasks[ti];
        entry.binds = Box::new([]);
        entry.preds = Box::new([]);
        entry.sizes = Box::new([]);
        entry.succs = Vec::new();
    }
}
