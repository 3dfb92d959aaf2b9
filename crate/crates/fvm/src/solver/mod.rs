//! Task-graph driver.
//!
//! One run registers a fixed set of codelets, one group of handles per
//! subdomain (state, residual, four overlap buffers), and submits the same
//! task kinds every step, kind-major across subdomains: `checkTimeStep`,
//! `copyOverlaps`, `internalResiduals`, `borderResiduals`, `update`, and
//! `sourceStep` for systems with a source term. All data dependencies are
//! inferred by the runtime from the declared handle accesses.
//!
//! Snapshots run concurrently with the stepping: per-subdomain `gather`
//! tasks copy the state into blocks of a partitioned global handle, a switch
//! assembles it, `outputToDisk` writes the file, and a second switch hands
//! the blocks back. The submission loop runs a bounded number of steps ahead
//! of execution and throttles itself by waiting on the step fences.

mod norms;
pub mod output;

pub use norms::{diff_norms, norms_vs_exact, totals, ErrorNorms};

use std::path::{Path, PathBuf};
use std::sync::Arc;

use taskrt::{
    AccessMode, BlockDesc, Codelet, CodeletId, Engine, EngineConfig, HandleId, KernelError,
    Machine, PerfModel, RecordMode, RunReport, SchedulerKind, TaskArg, TaskId, TaskTag,
};

use crate::error::FvmError;
use crate::grid::Field;
use crate::mesh::{Domain, Partition, Side};
use crate::numerics;
use crate::reference::initial_field;
use crate::systems::System;

/// How many steps the submission loop may run ahead of completed work.
const LOOKAHEAD_STEPS: u64 = 4;

/// Snapshot schedule: the initial state, every `every`-th step, and the
/// final state are written to `<prefix>-<step>.tfv`.
#[derive(Clone, Debug)]
pub struct OutputConfig {
    pub prefix: PathBuf,
    pub every: u64,
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub nx: usize,
    pub ny: usize,
    pub npartx: usize,
    pub nparty: usize,
    pub dt: f64,
    pub steps: u64,
    pub output: Option<OutputConfig>,
    pub record: RecordMode,
}

impl RunConfig {
    pub fn new(nx: usize, ny: usize, npartx: usize, nparty: usize, dt: f64, steps: u64) -> Self {
        Self {
            nx,
            ny,
            npartx,
            nparty,
            dt,
            steps,
            output: None,
            record: RecordMode::Full,
        }
    }
}

/// Final state of a run plus the runtime's execution report.
#[derive(Debug)]
pub struct RunOutcome {
    pub field: Field,
    pub t_final: f64,
    pub report: RunReport,
}

/// File written for the state after `step` steps.
pub fn snapshot_path(prefix: &Path, step: u64) -> PathBuf {
    PathBuf::from(format!("{}-{:06}.tfv", prefix.display(), step))
}

fn output_due(step: u64, total_steps: u64, every: u64) -> bool {
    step == 0 || step == total_steps || (every > 0 && step.is_multiple_of(every))
}

struct SubHandles {
    u: HandleId,
    rhs: HandleId,
    // Overlap buffers owned by this subdomain: its view of the adjacent
    // column or row of each periodic neighbour.
    ovlp_w: HandleId,
    ovlp_e: HandleId,
    ovlp_s: HandleId,
    ovlp_n: HandleId,
    /// Block of the snapshot handle covering this subdomain.
    block: Option<HandleId>,
}

struct Codelets {
    check: CodeletId,
    copy: CodeletId,
    internal: CodeletId,
    border: CodeletId,
    update: CodeletId,
    source: Option<CodeletId>,
    gather: Option<CodeletId>,
    to_disk: Option<CodeletId>,
}

/// Context shared by every kernel closure of one run.
struct KernelCtx {
    sys: Arc<dyn System>,
    domain: Domain,
    partition: Partition,
    dt: f64,
}

/// Argument of an `outputToDisk` task.
struct Snapshot {
    path: PathBuf,
    time: f64,
}

/// Executes `cfg.steps` steps of `sys` on the runtime and returns the final
/// assembled field together with the execution report. A warmed performance
/// model may be supplied to inform the scheduler from the first task on.
pub fn run(
    sys: Arc<dyn System>,
    machine: Machine,
    sched: SchedulerKind,
    cfg: &RunConfig,
    perf: Option<PerfModel>,
) -> Result<RunOutcome, FvmError> {
    let domain = Domain::unit(cfg.nx, cfg.ny);
    let partition = Partition::new(domain, cfg.npartx, cfg.nparty)?;
    for s in partition.subdomains() {
        if s.nxl < 2 || s.nyl < 2 {
            return Err(FvmError::SubdomainTooSmall {
                index: s.index,
                nxl: s.nxl,
                nyl: s.nyl,
            });
        }
    }
    let nv = sys.n_vars();
    let np = partition.n_subdomains();

    let init = initial_field(&*sys, &domain);
    sys.startup_check(&init, &domain, cfg.dt)
        .map_err(|e| FvmError::Numerics(e.message))?;
    if let Some(out) = &cfg.output {
        if let Some(parent) = out.prefix.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
    }

    let engine = Engine::with_config(machine, sched, EngineConfig { record: cfg.record });
    if let Some(model) = perf {
        engine.set_perf_model(model);
    }

    let mut subs = Vec::with_capacity(np);
    for s in partition.subdomains() {
        let u = engine.register_handle(BlockDesc::grid(s.nxl, s.nyl, nv))?;
        let rhs = engine.register_handle(BlockDesc::grid(s.nxl, s.nyl, nv))?;
        let ovlp_w = engine.register_handle(BlockDesc::grid(1, s.nyl, nv))?;
        let ovlp_e = engine.register_handle(BlockDesc::grid(1, s.nyl, nv))?;
        let ovlp_s = engine.register_handle(BlockDesc::grid(s.nxl, 1, nv))?;
        let ovlp_n = engine.register_handle(BlockDesc::grid(s.nxl, 1, nv))?;
        engine.write_handle(u, &init.window(s.gx0, s.gy0, s.nxl, s.nyl))?;
        subs.push(SubHandles {
            u,
            rhs,
            ovlp_w,
            ovlp_e,
            ovlp_s,
            ovlp_n,
            block: None,
        });
    }

    let mut global = None;
    if cfg.output.is_some() {
        let g = engine.register_handle(BlockDesc::grid(cfg.nx, cfg.ny, nv))?;
        let descs: Vec<BlockDesc> = partition
            .subdomains()
            .map(|s| BlockDesc {
                offset: (s.gy0 * cfg.nx + s.gx0) * nv,
                rows: s.nyl,
                cols: s.nxl,
                ld: cfg.nx,
                item: nv,
            })
            .collect();
        let blocks = engine.partition_handle(g, &descs)?;
        for (sh, b) in subs.iter_mut().zip(blocks) {
            sh.block = Some(b);
        }
        global = Some(g);
    }

    let ctx = Arc::new(KernelCtx {
        sys: sys.clone(),
        domain,
        partition,
        dt: cfg.dt,
    });
    let codelets = register_codelets(&engine, &ctx, cfg.output.is_some())?;

    let out_every = cfg.output.as_ref().map(|o| o.every);
    if out_every.is_some_and(|every| output_due(0, cfg.steps, every)) {
        submit_snapshot(&engine, &codelets, &subs, global, cfg, 0)?;
    }

    let mut fences: Vec<TaskId> = Vec::with_capacity(cfg.steps as usize);
    for step in 0..cfg.steps {
        if step >= LOOKAHEAD_STEPS {
            engine.wait_task(fences[(step - LOOKAHEAD_STEPS) as usize])?;
        }
        let group = (step + 1) as u32;
        let tag = |p: usize| {
            Some(TaskTag {
                group,
                unit: p as u32,
            })
        };

        for (p, sh) in subs.iter().enumerate() {
            engine.submit_with(
                codelets.check,
                &[(sh.u, AccessMode::Read)],
                tag(p),
                Some(Arc::new(p) as TaskArg),
            )?;
        }
        for (p, sh) in subs.iter().enumerate() {
            let west = &subs[partition.neighbor(p, Side::West)];
            let south = &subs[partition.neighbor(p, Side::South)];
            let east = &subs[partition.neighbor(p, Side::East)];
            let north = &subs[partition.neighbor(p, Side::North)];
            engine.submit_with(
                codelets.copy,
                &[
                    (west.ovlp_e, AccessMode::Write),
                    (south.ovlp_n, AccessMode::Write),
                    (east.ovlp_w, AccessMode::Write),
                    (north.ovlp_s, AccessMode::Write),
                    (sh.u, AccessMode::Read),
                ],
                tag(p),
                None,
            )?;
        }
        for (p, sh) in subs.iter().enumerate() {
            engine.submit_with(
                codelets.internal,
                &[(sh.u, AccessMode::Read), (sh.rhs, AccessMode::Write)],
                tag(p),
                None,
            )?;
        }
        for (p, sh) in subs.iter().enumerate() {
            engine.submit_with(
                codelets.border,
                &[
                    (sh.ovlp_e, AccessMode::Read),
                    (sh.ovlp_n, AccessMode::Read),
                    (sh.ovlp_w, AccessMode::Read),
                    (sh.ovlp_s, AccessMode::Read),
                    (sh.u, AccessMode::Read),
                    (sh.rhs, AccessMode::ReadWrite),
                ],
                tag(p),
                None,
            )?;
        }
        let mut last = 0;
        for (p, sh) in subs.iter().enumerate() {
            last = engine.submit_with(
                codelets.update,
                &[(sh.u, AccessMode::ReadWrite), (sh.rhs, AccessMode::Read)],
                tag(p),
                None,
            )?;
        }
        if let Some(source) = codelets.source {
            for (p, sh) in subs.iter().enumerate() {
                last = engine.submit_with(
                    source,
                    &[(sh.u, AccessMode::ReadWrite)],
                    tag(p),
                    Some(Arc::new(p) as TaskArg),
                )?;
            }
        }
        fences.push(last);

        if out_every.is_some_and(|every| output_due(step + 1, cfg.steps, every)) {
            submit_snapshot(&engine, &codelets, &subs, global, cfg, step + 1)?;
        }
    }

    engine.wait_idle()?;

    let mut field = Field::zeros(cfg.nx, cfg.ny, nv);
    for (p, sh) in subs.iter().enumerate() {
        let s = partition.subdomain(p);
        let data = engine.read_handle(sh.u)?;
        field.set_window(s.gx0, s.gy0, s.nxl, s.nyl, &data);
    }
    let report = engine.finish()?;

    Ok(RunOutcome {
        field,
        t_final: cfg.dt * cfg.steps as f64,
        report,
    })
}

fn submit_snapshot(
    engine: &Engine,
    codelets: &Codelets,
    subs: &[SubHandles],
    global: Option<HandleId>,
    cfg: &RunConfig,
    step: u64,
) -> Result<(), FvmError> {
    let g = global.expect("snapshot without a global handle");
    let gather = codelets.gather.expect("snapshot without a gather codelet");
    let to_disk = codelets.to_disk.expect("snapshot without an output codelet");
    let prefix = &cfg.output.as_ref().expect("snapshot without a schedule").prefix;

    for (p, sh) in subs.iter().enumerate() {
        let block = sh.block.expect("snapshot without block handles");
        engine.submit_with(
            gather,
            &[(sh.u, AccessMode::Read), (block, AccessMode::Write)],
            Some(TaskTag {
                group: step as u32,
                unit: p as u32,
            }),
            None,
        )?;
    }
    engine.submit_switch_to_global(g)?;
    let snap = Snapshot {
        path: snapshot_path(prefix, step),
        time: step as f64 * cfg.dt,
    };
    engine.submit_with(
        to_disk,
        &[(g, AccessMode::Read)],
        Some(TaskTag {
            group: step as u32,
            unit: 0,
        }),
        Some(Arc::new(snap) as TaskArg),
    )?;
    engine.submit_switch_to_blocks(g)?;
    Ok(())
}

fn register_codelets(
    engine: &Engine,
    ctx: &Arc<KernelCtx>,
    with_output: bool,
) -> Result<Codelets, FvmError> {
    use AccessMode::{Read, ReadWrite, Write};

    let c = ctx.clone();
    let check = engine.register_codelet(Codelet::new("checkTimeStep", &[Read]).kernel(
        move |scope| {
            let p = *scope.arg::<usize>();
            let u = scope.read(0);
            numerics::check_time_step(&*c.sys, &u, c.dt, c.domain.dx, c.domain.dy)
                .map_err(|e| KernelError::numerical(format!("subdomain {p}: {e}")))
        },
    ))?;

    let copy = engine.register_codelet(
        Codelet::new("copyOverlaps", &[Write, Write, Write, Write, Read]).kernel(move |scope| {
            let u = scope.read(4);
            let (nx, ny) = (u.cols(), u.rows());
            // Slots serve the overlap buffers of the four neighbours: the
            // west neighbour sees this block's west column on its east side,
            // and so on around.
            let mut west_sees = scope.write(0);
            let mut south_sees = scope.write(1);
            let mut east_sees = scope.write(2);
            let mut north_sees = scope.write(3);
            for j in 0..ny {
                west_sees.item_mut(0, j).copy_from_slice(u.item(0, j));
                east_sees.item_mut(0, j).copy_from_slice(u.item(nx - 1, j));
            }
            for i in 0..nx {
                south_sees.item_mut(i, 0).copy_from_slice(u.item(i, 0));
                north_sees.item_mut(i, 0).copy_from_slice(u.item(i, ny - 1));
            }
            Ok(())
        }),
    )?;

    let c = ctx.clone();
    let internal = engine.register_codelet(
        Codelet::new("internalResiduals", &[Read, Write]).kernel(move |scope| {
            let u = scope.read(0);
            let mut rhs = scope.write(1);
            numerics::internal_residuals(&*c.sys, &u, &mut rhs, c.domain.dx, c.domain.dy)
                .map_err(|e| KernelError::numerical(e.to_string()))
        }),
    )?;

    let c = ctx.clone();
    let border = engine.register_codelet(
        Codelet::new("borderResiduals", &[Read, Read, Read, Read, Read, ReadWrite]).kernel(
            move |scope| {
                let e = scope.read(0);
                let n = scope.read(1);
                let w = scope.read(2);
                let s = scope.read(3);
                let u = scope.read(4);
                let mut rhs = scope.write(5);
                numerics::border_residuals(
                    &*c.sys,
                    &u,
                    &e,
                    &n,
                    &w,
                    &s,
                    &mut rhs,
                    c.domain.dx,
                    c.domain.dy,
                )
                .map_err(|e| KernelError::numerical(e.to_string()))
            },
        ),
    )?;

    let c = ctx.clone();
    let update = engine.register_codelet(Codelet::new("update", &[ReadWrite, Read]).kernel(
        move |scope| {
            let mut u = scope.write(0);
            let rhs = scope.read(1);
            numerics::apply_update(&mut u, &rhs, c.dt);
            Ok(())
        },
    ))?;

    let source = if ctx.sys.has_source() {
        let c = ctx.clone();
        Some(
            engine.register_codelet(Codelet::new("sourceStep", &[ReadWrite]).kernel(
                move |scope| {
                    let p = *scope.arg::<usize>();
                    let sub = c.partition.subdomain(p);
                    let mut u = scope.write(0);
                    numerics::source_step(&*c.sys, &mut u, c.dt, sub.gx0, sub.gy0, &c.domain)
                        .map_err(|e| KernelError::numerical(format!("subdomain {p}: {e}")))
                },
            ))?,
        )
    } else {
        None
    };

    let (gather, to_disk) = if with_output {
        let gather = engine.register_codelet(Codelet::new("gather", &[Read, Write]).kernel(
            move |scope| {
                let u = scope.read(0);
                let mut block = scope.write(1);
                for j in 0..u.rows() {
                    for i in 0..u.cols() {
                        block.item_mut(i, j).copy_from_slice(u.item(i, j));
                    }
                }
                Ok(())
            },
        ))?;

        let c = ctx.clone();
        let to_disk = engine.register_codelet(Codelet::new("outputToDisk", &[Read]).kernel(
            move |scope| {
                let snap = scope.arg::<Snapshot>();
                let g = scope.read(0);
                let (nx, ny, nv) = (g.cols(), g.rows(), g.item_len());
                let mut data = Vec::with_capacity(nx * ny * nv);
                for j in 0..ny {
                    for i in 0..nx {
                        data.extend_from_slice(g.item(i, j));
                    }
                }
                let field = Field::from_vec(nx, ny, nv, data).expect("snapshot dimensions");
                output::write_field(&snap.path, &field, snap.time, c.sys.name())
                    .map_err(|e| KernelError::io(format!("writing {}: {e}", snap.path.display())))
            },
        ))?;
        (Some(gather), Some(to_disk))
    } else {
        (None, None)
    };

    Ok(Codelets {
        check,
        copy,
        internal,
        border,
        update,
        source,
        gather,
        to_disk,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snapshot_schedule_covers_initial_final_and_multiples() {
        assert!(output_due(0, 60, 20));
        assert!(output_due(20, 60, 20));
        assert!(output_due(40, 60, 20));
        assert!(output_due(60, 60, 20));
        assert!(!output_due(30, 60, 20));
        // every = 0 still writes the first and last states.
        assert!(output_due(0, 5, 0));
        assert!(output_due(5, 5, 0));
        assert!(!output_due(3, 5, 0));
    }

    #[test]
    fn snapshot_paths_embed_the_step() {
        let p = snapshot_path(Path::new("out/run"), 40);
        assert_eq!(p, PathBuf::from("out/run-000040.tfv"));
    }
}
