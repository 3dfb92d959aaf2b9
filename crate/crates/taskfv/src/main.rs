//! `taskfv` binary: one-shot solver runs and the experiment harnesses.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on numerical failures
//! (CFL violations, non-realizable moments), 3 on I/O failures.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fvm::solver::{self, OutputConfig, RunConfig};
use fvm::{Domain, EulerCase, FvmError};
use taskfv::config::{parse_run_settings, parse_sched, RunArgs, UsageError};
use taskfv::experiments::{
    run_converge, run_overhead, run_scale, run_spray_sched, ConvergeSpec, OverheadError,
    OverheadSpec, ScaleSpec, SpraySchedSpec, CONVERGE_HEADER, OVERHEAD_HEADER, SCALE_HEADER,
    SPRAY_HEADER,
};
use taskrt::{KernelErrorKind, RunError};

#[derive(Parser)]
#[command(
    name = "taskfv",
    about = "Task-based finite-volume solver and experiment harness"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run(RunArgs),
    /// Mesh-convergence study for the Euler test cases.
    Converge(ConvergeArgs),
    /// Strong-scaling sweep over workers and partition counts.
    Scale(ScaleArgs),
    /// Task-granularity overhead microbenchmark.
    Overhead(OverheadArgs),
    /// Scheduler comparison on the spray case with a virtual accelerator.
    SpraySched(SpraySchedArgs),
}

#[derive(Args)]
struct ConvergeArgs {
    /// euler-cosine, euler-vortex, or both.
    #[arg(long, default_value = "both")]
    case: String,
    /// Mesh sizes (cells per axis).
    #[arg(long, value_delimiter = ',', default_value = "32,64,128,256,512")]
    meshes: Vec<usize>,
    /// Subdomains per axis.
    #[arg(long, default_value_t = 2)]
    npart: usize,
    #[arg(long, default_value_t = 2)]
    workers: usize,
    /// eager or dmda.
    #[arg(long, default_value = "eager")]
    sched: String,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScaleArgs {
    #[arg(long, default_value_t = 256)]
    nx: usize,
    #[arg(long, default_value_t = 10)]
    iters: u64,
    /// Partition counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,64,4096")]
    nparts: Vec<usize>,
    /// Worker counts to sweep (1 is added for the baseline).
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    workers: Vec<usize>,
    /// eager or dmda.
    #[arg(long, default_value = "eager")]
    sched: String,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OverheadArgs {
    /// Busy-wait durations in microseconds.
    #[arg(long, value_delimiter = ',', default_value = "4,16,64,256,1024,4096")]
    durations: Vec<u64>,
    /// Worker counts to sweep.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    workers: Vec<usize>,
    /// Independent tasks per configuration.
    #[arg(long, default_value_t = 1000)]
    tasks: usize,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpraySchedArgs {
    #[arg(long, default_value_t = 200)]
    nx: usize,
    #[arg(long, default_value_t = 100)]
    iters: u64,
    /// Time step (default: half the transport stability limit, 0.5 / nx).
    #[arg(long)]
    dt: Option<f64>,
    /// Partition layouts, e.g. 2x2,4x4,4x8.
    #[arg(long, value_delimiter = ',', default_value = "2x2,4x4,4x8")]
    partitions: Vec<String>,
    /// CPU workers; the accelerator machines add one accelerator worker.
    #[arg(long, default_value_t = 2)]
    cpu_workers: usize,
    /// sourceStep speed factor of the accelerator class.
    #[arg(long, default_value_t = 10.0)]
    accel_factor: f64,
    /// Spray evaporation rate K.
    #[arg(long, default_value_t = 1.0)]
    evap: f64,
    /// Spray drag relaxation time theta.
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Directory for per-run execution traces.
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// CSV output path (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Usage(#[from] UsageError),
    #[error(transparent)]
    Fvm(#[from] FvmError),
    #[error(transparent)]
    Overhead(#[from] OverheadError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Fvm(e) => match e {
                FvmError::NotDivisible { .. } | FvmError::SubdomainTooSmall { .. } => 1,
                FvmError::Numerics(_) => 2,
                FvmError::Run(RunError::Kernel { source, .. })
                    if source.kind == KernelErrorKind::Io =>
                {
                    3
                }
                FvmError::Run(_) | FvmError::Runtime(_) => 2,
                FvmError::Io(_) | FvmError::Format(_) => 3,
            },
            CliError::Overhead(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.exit_code() {
                0 => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Converge(args) => cmd_converge(&args),
        Command::Scale(args) => cmd_scale(&args),
        Command::Overhead(args) => cmd_overhead(&args),
        Command::SpraySched(args) => cmd_spray_sched(&args),
    }
}

fn csv_sink(out: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    match out {
        None => Ok(Box::new(std::io::stdout().lock())),
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            Ok(Box::new(std::io::BufWriter::new(std::fs::File::create(
                path,
            )?)))
        }
    }
}

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let settings = parse_run_settings(args)?;
    let sys = settings.system.build();

    let mut cfg = RunConfig::new(
        settings.nx,
        settings.ny,
        settings.npartx,
        settings.nparty,
        settings.dt,
        settings.iters,
    );
    if let Some(prefix) = &settings.out {
        cfg.output = Some(OutputConfig {
            prefix: prefix.clone(),
            every: settings.output_every.unwrap_or(0),
        });
    }

    let outcome = solver::run(sys.clone(), settings.machine(), settings.sched, &cfg, None)?;

    println!(
        "system={} nx={} ny={} npartx={} nparty={} sched={} workers={}",
        sys.name(),
        settings.nx,
        settings.ny,
        settings.npartx,
        settings.nparty,
        settings.sched,
        outcome.report.machine.n_workers(),
    );
    println!(
        "iters={} dt={:e} t_final={:e}",
        settings.iters, settings.dt, outcome.t_final
    );
    println!(
        "wall_s={:.6} tasks={}",
        outcome.report.wall_us as f64 / 1e6,
        outcome.report.n_tasks
    );
    let domain = Domain::unit(settings.nx, settings.ny);
    if let Some(norms) = solver::norms_vs_exact(&*sys, &domain, &outcome.field, outcome.t_final) {
        println!("l1_rho={:.6e} l2_rho={:.6e}", norms.l1[0], norms.l2[0]);
    }
    if let Some(prefix) = &settings.out {
        println!("snapshots={}-*.tfv", prefix.display());
    }
    Ok(())
}

fn cmd_converge(args: &ConvergeArgs) -> Result<(), CliError> {
    let cases = match args.case.as_str() {
        "euler-cosine" => vec![EulerCase::Cosine],
        "euler-vortex" => vec![EulerCase::Vortex],
        "both" => vec![EulerCase::Cosine, EulerCase::Vortex],
        other => return Err(UsageError::UnknownSystem(other.to_string()).into()),
    };
    if args.meshes.len() < 2 {
        return Err(UsageError::Invalid("need at least two meshes".into()).into());
    }
    let sched = parse_sched(&args.sched)?;
    let mut out = csv_sink(&args.out)?;
    writeln!(out, "{CONVERGE_HEADER}")?;
    for case in cases {
        let spec = ConvergeSpec {
            case,
            meshes: args.meshes.clone(),
            npart: args.npart,
            workers: args.workers,
            sched,
        };
        run_converge(&spec, &mut out)?;
    }
    Ok(())
}

fn cmd_scale(args: &ScaleArgs) -> Result<(), CliError> {
    let spec = ScaleSpec {
        nx: args.nx,
        iters: args.iters,
        nparts: args.nparts.clone(),
        workers: args.workers.clone(),
        sched: parse_sched(&args.sched)?,
    };
    let mut out = csv_sink(&args.out)?;
    writeln!(out, "{SCALE_HEADER}")?;
    run_scale(&spec, &mut out)?;
    Ok(())
}

fn cmd_overhead(args: &OverheadArgs) -> Result<(), CliError> {
    let spec = OverheadSpec {
        durations_us: args.durations.clone(),
        workers: args.workers.clone(),
        tasks: args.tasks,
    };
    let mut out = csv_sink(&args.out)?;
    writeln!(out, "{OVERHEAD_HEADER}")?;
    run_overhead(&spec, &mut out)?;
    Ok(())
}

fn parse_partition(raw: &str) -> Result<(usize, usize), UsageError> {
    let invalid = || UsageError::InvalidValue {
        key: "partitions".to_string(),
        message: format!("expected NPXxNPY, got `{raw}`"),
    };
    let (x, y) = raw.split_once('x').ok_or_else(invalid)?;
    let npx: usize = x.parse().map_err(|_| invalid())?;
    let npy: usize = y.parse().map_err(|_| invalid())?;
    if npx == 0 || npy == 0 {
        return Err(invalid());
    }
    Ok((npx, npy))
}

fn cmd_spray_sched(args: &SpraySchedArgs) -> Result<(), CliError> {
    let partitions = args
        .partitions
        .iter()
        .map(|p| parse_partition(p))
        .collect::<Result<Vec<_>, _>>()?;
    let spec = SpraySchedSpec {
        nx: args.nx,
        iters: args.iters,
        dt: args.dt.unwrap_or(0.5 / args.nx as f64),
        partitions,
        cpu_workers: args.cpu_workers,
        accel_factor: args.accel_factor,
        evap: args.evap,
        theta: args.theta,
        trace_dir: args.trace_dir.clone(),
    };
    let mut out = csv_sink(&args.out)?;
    writeln!(out, "{SPRAY_HEADER}")?;
    run_spray_sched(&spec, &mut out)?;
    Ok(())
}
