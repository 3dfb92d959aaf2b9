//! Run configuration: flag definitions, the flat `key = value` config file,
//! and resolution of both into validated run settings. Flags override file
//! values; unknown file keys are rejected.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use clap::Args;
use fvm::{Euler, Spray, System};
use taskrt::{DeviceClass, Machine, SchedulerKind};

/// Speed factors of the virtual accelerator class relative to a CPU worker,
/// by performance key. The source step gets the configured factor; the
/// remaining compute kernels and the copy-like kernels use fixed defaults
/// encoding that copies are not worth running on an accelerator.
pub const ACCEL_COMPUTE_SPEED: f64 = 2.6;
pub const ACCEL_COPY_SPEED: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum UsageError {
    #[error("config file {path}: {message}")]
    ConfigFile { path: String, message: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for `{key}`: {message}")]
    InvalidValue { key: String, message: String },
    #[error("unknown system `{0}` (expected euler-cosine, euler-vortex, or spray)")]
    UnknownSystem(String),
    #[error("unknown scheduler `{0}` (expected eager or dmda)")]
    UnknownScheduler(String),
    #[error("give at most two of --dt, --tfinal, --iters")]
    OverdeterminedTime,
    #[error("time stepping needs two of --dt, --tfinal, --iters")]
    UnderdeterminedTime,
    #[error("{0}")]
    Invalid(String),
}

/// Flags of the `run` subcommand; every value may instead come from the
/// `--config` file under the same name.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// Flat `key = value` config file supplying defaults for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Cells along x.
    #[arg(long)]
    pub nx: Option<usize>,
    /// Cells along y (defaults to nx).
    #[arg(long)]
    pub ny: Option<usize>,
    /// Subdomains along x.
    #[arg(long)]
    pub npartx: Option<usize>,
    /// Subdomains along y (defaults to npartx).
    #[arg(long)]
    pub nparty: Option<usize>,
    /// euler-cosine, euler-vortex, or spray.
    #[arg(long)]
    pub system: Option<String>,
    /// Time-step size.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time; combined with --dt it implies the iteration count.
    #[arg(long)]
    pub tfinal: Option<f64>,
    /// Iteration count.
    #[arg(long)]
    pub iters: Option<u64>,
    /// eager or dmda.
    #[arg(long)]
    pub sched: Option<String>,
    /// CPU worker count.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Add one virtual accelerator worker, e.g. `accel:10` for a class
    /// named `accel` running the source step 10x faster than a CPU.
    #[arg(long, value_name = "CLASS:FACTOR")]
    pub virtual_accel: Option<String>,
    /// Write a snapshot every K steps (requires --out).
    #[arg(long, value_name = "K")]
    pub output_every: Option<u64>,
    /// Snapshot path prefix; enables output of the initial and final states.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed recorded with sampled experiments.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Spray evaporation rate K.
    #[arg(long)]
    pub spray_evap: Option<f64>,
    /// Spray drag relaxation time theta.
    #[arg(long)]
    pub spray_theta: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SystemKind {
    EulerCosine,
    EulerVortex,
    Spray { evap: f64, theta: f64 },
}

impl SystemKind {
    pub fn build(&self) -> Arc<dyn System> {
        match *self {
            SystemKind::EulerCosine => Arc::new(Euler::cosine()),
            SystemKind::EulerVortex => Arc::new(Euler::vortex()),
            SystemKind::Spray { evap, theta } => Arc::new(Spray::new(evap, theta)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AccelSpec {
    pub class: String,
    pub factor: f64,
}

/// Fully resolved settings for one solver run.
#[derive(Clone, Debug)]
pub struct RunSettings {
    pub system: SystemKind,
    pub nx: usize,
    pub ny: usize,
    pub npartx: usize,
    pub nparty: usize,
    pub dt: f64,
    pub iters: u64,
    pub sched: SchedulerKind,
    pub workers: usize,
    pub accel: Option<AccelSpec>,
    pub output_every: Option<u64>,
    pub out: Option<PathBuf>,
    pub seed: u64,
}

impl RunSettings {
    /// The worker pool: `workers` CPU workers plus one accelerator worker
    /// when a virtual accelerator is configured.
    pub fn machine(&self) -> Machine {
        match &self.accel {
            None => Machine::homogeneous(self.workers),
            Some(spec) => heterogeneous_machine(self.workers, &spec.class, spec.factor),
        }
    }
}

/// `cpu_workers` workers of a unit-speed CPU class plus one worker of an
/// accelerator class that runs the source step `source_factor` times faster,
/// the other compute kernels moderately faster, and copies slower.
pub fn heterogeneous_machine(cpu_workers: usize, class: &str, source_factor: f64) -> Machine {
    let cpu = DeviceClass::new("cpu");
    let accel = DeviceClass::new(class)
        .with_speed("sourceStep", source_factor)
        .with_speed("internalResiduals", ACCEL_COMPUTE_SPEED)
        .with_speed("checkTimeStep", ACCEL_COMPUTE_SPEED)
        .with_speed("update", ACCEL_COMPUTE_SPEED)
        .with_speed("copyOverlaps", ACCEL_COPY_SPEED)
        .with_speed("borderResiduals", ACCEL_COPY_SPEED);
    let mut workers = vec![0; cpu_workers];
    workers.push(1);
    Machine::new(vec![cpu, accel], workers).expect("two named classes with workers")
}

const CONFIG_KEYS: &[&str] = &[
    "nx",
    "ny",
    "npartx",
    "nparty",
    "system",
    "dt",
    "tfinal",
    "iters",
    "sched",
    "workers",
    "virtual-accel",
    "output-every",
    "out",
    "seed",
    "spray-evap",
    "spray-theta",
];

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped; keys outside the flag set are rejected.
pub fn parse_config_file(text: &str) -> Result<HashMap<String, String>, UsageError> {
    let mut map = HashMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(UsageError::Invalid(format!(
                "config line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        if !CONFIG_KEYS.contains(&key.as_str()) {
            return Err(UsageError::UnknownKey(key));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

fn parsed<T: std::str::FromStr>(
    file: &HashMap<String, String>,
    key: &str,
) -> Result<Option<T>, UsageError>
where
    T::Err: std::fmt::Display,
{
    match file.get(key) {
        None => Ok(None),
        Some(raw) => raw.parse().map(Some).map_err(|e| UsageError::InvalidValue {
            key: key.to_string(),
            message: format!("{e}"),
        }),
    }
}

pub fn parse_sched(name: &str) -> Result<SchedulerKind, UsageError> {
    match name {
        "eager" => Ok(SchedulerKind::Eager),
        "dmda" => Ok(SchedulerKind::Dmda),
        other => Err(UsageError::UnknownScheduler(other.to_string())),
    }
}

fn parse_accel(raw: &str) -> Result<AccelSpec, UsageError> {
    let invalid = |message: &str| UsageError::InvalidValue {
        key: "virtual-accel".to_string(),
        message: message.to_string(),
    };
    let (class, factor) = raw
        .split_once(':')
        .ok_or_else(|| invalid("expected CLASS:FACTOR"))?;
    if class.is_empty() {
        return Err(invalid("class name is empty"));
    }
    let factor: f64 = factor
        .parse()
        .map_err(|_| invalid("factor is not a number"))?;
    if !factor.is_finite() || factor <= 0.0 {
        return Err(invalid("factor must be positive"));
    }
    Ok(AccelSpec {
        class: class.to_string(),
        factor,
    })
}

/// Resolves flags and the optional config file into run settings. Flags win
/// over file values; defaults fill the rest.
pub fn parse_run_settings(args: &RunArgs) -> Result<RunSettings, UsageError> {
    let file = match &args.config {
        None => HashMap::new(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| UsageError::ConfigFile {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
            parse_config_file(&text)?
        }
    };

    let nx = args.nx.or(parsed(&file, "nx")?).unwrap_or(128);
    let ny = args.ny.or(parsed(&file, "ny")?).unwrap_or(nx);
    let npartx = args.npartx.or(parsed(&file, "npartx")?).unwrap_or(2);
    let nparty = args.nparty.or(parsed(&file, "nparty")?).unwrap_or(npartx);
    let workers = args.workers.or(parsed(&file, "workers")?).unwrap_or(2);
    let seed = args.seed.or(parsed(&file, "seed")?).unwrap_or(0);

    let system_name = args
        .system
        .clone()
        .or(file.get("system").cloned())
        .unwrap_or_else(|| "euler-cosine".to_string());
    let spray_evap = args.spray_evap.or(parsed(&file, "spray-evap")?).unwrap_or(1.0);
    let spray_theta = args
        .spray_theta
        .or(parsed(&file, "spray-theta")?)
        .unwrap_or(1.0);
    let system = match system_name.as_str() {
        "euler-cosine" => SystemKind::EulerCosine,
        "euler-vortex" => SystemKind::EulerVortex,
        "spray" => SystemKind::Spray {
            evap: spray_evap,
            theta: spray_theta,
        },
        other => return Err(UsageError::UnknownSystem(other.to_string())),
    };

    let sched_name = args
        .sched
        .clone()
        .or(file.get("sched").cloned())
        .unwrap_or_else(|| "eager".to_string());
    let sched = parse_sched(&sched_name)?;

    let accel = match args
        .virtual_accel
        .clone()
        .or(file.get("virtual-accel").cloned())
    {
        None => None,
        Some(raw) => Some(parse_accel(&raw)?),
    };

    let dt = args.dt.or(parsed(&file, "dt")?);
    let tfinal = args.tfinal.or(parsed(&file, "tfinal")?);
    let iters = args.iters.or(parsed(&file, "iters")?);
    let (dt, iters) = resolve_time(dt, tfinal, iters)?;

    let output_every = args.output_every.or(parsed(&file, "output-every")?);
    let out = args
        .out
        .clone()
        .or_else(|| file.get("out").map(PathBuf::from));
    if output_every.is_some() && out.is_none() {
        return Err(UsageError::Invalid(
            "--output-every requires --out".to_string(),
        ));
    }

    if nx == 0 || ny == 0 {
        return Err(UsageError::Invalid("mesh must be non-empty".to_string()));
    }
    if workers == 0 {
        return Err(UsageError::Invalid(
            "at least one worker is required".to_string(),
        ));
    }

    Ok(RunSettings {
        system,
        nx,
        ny,
        npartx,
        nparty,
        dt,
        iters,
        sched,
        workers,
        accel,
        output_every,
        out,
        seed,
    })
}

/// Two of `dt`, `tfinal`, and `iters` determine the stepping: the iteration
/// count is `ceil(tfinal / dt)` when derived.
fn resolve_time(
    dt: Option<f64>,
    tfinal: Option<f64>,
    iters: Option<u64>,
) -> Result<(f64, u64), UsageError> {
    let positive = |key: &str, x: f64| {
        if x.is_finite() && x > 0.0 {
            Ok(x)
        } else {
            Err(UsageError::InvalidValue {
                key: key.to_string(),
                message: "must be positive".to_string(),
            })
        }
    };
    match (dt, tfinal, iters) {
        (Some(_), Some(_), Some(_)) => Err(UsageError::OverdeterminedTime),
        (Some(dt), None, Some(iters)) => Ok((positive("dt", dt)?, iters)),
        (Some(dt), Some(tf), None) => {
            let dt = positive("dt", dt)?;
            let tf = positive("tfinal", tf)?;
            Ok((dt, (tf / dt).ceil() as u64))
        }
        (None, Some(tf), Some(iters)) => {
            let tf = positive("tfinal", tf)?;
            if iters == 0 {
                return Err(UsageError::InvalidValue {
                    key: "iters".to_string(),
                    message: "must be positive".to_string(),
                });
            }
            Ok((tf / iters as f64, iters))
        }
        _ => Err(UsageError::UnderdeterminedTime),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> RunArgs {
        RunArgs {
            dt: Some(0.001),
            iters: Some(10),
            ..RunArgs::default()
        }
    }

    #[test]
    fn defaults_fill_everything_but_the_time_stepping() {
        let s = parse_run_settings(&args()).unwrap();
        assert_eq!((s.nx, s.ny, s.npartx, s.nparty), (128, 128, 2, 2));
        assert_eq!(s.system, SystemKind::EulerCosine);
        assert_eq!(s.sched, SchedulerKind::Eager);
        assert!(s.accel.is_none());
    }

    #[test]
    fn flags_override_file_values() {
        let dir = std::env::temp_dir().join(format!("taskfv-config-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.conf");
        std::fs::write(&path, "sched = eager\nnx = 64\n# comment\n\nny = 32\n").unwrap();

        let mut a = args();
        a.config = Some(path);
        a.sched = Some("dmda".to_string());
        let s = parse_run_settings(&a).unwrap();
        assert_eq!(s.sched, SchedulerKind::Dmda);
        assert_eq!((s.nx, s.ny), (64, 32));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = parse_config_file("nz = 12\n").unwrap_err();
        assert!(matches!(err, UsageError::UnknownKey(k) if k == "nz"));
    }

    #[test]
    fn time_stepping_needs_exactly_two_values() {
        assert!(matches!(
            resolve_time(None, Some(1.0), None),
            Err(UsageError::UnderdeterminedTime)
        ));
        assert!(matches!(
            resolve_time(Some(0.1), Some(1.0), Some(10)),
            Err(UsageError::OverdeterminedTime)
        ));
        let (dt, iters) = resolve_time(Some(0.3), Some(1.0), None).unwrap();
        assert_eq!((dt, iters), (0.3, 4));
        let (dt, iters) = resolve_time(None, Some(1.0), Some(8)).unwrap();
        assert_eq!((dt, iters), (0.125, 8));
    }

    #[test]
    fn accel_spec_builds_a_two_class_machine() {
        let mut a = args();
        a.virtual_accel = Some("accel:10".to_string());
        a.workers = Some(3);
        let s = parse_run_settings(&a).unwrap();
        let m = s.machine();
        assert_eq!(m.n_workers(), 4);
        assert_eq!(m.n_classes(), 2);
        let accel = m.class_by_name("accel").unwrap();
        assert_eq!(m.class(accel).speed_for("sourceStep"), 10.0);
        assert_eq!(m.class(accel).speed_for("copyOverlaps"), 0.5);
        assert_eq!(m.class(accel).speed_for("gather"), 1.0);

        a.virtual_accel = Some("accel:".to_string());
        assert!(parse_run_settings(&a).is_err());
    }
}
