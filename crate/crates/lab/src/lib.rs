//! Configuration-driven experiment runner for the `halfspace` crate.
//!
//! One experiment per invocation: the config is parsed and fully validated, then the
//! experiment runs on a dedicated thread pool and writes `report.json`, `tables/*.csv`,
//! `plots/*.dat` and optionally `fields/*` into the output directory.

pub mod config;
pub mod error;
pub mod experiments;
pub mod generate;
pub mod output;
pub mod setup;

use config::Config;
use error::{config_err, LabError, Result};
use experiments::Plan;
use output::{write_all, Check, Report};
use std::path::PathBuf;

pub const THREADS_ENV: &str = "HSLAB_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Kind {
    Identities,
    Stokes,
    StokesOracle,
    Besov,
    Harness,
    Ins,
    Lagrangian,
    TwinSolve,
    Generate,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Identities => "identities",
            Kind::Stokes => "stokes",
            Kind::StokesOracle => "stokes-oracle",
            Kind::Besov => "besov",
            Kind::Harness => "harness",
            Kind::Ins => "ins",
            Kind::Lagrangian => "lagrangian",
            Kind::TwinSolve => "twin-solve",
            Kind::Generate => "generate",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug)]
pub struct Outcome {
    pub passed: bool,
    pub dir: PathBuf,
    pub checks: Vec<Check>,
}

/// Thread count: explicit option, then the environment, then all cores.
pub fn thread_count(explicit: Option<usize>) -> Result<usize> {
    if let Some(n) = explicit {
        return if n == 0 { config_err("thread count must be positive") } else { Ok(n) };
    }
    match std::env::var(THREADS_ENV) {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => config_err(format!("{THREADS_ENV} must be a positive integer, got `{s}`")),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

pub fn run(kind: Kind, mut cfg: Config, opts: &RunOptions) -> Result<Outcome> {
    if let Some(seed) = opts.seed {
        cfg.set_override("data.seed", seed.to_string());
    }
    let declared = cfg.string("kind", kind.name())?;
    if declared != kind.name() {
        return config_err(format!("config is for `{declared}`, not `{}`", kind.name()));
    }
    let plan = Plan::read(kind, &cfg)?;
    let dir = match (&opts.out, cfg.opt::<String>("output.dir")?) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("hslab-out").join(kind.name()),
    };
    cfg.finish()?;
    let threads = thread_count(opts.threads)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| LabError::Config(format!("thread pool: {e}")))?;
    let art = pool.install(|| plan.run())?;
    let seed = cfg.opt::<u64>("data.seed")?;
    let report = Report {
        tool: "hslab",
        version: env!("CARGO_PKG_VERSION"),
        kind: kind.name(),
        seed,
        threads,
        config: cfg.entries(),
        passed: art.passed(),
        checks: &art.checks,
        results: &art.results,
        tables: art.tables.iter().map(|t| format!("tables/{}.csv", t.name)).collect(),
        plots: art.plots.iter().map(|p| format!("plots/{}.dat", p.name)).collect(),
        fields: art.fields.iter().map(|f| format!("fields/{}", f.0)).collect(),
    };
    write_all(&dir, &report, &art)?;
    Ok(Outcome { passed: art.passed(), dir, checks: art.checks })
}
