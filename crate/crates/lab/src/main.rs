use clap::Parser;
use halfspace_lab::config::Config;
use halfspace_lab::{run, Kind, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs one half-space experiment from an INI config.
///
/// Exit status: 0 when every bracket passes, 1 when one fails, 2 on errors.
#[derive(Parser, Debug)]
#[command(name = "hslab", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    kind: Kind,
    /// INI config file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `data.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; defaults to HSLAB_THREADS, then all cores.
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let opts = RunOptions { out: cli.out, seed: cli.seed, threads: cli.threads };
    let result = Config::load(&cli.config).and_then(|cfg| run(cli.kind, cfg, &opts));
    match result {
        Ok(outcome) => {
            for c in &outcome.checks {
                let bracket = match (c.lo, c.hi) {
                    (Some(l), Some(h)) => format!("[{l:e}, {h:e}]"),
                    (Some(l), None) => format!(">= {l:e}"),
                    (None, Some(h)) => format!("<= {h:e}"),
                    (None, None) => "finite".into(),
                };
                println!("{} {}: {:e} {bracket}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value);
            }
            println!("report: {}", outcome.dir.join("report.json").display());
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("hslab: {e}");
            ExitCode::from(2)
        }
    }
}
