//! Batch front-end: simulate, fit, evaluate, roc, diagnose, check-prior and
//! bench over plain CSV and JSON files.

pub mod args;
pub mod artifacts;
pub mod commands;
pub mod config;

use std::ffi::OsString;

use anyhow::Context;
use clap::Parser;

pub use args::{Cli, Command, VERSION};
pub use config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// Map an error to the process exit code by the first classifiable cause.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<qggm_core::Error>() {
            return match e {
                _ if e.is_validation() => EXIT_VALIDATION,
                _ if e.is_io() => EXIT_IO,
                _ => EXIT_NUMERICAL,
            };
        }
        if let Some(e) = cause.downcast_ref::<clap::Error>() {
            return e.exit_code();
        }
        if let Some(e) = cause.downcast_ref::<serde_json::Error>() {
            return if e.is_io() { EXIT_IO } else { EXIT_VALIDATION };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return EXIT_IO;
        }
        if cause.downcast_ref::<rayon::ThreadPoolBuildError>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_NUMERICAL
}

fn resolve_jobs(flag_or_env: Option<usize>, from_file: Option<usize>) -> Result<usize, qggm_core::Error> {
    let jobs = flag_or_env
        .or(from_file)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(qggm_core::Error::InvalidInput("--jobs must be at least 1".into()));
    }
    Ok(jobs)
}

/// Parse `argv` (program name first) and run the selected subcommand.
pub fn run<I, T>(argv: I) -> anyhow::Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let (argv, file_jobs) = config::expand_config_file(argv)?;
    let cli = Cli::try_parse_from(argv)?;
    let jobs = resolve_jobs(cli.jobs, file_jobs)?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
    let cfg = RunConfig::from_command(&cli.command);
    pool.install(|| dispatch(&cli.command, &cfg))
}

fn dispatch(cmd: &Command, cfg: &RunConfig) -> anyhow::Result<()> {
    match cmd {
        Command::Simulate(a) => {
            let files = commands::simulate(a, cfg).context("simulate failed")?;
            println!("wrote {} files to {}", files.len() + 1, a.out.display());
        }
        Command::Fit(a) => {
            for dir in commands::fit(a, cfg).context("fit failed")? {
                println!("{}", dir.display());
            }
        }
        Command::Evaluate(a) => {
            commands::evaluate(a, cfg).context("evaluate failed")?;
            let table = std::fs::read_to_string(a.out.join(commands::TABLE_FILE))?;
            print!("{table}");
        }
        Command::Roc(a) => {
            for f in commands::roc(a, cfg).context("roc failed")? {
                println!("{}", f.display());
            }
        }
        Command::Diagnose(a) => {
            for f in commands::diagnose(a, cfg).context("diagnose failed")? {
                println!("{}", f.display());
            }
        }
        Command::CheckPrior(a) => {
            let rec = commands::check_prior(a, cfg).context("check-prior failed")?;
            println!("{}", serde_json::to_string(&rec)?);
        }
        Command::Bench(a) => {
            let rec = commands::bench(a, cfg).context("bench failed")?;
            println!("{:.3} minutes (p = {}, n = {}, {} iterations)", rec.timing.minutes, rec.p, rec.n, rec.iterations);
        }
    }
    Ok(())
}
