use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinsusp::experiments::{Evaluation, NAMES};
use kinsusp::{check_dir, run_experiment, CliError, Config};

/// Reproducible experiments for the active-suspension kinetic model.
#[derive(Debug, Parser)]
#[command(name = "kinsusp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts under `<out>/<experiment>/<hash>/`.
    Run {
        /// One of the registered experiment names.
        experiment: String,
        /// TOML configuration; every key is optional.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Worker threads; overrides `KINSUSP_THREADS`.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-evaluate pass/fail from a stored run directory.
    Check { dir: PathBuf },
    /// List the experiment names.
    List,
}

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_ERROR: u8 = 2;

fn report(ev: &Evaluation) -> ExitCode {
    for c in &ev.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        println!("[{verdict}] criterion {:>2} {}: {:e} (limit {})", c.criterion, c.name, c.value, c.limit);
    }
    if ev.growth_detected() {
        println!("growth detected");
    }
    if ev.passed() {
        ExitCode::from(EXIT_PASS)
    } else {
        ExitCode::from(EXIT_FAIL)
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>, CliError> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("KINSUSP_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Config(format!("KINSUSP_THREADS = `{v}` is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            experiment,
            config,
            out,
            seed,
            threads: flag,
        } => (|| {
            if let Some(n) = threads(flag)? {
                if n == 0 {
                    return Err(CliError::Config("thread count must be at least 1".into()));
                }
                kinsusp_core::exec::init_threads(n);
            }
            let cfg = match &config {
                Some(p) => Config::load(p)?,
                None => Config::default(),
            };
            let rep = run_experiment(&experiment, &cfg, seed, &out)?;
            println!("{}", rep.dir.display());
            Ok(report(&rep.evaluation))
        })(),
        Command::Check { dir } => check_dir(&dir).map(|ev| report(&ev)),
        Command::List => {
            for n in NAMES {
                println!("{n}");
            }
            Ok(ExitCode::from(EXIT_PASS))
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_ERROR)
    })
}
