//! Command-line front end: reads a JSON experiment config, runs it on the
//! core library and writes CSV tables.

pub mod commands;
pub mod config;
pub mod error;
pub mod table;

use std::path::{Path, PathBuf};

use clap::Parser;

use crate::commands::RunOutput;
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result, EXIT_CHECK_FAILED, EXIT_OK, EXIT_VALIDATION};

#[derive(Debug, Parser)]
#[command(name = "gexpect", version, about = "Run g-expectation experiments from a JSON config")]
pub struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed; the override is part of the config hash.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory for the CSV outputs; created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "GEXPECT_THREADS")]
    pub threads: Option<usize>,
}

/// Files written by a run, in the order they were written.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub written: Vec<PathBuf>,
    pub failures: Vec<String>,
}

pub fn run(args: &Args) -> Result<RunSummary> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let output = match args.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?
            .install(|| commands::execute(&cfg))?,
        None => commands::execute(&cfg)?,
    };
    for note in &output.notes {
        eprintln!("warning: {note}");
    }
    let written = write_outputs(&args.out, &cfg.hash(), &output)?;
    Ok(RunSummary { written, failures: output.failures })
}

fn write_outputs(dir: &Path, hash: &str, output: &RunOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Write { path: dir.to_path_buf(), source })?;
    let mut written = Vec::new();
    for a in &output.artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, a.table.to_csv(hash)).map_err(|source| CliError::Write { path: path.clone(), source })?;
        written.push(path);
    }
    Ok(written)
}

/// Parses `argv`, runs, reports on stderr and returns the exit status.
pub fn main_with<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match run(&args) {
        Ok(s) => {
            for p in &s.written {
                eprintln!("wrote {}", p.display());
            }
            for f in &s.failures {
                eprintln!("check failed: {f}");
            }
            if s.failures.is_empty() {
                EXIT_OK
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
