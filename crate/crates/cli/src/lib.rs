//! The `cade` command-line tool.
//!
//! Exit codes: 0 success, 1 invalid input, 2 I/O failure, 64 usage error.

pub mod commands;
pub mod plot;
pub mod tables;

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Caps the worker count of parallel subcommands.
pub const THREADS_ENV: &str = "CADE_BENCH_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Validation(String),
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Core(#[from] cade_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) if e.is_io() => EXIT_IO,
            CliError::Core(_) => EXIT_VALIDATION,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "cade", version, about = "Data-pipeline and evaluation tooling for endoscopic CADe models")]
pub struct Cli {
    /// Resolve relative paths against this directory.
    #[arg(long, global = true, value_name = "DIR")]
    pub work_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply an augmentation preset to every record of a manifest.
    Augment(commands::augment::AugmentArgs),
    /// Generate corrupted replicates of a test manifest.
    Corrupt(commands::corrupt::CorruptArgs),
    /// Build consensus ground-truth masks from expert delineations.
    Consensus(commands::consensus::ConsensusArgs),
    /// Add sampled video frames to a training manifest.
    Plan(commands::plan::PlanArgs),
    /// Compute metrics from prediction files.
    Evaluate(commands::evaluate::EvaluateArgs),
    /// Wilcoxon/Benjamini-Hochberg comparison of a reference model against others.
    Compare(commands::compare::CompareArgs),
    /// Tables and bar plots from evaluation reports.
    Report(commands::report::ReportArgs),
}

/// Options shared by the seeded subcommands.
#[derive(Debug, Args)]
pub struct SeedArg {
    /// Seed of every random draw; required.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl SeedArg {
    pub fn require(&self, command: &str) -> CliResult<u64> {
        self.seed
            .ok_or_else(|| CliError::Validation(format!("{command} is randomized and needs an explicit --seed")))
    }
}

/// Resolves paths and owns the worker pool.
pub struct Context {
    work_dir: Option<PathBuf>,
    pool: rayon::ThreadPool,
}

impl Context {
    pub fn new(work_dir: Option<PathBuf>) -> CliResult<Self> {
        let threads = match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| CliError::Validation(format!("{THREADS_ENV}={v:?} is not a positive integer")))?,
            Err(_) => 0,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Validation(format!("cannot start worker pool: {e}")))?;
        Ok(Context { work_dir, pool })
    }

    pub fn path(&self, p: &Path) -> PathBuf {
        match &self.work_dir {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        self.pool.install(f)
    }

    pub fn create_dir(&self, dir: &Path) -> CliResult<PathBuf> {
        let dir = self.path(dir);
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(dir)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    f.write_all(bytes).map_err(|e| CliError::io(path, e))
}

pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub(crate) fn write_jsonl<T: serde::Serialize>(path: &Path, values: &[T]) -> CliResult<()> {
    let mut text = String::new();
    for v in values {
        text.push_str(&serde_json::to_string(v).expect("log types serialize"));
        text.push('\n');
    }
    write_file(path, text.as_bytes())
}

/// Parses `argv` and runs the subcommand.
pub fn dispatch(cli: Cli) -> CliResult<()> {
    let ctx = Context::new(cli.work_dir)?;
    match cli.command {
        Command::Augment(a) => commands::augment::run(&ctx, a),
        Command::Corrupt(a) => commands::corrupt::run(&ctx, a),
        Command::Consensus(a) => commands::consensus::run(&ctx, a),
        Command::Plan(a) => commands::plan::run(&ctx, a),
        Command::Evaluate(a) => commands::evaluate::run(&ctx, a),
        Command::Compare(a) => commands::compare::run(&ctx, a),
        Command::Report(a) => commands::report::run(&ctx, a),
    }
}

/// Runs the tool on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
