//! Command-line driver for the `dynloc` library.

pub mod args;
pub mod commands;
pub mod config_file;

use std::ffi::OsString;
use std::io;
use std::path::PathBuf;

use clap::{CommandFactory, Parser};
use thiserror::Error;

pub use args::Cli;
pub use commands::{cmd_ablate, cmd_benchmark, cmd_generate, cmd_train};

pub const EXIT_OK: i32 = 0;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_NO_INPUT: i32 = 66;
pub const EXIT_NUMERICAL: i32 = 70;
pub const EXIT_IO: i32 = 74;

pub const THREADS_ENV: &str = "DYNLOC_THREADS";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("refusing to overwrite {} (pass --force)", .0.display())]
    Exists(PathBuf),

    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Core(#[from] dynloc::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use dynloc::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Exists(_) => EXIT_REFUSED,
            CliError::Write { .. } => EXIT_IO,
            CliError::Core(err) => match err.root() {
                E::Config(_) | E::BatchTooSmall { .. } => EXIT_USAGE,
                E::Input(_) | E::Shape(_) | E::Parse { .. } => EXIT_DATA,
                E::Numerical(_) => EXIT_NUMERICAL,
                E::Io(e) if matches!(e.kind(), io::ErrorKind::NotFound | io::ErrorKind::PermissionDenied) => {
                    EXIT_NO_INPUT
                }
                E::Io(_) => EXIT_IO,
                E::Run { .. } => unreachable!("root() unwraps run wrappers"),
            },
        }
    }
}

/// Thread count from `DYNLOC_THREADS`, defaulting to 1.
pub fn threads_from_env() -> Result<usize, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(1),
        Ok(raw) => match raw.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::Usage(format!(
                "{THREADS_ENV} must be a positive integer, got `{raw}`"
            ))),
        },
    }
}

/// Splices config-file entries in front of the explicit flags of the subcommand.
fn expand_config(argv: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    if argv.len() < 2 {
        return Ok(argv);
    }
    let Some(sub_name) = argv[1].to_str().map(str::to_owned) else {
        return Ok(argv);
    };
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&sub_name) else {
        return Ok(argv);
    };
    let mut path = None;
    let mut rest = argv[2..].iter();
    while let Some(token) = rest.next() {
        let Some(text) = token.to_str() else { continue };
        if text == "--" {
            break;
        }
        if text == "--config" {
            path = rest.next().map(PathBuf::from);
        } else if let Some(value) = text.strip_prefix("--config=") {
            path = Some(PathBuf::from(value));
        }
    }
    let Some(path) = path else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| {
        if e.kind() == io::ErrorKind::NotFound {
            CliError::Core(dynloc::Error::Io(io::Error::new(
                e.kind(),
                format!("config file {}: {e}", path.display()),
            )))
        } else {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        }
    })?;
    let entries = config_file::parse(&text, &path)?;
    let tokens = config_file::to_tokens(&entries, sub, &path)?;
    let mut expanded = Vec::with_capacity(argv.len() + tokens.len());
    expanded.extend(argv[..2].iter().cloned());
    expanded.extend(tokens);
    expanded.extend(argv[2..].iter().cloned());
    Ok(expanded)
}

/// Parses `argv`, runs the command and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString>,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => return report(e),
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let threads = match threads_from_env() {
        Ok(t) => t,
        Err(e) => return report(e),
    };
    let outcome = match &cli.command {
        args::Command::Generate(a) => cmd_generate(a),
        args::Command::Train(a) => cmd_train(a),
        args::Command::Benchmark(a) => cmd_benchmark(a, threads).map(|_| ()),
        args::Command::Ablate(a) => cmd_ablate(a, threads).map(|_| ()),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => report(e),
    }
}

fn report(err: CliError) -> i32 {
    eprintln!("error: {err}");
    err.exit_code()
}
