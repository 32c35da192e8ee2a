//! Command-line front end and HTTP service for polymax.
//!
//! Exit codes: 0 success, 1 usage error, 2 domain error. Failures print a
//! single JSON line `{"error": kind, "message": text}` on standard error;
//! successful commands print a one-line JSON summary on standard output.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use polymax::corpus::Mode;

pub mod commands;
pub mod error;
pub mod jobs;
pub mod server;
pub mod store;

pub use error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "polymax", version, about = "Train, sample, reharmonize and evaluate pairwise multi-voice models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Major,
    Minor,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Major => Mode::Major,
            ModeArg::Minor => Mode::Minor,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a corpus (transposed to C first).
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// TOML or JSON with K, L, lambda and optional optimizer settings.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Train on the pieces of one mode only.
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Generate one sequence with Metropolis-Hastings.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        length: usize,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        seed: u64,
        /// Defaults to half the steps.
        #[arg(long)]
        burn_in: Option<u64>,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Harmonize a melody with the models in a directory (major.json, minor.json).
    Reharmonize {
        #[arg(long)]
        model_dir: PathBuf,
        /// Corpus file with one single-voice piece, or a constraint file.
        #[arg(long)]
        melody: PathBuf,
        /// Key track `[[beat, pc, mode], ...]`; detected from the melody when absent.
        #[arg(long)]
        keys: Option<PathBuf>,
        #[arg(long)]
        constraints: Option<PathBuf>,
        #[arg(long)]
        steps: Option<u64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also writes the key track next to it as `<out stem>.keys.json`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Write taxonomy, pair-statistics and restitution/discovery reports.
    Evaluate {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        train_corpus: PathBuf,
        #[arg(long)]
        test_corpus: Option<PathBuf>,
        #[arg(long)]
        report_dir: PathBuf,
        /// Recorded in restitution_discovery.csv.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 4)]
        scope: usize,
        #[arg(long, default_value_t = 2)]
        cross_scope: usize,
    },
    /// Serve the HTTP API over a model directory.
    Serve {
        #[arg(long)]
        port: u16,
        #[arg(long, env = "POLYMAX_MODEL_DIR")]
        model_dir: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Upper bound on MH steps per sampling request.
        #[arg(long, default_value_t = 20_000_000)]
        max_steps: u64,
        #[arg(long, default_value_t = 10_000)]
        max_length: usize,
        /// Queued plus running training jobs before requests get 503.
        #[arg(long, default_value_t = 4)]
        queue_capacity: usize,
        #[arg(long, default_value_t = 1)]
        train_workers: usize,
    },
}

fn execute(cli: Cli) -> CliResult<Option<String>> {
    match cli.command {
        Command::Train { corpus, config, out, mode } => {
            commands::train(&corpus, &config, &out, mode.map(Mode::from)).map(Some)
        }
        Command::Sample { model, length, steps, seed, burn_in, constraints, out } => {
            commands::sample(commands::SampleArgs {
                model: &model,
                length,
                steps,
                seed,
                burn_in,
                constraints: constraints.as_deref(),
                out: &out,
            })
            .map(Some)
        }
        Command::Reharmonize { model_dir, melody, keys, constraints, steps, seed, out } => {
            commands::reharmonize_cmd(commands::ReharmonizeArgs {
                model_dir: &model_dir,
                melody: &melody,
                keys: keys.as_deref(),
                constraints: constraints.as_deref(),
                steps,
                seed,
                out: &out,
            })
            .map(Some)
        }
        Command::Evaluate { generated, train_corpus, test_corpus, report_dir, lambda, scope, cross_scope } => {
            commands::evaluate(commands::EvaluateArgs {
                generated: &generated,
                train_corpus: &train_corpus,
                test_corpus: test_corpus.as_deref(),
                report_dir: &report_dir,
                lambda,
                scope,
                cross_scope,
            })
            .map(Some)
        }
        Command::Serve { port, model_dir, host, max_steps, max_length, queue_capacity, train_workers } => {
            let config = server::ServerConfig { model_dir, max_steps, max_length, queue_capacity, train_workers };
            serve_blocking(&host, port, config)?;
            Ok(None)
        }
    }
}

fn serve_blocking(host: &str, port: u16, config: server::ServerConfig) -> CliResult<()> {
    let state = server::state(config)?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port)).await?;
        let addr = listener.local_addr()?;
        println!("{}", serde_json::json!({ "listening": addr.to_string() }));
        server::serve(listener, state).await
    })?;
    Ok(())
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let err = CliError::Usage(e.to_string());
            eprintln!("{}", err.to_json_line());
            return err.exit_code();
        }
    };
    match execute(cli) {
        Ok(summary) => {
            if let Some(s) = summary {
                println!("{s}");
            }
            0
        }
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            e.exit_code()
        }
    }
}
