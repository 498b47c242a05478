//! Command-line front end: argument parsing, command implementations and the
//! annotator HTTP server.

pub mod commands;
pub mod config;
pub mod serve;

use std::fmt;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use genception::report::Format;

use crate::config::ConfigFlags;

/// Exit status for bad input: invalid config, dataset or arguments that
/// name things that do not exist.
pub const EXIT_INVALID: i32 = 1;
/// Exit status when a run or scoring step fails.
pub const EXIT_RUN_FAILED: i32 = 2;
/// Exit status for unparseable command lines.
pub const EXIT_USAGE: i32 = 64;

/// Marks an error as caused by user input rather than by the run itself.
#[derive(Debug)]
pub struct InvalidInput(pub String);

impl fmt::Display for InvalidInput {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidInput {}

/// Exit status for an error returned by [`execute`].
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|e| e.is::<InvalidInput>()) {
        EXIT_INVALID
    } else {
        EXIT_RUN_FAILED
    }
}

#[derive(Debug, Parser)]
#[command(name = "genception", version, about = "Describe-and-regenerate evaluation of multimodal models")]
pub struct Cli {
    /// Store directory holding runs, the response cache and annotator sessions.
    #[arg(long, global = true, env = "GENCEPTION_ROOT", default_value = "genception-data")]
    pub root: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a dataset directory against the configured categories.
    Validate {
        dataset: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Execute a run, or continue an interrupted one.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Continue this run instead of starting a new one.
        #[arg(long)]
        resume: Option<String>,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Compute the GC@T table of a run, and optionally GC_FID@T.
    Score {
        run_id: String,
        #[arg(long)]
        fid: bool,
        #[arg(long, default_value = "md")]
        format: Format,
    },
    /// Render the score tables of one or more runs, one column per run.
    Report {
        #[arg(required = true)]
        run_ids: Vec<String>,
        #[arg(long, value_enum, default_value_t = commands::Metric::Gc)]
        metric: commands::Metric,
        #[arg(long, default_value = "md")]
        format: Format,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlate run scores with external leaderboards.
    Correlate {
        #[arg(required = true)]
        run_ids: Vec<String>,
        /// JSON file `{benchmark: {model: score}}`, keyed by the run display names.
        #[arg(long)]
        benchmarks: PathBuf,
        #[arg(long, value_parser = config::parse_correlation)]
        kind: Option<genception::model::CorrelationKind>,
        #[arg(long, default_value = "md")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render the image strip of one chain.
    Strip {
        run_id: String,
        sample_id: String,
        #[arg(long, value_enum, default_value_t = commands::StripKind::Html)]
        format: commands::StripKind,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the chain images and bundle.json to this directory.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Serve the annotator API, where people take the describer's place.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of static UI assets served at `/`.
        #[arg(long)]
        static_dir: Option<PathBuf>,
        /// Samples assigned per category to each session.
        #[arg(long, default_value_t = serve::DEFAULT_PER_CATEGORY)]
        per_category: usize,
        /// Seed of the sample shuffle behind session assignment.
        #[arg(long, default_value_t = 0)]
        assignment_seed: u64,
        #[command(flatten)]
        flags: ConfigFlags,
    },
    /// Run the whole pipeline offline on the bundled fixture images.
    MockRun {
        #[arg(long, default_value_t = 3)]
        iterations: u32,
        #[arg(long, default_value_t = 4)]
        parallelism: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        no_fid: bool,
        #[arg(long, default_value = "md")]
        format: Format,
    },
}

/// Runs one parsed command line.
pub async fn execute(cli: Cli) -> anyhow::Result<()> {
    let root = cli.root;
    match cli.command {
        Command::Validate { dataset, config } => commands::validate(&dataset, config.as_deref()),
        Command::Run { config, resume, flags } => {
            commands::run(&root, config.as_deref(), &flags, resume.as_deref(), None)
                .await
                .map(|_| ())
        }
        Command::Score { run_id, fid, format } => {
            let out = commands::score(&root, &run_id, fid, format).await?;
            print!("{out}");
            Ok(())
        }
        Command::Report {
            run_ids,
            metric,
            format,
            out,
        } => {
            let text = commands::report(&root, &run_ids, metric, format)?;
            commands::emit(&text, out.as_deref())
        }
        Command::Correlate {
            run_ids,
            benchmarks,
            kind,
            format,
            out,
        } => {
            let text = commands::correlate(&root, &run_ids, &benchmarks, kind, format)?;
            commands::emit(&text, out.as_deref())
        }
        Command::Strip {
            run_id,
            sample_id,
            format,
            out,
            export,
        } => {
            let text = commands::strip(&root, &run_id, &sample_id, format, export.as_deref())?;
            commands::emit(&text, out.as_deref())
        }
        Command::Serve {
            config,
            port,
            host,
            static_dir,
            per_category,
            assignment_seed,
            flags,
        } => {
            let state = serve::AppState::from_config(&root, config.as_deref(), &flags, per_category, assignment_seed)?;
            serve::serve(state, &host, port, static_dir).await
        }
        Command::MockRun {
            iterations,
            parallelism,
            seed,
            no_fid,
            format,
        } => {
            let text = commands::mock_run(&root, iterations, parallelism, seed, !no_fid, format).await?;
            print!("{text}");
            Ok(())
        }
    }
}
