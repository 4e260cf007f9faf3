//! Pipeline driver: retrieval, assignment, evaluation, ablation sweeps,
//! synthetic-world generation, prompt export and candidate ingestion,
//! all over run manifests.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 per-neuron partial failure (results still written).

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use neurolabel_core::retrieval::Fallback;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
    Both,
}

impl OutputFormat {
    pub fn wants_csv(&self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FallbackArg {
    Error,
    Quantile,
}

impl From<FallbackArg> for Fallback {
    fn from(value: FallbackArg) -> Self {
        match value {
            FallbackArg::Error => Fallback::Error,
            FallbackArg::Quantile => Fallback::Quantile,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Gamma,
    K,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PromptModeArg {
    Positive,
    Contrastive,
}

#[derive(Parser, Debug)]
#[command(name = "neurolabel", version)]
#[command(about = "Contrastive neuron labeling over precomputed activations and embeddings")]
struct Cli {
    /// Output directory; created if missing.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for parallel stages (default: all cores). Outputs
    /// are identical for every worker count.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Which report formats to write; JSON is always written because
    /// stages chain through it.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Both)]
    format: OutputFormat,

    /// Overrides the manifest (or simulator config) seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Overrides the manifest contrastive-threshold fallback.
    #[arg(long, global = true, value_enum)]
    fallback: Option<FallbackArg>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Select positive/contrastive evidence for every neuron.
    Retrieve {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Score and assign labels for every (pipeline, gamma) cell.
    Assign {
        #[arg(long)]
        manifest: PathBuf,
        /// Evidence file produced by `retrieve`.
        #[arg(long)]
        evidence: PathBuf,
    },
    /// Compute faithfulness metrics over existing assignments.
    Evaluate {
        #[arg(long)]
        manifest: PathBuf,
        /// Assignments file produced by `assign`.
        #[arg(long)]
        assignments: PathBuf,
    },
    /// Ablation tables over a gamma or K grid.
    Sweep {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, value_enum)]
        axis: SweepAxis,
    },
    /// Generate a synthetic linear-model world and benchmark it.
    Simulate {
        /// World + benchmark configuration (JSON).
        #[arg(long)]
        config: PathBuf,
    },
    /// Export VLM-ready prompt packs from retrieved evidence.
    Prompts {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        evidence: PathBuf,
        #[arg(long, value_enum)]
        mode: PromptModeArg,
        #[arg(long, default_value_t = 3)]
        rows: usize,
        #[arg(long, default_value_t = 3)]
        cols: usize,
    },
    /// Merge externally generated candidate labels into the vocabulary.
    Ingest {
        #[arg(long)]
        manifest: PathBuf,
        /// Candidate responses (JSON).
        #[arg(long)]
        candidates: PathBuf,
        /// Label-order file + tensor with embeddings for new labels.
        #[arg(long)]
        candidate_embeddings: PathBuf,
    },
}

/// Error class decides the exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
}

impl From<neurolabel_core::Error> for CliError {
    fn from(e: neurolabel_core::Error) -> Self {
        if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Whether every neuron made it through cleanly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Clean,
    Partial,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors.
            if e.use_stderr() {
                eprintln!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };

    if let Some(workers) = cli.workers {
        if workers == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
        {
            eprintln!("error: could not configure {workers} workers: {e}");
            return ExitCode::from(1);
        }
    }

    let ctx = commands::Context {
        out: cli.out.clone(),
        format: cli.format,
        seed_override: cli.seed,
        fallback_override: cli.fallback.map(Fallback::from),
    };

    let result = match &cli.command {
        Command::Retrieve { manifest } => commands::retrieve::run(&ctx, manifest),
        Command::Assign { manifest, evidence } => commands::assign::run(&ctx, manifest, evidence),
        Command::Evaluate {
            manifest,
            assignments,
        } => commands::evaluate::run(&ctx, manifest, assignments),
        Command::Sweep { manifest, axis } => commands::sweep::run(&ctx, manifest, *axis),
        Command::Simulate { config } => commands::simulate::run(&ctx, config),
        Command::Prompts {
            manifest,
            evidence,
            mode,
            rows,
            cols,
        } => commands::prompts::run(&ctx, manifest, evidence, *mode, *rows, *cols),
        Command::Ingest {
            manifest,
            candidates,
            candidate_embeddings,
        } => commands::ingest::run(&ctx, manifest, candidates, candidate_embeddings),
    };

    match result {
        Ok(RunOutcome::Clean) => ExitCode::SUCCESS,
        Ok(RunOutcome::Partial) => ExitCode::from(3),
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
