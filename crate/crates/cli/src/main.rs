//! `evalkit`: ingest, annotate, evaluate, simulate and compare CRS dialogue corpora.
//!
//! Environment: `EVALKIT_LLM_ENDPOINT`, `EVALKIT_LLM_MODEL`, `EVALKIT_LLM_API_KEY`.
//! Exit codes: 0 success, 1 validation, 2 configuration, 3 connector failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;

use config::{Env, FileConfig, LlmFlags};

#[derive(Debug, Parser)]
#[command(
    name = "evalkit",
    version,
    about = "Evaluate conversational recommender systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Input file; repeat to concatenate corpora.
    #[arg(long, short)]
    pub input: Vec<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Intent schema as JSON (`{"user": [...], "system": [...]}`).
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct LlmArgs {
    #[arg(long)]
    pub llm_endpoint: Option<String>,
    #[arg(long)]
    pub llm_model: Option<String>,
    /// Offline pattern table (`pattern<TAB>reply` per line) used instead of an endpoint.
    #[arg(long)]
    pub llm_script: Option<PathBuf>,
}

impl LlmArgs {
    fn flags(&self) -> LlmFlags {
        LlmFlags {
            endpoint: self.llm_endpoint.clone(),
            model: self.llm_model.clone(),
            script: self.llm_script.clone(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate corpora and print per-system counts.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Label utterances with dialogue acts.
    Annotate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Replace acts that are already present.
        #[arg(long)]
        overwrite: bool,
        /// Item catalog whose titles the rule annotator detects.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Compute metrics and write one report per line.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Comma-separated: sr, srrr, rdl, recall@N.
        #[arg(long, value_delimiter = ',', default_value = "sr,srrr,rdl")]
        metrics: Vec<String>,
        /// Recall targets as JSONL `{"dialogue_id", "index", "items"}`.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Run a user simulator against one or more CRSs.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        simulator: Option<String>,
        /// `[name=]stub:echo`, `[name=]stub:goodbye`, `[name=]stub:always-recommend=<item>`,
        /// `[name=]stub:repeat=<text>`, `[name=]http(s)://...`, or a `crs_id` from the config.
        #[arg(long, required = true)]
        crs: Vec<String>,
        /// Dialogues per CRS (default 200).
        #[arg(short = 'n', long = "dialogues")]
        n: Option<usize>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        max_utterances: Option<usize>,
        /// Item catalog as a JSON array or JSONL.
        #[arg(long)]
        catalog: Option<PathBuf>,
        /// ABUS interaction model table.
        #[arg(long)]
        interaction_model: Option<PathBuf>,
        #[command(flatten)]
        llm: LlmArgs,
    },
    /// Rank systems, correlate with satisfaction and compare two evaluations.
    ///
    /// Score sources are `fixture:<source>:<metric>` (bundled published
    /// scores), `corpus:<path>` (satisfaction labels of a corpus), or a path to
    /// an `evaluate` report file or a `system<TAB>score` table. Without
    /// `--reference` and `--candidate` the bundled published scores are compared.
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        reference: Option<String>,
        #[arg(long)]
        candidate: Option<String>,
        #[arg(long, default_value = "fixture:human:satisfaction")]
        satisfaction: String,
        /// Metric picked from report files.
        #[arg(long, default_value = "rdl")]
        metric: String,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Mode {
    Rule,
    Llm,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let env = Env::from_process();
    let result = match cli.command {
        Command::Ingest { common } => FileConfig::load(common.config.as_deref())
            .and_then(|file| commands::ingest::run(&common, &file)),
        Command::Annotate {
            common,
            mode,
            overwrite,
            catalog,
            llm,
        } => FileConfig::load(common.config.as_deref()).and_then(|file| {
            let args = commands::annotate::AnnotateArgs {
                mode,
                overwrite,
                catalog,
                llm: llm.flags(),
            };
            commands::annotate::run(&common, &file, &env, &args)
        }),
        Command::Evaluate {
            common,
            metrics,
            ground_truth,
        } => FileConfig::load(common.config.as_deref()).and_then(|file| {
            commands::evaluate::run(&common, &file, &metrics, ground_truth.as_deref())
        }),
        Command::Simulate {
            common,
            simulator,
            crs,
            n,
            jobs,
            max_utterances,
            catalog,
            interaction_model,
            llm,
        } => FileConfig::load(common.config.as_deref()).and_then(|file| {
            let args = commands::simulate::SimulateArgs {
                simulator,
                crs,
                n,
                jobs,
                max_utterances,
                catalog,
                interaction_model,
                llm: llm.flags(),
            };
            commands::simulate::run(&common, &file, &env, &args)
        }),
        Command::Compare {
            common,
            reference,
            candidate,
            satisfaction,
            metric,
        } => FileConfig::load(common.config.as_deref()).and_then(|file| {
            let args = commands::compare::CompareArgs {
                reference,
                candidate,
                satisfaction,
                metric,
            };
            commands::compare::run(&common, &file, &args)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("evalkit: {failure}");
            failure.exit_code()
        }
    }
}
