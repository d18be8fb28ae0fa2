//! `feedsim` command-line pipeline.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use feedsim::embedding::EmbeddingError;
use feedsim::evaluator::EvalError;
use feedsim::simulator::SimError;

use config::{Overrides, PipelineConfig, ENV_OVERRIDES};

const EXIT_VALIDATION: u8 = 1;
const EXIT_TRANSPORT: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(name = "feedsim", version, about = "Feedback simulation and evaluation for interactive text-to-SQL")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set hyperparams.margin=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    sets: Vec<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Reject the whole input when any record is invalid.
    #[arg(long, global = true, overrides_with = "no_strict")]
    strict: bool,
    #[arg(long, global = true)]
    no_strict: bool,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Schema file (`{"databases": [...]}` or a tables.json array).
    #[arg(long, global = true)]
    schemas: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Validate raw examples, drop structural mistakes, optionally split.
    Ingest(commands::IngestArgs),
    /// Print the edit script between two parses, one edit per line.
    Diff(commands::PairArgs),
    /// Step-by-step explanation of a parse.
    Explain(commands::ExplainArgs),
    /// Template feedback for a wrong/gold pair.
    Template(commands::TemplateArgs),
    /// Sample negative feedback by swapping schema mentions.
    Negatives(commands::NegativesArgs),
    /// Score feedback against the template for a wrong/gold pair.
    Score(commands::ScoreArgs),
    /// Train the feedback evaluator.
    TrainEval(commands::TrainArgs),
    /// Mean reciprocal rank of feedback against sampled negatives.
    Rank(commands::RankArgs),
    /// Simulate feedback with every configured variant and pick the best.
    Simulate(commands::SimulateArgs),
    /// Simulate feedback for a file of parser mistakes.
    Augment(commands::AugmentArgs),
    /// Error-correction metrics for fixed parses.
    Metrics(commands::MetricsArgs),
    /// Check the configured embedding provider.
    Health,
}

fn resolve_config(g: &GlobalArgs) -> anyhow::Result<PipelineConfig> {
    let env = ENV_OVERRIDES
        .iter()
        .filter_map(|(var, _)| std::env::var(var).ok().map(|v| (var.to_string(), v)))
        .collect();
    let mut sets = g.sets.clone();
    if let Some(seed) = g.seed {
        sets.push(format!("seed={seed}"));
    }
    if g.strict {
        sets.push("strict=true".into());
    }
    if g.no_strict {
        sets.push("strict=false".into());
    }
    if let Some(out) = &g.out {
        sets.push(format!("paths.out={}", serde_json::Value::String(out.display().to_string())));
    }
    if let Some(s) = &g.schemas {
        sets.push(format!("paths.schemas={}", serde_json::Value::String(s.display().to_string())));
    }
    PipelineConfig::resolve(&Overrides {
        file: g.config.as_deref(),
        env,
        sets: &sets,
    })
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let config = resolve_config(&cli.global)?;
    let ctx = commands::Ctx::new(config);
    match cli.command {
        Command::Ingest(a) => commands::ingest(&ctx, &a),
        Command::Diff(a) => commands::diff(&ctx, &a),
        Command::Explain(a) => commands::explain(&ctx, &a),
        Command::Template(a) => commands::template(&ctx, &a),
        Command::Negatives(a) => commands::negatives(&ctx, &a),
        Command::Score(a) => commands::score(&ctx, &a),
        Command::TrainEval(a) => commands::train_eval(&ctx, &a),
        Command::Rank(a) => commands::rank(&ctx, &a),
        Command::Simulate(a) => commands::simulate(&ctx, &a),
        Command::Augment(a) => commands::augment(&ctx, &a),
        Command::Metrics(a) => commands::metrics(&ctx, &a),
        Command::Health => commands::health(&ctx),
    }
}

fn is_transport(e: &(dyn std::error::Error + 'static)) -> bool {
    fn embedding(e: &EmbeddingError) -> bool {
        matches!(e, EmbeddingError::Transport { .. })
    }
    fn eval(e: &EvalError) -> bool {
        matches!(e, EvalError::Embedding(inner) if embedding(inner))
    }
    if let Some(e) = e.downcast_ref::<EmbeddingError>() {
        return embedding(e);
    }
    if let Some(e) = e.downcast_ref::<EvalError>() {
        return eval(e);
    }
    if let Some(e) = e.downcast_ref::<SimError>() {
        return match e {
            SimError::Transport { .. } => true,
            SimError::Eval(inner) => eval(inner),
            _ => false,
        };
    }
    false
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(is_transport) {
        EXIT_TRANSPORT
    } else {
        EXIT_VALIDATION
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
