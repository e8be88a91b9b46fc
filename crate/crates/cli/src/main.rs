use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use planbench_core::curriculum::DisguiseChoice;
use planbench_core::pddl::GoalKind;

mod commands;

#[derive(Parser)]
#[command(name = "planbench", version, about = "Blocksworld planning benchmark toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Goal {
    Full,
    Partial,
}

impl From<Goal> for GoalKind {
    fn from(g: Goal) -> Self {
        match g {
            Goal::Full => GoalKind::Full,
            Goal::Partial => GoalKind::Partial,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Alternating,
    Assisted,
    Unassisted,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a PDDL problem; the plan goes to stdout, stats to stderr.
    Solve {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        /// Shortest plan instead of the first one found.
        #[arg(long)]
        optimal: bool,
    },
    /// Check a plan file (one `(action args)` per line).
    Validate {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        plan: PathBuf,
    },
    /// Generate blocksworld problems plus a JSON-lines manifest.
    Gen {
        /// Fixed block count; omit for the mixed 3/3/4/4/5 benchmark.
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long = "n", default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Goal kind for every instance; omit to alternate full/partial.
        #[arg(long, value_enum)]
        goal: Option<Goal>,
        #[arg(long)]
        out: PathBuf,
        /// Skip computing optimal costs.
        #[arg(long)]
        no_solve: bool,
        /// Also write a (blocks, optimal length) histogram CSV here.
        #[arg(long)]
        histogram: Option<PathBuf>,
    },
    /// Build prompt instances for one task (or `all`).
    Curriculum {
        #[arg(long)]
        task: String,
        #[arg(long = "n", default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        shots: usize,
        #[arg(long, default_value = "none")]
        disguise: DisguiseChoice,
        #[arg(long)]
        blocks: Option<usize>,
        #[arg(long, value_enum)]
        goal: Option<Goal>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Query a model for every instance and write a report directory.
    Eval {
        #[arg(long)]
        instances: PathBuf,
        #[arg(long = "model-config")]
        model_config: PathBuf,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Re-score stored completions offline, without contacting a model.
    Score {
        #[arg(long)]
        instances: PathBuf,
        /// Records JSONL written by `eval`.
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Repair a plan by local search starting from it.
    Repair {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        problem: PathBuf,
        #[arg(long = "seed-plan")]
        seed_plan: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Write prompt/completion pairs for fine-tuning from a `gen` manifest.
    Export {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the study service.
    Serve {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        suggestions: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "alternating")]
        policy: Policy,
        /// Let several sessions share a main instance.
        #[arg(long)]
        reuse: bool,
        /// Directory with the built study UI.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Recompute verdicts and TLX scores from a study event log.
    Replay {
        #[arg(long)]
        pool: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
}

fn main() -> ExitCode {
    match commands::run(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
