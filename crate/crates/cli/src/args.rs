//! Command surface of `navhint`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "navhint", version, about = "Desk-scale navigation agent with generated visual hints")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Navigation graphs.
    World {
        #[command(subcommand)]
        command: WorldCommand,
    },
    /// Instruction-aligned episodes.
    Episodes {
        #[command(subcommand)]
        command: EpisodesCommand,
    },
    /// Templated hint datasets.
    Hints {
        #[command(subcommand)]
        command: HintsCommand,
    },
    /// Train the agent and hint decoder from a TOML config.
    Train(TrainArgs),
    /// Score a checkpoint, or a file of trajectories, on an episode split.
    Eval(EvalArgs),
    /// Grade generated hints against the environment.
    Analyze(AnalyzeArgs),
    /// Compare reverse-mode gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Merge eval and analysis outputs into CSV tables and SVG charts.
    Report(ReportArgs),
}

#[derive(Subcommand, Debug)]
enum WorldCommand {
    Gen(WorldGenArgs),
}

#[derive(Subcommand, Debug)]
enum EpisodesCommand {
    Gen(EpisodesGenArgs),
}

#[derive(Subcommand, Debug)]
enum HintsCommand {
    Build(HintsBuildArgs),
    Stats(HintsStatsArgs),
}

#[derive(Args, Debug)]
pub struct WorldGenArgs {
    #[arg(long)]
    pub seed: u64,
    /// Corpus config (TOML); defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory receiving `<id>.json` per world and `index.json`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EpisodesGenArgs {
    #[arg(long)]
    pub worlds: PathBuf,
    /// train and seen draw from the training worlds, unseen from the
    /// held-out ones.
    #[arg(long, value_parser = ["train", "seen", "unseen"])]
    pub split: String,
    /// Defaults to the corpus config stored in the world index.
    #[arg(long)]
    pub count: Option<usize>,
    /// Defaults to the seed the worlds were generated with.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HintsBuildArgs {
    #[arg(long)]
    pub episodes: PathBuf,
    #[arg(long)]
    pub worlds: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Comma-separated subset of sub,ambiguity,distinctive.
    #[arg(long, default_value = "sub,ambiguity,distinctive")]
    pub parts: String,
    /// Render only the step category's landmark clause.
    #[arg(long)]
    pub single_clause: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct HintsStatsArgs {
    /// Hint dataset(s); the split name is the file stem.
    #[arg(long = "in", required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; defaults to the config's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long, conflicts_with = "trajectories")]
    pub checkpoint: Option<PathBuf>,
    /// JSONL with `episode_id` and `path` per line (rollout files work).
    #[arg(long, required_unless_present = "checkpoint")]
    pub trajectories: Option<PathBuf>,
    #[arg(long)]
    pub worlds: PathBuf,
    /// Episode file; when absent, `episodes/<split>.jsonl` next to the
    /// worlds directory.
    #[arg(long, required_unless_present = "split")]
    pub episodes: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<String>,
    /// Training config for hint parts and rollout options.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "greedy", value_parser = ["greedy", "sample", "teacher"])]
    pub mode: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub label: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    /// Decode a hint at every step and write them here.
    #[arg(long)]
    pub hints_out: Option<PathBuf>,
    #[arg(long)]
    pub rollouts_out: Option<PathBuf>,
    /// Also write the metrics as a one-row CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub hints: PathBuf,
    #[arg(long)]
    pub rollouts: PathBuf,
    #[arg(long)]
    pub worlds: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// A multi-landmark clause is true when any listed item matches.
    #[arg(long)]
    pub any_true: bool,
    /// Write ambiguity and distinctive bar charts into this directory.
    #[arg(long)]
    pub svg_dir: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 500)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    #[arg(long = "eval", required = true)]
    pub evals: Vec<PathBuf>,
    /// Analysis reports, paired with `--eval` by position.
    #[arg(long = "analysis")]
    pub analyses: Vec<PathBuf>,
    /// Output of `hints stats --out`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

/// Parses the process arguments and runs the command. Usage errors exit
/// with 2, failures with 1.
pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let command = argv.join(" ");
    let result = match cli.command {
        Command::World { command: WorldCommand::Gen(a) } => crate::commands::world_gen(&command, a),
        Command::Episodes { command: EpisodesCommand::Gen(a) } => crate::commands::episodes_gen(&command, a),
        Command::Hints { command: HintsCommand::Build(a) } => crate::commands::hints_build(&command, a),
        Command::Hints { command: HintsCommand::Stats(a) } => crate::commands::hints_stats(&command, a),
        Command::Train(a) => crate::commands::train(&command, a),
        Command::Eval(a) => crate::commands::eval(&command, a),
        Command::Analyze(a) => crate::commands::analyze(&command, a),
        Command::Gradcheck(a) => crate::commands::gradcheck(&command, a),
        Command::Report(a) => crate::commands::report(&command, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
