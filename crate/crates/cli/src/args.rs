use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "vqe", version, about = "Video quality enhancement toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a seeded degradation recipe to a clip or to every target in a manifest.
    Degrade(DegradeArgs),
    /// Train the LUT-fusion stage.
    TrainStage1(TrainArgs),
    /// Train the restoration stage.
    TrainStage2(TrainArgs),
    /// Jointly fine-tune both stages.
    Finetune(TrainArgs),
    /// Run the enhancement pipeline over clips.
    Enhance(EnhanceArgs),
    /// Per-clip RMSE of predictions against targets.
    Rmse(RmseArgs),
    /// Quality scores per clip, and the objective score when RMSEs are given.
    Score(ScoreArgs),
    /// Bradley–Terry ranking with confidence intervals and objective tie-break.
    Rank(RankArgs),
    /// Mean opinion score of one condition.
    Mos(MosArgs),
    /// Per-frame MACs of a model against a budget.
    Macs(MacsArgs),
    /// Luma intensity histogram of clips.
    Stats(StatsArgs),
    /// Run the preference-study HTTP service.
    Serve(ServeArgs),
    /// Copy the vote log of a study and fold it into pair counts.
    ExportVotes(ExportArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct DegradeArgs {
    /// Clip directory of numbered frames.
    #[arg(long = "in", conflicts_with = "manifest", required_unless_present = "manifest")]
    pub input: Option<PathBuf>,
    /// Manifest whose target clips are degraded into input clips.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// `default`, `mild`, or a profile JSON file.
    #[arg(long, default_value = "default", conflicts_with = "recipe")]
    pub profile: String,
    /// Fixed recipe JSON instead of sampling one.
    #[arg(long)]
    pub recipe: Option<PathBuf>,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    /// Manifest of input clips paired with targets.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Built-in hyperparameter preset.
    #[arg(long)]
    pub preset: Option<String>,
    /// JSON config layered over the preset.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `key.path=value` overrides layered over the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub patch: Option<usize>,
    /// Stage-one model directory. For stage two its outputs become the inputs.
    #[arg(long)]
    pub stage1: Option<PathBuf>,
    /// Stage-two model directory to continue from.
    #[arg(long)]
    pub stage2: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct EnhanceArgs {
    #[arg(long)]
    pub stage1: PathBuf,
    #[arg(long)]
    pub stage2: Option<PathBuf>,
    #[arg(long = "in", conflicts_with = "manifest", required_unless_present = "manifest")]
    pub input: Option<PathBuf>,
    /// Manifest whose input clips are enhanced into prediction clips.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 20.0e9)]
    pub budget: f64,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct RmseArgs {
    /// Manifest with prediction clips paired to targets.
    #[arg(long, conflicts_with_all = ["pred", "target"], required_unless_present_all = ["pred", "target"])]
    pub manifest: Option<PathBuf>,
    #[arg(long, requires = "target")]
    pub pred: Option<PathBuf>,
    #[arg(long, requires = "pred")]
    pub target: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    /// Clip directories to score.
    #[arg(long = "in", required_unless_present = "manifest")]
    pub input: Vec<PathBuf>,
    /// Manifest whose clips with `--role` are scored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, default_value = "prediction")]
    pub role: String,
    #[arg(long)]
    pub out: PathBuf,
    /// `stub` or `stub:SALT`.
    #[arg(long, default_value = "stub")]
    pub scorer: String,
    /// RMSE file from the `rmse` command; adds the objective score.
    #[arg(long)]
    pub rmse: Option<PathBuf>,
    /// Method name the objective score is filed under.
    #[arg(long, default_value = "method")]
    pub method: String,
    #[arg(long, default_value_t = 30.0)]
    pub fps: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct RankArgs {
    #[arg(long)]
    pub votes: PathBuf,
    /// Objective files (`method → score`); several are merged.
    #[arg(long)]
    pub objective: Vec<PathBuf>,
    /// Pair table from `export-votes`; otherwise read from the votes.
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// `single` or `strong`.
    #[arg(long, default_value = "single")]
    pub weighting: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MosArgs {
    #[arg(long)]
    pub votes: PathBuf,
    /// Condition being rated.
    #[arg(long)]
    pub target: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct MacsArgs {
    /// `preset:NAME` or a model spec JSON file.
    #[arg(long)]
    pub model: String,
    /// `WIDTHxHEIGHT`.
    #[arg(long, default_value = "1280x720")]
    pub res: String,
    #[arg(long, default_value_t = 20.0e9)]
    pub budget: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[arg(long = "in", required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long, default_value_t = 256)]
    pub bins: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ServeArgs {
    /// Study config JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub bind: Option<String>,
    /// Directory served at `/`.
    #[arg(long = "static")]
    pub static_dir: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    /// Study config JSON.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "single")]
    pub weighting: String,
    #[arg(long)]
    pub out: PathBuf,
}
