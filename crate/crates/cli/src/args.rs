use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use glovekit::controller::SoftnessLabel;
use glovekit::handmodel::{Finger, HandSize};
use glovekit::linksearch::ElbowBranch;
use glovekit::sim::Goal;
use glovekit::stats::Side;

#[derive(Debug, Parser)]
#[command(name = "glovekit", version, about = "Linkage sizing, transmission models and study statistics")]
pub struct Cli {
    /// JSON model configuration; missing sections use defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed for stochastic commands.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid search over link lengths and arch heights for one finger.
    Design(DesignArgs),
    /// Population coverage of sample hand measurements against reference statistics.
    Coverage(CoverageArgs),
    #[command(subcommand)]
    Simulate(SimulateCommand),
    #[command(subcommand)]
    Clutch(ClutchCommand),
    /// Motor commands for a penetration trajectory at one softness level.
    Render(RenderArgs),
    #[command(subcommand)]
    Stats(StatsCommand),
    /// Joint and attachment coordinates of a finger.
    Fk(FkArgs),
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long)]
    pub finger: Finger,
    #[arg(long, default_value_t = 5.0)]
    pub arch_step: f64,
    #[arg(long, default_value_t = 30.0)]
    pub arch_max: f64,
    #[arg(long, default_value_t = 0.0)]
    pub clearance: f64,
    #[arg(long, default_value_t = 10.0)]
    pub angle_step: f64,
    #[arg(long, default_value_t = 60.0)]
    pub length_min: f64,
    #[arg(long, default_value_t = 200.0)]
    pub length_max: f64,
    #[arg(long, default_value_t = 10.0)]
    pub length_step: f64,
    #[arg(long, default_value_t = ElbowBranch::Dorsal)]
    pub branch: ElbowBranch,
    /// Finger dimensions CSV; the built-in table is used when omitted.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[arg(long, requires = "reference", conflicts_with = "builtin")]
    pub sample: Option<PathBuf>,
    #[arg(long, requires = "sample", conflicts_with = "builtin")]
    pub reference: Option<PathBuf>,
    /// Use the shipped sample and reference tables.
    #[arg(long)]
    pub builtin: bool,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Pick-and-place trials under the brake-only grasp model.
    Pickplace(PickPlaceArgs),
    /// Softness discrimination sessions with an ideal responder.
    Softness(SoftnessArgs),
}

#[derive(Debug, Args)]
pub struct PickPlaceArgs {
    /// Recorded trajectory CSV; a scripted one is generated when omitted.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long, default_value_t = Goal::G1)]
    pub goal: Goal,
    /// Grasp tolerance; repeat for several. Defaults to the two study tolerances.
    #[arg(long = "tolerance")]
    pub tolerances: Vec<f64>,
    /// Peak fingertip-distance deviation of the scripted trajectory.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub deviation: f64,
    #[arg(long, default_value_t = 0.06)]
    pub grasp_distance: f64,
    #[arg(long, default_value_t = 10.0)]
    pub dt_ms: f64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
}

#[derive(Debug, Args)]
pub struct SoftnessArgs {
    /// Probe penetration CSV (`t_ms,s` or `s`); a press profile is generated when omitted.
    #[arg(long)]
    pub probe: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    pub depth: f64,
    #[arg(long, default_value_t = 100.0)]
    pub approach_ms: f64,
    #[arg(long, default_value_t = 250.0)]
    pub press_ms: f64,
    #[arg(long, default_value_t = 5.0)]
    pub dt_ms: f64,
    /// Repetitions of each level pair per session.
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub sessions: u64,
}

#[derive(Debug, Subcommand)]
pub enum ClutchCommand {
    /// Clutching angle and sampled latency over one ratchet step of motor phase.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, default_value_t = 0.1)]
    pub resolution: f64,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[arg(long)]
    pub level: SoftnessLabel,
    #[arg(long)]
    pub trajectory: PathBuf,
    /// Motor angle at engagement.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta_eq: f64,
}

#[derive(Debug, Subcommand)]
pub enum StatsCommand {
    /// Wilcoxon signed-rank test on paired columns (condition a, condition b).
    Wilcoxon(WilcoxonArgs),
    /// One-sided exact binomial test against p0.
    Binomial(BinomialArgs),
    /// Holm step-down adjustment of a p-value column.
    Holm(HolmArgs),
}

#[derive(Debug, Args)]
pub struct WilcoxonArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = Side::Greater)]
    pub side: Side,
    #[arg(long)]
    pub no_tie_correction: bool,
    #[arg(long)]
    pub no_continuity_correction: bool,
    #[arg(long, default_value_t = 25)]
    pub exact_max_n: usize,
}

#[derive(Debug, Args)]
pub struct BinomialArgs {
    #[arg(long)]
    pub k: u64,
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 0.5)]
    pub p0: f64,
}

#[derive(Debug, Args)]
pub struct HolmArgs {
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct FkArgs {
    #[arg(long)]
    pub finger: Finger,
    #[arg(long, default_value_t = HandSize::Medium)]
    pub size: HandSize,
    /// Joint angles `q1,q2,q3` in degrees; the whole joint grid is emitted when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub angles: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10.0)]
    pub angle_step: f64,
    #[arg(long)]
    pub dataset: Option<PathBuf>,
}
