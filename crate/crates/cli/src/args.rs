use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::profile::PROFILE_DIR_ENV;

#[derive(Debug, Parser)]
#[command(
    name = "pcosync",
    version,
    about = "Synchronisation time and energy of pulse-coupled oscillator networks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact analysis over a parameter sweep; one CSV row per query.
    Analyze(AnalyzeArgs),
    /// Exact analysis starting from networks where at most U oscillators
    /// are out of step.
    Restab(AnalyzeArgs),
    /// Monte Carlo estimates over a parameter sweep.
    Simulate(SimulateArgs),
    /// Write the explicit state space, transition matrix and rewards.
    Export(ExportArgs),
    /// List, show or save hardware profiles.
    #[command(subcommand)]
    Profile(ProfileCommand),
}

/// Model parameters. List-valued flags take `a,b,c` or `start:step:stop`
/// and may be repeated.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    /// `key = value` file supplying defaults for any flag below.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Number of oscillators.
    #[arg(long = "n", value_name = "LIST")]
    pub n: Vec<String>,
    /// Discrete phases per cycle.
    #[arg(long = "t", value_name = "LIST")]
    pub t: Vec<String>,
    /// Refractory period in phases.
    #[arg(long = "r", value_name = "LIST")]
    pub r: Vec<String>,
    /// Coupling constant.
    #[arg(long, value_name = "LIST")]
    pub eps: Vec<String>,
    /// Broadcast failure probability.
    #[arg(long, value_name = "LIST")]
    pub mu: Vec<String>,
    /// Target phase coherence.
    #[arg(long, value_name = "LIST")]
    pub lambda: Vec<String>,
    /// Desynchronised oscillators (restabilisation mode).
    #[arg(long = "u", value_name = "LIST")]
    pub u: Vec<String>,
    /// Built-in name, profile file, or name in the profile directory.
    #[arg(long)]
    pub profile: Option<String>,
    /// Override the profile's cycle length C in seconds.
    #[arg(long, value_name = "SECONDS")]
    pub cycle_s: Option<f64>,
    /// Override the profile's message time M_t in seconds.
    #[arg(long, value_name = "SECONDS")]
    pub message_s: Option<f64>,
    #[arg(long, env = PROFILE_DIR_ENV, value_name = "DIR")]
    pub profile_dir: Option<PathBuf>,
    /// `initiators` or `cascade`.
    #[arg(long)]
    pub perception: Option<String>,
    /// Abort a build that exceeds this many states.
    #[arg(long)]
    pub max_states: Option<usize>,
    /// Write CSV here instead of standard output.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `metric:aggregate`, e.g. `power:avg`; repeatable.
    #[arg(long, value_name = "METRIC:AGG")]
    pub query: Vec<String>,
    /// `exact` or `iterative`.
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Report values from this state, e.g. `(0,0,0,0,0,2,1,0,0,5)`, instead
    /// of aggregating over the initial distribution.
    #[arg(long, value_name = "STATE")]
    pub start: Option<String>,
    /// Fill the wall_ms column (output is then no longer reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// `time` or `power`; repeatable.
    #[arg(long, value_name = "METRIC")]
    pub metric: Vec<String>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub samples: Option<usize>,
    /// Runs still unsynchronised after this many transitions are censored.
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Start every run here instead of sampling the initial distribution.
    #[arg(long, value_name = "STATE")]
    pub start: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ExportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// File stem for `<stem>.sta`, `<stem>.tra`, `<stem>.<metric>.trew`.
    #[arg(long, default_value = "model")]
    pub basename: String,
}

#[derive(Debug, Subcommand)]
pub enum ProfileCommand {
    /// Built-in profiles and those in the profile directory.
    List {
        #[arg(long, env = PROFILE_DIR_ENV, value_name = "DIR")]
        profile_dir: Option<PathBuf>,
    },
    /// Print a profile and its per-step energies.
    Show {
        name: String,
        /// Phases per cycle used for the per-step energies.
        #[arg(long = "t", default_value_t = 10)]
        t: u32,
        #[arg(long, env = PROFILE_DIR_ENV, value_name = "DIR")]
        profile_dir: Option<PathBuf>,
    },
    /// Save a profile, starting from `--from` and overriding given fields.
    Save {
        name: String,
        #[arg(long, default_value = "micaz")]
        from: String,
        #[arg(long)]
        idle_a: Option<f64>,
        #[arg(long)]
        receive_a: Option<f64>,
        #[arg(long)]
        transmit_a: Option<f64>,
        #[arg(long)]
        voltage_v: Option<f64>,
        #[arg(long)]
        cycle_s: Option<f64>,
        #[arg(long)]
        message_s: Option<f64>,
        #[arg(long, env = PROFILE_DIR_ENV, value_name = "DIR", required = true)]
        profile_dir: Option<PathBuf>,
    },
}
