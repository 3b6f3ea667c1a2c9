use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "renyi-lab", version, about = "Renyi information measures and randomized campaigns")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a randomized campaign over a conjectured or proven inequality.
    Conjecture(ConjectureArgs),
    /// Optimize a correlation measure of a bipartite state.
    Measure(MeasureArgs),
    /// Run the gated property suite.
    Verify(VerifyArgs),
    /// Evaluate a closed-form quantity on an input file.
    Eval(EvalArgs),
    /// Write a random state or relative-entropy-difference instance.
    Sample(SampleArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum CampaignKind {
    /// Channel on A (conjectured); `--side b` runs the proven control.
    C1,
    /// Order monotonicity of both relative-entropy differences.
    #[value(alias = "delta-mono")]
    C2,
    /// Order monotonicity of the sandwiched and Sibson CMI.
    CmiMono,
    /// The proven unitary-channel order pairs.
    Unitary,
    /// Remainder-term inequalities, selected with `--kind`.
    Remainder,
    /// Rank-one refinement of discord POVMs.
    Refinement,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SideArg {
    A,
    B,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum RemainderArg {
    Monotonicity,
    JointConvexity,
    Holevo,
    Discord,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Run trials on one thread; rows are identical either way.
    #[arg(long)]
    pub serial: bool,
    /// JSON report path; run metadata goes to a `.meta.json` sibling.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-row CSV path.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConjectureArgs {
    pub campaign: CampaignKind,
    /// `dA,dB,dE` for c1 and cmi-mono, otherwise the largest sampled dimension.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<usize>>,
    /// Comma-separated orders.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha_grid: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value_t = SideArg::A)]
    pub side: SideArg,
    #[arg(long, value_enum, default_value_t = RemainderArg::Monotonicity)]
    pub kind: RemainderArg,
    /// Minimum eigenvalue accepted by the samplers.
    #[arg(long, default_value_t = 1e-6)]
    pub reject_eps: f64,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeasureKind {
    Squashed,
    Discord,
    DiscordMbpds,
    Eof,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MethodArg {
    NelderMead,
    #[value(alias = "gradient-descent")]
    PolarDescent,
    RandomSearch,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    pub measure: MeasureKind,
    /// Bipartite state in the matrix JSON schema.
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Environment dimension of the squashing channel.
    #[arg(long)]
    pub ext_dim: Option<usize>,
    /// POVM elements (discord) or decomposition terms (eof).
    #[arg(long)]
    pub terms: Option<usize>,
    #[arg(long, default_value_t = 16)]
    pub restarts: usize,
    /// Objective evaluations per restart.
    #[arg(long, default_value_t = 20_000)]
    pub budget: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::NelderMead)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(subcommand)]
    pub target: VerifyTarget,
}

#[derive(Subcommand, Debug)]
pub enum VerifyTarget {
    /// Every gated invariant plus the conjectural evidence checks.
    Suite {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Replace every check's tolerance.
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        serial: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(subcommand)]
    pub quantity: EvalQuantity,
}

#[derive(Subcommand, Debug)]
pub enum EvalQuantity {
    /// Petz and sandwiched differences at one order for an instance file.
    Dalpha {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Conditional mutual informations of a tripartite state.
    Cmi {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        alpha: f64,
        /// Labels `A,B,C`; defaults to the first three labels of the state.
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Von Neumann difference, its rewrite and the variance at order one.
    Delta {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// A remainder term; the input schema depends on `--kind`.
    Remainder {
        #[arg(long, value_enum)]
        kind: RemainderArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[command(subcommand)]
    pub what: SampleTarget,
}

#[derive(Subcommand, Debug)]
pub enum SampleTarget {
    /// Random density operator.
    State {
        #[arg(long, value_delimiter = ',', default_value = "2,2,2")]
        dims: Vec<usize>,
        /// Defaults to A, B, C, ...
        #[arg(long, value_delimiter = ',')]
        labels: Option<Vec<String>>,
        /// Defaults to full rank.
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Random `(rho, sigma, N)` with full-rank states and a random channel.
    Instance {
        #[arg(long, default_value_t = 2)]
        d_in: usize,
        #[arg(long, default_value_t = 2)]
        d_out: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}
