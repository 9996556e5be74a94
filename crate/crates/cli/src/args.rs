use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dprank::inference::{KwMode, MwMode, TestKind};
use dprank::ingest::InputFormat;

#[derive(Parser, Debug)]
#[command(name = "dprank", version, about = "Differentially private rank and t tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one private test on a CSV file and print a JSON outcome.
    Test(TestArgs),
    /// Print reference-distribution critical values as CSV.
    Critval(CritvalArgs),
    /// Estimate power by simulation and print CSV.
    Power(SimArgs),
    /// Simulate null p-values and print QQ pairs as CSV.
    Qq(SimArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestName {
    Kw,
    Kwabs,
    Mw,
    Wilcoxon,
    Ttest,
}

impl From<TestName> for TestKind {
    fn from(t: TestName) -> Self {
        match t {
            TestName::Kw => TestKind::Kw,
            TestName::Kwabs => TestKind::Kwabs,
            TestName::Mw => TestKind::Mw,
            TestName::Wilcoxon => TestKind::Wilcoxon,
            TestName::Ttest => TestKind::Ttest,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormatName {
    Grouped,
    Paired,
    Single,
}

impl From<FormatName> for InputFormat {
    fn from(f: FormatName) -> Self {
        match f {
            FormatName::Grouped => InputFormat::Grouped,
            FormatName::Paired => InputFormat::Paired,
            FormatName::Single => InputFormat::Single,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum KwReference {
    Chi2Laplace,
    FullSim,
}

impl From<KwReference> for KwMode {
    fn from(k: KwReference) -> Self {
        match k {
            KwReference::Chi2Laplace => KwMode::Chi2Laplace,
            KwReference::FullSim => KwMode::FullSim,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum MwReference {
    NormalLaplace,
    FullSim,
}

impl From<MwReference> for MwMode {
    fn from(m: MwReference) -> Self {
        match m {
            MwReference::NormalLaplace => MwMode::NormalLaplace,
            MwReference::FullSim => MwMode::FullSim,
        }
    }
}

#[derive(Args, Debug, Clone)]
pub struct BudgetArgs {
    #[arg(long, value_enum)]
    pub test: TestName,
    /// Total privacy budget; `inf` disables noise.
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Fraction of epsilon for m (mw) or the mean (ttest).
    #[arg(long)]
    pub split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of groups (kw, kwabs; 2 for mw).
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub known_equal_groups: bool,
    #[arg(long, value_enum, default_value_t = KwReference::Chi2Laplace)]
    pub kw_reference: KwReference,
    #[arg(long, value_enum, default_value_t = MwReference::NormalLaplace)]
    pub mw_reference: MwReference,
}

#[derive(Args, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Reference replicates.
    #[arg(long, default_value_t = 100_000)]
    pub reps: usize,
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to grouped for kw/kwabs/mw, paired for wilcoxon, single for ttest.
    #[arg(long, value_enum)]
    pub format: Option<FormatName>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value = "group")]
    pub group_column: String,
    #[arg(long, default_value = "value")]
    pub value_column: String,
    #[arg(long, default_value = "u")]
    pub u_column: String,
    #[arg(long, default_value = "v")]
    pub v_column: String,
}

#[derive(Args, Debug)]
pub struct CritvalArgs {
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alphas: Vec<f64>,
    #[arg(long, default_value_t = 10_000_000)]
    pub reps: usize,
    /// Released m* for mw; defaults to floor(n/2).
    #[arg(long)]
    pub m_star: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SimArgs {
    #[command(flatten)]
    pub budget: BudgetArgs,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Spread of group means (or paired mean difference) in standard deviations.
    #[arg(long, default_value_t = 0.0)]
    pub effect: f64,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 20_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Comma-separated group shares summing to 1.
    #[arg(long, value_delimiter = ',')]
    pub proportions: Option<Vec<f64>>,
    /// Fraction of paired rows with zero difference.
    #[arg(long)]
    pub zero_fraction: Option<f64>,
    #[arg(long)]
    pub uniform: bool,
}
