use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "pseudo-affine",
    version,
    about = "Cantor sets from gap proportions and pseudo-affine IFS diagnostics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Realize a Cantor set and write its gap table.
    Construct(ConstructArgs),
    /// Draw the gap table (and optionally the branches) as SVG.
    Render(RenderArgs),
    /// Check periodic derivatives against powers of λ.
    Livsic(LivsicArgs),
    /// Trace cocycle ratios along codings and give a finite-depth verdict.
    Chi(ChiArgs),
    /// Build the tripling-map transfer operator and verify the conjugacy.
    Transfer(TransferArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Example {
    /// θ_0(w) = θ_1(w) = ε_{|w|}.
    A,
    /// θ_1((01)^k) = ε_k, zero elsewhere.
    B,
}

/// Where the proportion pair comes from.
#[derive(Args, Debug, Clone, Serialize)]
pub struct ProportionArgs {
    /// Contraction rate λ in (0, 1/2).
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    /// `zero` or a proportion JSON file; ignored when --example is given.
    #[arg(long, default_value = "zero")]
    pub theta: String,
    /// Generate one of the example families instead.
    #[arg(long, value_enum)]
    pub example: Option<Example>,
    /// Regularity s of the example family (at least 1 for case a, above 1 for case b, or `inf`).
    #[arg(long, default_value = "2")]
    pub s: String,
    /// ε_0 of the case (b) family.
    #[arg(long, default_value_t = 0.2)]
    pub eps0: f64,
    /// Exponent γ of the case (a) family at s = 1.
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
pub struct ConstructArgs {
    #[command(flatten)]
    pub proportions: ProportionArgs,
    /// Deepest gap word length.
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Tolerance for the Ψ-sum tail.
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
    /// Directory for gaps.csv and gaps.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct RenderArgs {
    #[command(flatten)]
    pub proportions: ProportionArgs,
    /// Number of levels drawn (levels 0..depth-1).
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    /// Highlight the gaps of the words (01)^k.
    #[arg(long)]
    pub highlight_spine: bool,
    /// Add panels with f_i and f_i′.
    #[arg(long)]
    pub panels: bool,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    /// SVG output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct LivsicArgs {
    #[command(flatten)]
    pub proportions: ProportionArgs,
    /// Longest word checked.
    #[arg(long, default_value_t = 8)]
    pub maxlen: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub rel_tol: f64,
    /// Gap table depth behind the branches.
    #[arg(long, default_value_t = 10)]
    pub depth: usize,
    /// Evaluation tolerance of the branches.
    #[arg(long, default_value_t = 1e-13)]
    pub tol: f64,
    /// Replace the branches by the affine pair f_0 = λt, f_1 = 1 − (λ+δ)(1−t).
    #[arg(long)]
    pub perturb: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct ChiArgs {
    /// Denominator pair: `zero` or a proportion JSON file.
    #[arg(long, default_value = "zero")]
    pub theta: String,
    /// Numerator pair: `zero` or a proportion JSON file.
    #[arg(long, default_value = "zero")]
    pub eta: String,
    /// λ for `zero` pairs when no file fixes it.
    #[arg(long, default_value_t = 0.3)]
    pub lambda: f64,
    /// Codings `prefix(block)^inf`; repeat for an ensemble.
    #[arg(long = "coding", required = true)]
    pub codings: Vec<String>,
    #[arg(long, default_value_t = 40)]
    pub n: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub osc_tol: f64,
    /// Directory for one `chi_<k>.csv` per coding and chi.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
pub struct TransferArgs {
    /// `const:C`, `digits:v0,v1,v2` (1 digit) or 9 values (2 digits), or `cobound:u0,u1,u2`.
    #[arg(long)]
    pub phi: String,
    #[arg(long, default_value_t = 6)]
    pub depth: usize,
    /// Check the derivative identity at sampled points.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also sum φ over all periodic orbits up to this period.
    #[arg(long)]
    pub period_max: Option<usize>,
    /// Directory for transfer.json and h.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
