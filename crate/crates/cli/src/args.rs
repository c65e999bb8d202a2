use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clonelab_core::games::{MoeVariant, StrategyKind};
use serde::Serialize;

use crate::experiments::games::AntiPiracyScheme;

#[derive(Debug, Parser)]
#[command(name = "clonelab", version = crate::report::VERSION, about = "Coset-state copy-protection laboratory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Round-trip and punctured-key correctness suites.
    Correctness(CorrectnessArgs),
    /// Monogamy-of-entanglement games.
    Moe(MoeArgs),
    /// Anti-piracy games against the copy-protected schemes.
    Antipiracy(AntiPiracyArgs),
    /// Randomised checks of the measurement lemmas.
    Lemmas(LemmasArgs),
    /// Empirical checks of the projective, approximate and threshold implementations.
    Lab(LabArgs),
    /// Wall-clock timings of the core operations.
    Bench(BenchArgs),
    /// Recomputes the verdicts stored in a game report written with --trace.
    CheckTrace(CheckTraceArgs),
}

/// Where and how to write the report. Never part of the config echo.
#[derive(Debug, Clone, Default, Args)]
pub struct OutputArgs {
    /// Report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write a one-row-per-check CSV summary here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Record wall-clock time in the report (breaks byte-identity).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Duality,
    CpPke,
    CpFe,
    Prf,
    Ibe,
    Fe,
    All,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CorrectnessArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub scheme: Scheme,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub c: usize,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 32)]
    pub id_len: usize,
    /// Domain size, in bits, for the exhaustive PRF and IBE checks.
    #[arg(long, default_value_t = 8)]
    pub input_len: usize,
    /// Ambient dimensions cycled through by the duality check.
    #[arg(long, value_delimiter = ',', default_values_t = [2usize, 4, 6, 8])]
    pub dims: Vec<usize>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MoeArgs {
    /// single, multi (alias mult-chal) or coll.
    #[arg(long, default_value = "multi")]
    pub variant: MoeVariant,
    #[arg(long, default_value = "basis-guesser")]
    pub strategy: StrategyKind,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 1)]
    pub c: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub id_len: usize,
    /// Lets omniscient test adversaries see the secret cosets.
    #[arg(long)]
    pub test_only_leak: bool,
    /// Keep per-trial transcripts in the report.
    #[arg(long)]
    pub trace: bool,
    /// Win probability the 95% interval must contain; repeatable.
    #[arg(long)]
    pub expect: Vec<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AntiPiracyArgs {
    #[arg(long, value_enum, default_value = "cp-pke")]
    pub scheme: PirateScheme,
    #[arg(long, default_value = "honest-forwarder")]
    pub strategy: StrategyKind,
    /// Protected keys the pirate asks for.
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub c: usize,
    #[arg(long, default_value_t = 32)]
    pub id_len: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    /// Cheat mode: each protected key is handed over twice.
    #[arg(long)]
    pub duplicate_keys: bool,
    /// FE only: freeloaders get the punctured master key instead of a live challenger.
    #[arg(long)]
    pub non_interactive: bool,
    #[arg(long)]
    pub test_only_leak: bool,
    #[arg(long)]
    pub trace: bool,
    #[arg(long)]
    pub expect: Vec<f64>,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PirateScheme {
    CpPke,
    CpFe,
}

impl From<PirateScheme> for AntiPiracyScheme {
    fn from(s: PirateScheme) -> Self {
        match s {
            PirateScheme::CpPke => AntiPiracyScheme::CpPke,
            PirateScheme::CpFe => AntiPiracyScheme::CpFe,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LemmasArgs {
    /// Largest register dimension drawn.
    #[arg(long, default_value_t = 4)]
    pub dims: usize,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.5)]
    pub eta: f64,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LabArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, default_value_t = 200)]
    pub pi_instances: usize,
    #[arg(long, default_value_t = 100)]
    pub sandwich_instances: usize,
    #[arg(long, default_value_t = 3)]
    pub api_instances: usize,
    #[arg(long, default_value_t = 10_000)]
    pub api_trials: usize,
    #[arg(long, default_value_t = 6)]
    pub max_dim: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 2)]
    pub d: usize,
    #[arg(long, default_value_t = 3)]
    pub c: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CheckTraceArgs {
    /// A report written by `moe` or `antipiracy` with --trace.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    #[serde(skip)]
    pub out: OutputArgs,
}
