//! Executable security games with pluggable adversaries.
//!
//! Every trial draws from `substream(seed, game_id, index)`, so reports do not
//! depend on scheduling and any trial replays alone. Each trial leaves a
//! [`TrialTrace`] detailed enough for [`check_trace`] to recompute its verdict.

mod antipiracy;
mod check;
mod decryptor;
mod moe;

pub use antipiracy::{
    fe_pirate, pke_pirate, run_fe_antipiracy, run_pke_antipiracy, AntiPiracyConfig, FeFreeloader, FeIssued, FeKeyOracle, FeKeys,
    FePirate, FeSplit, PkeFreeloader, PkeFreeloaderSpec, PkePirate,
};
pub use check::{check_trace, TraceCheck};
pub use decryptor::{
    decryptor_mixture, decryptor_test, honest_support, CiphertextPoint, DecryptorMode, DecryptorOutcome,
    DecryptorStrategy, MAX_STRATEGIES,
};
pub use moe::{
    basis_guesser_win_probability, moe_adversary, run_moe, CollPlan, MembershipOracle, MoeAdversary, MoeConfig,
    MoeFreeloader, MoeVariant, MoeView, TableFreeloader,
};

use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::bits::BitString;
use crate::circuit::FunctionDesc;
use crate::error::{Error, Result};
use crate::gf2::{BitVector, CosetTriple};
use crate::pke::Plaintext;
use crate::rng::substream;

/// Built-in adversary families.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    HonestForwarder,
    BasisGuesser,
    TwoCopyCloner,
    AllGuess,
    OracleOmniscient,
    /// Classical queries on a function that separates the challenge pair.
    ClassicalViolator,
    /// A freeloader asking for a separating key after the challenge.
    Phase2Cheater,
    Custom,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::HonestForwarder => "honest_forwarder",
            StrategyKind::BasisGuesser => "basis_guesser",
            StrategyKind::TwoCopyCloner => "two_copy_cloner",
            StrategyKind::AllGuess => "all_guess",
            StrategyKind::OracleOmniscient => "oracle_omniscient",
            StrategyKind::ClassicalViolator => "classical_violator",
            StrategyKind::Phase2Cheater => "phase2_cheater",
            StrategyKind::Custom => "custom",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use StrategyKind::*;
        [HonestForwarder, BasisGuesser, TwoCopyCloner, AllGuess, OracleOmniscient, ClassicalViolator, Phase2Cheater, Custom]
            .into_iter()
            .find(|k| k.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::Parameter(format!("unknown strategy {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyKind {
    Classical,
    Protected,
}

/// A challenge message in either scheme.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Message {
    Plain(Plaintext),
    Bits(BitString),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Query {
    /// Coset-tuple request by identity; `freeloader` is set in phase 2.
    Identity { phase: u8, freeloader: Option<usize>, id: BitString, answered: bool },
    /// Key request before the split.
    Key { kind: KeyKind, id: BitString, f: Option<FunctionDesc> },
    /// Functional key request by a freeloader after its challenge.
    PostChallenge { freeloader: usize, f: FunctionDesc, issued: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Challenge {
    /// The coset tuple the answers are checked against (`id*` in MoE-Coll).
    Cosets { id: Option<BitString>, triples: Vec<CosetTriple> },
    /// One challenge string per freeloader.
    Strings { r: Vec<BitString> },
    /// The FE pair shared by all freeloaders, logged before any check.
    Pair { m0: Message, m1: Message },
    Messages { freeloader: usize, m0: Message, m1: Message, b: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Answer {
    Vectors { freeloader: usize, v: Vec<BitVector> },
    Guess { freeloader: usize, b: bool },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub win: bool,
    pub voided: bool,
    pub reason: String,
}

impl Verdict {
    pub fn win(win: bool, reason: impl Into<String>) -> Self {
        Self { win, voided: false, reason: reason.into() }
    }

    pub fn void(reason: impl Into<String>) -> Self {
        Self { win: false, voided: true, reason: reason.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub index: u64,
    pub queries: Vec<Query>,
    pub challenges: Vec<Challenge>,
    pub answers: Vec<Answer>,
    pub verdict: Verdict,
}

impl TrialTrace {
    fn new(index: u64) -> Self {
        Self { index, queries: Vec::new(), challenges: Vec::new(), answers: Vec::new(), verdict: Verdict::void("unfinished") }
    }
}

/// Game parameters echoed into traces and reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub strategy: String,
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub count: usize,
    pub id_len: usize,
    /// Cheat mode: every protected key is handed over twice.
    pub duplicate_keys: bool,
    pub non_interactive: bool,
    pub test_only_leak: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTrace {
    pub game: String,
    pub seed: u64,
    pub params: GameParams,
    pub trials: Vec<TrialTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameReport {
    pub game_id: String,
    pub strategy: String,
    pub trials: u64,
    pub wins: u64,
    pub voided: u64,
    /// Wins over non-voided trials.
    pub win_rate: f64,
    pub ci95: (f64, f64),
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<GameTrace>,
}

impl GameReport {
    fn from_trace(trace: GameTrace, keep: bool) -> Self {
        let trials = trace.trials.len() as u64;
        let voided = trace.trials.iter().filter(|t| t.verdict.voided).count() as u64;
        let wins = trace.trials.iter().filter(|t| t.verdict.win && !t.verdict.voided).count() as u64;
        let n = trials - voided;
        Self {
            game_id: trace.game.clone(),
            strategy: trace.params.strategy.clone(),
            trials,
            wins,
            voided,
            win_rate: if n == 0 { 0.0 } else { wins as f64 / n as f64 },
            ci95: clopper_pearson(wins, n, 0.05),
            trace: keep.then_some(trace),
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        self.ci95.0 <= p && p <= self.ci95.1
    }
}

/// Exact two-sided binomial interval at level `1 - alpha`.
pub fn clopper_pearson(k: u64, n: u64, alpha: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let lo = if k == 0.0 { 0.0 } else { Beta::new(k, n - k + 1.0).expect("positive shapes").inverse_cdf(alpha / 2.0) };
    let hi = if k == n { 1.0 } else { Beta::new(k + 1.0, n - k).expect("positive shapes").inverse_cdf(1.0 - alpha / 2.0) };
    (lo, hi)
}

/// Runs `trial` for every index in parallel, preserving index order.
fn run_trials<F>(seed: u64, game: &str, trials: u64, trial: F) -> Result<Vec<TrialTrace>>
where
    F: Fn(&mut TrialTrace, &mut ChaCha20Rng) -> Result<Verdict> + Sync,
{
    if trials == 0 {
        return Err(Error::Parameter("at least one trial is required".into()));
    }
    (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, game, i);
            let mut t = TrialTrace::new(i);
            t.verdict = match trial(&mut t, &mut rng) {
                Ok(v) => v,
                Err(Error::Protocol(why)) => Verdict::void(format!("protocol violation: {why}")),
                Err(e) => return Err(e),
            };
            Ok(t)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_matches_reference_values() {
        // Reference: R binom.test(5, 20)$conf.int.
        let (lo, hi) = clopper_pearson(5, 20, 0.05);
        assert!((lo - 0.086_571_7).abs() < 1e-6, "{lo}");
        assert!((hi - 0.491_046_0).abs() < 1e-6, "{hi}");
        assert_eq!(clopper_pearson(0, 10, 0.05).0, 0.0);
        assert_eq!(clopper_pearson(10, 10, 0.05).1, 1.0);
    }

    #[test]
    fn strategy_names_round_trip() {
        for name in ["honest_forwarder", "basis-guesser", "two_copy_cloner", "all_guess", "oracle_omniscient"] {
            let k: StrategyKind = name.parse().unwrap();
            assert_eq!(k.name(), name.replace('-', "_"));
        }
        assert!("nope".parse::<StrategyKind>().is_err());
    }
}
