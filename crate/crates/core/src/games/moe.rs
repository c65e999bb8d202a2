//! Monogamy-of-entanglement games over coset-state tuples.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{run_trials, Answer, Challenge, GameParams, GameReport, GameTrace, Query, StrategyKind, TrialTrace, Verdict};
use crate::bits::BitString;
use crate::copy_protect::{coset_triples, MemInput, MemProgram, COSET_SEED_BITS};
use crate::error::{Error, Result};
use crate::gf2::{coset_gen, sample_vector, BitVector, CosetParams, CosetTriple, Subspace};
use crate::obf::{obfuscate_program, run_typed, HardwiredKey, ObfMode, ObfProgram, Program};
use crate::prf::{prf_keygen, GgmKey, DEFAULT_SECURITY_BYTES};
use crate::rng::stream_from_rng;
use crate::statevec::{hadamard_all, measure_computational, prepare_coset_state_capped, StateVector, DEFAULT_QUBIT_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoeVariant {
    /// One coset state; freeloader 0 must land in `A + s`, freeloader 1 in `A^⊥ + s'`.
    Single,
    /// A tuple with independent uniform challenge strings.
    Multi,
    /// Identity-keyed tuples behind a membership program, with query phases.
    Coll,
}

impl MoeVariant {
    pub fn game_id(self) -> &'static str {
        match self {
            MoeVariant::Single => "moe-single",
            MoeVariant::Multi => "moe-multi",
            MoeVariant::Coll => "moe-coll",
        }
    }
}

impl std::str::FromStr for MoeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "single" => Ok(MoeVariant::Single),
            "multi" | "mult-chal" => Ok(MoeVariant::Multi),
            "coll" => Ok(MoeVariant::Coll),
            _ => Err(Error::Parameter(format!("unknown MoE variant {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoeConfig {
    pub variant: MoeVariant,
    pub coset: CosetParams,
    /// Identity length for the collusion variant.
    pub id_len: usize,
    pub qubit_cap: usize,
    pub mode: ObfMode,
    pub trials: u64,
    pub seed: u64,
    pub keep_trace: bool,
    /// Hands the secret cosets to adversaries that ask for them.
    pub test_only_leak: bool,
}

impl MoeConfig {
    pub fn new(variant: MoeVariant, coset: CosetParams, trials: u64, seed: u64) -> Self {
        Self {
            variant,
            coset,
            id_len: 8,
            qubit_cap: DEFAULT_QUBIT_CAP,
            mode: ObfMode::Sealed,
            trials,
            seed,
            keep_trace: false,
            test_only_leak: false,
        }
    }

    fn validate(&self) -> Result<()> {
        self.coset.validate()?;
        if self.variant == MoeVariant::Single && self.coset.count != 1 {
            return Err(Error::Parameter(format!("the single variant uses one coset, got {}", self.coset.count)));
        }
        if self.variant == MoeVariant::Coll && self.id_len == 0 {
            return Err(Error::Parameter("identity length must be positive".into()));
        }
        if self.coset.ambient_dim > self.qubit_cap {
            return Err(Error::Resource(format!(
                "{} qubits per coset state exceed the cap of {}",
                self.coset.ambient_dim, self.qubit_cap
            )));
        }
        Ok(())
    }
}

/// Membership checks available to the splitting adversary.
#[derive(Clone, Debug)]
pub enum MembershipOracle {
    /// Per-coset programs `OP^0_i`, `OP^1_i`.
    Cosets(Vec<CosetTriple>),
    /// The obfuscated `PMem` of the collusion variant.
    Mem(ObfProgram),
}

impl MembershipOracle {
    pub fn check_coset(&self, i: usize, basis_bit: bool, v: &BitVector) -> Result<bool> {
        match self {
            MembershipOracle::Cosets(t) => {
                let t = t.get(i).ok_or_else(|| Error::Parameter(format!("no coset {i}")))?;
                Ok(t.accepts(basis_bit, v)?)
            }
            MembershipOracle::Mem(_) => Err(Error::Parameter("only whole tuples can be checked here".into())),
        }
    }

    pub fn check_tuple(&self, id: Option<&BitString>, u: &[BitVector], r: &BitString) -> Result<bool> {
        match (self, id) {
            (MembershipOracle::Cosets(ts), _) => {
                if ts.len() != u.len() || r.len() != u.len() {
                    return Ok(false);
                }
                for (i, (t, v)) in ts.iter().zip(u).enumerate() {
                    if v.len() != t.ambient_dim() || !t.accepts(r.get(i), v)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            (MembershipOracle::Mem(op), Some(id)) => {
                let input = MemInput { id: id.clone(), u: u.to_vec(), r: r.clone() };
                Ok(run_typed::<_, bool>(op, &input)?.unwrap_or(false))
            }
            (MembershipOracle::Mem(_), None) => Err(Error::Parameter("the membership program needs an identity".into())),
        }
    }
}

/// Everything the splitting adversary holds.
pub struct MoeView {
    pub coset: CosetParams,
    /// Received tuples: the challenge tuple (identity `None`), or one per
    /// answered phase-1 query.
    pub tuples: Vec<(Option<BitString>, Vec<StateVector>)>,
    pub oracle: MembershipOracle,
    /// The challenge identity in the collusion variant.
    pub id_star: Option<BitString>,
    /// Secret challenge cosets, only under `test_only_leak`.
    pub leaked: Option<Vec<CosetTriple>>,
}

/// The collusion-variant plan: phase-1 queries and the challenge identity.
#[derive(Clone, Debug, PartialEq)]
pub struct CollPlan {
    pub phase1: Vec<BitString>,
    pub id_star: BitString,
}

pub trait MoeFreeloader: Send {
    /// Identity queries after the split (collusion variant only).
    fn phase2_queries(&self) -> Vec<BitString> {
        Vec::new()
    }

    fn receive(&mut self, _id: &BitString, _states: Vec<StateVector>) {}

    fn answer(&mut self, r: &BitString, spaces: &[Subspace], rng: &mut dyn RngCore) -> Result<Vec<BitVector>>;
}

pub trait MoeAdversary: Sync {
    fn name(&self) -> &str;

    fn omniscient(&self) -> bool {
        false
    }

    /// Default: query a random `id*` once.
    fn plan(&self, id_len: usize, rng: &mut dyn RngCore) -> CollPlan {
        let id_star = BitString::random(id_len, rng);
        CollPlan { phase1: vec![id_star.clone()], id_star }
    }

    fn split(&self, view: MoeView, rng: &mut dyn RngCore) -> Result<[Box<dyn MoeFreeloader>; 2]>;
}

/// Answers from a table of known vectors, one slot per basis and coset;
/// empty slots are filled with uniform guesses.
#[derive(Clone, Debug, Default)]
pub struct TableFreeloader {
    pub primal: Vec<Option<BitVector>>,
    pub dual: Vec<Option<BitVector>>,
}

impl MoeFreeloader for TableFreeloader {
    fn answer(&mut self, r: &BitString, spaces: &[Subspace], rng: &mut dyn RngCore) -> Result<Vec<BitVector>> {
        Ok((0..r.len())
            .map(|i| {
                let slot = if r.get(i) { &self.dual } else { &self.primal };
                slot.get(i)
                    .cloned()
                    .flatten()
                    .unwrap_or_else(|| sample_vector(spaces[i].ambient_dim(), rng))
            })
            .collect())
    }
}

fn measure_in(psi: &StateVector, hadamard: bool, rng: &mut dyn RngCore) -> BitVector {
    if hadamard {
        measure_computational(&hadamard_all(psi), rng).outcome
    } else {
        measure_computational(psi, rng).outcome
    }
}

fn challenge_tuple(view: &MoeView) -> Result<&[StateVector]> {
    match &view.id_star {
        None => view.tuples.first().map(|(_, s)| s.as_slice()),
        Some(star) => view.tuples.iter().find(|(id, _)| id.as_ref() == Some(star)).map(|(_, s)| s.as_slice()),
    }
    .ok_or_else(|| Error::Protocol("no copy of the challenge tuple was received".into()))
}

fn both(t: TableFreeloader) -> [Box<dyn MoeFreeloader>; 2] {
    [Box::new(t.clone()), Box::new(t)]
}

/// Measures every coset state in an independent random basis and hands both
/// freeloaders the classical outcomes.
struct BasisGuesser;

impl MoeAdversary for BasisGuesser {
    fn name(&self) -> &str {
        StrategyKind::BasisGuesser.name()
    }

    fn split(&self, view: MoeView, rng: &mut dyn RngCore) -> Result<[Box<dyn MoeFreeloader>; 2]> {
        let states = challenge_tuple(&view)?;
        let mut t = TableFreeloader { primal: vec![None; states.len()], dual: vec![None; states.len()] };
        for (i, psi) in states.iter().enumerate() {
            let hadamard: bool = rng.random();
            let v = Some(measure_in(psi, hadamard, rng));
            if hadamard {
                t.dual[i] = v;
            } else {
                t.primal[i] = v;
            }
        }
        Ok(both(t))
    }
}

/// Obtains `id*` twice in phase 1 and measures one copy in each basis.
struct TwoCopyCloner;

impl MoeAdversary for TwoCopyCloner {
    fn name(&self) -> &str {
        StrategyKind::TwoCopyCloner.name()
    }

    fn plan(&self, id_len: usize, rng: &mut dyn RngCore) -> CollPlan {
        let id_star = BitString::random(id_len, rng);
        CollPlan { phase1: vec![id_star.clone(), id_star.clone()], id_star }
    }

    fn split(&self, view: MoeView, rng: &mut dyn RngCore) -> Result<[Box<dyn MoeFreeloader>; 2]> {
        let star = view.id_star.clone().ok_or_else(|| Error::Protocol("no identity to query twice".into()))?;
        let copies: Vec<&Vec<StateVector>> =
            view.tuples.iter().filter(|(id, _)| id.as_ref() == Some(&star)).map(|(_, s)| s).collect();
        let [a, b] = copies[..] else {
            return Err(Error::Protocol(format!("expected two copies of the challenge tuple, got {}", copies.len())));
        };
        let primal = a.iter().map(|psi| Some(measure_in(psi, false, rng))).collect();
        let dual = b.iter().map(|psi| Some(measure_in(psi, true, rng))).collect();
        Ok(both(TableFreeloader { primal, dual }))
    }
}

/// Ignores its states and guesses uniformly.
struct AllGuess;

impl MoeAdversary for AllGuess {
    fn name(&self) -> &str {
        StrategyKind::AllGuess.name()
    }

    fn split(&self, _view: MoeView, _rng: &mut dyn RngCore) -> Result<[Box<dyn MoeFreeloader>; 2]> {
        Ok(both(TableFreeloader::default()))
    }
}

/// Harness sanity check: reads `s` and `s'` off the leaked cosets.
struct OracleOmniscient;

impl MoeAdversary for OracleOmniscient {
    fn name(&self) -> &str {
        StrategyKind::OracleOmniscient.name()
    }

    fn omniscient(&self) -> bool {
        true
    }

    fn split(&self, view: MoeView, _rng: &mut dyn RngCore) -> Result<[Box<dyn MoeFreeloader>; 2]> {
        let leaked = view.leaked.ok_or_else(|| Error::Protocol("no leaked cosets".into()))?;
        let primal = leaked.iter().map(|t| Some(t.s)).collect();
        let dual = leaked.iter().map(|t| Some(t.s_prime)).collect();
        Ok(both(TableFreeloader { primal, dual }))
    }
}

/// Built-in MoE adversaries.
pub fn moe_adversary(kind: StrategyKind, variant: MoeVariant) -> Result<Box<dyn MoeAdversary>> {
    match kind {
        StrategyKind::BasisGuesser => Ok(Box::new(BasisGuesser)),
        StrategyKind::AllGuess => Ok(Box::new(AllGuess)),
        StrategyKind::OracleOmniscient => Ok(Box::new(OracleOmniscient)),
        StrategyKind::TwoCopyCloner if variant == MoeVariant::Coll => Ok(Box::new(TwoCopyCloner)),
        StrategyKind::TwoCopyCloner => {
            Err(Error::Parameter("two copies of a tuple exist only in the collusion variant".into()))
        }
        other => Err(Error::Parameter(format!("{} is not an MoE strategy", other.name()))),
    }
}

/// Exact win probability of [`StrategyKind::BasisGuesser`] in the
/// multi-challenge game.
///
/// Per coset both freeloaders hold the measured vector for one basis and guess
/// uniformly, independently of each other, for the other. A uniform guess lands
/// in the unmeasured coset with probability `q = 2^-d` (primal measured) or
/// `2^(d-n)` (dual measured), so a coset survives with `1/4 + q/2 + q^2/4`.
pub fn basis_guesser_win_probability(n: usize, d: usize, c: usize) -> f64 {
    let survive = |q: f64| 0.25 + 0.5 * q + 0.25 * q * q;
    let per_coset = (survive(2f64.powi(-(d as i32))) + survive(2f64.powi(d as i32 - n as i32))) / 2.0;
    per_coset.powi(c as i32)
}

fn tuple_states(triples: &[CosetTriple], cap: usize) -> Result<Vec<StateVector>> {
    triples.iter().map(|t| prepare_coset_state_capped(t, cap)).collect()
}

/// Checks both freeloaders' answers; `Ok(None)` when all pass.
pub(super) fn first_failure(triples: &[CosetTriple], r: &[BitString], v: &[Vec<BitVector>]) -> Result<Option<String>> {
    for (l, (r, v)) in r.iter().zip(v).enumerate() {
        for (i, t) in triples.iter().enumerate() {
            if !t.accepts(r.get(i), &v[i])? {
                return Ok(Some(format!("freeloader {l} missed coset {i}")));
            }
        }
    }
    Ok(None)
}

fn collect_answers(
    freeloaders: &mut [Box<dyn MoeFreeloader>; 2],
    r: &[BitString],
    triples: &[CosetTriple],
    trace: &mut TrialTrace,
    rng: &mut dyn RngCore,
) -> Result<Vec<Vec<BitVector>>> {
    let spaces: Vec<Subspace> = triples.iter().map(|t| t.space.clone()).collect();
    let n = triples[0].ambient_dim();
    let mut out = Vec::with_capacity(2);
    for (l, f) in freeloaders.iter_mut().enumerate() {
        let v = f.answer(&r[l], &spaces, rng)?;
        if v.len() != triples.len() || v.iter().any(|x| x.len() != n) {
            return Err(Error::Protocol(format!("freeloader {l} answered with the wrong shape")));
        }
        trace.answers.push(Answer::Vectors { freeloader: l, v: v.clone() });
        out.push(v);
    }
    Ok(out)
}

fn challenge_strings(variant: MoeVariant, c: usize, rng: &mut dyn RngCore) -> Vec<BitString> {
    match variant {
        MoeVariant::Single => vec![BitString::from_u64(0, 1), BitString::from_u64(1, 1)],
        _ => vec![BitString::random(c, rng), BitString::random(c, rng)],
    }
}

fn plain_trial(cfg: &MoeConfig, adv: &dyn MoeAdversary, trace: &mut TrialTrace, rng: &mut dyn RngCore) -> Result<Verdict> {
    let mut stream = stream_from_rng(rng, cfg.coset.stream_budget());
    let triples = coset_gen(&cfg.coset, &mut stream)?;
    let states = tuple_states(&triples, cfg.qubit_cap)?;
    trace.challenges.push(Challenge::Cosets { id: None, triples: triples.clone() });
    let view = MoeView {
        coset: cfg.coset,
        tuples: vec![(None, states)],
        oracle: MembershipOracle::Cosets(triples.clone()),
        id_star: None,
        leaked: cfg.test_only_leak.then(|| triples.clone()),
    };
    let mut freeloaders = adv.split(view, rng)?;
    let r = challenge_strings(cfg.variant, cfg.coset.count, rng);
    trace.challenges.push(Challenge::Strings { r: r.clone() });
    let v = collect_answers(&mut freeloaders, &r, &triples, trace, rng)?;
    Ok(match first_failure(&triples, &r, &v)? {
        None => Verdict::win(true, "all checks pass"),
        Some(why) => Verdict::win(false, why),
    })
}

fn mem_program(k: &GgmKey, coset: CosetParams, mode: ObfMode) -> Result<ObfProgram> {
    let mem = MemProgram { key: HardwiredKey::Full(k.clone()), coset };
    let twin = MemProgram { key: HardwiredKey::zero_twin(k)?, coset };
    obfuscate_program(Program::Mem(mem), &[Program::Mem(twin)], mode)
}

fn coll_trial(cfg: &MoeConfig, adv: &dyn MoeAdversary, trace: &mut TrialTrace, rng: &mut dyn RngCore) -> Result<Verdict> {
    let k = prf_keygen(DEFAULT_SECURITY_BYTES, cfg.id_len, COSET_SEED_BITS, rng)?;
    let opmem = mem_program(&k, cfg.coset, cfg.mode)?;
    let tuple_for = |id: &BitString| coset_triples(&k.eval(id)?, &cfg.coset);

    let plan = adv.plan(cfg.id_len, rng);
    if let Some(bad) = plan.phase1.iter().chain([&plan.id_star]).find(|id| id.len() != cfg.id_len) {
        return Err(Error::Protocol(format!("{}-bit identity, expected {}", bad.len(), cfg.id_len)));
    }
    let mut tuples = Vec::with_capacity(plan.phase1.len());
    for id in &plan.phase1 {
        trace.queries.push(Query::Identity { phase: 1, freeloader: None, id: id.clone(), answered: true });
        tuples.push((Some(id.clone()), tuple_states(&tuple_for(id)?, cfg.qubit_cap)?));
    }
    let star = plan.id_star;
    let triples = tuple_for(&star)?;
    trace.challenges.push(Challenge::Cosets { id: Some(star.clone()), triples: triples.clone() });

    let view = MoeView {
        coset: cfg.coset,
        tuples,
        oracle: MembershipOracle::Mem(opmem),
        id_star: Some(star.clone()),
        leaked: cfg.test_only_leak.then(|| triples.clone()),
    };
    let mut freeloaders = adv.split(view, rng)?;
    for (l, f) in freeloaders.iter_mut().enumerate() {
        for id in f.phase2_queries() {
            if id.len() != cfg.id_len {
                return Err(Error::Protocol(format!("{}-bit identity, expected {}", id.len(), cfg.id_len)));
            }
            let answered = id != star;
            trace.queries.push(Query::Identity { phase: 2, freeloader: Some(l), id: id.clone(), answered });
            if answered {
                f.receive(&id, tuple_states(&tuple_for(&id)?, cfg.qubit_cap)?);
            }
        }
    }
    let r = challenge_strings(cfg.variant, cfg.coset.count, rng);
    trace.challenges.push(Challenge::Strings { r: r.clone() });
    let v = collect_answers(&mut freeloaders, &r, &triples, trace, rng)?;

    let repeats = plan.phase1.iter().filter(|id| **id == star).count();
    Ok(match first_failure(&triples, &r, &v)? {
        Some(why) => Verdict::win(false, why),
        None if repeats > 1 => Verdict::win(false, format!("all checks pass but id* appears {repeats} times in ID")),
        None => Verdict::win(true, "all checks pass"),
    })
}

pub fn run_moe(cfg: &MoeConfig, adv: &dyn MoeAdversary) -> Result<GameReport> {
    cfg.validate()?;
    if adv.omniscient() && !cfg.test_only_leak {
        return Err(Error::Parameter(format!("{} needs the test-only leak enabled", adv.name())));
    }
    let game = cfg.variant.game_id();
    let trials = run_trials(cfg.seed, game, cfg.trials, |t, rng| match cfg.variant {
        MoeVariant::Coll => coll_trial(cfg, adv, t, rng),
        _ => plain_trial(cfg, adv, t, rng),
    })?;
    let params = GameParams {
        strategy: adv.name().to_string(),
        ambient_dim: cfg.coset.ambient_dim,
        subspace_dim: cfg.coset.subspace_dim,
        count: cfg.coset.count,
        id_len: if cfg.variant == MoeVariant::Coll { cfg.id_len } else { 0 },
        duplicate_keys: false,
        non_interactive: false,
        test_only_leak: cfg.test_only_leak,
    };
    let trace = GameTrace { game: game.to_string(), seed: cfg.seed, params, trials };
    Ok(GameReport::from_trace(trace, cfg.keep_trace))
}
