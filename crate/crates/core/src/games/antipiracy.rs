//! Anti-piracy games for copy-protected PKE and FE.
//!
//! A pirate makes `k` protected key queries and must output `k + 1`
//! freeloaders; each gets its own challenge and all must guess right.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{run_trials, Answer, Challenge, GameParams, GameReport, GameTrace, KeyKind, Message, Query, StrategyKind, TrialTrace, Verdict};
use crate::bits::BitString;
use crate::circuit::{Circuit, FunctionDesc};
use crate::copy_protect::{
    cp_fe_enc, cp_fe_keygen, cp_fe_keygen_with_id, cp_fe_pmsk, cp_fe_pmsk_keygen, cp_fe_qkeygen, cp_fe_setup, cp_pke_dec,
    cp_pke_enc, cp_pke_qkeygen, cp_pke_setup, ClassicalDecryptor, CpCiphertext, CpFeClassicalKey, CpInstance, CpParams,
    CpPublicKey, QuantumKey,
};
use crate::error::{Error, Result};
use crate::fe::bits_plaintext;
use crate::obf::ObfProgram;
use crate::pke::Plaintext;

/// Message width used by the built-in FE pirates.
const FE_MESSAGE_BITS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntiPiracyConfig {
    pub params: CpParams,
    pub trials: u64,
    pub seed: u64,
    pub keep_trace: bool,
    /// Cheat mode: every protected key is handed to the pirate twice.
    pub duplicate_keys: bool,
    /// FE only: freeloaders get `pmsk` instead of a live challenger.
    pub non_interactive: bool,
    pub test_only_leak: bool,
}

impl AntiPiracyConfig {
    pub fn new(params: CpParams, trials: u64, seed: u64) -> Self {
        Self { params, trials, seed, keep_trace: false, duplicate_keys: false, non_interactive: false, test_only_leak: false }
    }

    fn game_params(&self, strategy: &str) -> GameParams {
        GameParams {
            strategy: strategy.to_string(),
            ambient_dim: self.params.coset.ambient_dim,
            subspace_dim: self.params.coset.subspace_dim,
            count: self.params.coset.count,
            id_len: self.params.id_len,
            duplicate_keys: self.duplicate_keys,
            non_interactive: self.non_interactive,
            test_only_leak: self.test_only_leak,
        }
    }
}

// ---------------------------------------------------------------- freeloaders

pub trait PkeFreeloader: Send {
    fn guess(&mut self, ct: &CpCiphertext, rng: &mut dyn RngCore) -> Result<bool>;
}

pub struct PkeFreeloaderSpec {
    pub m0: Plaintext,
    pub m1: Plaintext,
    pub freeloader: Box<dyn PkeFreeloader>,
}

/// A key handed out after the challenge ciphertext.
pub enum FeIssued {
    Classical(CpFeClassicalKey),
    Protected(QuantumKey),
}

/// Post-challenge key source: the live challenger or `pmsk`.
pub trait FeKeyOracle {
    fn request(&mut self, kind: KeyKind, f: &FunctionDesc) -> Result<Option<FeIssued>>;
}

pub trait FeFreeloader: Send {
    fn guess(&mut self, ct: &CpCiphertext, keys: &mut dyn FeKeyOracle, rng: &mut dyn RngCore) -> Result<bool>;
}

enum Decryptor {
    Quantum(QuantumKey),
    Classical(ClassicalDecryptor),
    Guess,
}

/// Decrypts with whatever it holds and maps the plaintext to a bit;
/// anything unrecognized becomes a coin flip.
struct Freeloader {
    dec: Decryptor,
    y0: Plaintext,
    y1: Plaintext,
}

impl Freeloader {
    fn pke(dec: Decryptor, m0: &Plaintext, m1: &Plaintext) -> Self {
        Self { dec, y0: m0.clone(), y1: m1.clone() }
    }

    fn fe(dec: Decryptor, f: &FunctionDesc, m0: &BitString, m1: &BitString) -> Result<Self> {
        Ok(Self { dec, y0: bits_plaintext(&f.eval(m0)?), y1: bits_plaintext(&f.eval(m1)?) })
    }

    fn decide(&mut self, ct: &CpCiphertext, rng: &mut dyn RngCore) -> Result<bool> {
        let out = match &mut self.dec {
            Decryptor::Quantum(k) => {
                let (pt, next) = cp_pke_dec(k, ct, rng)?;
                *k = next;
                pt
            }
            Decryptor::Classical(c) => c.decrypt(ct)?,
            Decryptor::Guess => None,
        };
        Ok(match out {
            Some(p) if p == self.y1 && p != self.y0 => true,
            Some(p) if p == self.y0 && p != self.y1 => false,
            _ => rng.random(),
        })
    }
}

impl PkeFreeloader for Freeloader {
    fn guess(&mut self, ct: &CpCiphertext, rng: &mut dyn RngCore) -> Result<bool> {
        self.decide(ct, rng)
    }
}

impl FeFreeloader for Freeloader {
    fn guess(&mut self, ct: &CpCiphertext, _keys: &mut dyn FeKeyOracle, rng: &mut dyn RngCore) -> Result<bool> {
        self.decide(ct, rng)
    }
}

/// Asks for a key after seeing the challenge, then decrypts with it.
struct PostChallengeFreeloader {
    kind: KeyKind,
    f: FunctionDesc,
    m0: BitString,
    m1: BitString,
}

impl FeFreeloader for PostChallengeFreeloader {
    fn guess(&mut self, ct: &CpCiphertext, keys: &mut dyn FeKeyOracle, rng: &mut dyn RngCore) -> Result<bool> {
        let dec = match keys.request(self.kind, &self.f)? {
            Some(FeIssued::Classical(fk)) => Decryptor::Classical(ClassicalDecryptor::from_fe_key(&fk)),
            Some(FeIssued::Protected(qk)) => Decryptor::Quantum(qk),
            None => Decryptor::Guess,
        };
        Freeloader::fe(dec, &self.f, &self.m0, &self.m1)?.decide(ct, rng)
    }
}

/// Two copies of one key in hand: extract a classical decryptor.
fn cloned_decryptor(keys: &[QuantumKey], rng: &mut dyn RngCore) -> Result<Option<ClassicalDecryptor>> {
    match keys {
        [a, b, ..] if a.id == b.id => ClassicalDecryptor::extract(a, b, rng).map(Some),
        _ => Ok(None),
    }
}

// ---------------------------------------------------------------- PKE pirates

pub trait PkePirate: Sync {
    fn name(&self) -> &str;

    fn omniscient(&self) -> bool {
        false
    }

    /// Number of protected key queries `k`.
    fn key_queries(&self) -> usize;

    /// Must return exactly `k + 1` freeloaders. In cheat mode `keys` holds
    /// two adjacent copies of every key.
    fn split(
        &self,
        pk: &CpPublicKey,
        keys: Vec<QuantumKey>,
        leaked: Option<&CpInstance>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<PkeFreeloaderSpec>>;
}

fn pke_pair() -> (Plaintext, Plaintext) {
    (Plaintext::Message(vec![0]), Plaintext::Message(vec![1]))
}

fn pke_spec(dec: Decryptor) -> PkeFreeloaderSpec {
    let (m0, m1) = pke_pair();
    PkeFreeloaderSpec { freeloader: Box::new(Freeloader::pke(dec, &m0, &m1)), m0, m1 }
}

struct PkeBuiltin {
    kind: StrategyKind,
    k: usize,
}

impl PkePirate for PkeBuiltin {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn omniscient(&self) -> bool {
        self.kind == StrategyKind::OracleOmniscient
    }

    fn key_queries(&self) -> usize {
        self.k
    }

    fn split(
        &self,
        _pk: &CpPublicKey,
        keys: Vec<QuantumKey>,
        leaked: Option<&CpInstance>,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<PkeFreeloaderSpec>> {
        let k = self.k;
        let mut out = Vec::with_capacity(k + 1);
        match self.kind {
            StrategyKind::HonestForwarder => {
                let mut seen = Vec::new();
                for key in keys {
                    if !seen.contains(&key.id) {
                        seen.push(key.id.clone());
                        out.push(pke_spec(Decryptor::Quantum(key)));
                    }
                }
            }
            StrategyKind::TwoCopyCloner => {
                if let Some(dec) = cloned_decryptor(&keys, rng)? {
                    out.extend((0..=k).map(|_| pke_spec(Decryptor::Classical(dec.clone()))));
                } else {
                    out.extend(keys.into_iter().take(k).map(|key| pke_spec(Decryptor::Quantum(key))));
                }
            }
            StrategyKind::OracleOmniscient => {
                let inst = leaked.ok_or_else(|| Error::Protocol("no leaked instance".into()))?;
                let key = cp_pke_qkeygen(inst, rng)?;
                let triples = inst.triples(&key.id)?;
                let dec = ClassicalDecryptor {
                    id: key.id.clone(),
                    ck: key.ck.clone(),
                    primal: triples.iter().map(|t| t.s).collect(),
                    dual: triples.iter().map(|t| t.s_prime).collect(),
                };
                out.extend((0..=k).map(|_| pke_spec(Decryptor::Classical(dec.clone()))));
            }
            _ => {}
        }
        out.truncate(k + 1);
        while out.len() < k + 1 {
            out.push(pke_spec(Decryptor::Guess));
        }
        Ok(out)
    }
}

/// Built-in PKE pirates making `k` protected queries.
///
/// `HonestForwarder` passes each key to its own freeloader and lets the last
/// one guess; `AllGuess` guesses everywhere; `TwoCopyCloner` turns a
/// duplicated key into classical decryptors for every freeloader.
pub fn pke_pirate(kind: StrategyKind, k: usize) -> Result<Box<dyn PkePirate>> {
    match kind {
        StrategyKind::HonestForwarder
        | StrategyKind::AllGuess
        | StrategyKind::TwoCopyCloner
        | StrategyKind::OracleOmniscient => Ok(Box::new(PkeBuiltin { kind, k })),
        other => Err(Error::Parameter(format!("{} is not a PKE pirate", other.name()))),
    }
}

fn check_split(len: usize, k: usize) -> Result<()> {
    if len != k + 1 {
        return Err(Error::Protocol(format!("{len} freeloaders for {k} protected keys, expected {}", k + 1)));
    }
    Ok(())
}

fn guesses_verdict(challenges: &[bool], guesses: &[bool]) -> Verdict {
    match challenges.iter().zip(guesses).position(|(b, g)| b != g) {
        None => Verdict::win(true, "every freeloader guessed right"),
        Some(l) => Verdict::win(false, format!("freeloader {l} guessed wrong")),
    }
}

fn pke_trial(cfg: &AntiPiracyConfig, pirate: &dyn PkePirate, trace: &mut TrialTrace, rng: &mut dyn RngCore) -> Result<Verdict> {
    let inst = cp_pke_setup(cfg.params.clone(), rng)?;
    let k = pirate.key_queries();
    let mut keys = Vec::with_capacity(k * 2);
    for _ in 0..k {
        let key = cp_pke_qkeygen(&inst, rng)?;
        trace.queries.push(Query::Key { kind: KeyKind::Protected, id: key.id.clone(), f: None });
        if cfg.duplicate_keys {
            keys.push(key.clone());
        }
        keys.push(key);
    }
    let specs = pirate.split(&inst.pk, keys, cfg.test_only_leak.then_some(&inst), rng)?;
    check_split(specs.len(), k)?;
    let (mut bs, mut gs) = (Vec::new(), Vec::new());
    for (l, mut spec) in specs.into_iter().enumerate() {
        let b: bool = rng.random();
        let ct = cp_pke_enc(&inst.pk, if b { &spec.m1 } else { &spec.m0 }, rng)?;
        trace.challenges.push(Challenge::Messages {
            freeloader: l,
            m0: Message::Plain(spec.m0.clone()),
            m1: Message::Plain(spec.m1.clone()),
            b,
        });
        let g = spec.freeloader.guess(&ct, rng)?;
        trace.answers.push(Answer::Guess { freeloader: l, b: g });
        bs.push(b);
        gs.push(g);
    }
    Ok(guesses_verdict(&bs, &gs))
}

fn check_leak(omniscient: bool, name: &str, cfg: &AntiPiracyConfig) -> Result<()> {
    if omniscient && !cfg.test_only_leak {
        return Err(Error::Parameter(format!("{name} needs the test-only leak enabled")));
    }
    Ok(())
}

pub fn run_pke_antipiracy(cfg: &AntiPiracyConfig, pirate: &dyn PkePirate) -> Result<GameReport> {
    cfg.params.validate()?;
    check_leak(pirate.omniscient(), pirate.name(), cfg)?;
    if cfg.non_interactive {
        return Err(Error::Parameter("the non-interactive form exists only for FE".into()));
    }
    let game = "antipiracy-cp-pke";
    let trials = run_trials(cfg.seed, game, cfg.trials, |t, rng| pke_trial(cfg, pirate, t, rng))?;
    let trace = GameTrace { game: game.into(), seed: cfg.seed, params: cfg.game_params(pirate.name()), trials };
    Ok(GameReport::from_trace(trace, cfg.keep_trace))
}

// ---------------------------------------------------------------- FE pirates

/// Keys returned for the pre-challenge queries, in query order per kind.
pub struct FeKeys {
    pub classical: Vec<CpFeClassicalKey>,
    /// In cheat mode, two adjacent copies per protected query.
    pub protected: Vec<QuantumKey>,
}

pub struct FeSplit {
    pub m0: BitString,
    pub m1: BitString,
    pub freeloaders: Vec<Box<dyn FeFreeloader>>,
}

pub trait FePirate: Sync {
    fn name(&self) -> &str;

    fn omniscient(&self) -> bool {
        false
    }

    /// Phase-1 queries for an instance padding circuits to `q` bytes.
    fn queries(&self, q: usize) -> Result<Vec<(KeyKind, FunctionDesc)>>;

    fn split(&self, pk: &CpPublicKey, keys: FeKeys, leaked: Option<&CpInstance>, rng: &mut dyn RngCore) -> Result<FeSplit>;
}

struct FeBuiltin {
    kind: StrategyKind,
    k: usize,
}

fn fe_pair() -> (BitString, BitString) {
    (BitString::zeros(FE_MESSAGE_BITS), BitString::from_u64(1, FE_MESSAGE_BITS))
}

impl FePirate for FeBuiltin {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn omniscient(&self) -> bool {
        self.kind == StrategyKind::OracleOmniscient
    }

    fn queries(&self, q: usize) -> Result<Vec<(KeyKind, FunctionDesc)>> {
        let parity = FunctionDesc::new(Circuit::parity(FE_MESSAGE_BITS), q)?;
        Ok(match self.kind {
            StrategyKind::ClassicalViolator => vec![(KeyKind::Classical, parity)],
            StrategyKind::Phase2Cheater | StrategyKind::OracleOmniscient => Vec::new(),
            _ => vec![(KeyKind::Protected, parity); self.k],
        })
    }

    fn split(&self, pk: &CpPublicKey, keys: FeKeys, leaked: Option<&CpInstance>, rng: &mut dyn RngCore) -> Result<FeSplit> {
        let (m0, m1) = fe_pair();
        let parity = |q| FunctionDesc::new(Circuit::parity(FE_MESSAGE_BITS), q);
        let spec = |dec: Decryptor, f: &FunctionDesc| -> Result<Box<dyn FeFreeloader>> {
            Ok(Box::new(Freeloader::fe(dec, f, &m0, &m1)?))
        };
        let k = keys.protected.iter().map(|key| &key.id).collect::<std::collections::BTreeSet<_>>().len();
        let mut out: Vec<Box<dyn FeFreeloader>> = Vec::new();
        match self.kind {
            StrategyKind::HonestForwarder => {
                let mut seen = Vec::new();
                for key in keys.protected {
                    if !seen.contains(&key.id) {
                        seen.push(key.id.clone());
                        let f = key.f.clone().expect("FE keys carry their function");
                        out.push(spec(Decryptor::Quantum(key), &f)?);
                    }
                }
            }
            StrategyKind::TwoCopyCloner => {
                if let Some(dec) = cloned_decryptor(&keys.protected, rng)? {
                    let f = keys.protected[0].f.clone().expect("FE keys carry their function");
                    for _ in 0..=k {
                        out.push(spec(Decryptor::Classical(dec.clone()), &f)?);
                    }
                } else {
                    for key in keys.protected.into_iter().take(k) {
                        let f = key.f.clone().expect("FE keys carry their function");
                        out.push(spec(Decryptor::Quantum(key), &f)?);
                    }
                }
            }
            StrategyKind::ClassicalViolator => {
                for fk in &keys.classical {
                    out.push(spec(Decryptor::Classical(ClassicalDecryptor::from_fe_key(fk)), &fk.f)?);
                }
            }
            StrategyKind::Phase2Cheater => {
                let q = pk.params.q;
                out.push(Box::new(PostChallengeFreeloader { kind: KeyKind::Classical, f: parity(q)?, m0: m0.clone(), m1: m1.clone() }));
            }
            StrategyKind::OracleOmniscient => {
                let inst = leaked.ok_or_else(|| Error::Protocol("no leaked instance".into()))?;
                let f = parity(inst.pk.params.q)?;
                let fk = cp_fe_keygen(inst, &f, rng)?;
                out.push(spec(Decryptor::Classical(ClassicalDecryptor::from_fe_key(&fk)), &f)?);
            }
            _ => {}
        }
        out.truncate(k + 1);
        while out.len() < k + 1 {
            out.push(Box::new(Freeloader { dec: Decryptor::Guess, y0: Plaintext::Top, y1: Plaintext::Top }));
        }
        Ok(FeSplit { m0, m1, freeloaders: out })
    }
}

/// Built-in FE pirates over 4-bit messages `0000` / `0001` and the parity
/// function, which separates them.
///
/// `ClassicalViolator` asks for a classical parity key (forbidden: the
/// challenger outputs 0); `Phase2Cheater` asks for one after the challenge.
pub fn fe_pirate(kind: StrategyKind, k: usize) -> Result<Box<dyn FePirate>> {
    match kind {
        StrategyKind::HonestForwarder
        | StrategyKind::AllGuess
        | StrategyKind::TwoCopyCloner
        | StrategyKind::ClassicalViolator
        | StrategyKind::Phase2Cheater
        | StrategyKind::OracleOmniscient => Ok(Box::new(FeBuiltin { kind, k })),
        other => Err(Error::Parameter(format!("{} is not an FE pirate", other.name()))),
    }
}

/// Live challenger (`pmsk` absent) or `pmsk` evaluated on fresh identities.
struct Phase2Oracle<'a> {
    inst: &'a CpInstance,
    pmsk: Option<&'a ObfProgram>,
    freeloader: usize,
    rng: ChaCha20Rng,
    log: Vec<Query>,
}

impl FeKeyOracle for Phase2Oracle<'_> {
    fn request(&mut self, kind: KeyKind, f: &FunctionDesc) -> Result<Option<FeIssued>> {
        if f.max_bytes() != self.inst.pk.params.q {
            return Err(Error::Protocol(format!("function padded to {} bytes", f.max_bytes())));
        }
        let fk = match self.pmsk {
            None => Some(cp_fe_keygen(self.inst, f, &mut self.rng)?),
            Some(p) => cp_fe_pmsk_keygen(p, &BitString::random(self.inst.pk.params.id_len, &mut self.rng), f)?,
        };
        self.log.push(Query::PostChallenge { freeloader: self.freeloader, f: f.clone(), issued: fk.is_some() });
        fk.map(|fk| match kind {
            KeyKind::Classical => Ok(FeIssued::Classical(fk)),
            KeyKind::Protected => Ok(FeIssued::Protected(cp_fe_qkeygen(&fk, self.inst.pk.params.qubit_cap)?)),
        })
        .transpose()
    }
}

fn fork(rng: &mut dyn RngCore) -> ChaCha20Rng {
    let mut seed = [0u8; 32];
    rng.fill_bytes(&mut seed);
    ChaCha20Rng::from_seed(seed)
}

pub(super) fn separates(f: &FunctionDesc, m0: &BitString, m1: &BitString) -> bool {
    // A function that cannot run on the pair separates nothing it can reveal,
    // but it is not a valid query either; treat it as separating.
    match (f.eval(m0), f.eval(m1)) {
        (Ok(a), Ok(b)) => a != b,
        _ => true,
    }
}

fn fe_trial(cfg: &AntiPiracyConfig, pirate: &dyn FePirate, trace: &mut TrialTrace, rng: &mut dyn RngCore) -> Result<Verdict> {
    let inst = cp_fe_setup(cfg.params.clone(), rng)?;
    let q = inst.pk.params.q;
    let mut keys = FeKeys { classical: Vec::new(), protected: Vec::new() };
    let mut k = 0;
    let mut clas = Vec::new();
    for (kind, f) in pirate.queries(q)? {
        if f.max_bytes() != q {
            return Err(Error::Protocol(format!("function padded to {} bytes, instance expects {q}", f.max_bytes())));
        }
        let id = BitString::random(inst.pk.params.id_len, rng);
        let fk = cp_fe_keygen_with_id(&inst, &id, &f)?;
        trace.queries.push(Query::Key { kind, id: fk.id.clone(), f: Some(f.clone()) });
        match kind {
            KeyKind::Classical => {
                clas.push(f);
                keys.classical.push(fk);
            }
            KeyKind::Protected => {
                k += 1;
                let key = cp_fe_qkeygen(&fk, inst.pk.params.qubit_cap)?;
                if cfg.duplicate_keys {
                    keys.protected.push(key.clone());
                }
                keys.protected.push(key);
            }
        }
    }
    let split = pirate.split(&inst.pk, keys, cfg.test_only_leak.then_some(&inst), rng)?;
    check_split(split.freeloaders.len(), k)?;
    let (m0, m1) = (split.m0, split.m1);
    if m0.len() != m1.len() {
        return Err(Error::Protocol("challenge messages differ in length".into()));
    }
    trace.challenges.push(Challenge::Pair { m0: Message::Bits(m0.clone()), m1: Message::Bits(m1.clone()) });
    if clas.iter().any(|f| separates(f, &m0, &m1)) {
        return Ok(Verdict::win(false, "a classical key separates the challenge pair"));
    }
    let pmsk = if cfg.non_interactive { Some(cp_fe_pmsk(&inst, &m0, &m1)?) } else { None };
    let (mut bs, mut gs) = (Vec::new(), Vec::new());
    let mut cheated = None;
    for (l, mut freeloader) in split.freeloaders.into_iter().enumerate() {
        let b: bool = rng.random();
        let ct = cp_fe_enc(&inst.pk, if b { &m1 } else { &m0 }, rng)?;
        trace.challenges.push(Challenge::Messages { freeloader: l, m0: Message::Bits(m0.clone()), m1: Message::Bits(m1.clone()), b });
        let mut oracle = Phase2Oracle { inst: &inst, pmsk: pmsk.as_ref(), freeloader: l, rng: fork(rng), log: Vec::new() };
        let g = freeloader.guess(&ct, &mut oracle, rng)?;
        for q in &oracle.log {
            if let Query::PostChallenge { f, issued: true, .. } = q {
                if cheated.is_none() && separates(f, &m0, &m1) {
                    cheated = Some(l);
                }
            }
        }
        trace.queries.extend(oracle.log);
        trace.answers.push(Answer::Guess { freeloader: l, b: g });
        bs.push(b);
        gs.push(g);
    }
    if let Some(l) = cheated {
        return Ok(Verdict::win(false, format!("freeloader {l} obtained a key for a separating function")));
    }
    Ok(guesses_verdict(&bs, &gs))
}

pub fn run_fe_antipiracy(cfg: &AntiPiracyConfig, pirate: &dyn FePirate) -> Result<GameReport> {
    cfg.params.validate()?;
    check_leak(pirate.omniscient(), pirate.name(), cfg)?;
    let game = if cfg.non_interactive { "antipiracy-cp-fe-ni" } else { "antipiracy-cp-fe" };
    let trials = run_trials(cfg.seed, game, cfg.trials, |t, rng| fe_trial(cfg, pirate, t, rng))?;
    let trace = GameTrace { game: game.into(), seed: cfg.seed, params: cfg.game_params(pirate.name()), trials };
    Ok(GameReport::from_trace(trace, cfg.keep_trace))
}
