//! Copy-protected PKE and FE over coset states.
//!
//! A quantum key is a tuple of coset states derived from `F1(K1, id)` plus the
//! IBE key for `id`. Ciphertexts are obfuscated `PCt` programs that check the
//! supplied vectors against `OPMem` and answer with an IBE ciphertext under
//! `id`. Decryption evaluates `PCt` branchwise over the support of the key;
//! when the output is constant there the key comes back untouched.

use num_complex::Complex64;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::{FunctionDesc, DEFAULT_MAX_CIRCUIT_BYTES};
use crate::error::{Error, Result};
use crate::fe::{apply_identity, bits_plaintext, plaintext_bits};
use crate::gf2::{coset_gen, BitVector, CosetParams, CosetTriple};
use crate::ibe::{ibe_dec, ibe_enc_with_coins, ibe_keygen, ibe_punc, ibe_setup, IbeMsk, ENC_COIN_BITS};
use crate::obf::{decode_output, obfuscate_program, run, run_typed, HardwiredKey, ObfMode, ObfProgram, Program};
use crate::pke::{PkeCiphertext, PkeSecretKey, Plaintext};
use crate::prf::{prf_keygen, GgmKey, DEFAULT_SECURITY_BYTES};
use crate::statevec::{
    check_qubit_cap, coherent_apply_measure, hadamard_all, hadamard_qubit, measure_computational,
    prepare_coset_state_capped, StateVector, DEFAULT_QUBIT_CAP,
};
use crate::stream::ByteStream;

/// Width of `F1` outputs; they seed the coset sampler's stream expander.
pub const COSET_SEED_BITS: usize = 256;
/// Upper bound on support branches examined per decryption.
pub const MAX_BRANCHES: usize = 1 << 16;
/// Amplitudes below this magnitude are treated as exact zeros.
pub const FLUSH_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpParams {
    /// Bits in the random part of an identity.
    pub id_len: usize,
    pub coset: CosetParams,
    pub qubit_cap: usize,
    pub mode: ObfMode,
    /// Circuit size bound for the FE scheme, in bytes.
    pub q: usize,
}

impl Default for CpParams {
    fn default() -> Self {
        Self {
            id_len: 32,
            coset: CosetParams::new(4, 2, 3).expect("valid defaults"),
            qubit_cap: DEFAULT_QUBIT_CAP,
            mode: ObfMode::Sealed,
            q: DEFAULT_MAX_CIRCUIT_BYTES,
        }
    }
}

impl CpParams {
    pub fn new(id_len: usize, n: usize, d: usize, c: usize) -> Result<Self> {
        let p = Self { id_len, coset: CosetParams::new(n, d, c)?, ..Self::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id_len == 0 || self.q == 0 {
            return Err(Error::Parameter("identity length and circuit bound must be positive".into()));
        }
        self.coset.validate()?;
        check_qubit_cap(self.coset.ambient_dim, self.qubit_cap)
    }
}

/// Derives the coset tuple from an `F1` output.
pub fn coset_triples(seed: &BitString, coset: &CosetParams) -> Result<Vec<CosetTriple>> {
    let mut stream = ByteStream::expand(seed.as_bytes(), coset.stream_budget());
    Ok(coset_gen(coset, &mut stream)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemInput {
    pub id: BitString,
    pub u: Vec<BitVector>,
    pub r: BitString,
}

/// `PMem`: checks `u_i` against `A_i + s_i` or `A_i^⊥ + s'_i` as `r_i` says.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemProgram {
    pub key: HardwiredKey,
    pub coset: CosetParams,
}

impl MemProgram {
    /// Malformed shapes are rejected rather than reported as errors.
    pub fn eval(&self, input: &MemInput) -> Result<bool> {
        let c = self.coset.count;
        let n = self.coset.ambient_dim;
        if input.id.len() != self.key.input_len()
            || input.u.len() != c
            || input.r.len() != c
            || input.u.iter().any(|v| v.len() != n)
        {
            return Ok(false);
        }
        let triples = coset_triples(&self.key.eval(&input.id)?, &self.coset)?;
        for (i, (t, v)) in triples.iter().zip(&input.u).enumerate() {
            if !t.accepts(input.r.get(i), v)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CtInput {
    pub id: BitString,
    pub u: Vec<BitVector>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CtMessage {
    Plain(Plaintext),
    /// Encrypts `f(m)` where `f` is the identity suffix after `id_len` bits.
    Functional { m: BitString, id_len: usize },
}

/// `PCt`: gate on `OPMem`, then `IBE.Enc(cpk, id, msg; F2(K2, id))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpCtProgram {
    pub opmem: ObfProgram,
    pub cpk: ObfProgram,
    pub k2: HardwiredKey,
    pub r: BitString,
    pub message: CtMessage,
}

impl CpCtProgram {
    pub fn eval(&self, input: &CtInput) -> Result<Option<PkeCiphertext>> {
        let mem = MemInput { id: input.id.clone(), u: input.u.clone(), r: self.r.clone() };
        if run_typed::<_, bool>(&self.opmem, &mem)? != Some(true) {
            return Ok(None);
        }
        if input.id.len() != self.k2.input_len() {
            return Ok(None);
        }
        let pt = match &self.message {
            CtMessage::Plain(p) => p.clone(),
            CtMessage::Functional { m, id_len } => {
                let f = BitString::from_bits(&input.id.bits()[(*id_len).min(input.id.len())..]);
                match apply_identity(&f, m) {
                    Some(a) => bits_plaintext(&a),
                    None => return Ok(None),
                }
            }
        };
        let coins = self.k2.eval(&input.id)?;
        ibe_enc_with_coins(&self.cpk, &input.id, &pt, coins.as_bytes()).map(Some)
    }
}

/// Classical functional key `(ck, id || f, f, triples)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpFeClassicalKey {
    pub ck: PkeSecretKey,
    pub id: BitString,
    pub f: FunctionDesc,
    pub triples: Vec<CosetTriple>,
}

/// `PKey` of the copy-protected FE scheme (the punctured master key).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpFeKeyProgram {
    pub cmsk: IbeMsk,
    pub k1: HardwiredKey,
    pub coset: CosetParams,
    pub id_len: usize,
    pub m0: BitString,
    pub m1: BitString,
}

impl CpFeKeyProgram {
    pub fn eval(&self, ident: &BitString) -> Result<Option<CpFeClassicalKey>> {
        if ident.len() != self.k1.input_len() || ident.len() <= self.id_len {
            return Ok(None);
        }
        let Ok(f) = FunctionDesc::from_identity(&BitString::from_bits(&ident.bits()[self.id_len..])) else {
            return Ok(None);
        };
        match (f.eval(&self.m0), f.eval(&self.m1)) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => return Ok(None),
        }
        let ck = match ibe_keygen(&self.cmsk, ident) {
            Ok(ck) => ck,
            Err(Error::PuncturedPoint) => return Ok(None),
            Err(e) => return Err(e),
        };
        let triples = coset_triples(&self.k1.eval(ident)?, &self.coset)?;
        Ok(Some(CpFeClassicalKey { ck, id: ident.clone(), f, triples }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpScheme {
    Pke,
    Fe,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpPublicKey {
    pub scheme: CpScheme,
    pub cpk: ObfProgram,
    pub opmem: ObfProgram,
    pub params: CpParams,
}

impl CpPublicKey {
    /// Full identity length: `id_len`, plus `8q` for FE.
    pub fn ident_len(&self) -> usize {
        match self.scheme {
            CpScheme::Pke => self.params.id_len,
            CpScheme::Fe => self.params.id_len + 8 * self.params.q,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpSecretKey {
    pub cmsk: GgmKey,
    pub k1: GgmKey,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpInstance {
    pub pk: CpPublicKey,
    pub sk: CpSecretKey,
}

impl CpInstance {
    /// `CosetGen(F1(K1, ident))`.
    pub fn triples(&self, ident: &BitString) -> Result<Vec<CosetTriple>> {
        coset_triples(&self.sk.k1.eval(ident)?, &self.pk.params.coset)
    }
}

fn cp_setup<R: RngCore + ?Sized>(scheme: CpScheme, params: CpParams, rng: &mut R) -> Result<CpInstance> {
    params.validate()?;
    let ident_len = match scheme {
        CpScheme::Pke => params.id_len,
        CpScheme::Fe => params.id_len + 8 * params.q,
    };
    let k1 = prf_keygen(DEFAULT_SECURITY_BYTES, ident_len, COSET_SEED_BITS, rng)?;
    let ibe = ibe_setup(ident_len, params.mode, rng)?;
    let mem = MemProgram { key: HardwiredKey::Full(k1.clone()), coset: params.coset };
    let twin = MemProgram { key: HardwiredKey::zero_twin(&k1)?, coset: params.coset };
    let opmem = obfuscate_program(Program::Mem(mem), &[Program::Mem(twin)], params.mode)?;
    Ok(CpInstance { pk: CpPublicKey { scheme, cpk: ibe.pk, opmem, params }, sk: CpSecretKey { cmsk: ibe.msk, k1 } })
}

pub fn cp_pke_setup<R: RngCore + ?Sized>(params: CpParams, rng: &mut R) -> Result<CpInstance> {
    cp_setup(CpScheme::Pke, params, rng)
}

pub fn cp_fe_setup<R: RngCore + ?Sized>(params: CpParams, rng: &mut R) -> Result<CpInstance> {
    cp_setup(CpScheme::Fe, params, rng)
}

/// Quantum registers of a key: independent per-coset states, or one joint
/// state over `count * width` qubits with register 0 most significant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum KeyRegisters {
    Product(Vec<StateVector>),
    Joint { state: StateVector, count: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    Computational,
    Hadamard,
}

fn flush(psi: &StateVector) -> StateVector {
    let amps = psi
        .amplitudes()
        .iter()
        .map(|a| if a.norm() < FLUSH_TOL { Complex64::new(0.0, 0.0) } else { *a })
        .collect();
    StateVector::new(psi.n_qubits(), amps).expect("flushing keeps the norm within tolerance")
}

fn split(x: &BitVector, count: usize) -> Vec<BitVector> {
    let bits = x.to_bits();
    let width = bits.len() / count;
    bits.chunks(width).map(|c| BitVector::from_bits(c).expect("register width fits")).collect()
}

impl KeyRegisters {
    pub fn count(&self) -> usize {
        match self {
            KeyRegisters::Product(regs) => regs.len(),
            KeyRegisters::Joint { count, .. } => *count,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            KeyRegisters::Product(regs) => regs.first().map_or(0, StateVector::n_qubits),
            KeyRegisters::Joint { state, count } => state.n_qubits() / count,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, KeyRegisters::Product(_))
    }

    /// `H^{⊗n}` on every register `i` with `r_i = 1`.
    pub fn hadamard_where(&self, r: &BitString) -> KeyRegisters {
        match self {
            KeyRegisters::Product(regs) => KeyRegisters::Product(
                regs.iter()
                    .enumerate()
                    .map(|(i, s)| if r.get(i) { flush(&hadamard_all(s)) } else { s.clone() })
                    .collect(),
            ),
            KeyRegisters::Joint { state, count } => {
                let w = self.width();
                let mut s = state.clone();
                for i in (0..*count).filter(|&i| r.get(i)) {
                    for q in i * w..(i + 1) * w {
                        s = hadamard_qubit(&s, q);
                    }
                }
                KeyRegisters::Joint { state: flush(&s), count: *count }
            }
        }
    }

    /// The tensor product as one state; fails above `cap` qubits.
    pub fn to_joint(&self, cap: usize) -> Result<StateVector> {
        match self {
            KeyRegisters::Joint { state, .. } => Ok(state.clone()),
            KeyRegisters::Product(regs) => {
                check_qubit_cap(regs.iter().map(StateVector::n_qubits).sum(), cap)?;
                let mut amps = vec![Complex64::new(1.0, 0.0)];
                for reg in regs {
                    amps = amps.iter().flat_map(|a| reg.amplitudes().iter().map(move |b| a * b)).collect();
                }
                StateVector::new(regs.iter().map(StateVector::n_qubits).sum(), amps)
            }
        }
    }

    /// Largest amplitude difference between the two joint states.
    pub fn max_abs_diff(&self, other: &KeyRegisters) -> Result<f64> {
        match (self, other) {
            (KeyRegisters::Product(a), KeyRegisters::Product(b)) if a.len() == b.len() => {
                Ok(a.iter().zip(b).map(|(x, y)| x.max_abs_diff(y)).fold(0.0, f64::max))
            }
            _ => Ok(self.to_joint(usize::MAX)?.max_abs_diff(&other.to_joint(usize::MAX)?)),
        }
    }

    /// Measures every register in `basis`, destroying the state.
    pub fn measure<R: RngCore + ?Sized>(&self, basis: Basis, rng: &mut R) -> Vec<BitVector> {
        let rotate = |s: &StateVector| if basis == Basis::Hadamard { hadamard_all(s) } else { s.clone() };
        match self {
            KeyRegisters::Product(regs) => regs.iter().map(|s| measure_computational(&flush(&rotate(s)), rng).outcome).collect(),
            KeyRegisters::Joint { state, count } => split(&measure_computational(&flush(&rotate(state)), rng).outcome, *count),
        }
    }

    /// Coherently evaluates `f` on the register contents and measures its
    /// output. Product states are scanned branch by branch; only a
    /// non-constant output forces the joint representation.
    fn coherent_eval<F, R>(&self, mut f: F, cap: usize, rng: &mut R) -> Result<(Vec<u8>, KeyRegisters)>
    where
        F: FnMut(Vec<BitVector>) -> Result<Vec<u8>>,
        R: RngCore + ?Sized,
    {
        let count = self.count();
        if let KeyRegisters::Product(regs) = self {
            let supports: Vec<Vec<BitVector>> = regs.iter().map(StateVector::support).collect();
            let total = supports.iter().try_fold(1usize, |acc, s| acc.checked_mul(s.len()).filter(|&t| t <= MAX_BRANCHES));
            let Some(total) = total else {
                return Err(Error::Resource(format!("key support exceeds {MAX_BRANCHES} branches")));
            };
            let mut first: Option<Vec<u8>> = None;
            let mut constant = true;
            for mut k in 0..total {
                let mut u = Vec::with_capacity(count);
                for s in supports.iter().rev() {
                    u.push(s[k % s.len()]);
                    k /= s.len();
                }
                u.reverse();
                let out = f(u)?;
                match &first {
                    None => first = Some(out),
                    Some(v) if *v != out => {
                        constant = false;
                        break;
                    }
                    Some(_) => {}
                }
            }
            if constant {
                return Ok((first.expect("nonempty support"), self.clone()));
            }
        }
        let joint = self.to_joint(cap)?;
        let rec = coherent_apply_measure(&joint, |x| f(split(x, count)), rng)?;
        Ok((rec.outcome, KeyRegisters::Joint { state: flush(&rec.post_state), count }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumKey {
    /// The full identity (`id`, or `id || f` for FE).
    pub id: BitString,
    pub ck: PkeSecretKey,
    pub f: Option<FunctionDesc>,
    pub registers: KeyRegisters,
    pub qubit_cap: usize,
}

fn prepare(triples: &[CosetTriple], cap: usize) -> Result<KeyRegisters> {
    Ok(KeyRegisters::Product(triples.iter().map(|t| prepare_coset_state_capped(t, cap)).collect::<Result<_>>()?))
}

/// Key for a chosen identity; `cp_pke_qkeygen` draws it at random.
pub fn cp_pke_qkeygen_with_id(inst: &CpInstance, id: &BitString) -> Result<QuantumKey> {
    if inst.pk.scheme != CpScheme::Pke || id.len() != inst.pk.params.id_len {
        return Err(Error::Parameter("identity does not fit this PKE instance".into()));
    }
    let triples = inst.triples(id)?;
    Ok(QuantumKey {
        id: id.clone(),
        ck: ibe_keygen(&IbeMsk::Full(inst.sk.cmsk.clone()), id)?,
        f: None,
        registers: prepare(&triples, inst.pk.params.qubit_cap)?,
        qubit_cap: inst.pk.params.qubit_cap,
    })
}

pub fn cp_pke_qkeygen<R: RngCore + ?Sized>(inst: &CpInstance, rng: &mut R) -> Result<QuantumKey> {
    cp_pke_qkeygen_with_id(inst, &BitString::random(inst.pk.params.id_len, rng))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CpCiphertext {
    pub opct: ObfProgram,
    pub r: BitString,
}

fn cp_enc<R: RngCore + ?Sized>(pk: &CpPublicKey, message: CtMessage, r: Option<&BitString>, rng: &mut R) -> Result<CpCiphertext> {
    let c = pk.params.coset.count;
    let r = match r {
        Some(r) if r.len() == c => r.clone(),
        Some(r) => return Err(Error::InputLength { expected: c, got: r.len() }),
        None => BitString::random(c, rng),
    };
    let k2 = prf_keygen(DEFAULT_SECURITY_BYTES, pk.ident_len(), ENC_COIN_BITS, rng)?;
    let program = CpCtProgram { opmem: pk.opmem.clone(), cpk: pk.cpk.clone(), k2: HardwiredKey::Full(k2.clone()), r: r.clone(), message };
    let twin = CpCtProgram { k2: HardwiredKey::zero_twin(&k2)?, ..program.clone() };
    Ok(CpCiphertext { opct: obfuscate_program(Program::CpCt(program), &[Program::CpCt(twin)], pk.params.mode)?, r })
}

pub fn cp_pke_enc<R: RngCore + ?Sized>(pk: &CpPublicKey, m: &Plaintext, rng: &mut R) -> Result<CpCiphertext> {
    if pk.scheme != CpScheme::Pke {
        return Err(Error::Parameter("not a PKE public key".into()));
    }
    cp_enc(pk, CtMessage::Plain(m.clone()), None, rng)
}

/// [`cp_pke_enc`] with a chosen challenge string.
pub fn cp_pke_enc_with_r<R: RngCore + ?Sized>(pk: &CpPublicKey, m: &Plaintext, r: &BitString, rng: &mut R) -> Result<CpCiphertext> {
    if pk.scheme != CpScheme::Pke {
        return Err(Error::Parameter("not a PKE public key".into()));
    }
    cp_enc(pk, CtMessage::Plain(m.clone()), Some(r), rng)
}

/// Runs `PCt` on `(id, u)` and returns the raw encoded output.
pub fn run_ct(ct: &CpCiphertext, id: &BitString, u: Vec<BitVector>) -> Result<Vec<u8>> {
    let input = CtInput { id: id.clone(), u };
    run(&ct.opct, &bincode::serialize(&input).expect("inputs serialize"))
}

fn open(ck: &PkeSecretKey, out: &[u8]) -> Result<Option<Plaintext>> {
    let Some(inner) = decode_output::<PkeCiphertext>(out)? else {
        return Ok(None);
    };
    match ibe_dec(ck, &inner) {
        Ok(p) => Ok(Some(p)),
        Err(Error::Integrity) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Decrypts and returns the successor key. `None` means ⊥.
pub fn cp_pke_dec<R: RngCore + ?Sized>(key: &QuantumKey, ct: &CpCiphertext, rng: &mut R) -> Result<(Option<Plaintext>, QuantumKey)> {
    if ct.r.len() != key.registers.count() {
        return Ok((None, key.clone()));
    }
    let rotated = key.registers.hadamard_where(&ct.r);
    let (out, post) = rotated.coherent_eval(|u| run_ct(ct, &key.id, u), key.qubit_cap, rng)?;
    let successor = QuantumKey { registers: post.hadamard_where(&ct.r), ..key.clone() };
    Ok((open(&key.ck, &out)?, successor))
}

fn fe_ident(inst: &CpInstance, id: &BitString, f: &FunctionDesc) -> Result<BitString> {
    if inst.pk.scheme != CpScheme::Fe || id.len() != inst.pk.params.id_len {
        return Err(Error::Parameter("identity does not fit this FE instance".into()));
    }
    if f.max_bytes() != inst.pk.params.q {
        return Err(Error::Parameter(format!("function padded to {} bytes, instance expects {}", f.max_bytes(), inst.pk.params.q)));
    }
    Ok(id.concat(&f.identity()))
}

pub fn cp_fe_keygen_with_id(inst: &CpInstance, id: &BitString, f: &FunctionDesc) -> Result<CpFeClassicalKey> {
    let ident = fe_ident(inst, id, f)?;
    Ok(CpFeClassicalKey {
        ck: ibe_keygen(&IbeMsk::Full(inst.sk.cmsk.clone()), &ident)?,
        triples: inst.triples(&ident)?,
        id: ident,
        f: f.clone(),
    })
}

pub fn cp_fe_keygen<R: RngCore + ?Sized>(inst: &CpInstance, f: &FunctionDesc, rng: &mut R) -> Result<CpFeClassicalKey> {
    cp_fe_keygen_with_id(inst, &BitString::random(inst.pk.params.id_len, rng), f)
}

pub fn cp_fe_qkeygen(fk: &CpFeClassicalKey, qubit_cap: usize) -> Result<QuantumKey> {
    Ok(QuantumKey {
        id: fk.id.clone(),
        ck: fk.ck.clone(),
        f: Some(fk.f.clone()),
        registers: prepare(&fk.triples, qubit_cap)?,
        qubit_cap,
    })
}

pub fn cp_fe_enc<R: RngCore + ?Sized>(pk: &CpPublicKey, m: &BitString, rng: &mut R) -> Result<CpCiphertext> {
    if pk.scheme != CpScheme::Fe {
        return Err(Error::Parameter("not an FE public key".into()));
    }
    cp_enc(pk, CtMessage::Functional { m: m.clone(), id_len: pk.params.id_len }, None, rng)
}

pub fn cp_fe_dec<R: RngCore + ?Sized>(key: &QuantumKey, ct: &CpCiphertext, rng: &mut R) -> Result<(Option<BitString>, QuantumKey)> {
    let (pt, next) = cp_pke_dec(key, ct, rng)?;
    Ok((pt.map(|p| plaintext_bits(&p)).transpose()?, next))
}

/// Obfuscated `PKey` for the challenge pair, padded against a copy with
/// `cmsk` and `K1` punctured at the all-zero identity.
pub fn cp_fe_pmsk(inst: &CpInstance, m0: &BitString, m1: &BitString) -> Result<ObfProgram> {
    if inst.pk.scheme != CpScheme::Fe {
        return Err(Error::Parameter("not an FE instance".into()));
    }
    let program = CpFeKeyProgram {
        cmsk: IbeMsk::Full(inst.sk.cmsk.clone()),
        k1: HardwiredKey::Full(inst.sk.k1.clone()),
        coset: inst.pk.params.coset,
        id_len: inst.pk.params.id_len,
        m0: m0.clone(),
        m1: m1.clone(),
    };
    let zero = BitString::zeros(inst.pk.ident_len());
    let twin = CpFeKeyProgram {
        cmsk: ibe_punc(&inst.sk.cmsk, &zero)?,
        k1: HardwiredKey::zero_twin(&inst.sk.k1)?,
        ..program.clone()
    };
    obfuscate_program(Program::CpFeKey(program), &[Program::CpFeKey(twin)], inst.pk.params.mode)
}

/// Asks `pmsk` for the key of `id || f`; `None` is ⊥.
pub fn cp_fe_pmsk_keygen(pmsk: &ObfProgram, id: &BitString, f: &FunctionDesc) -> Result<Option<CpFeClassicalKey>> {
    run_typed(pmsk, &id.concat(&f.identity()))
}

/// What the two-copy attack recovers: one vector from each coset in both
/// bases, enough to answer any challenge string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalDecryptor {
    pub id: BitString,
    pub ck: PkeSecretKey,
    pub primal: Vec<BitVector>,
    pub dual: Vec<BitVector>,
}

impl ClassicalDecryptor {
    /// Measures one copy in the computational basis and the other in the
    /// Hadamard basis.
    pub fn extract<R: RngCore + ?Sized>(a: &QuantumKey, b: &QuantumKey, rng: &mut R) -> Result<Self> {
        if a.id != b.id {
            return Err(Error::Parameter("the two copies carry different identities".into()));
        }
        Ok(Self {
            id: a.id.clone(),
            ck: a.ck.clone(),
            primal: a.registers.measure(Basis::Computational, rng),
            dual: b.registers.measure(Basis::Hadamard, rng),
        })
    }

    /// A classical FE key already carries its cosets, so `s` and `s'` serve.
    pub fn from_fe_key(fk: &CpFeClassicalKey) -> Self {
        Self {
            id: fk.id.clone(),
            ck: fk.ck.clone(),
            primal: fk.triples.iter().map(|t| t.s).collect(),
            dual: fk.triples.iter().map(|t| t.s_prime).collect(),
        }
    }

    pub fn vectors_for(&self, r: &BitString) -> Vec<BitVector> {
        (0..self.primal.len()).map(|i| if r.get(i) { self.dual[i] } else { self.primal[i] }).collect()
    }

    pub fn decrypt(&self, ct: &CpCiphertext) -> Result<Option<Plaintext>> {
        if ct.r.len() != self.primal.len() {
            return Ok(None);
        }
        open(&self.ck, &run_ct(ct, &self.id, self.vectors_for(&ct.r))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{standard_family, Circuit};
    use crate::gf2::canonical;
    use crate::statevec::STATE_TOL;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn pke(seed: u64) -> (CpInstance, ChaCha20Rng) {
        let mut r = rng(seed);
        (cp_pke_setup(CpParams::default(), &mut r).unwrap(), r)
    }

    fn honest_vectors(triples: &[CosetTriple], r: &BitString) -> Vec<BitVector> {
        triples
            .iter()
            .enumerate()
            .map(|(i, t)| if r.get(i) { canonical(&t.space.dual(), &t.s_prime).unwrap() } else { canonical(&t.space, &t.s).unwrap() })
            .collect()
    }

    fn mem(inst: &CpInstance, id: &BitString, u: Vec<BitVector>, r: &BitString) -> Option<bool> {
        run_typed(&inst.pk.opmem, &MemInput { id: id.clone(), u, r: r.clone() }).unwrap()
    }

    #[test]
    fn opmem_accepts_canonical_members_and_rejects_a_moved_vector() {
        let (inst, mut r) = pke(1);
        for _ in 0..10 {
            let id = BitString::random(32, &mut r);
            let triples = inst.triples(&id).unwrap();
            let ch = BitString::random(3, &mut r);
            let mut u = honest_vectors(&triples, &ch);
            assert_eq!(mem(&inst, &id, u.clone(), &ch), Some(true));
            // Move u_0 by a vector outside the relevant subspace.
            let space = if ch.get(0) { triples[0].space.dual() } else { triples[0].space.clone() };
            let off = (1..16).map(|x| BitVector::from_index(4, x).unwrap()).find(|v| !space.contains(v).unwrap()).unwrap();
            u[0] = u[0].xor(&off).unwrap();
            assert_eq!(mem(&inst, &id, u, &ch), Some(false));
        }
    }

    #[test]
    fn opmem_with_a_flipped_challenge_bit_matches_enumeration() {
        let (inst, mut r) = pke(2);
        let id = BitString::random(32, &mut r);
        let triples = inst.triples(&id).unwrap();
        let ch = BitString::from_u64(0b010, 3);
        let u = honest_vectors(&triples, &ch);
        for i in 0..3 {
            let mut bits = ch.bits();
            bits[i] = !bits[i];
            let flipped = BitString::from_bits(&bits);
            let expect = triples[i].accepts(bits[i], &u[i]).unwrap();
            assert_eq!(mem(&inst, &id, u.clone(), &flipped), Some(expect));
        }
    }

    #[test]
    fn opmem_rejects_malformed_shapes() {
        let (inst, mut r) = pke(3);
        let id = BitString::random(32, &mut r);
        let ch = BitString::zeros(3);
        let u = honest_vectors(&inst.triples(&id).unwrap(), &ch);
        assert_eq!(mem(&inst, &id, u[..2].to_vec(), &ch), Some(false));
        assert_eq!(mem(&inst, &BitString::zeros(31), u.clone(), &ch), Some(false));
        assert_eq!(mem(&inst, &id, u, &BitString::zeros(4)), Some(false));
    }

    #[test]
    fn qkeygen_ids_are_distinct_and_states_verify() {
        let (inst, mut r) = pke(4);
        let mut ids = HashSet::new();
        for _ in 0..100 {
            let key = cp_pke_qkeygen(&inst, &mut r).unwrap();
            assert!(ids.insert(key.id.clone()));
        }
        let key = cp_pke_qkeygen(&inst, &mut r).unwrap();
        let u = key.registers.measure(Basis::Computational, &mut r);
        assert_eq!(mem(&inst, &key.id, u, &BitString::zeros(3)), Some(true));
        let again = cp_pke_qkeygen_with_id(&inst, &key.id).unwrap();
        assert_eq!(again, key);
    }

    #[test]
    fn pke_round_trips_and_leaves_the_key_alone() {
        let (inst, mut r) = pke(5);
        for i in 0..20u8 {
            let key = cp_pke_qkeygen(&inst, &mut r).unwrap();
            let m = Plaintext::Message(vec![i, 0xa5]);
            let ct = cp_pke_enc(&inst.pk, &m, &mut r).unwrap();
            let (got, next) = cp_pke_dec(&key, &ct, &mut r).unwrap();
            assert_eq!(got, Some(m.clone()));
            assert!(next.registers.is_product());
            assert!(key.registers.max_abs_diff(&next.registers).unwrap() <= STATE_TOL);
            let (again, _) = cp_pke_dec(&next, &ct, &mut r).unwrap();
            assert_eq!(again, Some(m));
        }
    }

    #[test]
    fn zero_challenge_needs_no_hadamards() {
        let (inst, mut r) = pke(6);
        let key = cp_pke_qkeygen(&inst, &mut r).unwrap();
        let mut ct = cp_pke_enc(&inst.pk, &Plaintext::Top, &mut r).unwrap();
        while ct.r != BitString::zeros(3) {
            ct = cp_pke_enc(&inst.pk, &Plaintext::Top, &mut r).unwrap();
        }
        assert_eq!(cp_pke_dec(&key, &ct, &mut r).unwrap().0, Some(Plaintext::Top));
    }

    #[test]
    fn keys_of_another_instance_get_bottom() {
        let (a, mut r) = pke(7);
        let (b, _) = pke(8);
        let key = cp_pke_qkeygen(&a, &mut r).unwrap();
        let ct = cp_pke_enc(&b.pk, &Plaintext::Message(vec![1]), &mut r).unwrap();
        let (got, next) = cp_pke_dec(&key, &ct, &mut r).unwrap();
        assert_eq!(got, None);
        assert!(key.registers.max_abs_diff(&next.registers).unwrap() <= STATE_TOL);
    }

    #[test]
    fn wrong_vectors_get_bottom_from_pct() {
        let (inst, mut r) = pke(9);
        let key = cp_pke_qkeygen(&inst, &mut r).unwrap();
        let ct = cp_pke_enc(&inst.pk, &Plaintext::Message(vec![2]), &mut r).unwrap();
        let junk = vec![BitVector::zero(4); 3];
        let triples = inst.triples(&key.id).unwrap();
        let honest = honest_vectors(&triples, &ct.r);
        let accept = mem(&inst, &key.id, junk.clone(), &ct.r) == Some(true);
        let out = decode_output::<PkeCiphertext>(&run_ct(&ct, &key.id, junk).unwrap()).unwrap();
        assert_eq!(out.is_some(), accept);
        let inner = decode_output::<PkeCiphertext>(&run_ct(&ct, &key.id, honest).unwrap()).unwrap().unwrap();
        assert_eq!(ibe_dec(&key.ck, &inner).unwrap(), Plaintext::Message(vec![2]));
    }

    #[test]
    fn transparent_and_sealed_modes_agree() {
        let mut outs = Vec::new();
        for mode in [ObfMode::Transparent, ObfMode::Sealed] {
            let mut r = rng(10);
            let params = CpParams { mode, ..CpParams::default() };
            let inst = cp_pke_setup(params, &mut r).unwrap();
            let key = cp_pke_qkeygen(&inst, &mut r).unwrap();
            let ct = cp_pke_enc(&inst.pk, &Plaintext::Message(vec![3]), &mut r).unwrap();
            outs.push(run_ct(&ct, &key.id, honest_vectors(&inst.triples(&key.id).unwrap(), &ct.r)).unwrap());
        }
        assert_eq!(outs[0], outs[1]);
    }

    #[test]
    fn a_disturbed_key_is_measured_jointly() {
        let (inst, mut r) = pke(11);
        let mut key = cp_pke_qkeygen(&inst, &mut r).unwrap();
        // Register 0 spread over all of F_2^4: PCt accepts only part of it.
        if let KeyRegisters::Product(regs) = &mut key.registers {
            regs[0] = hadamard_all(&StateVector::basis(&BitVector::zero(4)));
        }
        let mut ct = cp_pke_enc(&inst.pk, &Plaintext::Message(vec![4]), &mut r).unwrap();
        while ct.r.get(0) {
            ct = cp_pke_enc(&inst.pk, &Plaintext::Message(vec![4]), &mut r).unwrap();
        }
        let (_, next) = cp_pke_dec(&key, &ct, &mut r).unwrap();
        assert!(!next.registers.is_product());
        assert!((next.registers.to_joint(14).unwrap().norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn fe_parity_of_1011_is_one() {
        let mut r = rng(12);
        let inst = cp_fe_setup(CpParams::default(), &mut r).unwrap();
        let f = FunctionDesc::new(Circuit::parity(4), inst.pk.params.q).unwrap();
        let key = cp_fe_qkeygen(&cp_fe_keygen(&inst, &f, &mut r).unwrap(), 14).unwrap();
        let ct = cp_fe_enc(&inst.pk, &BitString::from_u64(0b1011, 4), &mut r).unwrap();
        let (got, next) = cp_fe_dec(&key, &ct, &mut r).unwrap();
        assert_eq!(got, Some(BitString::from_u64(1, 1)));
        assert!(key.registers.max_abs_diff(&next.registers).unwrap() <= STATE_TOL);
    }

    #[test]
    fn fe_pmsk_matches_keygen_on_non_differentiating_functions() {
        let mut r = rng(13);
        let inst = cp_fe_setup(CpParams::default(), &mut r).unwrap();
        let (m0, m1) = (BitString::from_u64(0b1100, 4), BitString::from_u64(0b1010, 4));
        let pmsk = cp_fe_pmsk(&inst, &m0, &m1).unwrap();
        let ct = cp_fe_enc(&inst.pk, &m1, &mut r).unwrap();
        for (name, f) in standard_family(4, inst.pk.params.q).unwrap() {
            let id = BitString::random(32, &mut r);
            let got = cp_fe_pmsk_keygen(&pmsk, &id, &f).unwrap();
            if f.eval(&m0).unwrap() != f.eval(&m1).unwrap() {
                assert!(got.is_none(), "{name}");
                continue;
            }
            let fk = got.unwrap();
            assert_eq!(fk, cp_fe_keygen_with_id(&inst, &id, &f).unwrap(), "{name}");
            let key = cp_fe_qkeygen(&fk, 14).unwrap();
            assert_eq!(cp_fe_dec(&key, &ct, &mut r).unwrap().0, Some(f.eval(&m1).unwrap()), "{name}");
        }
    }

    #[test]
    fn fe_keys_for_the_same_function_get_fresh_identities() {
        let mut r = rng(14);
        let inst = cp_fe_setup(CpParams::default(), &mut r).unwrap();
        let f = FunctionDesc::new(Circuit::bit(4, 0), inst.pk.params.q).unwrap();
        let a = cp_fe_keygen(&inst, &f, &mut r).unwrap();
        let b = cp_fe_keygen(&inst, &f, &mut r).unwrap();
        assert_ne!(a.id, b.id);
        assert_eq!(a.id.len(), 32 + 8 * inst.pk.params.q);
    }

    #[test]
    fn two_copies_yield_a_classical_decryptor() {
        let (inst, mut r) = pke(15);
        let key = cp_pke_qkeygen(&inst, &mut r).unwrap();
        let thief = ClassicalDecryptor::extract(&key, &key.clone(), &mut r).unwrap();
        for i in 0..20u8 {
            let ct = cp_pke_enc(&inst.pk, &Plaintext::Message(vec![i]), &mut r).unwrap();
            assert_eq!(thief.decrypt(&ct).unwrap(), Some(Plaintext::Message(vec![i])));
        }
    }

    #[test]
    fn oversized_registers_are_a_resource_error() {
        let params = CpParams { qubit_cap: 3, ..CpParams::default() };
        let err = cp_pke_setup(params, &mut rng(16)).unwrap_err();
        assert!(err.is_resource());
    }
}
