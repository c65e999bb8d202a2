//! Obfuscation stand-ins. A program is a typed description interpreted by
//! [`run`]; the "obfuscated" form is a padded, integrity-tagged blob. Only
//! functionality and size are preserved: there is no hiding guarantee.
//!
//! Blob layout: `version u8 | mode u8 | kind u8 | declared_size u32 LE`, then
//! `declared_size` body bytes (`payload_len u32 LE | payload | zero padding`,
//! masked in sealed mode), then a 16-byte tag over everything before it.
//!
//! Program outputs are `[0]` for ⊥ and `[1] || value` otherwise, where the
//! value is the bincode encoding of the program's result type.

use std::fmt;
use std::sync::OnceLock;

use hmac::{Hmac, KeyInit, Mac};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::circuit::FunctionDesc;
use crate::copy_protect::{CpCtProgram, CpFeKeyProgram, MemProgram};
use crate::error::{Error, Result};
use crate::fe::{FeCtProgram, FeKeyProgram};
use crate::gf2::{canonical, BitVector, Subspace};
use crate::ibe::KeyGenProgram;
use crate::prf::{prf_puncture, GgmKey, PuncturedKey};
use crate::stream::ByteStream;

pub const BLOB_VERSION: u8 = 1;
pub const TAG_BYTES: usize = 16;
const HEADER_BYTES: usize = 7;
const LEN_PREFIX: usize = 4;
const BOTTOM: u8 = 0;
const VALUE: u8 = 1;

/// Fixed process-wide sealing key. Sealing is deterministic so equal inputs
/// give equal blobs; it hides nothing from anyone who reads this constant.
const SEAL_KEY: &[u8] = b"clonelab/obf/sealed/v1 fixed key";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObfMode {
    Transparent,
    Sealed,
}

impl ObfMode {
    fn code(self) -> u8 {
        match self {
            ObfMode::Transparent => 0,
            ObfMode::Sealed => 1,
        }
    }

    fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(ObfMode::Transparent),
            1 => Ok(ObfMode::Sealed),
            _ => Err(Error::Decode(format!("unknown obfuscation mode {c}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProgramKind {
    PMem,
    PCt,
    PKeyGen,
    PKey,
    CC,
    Custom,
}

impl ProgramKind {
    fn code(self) -> u8 {
        self as u8 + 1
    }

    fn from_code(c: u8) -> Result<Self> {
        use ProgramKind::*;
        [PMem, PCt, PKeyGen, PKey, CC, Custom]
            .into_iter()
            .find(|k| k.code() == c)
            .ok_or_else(|| Error::Decode(format!("unknown program kind {c}")))
    }
}

/// A PRF key as hardwired into a program: either the full key, or the key
/// punctured at one point together with the PRF value there. Both forms
/// compute the same function; the second is the wider one used for padding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum HardwiredKey {
    Full(GgmKey),
    Punctured { key: PuncturedKey, point: BitString, value: BitString },
}

impl HardwiredKey {
    pub fn input_len(&self) -> usize {
        match self {
            HardwiredKey::Full(k) => k.input_len(),
            HardwiredKey::Punctured { key, .. } => key.input_len(),
        }
    }

    pub fn eval(&self, x: &BitString) -> Result<BitString> {
        match self {
            HardwiredKey::Full(k) => k.eval(x),
            HardwiredKey::Punctured { point, value, .. } if point == x => Ok(value.clone()),
            HardwiredKey::Punctured { key, .. } => key.eval(x),
        }
    }

    pub fn punctured_twin(k: &GgmKey, point: &BitString) -> Result<Self> {
        Ok(HardwiredKey::Punctured {
            key: prf_puncture(k, std::slice::from_ref(point))?,
            point: point.clone(),
            value: k.eval(point)?,
        })
    }

    /// The twin punctured at the all-zero input.
    pub fn zero_twin(k: &GgmKey) -> Result<Self> {
        Self::punctured_twin(k, &BitString::zeros(k.input_len()))
    }
}

/// What a compute-and-compare program computes before comparing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CcFunction {
    /// Input: a bincode `BitString`; output: the bincode of `f(x)`.
    Circuit(FunctionDesc),
    /// Input: bincode `Vec<BitVector>`; output: the bincode of the canonical
    /// elements `Can_{A_i}(x_i)`. Membership in `A_i + s_i` is exactly
    /// equality with the canonical elements of the `s_i`.
    CanonicalCoset(Vec<Subspace>),
}

impl CcFunction {
    fn compute(&self, input: &[u8]) -> Option<Vec<u8>> {
        match self {
            CcFunction::Circuit(f) => {
                let x: BitString = bincode::deserialize(input).ok()?;
                Some(bincode::serialize(&f.eval(&x).ok()?).expect("serializable"))
            }
            CcFunction::CanonicalCoset(spaces) => {
                let xs: Vec<BitVector> = bincode::deserialize(input).ok()?;
                Some(bincode::serialize(&canonical_all(spaces, &xs)?).expect("serializable"))
            }
        }
    }

    /// Target `y` such that the program fires on inputs whose image is `value`.
    pub fn circuit_target(value: &BitString) -> Vec<u8> {
        bincode::serialize(value).expect("serializable")
    }

    /// Target firing exactly on vectors in the cosets `A_i + offsets_i`.
    pub fn coset_target(spaces: &[Subspace], offsets: &[BitVector]) -> Result<Vec<u8>> {
        let c = canonical_all(spaces, offsets).ok_or_else(|| Error::Parameter("offsets do not match the spaces".into()))?;
        Ok(bincode::serialize(&c).expect("serializable"))
    }
}

fn canonical_all(spaces: &[Subspace], xs: &[BitVector]) -> Option<Vec<BitVector>> {
    if xs.len() != spaces.len() {
        return None;
    }
    spaces.iter().zip(xs).map(|(a, x)| canonical(a, x).ok()).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CcProgram {
    pub f: CcFunction,
    #[serde(with = "crate::hexser")]
    pub y: Vec<u8>,
    #[serde(with = "crate::hexser")]
    pub z: Vec<u8>,
}

/// Byte lengths that the compute-and-compare simulator may depend on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CcSizes {
    pub f: usize,
    pub y: usize,
    pub z: usize,
}

/// The interpreted instruction set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Program {
    Mem(MemProgram),
    CpCt(CpCtProgram),
    FeCt(FeCtProgram),
    KeyGen(KeyGenProgram),
    FeKey(FeKeyProgram),
    CpFeKey(CpFeKeyProgram),
    Cc(CcProgram),
    /// Simulated compute-and-compare program: ⊥ everywhere.
    CcNull(CcSizes),
    Identity,
}

impl Program {
    pub fn kind(&self) -> ProgramKind {
        match self {
            Program::Mem(_) => ProgramKind::PMem,
            Program::CpCt(_) | Program::FeCt(_) => ProgramKind::PCt,
            Program::KeyGen(_) => ProgramKind::PKeyGen,
            Program::FeKey(_) | Program::CpFeKey(_) => ProgramKind::PKey,
            Program::Cc(_) | Program::CcNull(_) => ProgramKind::CC,
            Program::Identity => ProgramKind::Custom,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        bincode::serialize(self).expect("programs serialize")
    }

    /// Evaluates on an encoded input, producing an encoded output.
    pub fn interpret(&self, input: &[u8]) -> Result<Vec<u8>> {
        match self {
            Program::Identity => Ok(std::iter::once(VALUE).chain(input.iter().copied()).collect()),
            Program::Mem(p) => Ok(encode_output(&Some(p.eval(&decode_input(input)?)?))),
            Program::CpCt(p) => Ok(encode_output(&p.eval(&decode_input(input)?)?)),
            Program::FeCt(p) => Ok(encode_output(&p.eval(&decode_input(input)?)?)),
            Program::KeyGen(p) => Ok(encode_output(&p.eval(&decode_input(input)?)?)),
            Program::FeKey(p) => Ok(encode_output(&p.eval(&decode_input(input)?)?)),
            Program::CpFeKey(p) => Ok(encode_output(&p.eval(&decode_input(input)?)?)),
            Program::Cc(p) => {
                let x: Vec<u8> = decode_input(input)?;
                let fire = p.f.compute(&x).is_some_and(|fx| fx == p.y);
                Ok(encode_output(&fire.then(|| p.z.clone())))
            }
            Program::CcNull(_) => Ok(vec![BOTTOM]),
        }
    }
}

fn decode_input<T: DeserializeOwned>(input: &[u8]) -> Result<T> {
    bincode::deserialize(input).map_err(|e| Error::Decode(format!("program input: {e}")))
}

fn encode_output<T: Serialize>(v: &Option<T>) -> Vec<u8> {
    match v {
        None => vec![BOTTOM],
        Some(v) => {
            let mut out = vec![VALUE];
            out.extend(bincode::serialize(v).expect("outputs serialize"));
            out
        }
    }
}

pub fn decode_output<T: DeserializeOwned>(out: &[u8]) -> Result<Option<T>> {
    match out.split_first() {
        Some((&BOTTOM, [])) => Ok(None),
        Some((&VALUE, rest)) => bincode::deserialize(rest).map(Some).map_err(|e| Error::Decode(format!("program output: {e}"))),
        _ => Err(Error::Decode("malformed program output".into())),
    }
}

/// A program description with its padded size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramDesc {
    pub kind: ProgramKind,
    pub payload: Vec<u8>,
    pub declared_size: usize,
}

impl ProgramDesc {
    pub fn new(program: &Program, declared_size: usize) -> Result<Self> {
        let payload = program.encode();
        if payload.len() + LEN_PREFIX > declared_size {
            return Err(Error::Oversize { size: payload.len() + LEN_PREFIX, max: declared_size });
        }
        Ok(Self { kind: program.kind(), payload, declared_size })
    }

    /// Padded to the largest of `program` and its `family` (same kind).
    pub fn padded(program: &Program, family: &[Program]) -> Result<Self> {
        if let Some(other) = family.iter().find(|p| p.kind() != program.kind()) {
            return Err(Error::Parameter(format!("{:?} padded against a {:?} program", program.kind(), other.kind())));
        }
        let widest = family.iter().chain(std::iter::once(program)).map(|p| p.encode().len()).max().expect("nonempty");
        Self::new(program, widest + LEN_PREFIX)
    }

    pub fn decode(&self) -> Result<Program> {
        let p: Program =
            bincode::deserialize(&self.payload).map_err(|e| Error::Decode(format!("program payload: {e}")))?;
        if p.kind() != self.kind {
            return Err(Error::Decode(format!("payload is a {:?} program, declared {:?}", p.kind(), self.kind)));
        }
        Ok(p)
    }
}

/// An obfuscated program: the blob plus a lazily decoded interpreter form.
#[derive(Clone)]
pub struct ObfProgram {
    bytes: Vec<u8>,
    decoded: OnceLock<Box<Program>>,
}

impl PartialEq for ObfProgram {
    fn eq(&self, other: &Self) -> bool {
        self.bytes == other.bytes
    }
}

impl Eq for ObfProgram {}

impl fmt::Debug for ObfProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ObfProgram({:?}, {:?}, {} bytes)", self.mode(), self.kind(), self.bytes.len())
    }
}

impl Serialize for ObfProgram {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        crate::hexser::serialize(&self.bytes, s)
    }
}

impl<'de> Deserialize<'de> for ObfProgram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        ObfProgram::from_bytes(crate::hexser::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

fn keystream(header: &[u8], len: usize) -> ByteStream {
    let mut seed = SEAL_KEY.to_vec();
    seed.extend_from_slice(header);
    ByteStream::expand(&seed, len)
}

fn tag(mode: ObfMode, covered: &[u8]) -> Vec<u8> {
    match mode {
        ObfMode::Transparent => {
            Sha256::new().chain_update(b"clonelab/obf/checksum").chain_update(covered).finalize()[..TAG_BYTES].to_vec()
        }
        ObfMode::Sealed => {
            let mut mac = Hmac::<Sha256>::new_from_slice(SEAL_KEY).expect("any key length");
            mac.update(covered);
            mac.finalize().into_bytes()[..TAG_BYTES].to_vec()
        }
    }
}

pub fn obfuscate(desc: &ProgramDesc, mode: ObfMode) -> Result<ObfProgram> {
    let program = desc.decode()?;
    if desc.payload.len() + LEN_PREFIX > desc.declared_size || desc.declared_size > u32::MAX as usize {
        return Err(Error::Oversize { size: desc.payload.len() + LEN_PREFIX, max: desc.declared_size });
    }
    let mut header = vec![BLOB_VERSION, mode.code(), desc.kind.code()];
    header.extend((desc.declared_size as u32).to_le_bytes());
    let mut body = Vec::with_capacity(desc.declared_size);
    body.extend((desc.payload.len() as u32).to_le_bytes());
    body.extend_from_slice(&desc.payload);
    body.resize(desc.declared_size, 0);
    if mode == ObfMode::Sealed {
        let mut ks = keystream(&header, body.len());
        for (b, k) in body.iter_mut().zip(ks.next_bytes(desc.declared_size).expect("sized")) {
            *b ^= k;
        }
    }
    let mut bytes = header;
    bytes.extend(body);
    let t = tag(mode, &bytes);
    bytes.extend(t);
    let decoded = OnceLock::new();
    let _ = decoded.set(Box::new(program));
    Ok(ObfProgram { bytes, decoded })
}

/// Pads `program` against its `family` and obfuscates it.
pub fn obfuscate_program(program: Program, family: &[Program], mode: ObfMode) -> Result<ObfProgram> {
    obfuscate(&ProgramDesc::padded(&program, family)?, mode)
}

impl ObfProgram {
    /// Parses the header only; the tag is checked on first [`run`].
    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self> {
        if bytes.len() < HEADER_BYTES + TAG_BYTES {
            return Err(Error::Decode("blob shorter than header and tag".into()));
        }
        if bytes[0] != BLOB_VERSION {
            return Err(Error::Decode(format!("unsupported blob version {}", bytes[0])));
        }
        ObfMode::from_code(bytes[1])?;
        ProgramKind::from_code(bytes[2])?;
        let declared = u32::from_le_bytes(bytes[3..7].try_into().expect("4 bytes")) as usize;
        if bytes.len() != HEADER_BYTES + declared + TAG_BYTES {
            return Err(Error::Decode(format!("blob of {} bytes declares a {declared}-byte body", bytes.len())));
        }
        Ok(Self { bytes, decoded: OnceLock::new() })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.bytes.clone()
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn mode(&self) -> ObfMode {
        ObfMode::from_code(self.bytes[1]).expect("checked on construction")
    }

    pub fn kind(&self) -> ProgramKind {
        ProgramKind::from_code(self.bytes[2]).expect("checked on construction")
    }

    pub fn declared_size(&self) -> usize {
        self.bytes.len() - HEADER_BYTES - TAG_BYTES
    }

    /// Verifies the tag and recovers the description.
    pub fn desc(&self) -> Result<ProgramDesc> {
        let (covered, t) = self.bytes.split_at(self.bytes.len() - TAG_BYTES);
        if tag(self.mode(), covered) != t {
            return Err(Error::Integrity);
        }
        let (header, body) = covered.split_at(HEADER_BYTES);
        let mut body = body.to_vec();
        if self.mode() == ObfMode::Sealed {
            let mut ks = keystream(header, body.len());
            let len = body.len();
            for (b, k) in body.iter_mut().zip(ks.next_bytes(len).expect("sized")) {
                *b ^= k;
            }
        }
        let payload_len = u32::from_le_bytes(body[..LEN_PREFIX].try_into().map_err(|_| Error::Integrity)?) as usize;
        if LEN_PREFIX + payload_len > body.len() || body[LEN_PREFIX + payload_len..].iter().any(|&b| b != 0) {
            return Err(Error::Decode("bad payload framing".into()));
        }
        Ok(ProgramDesc {
            kind: self.kind(),
            payload: body[LEN_PREFIX..LEN_PREFIX + payload_len].to_vec(),
            declared_size: body.len(),
        })
    }

    pub fn program(&self) -> Result<&Program> {
        if let Some(p) = self.decoded.get() {
            return Ok(p);
        }
        let p = self.desc()?.decode()?;
        let _ = self.decoded.set(Box::new(p));
        Ok(self.decoded.get().expect("just set"))
    }
}

pub fn run(op: &ObfProgram, input: &[u8]) -> Result<Vec<u8>> {
    op.program()?.interpret(input)
}

/// [`run`] with bincode-encoded input and output; `None` is ⊥.
pub fn run_typed<I: Serialize + ?Sized, O: DeserializeOwned>(op: &ObfProgram, input: &I) -> Result<Option<O>> {
    decode_output(&run(op, &bincode::serialize(input).expect("inputs serialize"))?)
}

/// Declared size shared by every compute-and-compare program with these sizes.
pub fn cc_declared_size(sizes: CcSizes) -> usize {
    // enum tag, f, then y and z each with a u64 length prefix.
    LEN_PREFIX + 4 + sizes.f + 8 + sizes.y + 8 + sizes.z
}

pub fn cc_sizes(f: &CcFunction, y: &[u8], z: &[u8]) -> CcSizes {
    CcSizes { f: bincode::serialized_size(f).expect("serializable") as usize, y: y.len(), z: z.len() }
}

/// Releases `z` exactly on inputs `x` with `f(x) = y`. Always sealed.
pub fn cc_obfuscate(f: CcFunction, y: Vec<u8>, z: Vec<u8>) -> Result<ObfProgram> {
    let sizes = cc_sizes(&f, &y, &z);
    obfuscate(&ProgramDesc::new(&Program::Cc(CcProgram { f, y, z }), cc_declared_size(sizes))?, ObfMode::Sealed)
}

/// ⊥ everywhere; depends only on `sizes`.
pub fn cc_simulate(sizes: CcSizes) -> Result<ObfProgram> {
    obfuscate(&ProgramDesc::new(&Program::CcNull(sizes), cc_declared_size(sizes))?, ObfMode::Sealed)
}
