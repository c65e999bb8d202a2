//! Puncturable functional encryption over the IBE: a function's canonical
//! encoding is its identity, and a ciphertext is an obfuscated program that
//! encrypts `f(m)` under identity `f` with PRF-derived coins.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::circuit::FunctionDesc;
use crate::error::{Error, Result};
use crate::ibe::{ibe_dec, ibe_enc_with_coins, ibe_keygen, ibe_punc, ibe_setup, IbeMsk, ENC_COIN_BITS};
use crate::obf::{obfuscate_program, run_typed, HardwiredKey, ObfMode, ObfProgram, Program};
use crate::pke::{PkeCiphertext, PkeSecretKey, Plaintext};
use crate::prf::{prf_keygen, GgmKey, DEFAULT_SECURITY_BYTES};

/// Bit strings travel through the PKE as `len u16 LE || packed bits`.
pub fn bits_plaintext(b: &BitString) -> Plaintext {
    let mut bytes = (b.len() as u16).to_le_bytes().to_vec();
    bytes.extend_from_slice(b.as_bytes());
    Plaintext::Message(bytes)
}

pub fn plaintext_bits(p: &Plaintext) -> Result<BitString> {
    match p {
        Plaintext::Message(bytes) if bytes.len() >= 2 => {
            let len = u16::from_le_bytes([bytes[0], bytes[1]]) as usize;
            BitString::from_bytes(&bytes[2..], len)
        }
        Plaintext::Message(_) => Err(Error::Decode("plaintext too short for a bit string".into())),
        Plaintext::Top => Err(Error::Decode("the distinguished symbol carries no bits".into())),
    }
}

/// Parses `id` as a function and applies it to `m`; `None` if either step fails.
pub(crate) fn apply_identity(id: &BitString, m: &BitString) -> Option<BitString> {
    FunctionDesc::from_identity(id).ok()?.eval(m).ok()
}

/// `PCt` of the FE scheme: `f -> IBE.Enc(pk, f, f(m); F(K, f))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeCtProgram {
    pub m: BitString,
    pub pk: ObfProgram,
    pub key: HardwiredKey,
}

impl FeCtProgram {
    pub fn eval(&self, f: &BitString) -> Result<Option<PkeCiphertext>> {
        if f.len() != self.key.input_len() {
            return Ok(None);
        }
        let Some(a) = apply_identity(f, &self.m) else {
            return Ok(None);
        };
        let coins = self.key.eval(f)?;
        ibe_enc_with_coins(&self.pk, f, &bits_plaintext(&a), coins.as_bytes()).map(Some)
    }
}

/// `PKey` of the FE scheme: functional keys only for non-differentiating `f`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeKeyProgram {
    pub imsk: IbeMsk,
    pub m0: BitString,
    pub m1: BitString,
}

impl FeKeyProgram {
    pub fn eval(&self, f: &BitString) -> Result<Option<FeKey>> {
        if f.len() != self.imsk.id_len() {
            return Ok(None);
        }
        let Ok(desc) = FunctionDesc::from_identity(f) else {
            return Ok(None);
        };
        match (desc.eval(&self.m0), desc.eval(&self.m1)) {
            (Ok(a), Ok(b)) if a == b => {}
            _ => return Ok(None),
        }
        match ibe_keygen(&self.imsk, f) {
            Ok(sk) => Ok(Some(FeKey { sk, f: desc })),
            Err(Error::PuncturedPoint) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeKey {
    pub sk: PkeSecretKey,
    pub f: FunctionDesc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeMsk {
    Full(GgmKey),
    /// An obfuscated [`FeKeyProgram`].
    Punctured(ObfProgram),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FePublicKey {
    pub ibe: ObfProgram,
    /// Maximum circuit size in bytes; identities are `8 * q` bits.
    pub q: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeInstance {
    pub pk: FePublicKey,
    pub msk: GgmKey,
}

pub fn fe_setup<R: RngCore + ?Sized>(q: usize, mode: ObfMode, rng: &mut R) -> Result<FeInstance> {
    if q == 0 {
        return Err(Error::Parameter("circuit size bound must be positive".into()));
    }
    let ibe = ibe_setup(8 * q, mode, rng)?;
    Ok(FeInstance { pk: FePublicKey { ibe: ibe.pk, q }, msk: ibe.msk })
}

fn check_q(f: &FunctionDesc, q: usize) -> Result<()> {
    if f.max_bytes() != q {
        return Err(Error::Parameter(format!("function padded to {} bytes, instance expects {q}", f.max_bytes())));
    }
    Ok(())
}

/// `None` when a punctured key refuses `f`.
pub fn fe_keygen(msk: &FeMsk, f: &FunctionDesc) -> Result<Option<FeKey>> {
    match msk {
        FeMsk::Full(k) => {
            check_q(f, k.input_len() / 8)?;
            Ok(Some(FeKey { sk: ibe_keygen(&IbeMsk::Full(k.clone()), &f.identity())?, f: f.clone() }))
        }
        FeMsk::Punctured(op) => run_typed(op, &f.identity()),
    }
}

/// Obfuscated `PKey` for the pair `(m0, m1)`, padded against a copy whose
/// IBE key is punctured at the all-zero identity.
pub fn fe_punc(msk: &GgmKey, m0: &BitString, m1: &BitString, mode: ObfMode) -> Result<FeMsk> {
    if m0.len() != m1.len() {
        return Err(Error::Parameter("challenge messages differ in length".into()));
    }
    let program = FeKeyProgram { imsk: IbeMsk::Full(msk.clone()), m0: m0.clone(), m1: m1.clone() };
    let twin = FeKeyProgram { imsk: ibe_punc(msk, &BitString::zeros(msk.input_len()))?, ..program.clone() };
    Ok(FeMsk::Punctured(obfuscate_program(Program::FeKey(program), &[Program::FeKey(twin)], mode)?))
}

pub fn fe_enc<R: RngCore + ?Sized>(pk: &FePublicKey, m: &BitString, mode: ObfMode, rng: &mut R) -> Result<ObfProgram> {
    let key = prf_keygen(DEFAULT_SECURITY_BYTES, 8 * pk.q, ENC_COIN_BITS, rng)?;
    let program = FeCtProgram { m: m.clone(), pk: pk.ibe.clone(), key: HardwiredKey::Full(key.clone()) };
    let twin = FeCtProgram { key: HardwiredKey::zero_twin(&key)?, ..program.clone() };
    obfuscate_program(Program::FeCt(program), &[Program::FeCt(twin)], mode)
}

pub fn fe_dec(key: &FeKey, ct: &ObfProgram) -> Result<BitString> {
    let inner: PkeCiphertext = run_typed(ct, &key.f.identity())?
        .ok_or_else(|| Error::Protocol("ciphertext program returned ⊥".into()))?;
    plaintext_bits(&ibe_dec(&key.sk, &inner)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{standard_family, Circuit, DEFAULT_MAX_CIRCUIT_BYTES};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    const Q: usize = DEFAULT_MAX_CIRCUIT_BYTES;

    fn fd(c: Circuit) -> FunctionDesc {
        FunctionDesc::new(c, Q).unwrap()
    }

    #[test]
    fn bit_plaintexts_round_trip() {
        for len in [0, 1, 7, 8, 13] {
            let b = BitString::from_u64(0x1abc & ((1 << len) - 1), len);
            assert_eq!(plaintext_bits(&bits_plaintext(&b)).unwrap(), b);
        }
        assert!(plaintext_bits(&Plaintext::Top).is_err());
    }

    #[test]
    fn constant_zero_decrypts_to_zero_everywhere() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let inst = fe_setup(Q, ObfMode::Sealed, &mut rng).unwrap();
        let key = fe_keygen(&FeMsk::Full(inst.msk.clone()), &fd(Circuit::constant(4, false))).unwrap().unwrap();
        for m in 0..16 {
            let ct = fe_enc(&inst.pk, &BitString::from_u64(m, 4), ObfMode::Sealed, &mut rng).unwrap();
            assert_eq!(fe_dec(&key, &ct).unwrap(), BitString::from_u64(0, 1));
        }
    }

    #[test]
    fn parity_of_1011_is_one() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let inst = fe_setup(Q, ObfMode::Transparent, &mut rng).unwrap();
        let key = fe_keygen(&FeMsk::Full(inst.msk.clone()), &fd(Circuit::parity(4))).unwrap().unwrap();
        let ct = fe_enc(&inst.pk, &BitString::from_u64(0b1011, 4), ObfMode::Transparent, &mut rng).unwrap();
        assert_eq!(fe_dec(&key, &ct).unwrap(), BitString::from_u64(1, 1));
    }

    #[test]
    fn punctured_msk_refuses_exactly_the_differentiating_functions() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let inst = fe_setup(Q, ObfMode::Sealed, &mut rng).unwrap();
        let full = FeMsk::Full(inst.msk.clone());
        let (m0, m1) = (BitString::from_u64(0b0110, 4), BitString::from_u64(0b0101, 4));
        let pmsk = fe_punc(&inst.msk, &m0, &m1, ObfMode::Sealed).unwrap();
        let ct = fe_enc(&inst.pk, &m0, ObfMode::Sealed, &mut rng).unwrap();
        for (name, f) in standard_family(4, Q).unwrap() {
            let differ = f.eval(&m0).unwrap() != f.eval(&m1).unwrap();
            let got = fe_keygen(&pmsk, &f).unwrap();
            if differ {
                assert!(got.is_none(), "{name}");
            } else {
                let key = got.unwrap();
                assert_eq!(Some(key.clone()), fe_keygen(&full, &f).unwrap(), "{name}");
                assert_eq!(fe_dec(&key, &ct).unwrap(), f.eval(&m0).unwrap(), "{name}");
            }
        }
    }

    #[test]
    fn ciphertext_twin_is_functionally_identical() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let inst = fe_setup(Q, ObfMode::Sealed, &mut rng).unwrap();
        let key = prf_keygen(DEFAULT_SECURITY_BYTES, 8 * Q, ENC_COIN_BITS, &mut rng).unwrap();
        let m = BitString::from_u64(0b1001, 4);
        let f = fd(Circuit::xor(4, 0, 3)).identity();
        let full = FeCtProgram { m: m.clone(), pk: inst.pk.ibe.clone(), key: HardwiredKey::Full(key.clone()) };
        let twin = FeCtProgram { key: HardwiredKey::punctured_twin(&key, &f).unwrap(), ..full.clone() };
        assert_eq!(full.eval(&f).unwrap(), twin.eval(&f).unwrap());
        assert!(full.eval(&f).unwrap().is_some());
        assert_eq!(full.eval(&BitString::zeros(8 * Q)).unwrap(), None);
    }

    #[test]
    fn oversize_and_mismatched_functions_are_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let inst = fe_setup(16, ObfMode::Sealed, &mut rng).unwrap();
        assert!(fe_keygen(&FeMsk::Full(inst.msk.clone()), &fd(Circuit::parity(4))).is_err());
        assert!(fe_setup(0, ObfMode::Sealed, &mut rng).is_err());
    }
}
