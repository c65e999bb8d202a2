//! Identity-based encryption with a puncturable master key: a PRF key spins
//! up one PKE key pair per identity, and the public key is an obfuscated
//! program mapping identities to PKE public keys.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::obf::{obfuscate_program, run_typed, HardwiredKey, ObfMode, ObfProgram, Program};
use crate::pke::{pke_dec, pke_enc, pke_keygen, PkeCiphertext, PkePublicKey, PkeSecretKey, Plaintext, ENC_COIN_BYTES};
use crate::prf::{prf_keygen, prf_puncture, GgmKey, PuncturedKey, DEFAULT_SECURITY_BYTES};

/// PRF output length feeding `pke_keygen`.
pub const KEYGEN_COIN_BITS: usize = 8 * crate::pke::KEYGEN_COIN_BYTES;
/// PRF output length feeding `pke_enc`.
pub const ENC_COIN_BITS: usize = 8 * ENC_COIN_BYTES;

const MSK_FULL: u8 = 1;
const MSK_PUNCTURED: u8 = 2;

/// `PKeyGen`: identity to PKE public key.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyGenProgram {
    pub key: HardwiredKey,
}

impl KeyGenProgram {
    pub fn eval(&self, id: &BitString) -> Result<Option<PkePublicKey>> {
        if id.len() != self.key.input_len() {
            return Ok(None);
        }
        Ok(Some(pke_keygen(self.key.eval(id)?.as_bytes())?.0))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IbeMsk {
    Full(GgmKey),
    Punctured(PuncturedKey),
}

impl IbeMsk {
    pub fn id_len(&self) -> usize {
        match self {
            IbeMsk::Full(k) => k.input_len(),
            IbeMsk::Punctured(k) => k.input_len(),
        }
    }

    fn coins(&self, id: &BitString) -> Result<BitString> {
        match self {
            IbeMsk::Full(k) => k.eval(id),
            IbeMsk::Punctured(k) => k.eval(id),
        }
    }

    /// Tag byte, then the key's own binary format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let (tag, body) = match self {
            IbeMsk::Full(k) => (MSK_FULL, k.to_bytes()),
            IbeMsk::Punctured(k) => (MSK_PUNCTURED, k.to_bytes()),
        };
        std::iter::once(tag).chain(body).collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        match bytes.split_first() {
            Some((&MSK_FULL, rest)) => Ok(IbeMsk::Full(GgmKey::from_bytes(rest)?)),
            Some((&MSK_PUNCTURED, rest)) => Ok(IbeMsk::Punctured(PuncturedKey::from_bytes(rest)?)),
            _ => Err(Error::Decode("unknown master key tag".into())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IbeInstance {
    pub pk: ObfProgram,
    pub msk: GgmKey,
    pub id_len: usize,
}

/// Obfuscated `PKeyGen_K`, padded to the size of its punctured twin.
pub fn ibe_pk_program(msk: &GgmKey, mode: ObfMode) -> Result<ObfProgram> {
    let twin = KeyGenProgram { key: HardwiredKey::zero_twin(msk)? };
    obfuscate_program(Program::KeyGen(KeyGenProgram { key: HardwiredKey::Full(msk.clone()) }), &[Program::KeyGen(twin)], mode)
}

pub fn ibe_setup<R: RngCore + ?Sized>(id_len: usize, mode: ObfMode, rng: &mut R) -> Result<IbeInstance> {
    if id_len == 0 {
        return Err(Error::Parameter("identity length must be positive".into()));
    }
    let msk = prf_keygen(DEFAULT_SECURITY_BYTES, id_len, KEYGEN_COIN_BITS, rng)?;
    Ok(IbeInstance { pk: ibe_pk_program(&msk, mode)?, msk, id_len })
}

/// Deterministic; fails with [`Error::PuncturedPoint`] at a punctured identity.
pub fn ibe_keygen(msk: &IbeMsk, id: &BitString) -> Result<PkeSecretKey> {
    Ok(pke_keygen(msk.coins(id)?.as_bytes())?.1)
}

pub fn ibe_punc(msk: &GgmKey, id: &BitString) -> Result<IbeMsk> {
    Ok(IbeMsk::Punctured(prf_puncture(msk, std::slice::from_ref(id))?))
}

/// Runs the public-key program on `id`.
pub fn ibe_public_key(pk: &ObfProgram, id: &BitString) -> Result<PkePublicKey> {
    run_typed::<_, PkePublicKey>(pk, id)?
        .ok_or_else(|| Error::Parameter(format!("the public key rejects a {}-bit identity", id.len())))
}

pub fn ibe_enc_with_coins(pk: &ObfProgram, id: &BitString, m: &Plaintext, coins: &[u8]) -> Result<PkeCiphertext> {
    pke_enc(&ibe_public_key(pk, id)?, m, coins)
}

pub fn ibe_enc<R: RngCore + ?Sized>(pk: &ObfProgram, id: &BitString, m: &Plaintext, rng: &mut R) -> Result<PkeCiphertext> {
    let mut coins = [0u8; ENC_COIN_BYTES];
    rng.fill_bytes(&mut coins);
    ibe_enc_with_coins(pk, id, m, &coins)
}

/// [`Error::Integrity`] when `sk` belongs to another identity.
pub fn ibe_dec(sk: &PkeSecretKey, ct: &PkeCiphertext) -> Result<Plaintext> {
    pke_dec(sk, ct)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn setup(id_len: usize, mode: ObfMode, seed: u64) -> (IbeInstance, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (ibe_setup(id_len, mode, &mut rng).unwrap(), rng)
    }

    #[test]
    fn public_key_program_matches_direct_keygen() {
        let (inst, mut rng) = setup(16, ObfMode::Sealed, 1);
        for _ in 0..20 {
            let id = BitString::random(16, &mut rng);
            let direct = pke_keygen(inst.msk.eval(&id).unwrap().as_bytes()).unwrap().0;
            assert_eq!(ibe_public_key(&inst.pk, &id).unwrap(), direct);
        }
    }

    #[test]
    fn setup_is_deterministic_and_rejects_empty_ids() {
        assert_eq!(setup(8, ObfMode::Sealed, 2).0, setup(8, ObfMode::Sealed, 2).0);
        assert!(ibe_setup(0, ObfMode::Sealed, &mut ChaCha20Rng::seed_from_u64(0)).is_err());
    }

    #[test]
    fn round_trips_including_top() {
        let (inst, mut rng) = setup(12, ObfMode::Transparent, 3);
        let msk = IbeMsk::Full(inst.msk.clone());
        for i in 0..50u8 {
            let id = BitString::random(12, &mut rng);
            let m = if i % 10 == 0 { Plaintext::Top } else { Plaintext::Message(vec![i; i as usize % 7]) };
            let ct = ibe_enc(&inst.pk, &id, &m, &mut rng).unwrap();
            assert_eq!(ibe_dec(&ibe_keygen(&msk, &id).unwrap(), &ct).unwrap(), m);
        }
    }

    #[test]
    fn wrong_identity_fails_authentication() {
        let (inst, mut rng) = setup(12, ObfMode::Sealed, 4);
        let msk = IbeMsk::Full(inst.msk.clone());
        for _ in 0..50 {
            let (id, other) = (BitString::random(12, &mut rng), BitString::random(12, &mut rng));
            if id == other {
                continue;
            }
            let ct = ibe_enc(&inst.pk, &id, &Plaintext::Message(b"x".to_vec()), &mut rng).unwrap();
            assert!(matches!(ibe_dec(&ibe_keygen(&msk, &other).unwrap(), &ct), Err(Error::Integrity)));
        }
    }

    #[test]
    fn encryption_is_deterministic_given_coins() {
        let (inst, _) = setup(8, ObfMode::Sealed, 5);
        let id = BitString::from_u64(3, 8);
        let m = Plaintext::Message(vec![1]);
        assert_eq!(
            ibe_enc_with_coins(&inst.pk, &id, &m, &[7; 32]).unwrap(),
            ibe_enc_with_coins(&inst.pk, &id, &m, &[7; 32]).unwrap()
        );
    }

    #[test]
    fn punctured_keys_agree_byte_for_byte_off_the_point() {
        let (inst, _) = setup(8, ObfMode::Sealed, 6);
        let full = IbeMsk::Full(inst.msk.clone());
        let star = BitString::from_u64(0x5c, 8);
        let punctured = ibe_punc(&inst.msk, &star).unwrap();
        assert_eq!(punctured, ibe_punc(&inst.msk, &star).unwrap());
        let restored = IbeMsk::from_bytes(&punctured.to_bytes()).unwrap();
        for x in 0..256u64 {
            let id = BitString::from_u64(x, 8);
            if id == star {
                assert!(matches!(ibe_keygen(&restored, &id), Err(Error::PuncturedPoint)));
            } else {
                assert_eq!(ibe_keygen(&restored, &id).unwrap().to_bytes(), ibe_keygen(&full, &id).unwrap().to_bytes());
            }
        }
    }

    #[test]
    fn punctured_twin_has_the_same_functionality() {
        let (inst, _) = setup(6, ObfMode::Sealed, 7);
        let star = BitString::from_u64(9, 6);
        let twin = KeyGenProgram { key: HardwiredKey::punctured_twin(&inst.msk, &star).unwrap() };
        let full = KeyGenProgram { key: HardwiredKey::Full(inst.msk.clone()) };
        for x in 0..64u64 {
            let id = BitString::from_u64(x, 6);
            assert_eq!(twin.eval(&id).unwrap(), full.eval(&id).unwrap());
        }
        assert_eq!(full.eval(&BitString::zeros(5)).unwrap(), None);
    }
}
