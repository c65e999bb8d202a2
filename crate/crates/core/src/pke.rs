//! Toy hybrid public-key encryption with derandomised key generation.
//!
//! Keys live in the order-`q` subgroup of `Z_p^*` for a 62-bit safe prime
//! `p = 2q + 1`. Encryption is ElGamal-KEM style: a shared group element
//! keys a SHA-256 pad and an HMAC tag, so decrypting under the wrong key is
//! detected rather than yielding garbage. Desk-scale security only.

use hmac::{Hmac, KeyInit, Mac};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::stream::ByteStream;

/// Largest safe prime below `2^62`.
pub const GROUP_PRIME: u64 = 4_611_686_018_427_377_339;
pub const GROUP_ORDER: u64 = (GROUP_PRIME - 1) / 2;
/// A quadratic residue, hence a generator of the order-`q` subgroup.
pub const GENERATOR: u64 = 4;
pub const KEYGEN_COIN_BYTES: usize = 32;
pub const ENC_COIN_BYTES: usize = 32;
pub const TAG_BYTES: usize = 16;

const FRAME_MESSAGE: u8 = 0;
const FRAME_TOP: u8 = 1;

/// A message, or the distinguished symbol outside the message space.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Plaintext {
    Message(#[serde(with = "crate::hexser")] Vec<u8>),
    Top,
}

impl Plaintext {
    fn frame(&self) -> Vec<u8> {
        match self {
            Plaintext::Message(m) => std::iter::once(FRAME_MESSAGE).chain(m.iter().copied()).collect(),
            Plaintext::Top => vec![FRAME_TOP],
        }
    }

    fn unframe(bytes: &[u8]) -> Result<Self> {
        match bytes.split_first() {
            Some((&FRAME_MESSAGE, rest)) => Ok(Plaintext::Message(rest.to_vec())),
            Some((&FRAME_TOP, [])) => Ok(Plaintext::Top),
            _ => Err(Error::Decode("bad plaintext framing".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PkePublicKey(pub u64);

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PkeSecretKey {
    x: u64,
}

impl std::fmt::Debug for PkeSecretKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "PkeSecretKey({:016x})", self.x)
    }
}

impl PkeSecretKey {
    pub fn public(&self) -> PkePublicKey {
        PkePublicKey(pow_mod(GENERATOR, self.x))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.x.to_le_bytes().to_vec()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PkeCiphertext {
    pub c1: u64,
    #[serde(with = "crate::hexser")]
    pub body: Vec<u8>,
    #[serde(with = "crate::hexser")]
    pub tag: Vec<u8>,
}

fn mul_mod(a: u64, b: u64) -> u64 {
    ((a as u128 * b as u128) % GROUP_PRIME as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64) -> u64 {
    let mut acc = 1u64;
    base %= GROUP_PRIME;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base);
        }
        base = mul_mod(base, base);
        exp >>= 1;
    }
    acc
}

/// Maps coins to an exponent in `[1, q - 1]`.
fn scalar(label: &[u8], coins: &[u8]) -> u64 {
    let d = Sha256::new().chain_update(b"clonelab/pke/").chain_update(label).chain_update(coins).finalize();
    let wide = u128::from_le_bytes(d[..16].try_into().expect("16 bytes"));
    (wide % (GROUP_ORDER as u128 - 1)) as u64 + 1
}

fn check_coins(coins: &[u8], want: usize) -> Result<()> {
    if coins.len() != want {
        return Err(Error::InputLength { expected: want * 8, got: coins.len() * 8 });
    }
    Ok(())
}

/// Deterministic key generation from `KEYGEN_COIN_BYTES` of randomness.
pub fn pke_keygen(coins: &[u8]) -> Result<(PkePublicKey, PkeSecretKey)> {
    check_coins(coins, KEYGEN_COIN_BYTES)?;
    let sk = PkeSecretKey { x: scalar(b"keygen", coins) };
    Ok((sk.public(), sk))
}

fn session(shared: u64, c1: u64, body_len: usize) -> (ByteStream, Vec<u8>) {
    let mut seed = shared.to_le_bytes().to_vec();
    seed.extend(c1.to_le_bytes());
    let mut s = ByteStream::expand(&seed, 32 + body_len);
    let mac_key = s.next_bytes(32).expect("sized").to_vec();
    (s, mac_key)
}

fn tag(mac_key: &[u8], c1: u64, body: &[u8]) -> Hmac<Sha256> {
    let mut mac = Hmac::<Sha256>::new_from_slice(mac_key).expect("any key length");
    mac.update(&c1.to_le_bytes());
    mac.update(body);
    mac
}

pub fn pke_enc(pk: &PkePublicKey, m: &Plaintext, coins: &[u8]) -> Result<PkeCiphertext> {
    check_coins(coins, ENC_COIN_BYTES)?;
    if !in_subgroup(pk.0) {
        return Err(Error::Parameter("public key is not a subgroup element".into()));
    }
    let y = scalar(b"enc", coins);
    let c1 = pow_mod(GENERATOR, y);
    let framed = m.frame();
    let (mut pad, mac_key) = session(pow_mod(pk.0, y), c1, framed.len());
    let body: Vec<u8> = framed.iter().zip(pad.next_bytes(framed.len()).expect("sized")).map(|(a, b)| a ^ b).collect();
    let t = tag(&mac_key, c1, &body).finalize().into_bytes()[..TAG_BYTES].to_vec();
    Ok(PkeCiphertext { c1, body, tag: t })
}

fn in_subgroup(v: u64) -> bool {
    (2..GROUP_PRIME).contains(&v) && pow_mod(v, GROUP_ORDER) == 1
}

/// Fails with [`Error::Integrity`] when the tag does not verify, which is
/// what happens under a wrong key.
pub fn pke_dec(sk: &PkeSecretKey, ct: &PkeCiphertext) -> Result<Plaintext> {
    if !in_subgroup(ct.c1) || ct.tag.len() != TAG_BYTES {
        return Err(Error::Integrity);
    }
    let (mut pad, mac_key) = session(pow_mod(ct.c1, sk.x), ct.c1, ct.body.len());
    tag(&mac_key, ct.c1, &ct.body).verify_truncated_left(&ct.tag).map_err(|_| Error::Integrity)?;
    let framed: Vec<u8> = ct.body.iter().zip(pad.next_bytes(ct.body.len()).expect("sized")).map(|(a, b)| a ^ b).collect();
    Plaintext::unframe(&framed)
}
