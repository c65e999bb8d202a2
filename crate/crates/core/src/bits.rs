//! Arbitrary-length bit strings, used for PRF inputs and identities.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gf2::{pack_bits, unpack_bits, BitVector};

/// MSB-first bit string; bit 0 is the high bit of byte 0. Unused trailing
/// bits of the last byte are always zero, so derived equality is exact.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitString {
    len: usize,
    bytes: Vec<u8>,
}

impl BitString {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self { len, bytes: vec![0; len.div_ceil(8)] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self { len: bits.len(), bytes: pack_bits(bits) }
    }

    /// Takes the first `len` bits of `bytes`.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() * 8 < len {
            return Err(Error::InputLength { expected: len, got: bytes.len() * 8 });
        }
        let mut out = bytes[..len.div_ceil(8)].to_vec();
        if len % 8 != 0 {
            let last = out.len() - 1;
            out[last] &= 0xffu8 << (8 - len % 8);
        }
        Ok(Self { len, bytes: out })
    }

    /// Low `len` bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        Self::from_bits(&(0..len).map(|i| (value >> (len - 1 - i)) & 1 == 1).collect::<Vec<_>>())
    }

    pub fn random<R: RngCore + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut bytes = vec![0u8; len.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        Self::from_bytes(&bytes, len).expect("buffer sized for len")
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range for length {}", self.len);
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        unpack_bits(&self.bytes, self.len)
    }

    /// Packed bytes, zero-padded in the last byte.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Value of the bits read as a big-endian integer; requires `len <= 64`.
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64);
        (0..self.len).fold(0, |acc, i| acc << 1 | self.get(i) as u64)
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.bits();
        bits.extend(other.bits());
        BitString::from_bits(&bits)
    }

    pub fn prefix(&self, len: usize) -> BitString {
        BitString::from_bytes(&self.bytes, len).expect("prefix no longer than string")
    }

    pub fn starts_with(&self, prefix: &BitString) -> bool {
        prefix.len <= self.len && self.prefix(prefix.len) == *prefix
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn from_hex(len: usize, s: &str) -> Result<Self> {
        let bytes = hex::decode(s).map_err(|e| Error::Decode(e.to_string()))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::Decode(format!("{} hex bytes for a {len}-bit string", bytes.len())));
        }
        let out = Self::from_bytes(&bytes, len)?;
        if out.bytes != bytes {
            return Err(Error::Decode("nonzero padding bits".into()));
        }
        Ok(out)
    }
}

impl From<&BitVector> for BitString {
    fn from(v: &BitVector) -> Self {
        BitString::from_bits(&v.to_bits())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.len <= 64 {
            for b in self.bits() {
                f.write_str(if b { "1" } else { "0" })?;
            }
            Ok(())
        } else {
            write!(f, "{}:{}", self.len, self.to_hex())
        }
    }
}

#[derive(Serialize, Deserialize)]
struct BitStringRepr {
    len: usize,
    hex: String,
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        BitStringRepr { len: self.len, hex: self.to_hex() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = BitStringRepr::deserialize(d)?;
        BitString::from_hex(r.len, &r.hex).map_err(serde::de::Error::custom)
    }
}
