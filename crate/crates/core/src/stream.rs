//! Finite, draw-counting randomness streams.

use sha2::{Digest, Sha256};

use crate::error::StreamError;

const EXPAND_DOMAIN: &[u8] = b"clonelab/stream/v1";

/// A finite byte stream consumed front to back.
///
/// Every draw advances a counter, so two consumers reading the same stream
/// in the same order see the same bytes and end at the same position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ByteStream {
    data: Vec<u8>,
    pos: usize,
}

impl ByteStream {
    pub fn from_bytes(data: Vec<u8>) -> Self {
        Self { data, pos: 0 }
    }

    /// Expands `seed` to `len` bytes with SHA-256 in counter mode.
    pub fn expand(seed: &[u8], len: usize) -> Self {
        let mut data = Vec::with_capacity(len.next_multiple_of(32));
        let mut counter = 0u64;
        while data.len() < len {
            let block = Sha256::new()
                .chain_update(EXPAND_DOMAIN)
                .chain_update((seed.len() as u64).to_le_bytes())
                .chain_update(seed)
                .chain_update(counter.to_le_bytes())
                .finalize();
            data.extend_from_slice(&block);
            counter += 1;
        }
        data.truncate(len);
        Self { data, pos: 0 }
    }

    pub fn next_bytes(&mut self, n: usize) -> Result<&[u8], StreamError> {
        if self.remaining() < n {
            return Err(StreamError::Exhausted { wanted: n, remaining: self.remaining() });
        }
        let out = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    /// Little-endian 64-bit word.
    pub fn next_u64(&mut self) -> Result<u64, StreamError> {
        let b = self.next_bytes(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")))
    }

    /// Bytes consumed so far.
    pub fn drawn(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}
