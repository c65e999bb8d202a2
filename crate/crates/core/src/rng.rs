//! Named deterministic sub-streams derived from one experiment seed.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::stream::ByteStream;

/// ChaCha20 generator keyed by `SHA-256(seed || label || index)`.
///
/// Any single trial can be replayed from `(seed, label, index)` alone, and the
/// result does not depend on how trials are scheduled across threads.
pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha20Rng {
    let digest = Sha256::new()
        .chain_update(b"clonelab/substream/v1")
        .chain_update(seed.to_le_bytes())
        .chain_update((label.len() as u64).to_le_bytes())
        .chain_update(label.as_bytes())
        .chain_update(index.to_le_bytes())
        .finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(key)
}

/// Draws `len` bytes from `rng` into a finite stream.
pub fn stream_from_rng<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> ByteStream {
    let mut data = vec![0u8; len];
    rng.fill_bytes(&mut data);
    ByteStream::from_bytes(data)
}
