//! GGM-tree puncturable PRF with multi-point puncturing.
//!
//! The tree is built from a length-doubling [`Expander`]; a node's children
//! are the two halves of `expand(seed, 0)` and a leaf is stretched to the
//! output length with `expand(leaf, 1), expand(leaf, 2), ...`.

use std::collections::{BTreeMap, BTreeSet};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::BitString;
use crate::error::{Error, Result};

pub const DEFAULT_SECURITY_BYTES: usize = 16;
pub const MAX_SECURITY_BYTES: usize = 64;
/// Longest accepted input; identities of the functional scheme need a few hundred bits.
pub const MAX_INPUT_LEN: usize = 4096;
pub const KEY_FORMAT_VERSION: u8 = 1;

const TAG_FULL: u8 = 1;
const TAG_PUNCTURED: u8 = 2;

/// Length-doubling generator: `expand(seed, counter)` returns `2 * seed.len()` bytes.
pub trait Expander: Send + Sync {
    fn expand(&self, seed: &[u8], counter: u64) -> Vec<u8>;
}

/// SHA-256 in counter mode, domain-separated by the block counter.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sha256Expander;

impl Expander for Sha256Expander {
    fn expand(&self, seed: &[u8], counter: u64) -> Vec<u8> {
        let want = 2 * seed.len();
        let mut out = Vec::with_capacity(want.next_multiple_of(32));
        let mut block = 0u64;
        while out.len() < want {
            out.extend_from_slice(
                &Sha256::new()
                    .chain_update(b"clonelab/ggm/v1")
                    .chain_update(counter.to_le_bytes())
                    .chain_update(block.to_le_bytes())
                    .chain_update(seed)
                    .finalize(),
            );
            block += 1;
        }
        out.truncate(want);
        out
    }
}

/// Non-cryptographic splitmix-style expander for reproducible tests.
#[derive(Clone, Copy, Debug, Default)]
pub struct CounterExpander;

impl Expander for CounterExpander {
    fn expand(&self, seed: &[u8], counter: u64) -> Vec<u8> {
        let mut state = seed.iter().fold(counter.wrapping_mul(0x9e37_79b9_7f4a_7c15), |h, &b| {
            (h ^ b as u64).wrapping_mul(0x100_0000_01b3).rotate_left(17)
        });
        let mut out = Vec::with_capacity(2 * seed.len() + 8);
        while out.len() < 2 * seed.len() {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            out.extend_from_slice(&(z ^ (z >> 31)).to_le_bytes());
        }
        out.truncate(2 * seed.len());
        out
    }
}

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GgmKey {
    #[serde(with = "crate::hexser")]
    root_seed: Vec<u8>,
    input_len: usize,
    output_len: usize,
}

impl std::fmt::Debug for GgmKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "GgmKey(in={}, out={}, seed={})", self.input_len, self.output_len, hex::encode(&self.root_seed))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CopathNode {
    pub prefix: BitString,
    #[serde(with = "crate::hexser")]
    pub seed: Vec<u8>,
}

/// A key that evaluates everywhere except `punctured_points`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PuncturedKey {
    punctured_points: Vec<BitString>,
    copath_nodes: Vec<CopathNode>,
    input_len: usize,
    output_len: usize,
    security_bytes: usize,
}

fn check_lengths(security_bytes: usize, input_len: usize, output_len: usize) -> Result<()> {
    if !(1..=MAX_SECURITY_BYTES).contains(&security_bytes) {
        return Err(Error::Parameter(format!("security bytes must be in 1..={MAX_SECURITY_BYTES}")));
    }
    if input_len > MAX_INPUT_LEN {
        return Err(Error::Parameter(format!("input length {input_len} exceeds {MAX_INPUT_LEN}")));
    }
    if output_len == 0 {
        return Err(Error::Parameter("output length must be positive".into()));
    }
    Ok(())
}

fn check_input(input_len: usize, x: &BitString) -> Result<()> {
    if x.len() != input_len {
        return Err(Error::InputLength { expected: input_len, got: x.len() });
    }
    Ok(())
}

fn child(exp: &dyn Expander, seed: &[u8], bit: bool) -> Vec<u8> {
    let both = exp.expand(seed, 0);
    let half = seed.len();
    if bit {
        both[half..].to_vec()
    } else {
        both[..half].to_vec()
    }
}

fn descend(exp: &dyn Expander, seed: &[u8], bits: impl Iterator<Item = bool>) -> Vec<u8> {
    bits.fold(seed.to_vec(), |s, b| child(exp, &s, b))
}

fn stretch(exp: &dyn Expander, leaf: &[u8], output_len: usize) -> BitString {
    let want = output_len.div_ceil(8);
    let mut out = Vec::with_capacity(want + 2 * leaf.len());
    let mut counter = 1;
    while out.len() < want {
        out.extend(exp.expand(leaf, counter));
        counter += 1;
    }
    BitString::from_bytes(&out, output_len).expect("stretched enough bytes")
}

pub fn prf_keygen<R: RngCore + ?Sized>(
    security_bytes: usize,
    input_len: usize,
    output_len: usize,
    rng: &mut R,
) -> Result<GgmKey> {
    check_lengths(security_bytes, input_len, output_len)?;
    let mut root_seed = vec![0u8; security_bytes];
    rng.fill_bytes(&mut root_seed);
    Ok(GgmKey { root_seed, input_len, output_len })
}

pub fn prf_eval(k: &GgmKey, x: &BitString) -> Result<BitString> {
    prf_eval_with(&Sha256Expander, k, x)
}

pub fn prf_eval_with(exp: &dyn Expander, k: &GgmKey, x: &BitString) -> Result<BitString> {
    check_input(k.input_len, x)?;
    let leaf = descend(exp, &k.root_seed, x.bits().into_iter());
    Ok(stretch(exp, &leaf, k.output_len))
}

pub fn prf_puncture(k: &GgmKey, points: &[BitString]) -> Result<PuncturedKey> {
    prf_puncture_with(&Sha256Expander, k, points)
}

/// Punctures at every point of `points` (duplicates ignored).
///
/// The copath is the set of children of punctured-path nodes that are not
/// themselves on a punctured path, so it is ancestor-free and covers exactly
/// the complement of the punctured set.
pub fn prf_puncture_with(exp: &dyn Expander, k: &GgmKey, points: &[BitString]) -> Result<PuncturedKey> {
    for p in points {
        check_input(k.input_len, p)?;
    }
    let punctured: BTreeSet<BitString> = points.iter().cloned().collect();
    let mut path_seeds: BTreeMap<BitString, Vec<u8>> = BTreeMap::new();
    path_seeds.insert(BitString::empty(), k.root_seed.clone());
    for p in &punctured {
        let mut prefix = BitString::empty();
        for bit in p.bits() {
            let parent = path_seeds[&prefix].clone();
            prefix.push(bit);
            path_seeds.entry(prefix.clone()).or_insert_with(|| child(exp, &parent, bit));
        }
    }
    let copath_nodes = if punctured.is_empty() {
        vec![CopathNode { prefix: BitString::empty(), seed: k.root_seed.clone() }]
    } else {
        let mut nodes = Vec::new();
        for (prefix, seed) in path_seeds.iter().filter(|(p, _)| p.len() < k.input_len) {
            for bit in [false, true] {
                let mut c = prefix.clone();
                c.push(bit);
                if !path_seeds.contains_key(&c) {
                    nodes.push(CopathNode { prefix: c, seed: child(exp, seed, bit) });
                }
            }
        }
        nodes.sort();
        nodes
    };
    Ok(PuncturedKey {
        punctured_points: punctured.into_iter().collect(),
        copath_nodes,
        input_len: k.input_len,
        output_len: k.output_len,
        security_bytes: k.root_seed.len(),
    })
}

pub fn eval_punctured(pk: &PuncturedKey, x: &BitString) -> Result<BitString> {
    eval_punctured_with(&Sha256Expander, pk, x)
}

pub fn eval_punctured_with(exp: &dyn Expander, pk: &PuncturedKey, x: &BitString) -> Result<BitString> {
    check_input(pk.input_len, x)?;
    if pk.punctured_points.binary_search(x).is_ok() {
        return Err(Error::PuncturedPoint);
    }
    let node = pk
        .copath_nodes
        .iter()
        .find(|n| x.starts_with(&n.prefix))
        .ok_or_else(|| Error::Decode("copath does not cover the input".into()))?;
    let leaf = descend(exp, &node.seed, x.bits().into_iter().skip(node.prefix.len()));
    Ok(stretch(exp, &leaf, pk.output_len))
}

impl GgmKey {
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn security_bytes(&self) -> usize {
        self.root_seed.len()
    }

    pub fn eval(&self, x: &BitString) -> Result<BitString> {
        prf_eval(self, x)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header(TAG_FULL, self.root_seed.len(), self.input_len, self.output_len);
        out.extend_from_slice(&self.root_seed);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let (sec, input_len, output_len) = r.header(TAG_FULL)?;
        let root_seed = r.take(sec)?.to_vec();
        r.finish()?;
        Ok(Self { root_seed, input_len, output_len })
    }
}

impl PuncturedKey {
    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn output_len(&self) -> usize {
        self.output_len
    }

    pub fn punctured_points(&self) -> &[BitString] {
        &self.punctured_points
    }

    pub fn copath_nodes(&self) -> &[CopathNode] {
        &self.copath_nodes
    }

    pub fn eval(&self, x: &BitString) -> Result<BitString> {
        eval_punctured(self, x)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = header(TAG_PUNCTURED, self.security_bytes, self.input_len, self.output_len);
        out.extend((self.punctured_points.len() as u32).to_le_bytes());
        for p in &self.punctured_points {
            out.extend_from_slice(p.as_bytes());
        }
        out.extend((self.copath_nodes.len() as u32).to_le_bytes());
        for n in &self.copath_nodes {
            out.extend((n.prefix.len() as u32).to_le_bytes());
            out.extend_from_slice(n.prefix.as_bytes());
            out.extend_from_slice(&n.seed);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let (sec, input_len, output_len) = r.header(TAG_PUNCTURED)?;
        let point_bytes = input_len.div_ceil(8);
        let mut punctured_points = Vec::new();
        for _ in 0..r.u32()? {
            punctured_points.push(BitString::from_hex(input_len, &hex::encode(r.take(point_bytes)?))?);
        }
        let mut copath_nodes = Vec::new();
        for _ in 0..r.u32()? {
            let len = r.u32()? as usize;
            if len > input_len {
                return Err(Error::Decode("copath prefix longer than the input".into()));
            }
            let prefix = BitString::from_hex(len, &hex::encode(r.take(len.div_ceil(8))?))?;
            copath_nodes.push(CopathNode { prefix, seed: r.take(sec)?.to_vec() });
        }
        r.finish()?;
        if !punctured_points.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Decode("punctured points not sorted".into()));
        }
        Ok(Self { punctured_points, copath_nodes, input_len, output_len, security_bytes: sec })
    }
}

fn header(tag: u8, sec: usize, input_len: usize, output_len: usize) -> Vec<u8> {
    let mut out = vec![KEY_FORMAT_VERSION, tag];
    out.extend((sec as u16).to_le_bytes());
    out.extend((input_len as u32).to_le_bytes());
    out.extend((output_len as u32).to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Decode("truncated key".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn header(&mut self, tag: u8) -> Result<(usize, usize, usize)> {
        let head = self.take(2)?;
        if head[0] != KEY_FORMAT_VERSION {
            return Err(Error::Decode(format!("unknown key format version {}", head[0])));
        }
        if head[1] != tag {
            return Err(Error::Decode(format!("expected key tag {tag}, got {}", head[1])));
        }
        let sec = u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")) as usize;
        let input_len = self.u32()? as usize;
        let output_len = self.u32()? as usize;
        check_lengths(sec, input_len, output_len).map_err(|e| Error::Decode(e.to_string()))?;
        Ok((sec, input_len, output_len))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Decode(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn key(seed: u64, input_len: usize) -> GgmKey {
        prf_keygen(16, input_len, 64, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    fn all_inputs(len: usize) -> impl Iterator<Item = BitString> {
        (0..1u64 << len).map(move |i| BitString::from_u64(i, len))
    }

    /// Independent oracle: the leaf of `x` recomputed from the root with
    /// explicit half-splitting, no shared descent code.
    fn oracle_eval(k: &GgmKey, x: &BitString) -> BitString {
        let exp = Sha256Expander;
        let mut seed = k.root_seed.clone();
        for i in 0..x.len() {
            let both = exp.expand(&seed, 0);
            seed = if x.get(i) { both[16..32].to_vec() } else { both[..16].to_vec() };
        }
        let mut out = Vec::new();
        let mut c = 1;
        while out.len() * 8 < k.output_len {
            out.extend(exp.expand(&seed, c));
            c += 1;
        }
        BitString::from_bytes(&out, k.output_len).unwrap()
    }

    #[test]
    fn keygen_is_deterministic_in_the_stream() {
        assert_eq!(key(1, 8), key(1, 8));
        assert_ne!(key(1, 8), key(2, 8));
        assert!(prf_keygen(16, 8, 0, &mut ChaCha20Rng::seed_from_u64(1)).is_err());
    }

    #[test]
    fn eval_matches_oracle_and_checks_length() {
        let k = key(3, 8);
        for x in all_inputs(8).step_by(17) {
            assert_eq!(prf_eval(&k, &x).unwrap(), oracle_eval(&k, &x));
            assert_eq!(prf_eval(&k, &x).unwrap(), prf_eval(&k, &x).unwrap());
        }
        assert!(matches!(prf_eval(&k, &BitString::zeros(7)), Err(Error::InputLength { expected: 8, got: 7 })));
    }

    #[test]
    fn outputs_are_bit_balanced() {
        let k = key(4, 8);
        let (ones, total) = all_inputs(8).fold((0usize, 0usize), |(o, t), x| {
            let y = prf_eval(&k, &x).unwrap();
            (o + y.bits().iter().filter(|&&b| b).count(), t + y.len())
        });
        let sigma = (total as f64 / 4.0).sqrt();
        assert!((ones as f64 - total as f64 / 2.0).abs() < 4.0 * sigma, "{ones}/{total}");
    }

    #[test]
    fn distinct_roots_disagree_somewhere() {
        let (a, b) = (key(5, 8), key(6, 8));
        assert!(all_inputs(8).any(|x| prf_eval(&a, &x).unwrap() != prf_eval(&b, &x).unwrap()));
    }

    #[test]
    fn single_point_copath_has_depth_nodes() {
        let k = key(7, 8);
        let pk = prf_puncture(&k, &[BitString::from_u64(0x5a, 8)]).unwrap();
        assert_eq!(pk.copath_nodes().len(), 8);
        assert!(matches!(eval_punctured(&pk, &BitString::from_u64(0x5a, 8)), Err(Error::PuncturedPoint)));
    }

    #[test]
    fn empty_puncture_keeps_root() {
        let k = key(8, 8);
        let pk = prf_puncture(&k, &[]).unwrap();
        assert_eq!(pk.copath_nodes().len(), 1);
        for x in all_inputs(8) {
            assert_eq!(eval_punctured(&pk, &x).unwrap(), prf_eval(&k, &x).unwrap());
        }
    }

    #[test]
    fn depth_one_sibling_covers_half_the_domain() {
        let k = key(9, 8);
        let pk = prf_puncture(&k, &[BitString::from_u64(0, 8)]).unwrap();
        let top = pk.copath_nodes().iter().find(|n| n.prefix.len() == 1).unwrap();
        assert_eq!(top.prefix, BitString::from_bits(&[true]));
        for i in 0..16u64 {
            let x = BitString::from_u64(0x80 | (i * 7 % 128), 8);
            assert_eq!(eval_punctured(&pk, &x).unwrap(), prf_eval(&k, &x).unwrap());
        }
    }

    #[test]
    fn binary_round_trip_preserves_evaluations() {
        let k = key(10, 8);
        assert_eq!(GgmKey::from_bytes(&k.to_bytes()).unwrap(), k);
        let pk = prf_puncture(&k, &[BitString::from_u64(3, 8), BitString::from_u64(200, 8)]).unwrap();
        let back = PuncturedKey::from_bytes(&pk.to_bytes()).unwrap();
        assert_eq!(back, pk);
        for x in all_inputs(8).filter(|x| !pk.punctured_points().contains(x)) {
            assert_eq!(eval_punctured(&back, &x).unwrap(), prf_eval(&k, &x).unwrap());
        }
        let mut bad = pk.to_bytes();
        bad[0] = 9;
        assert!(PuncturedKey::from_bytes(&bad).is_err());
        assert!(PuncturedKey::from_bytes(&pk.to_bytes()[..10]).is_err());
        assert!(GgmKey::from_bytes(&pk.to_bytes()).is_err());
    }

    #[test]
    fn toy_expander_is_injectable() {
        let k = key(11, 8);
        let x = BitString::from_u64(77, 8);
        let a = prf_eval_with(&CounterExpander, &k, &x).unwrap();
        assert_eq!(a, prf_eval_with(&CounterExpander, &k, &x).unwrap());
        assert_ne!(a, prf_eval(&k, &x).unwrap());
        let pk = prf_puncture_with(&CounterExpander, &k, &[BitString::from_u64(1, 8)]).unwrap();
        assert_eq!(eval_punctured_with(&CounterExpander, &pk, &x).unwrap(), a);
    }

    /// Sanity only: bits at a punctured point look fair across many keys.
    #[test]
    fn punctured_point_outputs_pass_a_frequency_test() {
        let x = BitString::from_u64(42, 8);
        let mut ones = 0usize;
        for s in 0..400 {
            ones += prf_eval(&key(1000 + s, 8), &x).unwrap().bits().iter().filter(|&&b| b).count();
        }
        let total = 400.0 * 64.0;
        assert!((ones as f64 - total / 2.0).abs() < 4.0 * (total / 4.0f64).sqrt());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn punctured_key_agrees_off_the_set(
            seed in any::<u64>(),
            len in 1usize..=10,
            raw in prop::collection::vec(any::<u64>(), 0..=3),
        ) {
            let k = key(seed, len);
            let points: Vec<BitString> = raw.iter().map(|&v| BitString::from_u64(v % (1 << len), len)).collect();
            let pk = prf_puncture(&k, &points).unwrap();
            prop_assert!(pk.copath_nodes().len() <= points.len().max(1) * len);
            for (i, a) in pk.copath_nodes().iter().enumerate() {
                for (j, b) in pk.copath_nodes().iter().enumerate() {
                    prop_assert!(i == j || !b.prefix.starts_with(&a.prefix));
                }
            }
            for x in all_inputs(len) {
                if points.contains(&x) {
                    prop_assert!(matches!(eval_punctured(&pk, &x), Err(Error::PuncturedPoint)));
                } else {
                    prop_assert_eq!(eval_punctured(&pk, &x).unwrap(), prf_eval(&k, &x).unwrap());
                }
            }
        }
    }
}
