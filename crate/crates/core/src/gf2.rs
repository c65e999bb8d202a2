//! Exact linear algebra over F_2 for ambient dimension up to 64.
//!
//! A vector of length `n` is packed into a `u64`. Bit 0 of the vector is the
//! most significant of the `n` used bits, so the packed integer is also the
//! computational-basis index of the vector and integer order is MSB-first
//! lexicographic order.
//!
//! Subspaces are kept in reduced row-echelon form with pivots strictly
//! increasing (in bit-0-first column order), which makes the representation
//! canonical: two spanning sets of the same subspace produce identical values.

use std::fmt;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Gf2Error;
use crate::stream::ByteStream;

/// Largest supported ambient dimension.
pub const MAX_DIM: usize = 64;

/// Number of rejected `d x n` matrices tolerated per subspace before a
/// finite randomness stream is declared exhausted.
pub const SUBSPACE_ATTEMPT_BUDGET: usize = 64;

#[inline]
fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// A vector in F_2^n.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    len: u8,
    bits: u64,
}

impl BitVector {
    pub fn zero(len: usize) -> Self {
        assert!(len <= MAX_DIM, "vector length {len} exceeds {MAX_DIM}");
        Self { len: len as u8, bits: 0 }
    }

    /// Builds a vector from its packed index; bits above `len` must be clear.
    pub fn from_index(len: usize, index: u64) -> Result<Self, Gf2Error> {
        if len > MAX_DIM {
            return Err(Gf2Error::Parameter(format!("vector length {len} exceeds {MAX_DIM}")));
        }
        if index & !mask(len) != 0 {
            return Err(Gf2Error::Parameter(format!("index {index:#x} does not fit in {len} bits")));
        }
        Ok(Self { len: len as u8, bits: index })
    }

    pub fn from_bits(bits: &[bool]) -> Result<Self, Gf2Error> {
        if bits.len() > MAX_DIM {
            return Err(Gf2Error::Parameter(format!("vector length {} exceeds {MAX_DIM}", bits.len())));
        }
        let packed = bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64);
        Ok(Self { len: bits.len() as u8, bits: packed })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len as usize
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// The packed value, which is also the computational-basis index.
    #[inline]
    pub fn index(&self) -> u64 {
        self.bits
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len(), "bit {i} out of range for length {}", self.len);
        (self.bits >> (self.len() - 1 - i)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len(), "bit {i} out of range for length {}", self.len);
        let m = 1u64 << (self.len() - 1 - i);
        if value {
            self.bits |= m;
        } else {
            self.bits &= !m;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.bits == 0
    }

    pub fn to_bits(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    pub fn xor(&self, other: &BitVector) -> Result<BitVector, Gf2Error> {
        check_len(self.len(), other.len())?;
        Ok(BitVector { len: self.len, bits: self.bits ^ other.bits })
    }

    /// Standard inner product over F_2.
    pub fn dot(&self, other: &BitVector) -> Result<bool, Gf2Error> {
        check_len(self.len(), other.len())?;
        Ok((self.bits & other.bits).count_ones() & 1 == 1)
    }

    /// Packed bytes, MSB-first, zero padded at the end of the last byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        pack_bits(&self.to_bits())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(len: usize, s: &str) -> Result<Self, Gf2Error> {
        let bytes = hex::decode(s).map_err(|e| Gf2Error::Parameter(format!("bad hex: {e}")))?;
        if bytes.len() != len.div_ceil(8) {
            return Err(Gf2Error::Parameter(format!("hex has {} bytes, expected {}", bytes.len(), len.div_ceil(8))));
        }
        let bits = unpack_bits(&bytes, len);
        Self::from_bits(&bits)
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector(")?;
        for b in self.to_bits() {
            write!(f, "{}", b as u8)?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.to_bits() {
            write!(f, "{}", b as u8)?;
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct BitVectorRepr {
    len: usize,
    hex: String,
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BitVectorRepr { len: self.len(), hex: self.to_hex() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = BitVectorRepr::deserialize(d)?;
        BitVector::from_hex(repr.len, &repr.hex).map_err(serde::de::Error::custom)
    }
}

pub(crate) fn pack_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

pub(crate) fn unpack_bits(bytes: &[u8], len: usize) -> Vec<bool> {
    (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0).collect()
}

fn check_len(expected: usize, got: usize) -> Result<(), Gf2Error> {
    if expected != got {
        Err(Gf2Error::LengthMismatch { expected, got })
    } else {
        Ok(())
    }
}

/// A linear subspace of F_2^n in canonical RREF.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Subspace {
    ambient_dim: u8,
    /// RREF rows; sorted so pivot columns increase, i.e. packed values decrease.
    rows: Vec<u64>,
}

impl Subspace {
    pub fn zero(n: usize) -> Self {
        assert!(n <= MAX_DIM);
        Self { ambient_dim: n as u8, rows: Vec::new() }
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_DIM);
        let rows = (0..n).map(|i| 1u64 << (n - 1 - i)).collect();
        Self { ambient_dim: n as u8, rows }
    }

    /// The span of `vectors`, canonicalised.
    pub fn span(n: usize, vectors: &[BitVector]) -> Result<Self, Gf2Error> {
        if n > MAX_DIM {
            return Err(Gf2Error::Parameter(format!("ambient dimension {n} exceeds {MAX_DIM}")));
        }
        for v in vectors {
            check_len(n, v.len())?;
        }
        Ok(Self::from_packed_rows(n, vectors.iter().map(|v| v.bits)))
    }

    pub(crate) fn from_packed_rows(n: usize, words: impl IntoIterator<Item = u64>) -> Self {
        let mut rows: Vec<u64> = Vec::new();
        for w in words {
            let mut v = w & mask(n);
            for &r in &rows {
                let p = leading_bit(r);
                if v & p != 0 {
                    v ^= r;
                }
            }
            if v == 0 {
                continue;
            }
            let p = leading_bit(v);
            for r in rows.iter_mut() {
                if *r & p != 0 {
                    *r ^= v;
                }
            }
            rows.push(v);
        }
        rows.sort_unstable_by(|a, b| b.cmp(a));
        Self { ambient_dim: n as u8, rows }
    }

    #[inline]
    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim as usize
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Number of elements, `2^rank`.
    pub fn cardinality(&self) -> u128 {
        1u128 << self.rank()
    }

    pub fn basis(&self) -> Vec<BitVector> {
        self.rows.iter().map(|&r| BitVector { len: self.ambient_dim, bits: r }).collect()
    }

    /// Pivot columns (bit-0-first indices), strictly increasing.
    pub fn pivots(&self) -> Vec<usize> {
        let n = self.ambient_dim();
        self.rows.iter().map(|&r| n - 1 - (63 - r.leading_zeros() as usize)).collect()
    }

    /// Clears every pivot bit of `v` using the basis rows. The result is the
    /// lexicographically smallest element of `v + A`.
    #[inline]
    fn reduce_word(&self, mut v: u64) -> u64 {
        for &r in &self.rows {
            if v & leading_bit(r) != 0 {
                v ^= r;
            }
        }
        v
    }

    pub fn contains(&self, v: &BitVector) -> Result<bool, Gf2Error> {
        check_len(self.ambient_dim(), v.len())?;
        Ok(self.reduce_word(v.bits) == 0)
    }

    /// Orthogonal complement under the standard inner product.
    pub fn dual(&self) -> Subspace {
        let n = self.ambient_dim();
        let pivots = self.pivots();
        let mut generators = Vec::with_capacity(n - self.rank());
        for f in 0..n {
            if pivots.contains(&f) {
                continue;
            }
            let fbit = 1u64 << (n - 1 - f);
            let mut w = fbit;
            for &r in &self.rows {
                if r & fbit != 0 {
                    w |= leading_bit(r);
                }
            }
            generators.push(w);
        }
        Self::from_packed_rows(n, generators)
    }

    /// All elements of the subspace, in no particular order.
    pub fn elements(&self) -> Result<Vec<BitVector>, Gf2Error> {
        if self.rank() > 24 {
            return Err(Gf2Error::Parameter(format!("refusing to enumerate 2^{} elements", self.rank())));
        }
        let mut out = Vec::with_capacity(1 << self.rank());
        for combo in 0u64..(1u64 << self.rank()) {
            let mut acc = 0u64;
            for (j, &r) in self.rows.iter().enumerate() {
                if combo >> j & 1 == 1 {
                    acc ^= r;
                }
            }
            out.push(BitVector { len: self.ambient_dim, bits: acc });
        }
        Ok(out)
    }

    /// Elements of the coset `A + offset`.
    pub fn coset_elements(&self, offset: &BitVector) -> Result<Vec<BitVector>, Gf2Error> {
        check_len(self.ambient_dim(), offset.len())?;
        Ok(self
            .elements()?
            .into_iter()
            .map(|a| BitVector { len: a.len, bits: a.bits ^ offset.bits })
            .collect())
    }

    /// Hex encoding of the row-major `rank x n` basis matrix, bits packed MSB-first.
    pub fn to_hex(&self) -> String {
        let bits: Vec<bool> = self.basis().iter().flat_map(|r| r.to_bits()).collect();
        hex::encode(pack_bits(&bits))
    }

    pub fn from_hex(n: usize, rank: usize, s: &str) -> Result<Self, Gf2Error> {
        let bytes = hex::decode(s).map_err(|e| Gf2Error::Parameter(format!("bad hex: {e}")))?;
        if bytes.len() != (n * rank).div_ceil(8) {
            return Err(Gf2Error::Parameter("basis matrix has wrong size".into()));
        }
        let bits = unpack_bits(&bytes, n * rank);
        let rows: Vec<BitVector> =
            bits.chunks(n.max(1)).take(rank).map(BitVector::from_bits).collect::<Result<_, _>>()?;
        let space = Subspace::span(n, &rows)?;
        if space.rank() != rank {
            return Err(Gf2Error::Parameter("basis rows are not independent".into()));
        }
        Ok(space)
    }
}

impl fmt::Debug for Subspace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Subspace")
            .field("n", &self.ambient_dim)
            .field("basis", &self.basis())
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct SubspaceRepr {
    n: usize,
    rank: usize,
    rows: String,
}

impl Serialize for Subspace {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        SubspaceRepr { n: self.ambient_dim(), rank: self.rank(), rows: self.to_hex() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Subspace {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = SubspaceRepr::deserialize(d)?;
        Subspace::from_hex(repr.n, repr.rank, &repr.rows).map_err(serde::de::Error::custom)
    }
}

#[inline]
fn leading_bit(r: u64) -> u64 {
    1u64 << (63 - r.leading_zeros())
}

/// Orthogonal complement of `a`.
pub fn dual(a: &Subspace) -> Subspace {
    a.dual()
}

/// Whether `v` lies in the coset `a + offset`.
pub fn coset_contains(a: &Subspace, offset: &BitVector, v: &BitVector) -> Result<bool, Gf2Error> {
    check_len(a.ambient_dim(), offset.len())?;
    check_len(a.ambient_dim(), v.len())?;
    Ok(a.reduce_word(v.bits ^ offset.bits) == 0)
}

/// Lexicographically smallest element of `a + v` (MSB-first order).
pub fn canonical(a: &Subspace, v: &BitVector) -> Result<BitVector, Gf2Error> {
    check_len(a.ambient_dim(), v.len())?;
    Ok(BitVector { len: v.len, bits: a.reduce_word(v.bits) })
}

/// Source of uniformly random 64-bit words.
pub(crate) trait WordSource {
    fn next_word(&mut self) -> Result<u64, Gf2Error>;
}

impl WordSource for ByteStream {
    fn next_word(&mut self) -> Result<u64, Gf2Error> {
        self.next_u64().map_err(Gf2Error::from)
    }
}

struct RngWords<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> WordSource for RngWords<'_, R> {
    fn next_word(&mut self) -> Result<u64, Gf2Error> {
        Ok(self.0.next_u64())
    }
}

fn sample_subspace_from(
    n: usize,
    d: usize,
    src: &mut impl WordSource,
    attempt_budget: Option<usize>,
) -> Result<Subspace, Gf2Error> {
    if n > MAX_DIM {
        return Err(Gf2Error::Parameter(format!("ambient dimension {n} exceeds {MAX_DIM}")));
    }
    if d > n {
        return Err(Gf2Error::Parameter(format!("subspace dimension {d} exceeds ambient dimension {n}")));
    }
    let m = mask(n);
    let mut attempts = 0usize;
    loop {
        let mut rows = Vec::with_capacity(d);
        for _ in 0..d {
            rows.push(src.next_word()? & m);
        }
        let space = Subspace::from_packed_rows(n, rows);
        if space.rank() == d {
            return Ok(space);
        }
        attempts += 1;
        if let Some(budget) = attempt_budget {
            if attempts >= budget {
                return Err(Gf2Error::Randomness(format!(
                    "no full-rank {d}x{n} matrix after {budget} attempts"
                )));
            }
        }
    }
}

/// Uniformly random `d`-dimensional subspace of F_2^n.
///
/// Rejection-samples `d x n` matrices until one has full rank; every rank-`d`
/// subspace has the same number of ordered bases, so the result is uniform.
pub fn sample_subspace<R: RngCore + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Subspace, Gf2Error> {
    sample_subspace_from(n, d, &mut RngWords(rng), None)
}

/// Uniformly random vector of F_2^n.
pub fn sample_vector<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> BitVector {
    BitVector { len: n as u8, bits: rng.next_u64() & mask(n) }
}

/// One coset description `(A, s, s')`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetTriple {
    pub space: Subspace,
    pub s: BitVector,
    pub s_prime: BitVector,
}

impl CosetTriple {
    pub fn new(space: Subspace, s: BitVector, s_prime: BitVector) -> Result<Self, Gf2Error> {
        check_len(space.ambient_dim(), s.len())?;
        check_len(space.ambient_dim(), s_prime.len())?;
        Ok(Self { space, s, s_prime })
    }

    pub fn ambient_dim(&self) -> usize {
        self.space.ambient_dim()
    }

    /// The triple `(A^⊥, s', s)` describing the Hadamard-dual coset state.
    pub fn dual(&self) -> CosetTriple {
        CosetTriple { space: self.space.dual(), s: self.s_prime, s_prime: self.s }
    }

    /// Membership in `A + s` when `basis_bit` is false, `A^⊥ + s'` otherwise.
    pub fn accepts(&self, basis_bit: bool, v: &BitVector) -> Result<bool, Gf2Error> {
        if basis_bit {
            coset_contains(&self.space.dual(), &self.s_prime, v)
        } else {
            coset_contains(&self.space, &self.s, v)
        }
    }
}

/// Shape of a coset tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetParams {
    pub ambient_dim: usize,
    pub subspace_dim: usize,
    pub count: usize,
    /// Requires `subspace_dim == ambient_dim / 2`.
    pub balanced: bool,
}

impl CosetParams {
    pub fn new(ambient_dim: usize, subspace_dim: usize, count: usize) -> Result<Self, Gf2Error> {
        let p = Self { ambient_dim, subspace_dim, count, balanced: false };
        p.validate()?;
        Ok(p)
    }

    /// Half-dimensional subspaces, `d = n/2`.
    pub fn balanced(ambient_dim: usize, count: usize) -> Result<Self, Gf2Error> {
        let p = Self { ambient_dim, subspace_dim: ambient_dim / 2, count, balanced: true };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), Gf2Error> {
        if self.ambient_dim > MAX_DIM {
            return Err(Gf2Error::Parameter(format!("ambient dimension {} exceeds {MAX_DIM}", self.ambient_dim)));
        }
        if self.subspace_dim > self.ambient_dim {
            return Err(Gf2Error::Parameter(format!(
                "subspace dimension {} exceeds ambient dimension {}",
                self.subspace_dim, self.ambient_dim
            )));
        }
        if self.count == 0 {
            return Err(Gf2Error::Parameter("coset count must be at least 1".into()));
        }
        if self.balanced && (self.ambient_dim % 2 != 0 || 2 * self.subspace_dim != self.ambient_dim) {
            return Err(Gf2Error::Parameter(format!(
                "balanced mode requires d = n/2, got n = {}, d = {}",
                self.ambient_dim, self.subspace_dim
            )));
        }
        Ok(())
    }

    /// Stream length (bytes) that `coset_gen` is guaranteed not to exceed
    /// unless some subspace needs more than `SUBSPACE_ATTEMPT_BUDGET` tries.
    pub fn stream_budget(&self) -> usize {
        self.count * (SUBSPACE_ATTEMPT_BUDGET * self.subspace_dim + 2) * 8
    }
}

/// Deterministic coset-tuple sampler.
///
/// Draw order, per triple `i = 0..count`: one 8-byte little-endian word per
/// row of each candidate `d x n` matrix (low `n` bits kept) until a candidate
/// has rank `d`, then one word for `s` and one for `s'`.
pub fn coset_gen(params: &CosetParams, stream: &mut ByteStream) -> Result<Vec<CosetTriple>, Gf2Error> {
    params.validate()?;
    let n = params.ambient_dim;
    let m = mask(n);
    let mut out = Vec::with_capacity(params.count);
    for _ in 0..params.count {
        let space = sample_subspace_from(n, params.subspace_dim, stream, Some(SUBSPACE_ATTEMPT_BUDGET))?;
        let s = BitVector { len: n as u8, bits: stream.next_word()? & m };
        let s_prime = BitVector { len: n as u8, bits: stream.next_word()? & m };
        out.push(CosetTriple { space, s, s_prime });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn bv(s: &str) -> BitVector {
        BitVector::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>()).unwrap()
    }

    /// Independent rank oracle: Gaussian elimination on rows of bools.
    fn rank_oracle(rows: &[Vec<bool>]) -> usize {
        let mut m: Vec<Vec<bool>> = rows.to_vec();
        let ncols = m.first().map_or(0, |r| r.len());
        let mut rank = 0;
        for col in 0..ncols {
            let Some(p) = (rank..m.len()).find(|&r| m[r][col]) else { continue };
            m.swap(rank, p);
            for r in 0..m.len() {
                if r != rank && m[r][col] {
                    let pivot_row = m[rank].clone();
                    for (x, y) in m[r].iter_mut().zip(pivot_row) {
                        *x ^= y;
                    }
                }
            }
            rank += 1;
        }
        rank
    }

    /// All rank-`d` subspaces of F_2^n by brute force over element sets.
    fn enumerate_subspaces(n: usize, d: usize) -> Vec<Subspace> {
        let vecs: Vec<BitVector> = (0..1u64 << n).map(|i| BitVector::from_index(n, i).unwrap()).collect();
        let mut seen = std::collections::BTreeSet::new();
        let mut out = Vec::new();
        let mut stack = vec![(Vec::<BitVector>::new(), 0usize)];
        while let Some((chosen, start)) = stack.pop() {
            if chosen.len() == d {
                let s = Subspace::span(n, &chosen).unwrap();
                if s.rank() == d && seen.insert(s.rows.clone()) {
                    out.push(s);
                }
                continue;
            }
            for i in start..vecs.len() {
                let mut next = chosen.clone();
                next.push(vecs[i]);
                stack.push((next, i + 1));
            }
        }
        out
    }

    #[test]
    fn full_space_of_dimension_two() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let a = sample_subspace(2, 2, &mut rng).unwrap();
        assert_eq!(a.basis(), vec![bv("10"), bv("01")]);
        assert_eq!(a, Subspace::full(2));
    }

    #[test]
    fn rank_one_subspaces_of_f2_squared_are_uniform() {
        let all = enumerate_subspaces(2, 1);
        assert_eq!(all.len(), 3);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let mut counts = vec![0usize; 3];
        for _ in 0..3000 {
            let s = sample_subspace(2, 1, &mut rng).unwrap();
            counts[all.iter().position(|x| *x == s).unwrap()] += 1;
        }
        // 3 sigma of Binomial(3000, 1/3) is about 77.5.
        for c in counts {
            assert!((c as f64 - 1000.0).abs() <= 3.0 * (3000.0f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt(), "{c}");
        }
    }

    #[test]
    fn sampled_rank_matches_elimination_oracle() {
        let mut rng = ChaCha20Rng::seed_from_u64(42);
        let a = sample_subspace(4, 2, &mut rng).unwrap();
        let rows: Vec<Vec<bool>> = a.basis().iter().map(|r| r.to_bits()).collect();
        assert_eq!(rank_oracle(&rows), 2);
        assert_eq!(a.rank(), 2);
        let pivots = a.pivots();
        assert!(pivots.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn chi_square_uniformity_over_all_subspaces() {
        // Counts of rank-d subspaces of F_2^4: d=1 -> 15, d=2 -> 35.
        for (d, expected_count) in [(1usize, 15usize), (2, 35)] {
            let all = enumerate_subspaces(4, d);
            assert_eq!(all.len(), expected_count);
            let mut rng = ChaCha20Rng::seed_from_u64(100 + d as u64);
            let trials = 200 * expected_count;
            let mut counts = vec![0f64; expected_count];
            for _ in 0..trials {
                let s = sample_subspace(4, d, &mut rng).unwrap();
                counts[all.iter().position(|x| *x == s).unwrap()] += 1.0;
            }
            let e = trials as f64 / expected_count as f64;
            let chi2: f64 = counts.iter().map(|c| (c - e) * (c - e) / e).sum();
            let dof = (expected_count - 1) as f64;
            let crit = statrs::distribution::ContinuousCDF::inverse_cdf(
                &statrs::distribution::ChiSquared::new(dof).unwrap(),
                0.999,
            );
            assert!(chi2 < crit, "d={d}: chi2 {chi2} >= {crit}");
        }
    }

    #[test]
    fn dual_examples() {
        assert_eq!(Subspace::full(5).dual(), Subspace::zero(5));
        assert_eq!(Subspace::zero(3).dual(), Subspace::full(3));
        let a = Subspace::span(2, &[bv("11")]).unwrap();
        assert_eq!(a.dual(), a);
    }

    #[test]
    fn dual_is_involution_and_ranks_add_up() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for i in 0..100 {
            let n = 1 + i % 10;
            let d = i % (n + 1);
            let a = sample_subspace(n, d, &mut rng).unwrap();
            let ad = a.dual();
            assert_eq!(a.rank() + ad.rank(), n);
            assert_eq!(ad.dual(), a);
            for x in a.basis() {
                for y in ad.basis() {
                    assert!(!x.dot(&y).unwrap());
                }
            }
        }
    }

    #[test]
    fn coset_membership_examples() {
        let a = Subspace::span(2, &[bv("10")]).unwrap();
        let off = bv("01");
        assert!(coset_contains(&a, &off, &off).unwrap());
        assert!(coset_contains(&a, &off, &bv("11")).unwrap());
        assert!(!coset_contains(&a, &off, &bv("10")).unwrap());
        let full = Subspace::full(6);
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..20 {
            assert!(coset_contains(&full, &sample_vector(6, &mut rng), &sample_vector(6, &mut rng)).unwrap());
        }
        assert!(matches!(
            coset_contains(&a, &off, &bv("011")),
            Err(Gf2Error::LengthMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn canonical_examples() {
        let z = Subspace::zero(3);
        assert_eq!(canonical(&z, &bv("101")).unwrap(), bv("101"));
        let a = Subspace::span(2, &[bv("11")]).unwrap();
        assert_eq!(canonical(&a, &bv("10")).unwrap(), bv("01"));
    }

    #[test]
    fn canonical_is_brute_force_minimum_and_coset_invariant() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        for i in 0..1000 {
            let n = 1 + i % 8;
            let d = i % (n + 1);
            let a = sample_subspace(n, d, &mut rng).unwrap();
            let v = sample_vector(n, &mut rng);
            let elems = a.elements().unwrap();
            let w = elems[i % elems.len()];
            let c = canonical(&a, &v).unwrap();
            assert_eq!(c, canonical(&a, &v.xor(&w).unwrap()).unwrap());
            let min = a.coset_elements(&v).unwrap().into_iter().min().unwrap();
            assert_eq!(c, min);
        }
    }

    #[test]
    fn canonical_comparison_decides_coset_membership() {
        let mut rng = ChaCha20Rng::seed_from_u64(78);
        for _ in 0..500 {
            let a = sample_subspace(6, 3, &mut rng).unwrap();
            let s = sample_vector(6, &mut rng);
            let v = sample_vector(6, &mut rng);
            let same = canonical(&a, &v).unwrap() == canonical(&a, &s).unwrap();
            assert_eq!(same, coset_contains(&a, &s, &v).unwrap());
        }
    }

    #[test]
    fn rref_is_canonical_under_basis_scrambling() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for i in 0..1000 {
            let n = 2 + i % 9;
            let d = i % (n + 1);
            let a = sample_subspace(n, d, &mut rng).unwrap();
            let basis = a.basis();
            // Random invertible recombination plus redundant vectors.
            let mut scrambled = Vec::new();
            for _ in 0..d + 2 {
                let mut acc = BitVector::zero(n);
                for b in &basis {
                    if rng.next_u32() & 1 == 1 {
                        acc = acc.xor(b).unwrap();
                    }
                }
                scrambled.push(acc);
            }
            scrambled.extend(basis.iter().rev().copied());
            assert_eq!(Subspace::span(n, &scrambled).unwrap(), a);
        }
    }

    #[test]
    fn coset_gen_is_deterministic_and_full_rank() {
        let params = CosetParams::new(4, 2, 3).unwrap();
        let mut s1 = ByteStream::expand(&7u64.to_le_bytes(), params.stream_budget());
        let mut s2 = ByteStream::expand(&7u64.to_le_bytes(), params.stream_budget());
        let t1 = coset_gen(&params, &mut s1).unwrap();
        let t2 = coset_gen(&params, &mut s2).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(s1.drawn(), s2.drawn());
        for t in &t1 {
            let rows: Vec<Vec<bool>> = t.space.basis().iter().map(|r| r.to_bits()).collect();
            assert_eq!(rank_oracle(&rows), 2);
        }
        assert_eq!(
            serde_json::to_string(&t1).unwrap(),
            serde_json::to_string(&t2).unwrap()
        );
    }

    #[test]
    fn coset_gen_rejects_bad_params_and_short_streams() {
        let bad = CosetParams { ambient_dim: 6, subspace_dim: 2, count: 1, balanced: true };
        let mut s = ByteStream::expand(b"x", 4096);
        assert!(matches!(coset_gen(&bad, &mut s), Err(Gf2Error::Parameter(_))));
        assert!(CosetParams::balanced(6, 1).is_ok());
        let params = CosetParams::new(4, 2, 3).unwrap();
        let mut short = ByteStream::from_bytes(vec![0xAB; 20]);
        assert!(matches!(coset_gen(&params, &mut short), Err(Gf2Error::Randomness(_))));
    }

    #[test]
    fn serde_round_trip_of_triples() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let space = sample_subspace(7, 3, &mut rng).unwrap();
        let t = CosetTriple::new(space, sample_vector(7, &mut rng), sample_vector(7, &mut rng)).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: CosetTriple = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn bit_order_is_msb_first() {
        let v = bv("1000");
        assert_eq!(v.index(), 8);
        assert!(v.get(0));
        assert_eq!(BitVector::from_index(4, 8).unwrap(), v);
        assert!(BitVector::from_index(3, 8).is_err());
    }
}
