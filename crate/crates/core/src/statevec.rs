//! Dense statevector simulation of coset states.
//!
//! Amplitude index `x` is the packed value of a `BitVector`, so qubit 0 is the
//! most significant bit of the index.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gf2::{BitVector, CosetTriple};

/// Default limit on qubits per register (16384 amplitudes).
pub const DEFAULT_QUBIT_CAP: usize = 14;

/// Tolerance used for every state equality check.
pub const STATE_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Validates length and normalisation.
    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if n_qubits >= 64 || amplitudes.len() != 1usize << n_qubits {
            return Err(Error::Parameter(format!(
                "{} amplitudes do not describe {n_qubits} qubits",
                amplitudes.len()
            )));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::Parameter(format!("state norm {norm} is not 1")));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// Computational basis state `|x>`.
    pub fn basis(x: &BitVector) -> Self {
        let n = x.len();
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
        amplitudes[x.index() as usize] = Complex64::new(1.0, 0.0);
        Self { n_qubits: n, amplitudes }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn amplitude(&self, x: &BitVector) -> Complex64 {
        self.amplitudes[x.index() as usize]
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        assert_eq!(self.n_qubits, other.n_qubits);
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Largest per-amplitude absolute difference.
    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        assert_eq!(self.n_qubits, other.n_qubits);
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &StateVector) -> bool {
        self.n_qubits == other.n_qubits && self.max_abs_diff(other) <= STATE_TOL
    }

    /// Basis indices with nonzero amplitude, ascending.
    pub fn support(&self) -> Vec<BitVector> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm_sqr() > 0.0)
            .map(|(i, _)| BitVector::from_index(self.n_qubits, i as u64).expect("index fits"))
            .collect()
    }

    pub fn scaled(&self, factor: Complex64) -> StateVector {
        StateVector {
            n_qubits: self.n_qubits,
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }
}

/// Outcome of a measurement together with its probability and post-state.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord<T> {
    pub outcome: T,
    pub probability: f64,
    pub post_state: StateVector,
}

pub fn check_qubit_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::Resource(format!("{n} qubits exceeds the simulator cap of {cap}")))
    } else {
        Ok(())
    }
}

/// `|A_{s,s'}> = sum_{a in A} (-1)^{<s',a>} |a+s> / sqrt|A|`.
pub fn prepare_coset_state(t: &CosetTriple) -> Result<StateVector> {
    prepare_coset_state_capped(t, DEFAULT_QUBIT_CAP)
}

pub fn prepare_coset_state_capped(t: &CosetTriple, qubit_cap: usize) -> Result<StateVector> {
    let n = t.ambient_dim();
    check_qubit_cap(n, qubit_cap)?;
    let elements = t.space.elements()?;
    let amp = 1.0 / (elements.len() as f64).sqrt();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n];
    for a in elements {
        let sign = if t.s_prime.dot(&a)? { -amp } else { amp };
        let x = a.xor(&t.s)?;
        amplitudes[x.index() as usize] = Complex64::new(sign, 0.0);
    }
    Ok(StateVector { n_qubits: n, amplitudes })
}

/// In-place normalised fast Walsh-Hadamard transform.
pub(crate) fn fwht(amplitudes: &mut [Complex64]) {
    let len = amplitudes.len();
    let mut h = 1;
    while h < len {
        for block in (0..len).step_by(2 * h) {
            for i in block..block + h {
                let (a, b) = (amplitudes[i], amplitudes[i + h]);
                amplitudes[i] = a + b;
                amplitudes[i + h] = a - b;
            }
        }
        h *= 2;
    }
    let scale = 1.0 / (len as f64).sqrt();
    for a in amplitudes.iter_mut() {
        *a *= scale;
    }
}

/// Applies `H` to every qubit.
pub fn hadamard_all(psi: &StateVector) -> StateVector {
    let mut amplitudes = psi.amplitudes.clone();
    fwht(&mut amplitudes);
    StateVector { n_qubits: psi.n_qubits, amplitudes }
}

/// Applies `H` to qubit `q` (bit `q` of the vector, MSB-first).
pub fn hadamard_qubit(psi: &StateVector, q: usize) -> StateVector {
    assert!(q < psi.n_qubits);
    let stride = 1usize << (psi.n_qubits - 1 - q);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut amplitudes = psi.amplitudes.clone();
    for i in 0..amplitudes.len() {
        if i & stride == 0 {
            let (a, b) = (amplitudes[i], amplitudes[i | stride]);
            amplitudes[i] = (a + b) * s;
            amplitudes[i | stride] = (a - b) * s;
        }
    }
    StateVector { n_qubits: psi.n_qubits, amplitudes }
}

/// Samples an index from a list of `(value, weight)` pairs summing to ~1.
pub(crate) fn sample_weighted<T: Clone, R: RngCore + ?Sized>(items: &[(T, f64)], rng: &mut R) -> (T, f64) {
    let total: f64 = items.iter().map(|(_, w)| w).sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (v, w) in items {
        acc += w;
        if u < acc {
            return (v.clone(), *w);
        }
    }
    let (v, w) = items.iter().rev().find(|(_, w)| *w > 0.0).expect("some positive weight");
    (v.clone(), *w)
}

/// Measures every qubit in the computational basis.
pub fn measure_computational<R: RngCore + ?Sized>(psi: &StateVector, rng: &mut R) -> MeasurementRecord<BitVector> {
    let items: Vec<(BitVector, f64)> = psi
        .amplitudes
        .iter()
        .enumerate()
        .filter(|(_, a)| a.norm_sqr() > 0.0)
        .map(|(i, a)| (BitVector::from_index(psi.n_qubits, i as u64).expect("index fits"), a.norm_sqr()))
        .collect();
    let (outcome, probability) = sample_weighted(&items, rng);
    MeasurementRecord { outcome, probability, post_state: StateVector::basis(&outcome) }
}

/// Evaluates `f` into an ancilla register, measures it, and uncomputes.
///
/// The outcome `y` appears with probability equal to the weight of `f^{-1}(y)`
/// and the post-state is the renormalised restriction of `psi`. When `f` is
/// constant on the support the state is returned unchanged. `f` is only
/// evaluated on the support of `psi`.
pub fn coherent_apply_measure<T, F, R>(psi: &StateVector, mut f: F, rng: &mut R) -> Result<MeasurementRecord<T>>
where
    T: Ord + Clone,
    F: FnMut(&BitVector) -> Result<T>,
    R: RngCore + ?Sized,
{
    let mut branches: BTreeMap<T, (f64, Vec<usize>)> = BTreeMap::new();
    for (i, a) in psi.amplitudes.iter().enumerate() {
        let p = a.norm_sqr();
        if p == 0.0 {
            continue;
        }
        let x = BitVector::from_index(psi.n_qubits, i as u64)?;
        let entry = branches.entry(f(&x)?).or_insert((0.0, Vec::new()));
        entry.0 += p;
        entry.1.push(i);
    }
    if branches.len() == 1 {
        let (outcome, _) = branches.into_iter().next().expect("one branch");
        return Ok(MeasurementRecord { outcome, probability: 1.0, post_state: psi.clone() });
    }
    let items: Vec<(T, f64)> = branches.iter().map(|(k, (w, _))| (k.clone(), *w)).collect();
    let (outcome, probability) = sample_weighted(&items, rng);
    let scale = 1.0 / probability.sqrt();
    let mut amplitudes = vec![Complex64::new(0.0, 0.0); psi.amplitudes.len()];
    for &i in &branches[&outcome].1 {
        amplitudes[i] = psi.amplitudes[i] * scale;
    }
    Ok(MeasurementRecord { outcome, probability, post_state: StateVector { n_qubits: psi.n_qubits, amplitudes } })
}
