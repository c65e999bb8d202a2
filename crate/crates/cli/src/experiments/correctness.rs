//! Round-trip and punctured-key correctness suites.

use clonelab_core::bits::BitString;
use clonelab_core::circuit::{standard_family, DEFAULT_MAX_CIRCUIT_BYTES};
use clonelab_core::copy_protect::{
    cp_fe_dec, cp_fe_enc, cp_fe_keygen, cp_fe_qkeygen, cp_fe_setup, cp_pke_dec, cp_pke_enc, cp_pke_qkeygen,
    cp_pke_setup, CpParams,
};
use clonelab_core::fe::{fe_keygen, fe_punc, fe_setup, FeMsk};
use clonelab_core::gf2::{sample_subspace, sample_vector, CosetTriple};
use clonelab_core::ibe::{ibe_keygen, ibe_punc, ibe_setup, IbeMsk};
use clonelab_core::obf::ObfMode;
use clonelab_core::pke::Plaintext;
use clonelab_core::prf::{eval_punctured, prf_eval, prf_keygen, prf_puncture, DEFAULT_SECURITY_BYTES};
use clonelab_core::rng::substream;
use clonelab_core::statevec::{hadamard_all, prepare_coset_state, STATE_TOL};
use clonelab_core::Error as CoreError;
use num_complex::Complex64;
use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Largest domain enumerated by the punctured-key suites, in bits.
pub const MAX_EXHAUSTIVE_BITS: usize = 16;
/// Message length for the FE suites.
pub const FE_MESSAGE_BITS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityResult {
    pub trials: usize,
    pub dims: Vec<usize>,
    /// Triples whose transformed state equals the dual state up to the
    /// global sign `(-1)^<s, s'>`, amplitude by amplitude.
    pub matches: usize,
    /// Triples that also match with no sign correction.
    pub literal_matches: usize,
    pub worst_amplitude_diff: f64,
    pub worst_fidelity_gap: f64,
}

impl DualityResult {
    pub fn pass(&self) -> bool {
        self.matches == self.trials && self.worst_amplitude_diff <= STATE_TOL
    }
}

/// `H^n |A_{s,s'}>` against `|(A^⊥)_{s',s}>` on random triples, cycling `dims`.
pub fn coset_duality(seed: u64, trials: usize, dims: &[usize]) -> Result<DualityResult> {
    if dims.is_empty() || dims.iter().any(|&n| n == 0 || n > 14) {
        return Err(CliError::Config(format!("dims must be nonempty and within 1..=14, got {dims:?}")));
    }
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, bool)> {
            let mut rng = substream(seed, "duality", i as u64);
            let n = dims[i % dims.len()];
            let d = rng.random_range(0..=n);
            let t = CosetTriple::new(sample_subspace(n, d, &mut rng)?, sample_vector(n, &mut rng), sample_vector(n, &mut rng))?;
            let lhs = hadamard_all(&prepare_coset_state(&t)?);
            let rhs = prepare_coset_state(&t.dual())?;
            let sign = if t.s.dot(&t.s_prime)? { -1.0 } else { 1.0 };
            let diff = lhs.max_abs_diff(&rhs.scaled(Complex64::new(sign, 0.0)));
            Ok((diff, 1.0 - lhs.fidelity(&rhs), lhs.approx_eq(&rhs)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DualityResult {
        trials,
        dims: dims.to_vec(),
        matches: rows.iter().filter(|r| r.0 <= STATE_TOL).count(),
        literal_matches: rows.iter().filter(|r| r.2).count(),
        worst_amplitude_diff: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        worst_fidelity_gap: rows.iter().map(|r| r.1.abs()).fold(0.0, f64::max),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTripResult {
    pub scheme: String,
    pub trials: usize,
    pub correct: usize,
    /// Largest amplitude change of a key register across one decryption.
    pub worst_state_change: f64,
}

impl RoundTripResult {
    pub fn pass(&self) -> bool {
        self.correct == self.trials && self.worst_state_change <= STATE_TOL
    }
}

/// Fresh key, random message, encrypt, decrypt; one instance per run.
pub fn cp_pke_round_trips(seed: u64, params: CpParams, trials: usize) -> Result<RoundTripResult> {
    let inst = cp_pke_setup(params, &mut substream(seed, "cp-pke/setup", 0))?;
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(bool, f64)> {
            let mut rng = substream(seed, "cp-pke", i as u64);
            let key = cp_pke_qkeygen(&inst, &mut rng)?;
            let mut m = vec![0u8; rng.random_range(0..=16)];
            rng.fill_bytes(&mut m);
            let m = Plaintext::Message(m);
            let ct = cp_pke_enc(&inst.pk, &m, &mut rng)?;
            let (got, after) = cp_pke_dec(&key, &ct, &mut rng)?;
            Ok((got == Some(m), key.registers.max_abs_diff(&after.registers)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(round_trip("cp-pke", trials, &rows))
}

/// Like [`cp_pke_round_trips`], with a random function from the standard family.
pub fn cp_fe_round_trips(seed: u64, params: CpParams, trials: usize) -> Result<RoundTripResult> {
    let inst = cp_fe_setup(params, &mut substream(seed, "cp-fe/setup", 0))?;
    let family = standard_family(FE_MESSAGE_BITS, inst.pk.params.q)?;
    let rows = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(bool, f64)> {
            let mut rng = substream(seed, "cp-fe", i as u64);
            let f = &family[rng.random_range(0..family.len())].1;
            let m = BitString::random(FE_MESSAGE_BITS, &mut rng);
            let key = cp_fe_qkeygen(&cp_fe_keygen(&inst, f, &mut rng)?, inst.pk.params.qubit_cap)?;
            let ct = cp_fe_enc(&inst.pk, &m, &mut rng)?;
            let (got, after) = cp_fe_dec(&key, &ct, &mut rng)?;
            Ok((got == Some(f.eval(&m)?), key.registers.max_abs_diff(&after.registers)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(round_trip("cp-fe", trials, &rows))
}

fn round_trip(scheme: &str, trials: usize, rows: &[(bool, f64)]) -> RoundTripResult {
    RoundTripResult {
        scheme: scheme.into(),
        trials,
        correct: rows.iter().filter(|r| r.0).count(),
        worst_state_change: rows.iter().map(|r| r.1).fold(0.0, f64::max),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuncturedResult {
    pub scheme: String,
    pub trials: usize,
    pub input_len: usize,
    /// Off-set points (or admissible functions) checked against the full key.
    pub agreements_checked: usize,
    pub disagreements: usize,
    /// Points (or functions) the punctured key had to refuse.
    pub refusals_expected: usize,
    pub refusals_observed: usize,
}

impl PuncturedResult {
    pub fn pass(&self) -> bool {
        self.disagreements == 0 && self.refusals_expected == self.refusals_observed
    }
}

#[derive(Default)]
struct Tally {
    checked: usize,
    wrong: usize,
    expected: usize,
    refused: usize,
}

impl Tally {
    fn add(mut self, o: Tally) -> Tally {
        self.checked += o.checked;
        self.wrong += o.wrong;
        self.expected += o.expected;
        self.refused += o.refused;
        self
    }

    fn into_result(self, scheme: &str, trials: usize, input_len: usize) -> PuncturedResult {
        PuncturedResult {
            scheme: scheme.into(),
            trials,
            input_len,
            agreements_checked: self.checked,
            disagreements: self.wrong,
            refusals_expected: self.expected,
            refusals_observed: self.refused,
        }
    }
}

fn check_exhaustive(input_len: usize) -> Result<()> {
    if input_len == 0 || input_len > MAX_EXHAUSTIVE_BITS {
        return Err(CliError::Config(format!("input length must be within 1..={MAX_EXHAUSTIVE_BITS}, got {input_len}")));
    }
    Ok(())
}

fn sum_tallies(seed: u64, label: &str, trials: usize, f: impl Fn(&mut dyn RngCore) -> Result<Tally> + Sync) -> Result<Tally> {
    (0..trials)
        .into_par_iter()
        .map(|i| f(&mut substream(seed, label, i as u64)))
        .try_reduce(Tally::default, |a, b| Ok(a.add(b)))
}

/// `F(K_S, y) = F(K, y)` for every `y` outside a random set `S` of 1 to 4 points.
pub fn prf_punctured(seed: u64, input_len: usize, trials: usize) -> Result<PuncturedResult> {
    check_exhaustive(input_len)?;
    let tally = sum_tallies(seed, "prf", trials, |rng| {
        let key = prf_keygen(DEFAULT_SECURITY_BYTES, input_len, 128, rng)?;
        let size = rng.random_range(1..=4usize.min(1 << input_len));
        let mut points: Vec<BitString> = Vec::new();
        while points.len() < size {
            let p = BitString::random(input_len, rng);
            if !points.contains(&p) {
                points.push(p);
            }
        }
        let punctured = prf_puncture(&key, &points)?;
        let mut t = Tally { expected: points.len(), ..Tally::default() };
        for y in 0..1u64 << input_len {
            let y = BitString::from_u64(y, input_len);
            match eval_punctured(&punctured, &y) {
                Err(CoreError::PuncturedPoint) if points.contains(&y) => t.refused += 1,
                Ok(v) if !points.contains(&y) => {
                    t.checked += 1;
                    t.wrong += (v != prf_eval(&key, &y)?) as usize;
                }
                Err(e) if !matches!(e, CoreError::PuncturedPoint) => return Err(e.into()),
                _ => t.wrong += 1,
            }
        }
        Ok(t)
    })?;
    Ok(tally.into_result("prf", trials, input_len))
}

/// Keys from the punctured master key equal full-key keys byte for byte on every other identity.
pub fn ibe_punctured(seed: u64, id_len: usize, trials: usize) -> Result<PuncturedResult> {
    check_exhaustive(id_len)?;
    let tally = sum_tallies(seed, "ibe", trials, |rng| {
        let inst = ibe_setup(id_len, ObfMode::Sealed, rng)?;
        let full = IbeMsk::Full(inst.msk.clone());
        let star = BitString::random(id_len, rng);
        let punctured = ibe_punc(&inst.msk, &star)?;
        let mut t = Tally { expected: 1, ..Tally::default() };
        for x in 0..1u64 << id_len {
            let id = BitString::from_u64(x, id_len);
            match ibe_keygen(&punctured, &id) {
                Err(CoreError::PuncturedPoint) if id == star => t.refused += 1,
                Ok(sk) if id != star => {
                    t.checked += 1;
                    t.wrong += (sk.to_bytes() != ibe_keygen(&full, &id)?.to_bytes()) as usize;
                }
                Err(e) if !matches!(e, CoreError::PuncturedPoint) => return Err(e.into()),
                _ => t.wrong += 1,
            }
        }
        Ok(t)
    })?;
    Ok(tally.into_result("ibe", trials, id_len))
}

/// The punctured FE master key refuses exactly the functions separating `m0` from `m1`.
pub fn fe_punctured(seed: u64, trials: usize) -> Result<PuncturedResult> {
    let q = DEFAULT_MAX_CIRCUIT_BYTES;
    let family = standard_family(FE_MESSAGE_BITS, q)?;
    let tally = sum_tallies(seed, "fe", trials, |rng| {
        let inst = fe_setup(q, ObfMode::Sealed, rng)?;
        let full = FeMsk::Full(inst.msk.clone());
        let m0 = BitString::random(FE_MESSAGE_BITS, rng);
        let mut m1 = BitString::random(FE_MESSAGE_BITS, rng);
        while m1 == m0 {
            m1 = BitString::random(FE_MESSAGE_BITS, rng);
        }
        let pmsk = fe_punc(&inst.msk, &m0, &m1, ObfMode::Sealed)?;
        let mut t = Tally::default();
        for (_, f) in &family {
            let separating = f.eval(&m0)? != f.eval(&m1)?;
            let got = fe_keygen(&pmsk, f)?;
            if separating {
                t.expected += 1;
                t.refused += got.is_none() as usize;
                t.wrong += got.is_some() as usize;
            } else {
                t.checked += 1;
                t.wrong += (got.is_none() || got != fe_keygen(&full, f)?) as usize;
            }
        }
        Ok(t)
    })?;
    Ok(tally.into_result("fe", trials, 8 * q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        let d = coset_duality(1, 24, &[1, 3, 5]).unwrap();
        assert!(d.pass(), "{d:?}");
        assert!(d.literal_matches < d.trials);
        assert!(prf_punctured(2, 5, 3).unwrap().pass());
        assert!(ibe_punctured(3, 4, 2).unwrap().pass());
        let fe = fe_punctured(4, 2).unwrap();
        assert!(fe.pass() && fe.agreements_checked + fe.refusals_expected == 16, "{fe:?}");
    }

    #[test]
    fn round_trips_pass_at_small_scale() {
        let params = CpParams::new(8, 4, 2, 2).unwrap();
        assert!(cp_pke_round_trips(5, params, 4).unwrap().pass());
        assert!(cp_fe_round_trips(6, params, 4).unwrap().pass());
    }

    #[test]
    fn oversized_domains_are_config_errors() {
        assert!(matches!(prf_punctured(0, 17, 1), Err(CliError::Config(_))));
        assert!(matches!(coset_duality(0, 1, &[]), Err(CliError::Config(_))));
    }
}
