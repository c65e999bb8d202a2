//! Decryptor testing as a mixture of projective measurements.
//!
//! A freeloader is a density matrix over a finite set of deterministic
//! strategies. Each ciphertext `ct_j` (encrypting `m_{b_j}`) in a finite
//! support contributes the diagonal projector onto the strategies that
//! answer `b_j`, weighted by its probability.

use clonelab_measure::linalg::{c, CMat, CVec};
use clonelab_measure::{apply_projective, pi, threshold, Api, DensityMatrix, MeasureParams, ProjectiveMixture, ThresholdKind};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::copy_protect::{cp_pke_enc_with_r, CpCiphertext, CpPublicKey};
use crate::error::{Error, Result};
use crate::pke::Plaintext;

/// Largest strategy space a register may range over.
pub const MAX_STRATEGIES: usize = 64;
/// Cap on strategies times support points.
const MAX_EXTENDED_DIM: usize = 4096;
/// Largest challenge-string length enumerated by [`honest_support`].
const MAX_SUPPORT_BITS: usize = 10;

/// A deterministic freeloader: ciphertext in, guess for `b` out.
pub type DecryptorStrategy = Box<dyn Fn(&CpCiphertext) -> Result<bool> + Send + Sync>;

#[derive(Clone, Debug)]
pub struct CiphertextPoint {
    pub b: bool,
    pub ct: CpCiphertext,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecryptorMode {
    Pi,
    Api,
    Ti,
    Ati,
}

impl std::str::FromStr for DecryptorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pi" => Ok(DecryptorMode::Pi),
            "api" => Ok(DecryptorMode::Api),
            "ti" => Ok(DecryptorMode::Ti),
            "ati" => Ok(DecryptorMode::Ati),
            _ => Err(Error::Parameter(format!("unknown decryptor-test mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecryptorOutcome {
    Estimate(f64),
    /// Threshold modes: whether the register passed `p.eta`.
    Bit(bool),
}

/// Both messages under every challenge string, uniformly weighted. Each
/// point fixes one draw of the remaining encryption coins.
pub fn honest_support<R: RngCore + ?Sized>(
    pk: &CpPublicKey,
    m0: &Plaintext,
    m1: &Plaintext,
    rng: &mut R,
) -> Result<Vec<CiphertextPoint>> {
    let c = pk.params.coset.count;
    if c > MAX_SUPPORT_BITS {
        return Err(Error::Resource(format!("2^{c} challenge strings exceed the enumeration cap")));
    }
    let weight = 1.0 / (2u64 << c) as f64;
    let mut out = Vec::with_capacity(2 << c);
    for (b, m) in [(false, m0), (true, m1)] {
        for r in 0..1u64 << c {
            let ct = cp_pke_enc_with_r(pk, m, &BitString::from_u64(r, c), rng)?;
            out.push(CiphertextPoint { b, ct, weight });
        }
    }
    Ok(out)
}

/// `{(P_j, w_j)}` with `P_j = diag[s(ct_j) == b_j]` over the strategy space.
pub fn decryptor_mixture(strategies: &[DecryptorStrategy], support: &[CiphertextPoint]) -> Result<ProjectiveMixture> {
    if strategies.is_empty() || strategies.len() > MAX_STRATEGIES {
        return Err(Error::Resource(format!("{} strategies, between 1 and {MAX_STRATEGIES} allowed", strategies.len())));
    }
    if support.is_empty() {
        return Err(Error::Parameter("empty ciphertext support".into()));
    }
    if strategies.len() * support.len() > MAX_EXTENDED_DIM {
        return Err(Error::Resource(format!(
            "{} strategies over {} ciphertexts exceed the cap of {MAX_EXTENDED_DIM}",
            strategies.len(),
            support.len()
        )));
    }
    let entries = support
        .iter()
        .map(|pt| {
            let diag = strategies
                .iter()
                .map(|s| Ok(c(if s(&pt.ct)? == pt.b { 1.0 } else { 0.0 })))
                .collect::<Result<Vec<_>>>()?;
            Ok((CMat::from_diagonal(&CVec::from_vec(diag)), pt.weight))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectiveMixture::new(entries)?)
}

/// Runs the chosen measurement on `register`; returns the outcome and the
/// post-measurement register.
pub fn decryptor_test<R: RngCore + ?Sized>(
    register: &DensityMatrix,
    strategies: &[DecryptorStrategy],
    support: &[CiphertextPoint],
    p: &MeasureParams,
    mode: DecryptorMode,
    rng: &mut R,
) -> Result<(DecryptorOutcome, DensityMatrix)> {
    p.validate()?;
    if register.dim() != strategies.len() {
        return Err(Error::Parameter(format!(
            "register of dimension {} over {} strategies",
            register.dim(),
            strategies.len()
        )));
    }
    let mixture = decryptor_mixture(strategies, support)?;
    Ok(match mode {
        DecryptorMode::Pi => {
            let res = apply_projective(&pi(&clonelab_measure::mixture_to_povm(&mixture))?, register, rng)?;
            (DecryptorOutcome::Estimate(res.value), res.post)
        }
        DecryptorMode::Api => {
            let out = Api::new(&mixture, p)?.measure(register, rng)?;
            (DecryptorOutcome::Estimate(out.estimate), out.post)
        }
        DecryptorMode::Ti | DecryptorMode::Ati => {
            let kind = if mode == DecryptorMode::Ti { ThresholdKind::Exact } else { ThresholdKind::Approximate };
            let (bit, post) = threshold(kind, &mixture, p, register, rng)?;
            (DecryptorOutcome::Bit(bit), post)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::copy_protect::{cp_pke_setup, CpParams};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn support(seed: u64) -> Vec<CiphertextPoint> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let inst = cp_pke_setup(CpParams::new(8, 4, 2, 2).unwrap(), &mut rng).unwrap();
        honest_support(&inst.pk, &Plaintext::Message(vec![0]), &Plaintext::Message(vec![1]), &mut rng).unwrap()
    }

    fn constant(v: bool) -> DecryptorStrategy {
        Box::new(move |_| Ok(v))
    }

    #[test]
    fn support_enumerates_both_messages_and_all_strings() {
        let s = support(1);
        assert_eq!(s.len(), 8);
        assert!((s.iter().map(|p| p.weight).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(s.iter().filter(|p| p.b).count(), 4);
    }

    #[test]
    fn coin_flip_register_sits_at_one_half() {
        let s = support(2);
        let strategies = vec![constant(false), constant(true)];
        let rho = DensityMatrix::maximally_mixed(2);
        let p = MeasureParams::new(0.05, 0.05, 0.5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let (out, _) = decryptor_test(&rho, &strategies, &s, &p, DecryptorMode::Pi, &mut rng).unwrap();
        assert!(matches!(out, DecryptorOutcome::Estimate(v) if (v - 0.5).abs() < 1e-9));
        let (out, _) = decryptor_test(&rho, &strategies, &s, &p, DecryptorMode::Ti, &mut rng).unwrap();
        assert_eq!(out, DecryptorOutcome::Bit(true));
        let (out, _) = decryptor_test(&rho, &strategies, &s, &p.with_eta(0.6), DecryptorMode::Ti, &mut rng).unwrap();
        assert_eq!(out, DecryptorOutcome::Bit(false));
    }

    #[test]
    fn caps_and_shapes_are_enforced() {
        let s = support(4);
        let many: Vec<DecryptorStrategy> = (0..65).map(|i| constant(i % 2 == 0)).collect();
        assert!(decryptor_mixture(&many, &s).unwrap_err().is_resource());
        let p = MeasureParams::new(0.1, 0.1, 0.5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        let rho = DensityMatrix::maximally_mixed(3);
        assert!(decryptor_test(&rho, &[constant(true)], &s, &p, DecryptorMode::Pi, &mut rng).is_err());
        assert!("nope".parse::<DecryptorMode>().is_err());
        assert_eq!("ATI".parse::<DecryptorMode>().unwrap(), DecryptorMode::Ati);
    }
}
