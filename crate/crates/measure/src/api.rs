//! Approximate projective and threshold implementations.
//!
//! The estimator alternates two binary projective measurements on the
//! extended space `control ⊗ system`:
//!
//! * `Pi_ctrl = |D><D| ⊗ I` with `|D> = sum_i sqrt(D(i)) |i>`,
//! * `Pi_acc  = sum_i |i><i| ⊗ P_i`.
//!
//! Starting from `|D> ⊗ rho`, the outcomes `o_0 = 1, o_1, o_2, ...` alternate
//! between the two measurements. The estimate is the fraction of agreeing
//! consecutive pairs among the first `T` transitions. Afterwards the chain keeps
//! alternating until a control measurement reports 1, which returns the state
//! to the system register.
//!
//! Inside the Jordan block attached to an eigenvector of `E = sum_i D(i) P_i`
//! with eigenvalue `p`, every transition agrees independently with probability
//! `p`, and the Kraus operator of a full outcome record with `a` agreements out
//! of `t` transitions is `± sum_k sqrt(p_k^a (1-p_k)^(t-a)) Pi_k` on the system,
//! where `Pi_k` are the eigenprojectors of `E`. [`Api::measure`] samples from
//! that closed form; [`api_reference`] runs the alternating projections on the
//! extended space and is used to cross-check it.

use rand::{Rng, RngCore};
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial as BinomialDist, DiscreteCDF};

use crate::linalg::{self, c, CMat, CVec};
use crate::pi::{at_least, at_most, pi, PiMeasurement};
use crate::povm::{mixture_to_povm, ProjectiveMixture};
use crate::shift::FiniteDistribution;
use crate::state::{check_dim, DensityMatrix};
use crate::MeasureError;

/// Default limit on `|support(D)| * dim` for the extended space.
pub const DEFAULT_EXT_DIM_CAP: usize = 4096;

/// Transition budget for the return phase of [`api_reference`].
const REFERENCE_RETURN_CAP: u64 = 10_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureParams {
    pub epsilon: f64,
    pub delta: f64,
    pub eta: f64,
}

impl MeasureParams {
    pub fn new(epsilon: f64, delta: f64, eta: f64) -> Result<Self, MeasureError> {
        let p = Self { epsilon, delta, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MeasureError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) || !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(MeasureError::Parameter(format!(
                "need 0 < epsilon, delta <= 1, got ({}, {})",
                self.epsilon, self.delta
            )));
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return Err(MeasureError::Parameter(format!("threshold {} outside [0, 1]", self.eta)));
        }
        Ok(())
    }

    /// `ceil(ln(4/delta) / epsilon^2)` estimation transitions.
    pub fn rounds(&self) -> usize {
        ((4.0 / self.delta).ln() / (self.epsilon * self.epsilon)).ceil() as usize
    }

    pub fn with_eta(&self, eta: f64) -> Self {
        Self { eta, ..*self }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ApiOutcome {
    pub estimate: f64,
    /// Agreements over the whole record, return phase included.
    pub agreements: u64,
    /// Transitions over the whole record, return phase included.
    pub transitions: u64,
    pub post: DensityMatrix,
}

/// A prepared approximate projective implementation.
#[derive(Clone, Debug)]
pub struct Api {
    pi: PiMeasurement,
    rounds: usize,
    mixture_len: usize,
}

impl Api {
    pub fn new(m: &ProjectiveMixture, p: &MeasureParams) -> Result<Self, MeasureError> {
        p.validate()?;
        Self::with_rounds(m, p.rounds(), DEFAULT_EXT_DIM_CAP)
    }

    pub fn with_rounds(m: &ProjectiveMixture, rounds: usize, ext_dim_cap: usize) -> Result<Self, MeasureError> {
        let ext = m.len() * m.dim();
        if ext > ext_dim_cap {
            return Err(MeasureError::Resource(format!(
                "extended dimension {ext} exceeds the cap of {ext_dim_cap}"
            )));
        }
        if rounds == 0 {
            return Err(MeasureError::Parameter("API needs at least one round".into()));
        }
        Ok(Self { pi: pi(&mixture_to_povm(m))?, rounds, mixture_len: m.len() })
    }

    pub fn pi(&self) -> &PiMeasurement {
        &self.pi
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn extended_dim(&self) -> usize {
        self.mixture_len * self.pi.dim()
    }

    pub fn measure<R: RngCore + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> Result<ApiOutcome, MeasureError> {
        check_dim(self.pi.dim(), rho.dim())?;
        self.measure_in(rho, self.pi.basis().clone(), self.pi.cluster_of().to_vec(), rng)
    }

    /// Applies the measurement to register `reg` of a multipartite state.
    pub fn measure_register<R: RngCore + ?Sized>(
        &self,
        rho: &DensityMatrix,
        dims: &[usize],
        reg: usize,
        rng: &mut R,
    ) -> Result<ApiOutcome, MeasureError> {
        check_dim(dims.iter().product(), rho.dim())?;
        check_dim(self.pi.dim(), dims[reg])?;
        let w = linalg::embed(self.pi.basis(), dims, reg);
        let after: usize = dims[reg + 1..].iter().product();
        let cluster_of = (0..rho.dim()).map(|idx| self.pi.cluster_of()[(idx / after) % dims[reg]]).collect();
        self.measure_in(rho, w, cluster_of, rng)
    }

    fn measure_in<R: RngCore + ?Sized>(
        &self,
        rho: &DensityMatrix,
        w: CMat,
        cluster_of: Vec<usize>,
        rng: &mut R,
    ) -> Result<ApiOutcome, MeasureError> {
        let values = self.pi.values();
        let rot = w.adjoint() * rho.matrix() * &w;
        let mut q = vec![0.0; values.len()];
        for (i, &k) in cluster_of.iter().enumerate() {
            q[k] += rot[(i, i)].re.max(0.0);
        }
        let k = sample_index(&q, rng)?;
        let p = values[k];
        let t = self.rounds as u64;
        let a = Binomial::new(t, p).map_err(|e| MeasureError::Sampling(e.to_string()))?.sample(rng);
        let (mut agreements, mut transitions) = (a, t);
        // Label of o_t: o_0 = 1 and every disagreement flips it.
        let mut label = (t - a) % 2 == 0;
        if t % 2 == 1 {
            // o_t came from Pi_acc; one more step lands on a control outcome.
            transitions += 1;
            if rng.random::<f64>() < p {
                agreements += 1;
            } else {
                label = !label;
            }
        }
        if !label {
            // Control-to-control steps stay at 0 w.p. p^2 + (1-p)^2.
            let back = 2.0 * p * (1.0 - p);
            if !(back > 0.0) {
                return Err(MeasureError::Sampling("return phase cannot terminate".into()));
            }
            let stays = Geometric::new(back).map_err(|e| MeasureError::Sampling(e.to_string()))?.sample(rng);
            let both_agree = p * p / (p * p + (1.0 - p) * (1.0 - p));
            let doubles =
                Binomial::new(stays, both_agree).map_err(|e| MeasureError::Sampling(e.to_string()))?.sample(rng);
            agreements += 2 * doubles + 1;
            transitions += 2 * (stays + 1);
        }
        let post = kraus_post_state(&rot, &w, &cluster_of, &values, &q, agreements, transitions)?;
        Ok(ApiOutcome { estimate: a as f64 / t as f64, agreements, transitions, post })
    }

    /// `P[a/T >= eta]` for the hidden outcome with eigenvalue `p`.
    pub fn prob_estimate_at_least(&self, p: f64, eta: f64) -> f64 {
        binomial_fraction_at_least(self.rounds as u64, p, eta)
    }

    /// `P[a/T <= eta]` for the hidden outcome with eigenvalue `p`.
    pub fn prob_estimate_at_most(&self, p: f64, eta: f64) -> f64 {
        binomial_fraction_at_most(self.rounds as u64, p, eta)
    }

    /// Exact distribution of the estimate given PI outcome weights `q`.
    pub fn estimate_distribution(&self, q: &[f64]) -> Result<FiniteDistribution, MeasureError> {
        let t = self.rounds as u64;
        let mut probs = vec![0.0; self.rounds + 1];
        for (&p, &w) in self.pi.values().iter().zip(q) {
            if w == 0.0 {
                continue;
            }
            let b = BinomialDist::new(p, t).map_err(|e| MeasureError::Parameter(e.to_string()))?;
            let mut prev = 0.0;
            for (a, slot) in probs.iter_mut().enumerate() {
                let cdf = b.cdf(a as u64);
                *slot += w * (cdf - prev).max(0.0);
                prev = cdf;
            }
        }
        FiniteDistribution::new(probs.iter().enumerate().map(|(a, &w)| (a as f64 / t as f64, w)).collect())
    }

    /// `Tr[ATI_eta rho]` in closed form.
    pub fn ati_probability(&self, rho: &DensityMatrix, eta: f64) -> Result<f64, MeasureError> {
        let q = self.pi.outcome_probabilities(rho)?;
        Ok(q.iter().zip(self.pi.values()).map(|(w, p)| w * self.prob_estimate_at_least(p, eta)).sum())
    }
}

fn sample_index<R: RngCore + ?Sized>(weights: &[f64], rng: &mut R) -> Result<usize, MeasureError> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Err(MeasureError::Sampling("no outcome has weight".into()));
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc && w > 0.0 {
            return Ok(i);
        }
    }
    Ok(weights.iter().rposition(|&w| w > 0.0).expect("positive total"))
}

fn log_weight(p: f64, agreements: u64, disagreements: u64) -> f64 {
    let term = |count: u64, x: f64| if count == 0 { 0.0 } else { count as f64 * x.ln() };
    term(agreements, p) + term(disagreements, 1.0 - p)
}

/// `sum_{k,k'} sqrt(W_k W_k') Pi_k rho Pi_k'`, normalised, computed in the eigenbasis.
fn kraus_post_state(
    rot: &CMat,
    w: &CMat,
    cluster_of: &[usize],
    values: &[f64],
    q: &[f64],
    agreements: u64,
    transitions: u64,
) -> Result<DensityMatrix, MeasureError> {
    let logs: Vec<f64> = values.iter().map(|&p| log_weight(p, agreements, transitions - agreements)).collect();
    let top = logs
        .iter()
        .zip(q)
        .filter(|(l, &w)| w > 0.0 && l.is_finite())
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    let scale: Vec<f64> = logs.iter().map(|l| ((l - top) / 2.0).exp()).collect();
    let n = rot.nrows();
    let mut shaped = rot.clone();
    for i in 0..n {
        for j in 0..n {
            shaped[(i, j)] *= c(scale[cluster_of[i]] * scale[cluster_of[j]]);
        }
    }
    DensityMatrix::from_unnormalized(w * shaped * w.adjoint())
}

fn count_at_least(t: u64, eta: f64) -> u64 {
    let mut a = ((eta * t as f64).ceil().max(0.0) as u64).min(t + 1);
    while a > 0 && at_least((a - 1) as f64 / t as f64, eta) {
        a -= 1;
    }
    while a <= t && !at_least(a as f64 / t as f64, eta) {
        a += 1;
    }
    a
}

/// `P[X/t >= eta]` for `X ~ Bin(t, p)`, with the shared comparison tolerance.
pub fn binomial_fraction_at_least(t: u64, p: f64, eta: f64) -> f64 {
    let a = count_at_least(t, eta);
    if a == 0 {
        return 1.0;
    }
    if a > t {
        return 0.0;
    }
    BinomialDist::new(p.clamp(0.0, 1.0), t).expect("valid binomial").sf(a - 1)
}

/// `P[X/t <= eta]` for `X ~ Bin(t, p)`, with the shared comparison tolerance.
pub fn binomial_fraction_at_most(t: u64, p: f64, eta: f64) -> f64 {
    let mut a = ((eta * t as f64).floor().max(-1.0)) as i64;
    a = a.min(t as i64);
    while a < t as i64 && at_most((a + 1) as f64 / t as f64, eta) {
        a += 1;
    }
    while a >= 0 && !at_most(a as f64 / t as f64, eta) {
        a -= 1;
    }
    if a < 0 {
        return 0.0;
    }
    BinomialDist::new(p.clamp(0.0, 1.0), t).expect("valid binomial").cdf(a as u64)
}

/// Builds the API and measures once.
pub fn api<R: RngCore + ?Sized>(
    m: &ProjectiveMixture,
    p: &MeasureParams,
    rho: &DensityMatrix,
    rng: &mut R,
) -> Result<ApiOutcome, MeasureError> {
    Api::new(m, p)?.measure(rho, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdKind {
    Exact,
    Approximate,
}

/// `TI_eta` (exact) or `ATI^{eps,delta}_eta` (approximate).
pub fn threshold<R: RngCore + ?Sized>(
    kind: ThresholdKind,
    m: &ProjectiveMixture,
    p: &MeasureParams,
    rho: &DensityMatrix,
    rng: &mut R,
) -> Result<(bool, DensityMatrix), MeasureError> {
    p.validate()?;
    match kind {
        ThresholdKind::Exact => {
            let pim = pi(&mixture_to_povm(m))?;
            check_dim(pim.dim(), rho.dim())?;
            let accept = pim.threshold_projector(p.eta);
            let pa = rho.expectation(&accept).clamp(0.0, 1.0);
            let bit = rng.random::<f64>() < pa;
            let proj = if bit { accept } else { linalg::identity(rho.dim()) - accept };
            let (post, _) = rho.conjugate_normalized(&proj)?;
            Ok((bit, post))
        }
        ThresholdKind::Approximate => {
            let out = Api::new(m, p)?.measure(rho, rng)?;
            Ok((at_least(out.estimate, p.eta), out.post))
        }
    }
}

/// Direct simulation on the extended space (single register only).
///
/// A pure component of `rho` is drawn from its eigen-ensemble and evolved as a
/// trajectory, so the returned post-state is that trajectory's state. Averaged
/// over runs it matches [`Api::measure`].
pub fn api_reference<R: RngCore + ?Sized>(
    m: &ProjectiveMixture,
    rounds: usize,
    rho: &DensityMatrix,
    ext_dim_cap: usize,
    rng: &mut R,
) -> Result<ApiOutcome, MeasureError> {
    check_dim(m.dim(), rho.dim())?;
    let (n, d) = (m.len(), m.dim());
    if n * d > ext_dim_cap {
        return Err(MeasureError::Resource(format!("extended dimension {} exceeds the cap of {ext_dim_cap}", n * d)));
    }
    let ensemble = rho.pure_ensemble()?;
    let weights: Vec<f64> = ensemble.iter().map(|(w, _)| *w).collect();
    let psi = &ensemble[sample_index(&weights, rng)?].1;
    let sqrt_d: Vec<f64> = m.weights().iter().map(|w| w.sqrt()).collect();
    let mut blocks: Vec<CVec> = sqrt_d.iter().map(|&s| psi.scale(s)).collect();

    let mut last = true;
    let (mut agreements, mut transitions, mut estimation_agreements) = (0u64, 0u64, 0u64);
    let mut step = 0u64;
    loop {
        step += 1;
        let acc_step = step % 2 == 1;
        let (kept, dropped) = if acc_step {
            let kept: Vec<CVec> = blocks.iter().zip(m.projectors()).map(|(b, p)| p * b).collect();
            let dropped: Vec<CVec> = blocks.iter().zip(&kept).map(|(b, k)| b - k).collect();
            (kept, dropped)
        } else {
            let mut phi = CVec::zeros(d);
            for (b, &s) in blocks.iter().zip(&sqrt_d) {
                phi += b.scale(s);
            }
            let kept: Vec<CVec> = sqrt_d.iter().map(|&s| phi.scale(s)).collect();
            let dropped: Vec<CVec> = blocks.iter().zip(&kept).map(|(b, k)| b - k).collect();
            (kept, dropped)
        };
        let p1: f64 = kept.iter().map(|v| v.norm_squared()).sum();
        let outcome = rng.random::<f64>() < p1;
        let chosen = if outcome { kept } else { dropped };
        let norm: f64 = chosen.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        blocks = chosen.into_iter().map(|v| v.unscale(norm)).collect();
        transitions += 1;
        if outcome == last {
            agreements += 1;
        }
        last = outcome;
        if transitions == rounds as u64 {
            estimation_agreements = agreements;
        }
        if transitions >= rounds as u64 && !acc_step && outcome {
            break;
        }
        if transitions > rounds as u64 + REFERENCE_RETURN_CAP {
            return Err(MeasureError::Sampling("return phase exceeded its transition budget".into()));
        }
    }
    let mut phi = CVec::zeros(d);
    for (b, &s) in blocks.iter().zip(&sqrt_d) {
        phi += b.scale(s);
    }
    let phi = phi.unscale(phi.norm());
    Ok(ApiOutcome {
        estimate: estimation_agreements as f64 / rounds as f64,
        agreements,
        transitions,
        post: DensityMatrix::pure(&phi)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_projector, random_unitary};
    use crate::shift::shift_distance;
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_mixture(dim: usize, len: usize, rng: &mut ChaCha20Rng) -> ProjectiveMixture {
        let entries = (0..len)
            .map(|_| {
                let rank = rng.random_range(0..=dim);
                (random_projector(dim, rank, rng), rng.random::<f64>() + 0.1)
            })
            .collect();
        ProjectiveMixture::from_unnormalized(entries).unwrap()
    }

    fn diag(vals: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v))))
    }

    /// Exact branch for a forced outcome record, on the extended space.
    fn forced_branch(m: &ProjectiveMixture, rho: &DensityMatrix, record: &[bool]) -> (f64, CMat) {
        let (n, d) = (m.len(), m.dim());
        let dvec = CMat::from_iterator(n, 1, m.weights().iter().map(|w| c(w.sqrt())));
        let ctrl = linalg::kron(&(&dvec * dvec.adjoint()), &linalg::identity(d));
        let mut acc = CMat::zeros(n * d, n * d);
        for (i, p) in m.projectors().iter().enumerate() {
            let mut e = CMat::zeros(n, n);
            e[(i, i)] = c(1.0);
            acc += linalg::kron(&e, p);
        }
        let lift = linalg::kron(&dvec, &linalg::identity(d));
        let mut state = &lift * rho.matrix() * lift.adjoint();
        for (j, &o) in record.iter().enumerate() {
            let proj = if j % 2 == 0 { acc.clone() } else { ctrl.clone() };
            let proj = if o { proj } else { linalg::identity(n * d) - proj };
            state = &proj * state * &proj;
        }
        let prob = state.trace().re;
        let back = lift.adjoint() * state * &lift;
        (prob, back.unscale(back.trace().re))
    }

    #[test]
    fn rounds_follow_the_formula() {
        assert_eq!(MeasureParams::new(0.05, 0.05, 0.5).unwrap().rounds(), 1753);
        assert!(MeasureParams::new(0.0, 0.1, 0.5).is_err());
        assert!(MeasureParams::new(0.1, 0.1, 1.5).is_err());
    }

    #[test]
    fn kraus_closed_form_matches_forced_extended_evolution() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..20 {
            let m = random_mixture(3, 3, &mut rng);
            let rho = DensityMatrix::random_any_rank(3, &mut rng);
            let api = Api::with_rounds(&m, 6, 1000).unwrap();
            let len = 6 + 2 * rng.random_range(0..3);
            let mut record: Vec<bool> = (0..len).map(|_| rng.random()).collect();
            *record.last_mut().unwrap() = true;
            let (prob, post) = forced_branch(&m, &rho, &record);
            let mut last = true;
            let mut agree = 0u64;
            for &o in &record {
                agree += (o == last) as u64;
                last = o;
            }
            let values = api.pi.values();
            let q = api.pi.outcome_probabilities(&rho).unwrap();
            let closed: f64 = values
                .iter()
                .zip(&q)
                .map(|(&p, &w)| w * log_weight(p, agree, len as u64 - agree).exp())
                .sum();
            assert!((prob - closed).abs() < 1e-10, "{prob} vs {closed}");
            if prob > 1e-9 {
                let rot = api.pi.basis().adjoint() * rho.matrix() * api.pi.basis();
                let fast = kraus_post_state(&rot, api.pi.basis(), api.pi.cluster_of(), &values, &q, agree, len as u64).unwrap();
                assert!(linalg::max_abs(&(fast.matrix() - &post)) < 1e-8);
            }
        }
    }

    #[test]
    fn fast_and_reference_estimates_agree_in_distribution() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let m = random_mixture(3, 2, &mut rng);
        let rho = DensityMatrix::random(3, 2, &mut rng);
        let api = Api::with_rounds(&m, 40, 1000).unwrap();
        let trials = 3000;
        let fast: Vec<f64> = (0..trials).map(|_| api.measure(&rho, &mut rng).unwrap().estimate).collect();
        let reference: Vec<f64> =
            (0..trials).map(|_| api_reference(&m, 40, &rho, 1000, &mut rng).unwrap().estimate).collect();
        let exact = api.estimate_distribution(&api.pi.outcome_probabilities(&rho).unwrap()).unwrap();
        let ks = |xs: &[f64]| FiniteDistribution::from_samples(xs).kolmogorov_distance(&exact);
        // DKW bound at level 1e-3: sqrt(ln(2/1e-3) / (2 n)).
        let bound = ((2.0f64 / 1e-3).ln() / (2.0 * trials as f64)).sqrt();
        assert!(ks(&fast) < bound, "fast {}", ks(&fast));
        assert!(ks(&reference) < bound, "reference {}", ks(&reference));
    }

    #[test]
    fn fast_and_reference_post_states_agree_on_average() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let m = random_mixture(2, 2, &mut rng);
        let rho = DensityMatrix::random(2, 2, &mut rng);
        let api = Api::with_rounds(&m, 10, 1000).unwrap();
        let trials = 4000;
        let mut fast = CMat::zeros(2, 2);
        let mut reference = CMat::zeros(2, 2);
        for _ in 0..trials {
            fast += api.measure(&rho, &mut rng).unwrap().post.matrix();
            reference += api_reference(&m, 10, &rho, 1000, &mut rng).unwrap().post.matrix();
        }
        let diff = linalg::max_abs(&((fast - reference).unscale(trials as f64)));
        assert!(diff < 0.04, "{diff}");
    }

    #[test]
    fn eigenstate_estimate_is_within_epsilon() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let params = MeasureParams::new(0.05, 0.05, 0.5).unwrap();
        let m = random_mixture(4, 3, &mut rng);
        let api = Api::new(&m, &params).unwrap();
        let v = api.pi.basis().column(1).into_owned();
        let p = api.pi.values()[api.pi.cluster_of()[1]];
        let rho = DensityMatrix::pure(&v).unwrap();
        let hits = (0..200).filter(|_| (api.measure(&rho, &mut rng).unwrap().estimate - p).abs() <= 0.05).count();
        assert!(hits as f64 >= 0.95 * 200.0, "{hits}");
    }

    #[test]
    fn commuting_mixture_shift_distance_to_pi() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let params = MeasureParams::new(0.05, 0.05, 0.5).unwrap();
        let ps = vec![diag(&[1.0, 1.0, 0.0, 0.0]), diag(&[1.0, 0.0, 1.0, 0.0]), diag(&[0.0, 1.0, 1.0, 0.0])];
        let m = ProjectiveMixture::from_unnormalized(ps.into_iter().zip([0.5, 0.3, 0.2]).collect()).unwrap();
        let rho = DensityMatrix::random(4, 4, &mut rng);
        let api = Api::new(&m, &params).unwrap();
        let q = api.pi.outcome_probabilities(&rho).unwrap();
        let pi_dist = FiniteDistribution::new(api.pi.values().into_iter().zip(q).collect()).unwrap();
        let samples: Vec<f64> = (0..10_000).map(|_| api.measure(&rho, &mut rng).unwrap().estimate).collect();
        let emp = FiniteDistribution::from_samples(&samples);
        assert!(shift_distance(&emp, &pi_dist, 0.05) <= 0.05);
        assert!(shift_distance(&pi_dist, &emp, 0.05) <= 0.05);
    }

    #[test]
    fn repeated_api_is_almost_projective() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let params = MeasureParams::new(0.05, 0.05, 0.5).unwrap();
        let m = random_mixture(4, 4, &mut rng);
        let api = Api::new(&m, &params).unwrap();
        let rho = DensityMatrix::random_any_rank(4, &mut rng);
        let close = (0..1000)
            .filter(|_| {
                let first = api.measure(&rho, &mut rng).unwrap();
                let second = api.measure(&first.post, &mut rng).unwrap();
                (first.estimate - second.estimate).abs() <= 0.05
            })
            .count();
        assert!(close >= 950, "{close}");
    }

    #[test]
    fn thresholds_at_the_extremes() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let m = random_mixture(3, 3, &mut rng);
        let rho = DensityMatrix::random_any_rank(3, &mut rng);
        let top = pi(&mixture_to_povm(&m)).unwrap().values().into_iter().fold(0.0, f64::max);
        let zero = MeasureParams::new(0.1, 0.1, 0.0).unwrap();
        for kind in [ThresholdKind::Exact, ThresholdKind::Approximate] {
            for _ in 0..20 {
                assert!(threshold(kind, &m, &zero, &rho, &mut rng).unwrap().0);
            }
        }
        if top < 0.999 {
            let high = MeasureParams::new(0.1, 0.1, (top + 1e-6).min(1.0)).unwrap();
            for _ in 0..20 {
                assert!(!threshold(ThresholdKind::Exact, &m, &high, &rho, &mut rng).unwrap().0);
            }
        }
    }

    #[test]
    fn exact_threshold_accept_rate_matches_projector() {
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let m = random_mixture(3, 3, &mut rng);
        let rho = DensityMatrix::random_any_rank(3, &mut rng);
        let params = MeasureParams::new(0.1, 0.1, 0.5).unwrap();
        let expected = pi(&mixture_to_povm(&m)).unwrap().threshold_probability(&rho, 0.5).unwrap();
        let hits = (0..4000).filter(|_| threshold(ThresholdKind::Exact, &m, &params, &rho, &mut rng).unwrap().0).count();
        let sigma = (expected * (1.0 - expected) / 4000.0).sqrt().max(1e-3);
        assert!((hits as f64 / 4000.0 - expected).abs() <= 4.0 * sigma);
    }

    #[test]
    fn extended_dimension_cap_is_enforced() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let m = random_mixture(4, 5, &mut rng);
        assert!(matches!(Api::with_rounds(&m, 10, 19), Err(MeasureError::Resource(_))));
        let rho = DensityMatrix::random(4, 1, &mut rng);
        assert!(matches!(api_reference(&m, 10, &rho, 19, &mut rng), Err(MeasureError::Resource(_))));
    }

    #[test]
    fn register_measurement_matches_single_register_on_products() {
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let m = random_mixture(2, 2, &mut rng);
        let api = Api::with_rounds(&m, 30, 100).unwrap();
        let a = DensityMatrix::random(2, 2, &mut rng);
        let b = DensityMatrix::random(3, 1, &mut rng);
        let joint = a.tensor(&b);
        let trials = 3000;
        let single: Vec<f64> = (0..trials).map(|_| api.measure(&a, &mut rng).unwrap().estimate).collect();
        let reg: Vec<f64> =
            (0..trials).map(|_| api.measure_register(&joint, &[2, 3], 0, &mut rng).unwrap().estimate).collect();
        let exact = api.estimate_distribution(&api.pi.outcome_probabilities(&a).unwrap()).unwrap();
        let bound = ((2.0f64 / 1e-3).ln() / (2.0 * trials as f64)).sqrt();
        assert!(FiniteDistribution::from_samples(&single).kolmogorov_distance(&exact) < bound);
        assert!(FiniteDistribution::from_samples(&reg).kolmogorov_distance(&exact) < bound);
        // The spectator register is untouched.
        let out = api.measure_register(&joint, &[2, 3], 0, &mut rng).unwrap();
        let reduced = linalg::partial_trace_first(out.post.matrix(), 2, 3);
        assert!(linalg::max_abs(&(reduced - b.matrix())) < 1e-9);
        let _ = random_unitary(2, &mut rng);
    }

    #[test]
    fn binomial_tails_are_consistent() {
        for &(t, p, eta) in &[(10u64, 0.3, 0.3), (1753, 0.5, 0.45), (7, 0.0, 0.0), (7, 1.0, 1.0)] {
            let ge = binomial_fraction_at_least(t, p, eta);
            let le = binomial_fraction_at_most(t, p, eta);
            let b = BinomialDist::new(p, t).unwrap();
            let eq: f64 = (0..=t)
                .filter(|&a| (a as f64 / t as f64 - eta).abs() <= 1e-9)
                .map(|a| statrs::distribution::Discrete::pmf(&b, a))
                .sum();
            assert!((ge + le - 1.0 - eq).abs() < 1e-9, "{t} {p} {eta}");
        }
    }
}
