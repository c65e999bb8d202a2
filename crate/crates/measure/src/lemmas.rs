//! Randomised numerical checks of the measurement lemmas.
//!
//! Each check draws random small instances and reports the worst slack, where
//! slack is `rhs - lhs` for an inequality `lhs <= rhs` and `-|difference|` for
//! an equality. A check passes when every slack is at least `SLACK_FLOOR`.
//!
//! The threshold and multi-register statements are evaluated in closed form:
//! every quantity they involve is diagonal in the product of PI eigenspaces, so
//! it depends on the joint PI outcome weights and the binomial law of the API
//! estimate only. One extra check samples the API itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::api::{Api, MeasureParams};
use crate::linalg::{self, c, CMat};
use crate::multi::joint_outcome_weights;
use crate::pi::{at_least, at_most, pi};
use crate::povm::{mixture_to_povm, ProjectiveMixture};
use crate::state::DensityMatrix;
use crate::MeasureError;

pub const SLACK_FLOOR: f64 = -1e-7;

/// Largest per-register dimension accepted by the suite.
pub const MAX_REGISTER_DIM: usize = 8;

const MAX_JOINT_DIM: usize = 64;
const RESAMPLE_LIMIT: usize = 1000;
const SAMPLED_RUNS: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaResult {
    pub lemma_id: String,
    pub instances: usize,
    pub worst_slack: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub seed: u64,
    pub dims: usize,
    pub trials: usize,
    pub params: MeasureParams,
    pub rounds: usize,
    pub results: Vec<LemmaResult>,
    pub notes: Vec<String>,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn get(&self, lemma_id: &str) -> Option<&LemmaResult> {
        self.results.iter().find(|r| r.lemma_id == lemma_id)
    }
}

type Check = fn(&mut ChaCha20Rng, &Ctx) -> Result<Option<f64>, MeasureError>;

struct Ctx {
    dims: usize,
    params: MeasureParams,
}

const CHECKS: &[(&str, Check)] = &[
    ("pi_correctness", pi_correctness),
    ("quantum_union_bound", quantum_union_bound),
    ("gentle_measurement", gentle_measurement),
    ("implementation_independence", implementation_independence),
    ("simultaneous_projection", simultaneous_projection),
    ("ti_sandwich_lower", ti_sandwich_lower),
    ("ti_sandwich_upper", ti_sandwich_upper),
    ("multi_ati_lower", |r, c| multi(r, c, MultiClaim::AtiLower)),
    ("multi_ati_collapse_ti", |r, c| multi(r, c, MultiClaim::AtiCollapseTi)),
    ("multi_ati_collapse_ati", |r, c| multi(r, c, MultiClaim::AtiCollapseAti)),
    ("multi_ati_upper", |r, c| multi(r, c, MultiClaim::AtiUpper)),
    ("multi_api_post_upper", |r, c| multi(r, c, MultiClaim::PostUpper)),
    ("multi_api_post_lower", |r, c| multi(r, c, MultiClaim::PostLower)),
    ("multi_api_small_lower", |r, c| multi(r, c, MultiClaim::SmallLower)),
    ("multi_api_small_upper", |r, c| multi(r, c, MultiClaim::SmallUpper)),
    ("multi_api_post_sampled", multi_api_post_sampled),
];

/// Runs every check on `trials` instances with registers of dimension up to `dims`.
pub fn lemma_suite(seed: u64, dims: usize, trials: usize) -> Result<LemmaReport, MeasureError> {
    lemma_suite_with(seed, dims, trials, MeasureParams::new(0.05, 0.05, 0.5)?)
}

pub fn lemma_suite_with(seed: u64, dims: usize, trials: usize, params: MeasureParams) -> Result<LemmaReport, MeasureError> {
    if !(2..=MAX_REGISTER_DIM).contains(&dims) {
        return Err(MeasureError::Parameter(format!("dims must be in 2..={MAX_REGISTER_DIM}, got {dims}")));
    }
    if trials == 0 {
        return Err(MeasureError::Parameter("trials must be at least 1".into()));
    }
    params.validate()?;
    let ctx = Ctx { dims, params };
    let mut results = Vec::with_capacity(CHECKS.len());
    for (i, (id, check)) in CHECKS.iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(i as u64 + 1);
        let mut worst = f64::INFINITY;
        for _ in 0..trials {
            let mut slack = None;
            for _ in 0..RESAMPLE_LIMIT {
                if let Some(s) = check(&mut rng, &ctx)? {
                    slack = Some(s);
                    break;
                }
            }
            let s = slack.ok_or_else(|| MeasureError::Sampling(format!("{id}: no informative instance found")))?;
            worst = worst.min(s);
        }
        results.push(LemmaResult { lemma_id: id.to_string(), instances: trials, worst_slack: worst, pass: worst >= SLACK_FLOOR });
    }
    Ok(LemmaReport {
        seed,
        dims,
        trials,
        params,
        rounds: params.rounds(),
        results,
        notes: vec![
            "threshold and multi-register checks use the exact outcome law of the API estimator".into(),
            "the indistinguishable-distribution statement is checked only in its statistical form, by unit tests".into(),
        ],
    })
}

fn diag(vals: &[f64]) -> CMat {
    CMat::from_diagonal(&nalgebra::DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v))))
}

fn dim(rng: &mut ChaCha20Rng, ctx: &Ctx) -> usize {
    rng.random_range(2..=ctx.dims)
}

pub(crate) fn random_mixture(d: usize, rng: &mut ChaCha20Rng) -> Result<ProjectiveMixture, MeasureError> {
    let len = rng.random_range(1..=4);
    let entries = (0..len)
        .map(|_| {
            let rank = rng.random_range(0..=d);
            (linalg::random_projector(d, rank, rng), rng.random::<f64>() + 0.05)
        })
        .collect();
    ProjectiveMixture::from_unnormalized(entries)
}

/// Random Kraus operators `M_i = G_i S^{-1/2}` with `sum M_i^dag M_i = I`.
fn random_instrument(d: usize, outcomes: usize, rng: &mut ChaCha20Rng) -> Result<Vec<CMat>, MeasureError> {
    let gs: Vec<CMat> = (0..outcomes).map(|_| linalg::gaussian_matrix(d, d, rng)).collect();
    let s = gs.iter().fold(CMat::zeros(d, d), |acc, g| acc + g.adjoint() * g);
    let inv_sqrt = linalg::hermitian_fn(&s, |v| 1.0 / v.sqrt())?;
    Ok(gs.into_iter().map(|g| g * &inv_sqrt).collect())
}

/// State whose weight sits mostly inside the range of `proj`.
fn near_supported(proj: &CMat, leak: f64, rng: &mut ChaCha20Rng) -> Result<DensityMatrix, MeasureError> {
    let d = proj.nrows();
    let inside = DensityMatrix::random_any_rank(d, rng).conjugate_normalized(proj)?.0;
    inside.mix(&DensityMatrix::random_any_rank(d, rng), leak)
}

/// Threshold near an outcome value, so the comparisons are not all trivial.
pub(crate) fn near_value(values: &[f64], eps: f64, rng: &mut ChaCha20Rng) -> f64 {
    if rng.random::<f64>() < 0.25 {
        return rng.random::<f64>();
    }
    let v = values[rng.random_range(0..values.len())];
    (v + rng.random_range(-2.0 * eps..=2.0 * eps)).clamp(0.0, 1.0)
}

fn pi_correctness(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Option<f64>, MeasureError> {
    let d = dim(rng, ctx);
    let e = mixture_to_povm(&random_mixture(d, rng)?);
    let rho = DensityMatrix::random_any_rank(d, rng);
    let diff = pi(&e)?.accept_probability(&rho)? - e.accept_probability(&rho)?;
    Ok(Some(-diff.abs()))
}

fn quantum_union_bound(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Option<f64>, MeasureError> {
    let d = dim(rng, ctx);
    let n = rng.random_range(2..=3);
    let u = if rng.random::<bool>() { linalg::identity(d) } else { linalg::random_unitary(d, rng) };
    let projs: Vec<CMat> = (0..n)
        .map(|_| {
            let pattern: Vec<f64> = (0..d).map(|_| if rng.random::<f64>() < 0.7 { 1.0 } else { 0.0 }).collect();
            &u * diag(&pattern) * u.adjoint()
        })
        .collect();
    let rho = DensityMatrix::random_any_rank(d, rng);
    let product = projs.iter().fold(linalg::identity(d), |acc, p| acc * p);
    let lhs = 1.0 - rho.expectation(&product);
    let rhs: f64 = projs.iter().map(|p| 1.0 - rho.expectation(p)).sum();
    Ok(Some(rhs - lhs))
}

fn gentle_measurement(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Option<f64>, MeasureError> {
    let d = dim(rng, ctx);
    let u = linalg::random_unitary(d, rng);
    let exact = rng.random::<f64>() < 0.25;
    let vals: Vec<f64> = (0..d)
        .map(|i| if exact { (i % 2) as f64 } else if i % 2 == 1 { 1.0 - 0.1 * rng.random::<f64>() } else { rng.random() })
        .collect();
    let e = &u * diag(&vals) * u.adjoint();
    let high: Vec<usize> = (0..d).filter(|i| i % 2 == 1).collect();
    let leak = if exact { 0.0 } else { 0.3 * rng.random::<f64>() };
    let rho = near_supported(&linalg::column_projector(&u, &high), leak, rng)?;
    let accept = rho.expectation(&e);
    if accept <= 1e-9 {
        return Ok(None);
    }
    let eps = (1.0 - accept).max(0.0);
    let sqrt_e = linalg::hermitian_fn(&e, |v| v.max(0.0).sqrt())?;
    let (post, _) = rho.conjugate_normalized(&sqrt_e)?;
    Ok(Some(eps.sqrt() - rho.trace_distance(&post)?))
}

fn implementation_independence(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Option<f64>, MeasureError> {
    let (d1, d2) = (dim(rng, ctx), dim(rng, ctx));
    let ms = random_instrument(d1, rng.random_range(2..=3), rng)?;
    let es: Vec<CMat> = ms.iter().map(|m| linalg::random_unitary(d1, rng) * m).collect();
    let rho = DensityMatrix::random_any_rank(d1 * d2, rng);
    let mut worst: f64 = 0.0;
    for (m, e) in ms.iter().zip(&es) {
        let branch = |k: &CMat| {
            let big = linalg::kron(k, &linalg::identity(d2));
            let out = &big * rho.matrix() * big.adjoint();
            let p = out.trace().re;
            (p, linalg::partial_trace_first(&out, d1, d2).unscale(p))
        };
        let ((pm, sm), (pe, se)) = (branch(m), branch(e));
        worst = worst.max((pm - pe).abs()).max(linalg::max_abs(&(sm - se)));
    }
    Ok(Some(-worst))
}

fn simultaneous_projection(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Option<f64>, MeasureError> {
    let (d1, d2) = (dim(rng, ctx), dim(rng, ctx));
    let p1 = linalg::random_projector(d1, rng.random_range(1..=d1), rng);
    let p2 = linalg::random_projector(d2, rng.random_range(1..=d2), rng);
    let joint = linalg::kron(&p1, &p2);
    let rho = near_supported(&joint, 0.2 * rng.random::<f64>(), rng)?;
    let eps = (1.0 - rho.expectation(&joint)).max(0.0);
    let ms = random_instrument(d1, rng.random_range(2..=3), rng)?;
    let mut worst = f64::INFINITY;
    for m in &ms {
        let big = linalg::kron(m, &linalg::identity(d2));
        let out = &big * rho.matrix() * big.adjoint();
        let p = out.trace().re;
        if p <= 1e-9 {
            continue;
        }
        let tau = linalg::partial_trace_first(&out, d1, d2).unscale(p);
        worst = worst.min(linalg::trace_product(&p2, &tau) - (1.0 - eps.sqrt() / p));
    }
    Ok(worst.is_finite().then_some(worst))
}

fn single_instance(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<(Api, DensityMatrix, f64), MeasureError> {
    let d = dim(rng, ctx);
    let api = Api::new(&random_mixture(d, rng)?, &ctx.params)?;
    let rho = DensityMatrix::random_any_rank(d, rng);
    let eta = near_value(&api.pi().values(), ctx.params.epsilon, rng);
    Ok((api, rho, eta))
}

fn ti_sandwich_lower(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Option<f64>, MeasureError> {
    let (api, rho, eta) = single_instance(rng, ctx)?;
    let (eps, delta) = (ctx.params.epsilon, ctx.params.delta);
    let ati = api.ati_probability(&rho, eta - eps)?;
    let ti = api.pi().threshold_probability(&rho, eta)?;
    Ok(Some(ati - (ti - delta)))
}

fn ti_sandwich_upper(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Option<f64>, MeasureError> {
    let (api, rho, eta) = single_instance(rng, ctx)?;
    let (eps, delta) = (ctx.params.epsilon, ctx.params.delta);
    let ti = api.pi().threshold_probability(&rho, eta - eps)?;
    let ati = api.ati_probability(&rho, eta)?;
    Ok(Some(ti - (ati - delta)))
}

#[derive(Clone, Copy)]
enum MultiClaim {
    AtiLower,
    AtiCollapseTi,
    AtiCollapseAti,
    AtiUpper,
    PostUpper,
    PostLower,
    SmallLower,
    SmallUpper,
}

struct MultiInstance {
    apis: Vec<Api>,
    dims: Vec<usize>,
    rho: DensityMatrix,
    etas: Vec<f64>,
    /// Joint PI outcome weights; keys index each register's outcome list.
    joint: Vec<(Vec<usize>, f64)>,
}

impl MultiInstance {
    fn draw(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Self, MeasureError> {
        let k = rng.random_range(1..=3);
        let cap = if k == 3 { ctx.dims.min(4) } else { ctx.dims };
        let dims: Vec<usize> = (0..k).map(|_| rng.random_range(2..=cap)).collect();
        debug_assert!(dims.iter().product::<usize>() <= MAX_JOINT_DIM);
        let apis = dims
            .iter()
            .map(|&d| Api::new(&random_mixture(d, rng)?, &ctx.params))
            .collect::<Result<Vec<_>, _>>()?;
        let rho = DensityMatrix::random_any_rank(dims.iter().product(), rng);
        let etas = apis.iter().map(|a| near_value(&a.pi().values(), ctx.params.epsilon, rng)).collect();
        let pis: Vec<_> = apis.iter().map(|a| a.pi()).collect();
        let joint = joint_outcome_weights(&pis, &rho)?;
        Ok(Self { apis, dims, rho, etas, joint })
    }

    fn value(&self, reg: usize, outcome: usize) -> f64 {
        self.apis[reg].pi().outcomes()[outcome].value
    }

    /// `sum_key q(key) prod_l f(l, p_l)`.
    fn expect(&self, f: impl Fn(usize, f64) -> f64) -> f64 {
        self.joint
            .iter()
            .map(|(key, q)| q * key.iter().enumerate().map(|(l, &o)| f(l, self.value(l, o))).product::<f64>())
            .sum()
    }
}

fn indicator(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn multi(rng: &mut ChaCha20Rng, ctx: &Ctx, claim: MultiClaim) -> Result<Option<f64>, MeasureError> {
    let inst = MultiInstance::draw(rng, ctx)?;
    let (eps, delta) = (ctx.params.epsilon, ctx.params.delta);
    let k = inst.apis.len() as f64;
    let eta = |l: usize| inst.etas[l];
    let ge = |l: usize, p: f64, t: f64| inst.apis[l].prob_estimate_at_least(p, t);
    let le = |l: usize, p: f64, t: f64| inst.apis[l].prob_estimate_at_most(p, t);
    let slack = match claim {
        MultiClaim::AtiLower => {
            let ati = inst.expect(|l, p| ge(l, p, eta(l) - eps));
            let ti = inst.expect(|l, p| indicator(at_least(p, eta(l))));
            ati - (ti - k * delta)
        }
        MultiClaim::AtiCollapseTi | MultiClaim::AtiCollapseAti => {
            let den = inst.expect(|l, p| ge(l, p, eta(l)));
            if den < 1e-6 {
                return Ok(None);
            }
            let num = match claim {
                MultiClaim::AtiCollapseTi => inst.expect(|l, p| ge(l, p, eta(l)) * indicator(at_least(p, eta(l) - 2.0 * eps))),
                _ => inst.expect(|l, p| ge(l, p, eta(l)) * ge(l, p, eta(l) - 3.0 * eps)),
            };
            let factor = if matches!(claim, MultiClaim::AtiCollapseTi) { 2.0 } else { 3.0 };
            num / den - (1.0 - factor * k * delta)
        }
        MultiClaim::AtiUpper => {
            let ti = inst.expect(|l, p| indicator(at_least(p, eta(l) - eps)));
            let ati = inst.expect(|l, p| ge(l, p, eta(l)));
            ti - (ati - k * delta)
        }
        // After the API the PI outcome p' satisfies p' <= estimate + 2 eps; summing the
        // Kraus weights over records turns this into a binomial tail per outcome.
        MultiClaim::PostUpper => inst.expect(|l, p| ge(l, p, p - 2.0 * eps)) - (1.0 - 2.0 * k * delta),
        MultiClaim::PostLower => inst.expect(|l, p| le(l, p, p + 2.0 * eps)) - (1.0 - 2.0 * k * delta),
        MultiClaim::SmallLower => {
            let lhs = inst.expect(|l, p| indicator(at_most(p, eta(l) + eps)));
            let rhs = inst.expect(|l, p| le(l, p, eta(l)));
            lhs - (rhs - k * delta)
        }
        MultiClaim::SmallUpper => {
            let lhs = inst.expect(|l, p| le(l, p, eta(l) + eps));
            let rhs = inst.expect(|l, p| indicator(at_most(p, eta(l))));
            lhs - (rhs - k * delta)
        }
    };
    Ok(Some(slack))
}

/// Samples the API on every register and checks the post-state in closed form.
fn multi_api_post_sampled(rng: &mut ChaCha20Rng, ctx: &Ctx) -> Result<Option<f64>, MeasureError> {
    let inst = MultiInstance::draw(rng, ctx)?;
    let eps = ctx.params.epsilon;
    let k = inst.apis.len();
    let pis: Vec<_> = inst.apis.iter().map(|a| a.pi()).collect();
    let mut total = 0.0;
    for _ in 0..SAMPLED_RUNS {
        let mut state = inst.rho.clone();
        let mut estimates = Vec::with_capacity(k);
        for (l, api) in inst.apis.iter().enumerate() {
            let out = api.measure_register(&state, &inst.dims, l, rng)?;
            estimates.push(out.estimate);
            state = out.post;
        }
        total += joint_outcome_weights(&pis, &state)?
            .iter()
            .filter(|(key, _)| key.iter().enumerate().all(|(l, &o)| at_most(inst.value(l, o), estimates[l] + 2.0 * eps)))
            .map(|(_, q)| q)
            .sum::<f64>();
    }
    Ok(Some(total / SAMPLED_RUNS as f64 - (1.0 - 2.0 * k as f64 * ctx.params.delta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_and_is_deterministic() {
        let a = lemma_suite(2, 4, 30).unwrap();
        assert!(a.all_pass(), "{:#?}", a.results);
        assert_eq!(a.results.len(), CHECKS.len());
        let b = lemma_suite(2, 4, 30).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn equality_checks_are_tight() {
        let r = lemma_suite(5, 6, 50).unwrap();
        assert!(r.get("pi_correctness").unwrap().worst_slack >= -1e-8);
        assert!(r.get("implementation_independence").unwrap().worst_slack >= -1e-8);
    }

    #[test]
    fn gentle_measurement_exact_case_has_zero_distance() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let u = linalg::random_unitary(4, &mut rng);
        let p = linalg::column_projector(&u, &[0, 2]);
        let rho = DensityMatrix::random(4, 2, &mut rng).conjugate_normalized(&p).unwrap().0;
        assert!((rho.expectation(&p) - 1.0).abs() < 1e-12);
        let (post, _) = rho.conjugate_normalized(&p).unwrap();
        assert!(rho.trace_distance(&post).unwrap() < 1e-9);
    }

    #[test]
    fn parameters_are_validated() {
        assert!(lemma_suite(1, 1, 10).is_err());
        assert!(lemma_suite(1, 9, 10).is_err());
        assert!(lemma_suite(1, 4, 0).is_err());
    }
}
