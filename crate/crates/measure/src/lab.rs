//! Empirical checks of PI, API and the threshold sandwich on random instances.
//!
//! Each check reports an observed statistic next to the bound it must meet.
//! Closed-form checks compare numbers directly; sampled checks run the API
//! estimator itself and compare empirical frequencies against `(eps, delta)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::api::{Api, MeasureParams};
use crate::lemmas::{near_value, random_mixture, SLACK_FLOOR};
use crate::linalg::{c, CMat};
use crate::pi::{apply_projective, pi};
use crate::povm::{mixture_to_povm, ProjectiveMixture};
use crate::shift::{shift_distance, FiniteDistribution};
use crate::state::DensityMatrix;
use crate::MeasureError;

/// Largest |Σ p Tr[Π_p ρ] − Tr[E₁ρ]| tolerated.
pub const PI_TOL: f64 = 1e-8;
/// Repeat-outcome probabilities below `1 - REPEAT_TOL` count as failures.
pub const REPEAT_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabConfig {
    pub params: MeasureParams,
    /// Instances for the closed-form PI checks.
    pub pi_instances: usize,
    /// Instances for the threshold sandwich.
    pub sandwich_instances: usize,
    /// Instances the API is sampled on; the first is a commuting mixture.
    pub api_instances: usize,
    /// API runs per sampled instance.
    pub api_trials: usize,
    /// Largest register dimension drawn.
    pub max_dim: usize,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            params: MeasureParams { epsilon: 0.05, delta: 0.05, eta: 0.5 },
            pi_instances: 200,
            sandwich_instances: 100,
            api_instances: 3,
            api_trials: 10_000,
            max_dim: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabCheck {
    pub check_id: String,
    pub instances: usize,
    /// Measurement runs behind the statistic; zero for closed-form checks.
    pub samples: usize,
    /// Worst observed value of the statistic.
    pub observed: f64,
    pub bound: f64,
    /// Whether larger values are better (`observed >= bound`) or worse.
    pub at_least: bool,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabReport {
    pub seed: u64,
    pub config: LabConfig,
    pub rounds: usize,
    pub checks: Vec<LabCheck>,
}

impl LabReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, check_id: &str) -> Option<&LabCheck> {
        self.checks.iter().find(|c| c.check_id == check_id)
    }
}

fn check(id: &str, instances: usize, samples: usize, observed: f64, bound: f64, at_least: bool) -> LabCheck {
    let pass = if at_least { observed >= bound } else { observed <= bound };
    LabCheck { check_id: id.into(), instances, samples, observed, bound, at_least, pass }
}

fn stream(seed: u64, i: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(i);
    rng
}

pub fn measurement_lab(seed: u64, cfg: &LabConfig) -> Result<LabReport, MeasureError> {
    cfg.params.validate()?;
    if !(2..=crate::lemmas::MAX_REGISTER_DIM).contains(&cfg.max_dim) {
        return Err(MeasureError::Parameter(format!("max_dim {} outside 2..=8", cfg.max_dim)));
    }
    if cfg.pi_instances == 0 || cfg.sandwich_instances == 0 || cfg.api_instances == 0 || cfg.api_trials == 0 {
        return Err(MeasureError::Parameter("every instance and trial count must be positive".into()));
    }
    let p = cfg.params;
    let mut checks = Vec::new();

    // PI against the direct trace, and PI repeated on its own post-state.
    let mut rng = stream(seed, 1);
    let (mut worst_err, mut worst_repeat) = (0.0f64, 1.0f64);
    for _ in 0..cfg.pi_instances {
        let d = rng.random_range(2..=cfg.max_dim);
        let e = mixture_to_povm(&random_mixture(d, &mut rng)?);
        let m = pi(&e)?;
        let rho = DensityMatrix::random_any_rank(d, &mut rng);
        worst_err = worst_err.max((m.accept_probability(&rho)? - e.accept_probability(&rho)?).abs());
        let first = apply_projective(&m, &rho, &mut rng)?;
        worst_repeat = worst_repeat.min(m.outcome_probabilities(&first.post)?[first.index]);
    }
    checks.push(check("pi_closed_form", cfg.pi_instances, 0, worst_err, PI_TOL, false));
    checks.push(check("pi_projective", cfg.pi_instances, cfg.pi_instances, worst_repeat, 1.0 - REPEAT_TOL, true));

    // Eigenvector inputs: the estimate lands within eps of the eigenvalue.
    let mut rng = stream(seed, 2);
    let mut worst_hit = 1.0f64;
    let eig_trials = 200;
    for _ in 0..cfg.api_instances {
        let d = rng.random_range(2..=cfg.max_dim.min(4));
        let api = Api::new(&random_mixture(d, &mut rng)?, &p)?;
        let col = rng.random_range(0..d);
        let v = api.pi().basis().column(col).into_owned();
        let value = api.pi().values()[api.pi().cluster_of()[col]];
        let rho = DensityMatrix::pure(&v)?;
        let mut hits = 0;
        for _ in 0..eig_trials {
            hits += ((api.measure(&rho, &mut rng)?.estimate - value).abs() <= p.epsilon) as usize;
        }
        worst_hit = worst_hit.min(hits as f64 / eig_trials as f64);
    }
    checks.push(check("api_eigenstate", cfg.api_instances, cfg.api_instances * eig_trials, worst_hit, 1.0 - p.delta, true));

    // Sampled API: almost-projectivity and shift closeness to PI, both directions.
    let mut rng = stream(seed, 3);
    let (mut worst_close, mut worst_shift) = (1.0f64, 0.0f64);
    for i in 0..cfg.api_instances {
        let m = if i == 0 { commuting_mixture() } else { random_mixture(rng.random_range(2..=cfg.max_dim.min(4)), &mut rng)? };
        let api = Api::new(&m, &p)?;
        let rho = DensityMatrix::random_any_rank(m.dim(), &mut rng);
        let q = api.pi().outcome_probabilities(&rho)?;
        let exact = FiniteDistribution::new(api.pi().values().into_iter().zip(q).collect())?;
        let mut estimates = Vec::with_capacity(cfg.api_trials);
        let mut close = 0usize;
        for _ in 0..cfg.api_trials {
            let first = api.measure(&rho, &mut rng)?;
            let second = api.measure(&first.post, &mut rng)?;
            close += ((first.estimate - second.estimate).abs() <= p.epsilon) as usize;
            estimates.push(first.estimate);
        }
        worst_close = worst_close.min(close as f64 / cfg.api_trials as f64);
        let emp = FiniteDistribution::from_samples(&estimates);
        worst_shift = worst_shift.max(shift_distance(&emp, &exact, p.epsilon)).max(shift_distance(&exact, &emp, p.epsilon));
    }
    let runs = cfg.api_instances * cfg.api_trials;
    checks.push(check("api_almost_projective", cfg.api_instances, 2 * runs, worst_close, 1.0 - p.delta, true));
    checks.push(check("api_shift_to_pi", cfg.api_instances, runs, worst_shift, p.delta, false));

    // Threshold sandwich in closed form.
    let mut rng = stream(seed, 4);
    let (mut lower, mut upper) = (f64::INFINITY, f64::INFINITY);
    for _ in 0..cfg.sandwich_instances {
        let d = rng.random_range(2..=cfg.max_dim);
        let api = Api::new(&random_mixture(d, &mut rng)?, &p)?;
        let rho = DensityMatrix::random_any_rank(d, &mut rng);
        let eta = near_value(&api.pi().values(), p.epsilon, &mut rng);
        let ti = |x: f64| api.pi().threshold_probability(&rho, x);
        lower = lower.min(api.ati_probability(&rho, eta - p.epsilon)? - (ti(eta)? - p.delta));
        upper = upper.min(ti(eta - p.epsilon)? - (api.ati_probability(&rho, eta)? - p.delta));
    }
    checks.push(check("ti_sandwich_lower", cfg.sandwich_instances, 0, lower, SLACK_FLOOR, true));
    checks.push(check("ti_sandwich_upper", cfg.sandwich_instances, 0, upper, SLACK_FLOOR, true));

    Ok(LabReport { seed, config: *cfg, rounds: p.rounds(), checks })
}

/// Three overlapping diagonal projectors on four levels.
fn commuting_mixture() -> ProjectiveMixture {
    let diag = |v: [f64; 4]| CMat::from_diagonal(&nalgebra::DVector::from_iterator(4, v.iter().map(|&x| c(x))));
    ProjectiveMixture::new(vec![
        (diag([1.0, 1.0, 0.0, 0.0]), 0.5),
        (diag([1.0, 0.0, 1.0, 0.0]), 0.3),
        (diag([0.0, 1.0, 1.0, 0.0]), 0.2),
    ])
    .expect("valid fixed mixture")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> LabConfig {
        LabConfig { pi_instances: 30, sandwich_instances: 30, api_instances: 2, api_trials: 500, ..LabConfig::default() }
    }

    #[test]
    fn small_lab_passes_and_repeats() {
        let a = measurement_lab(11, &small()).unwrap();
        assert!(a.all_pass(), "{:?}", a.checks);
        assert_eq!(a.checks.len(), 7);
        assert_eq!(a, measurement_lab(11, &small()).unwrap());
    }

    #[test]
    fn bad_configs_are_rejected() {
        assert!(measurement_lab(0, &LabConfig { api_trials: 0, ..small() }).is_err());
        assert!(measurement_lab(0, &LabConfig { max_dim: 9, ..small() }).is_err());
    }
}
