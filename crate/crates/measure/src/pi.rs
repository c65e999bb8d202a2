//! Exact projective implementation of a binary POVM.

use rand::{Rng, RngCore};
use serde::Serialize;

use crate::linalg::{self, CMat};
use crate::povm::BinaryPovm;
use crate::state::{check_dim, DensityMatrix};
use crate::MeasureError;

/// Eigenvalues closer than this are merged into one outcome.
pub const CLUSTER_TOL: f64 = 1e-7;

/// Shared tolerance for `value >= threshold` style comparisons.
pub const THRESHOLD_TOL: f64 = 1e-9;

#[inline]
pub fn at_least(x: f64, eta: f64) -> bool {
    x >= eta - THRESHOLD_TOL
}

#[inline]
pub fn at_most(x: f64, eta: f64) -> bool {
    x <= eta + THRESHOLD_TOL
}

#[derive(Clone, Debug, PartialEq)]
pub struct PiOutcome {
    pub value: f64,
    pub projector: CMat,
}

/// Projective measurement onto the eigenspaces of `E_1`, outcome = eigenvalue.
#[derive(Clone, Debug)]
pub struct PiMeasurement {
    outcomes: Vec<PiOutcome>,
    /// Eigenvector columns, ordered by ascending eigenvalue.
    basis: CMat,
    /// Outcome index of each eigenvector column.
    cluster_of: Vec<usize>,
}

impl PiMeasurement {
    pub fn outcomes(&self) -> &[PiOutcome] {
        &self.outcomes
    }

    pub fn values(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.value).collect()
    }

    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &CMat {
        &self.basis
    }

    pub fn cluster_of(&self) -> &[usize] {
        &self.cluster_of
    }

    /// `Tr[Pi_p rho]` for every outcome.
    pub fn outcome_probabilities(&self, rho: &DensityMatrix) -> Result<Vec<f64>, MeasureError> {
        check_dim(self.dim(), rho.dim())?;
        let rotated = self.basis.adjoint() * rho.matrix() * &self.basis;
        let mut q = vec![0.0; self.outcomes.len()];
        for (i, &k) in self.cluster_of.iter().enumerate() {
            q[k] += rotated[(i, i)].re;
        }
        Ok(q.into_iter().map(|x| x.max(0.0)).collect())
    }

    /// `sum_p p Tr[Pi_p rho]`.
    pub fn accept_probability(&self, rho: &DensityMatrix) -> Result<f64, MeasureError> {
        Ok(self.outcome_probabilities(rho)?.iter().zip(&self.outcomes).map(|(q, o)| q * o.value).sum())
    }

    /// Projector onto outcomes with value at least `eta`.
    pub fn threshold_projector(&self, eta: f64) -> CMat {
        let cols: Vec<usize> =
            (0..self.dim()).filter(|&i| at_least(self.outcomes[self.cluster_of[i]].value, eta)).collect();
        linalg::column_projector(&self.basis, &cols)
    }

    /// `sum_{p >= eta} Tr[Pi_p rho]`.
    pub fn threshold_probability(&self, rho: &DensityMatrix, eta: f64) -> Result<f64, MeasureError> {
        Ok(self
            .outcome_probabilities(rho)?
            .iter()
            .zip(&self.outcomes)
            .filter(|(_, o)| at_least(o.value, eta))
            .map(|(q, _)| q)
            .sum())
    }
}

/// Eigendecomposition of `E_1` with eigenvalues clustered at `CLUSTER_TOL`.
pub fn pi(e: &BinaryPovm) -> Result<PiMeasurement, MeasureError> {
    let (values, basis) = linalg::hermitian_eigen(e.e1())?;
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if v - values[*g.last().expect("nonempty")] <= CLUSTER_TOL => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    let mut cluster_of = vec![0; values.len()];
    let outcomes = groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let mean = g.iter().map(|&i| values[i]).sum::<f64>() / g.len() as f64;
            for &i in g {
                cluster_of[i] = k;
            }
            PiOutcome { value: mean.clamp(0.0, 1.0), projector: linalg::column_projector(&basis, g) }
        })
        .collect();
    Ok(PiMeasurement { outcomes, basis, cluster_of })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProjectiveResult {
    pub value: f64,
    pub index: usize,
    pub probability: f64,
    #[serde(skip)]
    pub post: DensityMatrix,
}

/// Applies the measurement, sampling the outcome.
pub fn apply_projective<R: RngCore + ?Sized>(
    m: &PiMeasurement,
    rho: &DensityMatrix,
    rng: &mut R,
) -> Result<ProjectiveResult, MeasureError> {
    let q = m.outcome_probabilities(rho)?;
    let total: f64 = q.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut index = q.iter().rposition(|&x| x > 0.0).ok_or_else(|| MeasureError::Sampling("no outcome has weight".into()))?;
    for (k, &x) in q.iter().enumerate() {
        acc += x;
        if u < acc && x > 0.0 {
            index = k;
            break;
        }
    }
    apply_projective_outcome(m, rho, index)
}

/// The branch for a fixed outcome; errors when that branch has zero weight.
pub fn apply_projective_outcome(
    m: &PiMeasurement,
    rho: &DensityMatrix,
    index: usize,
) -> Result<ProjectiveResult, MeasureError> {
    check_dim(m.dim(), rho.dim())?;
    let outcome = m.outcomes.get(index).ok_or_else(|| MeasureError::Parameter(format!("no outcome {index}")))?;
    let p = rho.expectation(&outcome.projector);
    if p <= 1e-14 {
        return Err(MeasureError::Sampling(format!("outcome {} has probability {p}", outcome.value)));
    }
    let (post, probability) = rho.conjugate_normalized(&outcome.projector)?;
    Ok(ProjectiveResult { value: outcome.value, index, probability, post })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, hermitian_fn, random_unitary};
    use nalgebra::DVector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn diag(vals: &[f64]) -> CMat {
        CMat::from_diagonal(&DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v))))
    }

    pub(crate) fn random_povm(dim: usize, rng: &mut ChaCha20Rng) -> BinaryPovm {
        let u = random_unitary(dim, rng);
        let vals: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
        BinaryPovm::new(&u * diag(&vals) * u.adjoint()).unwrap()
    }

    #[test]
    fn diagonal_povm_has_basis_outcomes() {
        let m = pi(&BinaryPovm::new(diag(&[0.25, 0.75])).unwrap()).unwrap();
        assert_eq!(m.values(), vec![0.25, 0.75]);
        assert!(linalg::max_abs(&(&m.outcomes()[0].projector - diag(&[1.0, 0.0]))) < 1e-12);
    }

    #[test]
    fn half_identity_has_one_outcome() {
        let m = pi(&BinaryPovm::new(linalg::identity(3).scale(0.5)).unwrap()).unwrap();
        assert_eq!(m.outcomes().len(), 1);
        assert!((m.outcomes()[0].value - 0.5).abs() < 1e-12);
        assert!(linalg::max_abs(&(&m.outcomes()[0].projector - linalg::identity(3))) < 1e-12);
    }

    #[test]
    fn closed_form_accept_probability_matches_trace() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for _ in 0..50 {
            let e = random_povm(6, &mut rng);
            let rho = DensityMatrix::random_any_rank(6, &mut rng);
            let m = pi(&e).unwrap();
            assert!((m.accept_probability(&rho).unwrap() - e.accept_probability(&rho).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn projectors_are_orthogonal_and_complete() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let m = pi(&random_povm(5, &mut rng)).unwrap();
        let mut sum = CMat::zeros(5, 5);
        for (i, a) in m.outcomes().iter().enumerate() {
            sum += &a.projector;
            for b in &m.outcomes()[i + 1..] {
                assert!(linalg::max_abs(&(&a.projector * &b.projector)) < 1e-10);
            }
        }
        assert!(linalg::max_abs(&(sum - linalg::identity(5))) < 1e-10);
    }

    #[test]
    fn eigenstate_gives_its_eigenvalue() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let m = pi(&BinaryPovm::new(diag(&[0.1, 0.6, 0.9])).unwrap()).unwrap();
        let rho = DensityMatrix::basis(3, 1);
        for _ in 0..20 {
            let r = apply_projective(&m, &rho, &mut rng).unwrap();
            assert!((r.value - 0.6).abs() < 1e-12);
            assert!((r.probability - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_application_is_deterministic() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..500 {
            let m = pi(&random_povm(4, &mut rng)).unwrap();
            let rho = DensityMatrix::random_any_rank(4, &mut rng);
            let first = apply_projective(&m, &rho, &mut rng).unwrap();
            let second = apply_projective(&m, &first.post, &mut rng).unwrap();
            assert_eq!(first.index, second.index);
            assert!((second.probability - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn maximally_mixed_qubit_splits_evenly() {
        let m = pi(&BinaryPovm::new(diag(&[0.25, 0.75])).unwrap()).unwrap();
        let q = m.outcome_probabilities(&DensityMatrix::maximally_mixed(2)).unwrap();
        assert!((q[0] - 0.5).abs() < 1e-12 && (q[1] - 0.5).abs() < 1e-12);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let hits = (0..4000).filter(|_| apply_projective(&m, &DensityMatrix::maximally_mixed(2), &mut rng).unwrap().index == 0).count();
        assert!((hits as f64 - 2000.0).abs() < 3.0 * 1000f64.sqrt());
    }

    #[test]
    fn zero_probability_branch_is_an_error() {
        let m = pi(&BinaryPovm::new(diag(&[0.25, 0.75])).unwrap()).unwrap();
        assert!(matches!(
            apply_projective_outcome(&m, &DensityMatrix::basis(2, 0), 1),
            Err(MeasureError::Sampling(_))
        ));
    }

    #[test]
    fn threshold_projector_matches_probability() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let e = random_povm(5, &mut rng);
        let m = pi(&e).unwrap();
        let rho = DensityMatrix::random(5, 3, &mut rng);
        let ti = m.threshold_projector(0.5);
        assert!((rho.expectation(&ti) - m.threshold_probability(&rho, 0.5).unwrap()).abs() < 1e-10);
        let expected = hermitian_fn(e.e1(), |v| if v >= 0.5 { 1.0 } else { 0.0 }).unwrap();
        assert!(linalg::max_abs(&(ti - expected)) < 1e-9);
    }
}
