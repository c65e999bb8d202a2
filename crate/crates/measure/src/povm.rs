//! Binary POVMs and mixtures of binary projective measurements.

use rand::{Rng, RngCore};

use crate::linalg::{self, CMat};
use crate::state::{check_dim, DensityMatrix};
use crate::MeasureError;

pub const PROJECTOR_TOL: f64 = 1e-8;
const POVM_TOL: f64 = 1e-9;

/// `{E_1, I - E_1}` stored by its accept element.
#[derive(Clone, Debug, PartialEq)]
pub struct BinaryPovm {
    e1: CMat,
}

impl BinaryPovm {
    pub fn new(e1: CMat) -> Result<Self, MeasureError> {
        let (values, _) = linalg::hermitian_eigen(&e1)?;
        let (lo, hi) = (values[0], values[values.len() - 1]);
        if lo < -POVM_TOL || hi > 1.0 + POVM_TOL {
            return Err(MeasureError::InvalidOperator(format!("POVM element spectrum [{lo}, {hi}] leaves [0, 1]")));
        }
        Ok(Self { e1: linalg::hermitize(&e1) })
    }

    pub fn e1(&self) -> &CMat {
        &self.e1
    }

    pub fn dim(&self) -> usize {
        self.e1.nrows()
    }

    pub fn accept_probability(&self, rho: &DensityMatrix) -> Result<f64, MeasureError> {
        check_dim(self.dim(), rho.dim())?;
        Ok(rho.expectation(&self.e1))
    }
}

/// Sample `i` from the weights and apply `{P_i, I - P_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectiveMixture {
    projectors: Vec<CMat>,
    weights: Vec<f64>,
}

impl ProjectiveMixture {
    pub fn new(entries: Vec<(CMat, f64)>) -> Result<Self, MeasureError> {
        if entries.is_empty() {
            return Err(MeasureError::Parameter("empty mixture".into()));
        }
        let dim = entries[0].0.nrows();
        let mut total = 0.0;
        for (p, w) in &entries {
            check_dim(dim, p.nrows())?;
            if !p.is_square() || linalg::max_abs(&(p * p - p)) > PROJECTOR_TOL || !linalg::is_hermitian(p, PROJECTOR_TOL) {
                return Err(MeasureError::InvalidOperator("mixture element is not a projector".into()));
            }
            if !(*w >= 0.0) {
                return Err(MeasureError::Parameter(format!("negative weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(MeasureError::Parameter(format!("weights sum to {total}")));
        }
        let (projectors, weights) = entries.into_iter().unzip();
        Ok(Self { projectors, weights })
    }

    /// Normalises arbitrary nonnegative weights before validating.
    pub fn from_unnormalized(entries: Vec<(CMat, f64)>) -> Result<Self, MeasureError> {
        let total: f64 = entries.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(MeasureError::Parameter("weights sum to zero".into()));
        }
        Self::new(entries.into_iter().map(|(p, w)| (p, w / total)).collect())
    }

    pub fn dim(&self) -> usize {
        self.projectors[0].nrows()
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[CMat] {
        &self.projectors
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Samples an index, applies the projective measurement, reports the bit.
    pub fn sample_and_project<R: RngCore + ?Sized>(&self, rho: &DensityMatrix, rng: &mut R) -> bool {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.weights.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                idx = i;
                break;
            }
        }
        let p = rho.expectation(&self.projectors[idx]);
        rng.random::<f64>() < p
    }
}

/// The induced POVM element `sum_i w_i P_i`.
pub fn mixture_to_povm(m: &ProjectiveMixture) -> BinaryPovm {
    let mut e1 = CMat::zeros(m.dim(), m.dim());
    for (p, w) in m.projectors.iter().zip(&m.weights) {
        e1 += p.scale(*w);
    }
    BinaryPovm { e1: linalg::hermitize(&e1) }
}
