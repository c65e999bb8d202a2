//! Density matrices.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::linalg::{self, c, CMat, CVec};
use crate::MeasureError;

/// Tolerance for Hermiticity and unit trace.
pub const STATE_TOL: f64 = 1e-9;

/// Hermitian, unit-trace, positive semidefinite matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix {
    matrix: CMat,
}

impl DensityMatrix {
    pub fn new(matrix: CMat) -> Result<Self, MeasureError> {
        if !linalg::is_hermitian(&matrix, STATE_TOL) {
            return Err(MeasureError::InvalidOperator("density matrix is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(MeasureError::InvalidOperator(format!("density matrix has trace {tr}")));
        }
        let (values, _) = linalg::hermitian_eigen(&matrix)?;
        if values.first().is_some_and(|&v| v < -STATE_TOL) {
            return Err(MeasureError::InvalidOperator(format!("negative eigenvalue {}", values[0])));
        }
        Ok(Self { matrix: linalg::hermitize(&matrix) })
    }

    /// Builds `m / Tr m` for a positive operator, skipping the PSD check.
    pub(crate) fn from_unnormalized(m: CMat) -> Result<Self, MeasureError> {
        let tr = m.trace().re;
        if !(tr > 0.0) {
            return Err(MeasureError::Sampling("zero-probability branch".into()));
        }
        Ok(Self { matrix: linalg::hermitize(&m.unscale(tr)) })
    }

    pub fn pure(v: &CVec) -> Result<Self, MeasureError> {
        let norm = v.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(MeasureError::InvalidOperator(format!("state vector has norm {norm}")));
        }
        Ok(Self { matrix: v * v.adjoint() })
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut m = CMat::zeros(dim, dim);
        m[(i, i)] = c(1.0);
        Self { matrix: m }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: linalg::identity(dim).unscale(dim as f64) }
    }

    /// Random state of the given rank from the induced (Ginibre) measure.
    pub fn random<R: RngCore + ?Sized>(dim: usize, rank: usize, rng: &mut R) -> Self {
        let g = linalg::gaussian_matrix(dim, rank.max(1), rng);
        let m = &g * g.adjoint();
        Self::from_unnormalized(m).expect("nonzero Gaussian matrix")
    }

    /// Random state with uniformly chosen rank.
    pub fn random_any_rank<R: RngCore + ?Sized>(dim: usize, rng: &mut R) -> Self {
        let rank = rng.random_range(1..=dim);
        Self::random(dim, rank, rng)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    /// `Re Tr[op rho]`.
    pub fn expectation(&self, op: &CMat) -> f64 {
        linalg::trace_product(op, &self.matrix)
    }

    /// `1/2 ||rho - sigma||_1`.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64, MeasureError> {
        check_dim(self.dim(), other.dim())?;
        Ok(0.5 * linalg::trace_norm(&(&self.matrix - &other.matrix))?)
    }

    /// Convex combination `(1-t) self + t other`.
    pub fn mix(&self, other: &DensityMatrix, t: f64) -> Result<DensityMatrix, MeasureError> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self { matrix: self.matrix.scale(1.0 - t) + other.matrix.scale(t) })
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        Self { matrix: linalg::kron(&self.matrix, &other.matrix) }
    }

    /// `K rho K^dagger / Tr[...]`.
    pub fn conjugate_normalized(&self, k: &CMat) -> Result<(DensityMatrix, f64), MeasureError> {
        let m = k * &self.matrix * k.adjoint();
        let p = m.trace().re;
        Ok((Self::from_unnormalized(m)?, p))
    }

    /// Eigen-decomposition as a mixture of pure states, dropping null weight.
    pub fn pure_ensemble(&self) -> Result<Vec<(f64, CVec)>, MeasureError> {
        let (values, vectors) = linalg::hermitian_eigen(&self.matrix)?;
        Ok(values
            .into_iter()
            .enumerate()
            .filter(|(_, w)| *w > 1e-15)
            .map(|(j, w)| (w, vectors.column(j).into_owned()))
            .collect())
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<(), MeasureError> {
    if expected != got {
        Err(MeasureError::Dimension { expected, got })
    } else {
        Ok(())
    }
}
