//! Joint outcome statistics for product measurements on multipartite states.

use std::collections::BTreeMap;

use crate::linalg::{self, CMat};
use crate::pi::PiMeasurement;
use crate::state::{check_dim, DensityMatrix};
use crate::MeasureError;

/// `Tr[(Pi_{k_1} ⊗ ... ⊗ Pi_{k_m}) rho]` for every tuple of outcome indices.
pub fn joint_outcome_weights(pis: &[&PiMeasurement], rho: &DensityMatrix) -> Result<Vec<(Vec<usize>, f64)>, MeasureError> {
    let dims: Vec<usize> = pis.iter().map(|p| p.dim()).collect();
    check_dim(dims.iter().product(), rho.dim())?;
    let mut w = CMat::identity(1, 1);
    for p in pis {
        w = linalg::kron(&w, p.basis());
    }
    let rot = w.adjoint() * rho.matrix() * &w;
    let mut out: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    for idx in 0..rho.dim() {
        let mut rest = idx;
        let mut key = vec![0; pis.len()];
        for (r, p) in pis.iter().enumerate().rev() {
            key[r] = p.cluster_of()[rest % dims[r]];
            rest /= dims[r];
        }
        *out.entry(key).or_insert(0.0) += rot[(idx, idx)].re.max(0.0);
    }
    Ok(out.into_iter().collect())
}
