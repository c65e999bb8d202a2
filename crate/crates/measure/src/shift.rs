//! Finite outcome distributions and the shift distance.

use serde::{Deserialize, Serialize};

use crate::MeasureError;

/// Slack used when comparing outcome values.
const VALUE_TOL: f64 = 1e-12;

/// A distribution on finitely many real values, sorted and merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteDistribution {
    points: Vec<(f64, f64)>,
}

impl FiniteDistribution {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, MeasureError> {
        let total: f64 = points.iter().map(|(_, p)| p).sum();
        if points.iter().any(|(v, p)| !(*p >= 0.0) || !v.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(MeasureError::Parameter(format!("not a probability distribution (total {total})")));
        }
        Ok(Self::merged(points))
    }

    fn merged(mut points: Vec<(f64, f64)>) -> Self {
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
        for (v, p) in points {
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 += p,
                _ => out.push((v, p)),
            }
        }
        Self { points: out }
    }

    pub fn point(value: f64) -> Self {
        Self { points: vec![(value, 1.0)] }
    }

    /// Empirical distribution of the samples.
    pub fn from_samples(samples: &[f64]) -> Self {
        let w = 1.0 / samples.len() as f64;
        Self::merged(samples.iter().map(|&v| (v, w)).collect())
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    /// `Pr[a <= x]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.points.iter().take_while(|(v, _)| *v <= x + VALUE_TOL).map(|(_, p)| p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.points.iter().map(|(v, p)| v * p).sum()
    }

    /// `sup_x |F(x) - G(x)|`.
    pub fn kolmogorov_distance(&self, other: &FiniteDistribution) -> f64 {
        self.points
            .iter()
            .chain(&other.points)
            .map(|(x, _)| (self.cdf(*x) - other.cdf(*x)).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_variation(&self, other: &FiniteDistribution) -> f64 {
        let mut all: Vec<f64> = self.points.iter().chain(&other.points).map(|(v, _)| *v).collect();
        all.sort_by(f64::total_cmp);
        all.dedup();
        let mass = |d: &FiniteDistribution, x: f64| d.points.iter().filter(|(v, _)| *v == x).map(|(_, p)| p).sum::<f64>();
        0.5 * all.iter().map(|&x| (mass(self, x) - mass(other, x)).abs()).sum::<f64>()
    }
}

/// Smallest `delta >= 0` with `Pr_{d0}[a <= x] <= Pr_{d1}[a <= x + eps] + delta` for all `x >= 0`.
///
/// The left side only jumps at support points of `d0` while the right side is
/// nondecreasing, so the supremum is attained on `supp(d0)`.
pub fn shift_distance(d0: &FiniteDistribution, d1: &FiniteDistribution, epsilon: f64) -> f64 {
    d0.points
        .iter()
        .map(|(x, _)| d0.cdf(*x) - d1.cdf(x + epsilon))
        .fold(0.0, f64::max)
}

/// `max(shift(d0, d1), shift(d1, d0))`.
pub fn symmetric_shift_distance(d0: &FiniteDistribution, d1: &FiniteDistribution, epsilon: f64) -> f64 {
    shift_distance(d0, d1, epsilon).max(shift_distance(d1, d0, epsilon))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force oracle: scan a fine grid of x values.
    fn grid_shift(d0: &FiniteDistribution, d1: &FiniteDistribution, eps: f64) -> f64 {
        (0..=20_000)
            .map(|i| i as f64 / 10_000.0)
            .chain(d0.points().iter().map(|(v, _)| *v))
            .map(|x| d0.cdf(x) - d1.cdf(x + eps))
            .fold(0.0, f64::max)
    }

    #[test]
    fn identical_distributions_have_zero_distance() {
        let d = FiniteDistribution::new(vec![(0.1, 0.3), (0.7, 0.7)]).unwrap();
        for eps in [0.0, 0.05, 0.5] {
            assert_eq!(shift_distance(&d, &d, eps), 0.0);
        }
    }

    #[test]
    fn point_masses() {
        let eps = 0.1;
        let a = FiniteDistribution::point(0.3);
        assert_eq!(shift_distance(&a, &FiniteDistribution::point(0.3 + eps), eps), 0.0);
        assert_eq!(shift_distance(&a, &FiniteDistribution::point(0.5), eps), 1.0);
    }

    #[test]
    fn invalid_distribution_is_rejected() {
        assert!(FiniteDistribution::new(vec![(0.1, 0.5)]).is_err());
        assert!(FiniteDistribution::new(vec![(0.1, -0.5), (0.2, 1.5)]).is_err());
    }

    proptest! {
        #[test]
        fn sweep_matches_grid_oracle(
            a in prop::collection::vec((0u32..=100, 1u32..10), 1..5),
            b in prop::collection::vec((0u32..=100, 1u32..10), 1..5),
            eps_step in 0u32..20,
        ) {
            let mk = |v: &[(u32, u32)]| {
                let total: u32 = v.iter().map(|(_, w)| w).sum();
                FiniteDistribution::new(v.iter().map(|&(x, w)| (x as f64 / 100.0, w as f64 / total as f64)).collect()).unwrap()
            };
            let (d0, d1) = (mk(&a), mk(&b));
            let eps = eps_step as f64 / 100.0;
            let fast = shift_distance(&d0, &d1, eps);
            prop_assert!((fast - grid_shift(&d0, &d1, eps)).abs() < 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&fast));
            // Monotone in epsilon.
            prop_assert!(shift_distance(&d0, &d1, eps + 0.05) <= fast + 1e-12);
        }
    }
}
