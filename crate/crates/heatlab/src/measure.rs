//! Probability measures on a discrete metric-measure space.

use crate::error::{Error, Result};
use crate::space::DiscreteMMSpace;
use nalgebra::DVector;

/// A probability measure, stored as a density against the reference measure
/// together with the cached point masses `mu_i = rho_i * m_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbMeasure {
    density: DVector<f64>,
    masses: DVector<f64>,
}

impl ProbMeasure {
    /// Normalize a nonnegative density into a probability measure.
    pub fn from_density(space: &DiscreteMMSpace, density: &[f64]) -> Result<Self> {
        if density.len() != space.n() {
            return Err(Error::SpaceMismatch(density.len(), space.n()));
        }
        let mut masses = DVector::zeros(space.n());
        for (i, &rho) in density.iter().enumerate() {
            if rho < 0.0 || !rho.is_finite() {
                return Err(Error::NonpositiveMeasure(i, rho));
            }
            masses[i] = rho * space.measure()[i];
        }
        let total = masses.sum();
        if !(total > 0.0) {
            return Err(Error::NonpositiveMeasure(0, 0.0));
        }
        masses /= total;
        let density = DVector::from_fn(space.n(), |i, _| masses[i] / space.measure()[i]);
        Ok(ProbMeasure { density, masses })
    }

    /// Normalize nonnegative point masses into a probability measure.
    pub fn from_masses(space: &DiscreteMMSpace, masses: &[f64]) -> Result<Self> {
        if masses.len() != space.n() {
            return Err(Error::SpaceMismatch(masses.len(), space.n()));
        }
        let density: Vec<f64> = masses
            .iter()
            .zip(space.measure().iter())
            .map(|(&mu, &m)| mu / m)
            .collect();
        Self::from_density(space, &density)
    }

    /// Unit mass at a single point.
    pub fn dirac(space: &DiscreteMMSpace, i: usize) -> Self {
        let mut density = vec![0.0; space.n()];
        density[i] = 1.0 / space.measure()[i];
        Self::from_density(space, &density).expect("dirac is valid")
    }

    /// The normalized reference measure itself.
    pub fn uniform(space: &DiscreteMMSpace) -> Self {
        Self::from_density(space, &vec![1.0; space.n()]).expect("uniform is valid")
    }

    pub fn density(&self) -> &DVector<f64> {
        &self.density
    }

    pub fn masses(&self) -> &DVector<f64> {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.density.len()
    }

    pub fn is_empty(&self) -> bool {
        self.density.is_empty()
    }

    pub fn is_strictly_positive(&self) -> bool {
        self.density.iter().all(|&x| x > 0.0)
    }

    /// Convex combination `(1 - t) * self + t * other` in the linear
    /// structure of measures.
    pub fn mix(&self, other: &ProbMeasure, t: f64) -> ProbMeasure {
        let masses: Vec<f64> = self
            .masses
            .iter()
            .zip(other.masses.iter())
            .map(|(&a, &b)| (1.0 - t) * a + t * b)
            .collect();
        let density = DVector::from_fn(self.len(), |i, _| {
            (1.0 - t) * self.density[i] + t * other.density[i]
        });
        ProbMeasure {
            density,
            masses: DVector::from_vec(masses),
        }
    }
}
