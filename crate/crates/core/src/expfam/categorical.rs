//! Categorical distributions over `1..=k` with reference category 1.

use nalgebra::DVector;
use rand::Rng;

use super::ExponentialFamily;
use crate::error::{check_dim, check_finite, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CategoricalFamily {
    pub num_categories: usize,
}

impl CategoricalFamily {
    pub fn new(num_categories: usize) -> Result<Self> {
        if num_categories == 0 {
            return Err(Error::Config("a categorical family needs at least one category".into()));
        }
        Ok(Self { num_categories })
    }

    /// Natural dimension `k − 1`.
    pub fn dim(&self) -> usize {
        self.num_categories - 1
    }
}

/// One-hot statistic of length `k − 1`; category 1 maps to the zero vector.
pub fn sufficient_statistic(z: usize, k: usize) -> Result<DVector<f64>> {
    if z == 0 || z > k {
        return Err(Error::IndexOutOfRange { index: z, k });
    }
    let mut s = DVector::zeros(k - 1);
    if z > 1 {
        s[z - 2] = 1.0;
    }
    Ok(s)
}

/// `log(1 + Σ exp θᵢ)`.
pub fn log_partition(natural: &DVector<f64>) -> Result<f64> {
    check_finite("categorical natural parameters", natural.as_slice())?;
    Ok(log_partition_unchecked(natural.as_slice()))
}

pub(crate) fn log_partition_unchecked(natural: &[f64]) -> f64 {
    let max = natural.iter().copied().fold(0.0_f64, f64::max);
    let tail: f64 = natural.iter().map(|t| (t - max).exp()).sum();
    max + ((-max).exp() + tail).ln()
}

/// Probabilities of categories `2..=k`.
pub fn forward(natural: &DVector<f64>) -> Result<DVector<f64>> {
    check_finite("categorical natural parameters", natural.as_slice())?;
    let psi = log_partition_unchecked(natural.as_slice());
    Ok(natural.map(|t| (t - psi).exp()))
}

/// Full probability vector over `1..=k` from natural parameters.
pub fn probabilities(natural: &DVector<f64>) -> Result<DVector<f64>> {
    let tail = forward(natural)?;
    Ok(full_probabilities(&tail))
}

/// Prepends the reference-category probability `1 − Σ η`.
pub fn full_probabilities(mean: &DVector<f64>) -> DVector<f64> {
    let mut p = DVector::zeros(mean.len() + 1);
    p[0] = (1.0 - mean.sum()).max(0.0);
    p.rows_mut(1, mean.len()).copy_from(mean);
    p
}

/// `θᵢ = log(ηᵢ / (1 − Σ η))`; boundary probabilities are rejected.
pub fn backward(mean: &DVector<f64>) -> Result<DVector<f64>> {
    check_finite("categorical mean parameters", mean.as_slice())?;
    if let Some(i) = mean.iter().position(|p| *p <= 0.0) {
        return Err(Error::domain(
            "categorical backward mapping",
            format!("probability of category {} is {} (must be positive)", i + 2, mean[i]),
        ));
    }
    let reference = 1.0 - mean.sum();
    if reference <= 0.0 {
        return Err(Error::domain(
            "categorical backward mapping",
            format!("reference category probability is {reference} (must be positive)"),
        ));
    }
    Ok(mean.map(|p| (p / reference).ln()))
}

/// Natural parameters from a full probability vector over `1..=k`.
pub fn from_probabilities(p: &DVector<f64>) -> Result<DVector<f64>> {
    if p.is_empty() {
        return Err(Error::Config("empty probability vector".into()));
    }
    if let Some(i) = p.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::domain(
            "categorical backward mapping",
            format!("probability of category {} is {} (must be positive)", i + 1, p[i]),
        ));
    }
    Ok(p.rows(1, p.len() - 1).map(|v| (v / p[0]).ln()))
}

pub fn log_density(natural: &DVector<f64>, z: usize) -> Result<f64> {
    let s = sufficient_statistic(z, natural.len() + 1)?;
    Ok(s.dot(natural) - log_partition(natural)?)
}

/// Draws one category index in `1..=k` from a full probability vector.
pub fn sample_index<R: Rng + ?Sized>(probabilities: &DVector<f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i + 1;
        }
    }
    probabilities.len()
}

pub fn sample<R: Rng + ?Sized>(natural: &DVector<f64>, count: usize, rng: &mut R) -> Result<Vec<usize>> {
    let p = probabilities(natural)?;
    Ok((0..count).map(|_| sample_index(&p, rng)).collect())
}

impl ExponentialFamily for CategoricalFamily {
    type Point = usize;

    fn dimension(&self) -> usize {
        self.dim()
    }

    fn sufficient_statistic(&self, z: &usize) -> Result<DVector<f64>> {
        sufficient_statistic(*z, self.num_categories)
    }

    fn log_base_measure(&self, _z: &usize) -> f64 {
        0.0
    }

    fn log_partition(&self, natural: &DVector<f64>) -> Result<f64> {
        check_dim("categorical natural parameters", self.dim(), natural.len())?;
        log_partition(natural)
    }

    fn forward(&self, natural: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("categorical natural parameters", self.dim(), natural.len())?;
        forward(natural)
    }

    fn backward(&self, mean: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("categorical mean parameters", self.dim(), mean.len())?;
        backward(mean)
    }
}
