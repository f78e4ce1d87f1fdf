//! Categorical and multivariate normal exponential families.
//!
//! Each family exposes its sufficient statistic, log-partition function and
//! the forward (natural → mean) and backward (mean → natural) mappings. The
//! [`ExponentialFamily`] trait works on flat minimal coordinate vectors and
//! is what the generic harmonium machinery builds on; the structured types
//! ([`MvnNatural`], [`MvnMean`]) are what the concrete models use.

pub mod categorical;
pub mod mvn;

use nalgebra::DVector;

use crate::error::Result;

pub use categorical::CategoricalFamily;
pub use mvn::{MvnFamily, MvnMean, MvnNatural, MvnStandard};

/// An exponential family in minimal coordinates.
///
/// Densities have the form `exp(s(x)·θ − ψ(θ)) ν(x)`.
pub trait ExponentialFamily {
    type Point;

    /// Length of natural and mean coordinate vectors.
    fn dimension(&self) -> usize;

    fn sufficient_statistic(&self, x: &Self::Point) -> Result<DVector<f64>>;

    fn log_base_measure(&self, x: &Self::Point) -> f64;

    fn log_partition(&self, natural: &DVector<f64>) -> Result<f64>;

    fn forward(&self, natural: &DVector<f64>) -> Result<DVector<f64>>;

    fn backward(&self, mean: &DVector<f64>) -> Result<DVector<f64>>;

    fn log_density(&self, natural: &DVector<f64>, x: &Self::Point) -> Result<f64> {
        let s = self.sufficient_statistic(x)?;
        Ok(s.dot(natural) - self.log_partition(natural)? + self.log_base_measure(x))
    }
}
