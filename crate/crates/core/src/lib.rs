//! Hierarchical mixtures of Gaussians.
//!
//! An HMoG couples a linear Gaussian model (probabilistic PCA or factor
//! analysis) with a Gaussian mixture prior on its latent features. Both
//! pieces are conjugated exponential-family harmoniums, which gives closed
//! forms for the observable density, the forward mapping and the E-step,
//! and lets the whole model be trained with a single EM loop whose M-step
//! is solved by Adam.
//!
//! Module map:
//! - [`expfam`]: categorical and multivariate normal families
//! - [`harmonium`]: generic posterior, conjugation and EM machinery
//! - [`mixture`]: Gaussian mixtures as harmoniums
//! - [`linear_gaussian`]: PCA / FA models as harmoniums
//! - [`model`]: the hierarchical model itself
//! - [`optim`]: Adam with domain rejection
//! - [`pipeline`]: data, initialization, training drivers, cross-validation

pub mod error;
pub mod expfam;
pub mod harmonium;
pub mod linalg;
pub mod linear_gaussian;
pub mod mixture;
pub mod model;
pub mod optim;
pub mod pipeline;

#[cfg(test)]
pub(crate) mod testing;

pub use error::{Error, Result};
pub use linalg::{Structure, SymBlock};
pub use linear_gaussian::{LgmStandardForm, LinearGaussianModel};
pub use mixture::{MixtureModel, MixtureStandardForm};
pub use model::Hmog;
pub use optim::AdamConfig;
