//! Ground-truth models and synthetic datasets.

use nalgebra::{DMatrix, DVector};

use super::{rng_stream, Dataset};
use crate::error::{Error, Result};
use crate::linalg::SymBlock;
use crate::linear_gaussian::{LgmStandardForm, LinearGaussianModel};
use crate::mixture::{MixtureModel, MixtureStandardForm};
use crate::model::Hmog;

/// Noise variance along the loading axes.
pub const SIGNAL_AXIS_NOISE: f64 = 0.05;
/// Noise variance along the remaining axes.
pub const NUISANCE_AXIS_NOISE: f64 = 4.0;
/// Weight of loading `j` on nuisance axis `m + j`.
pub const LOADING_TILT: f64 = 0.05;
/// Per-cluster latent variance.
pub const CLUSTER_VARIANCE: f64 = 0.09;

/// Default factor-analysis HMoG for synthetic experiments.
///
/// Loading `j` is `e_j + 0.05·e_{m+j}` (the second term only when `m + j < n`),
/// so cluster structure lives on the first `m` axes. The remaining axes
/// carry large independent noise, which puts the direction of maximum
/// variance nearly perpendicular to the loadings. The small tilt keeps the
/// observable covariance from being exactly diagonal; with an exactly
/// diagonal covariance every factor-analysis loading of the right size
/// explains the data equally well and EM started from small loadings barely
/// moves. Cluster
/// `z` (0-based) sits at `(1 + ⌊z/2m⌋)·(−1)^{⌊z/m⌋}·e_{z mod m}` with
/// variance 0.09 per axis and equal weights. With `k = 1` the latent
/// prior is standard normal.
pub fn default_synthetic_spec(obs_dim: usize, latent_dim: usize, clusters: usize) -> Result<Hmog> {
    let (n, m, k) = (obs_dim, latent_dim, clusters);
    if m == 0 || k == 0 {
        return Err(Error::Config("latent dimension and cluster count must be at least 1".into()));
    }
    if n < m {
        return Err(Error::Config(format!(
            "observable dimension {n} is smaller than latent dimension {m}"
        )));
    }
    let noise = DVector::from_fn(n, |i, _| if i < m { SIGNAL_AXIS_NOISE } else { NUISANCE_AXIS_NOISE });
    let lgm = LinearGaussianModel::from_standard(&LgmStandardForm {
        mean: DVector::zeros(n),
        noise_cov: SymBlock::Diagonal(noise),
        loading: DMatrix::from_fn(n, m, |i, j| {
            if i == j {
                1.0
            } else if i == m + j {
                LOADING_TILT
            } else {
                0.0
            }
        }),
    })?;
    let mog = if k == 1 {
        MixtureModel::from_standard(&MixtureStandardForm {
            weights: DVector::from_element(1, 1.0),
            means: vec![DVector::zeros(m)],
            covs: vec![SymBlock::Full(DMatrix::identity(m, m))],
        })?
    } else {
        let means = (0..k)
            .map(|z| {
                let radius = 1.0 + (z / (2 * m)) as f64;
                let sign = if (z / m) % 2 == 0 { 1.0 } else { -1.0 };
                let mut mu = DVector::zeros(m);
                mu[z % m] = radius * sign;
                mu
            })
            .collect();
        MixtureModel::from_standard(&MixtureStandardForm {
            weights: DVector::from_element(k, 1.0 / k as f64),
            means,
            covs: vec![SymBlock::Full(DMatrix::identity(m, m) * CLUSTER_VARIANCE); k],
        })?
    };
    Hmog::assemble(&lgm, &mog)
}

/// Ancestral samples from `spec`; labels are the sampled clusters `z`.
pub fn gen_synthetic(spec: &Hmog, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    spec.validate()?;
    let mut rng = rng_stream(seed, 0);
    let samples = spec.sample(count, &mut rng)?;
    let (points, labels) = samples.into_iter().map(|(x, _, z)| (x, z)).unzip();
    Dataset::new(points)?.with_labels(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_cov(points: &[DVector<f64>]) -> DMatrix<f64> {
        let n = points[0].len();
        let mean = points.iter().fold(DVector::zeros(n), |a, x| a + x) / points.len() as f64;
        points
            .iter()
            .fold(DMatrix::zeros(n, n), |a, x| a + (x - &mean) * (x - &mean).transpose())
            / points.len() as f64
    }

    #[test]
    fn single_cluster_moments() {
        let spec = default_synthetic_spec(3, 2, 1).unwrap();
        let ds = gen_synthetic(&spec, 10_000, 4).unwrap();
        let cond = spec.conditional_form().unwrap();
        let truth = &cond.loading * cond.loading.transpose() + cond.noise_cov.to_dense();
        let err = (sample_cov(&ds.points) - &truth).norm() / truth.norm();
        assert!(err < 0.05, "relative Frobenius error {err}");
    }

    #[test]
    fn max_variance_is_perpendicular_to_loading() {
        let spec = default_synthetic_spec(2, 1, 2).unwrap();
        let ds = gen_synthetic(&spec, 10_000, 11).unwrap();
        let eig = sample_cov(&ds.points).symmetric_eigen();
        let top = eig.eigenvalues.imax();
        let cos = eig.eigenvectors.column(top)[0].abs();
        assert!(cos < 0.1, "|cos| = {cos}");
        assert_eq!(ds.num_labels(), 2);
    }

    #[test]
    fn deterministic_and_validated() {
        let spec = default_synthetic_spec(4, 2, 3).unwrap();
        assert_eq!(gen_synthetic(&spec, 50, 9).unwrap(), gen_synthetic(&spec, 50, 9).unwrap());
        assert_ne!(gen_synthetic(&spec, 50, 9).unwrap(), gen_synthetic(&spec, 50, 10).unwrap());
        assert!(default_synthetic_spec(1, 2, 2).is_err());
        assert!(gen_synthetic(&spec, 0, 1).is_err());
    }
}
