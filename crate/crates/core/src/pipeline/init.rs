//! Initialization schemes for the two training stages.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{empirical_mean, rng_stream};
use crate::error::{Error, Result};
use crate::expfam::mvn::MvnStandard;
use crate::linalg::{Structure, SymBlock};
use crate::linear_gaussian::{LgmStandardForm, LinearGaussianModel};
use crate::mixture::{MixtureModel, MixtureStandardForm};

/// Half-width of the uniform distribution for initial loadings.
pub const LOADING_SCALE: f64 = 0.01;

fn require_points(data: &[DVector<f64>]) -> Result<()> {
    if data.len() < 2 {
        return Err(Error::Data(format!("initialization needs at least 2 points, got {}", data.len())));
    }
    Ok(())
}

/// Observable mean and noise variance from the data; loadings uniform in
/// `[−0.01, 0.01]`; standard-normal latent prior.
pub fn init_lgm(data: &[DVector<f64>], m: usize, structure: Structure, seed: u64) -> Result<LinearGaussianModel> {
    require_points(data)?;
    if m == 0 {
        return Err(Error::Config("latent dimension must be at least 1".into()));
    }
    let n = data[0].len();
    let mean = empirical_mean(data);
    let var = data
        .iter()
        .fold(DVector::zeros(n), |acc, x| acc + (x - &mean).map(|d| d * d))
        / data.len() as f64;
    if let Some(i) = var.iter().position(|v| !(*v > 0.0)) {
        return Err(Error::Data(format!("column {} has zero variance", i + 1)));
    }
    let noise_cov = match structure {
        Structure::Isotropic => SymBlock::Isotropic { dim: n, value: var.mean() },
        Structure::Diagonal => SymBlock::Diagonal(var),
        Structure::Full => SymBlock::Full(DMatrix::from_diagonal(&var)),
    };
    let mut rng = rng_stream(seed, 1);
    let loading = DMatrix::from_fn(n, m, |_, _| rng.random_range(-LOADING_SCALE..=LOADING_SCALE));
    LinearGaussianModel::from_standard(&LgmStandardForm { mean, noise_cov, loading })
}

/// Fits one normal to `projected`; every component takes a draw from it as
/// its mean and its covariance as covariance; weights are uniform.
pub fn init_mog(projected: &[DVector<f64>], k: usize, seed: u64) -> Result<MixtureModel> {
    require_points(projected)?;
    if k == 0 {
        return Err(Error::Config("cluster count must be at least 1".into()));
    }
    let m = projected[0].len();
    let mean = empirical_mean(projected);
    let cov = projected
        .iter()
        .fold(DMatrix::zeros(m, m), |acc, y| acc + (y - &mean) * (y - &mean).transpose())
        / projected.len() as f64;
    let fit = MvnStandard {
        mean,
        cov: SymBlock::Full(cov),
    };
    fit.to_natural()
        .map_err(|e| Error::domain("mixture initialization", format!("degenerate projected covariance: {e}")))?;
    let mut rng = rng_stream(seed, 2);
    let means = fit.sample(k, &mut rng)?;
    MixtureModel::from_standard(&MixtureStandardForm {
        weights: DVector::from_element(k, 1.0 / k as f64),
        means,
        covs: vec![fit.cov.clone(); k],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::mvn::MvnNatural;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn normal_data(n: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        MvnNatural::standard(n, Structure::Full).sample(count, &mut rng).unwrap()
    }

    #[test]
    fn variances_match_data() {
        let data = normal_data(3, 100_000, 1);
        for structure in [Structure::Isotropic, Structure::Diagonal] {
            let lgm = init_lgm(&data, 2, structure, 5).unwrap();
            let s = lgm.to_standard().unwrap();
            for v in s.noise_cov.diagonal().iter() {
                assert!((v - 1.0).abs() < 0.02, "{v}");
            }
            assert!(s.loading.iter().all(|w| w.abs() <= LOADING_SCALE + 1e-12));
            assert!(s.mean.norm() < 0.02);
        }
    }

    #[test]
    fn loadings_are_uniform_draws() {
        let data = normal_data(2, 10, 2);
        let a = init_lgm(&data, 1, Structure::Diagonal, 7).unwrap();
        let b = init_lgm(&data, 1, Structure::Diagonal, 7).unwrap();
        let c = init_lgm(&data, 1, Structure::Diagonal, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn constant_column_is_rejected() {
        let data: Vec<_> = (0..10).map(|i| DVector::from_vec(vec![i as f64, 3.0])).collect();
        assert!(matches!(init_lgm(&data, 1, Structure::Diagonal, 0), Err(Error::Data(m)) if m.contains("column 2")));
        assert!(init_lgm(&data[..1], 1, Structure::Diagonal, 0).is_err());
    }

    #[test]
    fn mixture_init_scheme() {
        let data = normal_data(2, 500, 3);
        let mog = init_mog(&data, 3, 4).unwrap();
        let s = mog.to_standard().unwrap();
        for w in s.weights.iter() {
            assert!((w - 1.0 / 3.0).abs() < 1e-12);
        }
        let first = s.covs[0].to_dense();
        for c in &s.covs {
            assert!((c.to_dense() - &first).norm() < 1e-9);
        }
        assert_eq!(mog, init_mog(&data, 3, 4).unwrap());

        // k = 1: the fitted normal with its mean replaced by one draw
        let one = init_mog(&data, 1, 4).unwrap().to_standard().unwrap();
        assert!((one.covs[0].to_dense() - first).norm() < 1e-9);
        assert!((&one.means[0] - &s.means[0]).norm() < 1e-9);
    }

    #[test]
    fn degenerate_projection_is_rejected() {
        let data: Vec<_> = (0..10).map(|i| DVector::from_vec(vec![i as f64, 2.0 * i as f64])).collect();
        assert!(init_mog(&data, 2, 0).is_err());
    }
}
