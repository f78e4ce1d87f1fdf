//! Two-layer exponential-family harmoniums in minimal coordinates.
//!
//! A harmonium over `(x, y)` has density proportional to
//! `exp(s_X(x)·θ_X + s_Y(y)·θ_Y + s_X(x)·Θ_XY·s_Y(y))`. When the shifted
//! observable log-partition is affine in `s_Y(y)` (the conjugation
//! equation), the harmonium log-partition and the observable density reduce
//! to latent-space quantities. The concrete models compute their own
//! conjugation parameters; this module evaluates and verifies them, and
//! runs the generic EM block.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{check_dim, Error, Result};
use crate::expfam::ExponentialFamily;

/// Rows per chunk in deterministic parallel reductions.
pub(crate) const CHUNK: usize = 64;

/// Maps fixed-size chunks of `0..n` in parallel and folds the chunk results
/// in index order, so the result does not depend on the thread count.
pub(crate) fn chunked_reduce<T, F, G>(n: usize, map: F, fold: G) -> Result<Option<T>>
where
    T: Send,
    F: Fn(Range<usize>) -> Result<T> + Sync,
    G: Fn(T, T) -> T,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| map(c * CHUNK..((c + 1) * CHUNK).min(n)))
        .collect::<Result<_>>()?;
    Ok(parts.into_iter().reduce(fold))
}

/// Sum of `f(i)` over `0..n` with a deterministic association order.
pub(crate) fn chunked_sum<F>(n: usize, f: F) -> Result<f64>
where
    F: Fn(usize) -> Result<f64> + Sync,
{
    let total = chunked_reduce(
        n,
        |range| range.map(&f).try_fold(0.0, |acc, v| v.map(|v| acc + v)),
        |a, b| a + b,
    )?;
    Ok(total.unwrap_or(0.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Harmonium<X, Y> {
    pub obs_family: X,
    pub lat_family: Y,
    pub obs_params: DVector<f64>,
    pub lat_params: DVector<f64>,
    /// `dim_X × dim_Y` interaction in minimal coordinates.
    pub interaction: DMatrix<f64>,
}

/// `ρ` and `ρ₀` with `ψ_X(θ_X + Θ_XY·s_Y(y)) = s_Y(y)·ρ + ρ₀` for all `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugationParams {
    pub rho: DVector<f64>,
    pub rho0: f64,
}

/// Averaged sufficient statistics `(η_X, η_Y, H_XY)` from an E-step.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmoniumMeans {
    pub obs: DVector<f64>,
    pub lat: DVector<f64>,
    pub interaction: DMatrix<f64>,
}

impl HarmoniumMeans {
    fn zeros(dx: usize, dy: usize) -> Self {
        Self {
            obs: DVector::zeros(dx),
            lat: DVector::zeros(dy),
            interaction: DMatrix::zeros(dx, dy),
        }
    }

    fn add(mut self, other: HarmoniumMeans) -> Self {
        self.obs += other.obs;
        self.lat += other.lat;
        self.interaction += other.interaction;
        self
    }
}

impl<X: ExponentialFamily, Y: ExponentialFamily> Harmonium<X, Y> {
    pub fn new(
        obs_family: X,
        lat_family: Y,
        obs_params: DVector<f64>,
        lat_params: DVector<f64>,
        interaction: DMatrix<f64>,
    ) -> Result<Self> {
        let (dx, dy) = (obs_family.dimension(), lat_family.dimension());
        check_dim("observable natural parameters", dx, obs_params.len())?;
        check_dim("latent natural parameters", dy, lat_params.len())?;
        check_dim("interaction rows", dx, interaction.nrows())?;
        check_dim("interaction columns", dy, interaction.ncols())?;
        Ok(Self {
            obs_family,
            lat_family,
            obs_params,
            lat_params,
            interaction,
        })
    }

    /// `θ_Y + s_X(x)·Θ_XY`, the natural parameters of `p(y | x)`.
    pub fn posterior_natural_params(&self, x: &X::Point) -> Result<DVector<f64>> {
        let s = self.obs_family.sufficient_statistic(x)?;
        Ok(&self.lat_params + self.interaction.tr_mul(&s))
    }

    /// `θ_X + Θ_XY·s_Y(y)`, the natural parameters of `p(x | y)`.
    pub fn likelihood_natural_params(&self, y: &Y::Point) -> Result<DVector<f64>> {
        let s = self.lat_family.sufficient_statistic(y)?;
        Ok(&self.obs_params + &self.interaction * s)
    }

    /// Largest conjugation-equation residual over `probes`.
    pub fn check_conjugation(&self, c: &ConjugationParams, probes: &[Y::Point]) -> Result<f64> {
        check_dim("conjugation parameters", self.lat_family.dimension(), c.rho.len())?;
        let mut worst: f64 = 0.0;
        for (i, y) in probes.iter().enumerate() {
            let s = self.lat_family.sufficient_statistic(y)?;
            let shifted = &self.obs_params + &self.interaction * &s;
            let psi = self.obs_family.log_partition(&shifted).map_err(|e| {
                Error::domain(
                    "conjugation check",
                    format!("shifted observable parameters invalid at probe {i}: {e}"),
                )
            })?;
            worst = worst.max((psi - s.dot(&c.rho) - c.rho0).abs());
        }
        Ok(worst)
    }

    /// `ψ_XY = ψ_Y(θ_Y + ρ) + ρ₀`.
    pub fn conjugated_log_partition(&self, c: &ConjugationParams) -> Result<f64> {
        Ok(self.lat_family.log_partition(&(&self.lat_params + &c.rho))? + c.rho0)
    }

    /// `log p(x) = s_X(x)·θ_X + ψ_Y(θ_Y + s_X(x)·Θ_XY) − ψ_XY + log ν_X(x)`.
    pub fn observable_log_density(&self, c: &ConjugationParams, x: &X::Point) -> Result<f64> {
        let psi_xy = self.conjugated_log_partition(c)?;
        self.observable_log_density_with(psi_xy, x)
    }

    fn observable_log_density_with(&self, psi_xy: f64, x: &X::Point) -> Result<f64> {
        let s = self.obs_family.sufficient_statistic(x)?;
        let post = &self.lat_params + self.interaction.tr_mul(&s);
        Ok(s.dot(&self.obs_params) + self.lat_family.log_partition(&post)? - psi_xy
            + self.obs_family.log_base_measure(x))
    }

    /// Mean observable log-density over `data`.
    pub fn mean_log_likelihood(&self, c: &ConjugationParams, data: &[X::Point]) -> Result<f64>
    where
        X: Sync,
        Y: Sync,
        X::Point: Sync,
    {
        if data.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        let psi_xy = self.conjugated_log_partition(c)?;
        let total = chunked_sum(data.len(), |i| self.observable_log_density_with(psi_xy, &data[i]))?;
        Ok(total / data.len() as f64)
    }

    /// The E-step: averages `s_X(x)`, `E[s_Y | x]` and their outer product.
    pub fn expected_statistics<F>(&self, data: &[X::Point], latent_forward: F) -> Result<HarmoniumMeans>
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
        X: Sync,
        Y: Sync,
        X::Point: Sync,
    {
        if data.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        let (dx, dy) = (self.obs_family.dimension(), self.lat_family.dimension());
        let sum = chunked_reduce(
            data.len(),
            |range| {
                let mut acc = HarmoniumMeans::zeros(dx, dy);
                for x in &data[range] {
                    let s = self.obs_family.sufficient_statistic(x)?;
                    let post = &self.lat_params + self.interaction.tr_mul(&s);
                    let ey = latent_forward(&post)?;
                    acc.interaction.ger(1.0, &s, &ey, 1.0);
                    acc.obs += s;
                    acc.lat += ey;
                }
                Ok(acc)
            },
            HarmoniumMeans::add,
        )?
        .expect("data is nonempty");
        let scale = 1.0 / data.len() as f64;
        Ok(HarmoniumMeans {
            obs: sum.obs * scale,
            lat: sum.lat * scale,
            interaction: sum.interaction * scale,
        })
    }

    /// One EM iteration: E-step via `latent_forward`, M-step via
    /// `joint_backward` applied to the averaged statistics.
    pub fn em_iteration<F, B>(&self, data: &[X::Point], latent_forward: F, joint_backward: B) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> Result<DVector<f64>> + Sync,
        B: FnOnce(&HarmoniumMeans) -> Result<Self>,
        X: Sync,
        Y: Sync,
        X::Point: Sync,
    {
        let means = self.expected_statistics(data, latent_forward)?;
        joint_backward(&means)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expfam::{CategoricalFamily, MvnFamily, MvnNatural};
    use crate::linalg::Structure;
    use crate::testing::random_natural;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn independent() -> Harmonium<MvnFamily, CategoricalFamily> {
        let obs = MvnNatural::standard(2, Structure::Full);
        let fam = obs.family();
        Harmonium::new(
            fam,
            CategoricalFamily::new(3).unwrap(),
            obs.coords(),
            DVector::from_vec(vec![0.4, -0.3]),
            DMatrix::zeros(fam.coord_len(), 2),
        )
        .unwrap()
    }

    #[test]
    fn zero_interaction_posterior_is_prior() {
        let h = independent();
        let post = h.posterior_natural_params(&DVector::from_vec(vec![1.0, -2.0])).unwrap();
        assert_eq!(post, h.lat_params);
    }

    #[test]
    fn zero_interaction_log_partition_factorizes() {
        let h = independent();
        let psi_x = h.obs_family.log_partition(&h.obs_params).unwrap();
        let c = ConjugationParams {
            rho: DVector::zeros(2),
            rho0: psi_x,
        };
        let expected = psi_x + h.lat_family.log_partition(&h.lat_params).unwrap();
        assert_relative_eq!(h.conjugated_log_partition(&c).unwrap(), expected, epsilon = 1e-14);
        assert!(h.check_conjugation(&c, &[1, 2, 3]).unwrap() < 1e-14);
        let off = ConjugationParams { rho0: psi_x + 0.1, ..c };
        assert!(h.check_conjugation(&off, &[1, 2, 3]).unwrap() >= 0.1 - 1e-15);
    }

    #[test]
    fn check_conjugation_names_bad_probe() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let obs = random_natural(1, Structure::Full, &mut rng);
        let fam = obs.family();
        // second probe pushes the precision negative
        let mut interaction = DMatrix::zeros(fam.coord_len(), 2);
        interaction[(1, 1)] = 10.0;
        let h = Harmonium::new(fam, CategoricalFamily::new(3).unwrap(), obs.coords(), DVector::zeros(2), interaction).unwrap();
        let c = ConjugationParams {
            rho: DVector::zeros(2),
            rho0: 0.0,
        };
        let err = h.check_conjugation(&c, &[1, 3]).unwrap_err();
        assert!(err.to_string().contains("probe 1"), "{err}");
    }

    #[test]
    fn rejects_mismatched_shapes() {
        let fam = MvnFamily::new(2, Structure::Full);
        let r = Harmonium::new(
            fam,
            CategoricalFamily::new(3).unwrap(),
            DVector::zeros(5),
            DVector::zeros(2),
            DMatrix::zeros(4, 2),
        );
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn chunked_sum_is_order_stable() {
        let values: Vec<f64> = (0..1000).map(|i| (i as f64).sin() * 1e-3 + 1.0).collect();
        let a = chunked_sum(values.len(), |i| Ok(values[i])).unwrap();
        let b = chunked_sum(values.len(), |i| Ok(values[i])).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_relative_eq!(a, values.iter().sum::<f64>(), epsilon = 1e-10);
    }
}
