//! Linear Gaussian models (probabilistic PCA and factor analysis).
//!
//! The joint density is `∝ exp(s_X(x)·θ_X + s_Y(y)·θ_Y + xᵀΘ_XY y)` with a
//! structured observable block (isotropic for PCA, diagonal for FA) and a
//! full latent block. The interaction only couples first-order statistics,
//! so conditioning on `y` shifts `θ^μ_X` and conditioning on `x` shifts
//! `θ^μ_Y`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::expfam::mvn::{forward_with, log_partition_with, LN_2PI};
use crate::expfam::{MvnFamily, MvnMean, MvnNatural};
use crate::harmonium::{chunked_reduce, chunked_sum, ConjugationParams, Harmonium};
use crate::linalg::{Structure, SymBlock, SymFactor};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianModel {
    /// `(θ^μ_X, Θ_XX)`.
    pub obs: MvnNatural,
    /// `(θ^μ_Y, Θ_YY)`, always full structure.
    pub lat: MvnNatural,
    /// `Θ_XY`, `n × m`.
    pub interaction: DMatrix<f64>,
}

/// `x | y ~ N(μ + W y, Σ)` with `y ~ N(0, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LgmStandardForm {
    pub mean: DVector<f64>,
    pub noise_cov: SymBlock,
    pub loading: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LgmConjugation {
    pub rho0: f64,
    /// `(ρ^μ_Y, P_YY)` in the latent natural-parameter layout.
    pub rho: MvnNatural,
}

/// Mean parameters of the joint: `(η_X, H_XX)`, `(η_Y, H_YY)` and `H_XY`.
#[derive(Debug, Clone, PartialEq)]
pub struct LgmMeans {
    pub obs: MvnMean,
    pub lat: MvnMean,
    pub interaction: DMatrix<f64>,
}

impl LgmMeans {
    fn zeros(n: usize, m: usize, structure: Structure) -> Self {
        Self {
            obs: MvnMean::zeros(n, structure),
            lat: MvnMean::zeros(m, Structure::Full),
            interaction: DMatrix::zeros(n, m),
        }
    }

    fn add(mut self, other: Self) -> Self {
        self.obs = self.obs.add(&other.obs);
        self.lat = self.lat.add(&other.lat);
        self.interaction += other.interaction;
        self
    }

    fn scale(self, a: f64) -> Self {
        Self {
            obs: self.obs.scale(a),
            lat: self.lat.scale(a),
            interaction: self.interaction * a,
        }
    }
}

/// The observable conditional `x | y ~ N(a + B y, D)`.
pub(crate) struct Conditional {
    pub factor: SymFactor,
    pub cov: SymBlock,
    pub offset: DVector<f64>,
    pub gain: DMatrix<f64>,
}

impl Conditional {
    pub fn new(obs: &MvnNatural, interaction: &DMatrix<f64>) -> Result<Self> {
        let factor = obs.precision_factor()?;
        Ok(Self {
            cov: factor.inverse(),
            offset: factor.solve_vec(&obs.first),
            gain: factor.solve_mat(interaction),
            factor,
        })
    }

    /// Moments of `x` and `x yᵀ` when `y` has mean `m` and second moment `s`.
    pub fn push_forward(&self, m: &DVector<f64>, s: &DMatrix<f64>) -> (MvnMean, DMatrix<f64>) {
        let structure = self.cov.structure();
        let ex = &self.offset + &self.gain * m;
        let cross = &self.offset * m.transpose() + &self.gain * s;
        // E[xxᵀ] = D + a aᵀ + a mᵀBᵀ + B m aᵀ + B S Bᵀ
        let bs = &self.gain * s;
        let second = match structure {
            Structure::Full => {
                let bm = &self.gain * m;
                let dense = self.cov.to_dense()
                    + &self.offset * self.offset.transpose()
                    + &self.offset * bm.transpose()
                    + &bm * self.offset.transpose()
                    + &bs * self.gain.transpose();
                SymBlock::project(&dense, Structure::Full)
            }
            _ => {
                let bm = &self.gain * m;
                let n = ex.len();
                let diag = DVector::from_iterator(
                    n,
                    (0..n).map(|i| {
                        let a = self.offset[i];
                        a * a + 2.0 * a * bm[i] + bs.row(i).dot(&self.gain.row(i))
                    }),
                );
                let diag = diag + self.cov.diagonal();
                match structure {
                    Structure::Diagonal => SymBlock::Diagonal(diag),
                    _ => SymBlock::Isotropic {
                        dim: n,
                        value: diag.sum() / n as f64,
                    },
                }
            }
        };
        (MvnMean { first: ex, second }, cross)
    }
}

impl LinearGaussianModel {
    pub fn new(obs: MvnNatural, lat: MvnNatural, interaction: DMatrix<f64>) -> Result<Self> {
        check_dim("interaction rows", obs.dim(), interaction.nrows())?;
        check_dim("interaction columns", lat.dim(), interaction.ncols())?;
        if lat.structure() != Structure::Full {
            return Err(Error::Config("linear Gaussian latent block must have full structure".into()));
        }
        Ok(Self { obs, lat, interaction })
    }

    pub fn obs_dim(&self) -> usize {
        self.obs.dim()
    }

    pub fn lat_dim(&self) -> usize {
        self.lat.dim()
    }

    pub fn structure(&self) -> Structure {
        self.obs.structure()
    }

    /// Conjugation parameters in `O(n·m²)` for diagonal and isotropic
    /// observable blocks.
    pub fn conjugation_parameters(&self) -> Result<LgmConjugation> {
        conjugation_parameters(&self.obs, &self.interaction)
    }

    /// `θ_Y + ρ_Y`: natural parameters of the latent marginal `p(y)`.
    pub fn latent_marginal(&self) -> Result<MvnNatural> {
        Ok(self.lat.add(&self.conjugation_parameters()?.rho))
    }

    pub fn log_partition(&self) -> Result<f64> {
        let c = self.conjugation_parameters()?;
        Ok(self.lat.add(&c.rho).log_partition()? + c.rho0)
    }

    /// Natural parameters of `p(y | x)`.
    pub fn posterior(&self, x: &DVector<f64>) -> Result<MvnNatural> {
        check_dim("observation", self.obs_dim(), x.len())?;
        Ok(MvnNatural {
            first: &self.lat.first + self.interaction.tr_mul(x),
            second: self.lat.second.clone(),
        })
    }

    /// `E[y | x]`.
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.posterior(x)?.forward()?.first)
    }

    pub fn observable_log_density(&self, x: &DVector<f64>) -> Result<f64> {
        let psi = self.log_partition()?;
        let post = self.lat.precision_factor()?;
        self.observable_log_density_with(psi, &post, x)
    }

    fn observable_log_density_with(&self, psi_xy: f64, post: &SymFactor, x: &DVector<f64>) -> Result<f64> {
        check_dim("observation", self.obs_dim(), x.len())?;
        let first = &self.lat.first + self.interaction.tr_mul(x);
        Ok(self.obs.pair(x) + log_partition_with(&first, post) - psi_xy - 0.5 * self.obs_dim() as f64 * LN_2PI)
    }

    pub fn joint_log_density(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_dim("observation", self.obs_dim(), x.len())?;
        check_dim("latent point", self.lat_dim(), y.len())?;
        let d = (self.obs_dim() + self.lat_dim()) as f64;
        Ok(self.obs.pair(x) + self.lat.pair(y) + x.dot(&(&self.interaction * y)) - self.log_partition()?
            - 0.5 * d * LN_2PI)
    }

    pub fn mean_log_likelihood(&self, data: &[DVector<f64>]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        let psi = self.log_partition()?;
        let post = self.lat.precision_factor()?;
        Ok(chunked_sum(data.len(), |i| self.observable_log_density_with(psi, &post, &data[i]))? / data.len() as f64)
    }

    /// Joint forward mapping through the dense `(n+m)`-dimensional joint
    /// precision. Costs `O((n+m)³)`; kept as a reference for [`Self::forward`].
    pub fn forward_dense(&self) -> Result<LgmMeans> {
        let (n, m) = (self.obs_dim(), self.lat_dim());
        let mut precision = DMatrix::zeros(n + m, n + m);
        precision
            .view_mut((0, 0), (n, n))
            .copy_from(&(self.obs.second.to_dense() * -2.0));
        precision
            .view_mut((n, n), (m, m))
            .copy_from(&(self.lat.second.to_dense() * -2.0));
        precision.view_mut((0, n), (n, m)).copy_from(&(-&self.interaction));
        precision
            .view_mut((n, 0), (m, n))
            .copy_from(&(-self.interaction.transpose()));
        let mut first = DVector::zeros(n + m);
        first.rows_mut(0, n).copy_from(&self.obs.first);
        first.rows_mut(n, m).copy_from(&self.lat.first);
        let joint = SymBlock::Full(precision)
            .factor()
            .map_err(|_| Error::domain("linear Gaussian forward mapping", "joint precision is not positive definite"))?;
        let means = forward_with(&first, &joint);
        let dense = means.second.to_dense();
        Ok(LgmMeans {
            obs: MvnMean {
                first: means.first.rows(0, n).into_owned(),
                second: SymBlock::project(&dense.view((0, 0), (n, n)).into_owned(), self.structure()),
            },
            lat: MvnMean {
                first: means.first.rows(n, m).into_owned(),
                second: SymBlock::Full(dense.view((n, n), (m, m)).into_owned()),
            },
            interaction: dense.view((0, n), (n, m)).into_owned(),
        })
    }

    /// Joint forward mapping through the latent marginal and the observable
    /// conditional, in `O(n·m²)` for structured observable blocks.
    pub fn forward(&self) -> Result<LgmMeans> {
        let cond = Conditional::new(&self.obs, &self.interaction)?;
        let c = conjugation_with(&self.obs, &self.interaction, &cond);
        let lat = self.lat.add(&c.rho).forward()?;
        let (obs, interaction) = cond.push_forward(&lat.first, &lat.second.to_dense());
        Ok(LgmMeans { obs, lat, interaction })
    }

    /// Averaged complete-data statistics under `p(y | x)`.
    pub fn expected_statistics(&self, data: &[DVector<f64>]) -> Result<LgmMeans> {
        if data.is_empty() {
            return Err(Error::Data("empty dataset".into()));
        }
        let (n, m, structure) = (self.obs_dim(), self.lat_dim(), self.structure());
        for x in data {
            check_dim("observation", n, x.len())?;
        }
        let post_cov = self.lat.precision_factor()?.inverse().to_dense();
        let sum = chunked_reduce(
            data.len(),
            |range| {
                let mut acc = LgmMeans::zeros(n, m, structure);
                for x in &data[range] {
                    let ey = &post_cov * (&self.lat.first + self.interaction.tr_mul(x));
                    acc.obs.first += x;
                    acc.obs.second = acc.obs.second.add(&SymBlock::outer(x, structure));
                    acc.interaction.ger(1.0, x, &ey, 1.0);
                    acc.lat.second = acc.lat.second.add(&SymBlock::Full(&ey * ey.transpose()));
                    acc.lat.first += ey;
                }
                Ok(acc)
            },
            LgmMeans::add,
        )?
        .expect("data is nonempty");
        let mut means = sum.scale(1.0 / data.len() as f64);
        means.lat.second = means.lat.second.add(&SymBlock::Full(post_cov));
        Ok(means)
    }

    /// Maximum-likelihood joint parameters for the given mean parameters.
    ///
    /// Regresses `x` on `(y, 1)` to get the conditional, takes the latent
    /// marginal from `(η_Y, H_YY)`, and subtracts the new `ρ_Y` to recover
    /// `θ_Y`.
    pub fn backward(means: &LgmMeans) -> Result<Self> {
        let (n, m) = (means.obs.dim(), means.lat.dim());
        let structure = means.obs.structure();
        let mut gram = DMatrix::zeros(m + 1, m + 1);
        gram.view_mut((0, 0), (m, m)).copy_from(&means.lat.second.to_dense());
        gram.view_mut((0, m), (m, 1)).copy_from(&means.lat.first);
        gram.view_mut((m, 0), (1, m)).copy_from(&means.lat.first.transpose());
        gram[(m, m)] = 1.0;
        let mut cross = DMatrix::zeros(n, m + 1);
        cross.view_mut((0, 0), (n, m)).copy_from(&means.interaction);
        cross.set_column(m, &means.obs.first);
        let gram_factor = SymBlock::Full(gram)
            .factor()
            .map_err(|_| Error::domain("linear Gaussian backward mapping", "latent second moment is singular"))?;
        // W̃ = E[x ỹᵀ] E[ỹ ỹᵀ]⁻¹
        let coef = gram_factor.solve_mat(&cross.transpose()).transpose();
        let explained = match structure {
            Structure::Full => SymBlock::project(&(&coef * cross.transpose()), Structure::Full),
            _ => {
                let diag = DVector::from_iterator(n, (0..n).map(|i| coef.row(i).dot(&cross.row(i))));
                SymBlock::project(&DMatrix::from_diagonal(&diag), structure)
            }
        };
        let noise = means.obs.second.sub(&explained);
        let noise_factor = noise.factor().map_err(|e| match e {
            Error::Domain { reason, .. } => {
                Error::domain("linear Gaussian backward mapping", format!("noise covariance: {reason}"))
            }
            other => other,
        })?;
        let loading = coef.columns(0, m).into_owned();
        let offset = coef.column(m).into_owned();
        let obs = MvnNatural {
            first: noise_factor.solve_vec(&offset),
            second: noise_factor.inverse().scale(-0.5),
        };
        let interaction = noise_factor.solve_mat(&loading);
        let marginal = means.lat.backward().map_err(|e| match e {
            Error::Domain { reason, .. } => Error::domain("linear Gaussian backward mapping", format!("latent: {reason}")),
            other => other,
        })?;
        let rho = conjugation_parameters(&obs, &interaction)?.rho;
        Self::new(obs, marginal.sub(&rho), interaction)
    }

    pub fn em_step(&self, data: &[DVector<f64>]) -> Result<Self> {
        Self::backward(&self.expected_statistics(data)?)
    }

    pub fn from_standard(s: &LgmStandardForm) -> Result<Self> {
        let n = s.mean.len();
        check_dim("noise covariance", n, s.noise_cov.dim())?;
        check_dim("loading rows", n, s.loading.nrows())?;
        let f = s.noise_cov.factor().map_err(|e| match e {
            Error::Domain { reason, .. } => Error::domain("linear Gaussian standard form", format!("noise covariance: {reason}")),
            other => other,
        })?;
        let obs = MvnNatural {
            first: f.solve_vec(&s.mean),
            second: f.inverse().scale(-0.5),
        };
        let interaction = f.solve_mat(&s.loading);
        let rho = conjugation_parameters(&obs, &interaction)?.rho;
        let prior = MvnNatural::standard(s.loading.ncols(), Structure::Full);
        Self::new(obs, prior.sub(&rho), interaction)
    }

    /// Standard form with a standard-normal prior, obtained by whitening the
    /// latent marginal with its Cholesky factor.
    pub fn to_standard(&self) -> Result<LgmStandardForm> {
        let cond = Conditional::new(&self.obs, &self.interaction)?;
        let c = conjugation_with(&self.obs, &self.interaction, &cond);
        let marginal = self.lat.add(&c.rho).to_standard()?;
        let root = marginal.cov.factor()?.sqrt();
        Ok(LgmStandardForm {
            mean: &cond.offset + &cond.gain * &marginal.mean,
            noise_cov: cond.cov,
            loading: &cond.gain * root,
        })
    }

    /// Same observable marginal, reparametrized so `p(y) = N(0, I)`.
    pub fn standardize(&self) -> Result<Self> {
        Self::from_standard(&self.to_standard()?)
    }

    /// Observable marginal `N(μ, WWᵀ + Σ)` as a dense normal.
    pub fn observable_marginal(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let s = self.to_standard()?;
        let cov = &s.loading * s.loading.transpose() + s.noise_cov.to_dense();
        Ok((s.mean, cov))
    }

    pub fn family(&self) -> (MvnFamily, MvnFamily) {
        (self.obs.family(), self.lat.family())
    }

    /// The model as a generic harmonium; `Θ_XY` occupies the first-order
    /// block of the coordinate interaction matrix.
    pub fn to_harmonium(&self) -> Harmonium<MvnFamily, MvnFamily> {
        let (fx, fy) = self.family();
        let mut interaction = DMatrix::zeros(fx.coord_len(), fy.coord_len());
        interaction
            .view_mut((0, 0), (self.obs_dim(), self.lat_dim()))
            .copy_from(&self.interaction);
        Harmonium {
            obs_family: fx,
            lat_family: fy,
            obs_params: self.obs.coords(),
            lat_params: self.lat.coords(),
            interaction,
        }
    }

    pub fn harmonium_conjugation(&self) -> Result<ConjugationParams> {
        let c = self.conjugation_parameters()?;
        Ok(ConjugationParams {
            rho: c.rho.coords(),
            rho0: c.rho0,
        })
    }

    /// Ancestral samples `(x, y)`.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<(DVector<f64>, DVector<f64>)>> {
        let cond = Conditional::new(&self.obs, &self.interaction)?;
        let c = conjugation_with(&self.obs, &self.interaction, &cond);
        let ys = self.lat.add(&c.rho).sample(count, rng)?;
        let root = cond.cov.factor()?.sqrt();
        let n = self.obs_dim();
        Ok(ys
            .into_iter()
            .map(|y| {
                let e = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                (&cond.offset + &cond.gain * &y + &root * e, y)
            })
            .collect())
    }
}

/// Conjugation parameters for an observable block and interaction matrix.
pub fn conjugation_parameters(obs: &MvnNatural, interaction: &DMatrix<f64>) -> Result<LgmConjugation> {
    let cond = Conditional::new(obs, interaction)?;
    Ok(conjugation_with(obs, interaction, &cond))
}

pub(crate) fn conjugation_with(obs: &MvnNatural, interaction: &DMatrix<f64>, cond: &Conditional) -> LgmConjugation {
    let rho0 = 0.5 * obs.first.dot(&cond.offset) - 0.5 * cond.factor.log_det();
    let p = interaction.tr_mul(&cond.gain) * 0.5;
    LgmConjugation {
        rho0,
        rho: MvnNatural {
            first: interaction.tr_mul(&cond.offset),
            second: SymBlock::project(&p, Structure::Full),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{random_cov, random_mat, random_vec, trapezoid_2d};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const STRUCTURES: [Structure; 3] = [Structure::Isotropic, Structure::Diagonal, Structure::Full];

    fn random_standard<R: Rng>(n: usize, m: usize, structure: Structure, rng: &mut R) -> LgmStandardForm {
        LgmStandardForm {
            mean: random_vec(n, -2.0, 2.0, rng),
            noise_cov: random_cov(n, structure, rng),
            loading: random_mat(n, m, -1.0, 1.0, rng),
        }
    }

    fn mvn_oracle(mean: &DVector<f64>, cov: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
        let d = x - mean;
        let inv = cov.clone().try_inverse().unwrap();
        -0.5 * d.dot(&(&inv * &d)) - 0.5 * cov.determinant().ln() - 0.5 * x.len() as f64 * LN_2PI
    }

    fn standard_oracle(s: &LgmStandardForm) -> (DVector<f64>, DMatrix<f64>) {
        (s.mean.clone(), &s.loading * s.loading.transpose() + s.noise_cov.to_dense())
    }

    #[test]
    fn zero_interaction_conjugation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for structure in STRUCTURES {
            let obs = crate::testing::random_natural(4, structure, &mut rng);
            let c = conjugation_parameters(&obs, &DMatrix::zeros(4, 2)).unwrap();
            assert_eq!(c.rho.first, DVector::zeros(2));
            assert_eq!(c.rho.second.to_dense(), DMatrix::zeros(2, 2));
            assert_relative_eq!(c.rho0, obs.log_partition().unwrap(), epsilon = 1e-12);
        }
        let unit = MvnNatural::standard(1, Structure::Full);
        assert_eq!(conjugation_parameters(&unit, &DMatrix::zeros(1, 1)).unwrap().rho0, 0.0);
    }

    #[test]
    fn independent_forward_examples() {
        let model = LinearGaussianModel::from_standard(&LgmStandardForm {
            mean: DVector::zeros(3),
            noise_cov: SymBlock::Isotropic { dim: 3, value: 1.0 },
            loading: DMatrix::zeros(3, 2),
        })
        .unwrap();
        assert_eq!(model.lat, MvnNatural::standard(2, Structure::Full));
        for f in [model.forward().unwrap(), model.forward_dense().unwrap()] {
            assert_relative_eq!(f.obs.first, DVector::zeros(3), epsilon = 1e-15);
            assert_relative_eq!(f.obs.second.to_dense(), DMatrix::identity(3, 3), epsilon = 1e-15);
            assert_relative_eq!(f.lat.second.to_dense(), DMatrix::identity(2, 2), epsilon = 1e-15);
            assert_relative_eq!(f.interaction, DMatrix::zeros(3, 2), epsilon = 1e-15);
        }
        assert_relative_eq!(
            model.observable_log_density(&DVector::zeros(3)).unwrap(),
            -1.5 * LN_2PI,
            epsilon = 1e-14
        );
        assert_relative_eq!(model.project(&dvector![1.0, 2.0, 3.0]).unwrap(), DVector::zeros(2), epsilon = 1e-15);

        // independent blocks with nonzero means factorize
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = LgmStandardForm {
            loading: DMatrix::zeros(2, 2),
            ..random_standard(2, 2, Structure::Diagonal, &mut rng)
        };
        let f = LinearGaussianModel::from_standard(&s).unwrap().forward_dense().unwrap();
        assert_relative_eq!(f.interaction, &f.obs.first * f.lat.first.transpose(), epsilon = 1e-12);
    }

    #[test]
    fn projection_hand_example() {
        let model = LinearGaussianModel::from_standard(&LgmStandardForm {
            mean: DVector::zeros(2),
            noise_cov: SymBlock::Isotropic { dim: 2, value: 1.0 },
            loading: dmatrix![1.0; 0.0],
        })
        .unwrap();
        assert_relative_eq!(model.project(&dvector![2.0, 0.0]).unwrap(), dvector![1.0], epsilon = 1e-14);
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = LinearGaussianModel::from_standard(&random_standard(2, 1, Structure::Diagonal, &mut rng)).unwrap();
        let (mean, _) = model.observable_marginal().unwrap();
        let total = trapezoid_2d(
            |a, b| model.observable_log_density(&dvector![a, b]).unwrap().exp(),
            (mean[0] - 12.0, mean[0] + 12.0),
            (mean[1] - 12.0, mean[1] + 12.0),
            400,
        );
        assert_relative_eq!(total, 1.0, epsilon = 1e-4);
    }

    #[test]
    fn degenerate_em_is_structured_mle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<DVector<f64>> = (0..200).map(|_| random_vec(3, -1.0, 2.0, &mut rng)).collect();
        let n = data.len() as f64;
        let mean = data.iter().fold(DVector::zeros(3), |a, x| a + x) / n;
        let cov = data.iter().fold(DMatrix::zeros(3, 3), |a, x| a + (x - &mean) * (x - &mean).transpose()) / n;
        for structure in STRUCTURES {
            let init = LinearGaussianModel::from_standard(&LgmStandardForm {
                mean: DVector::zeros(3),
                noise_cov: SymBlock::scaled_identity(3, structure, 1.0),
                loading: DMatrix::zeros(3, 1),
            })
            .unwrap();
            let s = init.em_step(&data).unwrap().to_standard().unwrap();
            assert_relative_eq!(s.loading, DMatrix::zeros(3, 1), epsilon = 1e-12);
            assert_relative_eq!(s.mean, mean, epsilon = 1e-12);
            assert_relative_eq!(
                s.noise_cov.to_dense(),
                SymBlock::project(&cov, structure).to_dense(),
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn em_recovers_pca_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth_std = LgmStandardForm {
            mean: random_vec(5, -1.0, 1.0, &mut rng),
            noise_cov: SymBlock::Isotropic { dim: 5, value: 0.1 },
            loading: random_mat(5, 2, -1.5, 1.5, &mut rng),
        };
        let truth = LinearGaussianModel::from_standard(&truth_std).unwrap();
        let data: Vec<DVector<f64>> = truth.sample(5000, &mut rng).unwrap().into_iter().map(|(x, _)| x).collect();
        let mut model = LinearGaussianModel::from_standard(&LgmStandardForm {
            mean: DVector::zeros(5),
            noise_cov: SymBlock::Isotropic { dim: 5, value: 1.0 },
            loading: random_mat(5, 2, -0.1, 0.1, &mut rng),
        })
        .unwrap();
        let mut last = model.mean_log_likelihood(&data).unwrap();
        for _ in 0..100 {
            model = model.em_step(&data).unwrap();
            let ll = model.mean_log_likelihood(&data).unwrap();
            assert!(ll >= last - 1e-9, "{ll} < {last}");
            last = ll;
        }
        let (_, got) = model.observable_marginal().unwrap();
        let (_, want) = standard_oracle(&truth_std);
        let rel = (&got - &want).norm() / want.norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn rejects_latent_structure_and_shapes() {
        let obs = MvnNatural::standard(3, Structure::Diagonal);
        assert!(LinearGaussianModel::new(obs.clone(), MvnNatural::standard(2, Structure::Diagonal), DMatrix::zeros(3, 2)).is_err());
        assert!(matches!(
            LinearGaussianModel::new(obs, MvnNatural::standard(2, Structure::Full), DMatrix::zeros(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        let bad = MvnNatural {
            first: DVector::zeros(2),
            second: SymBlock::Diagonal(dvector![-0.5, 0.5]),
        };
        assert!(matches!(conjugation_parameters(&bad, &DMatrix::zeros(2, 1)), Err(Error::Domain { .. })));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn conjugation_residual_is_tiny(seed in any::<u64>(), si in 0usize..3, n in prop::sample::select(vec![2usize, 5, 20]), m in prop::sample::select(vec![1usize, 3])) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = LinearGaussianModel::from_standard(&random_standard(n, m, STRUCTURES[si], &mut rng)).unwrap();
            let h = model.to_harmonium();
            let probes: Vec<DVector<f64>> = (0..100).map(|_| random_vec(m, -3.0, 3.0, &mut rng)).collect();
            let residual = h.check_conjugation(&model.harmonium_conjugation().unwrap(), &probes).unwrap();
            prop_assert!(residual < 1e-8, "{}", residual);
        }

        #[test]
        fn density_matches_marginal_oracle(seed in any::<u64>(), si in 0usize..3, n in 1usize..6, m in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_standard(n, m, STRUCTURES[si], &mut rng);
            let model = LinearGaussianModel::from_standard(&s).unwrap();
            let (mean, cov) = standard_oracle(&s);
            let h = model.to_harmonium();
            let c = model.harmonium_conjugation().unwrap();
            for _ in 0..10 {
                let x = random_vec(n, -4.0, 4.0, &mut rng);
                let want = mvn_oracle(&mean, &cov, &x);
                prop_assert!((model.observable_log_density(&x).unwrap() - want).abs() < 1e-8 * want.abs().max(1.0));
                prop_assert!((h.observable_log_density(&c, &x).unwrap() - want).abs() < 1e-8 * want.abs().max(1.0));
                let proj = model.project(&x).unwrap();
                let oracle = s.loading.transpose() * cov.clone().try_inverse().unwrap() * (&x - &mean);
                prop_assert!((proj - oracle).amax() < 1e-9);
            }
        }

        #[test]
        fn forward_routes_agree_and_match_gradient(seed in any::<u64>(), si in 0usize..3, n in 1usize..5, m in 1usize..3) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let model = LinearGaussianModel::from_standard(&random_standard(n, m, STRUCTURES[si], &mut rng)).unwrap();
            let dense = model.forward_dense().unwrap();
            let fast = model.forward().unwrap();
            prop_assert!((dense.obs.coords() - fast.obs.coords()).amax() < 1e-9);
            prop_assert!((dense.lat.coords() - fast.lat.coords()).amax() < 1e-9);
            prop_assert!((&dense.interaction - &fast.interaction).amax() < 1e-9);

            // central differences of ψ_XY along each coordinate
            let h = 1e-5;
            let psi_at = |obs: &[f64], lat: &[f64], inter: &DMatrix<f64>| {
                let (fx, fy) = model.family();
                LinearGaussianModel::new(fx.natural_from_coords(obs), fy.natural_from_coords(lat), inter.clone())
                    .unwrap()
                    .log_partition()
                    .unwrap()
            };
            let (ox, oy) = (model.obs.coords(), model.lat.coords());
            let check = |fd: f64, exact: f64| (fd - exact).abs() <= 1e-5 * exact.abs().max(1.0);
            let means_x = fast.obs.coords();
            for i in 0..ox.len() {
                let (mut a, mut b) = (ox.clone(), ox.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (psi_at(a.as_slice(), oy.as_slice(), &model.interaction) - psi_at(b.as_slice(), oy.as_slice(), &model.interaction)) / (2.0 * h);
                prop_assert!(check(fd, means_x[i]), "obs coord {}: {} vs {}", i, fd, means_x[i]);
            }
            let means_y = fast.lat.coords();
            for i in 0..oy.len() {
                let (mut a, mut b) = (oy.clone(), oy.clone());
                a[i] += h;
                b[i] -= h;
                let fd = (psi_at(ox.as_slice(), a.as_slice(), &model.interaction) - psi_at(ox.as_slice(), b.as_slice(), &model.interaction)) / (2.0 * h);
                prop_assert!(check(fd, means_y[i]), "lat coord {}: {} vs {}", i, fd, means_y[i]);
            }
            for i in 0..n {
                for j in 0..m {
                    let (mut a, mut b) = (model.interaction.clone(), model.interaction.clone());
                    a[(i, j)] += h;
                    b[(i, j)] -= h;
                    let fd = (psi_at(ox.as_slice(), oy.as_slice(), &a) - psi_at(ox.as_slice(), oy.as_slice(), &b)) / (2.0 * h);
                    prop_assert!(check(fd, fast.interaction[(i, j)]));
                }
            }
        }

        #[test]
        fn standard_round_trip(seed in any::<u64>(), si in 0usize..3, n in 1usize..6, m in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = random_standard(n, m, STRUCTURES[si], &mut rng);
            let back = LinearGaussianModel::from_standard(&s).unwrap().to_standard().unwrap();
            prop_assert!((&back.mean - &s.mean).amax() < 1e-8);
            prop_assert!((back.noise_cov.to_dense() - s.noise_cov.to_dense()).amax() < 1e-8);
            prop_assert!((&back.loading - &s.loading).amax() < 1e-10);
        }

        #[test]
        fn em_is_monotone(seed in any::<u64>(), si in 0usize..2) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let truth = LinearGaussianModel::from_standard(&random_standard(4, 2, STRUCTURES[si], &mut rng)).unwrap();
            let data: Vec<DVector<f64>> = truth.sample(300, &mut rng).unwrap().into_iter().map(|(x, _)| x).collect();
            let mut model = LinearGaussianModel::from_standard(&random_standard(4, 2, STRUCTURES[si], &mut rng)).unwrap();
            let mut last = model.mean_log_likelihood(&data).unwrap();
            for _ in 0..100 {
                model = model.em_step(&data).unwrap();
                let ll = model.mean_log_likelihood(&data).unwrap();
                prop_assert!(ll >= last - 1e-9, "{} < {}", ll, last);
                last = ll;
            }
        }
    }
}
