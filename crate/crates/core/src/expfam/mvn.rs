//! Multivariate normal distributions in natural and mean coordinates.
//!
//! Natural parameters `(θ, Θ)` give the exponent `x·θ + xᵀΘx`, so
//! `Θ = −½Σ⁻¹` and `θ = Σ⁻¹μ`. Mean parameters are `(E[x], E[x ⊗ x])` with
//! the second moment projected onto the family's covariance structure.
//! The base measure `(2π)^{−n/2}` is kept out of the log-partition function.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::ExponentialFamily;
use crate::error::{check_dim, Error, Result};
use crate::linalg::{Structure, SymBlock, SymFactor};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MvnFamily {
    pub dim: usize,
    pub structure: Structure,
}

/// Natural parameters `(θ^μ, Θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnNatural {
    pub first: DVector<f64>,
    pub second: SymBlock,
}

/// Mean parameters `(η, H)` with `H` the structure-projected second moment.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnMean {
    pub first: DVector<f64>,
    pub second: SymBlock,
}

/// Mean and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct MvnStandard {
    pub mean: DVector<f64>,
    pub cov: SymBlock,
}

impl MvnFamily {
    pub fn new(dim: usize, structure: Structure) -> Self {
        Self { dim, structure }
    }

    pub fn coord_len(&self) -> usize {
        self.dim + self.structure.coord_len(self.dim)
    }

    /// `(x, x ⊗ x)` with the second block projected onto the structure.
    pub fn statistic(&self, x: &DVector<f64>) -> Result<MvnMean> {
        check_dim("normal observation", self.dim, x.len())?;
        Ok(MvnMean {
            first: x.clone(),
            second: SymBlock::outer(x, self.structure),
        })
    }

    pub fn natural_from_coords(&self, coords: &[f64]) -> MvnNatural {
        MvnNatural {
            first: DVector::from_column_slice(&coords[..self.dim]),
            second: SymBlock::from_natural_coords(self.dim, self.structure, &coords[self.dim..]),
        }
    }

    pub fn mean_from_coords(&self, coords: &[f64]) -> MvnMean {
        MvnMean {
            first: DVector::from_column_slice(&coords[..self.dim]),
            second: SymBlock::from_mean_coords(self.dim, self.structure, &coords[self.dim..]),
        }
    }
}

fn concat(first: &DVector<f64>, rest: Vec<f64>) -> DVector<f64> {
    let mut out = Vec::with_capacity(first.len() + rest.len());
    out.extend_from_slice(first.as_slice());
    out.extend(rest);
    DVector::from_vec(out)
}

impl MvnNatural {
    /// Standard normal in dimension `dim`.
    pub fn standard(dim: usize, structure: Structure) -> Self {
        Self {
            first: DVector::zeros(dim),
            second: SymBlock::scaled_identity(dim, structure, -0.5),
        }
    }

    pub fn zeros(dim: usize, structure: Structure) -> Self {
        Self {
            first: DVector::zeros(dim),
            second: SymBlock::zeros(dim, structure),
        }
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn structure(&self) -> Structure {
        self.second.structure()
    }

    pub fn family(&self) -> MvnFamily {
        MvnFamily::new(self.dim(), self.structure())
    }

    /// Factorization of the precision `−2Θ`.
    pub fn precision_factor(&self) -> Result<SymFactor> {
        self.second.scale(-2.0).factor().map_err(|_| {
            Error::domain(
                "normal natural parameters",
                "second-order block is not negative definite",
            )
        })
    }

    /// `x·θ + xᵀΘx`.
    pub fn pair(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.first) + self.second.quad_form(x)
    }

    pub fn pair_mean(&self, mean: &MvnMean) -> f64 {
        let a = self.second.natural_coords();
        let b = mean.second.promote(self.structure()).mean_coords();
        self.first.dot(&mean.first) + a.iter().zip(&b).map(|(p, q)| p * q).sum::<f64>()
    }

    pub fn log_partition(&self) -> Result<f64> {
        let f = self.precision_factor()?;
        Ok(log_partition_with(&self.first, &f))
    }

    pub fn forward(&self) -> Result<MvnMean> {
        let f = self.precision_factor()?;
        Ok(forward_with(&self.first, &f))
    }

    pub fn to_standard(&self) -> Result<MvnStandard> {
        let f = self.precision_factor()?;
        Ok(MvnStandard {
            mean: f.solve_vec(&self.first),
            cov: f.inverse(),
        })
    }

    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim("normal observation", self.dim(), x.len())?;
        Ok(self.pair(x) - self.log_partition()? - 0.5 * self.dim() as f64 * LN_2PI)
    }

    pub fn add(&self, other: &MvnNatural) -> MvnNatural {
        MvnNatural {
            first: &self.first + &other.first,
            second: self.second.add(&other.second),
        }
    }

    pub fn sub(&self, other: &MvnNatural) -> MvnNatural {
        MvnNatural {
            first: &self.first - &other.first,
            second: self.second.sub(&other.second),
        }
    }

    pub fn scale(&self, a: f64) -> MvnNatural {
        MvnNatural {
            first: &self.first * a,
            second: self.second.scale(a),
        }
    }

    pub fn coords(&self) -> DVector<f64> {
        concat(&self.first, self.second.natural_coords())
    }

    pub fn is_finite(&self) -> bool {
        self.first.iter().all(|v| v.is_finite()) && self.second.is_finite()
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
        self.to_standard()?.sample(count, rng)
    }
}

/// `ψ = ½ θᵀ(−2Θ)⁻¹θ − ½ log|−2Θ|` given the factored precision.
pub(crate) fn log_partition_with(first: &DVector<f64>, precision: &SymFactor) -> f64 {
    0.5 * precision.inv_quad_form(first) - 0.5 * precision.log_det()
}

pub(crate) fn forward_with(first: &DVector<f64>, precision: &SymFactor) -> MvnMean {
    let cov = precision.inverse();
    let mean = cov.mul_vec(first);
    let second = cov.add(&SymBlock::outer(&mean, cov.structure()));
    MvnMean { first: mean, second }
}

impl MvnMean {
    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn structure(&self) -> Structure {
        self.second.structure()
    }

    pub fn zeros(dim: usize, structure: Structure) -> Self {
        Self {
            first: DVector::zeros(dim),
            second: SymBlock::zeros(dim, structure),
        }
    }

    pub fn covariance(&self) -> SymBlock {
        self.second.sub_outer(&self.first)
    }

    pub fn backward(&self) -> Result<MvnNatural> {
        let cov = self.covariance();
        let f = cov.factor().map_err(|e| match e {
            Error::Domain { reason, .. } => Error::domain("normal backward mapping", format!("covariance: {reason}")),
            other => other,
        })?;
        Ok(natural_from_cov_factor(&self.first, &f))
    }

    /// Backward mapping with `ε·I` added to the covariance when it fails to
    /// factorize.
    pub fn backward_with_jitter(&self, jitter: Option<f64>) -> Result<MvnNatural> {
        match (self.backward(), jitter) {
            (Ok(nat), _) => Ok(nat),
            (Err(_), Some(eps)) => {
                let cov = self
                    .covariance()
                    .add(&SymBlock::scaled_identity(self.dim(), self.structure(), eps));
                let f = cov.factor()?;
                Ok(natural_from_cov_factor(&self.first, &f))
            }
            (Err(e), None) => Err(e),
        }
    }

    pub fn coords(&self) -> DVector<f64> {
        concat(&self.first, self.second.mean_coords())
    }

    pub fn add(&self, other: &MvnMean) -> MvnMean {
        MvnMean {
            first: &self.first + &other.first,
            second: self.second.add(&other.second),
        }
    }

    pub fn scale(&self, a: f64) -> MvnMean {
        MvnMean {
            first: &self.first * a,
            second: self.second.scale(a),
        }
    }

    pub fn project(&self, structure: Structure) -> MvnMean {
        MvnMean {
            first: self.first.clone(),
            second: SymBlock::project(&self.second.to_dense(), structure),
        }
    }
}

fn natural_from_cov_factor(mean: &DVector<f64>, cov: &SymFactor) -> MvnNatural {
    let precision = cov.inverse();
    MvnNatural {
        first: cov.solve_vec(mean),
        second: precision.scale(-0.5),
    }
}

impl MvnStandard {
    pub fn to_natural(&self) -> Result<MvnNatural> {
        check_dim("normal mean", self.cov.dim(), self.mean.len())?;
        let f = self.cov.factor().map_err(|e| match e {
            Error::Domain { reason, .. } => Error::domain("normal standard parameters", format!("covariance: {reason}")),
            other => other,
        })?;
        Ok(natural_from_cov_factor(&self.mean, &f))
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<DVector<f64>>> {
        let l = self.cov.factor()?.sqrt();
        let n = self.mean.len();
        Ok((0..count)
            .map(|_| {
                let z = DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)));
                &self.mean + &l * z
            })
            .collect())
    }
}

impl ExponentialFamily for MvnFamily {
    type Point = DVector<f64>;

    fn dimension(&self) -> usize {
        self.coord_len()
    }

    fn sufficient_statistic(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.statistic(x)?.coords())
    }

    fn log_base_measure(&self, _x: &DVector<f64>) -> f64 {
        -0.5 * self.dim as f64 * LN_2PI
    }

    fn log_partition(&self, natural: &DVector<f64>) -> Result<f64> {
        check_dim("normal natural coordinates", self.coord_len(), natural.len())?;
        self.natural_from_coords(natural.as_slice()).log_partition()
    }

    fn forward(&self, natural: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("normal natural coordinates", self.coord_len(), natural.len())?;
        Ok(self.natural_from_coords(natural.as_slice()).forward()?.coords())
    }

    fn backward(&self, mean: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("normal mean coordinates", self.coord_len(), mean.len())?;
        Ok(self.mean_from_coords(mean.as_slice()).backward()?.coords())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::{random_natural, trapezoid_1d, trapezoid_2d};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const STRUCTURES: [Structure; 3] = [Structure::Full, Structure::Diagonal, Structure::Isotropic];

    #[test]
    fn sufficient_statistic_examples() {
        let x = dvector![1.0, 2.0];
        let full = MvnFamily::new(2, Structure::Full).sufficient_statistic(&x).unwrap();
        assert_eq!(full.as_slice(), &[1.0, 2.0, 1.0, 2.0, 4.0]);
        let diag = MvnFamily::new(2, Structure::Diagonal).sufficient_statistic(&x).unwrap();
        assert_eq!(diag.as_slice(), &[1.0, 2.0, 1.0, 4.0]);
        let iso = MvnFamily::new(2, Structure::Isotropic).sufficient_statistic(&x).unwrap();
        assert_eq!(iso.as_slice(), &[1.0, 2.0, 5.0]);
        assert!(MvnFamily::new(3, Structure::Full).sufficient_statistic(&x).is_err());
    }

    #[test]
    fn log_partition_examples() {
        let std = MvnNatural::standard(1, Structure::Full);
        assert_relative_eq!(std.log_partition().unwrap(), 0.0, epsilon = 1e-15);
        // μ = 1, σ² = 1: μ²/(2σ²) + ½ log σ² = ½
        let shifted = MvnNatural {
            first: dvector![1.0],
            second: SymBlock::Full(dmatrix![-0.5]),
        };
        assert_relative_eq!(shifted.log_partition().unwrap(), 0.5, epsilon = 1e-15);
        let bad = MvnNatural {
            first: dvector![0.0],
            second: SymBlock::Full(dmatrix![0.5]),
        };
        assert!(matches!(bad.log_partition(), Err(Error::Domain { .. })));
    }

    #[test]
    fn forward_backward_examples() {
        let std = MvnNatural::standard(2, Structure::Full);
        let m = std.forward().unwrap();
        assert_eq!(m.first, dvector![0.0, 0.0]);
        assert_relative_eq!(m.second.to_dense(), nalgebra::DMatrix::identity(2, 2), epsilon = 1e-15);

        let shifted = MvnNatural {
            first: dvector![1.0],
            second: SymBlock::Full(dmatrix![-0.5]),
        };
        let m = shifted.forward().unwrap();
        assert_relative_eq!(m.first[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(m.second.to_dense()[(0, 0)], 2.0, epsilon = 1e-15);

        let back = MvnMean {
            first: dvector![1.0],
            second: SymBlock::Full(dmatrix![2.0]),
        }
        .backward()
        .unwrap();
        assert_relative_eq!(back.first[0], 1.0, epsilon = 1e-15);
        assert_relative_eq!(back.second.to_dense()[(0, 0)], -0.5, epsilon = 1e-15);

        let zero = MvnMean {
            first: dvector![0.0, 0.0],
            second: SymBlock::Full(nalgebra::DMatrix::identity(2, 2)),
        }
        .backward()
        .unwrap();
        assert_eq!(zero, MvnNatural::standard(2, Structure::Full));

        let singular = MvnMean {
            first: dvector![1.0],
            second: SymBlock::Full(dmatrix![1.0]),
        };
        assert!(matches!(singular.backward(), Err(Error::Domain { .. })));
        assert!(singular.backward_with_jitter(Some(1e-6)).is_ok());
    }

    #[test]
    fn standard_bridge_examples() {
        let s = MvnStandard {
            mean: dvector![0.0, 0.0],
            cov: SymBlock::Full(nalgebra::DMatrix::identity(2, 2)),
        };
        assert_eq!(s.to_natural().unwrap(), MvnNatural::standard(2, Structure::Full));
        let s = MvnStandard {
            mean: dvector![1.0, 0.0],
            cov: SymBlock::Isotropic { dim: 2, value: 2.0 },
        };
        let n = s.to_natural().unwrap();
        assert_relative_eq!(n.first, dvector![0.5, 0.0], epsilon = 1e-15);
        assert_eq!(n.second, SymBlock::Isotropic { dim: 2, value: -0.25 });
    }

    #[test]
    fn log_density_at_mode() {
        let std = MvnNatural::standard(1, Structure::Full);
        assert_relative_eq!(std.log_density(&dvector![0.0]).unwrap(), -0.5 * LN_2PI, epsilon = 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for s in STRUCTURES {
            let one = random_natural(1, s, &mut rng);
            let st = one.to_standard().unwrap();
            let (mu, sd) = (st.mean[0], st.cov.to_dense()[(0, 0)].sqrt());
            let total = trapezoid_1d(|y| one.log_density(&dvector![y]).unwrap().exp(), mu - 12.0 * sd, mu + 12.0 * sd, 2000);
            assert_relative_eq!(total, 1.0, epsilon = 1e-6);

            let two = random_natural(2, s, &mut rng);
            let st = two.to_standard().unwrap();
            let sd = st.cov.diagonal().map(f64::sqrt);
            let total = trapezoid_2d(
                |a, b| two.log_density(&dvector![a, b]).unwrap().exp(),
                (st.mean[0] - 10.0 * sd[0], st.mean[0] + 10.0 * sd[0]),
                (st.mean[1] - 10.0 * sd[1], st.mean[1] + 10.0 * sd[1]),
                300,
            );
            assert_relative_eq!(total, 1.0, epsilon = 1e-4);
        }
    }

    #[test]
    fn sampling_mean_and_determinism() {
        let std = MvnNatural::standard(1, Structure::Full);
        let draws = std.sample(100_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let mean = draws.iter().map(|d| d[0]).sum::<f64>() / draws.len() as f64;
        assert!(mean.abs() < 0.02, "{mean}");
        let again = std.sample(100_000, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(draws, again);
    }

    proptest! {
        #[test]
        fn pairing_reproduces_quadratic_form(seed in any::<u64>(), dim in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for s in STRUCTURES {
                let fam = MvnFamily::new(dim, s);
                let nat = random_natural(dim, s, &mut rng);
                let x = DVector::from_iterator(dim, (0..dim).map(|_| rng.random_range(-3.0..3.0)));
                let paired = fam.sufficient_statistic(&x).unwrap().dot(&nat.coords());
                let direct = x.dot(&nat.first) + x.dot(&(nat.second.to_dense() * &x));
                prop_assert!((paired - direct).abs() < 1e-12 * direct.abs().max(1.0));
            }
        }

        #[test]
        fn forward_is_gradient_of_log_partition(seed in any::<u64>(), dim in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for s in STRUCTURES {
                let fam = MvnFamily::new(dim, s);
                let theta = random_natural(dim, s, &mut rng).coords();
                let eta = fam.forward(&theta).unwrap();
                for i in 0..theta.len() {
                    let h = 1e-5 * theta[i].abs().max(1.0);
                    let mut up = theta.clone();
                    up[i] += h;
                    let mut down = theta.clone();
                    down[i] -= h;
                    let fd = (fam.log_partition(&up).unwrap() - fam.log_partition(&down).unwrap()) / (2.0 * h);
                    prop_assert!((fd - eta[i]).abs() <= 1e-5 * eta[i].abs().max(1.0), "{:?} coord {}: fd {} vs {}", s, i, fd, eta[i]);
                }
            }
        }

        #[test]
        fn backward_inverts_forward(seed in any::<u64>(), dim in 1usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for s in STRUCTURES {
                let fam = MvnFamily::new(dim, s);
                let theta = random_natural(dim, s, &mut rng).coords();
                let back = fam.backward(&fam.forward(&theta).unwrap()).unwrap();
                prop_assert!((&back - &theta).amax() < 1e-8 * theta.amax().max(1.0));
                let eta = fam.forward(&theta).unwrap();
                let again = fam.forward(&back).unwrap();
                prop_assert!((&again - &eta).amax() < 1e-8 * eta.amax().max(1.0));
            }
        }

        #[test]
        fn standard_round_trip(seed in any::<u64>(), dim in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for s in STRUCTURES {
                let nat = random_natural(dim, s, &mut rng);
                let back = nat.to_standard().unwrap().to_natural().unwrap();
                prop_assert!((back.coords() - nat.coords()).amax() < 1e-10 * nat.coords().amax().max(1.0));
            }
        }
    }
}
