//! Random constructions and quadrature helpers for unit tests.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::expfam::{MvnNatural, MvnStandard};
use crate::linalg::{Structure, SymBlock};

pub fn random_vec<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.random_range(lo..hi)))
}

pub fn random_mat<R: Rng>(r: usize, c: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_iterator(r, c, (0..r * c).map(|_| rng.random_range(lo..hi)))
}

pub fn random_cov<R: Rng>(n: usize, structure: Structure, rng: &mut R) -> SymBlock {
    match structure {
        Structure::Full => {
            let a = random_mat(n, n, -0.7, 0.7, rng);
            SymBlock::Full(&a * a.transpose() + DMatrix::identity(n, n) * 0.5)
        }
        Structure::Diagonal => SymBlock::Diagonal(random_vec(n, 0.5, 2.0, rng)),
        Structure::Isotropic => SymBlock::Isotropic {
            dim: n,
            value: rng.random_range(0.5..2.0),
        },
    }
}

pub fn random_natural<R: Rng>(n: usize, structure: Structure, rng: &mut R) -> MvnNatural {
    MvnStandard {
        mean: random_vec(n, -2.0, 2.0, rng),
        cov: random_cov(n, structure, rng),
    }
    .to_natural()
    .unwrap()
}

pub fn trapezoid_1d(f: impl Fn(f64) -> f64, a: f64, b: f64, steps: usize) -> f64 {
    let h = (b - a) / steps as f64;
    let inner: f64 = (1..steps).map(|i| f(a + i as f64 * h)).sum();
    h * (inner + 0.5 * (f(a) + f(b)))
}

pub fn trapezoid_2d(f: impl Fn(f64, f64) -> f64, xr: (f64, f64), yr: (f64, f64), steps: usize) -> f64 {
    trapezoid_1d(|x| trapezoid_1d(|y| f(x, y), yr.0, yr.1, steps), xr.0, xr.1, steps)
}
