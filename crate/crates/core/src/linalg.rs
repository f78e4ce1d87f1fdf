//! Structured symmetric matrices and their factorizations.
//!
//! Second-order parameter blocks of a multivariate normal come in three
//! shapes: dense symmetric, diagonal, and scalar multiples of the identity.
//! [`SymBlock`] stores only the free entries of each shape and every
//! operation here stays within O(n) work for the diagonal and isotropic
//! shapes.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Covariance structure of a normal family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Full,
    Diagonal,
    Isotropic,
}

impl Structure {
    /// Number of free second-order coordinates for dimension `dim`.
    pub fn coord_len(self, dim: usize) -> usize {
        match self {
            Structure::Full => dim * (dim + 1) / 2,
            Structure::Diagonal => dim,
            Structure::Isotropic => 1,
        }
    }

    fn rank(self) -> u8 {
        match self {
            Structure::Isotropic => 0,
            Structure::Diagonal => 1,
            Structure::Full => 2,
        }
    }

    /// The least restrictive of two structures.
    pub fn join(self, other: Structure) -> Structure {
        if self.rank() >= other.rank() {
            self
        } else {
            other
        }
    }
}

/// A symmetric `dim × dim` matrix restricted to a [`Structure`].
#[derive(Debug, Clone, PartialEq)]
pub enum SymBlock {
    Full(DMatrix<f64>),
    Diagonal(DVector<f64>),
    Isotropic { dim: usize, value: f64 },
}

impl SymBlock {
    pub fn zeros(dim: usize, structure: Structure) -> Self {
        Self::scaled_identity(dim, structure, 0.0)
    }

    pub fn scaled_identity(dim: usize, structure: Structure, value: f64) -> Self {
        match structure {
            Structure::Full => SymBlock::Full(DMatrix::identity(dim, dim) * value),
            Structure::Diagonal => SymBlock::Diagonal(DVector::from_element(dim, value)),
            Structure::Isotropic => SymBlock::Isotropic { dim, value },
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SymBlock::Full(m) => m.nrows(),
            SymBlock::Diagonal(d) => d.len(),
            SymBlock::Isotropic { dim, .. } => *dim,
        }
    }

    pub fn structure(&self) -> Structure {
        match self {
            SymBlock::Full(_) => Structure::Full,
            SymBlock::Diagonal(_) => Structure::Diagonal,
            SymBlock::Isotropic { .. } => Structure::Isotropic,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            SymBlock::Full(m) => m.clone(),
            SymBlock::Diagonal(d) => DMatrix::from_diagonal(d),
            SymBlock::Isotropic { dim, value } => DMatrix::identity(*dim, *dim) * *value,
        }
    }

    /// Orthogonal (Frobenius) projection of a square matrix onto `structure`.
    ///
    /// Full symmetrizes, Diagonal keeps the diagonal, Isotropic keeps the
    /// mean of the diagonal.
    pub fn project(dense: &DMatrix<f64>, structure: Structure) -> Self {
        let n = dense.nrows();
        match structure {
            Structure::Full => SymBlock::Full((dense + dense.transpose()) * 0.5),
            Structure::Diagonal => SymBlock::Diagonal(dense.diagonal()),
            Structure::Isotropic => SymBlock::Isotropic {
                dim: n,
                value: if n == 0 { 0.0 } else { dense.trace() / n as f64 },
            },
        }
    }

    /// Projects the outer product `v ⊗ v` onto `structure`.
    pub fn outer(v: &DVector<f64>, structure: Structure) -> Self {
        let n = v.len();
        match structure {
            Structure::Full => SymBlock::Full(v * v.transpose()),
            Structure::Diagonal => SymBlock::Diagonal(v.map(|x| x * x)),
            Structure::Isotropic => SymBlock::Isotropic {
                dim: n,
                value: if n == 0 { 0.0 } else { v.norm_squared() / n as f64 },
            },
        }
    }

    /// Re-expresses the block in a less restrictive structure.
    pub fn promote(&self, structure: Structure) -> Self {
        match (self, structure) {
            (_, s) if s == self.structure() => self.clone(),
            (SymBlock::Isotropic { dim, value }, Structure::Diagonal) => {
                SymBlock::Diagonal(DVector::from_element(*dim, *value))
            }
            (_, Structure::Full) => SymBlock::Full(self.to_dense()),
            _ => SymBlock::project(&self.to_dense(), structure),
        }
    }

    pub fn scale(&self, a: f64) -> Self {
        match self {
            SymBlock::Full(m) => SymBlock::Full(m * a),
            SymBlock::Diagonal(d) => SymBlock::Diagonal(d * a),
            SymBlock::Isotropic { dim, value } => SymBlock::Isotropic {
                dim: *dim,
                value: value * a,
            },
        }
    }

    /// Sum of two blocks; the result takes the less restrictive structure.
    pub fn add(&self, other: &SymBlock) -> Self {
        debug_assert_eq!(self.dim(), other.dim());
        let s = self.structure().join(other.structure());
        match (self.promote(s), other.promote(s)) {
            (SymBlock::Full(a), SymBlock::Full(b)) => SymBlock::Full(a + b),
            (SymBlock::Diagonal(a), SymBlock::Diagonal(b)) => SymBlock::Diagonal(a + b),
            (SymBlock::Isotropic { dim, value: a }, SymBlock::Isotropic { value: b, .. }) => {
                SymBlock::Isotropic { dim, value: a + b }
            }
            _ => unreachable!("promotion yields matching structures"),
        }
    }

    pub fn sub(&self, other: &SymBlock) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// `self - v ⊗ v` projected onto this block's structure.
    pub fn sub_outer(&self, v: &DVector<f64>) -> Self {
        self.sub(&SymBlock::outer(v, self.structure()))
    }

    /// The quadratic form `xᵀ A x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        match self {
            SymBlock::Full(m) => x.dot(&(m * x)),
            SymBlock::Diagonal(d) => d.iter().zip(x.iter()).map(|(a, v)| a * v * v).sum(),
            SymBlock::Isotropic { value, .. } => value * x.norm_squared(),
        }
    }

    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        match self {
            SymBlock::Full(m) => m * v,
            SymBlock::Diagonal(d) => d.component_mul(v),
            SymBlock::Isotropic { value, .. } => v * *value,
        }
    }

    /// Left-multiplies a dense `dim × c` matrix.
    pub fn mul_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            SymBlock::Full(m) => m * b,
            SymBlock::Diagonal(d) => {
                let mut out = b.clone();
                for (mut row, s) in out.row_iter_mut().zip(d.iter()) {
                    row *= *s;
                }
                out
            }
            SymBlock::Isotropic { value, .. } => b * *value,
        }
    }

    /// Diagonal entries as a vector.
    pub fn diagonal(&self) -> DVector<f64> {
        match self {
            SymBlock::Full(m) => m.diagonal(),
            SymBlock::Diagonal(d) => d.clone(),
            SymBlock::Isotropic { dim, value } => DVector::from_element(*dim, *value),
        }
    }

    pub fn trace(&self) -> f64 {
        match self {
            SymBlock::Full(m) => m.trace(),
            SymBlock::Diagonal(d) => d.sum(),
            SymBlock::Isotropic { dim, value } => *dim as f64 * value,
        }
    }

    /// Factorizes the block, which must be positive definite.
    pub fn factor(&self) -> Result<SymFactor> {
        match self {
            SymBlock::Full(m) => {
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(Error::domain("symmetric factorization", "non-finite entry"));
                }
                Cholesky::new(m.clone())
                    .map(SymFactor::Full)
                    .ok_or_else(|| Error::domain("symmetric factorization", "matrix is not positive definite"))
            }
            SymBlock::Diagonal(d) => match d.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
                Some(i) => Err(Error::domain(
                    "symmetric factorization",
                    format!("diagonal entry {i} is {} (must be positive)", d[i]),
                )),
                None => Ok(SymFactor::Diagonal(d.clone())),
            },
            SymBlock::Isotropic { dim, value } => {
                if *value > 0.0 && value.is_finite() {
                    Ok(SymFactor::Isotropic {
                        dim: *dim,
                        value: *value,
                    })
                } else {
                    Err(Error::domain(
                        "symmetric factorization",
                        format!("isotropic scale is {value} (must be positive)"),
                    ))
                }
            }
        }
    }

    /// Minimal natural coordinates: off-diagonal entries are doubled so that
    /// pairing with [`SymBlock::mean_coords`] of `x ⊗ x` gives `xᵀ A x`.
    pub fn natural_coords(&self) -> Vec<f64> {
        match self {
            SymBlock::Full(m) => {
                let n = m.nrows();
                let mut out = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..n {
                    for j in 0..=i {
                        out.push(if i == j { m[(i, i)] } else { 2.0 * m[(i, j)] });
                    }
                }
                out
            }
            SymBlock::Diagonal(d) => d.iter().copied().collect(),
            SymBlock::Isotropic { value, .. } => vec![*value],
        }
    }

    pub fn from_natural_coords(dim: usize, structure: Structure, coords: &[f64]) -> Self {
        debug_assert_eq!(coords.len(), structure.coord_len(dim));
        match structure {
            Structure::Full => {
                let mut m = DMatrix::zeros(dim, dim);
                let mut k = 0;
                for i in 0..dim {
                    for j in 0..=i {
                        let v = if i == j { coords[k] } else { 0.5 * coords[k] };
                        m[(i, j)] = v;
                        m[(j, i)] = v;
                        k += 1;
                    }
                }
                SymBlock::Full(m)
            }
            Structure::Diagonal => SymBlock::Diagonal(DVector::from_column_slice(coords)),
            Structure::Isotropic => SymBlock::Isotropic {
                dim,
                value: coords[0],
            },
        }
    }

    /// Minimal mean coordinates: the lower triangle, the diagonal, or the
    /// trace, depending on structure.
    pub fn mean_coords(&self) -> Vec<f64> {
        match self {
            SymBlock::Full(m) => {
                let n = m.nrows();
                let mut out = Vec::with_capacity(n * (n + 1) / 2);
                for i in 0..n {
                    for j in 0..=i {
                        out.push(m[(i, j)]);
                    }
                }
                out
            }
            SymBlock::Diagonal(d) => d.iter().copied().collect(),
            SymBlock::Isotropic { dim, value } => vec![*dim as f64 * value],
        }
    }

    pub fn from_mean_coords(dim: usize, structure: Structure, coords: &[f64]) -> Self {
        debug_assert_eq!(coords.len(), structure.coord_len(dim));
        match structure {
            Structure::Full => {
                let mut m = DMatrix::zeros(dim, dim);
                let mut k = 0;
                for i in 0..dim {
                    for j in 0..=i {
                        m[(i, j)] = coords[k];
                        m[(j, i)] = coords[k];
                        k += 1;
                    }
                }
                SymBlock::Full(m)
            }
            Structure::Diagonal => SymBlock::Diagonal(DVector::from_column_slice(coords)),
            Structure::Isotropic => SymBlock::Isotropic {
                dim,
                value: if dim == 0 { 0.0 } else { coords[0] / dim as f64 },
            },
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            SymBlock::Full(m) => m.iter().all(|v| v.is_finite()),
            SymBlock::Diagonal(d) => d.iter().all(|v| v.is_finite()),
            SymBlock::Isotropic { value, .. } => value.is_finite(),
        }
    }
}

/// Factorization of a positive-definite [`SymBlock`].
#[derive(Debug, Clone)]
pub enum SymFactor {
    Full(Cholesky<f64, Dyn>),
    Diagonal(DVector<f64>),
    Isotropic { dim: usize, value: f64 },
}

impl SymFactor {
    pub fn dim(&self) -> usize {
        match self {
            SymFactor::Full(c) => c.l_dirty().nrows(),
            SymFactor::Diagonal(d) => d.len(),
            SymFactor::Isotropic { dim, .. } => *dim,
        }
    }

    pub fn log_det(&self) -> f64 {
        match self {
            SymFactor::Full(c) => 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
            SymFactor::Diagonal(d) => d.iter().map(|v| v.ln()).sum(),
            SymFactor::Isotropic { dim, value } => *dim as f64 * value.ln(),
        }
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SymFactor::Full(c) => c.solve(b),
            SymFactor::Diagonal(d) => b.component_div(d),
            SymFactor::Isotropic { value, .. } => b / *value,
        }
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            SymFactor::Full(c) => c.solve(b),
            SymFactor::Diagonal(d) => {
                let mut out = b.clone();
                for (mut row, s) in out.row_iter_mut().zip(d.iter()) {
                    row /= *s;
                }
                out
            }
            SymFactor::Isotropic { value, .. } => b / *value,
        }
    }

    /// `bᵀ A⁻¹ b`.
    pub fn inv_quad_form(&self, b: &DVector<f64>) -> f64 {
        match self {
            SymFactor::Full(c) => {
                let z = c.l_dirty().solve_lower_triangular(b).expect("cholesky factor is nonsingular");
                z.norm_squared()
            }
            SymFactor::Diagonal(d) => b.iter().zip(d.iter()).map(|(v, s)| v * v / s).sum(),
            SymFactor::Isotropic { value, .. } => b.norm_squared() / value,
        }
    }

    /// The inverse, in the same structure as the factored block.
    pub fn inverse(&self) -> SymBlock {
        match self {
            SymFactor::Full(c) => {
                let inv = c.inverse();
                SymBlock::Full((&inv + inv.transpose()) * 0.5)
            }
            SymFactor::Diagonal(d) => SymBlock::Diagonal(d.map(|v| 1.0 / v)),
            SymFactor::Isotropic { dim, value } => SymBlock::Isotropic {
                dim: *dim,
                value: 1.0 / value,
            },
        }
    }

    /// A square root `L` with `A = L Lᵀ` (lower triangular for Full).
    pub fn sqrt(&self) -> DMatrix<f64> {
        match self {
            SymFactor::Full(c) => c.l(),
            SymFactor::Diagonal(d) => DMatrix::from_diagonal(&d.map(f64::sqrt)),
            SymFactor::Isotropic { dim, value } => DMatrix::identity(*dim, *dim) * value.sqrt(),
        }
    }
}

/// Lower-triangle index of `(i, j)` with `j <= i` in row-major packing.
pub fn tri_index(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

/// Numerically stable `log Σ exp(v)`; `-inf` for an empty slice.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;

    #[test]
    fn coords_pair_to_quadratic_form() {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let a = SymBlock::Full(dmatrix![2.0, 0.3, -0.1; 0.3, 1.0, 0.4; -0.1, 0.4, 3.0]);
        let stat = SymBlock::outer(&x, Structure::Full).mean_coords();
        let pair: f64 = a.natural_coords().iter().zip(&stat).map(|(p, q)| p * q).sum();
        assert_relative_eq!(pair, a.quad_form(&x), epsilon = 1e-12);

        for s in [Structure::Diagonal, Structure::Isotropic] {
            let b = SymBlock::project(&a.to_dense(), s);
            let stat = SymBlock::outer(&x, s).mean_coords();
            let pair: f64 = b.natural_coords().iter().zip(&stat).map(|(p, q)| p * q).sum();
            assert_relative_eq!(pair, b.quad_form(&x), epsilon = 1e-12);
        }
    }

    #[test]
    fn coords_round_trip() {
        let a = SymBlock::Full(dmatrix![2.0, 0.3; 0.3, 1.0]);
        assert_eq!(SymBlock::from_natural_coords(2, Structure::Full, &a.natural_coords()), a);
        assert_eq!(SymBlock::from_mean_coords(2, Structure::Full, &a.mean_coords()), a);
        let i = SymBlock::Isotropic { dim: 3, value: 0.5 };
        assert_eq!(SymBlock::from_mean_coords(3, Structure::Isotropic, &i.mean_coords()), i);
    }

    #[test]
    fn factor_rejects_indefinite() {
        assert!(SymBlock::Full(dmatrix![1.0, 2.0; 2.0, 1.0]).factor().is_err());
        assert!(SymBlock::Diagonal(DVector::from_vec(vec![1.0, 0.0])).factor().is_err());
        assert!(SymBlock::Isotropic { dim: 2, value: -1.0 }.factor().is_err());
    }

    #[test]
    fn factor_operations_agree_with_dense() {
        let a = dmatrix![4.0, 1.0, 0.5; 1.0, 3.0, 0.2; 0.5, 0.2, 2.0];
        let f = SymBlock::Full(a.clone()).factor().unwrap();
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let inv = a.clone().try_inverse().unwrap();
        assert_relative_eq!(f.solve_vec(&b), &inv * &b, epsilon = 1e-12);
        assert_relative_eq!(f.inv_quad_form(&b), b.dot(&(&inv * &b)), epsilon = 1e-12);
        assert_relative_eq!(f.log_det(), a.determinant().ln(), epsilon = 1e-12);
        let l = f.sqrt();
        assert_relative_eq!(&l * l.transpose(), a, epsilon = 1e-12);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert_relative_eq!(log_sum_exp(&[0.0, 1000.0]), 1000.0, epsilon = 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_relative_eq!(log_sum_exp(&[0.0, 0.0, 0.0]), 3f64.ln(), epsilon = 1e-15);
    }
}
