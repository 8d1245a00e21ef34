//! Dense vectors, positive diagonal matrices and the weighted norms built on them.
//!
//! Both types are immutable values: every operation returns a fresh value.

use crate::error::{Error, Result};

/// A finite real vector of length at least one.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector(Vec<f64>);

impl Vector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("vector"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector"));
        }
        Ok(Vector(entries))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be at least one");
        Vector(vec![0.0; dim])
    }

    /// The all-ones vector.
    pub fn ones(dim: usize) -> Self {
        assert!(dim >= 1, "vector dimension must be at least one");
        Vector(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &Vector) -> Result<f64> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    pub fn sub(&self, other: &Vector) -> Result<Vector> {
        check_dim(self.dim(), other.dim())?;
        Ok(Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect()))
    }

    pub fn norm_sq(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// A diagonal matrix stored as its diagonal.
///
/// Smoothness `M`, inclusion probabilities `P` and step sizes `Γ` are all
/// instances; use [`DiagonalMatrix::positive`] for those roles.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagonalMatrix(Vec<f64>);

impl DiagonalMatrix {
    /// Any finite diagonal.
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        if diagonal.is_empty() {
            return Err(Error::Empty("diagonal"));
        }
        if diagonal.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("diagonal"));
        }
        Ok(DiagonalMatrix(diagonal))
    }

    /// A diagonal with every entry strictly positive.
    pub fn positive(diagonal: Vec<f64>) -> Result<Self> {
        let d = Self::new(diagonal)?;
        d.check_positive()?;
        Ok(d)
    }

    /// A valid inclusion-probability diagonal: `0 < p_j <= 1`.
    pub fn probabilities(diagonal: Vec<f64>) -> Result<Self> {
        let d = Self::positive(diagonal)?;
        if let Some((j, &p)) = d.0.iter().enumerate().find(|(_, &p)| p > 1.0) {
            return Err(crate::error::invalid(
                "probabilities",
                format!("entry {j} is {p}, above one"),
            ));
        }
        Ok(d)
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "diagonal dimension must be at least one");
        DiagonalMatrix(vec![1.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Entrywise product `D ∘ E`, itself diagonal.
    pub fn compose(&self, other: &DiagonalMatrix) -> Result<DiagonalMatrix> {
        check_dim(self.dim(), other.dim())?;
        Ok(DiagonalMatrix(self.0.iter().zip(&other.0).map(|(a, b)| a * b).collect()))
    }

    /// Entrywise square root; requires nonnegative entries.
    pub fn sqrt(&self) -> Result<DiagonalMatrix> {
        if let Some((index, &value)) = self.0.iter().enumerate().find(|(_, &v)| v < 0.0) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
        Ok(DiagonalMatrix(self.0.iter().map(|v| v.sqrt()).collect()))
    }

    fn check_positive(&self) -> Result<()> {
        match self.0.iter().enumerate().find(|(_, &v)| v <= 0.0) {
            Some((index, &value)) => Err(Error::NonPositiveDiagonal { index, value }),
            None => Ok(()),
        }
    }
}

impl std::ops::Index<usize> for DiagonalMatrix {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// `‖x‖²_D = Σ_j D_j x_j²` for a positive diagonal `D`.
pub fn weighted_norm_sq(x: &Vector, d: &DiagonalMatrix) -> Result<f64> {
    check_dim(d.dim(), x.dim())?;
    d.check_positive()?;
    Ok(x.0.iter().zip(&d.0).map(|(xj, dj)| dj * xj * xj).sum())
}

/// Entrywise product `D x`.
pub fn diag_apply(d: &DiagonalMatrix, x: &Vector) -> Result<Vector> {
    check_dim(d.dim(), x.dim())?;
    Ok(Vector(d.0.iter().zip(&x.0).map(|(dj, xj)| dj * xj).collect()))
}

/// Entrywise reciprocal of a positive diagonal.
pub fn diag_inverse(d: &DiagonalMatrix) -> Result<DiagonalMatrix> {
    d.check_positive()?;
    Ok(DiagonalMatrix(d.0.iter().map(|v| 1.0 / v).collect()))
}
