use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{CMatrix, CVector, Real};

/// Gaussian message in moment form: mean vector and covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments<T: Real> {
    pub mean: CVector<T>,
    pub cov: CMatrix<T>,
}

/// Gaussian message in dual form: weight (inverse covariance) and weighted mean.
#[derive(Debug, Clone, PartialEq)]
pub struct Dual<T: Real> {
    pub weight: CMatrix<T>,
    pub weighted_mean: CVector<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GaussianMessage<T: Real> {
    Moments(Moments<T>),
    Dual(Dual<T>),
}

impl<T: Real> Moments<T> {
    pub fn new(mean: CVector<T>, cov: CMatrix<T>) -> Self {
        debug_assert_eq!(cov.shape(), (mean.len(), mean.len()));
        Self { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn to_dual(&self) -> Result<Dual<T>> {
        let weight = hermitian_inverse(&self.cov, "covariance to weight")?;
        let weighted_mean = &weight * &self.mean;
        Ok(Dual {
            weight,
            weighted_mean,
        })
    }
}

impl<T: Real> Dual<T> {
    pub fn new(weight: CMatrix<T>, weighted_mean: CVector<T>) -> Self {
        debug_assert_eq!(weight.shape(), (weighted_mean.len(), weighted_mean.len()));
        Self {
            weight,
            weighted_mean,
        }
    }

    /// `W = 0`, `Wm = 0`: carries no information.
    pub fn vacuous(dim: usize) -> Self {
        Self {
            weight: DMatrix::zeros(dim, dim),
            weighted_mean: DVector::zeros(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.weighted_mean.len()
    }

    pub fn to_moments(&self) -> Result<Moments<T>> {
        let cov = hermitian_inverse(&self.weight, "weight to covariance")?;
        let mean = &cov * &self.weighted_mean;
        Ok(Moments { mean, cov })
    }
}

impl<T: Real> GaussianMessage<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::Moments(m) => m.dim(),
            Self::Dual(d) => d.dim(),
        }
    }

    /// The covariance or weight matrix, whichever this message carries.
    pub fn matrix(&self) -> &CMatrix<T> {
        match self {
            Self::Moments(m) => &m.cov,
            Self::Dual(d) => &d.weight,
        }
    }
}

/// Replaces `m` with `(m + m^H) / 2`.
pub fn symmetrize<T: Real>(m: &mut CMatrix<T>) {
    let n = m.nrows();
    let half = T::lit(0.5);
    for i in 0..n {
        m[(i, i)] = Complex::new(m[(i, i)].re, T::zero());
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * half;
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
}

/// Largest entry of `|m - m^H|`.
pub fn hermitian_error<T: Real>(m: &CMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm_sqr().sqrt());
        }
    }
    worst
}

/// Smallest eigenvalue of the Hermitian part of `m`.
pub fn min_eigenvalue<T: Real>(m: &CMatrix<T>) -> T {
    let mut h = m.clone();
    symmetrize(&mut h);
    h.symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(T::infinity(), |a, b| a.min(b))
}

/// Inverse of a Hermitian matrix: Cholesky when positive definite, LU otherwise.
pub fn hermitian_inverse<T: Real>(m: &CMatrix<T>, what: &'static str) -> Result<CMatrix<T>> {
    let mut inv = match m.clone().cholesky() {
        Some(ch) => ch.inverse(),
        None => m.clone().try_inverse().ok_or(Error::Singular(what))?,
    };
    if inv.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Singular(what));
    }
    symmetrize(&mut inv);
    Ok(inv)
}
