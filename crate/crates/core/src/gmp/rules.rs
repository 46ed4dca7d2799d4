//! Message update rules for the basic factor-graph nodes and the two
//! composite blocks derived from them with the matrix inversion lemma.
//!
//! Naming follows the node: `equality_combine` for an equality node in dual
//! form, `sum_*` for an adder in moment form, `affine_*` for a matrix
//! multiplier. Composite rules only invert matrices of the observation (or
//! injection) dimension.

use super::message::{hermitian_inverse, symmetrize, Dual, Moments};
use crate::error::{Error, Result};
use crate::scalar::{CMatrix, CVector, Real};

fn check(cond: bool, what: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::DimensionMismatch(what.to_string()))
    }
}

/// Equality node: weights and weighted means add.
pub fn equality_combine<T: Real>(x: &Dual<T>, y: &Dual<T>) -> Result<Dual<T>> {
    check(x.dim() == y.dim(), "equality_combine operands")?;
    Ok(Dual::new(
        &x.weight + &y.weight,
        &x.weighted_mean + &y.weighted_mean,
    ))
}

/// Adder, forward: `z = x + y`.
pub fn sum_fwd<T: Real>(x: &Moments<T>, y: &Moments<T>) -> Result<Moments<T>> {
    check(x.dim() == y.dim(), "sum_fwd operands")?;
    Ok(Moments::new(&x.mean + &y.mean, &x.cov + &y.cov))
}

/// Adder, backward toward `x` given the message on `z` and the one on `y`.
pub fn sum_bwd<T: Real>(z: &Moments<T>, y: &Moments<T>) -> Result<Moments<T>> {
    check(z.dim() == y.dim(), "sum_bwd operands")?;
    Ok(Moments::new(&z.mean - &y.mean, &z.cov + &y.cov))
}

/// Multiplier `y = A x`, forward.
pub fn affine_fwd<T: Real>(a: &CMatrix<T>, x: &Moments<T>) -> Result<Moments<T>> {
    check(a.ncols() == x.dim(), "affine_fwd matrix")?;
    let mut cov = a * &x.cov * a.adjoint();
    symmetrize(&mut cov);
    Ok(Moments::new(a * &x.mean, cov))
}

/// Multiplier `y = A x`, backward toward `x` in dual form.
pub fn affine_bwd<T: Real>(a: &CMatrix<T>, y: &Dual<T>) -> Result<Dual<T>> {
    check(a.nrows() == y.dim(), "affine_bwd matrix")?;
    let ah = a.adjoint();
    let mut weight = &ah * &y.weight * a;
    symmetrize(&mut weight);
    Ok(Dual::new(weight, ah * &y.weighted_mean))
}

/// Forward through an equality node whose other branch observes
/// `y = A x + noise`, `noise ~ CN(0, vy)`:
///
/// `B = (vy + A V A^H)^-1`, `V' = V - V A^H B A V`, `m' = m + V A^H B (y - A m)`.
pub fn composite_forward<T: Real>(
    x: &Moments<T>,
    a: &CMatrix<T>,
    y: &CVector<T>,
    vy: &CMatrix<T>,
) -> Result<Moments<T>> {
    check(a.ncols() == x.dim(), "composite_forward matrix columns")?;
    check(
        a.nrows() == y.len() && vy.shape() == (y.len(), y.len()),
        "composite_forward observation",
    )?;
    let vah = &x.cov * a.adjoint();
    let b = hermitian_inverse(&(vy + a * &vah), "composite_forward B")?;
    let gain = &vah * b;
    let mut cov = &x.cov - &gain * vah.adjoint();
    symmetrize(&mut cov);
    let mean = &x.mean + &gain * (y - a * &x.mean);
    Ok(Moments::new(mean, cov))
}

/// Backward through an adder `x = z + A u` where `u` has the downward
/// message `(m_down, W_down)`, in dual form:
///
/// `C = (W_down + A^H W A)^-1`, `W' = W - W A C A^H W`,
/// `W'm' = (I - W A C A^H)(Wm - W A m_down)`.
pub fn composite_backward<T: Real>(
    x: &Dual<T>,
    a: &CMatrix<T>,
    m_down: &CVector<T>,
    w_down: &CMatrix<T>,
) -> Result<Dual<T>> {
    check(a.nrows() == x.dim(), "composite_backward matrix rows")?;
    check(
        a.ncols() == m_down.len() && w_down.shape() == (m_down.len(), m_down.len()),
        "composite_backward prior",
    )?;
    let wa = &x.weight * a;
    let c = hermitian_inverse(&(w_down + a.adjoint() * &wa), "composite_backward C")?;
    let wac = &wa * c;
    let mut weight = &x.weight - &wac * wa.adjoint();
    symmetrize(&mut weight);
    let u = &x.weighted_mean - &wa * m_down;
    let weighted_mean = &u - &wac * (a.adjoint() * &u);
    Ok(Dual::new(weight, weighted_mean))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;
    use nalgebra::{DMatrix, DVector};

    fn s(v: f64) -> CMatrix<f64> {
        DMatrix::from_element(1, 1, cplx(v, 0.0))
    }

    fn sv(v: f64) -> CVector<f64> {
        DVector::from_element(1, cplx(v, 0.0))
    }

    #[test]
    fn composite_forward_scalar() {
        let x = Moments::new(sv(0.0), s(1.0));
        let out = composite_forward(&x, &s(1.0), &sv(2.0), &s(1.0)).unwrap();
        assert!((out.cov[(0, 0)] - cplx(0.5, 0.0)).norm() < 1e-15);
        assert!((out.mean[0] - cplx(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn composite_backward_scalar() {
        let x = Dual::new(s(1.0), sv(1.0));
        let out = composite_backward(&x, &s(1.0), &sv(0.0), &s(1.0)).unwrap();
        assert!((out.weight[(0, 0)] - cplx(0.5, 0.0)).norm() < 1e-15);
        assert!((out.weighted_mean[0] - cplx(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_matrix_leaves_message_unchanged() {
        let cov = DMatrix::from_row_slice(
            2,
            2,
            &[
                cplx(2.0, 0.0),
                cplx(0.3, 0.1),
                cplx(0.3, -0.1),
                cplx(1.0, 0.0),
            ],
        );
        let mean = DVector::from_vec(vec![cplx(0.5, -1.0), cplx(0.2, 0.0)]);
        let x = Moments::new(mean.clone(), cov.clone());
        let a = DMatrix::zeros(1, 2);
        let out = composite_forward(&x, &a, &sv(3.0), &s(0.5)).unwrap();
        assert_eq!(out.mean, mean);
        assert!((out.cov - &cov).camax() < 1e-15);

        let d = Dual::new(cov.clone(), mean.clone());
        let out = composite_backward(&d, &DMatrix::zeros(2, 1), &sv(1.0), &s(2.0)).unwrap();
        assert_eq!(out.weighted_mean, mean);
        assert!((out.weight - cov).camax() < 1e-15);
    }

    #[test]
    fn basic_rule_identities() {
        let cov = DMatrix::from_row_slice(
            2,
            2,
            &[
                cplx(2.0, 0.0),
                cplx(0.3, 0.1),
                cplx(0.3, -0.1),
                cplx(1.0, 0.0),
            ],
        );
        let mean = DVector::from_vec(vec![cplx(0.5, -1.0), cplx(0.2, 0.0)]);
        let x = Moments::new(mean.clone(), cov.clone());
        let d = Dual::new(cov.clone(), mean.clone());
        assert_eq!(equality_combine(&d, &Dual::vacuous(2)).unwrap(), d);
        let id = DMatrix::identity(2, 2);
        assert_eq!(affine_fwd(&id, &x).unwrap(), x);
        assert_eq!(affine_bwd(&id, &d).unwrap(), d);

        let y = Moments::new(
            DVector::from_vec(vec![cplx(1.0, 1.0), cplx(-2.0, 0.0)]),
            DMatrix::identity(2, 2),
        );
        let z = sum_fwd(&x, &y).unwrap();
        let back = sum_bwd(&z, &y).unwrap();
        assert!((back.mean - &x.mean).camax() < 1e-15);
        assert!(sum_fwd(&x, &Moments::new(sv(0.0), s(1.0))).is_err());
    }
}
