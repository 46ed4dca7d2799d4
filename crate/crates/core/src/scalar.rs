//! Scalar abstraction shared by every numeric module.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the equalizer, demapper and decoder are generic over.
///
/// Implemented for `f32` and `f64`. The oracle tolerances used in the test
/// suites assume `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }
}

impl<T> Real for T where T: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

pub type Cplx<T> = Complex<T>;
pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

#[inline]
pub fn cplx<T: Real>(re: f64, im: f64) -> Complex<T> {
    Complex::new(T::lit(re), T::lit(im))
}

#[inline]
pub fn real<T: Real>(x: T) -> Complex<T> {
    Complex::new(x, T::zero())
}

/// `ln(e^a + e^b)` without overflow; `-inf` is the additive identity.
#[inline]
pub fn log_add<T: Real>(a: T, b: T) -> T {
    let ninf = -T::infinity();
    if a == ninf {
        return b;
    }
    if b == ninf {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log-sum-exp over an iterator; empty or all `-inf` input gives `-inf`.
pub fn log_sum_exp<T: Real, I: IntoIterator<Item = T>>(terms: I) -> T {
    terms.into_iter().fold(-T::infinity(), log_add)
}

/// `ln(1 + e^x)`, finite for finite `x` and exact at `±inf`.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x == T::infinity() {
        return x;
    }
    if x == -T::infinity() {
        return T::zero();
    }
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}
