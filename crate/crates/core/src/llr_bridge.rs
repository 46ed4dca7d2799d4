//! From equalizer posteriors to extrinsic bit LLRs.
//!
//! The post-equalization model is `x̂ = μ x + η`, `η ~ CN(0, σ²)`, with
//! `σ² = μ (1 - μ)`. Its parameters follow from the posterior and prior
//! moments of a symbol alone:
//!
//! ```text
//! r  = 1 + 1/v_post - 1/v_prio
//! x̂  = (m_post / v_post - m_prio / v_prio) / r
//! μ  = 1 - 1/r,   σ² = μ (1 - μ)
//! ```
//!
//! The same quantities computed the long way, by building the per-symbol
//! LMMSE filter over the whole stacked system, are provided as oracles.

use nalgebra::{Complex, DMatrix, DVector};

use crate::constellation::{Alphabet, SymbolMoments};
use crate::error::{Error, Result};
use crate::gmp::{hermitian_inverse, PosteriorBlock};
use crate::scalar::{real, CMatrix, CVector, Real};

/// Below this `r - 1` the equalizer contributed nothing for the symbol.
pub const NO_INFORMATION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WpParams<T> {
    pub x_hat: Complex<T>,
    pub mu: T,
    pub sigma2: T,
}

/// Map from `(posterior, prior)` moments to [`WpParams`].
///
/// Returns [`Error::NoInformation`] when `r <= 1 + 1e-12`.
pub fn wp_from_posteriors<T: Real>(
    post: &SymbolMoments<T>,
    prio: &SymbolMoments<T>,
) -> Result<WpParams<T>> {
    if !(post.variance > T::zero()) {
        return Err(Error::NonPositiveSigma(post.variance.as_f64()));
    }
    if !(prio.variance > T::zero()) {
        return Err(Error::NonPositiveSigma(prio.variance.as_f64()));
    }
    let gain = post.variance.recip() - prio.variance.recip();
    if !(gain > T::lit(NO_INFORMATION_EPS)) {
        return Err(Error::NoInformation);
    }
    let r = T::one() + gain;
    let x_hat = (post.mean / post.variance - prio.mean / prio.variance) / r;
    let mu = T::one() - r.recip();
    Ok(WpParams {
        x_hat,
        mu,
        sigma2: mu * (T::one() - mu),
    })
}

/// Extrinsic bit LLRs of one symbol from its equalizer output; zero when the
/// equalizer carried no information about it.
pub fn symbol_extrinsic_llrs<T: Real>(
    post: &SymbolMoments<T>,
    prio: &SymbolMoments<T>,
    prior_llrs: &[T],
    alphabet: &Alphabet<T>,
) -> Result<Vec<T>> {
    match wp_from_posteriors(post, prio) {
        Ok(wp) if wp.sigma2 > T::zero() => alphabet.extrinsic_bit_llrs(&wp, prior_llrs),
        Ok(_) | Err(Error::NoInformation) => Ok(vec![T::zero(); alphabet.bits_per_symbol()]),
        Err(e) => Err(e),
    }
}

/// Interference-plus-noise covariance and LMMSE filter for one symbol of the
/// stacked system `y = H x + n`.
#[derive(Debug, Clone)]
pub struct OracleWorkspace<T: Real> {
    /// `N0 I + sum_{i != idx} v_i h_i h_i^H`.
    pub v_xi: CMatrix<T>,
    pub v_xi_inv: CMatrix<T>,
    /// `V_xi^-1 h / (1 + h^H V_xi^-1 h)`.
    pub w: CVector<T>,
    /// `h^H V_xi^-1 h`.
    pub gain: T,
    pub h: CVector<T>,
}

impl<T: Real> OracleWorkspace<T> {
    pub fn new(hconv: &CMatrix<T>, priors: &[SymbolMoments<T>], n0: T, idx: usize) -> Result<Self> {
        check_system(hconv, priors, n0)?;
        let rows = hconv.nrows();
        let mut v_xi = DMatrix::from_diagonal_element(rows, rows, real(n0));
        for (i, p) in priors.iter().enumerate() {
            if i != idx {
                let h = hconv.column(i);
                v_xi.ger(real(p.variance), &h, &h.conjugate(), real(T::one()));
            }
        }
        let v_xi_inv = hermitian_inverse(&v_xi, "interference covariance")?;
        let h = hconv.column(idx).into_owned();
        let vh = &v_xi_inv * &h;
        let gain = h.dotc(&vh).re;
        let w = vh / real(T::one() + gain);
        Ok(Self {
            v_xi,
            v_xi_inv,
            w,
            gain,
            h,
        })
    }

    /// `(V_xi + h h^H)^-1 h` without the inversion lemma.
    pub fn w_without_lemma(&self) -> Result<CVector<T>> {
        let mut full = self.v_xi.clone();
        full.ger(real(T::one()), &self.h, &self.h.conjugate(), real(T::one()));
        Ok(hermitian_inverse(&full, "full covariance")? * &self.h)
    }
}

fn check_system<T: Real>(hconv: &CMatrix<T>, priors: &[SymbolMoments<T>], n0: T) -> Result<()> {
    if hconv.ncols() != priors.len() {
        return Err(Error::LengthMismatch {
            expected: hconv.ncols(),
            actual: priors.len(),
        });
    }
    if !(n0 > T::zero()) {
        return Err(Error::NonPositiveNoise(n0.as_f64()));
    }
    Ok(())
}

/// `y - H m_prio + h_idx m_prio[idx]`: observations with all other symbols'
/// prior means removed.
fn cancelled<T: Real>(
    y: &CVector<T>,
    hconv: &CMatrix<T>,
    priors: &[SymbolMoments<T>],
    idx: usize,
) -> CVector<T> {
    let means = DVector::from_iterator(priors.len(), priors.iter().map(|p| p.mean));
    y - hconv * means + hconv.column(idx) * priors[idx].mean
}

/// WP parameters of symbol `idx` by direct construction of its LMMSE filter
/// with the own prior replaced by zero mean and unit variance.
pub fn wp_direct_oracle<T: Real>(
    y: &CVector<T>,
    hconv: &CMatrix<T>,
    priors: &[SymbolMoments<T>],
    n0: T,
    idx: usize,
) -> Result<WpParams<T>> {
    if y.len() != hconv.nrows() {
        return Err(Error::LengthMismatch {
            expected: hconv.nrows(),
            actual: y.len(),
        });
    }
    let ws = OracleWorkspace::new(hconv, priors, n0, idx)?;
    let x_hat = ws.w.dotc(&cancelled(y, hconv, priors, idx));
    let mu = ws.w.dotc(&ws.h).re;
    Ok(WpParams {
        x_hat,
        mu,
        sigma2: mu * (T::one() - mu),
    })
}

/// Per-symbol LMMSE posteriors over the whole stacked system:
/// `1/v_post = 1/v_prio + h^H V_xi^-1 h`,
/// `m_post = v_post (m_prio / v_prio + h^H V_xi^-1 (y - H m_prio + h m_prio))`.
pub fn block_lmmse_oracle<T: Real>(
    y: &CVector<T>,
    hconv: &CMatrix<T>,
    priors: &[SymbolMoments<T>],
    n0: T,
    n_t: usize,
) -> Result<PosteriorBlock<T>> {
    check_system(hconv, priors, n0)?;
    if y.len() != hconv.nrows() {
        return Err(Error::LengthMismatch {
            expected: hconv.nrows(),
            actual: y.len(),
        });
    }
    if n_t == 0 || !priors.len().is_multiple_of(n_t) {
        return Err(Error::DimensionMismatch(
            "symbol count not a multiple of n_t".into(),
        ));
    }
    let mut symbols = Vec::with_capacity(priors.len());
    for (idx, p) in priors.iter().enumerate() {
        let ws = OracleWorkspace::new(hconv, priors, n0, idx)?;
        let wprio = p.variance.recip();
        let v_post = (wprio + ws.gain).recip();
        let filtered = (&ws.v_xi_inv * &ws.h).dotc(&cancelled(y, hconv, priors, idx));
        let m_post = (p.mean * wprio + filtered) * v_post;
        symbols.push(SymbolMoments::new(m_post, v_post));
    }
    Ok(PosteriorBlock {
        blocklen: priors.len() / n_t,
        n_t,
        symbols,
    })
}
