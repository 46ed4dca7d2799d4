use nalgebra::{Complex, DMatrix, DVector};

use super::message::{symmetrize, Dual, GaussianMessage, Moments};
use super::rules::{composite_backward, composite_forward, equality_combine};
use crate::channel::ChannelRealization;
use crate::constellation::SymbolMoments;
use crate::error::{Error, Result};
use crate::scalar::{real, CMatrix, CVector, Real};

/// In-block prior variances are floored here so the `C` inversion stays finite.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// State-space model of one transmission block.
#[derive(Debug, Clone)]
pub struct StateSpace<T: Real> {
    /// Shift, `n_t L x n_t L`.
    pub g: CMatrix<T>,
    /// Injection `[0; I]`, `n_t L x n_t`.
    pub f: CMatrix<T>,
    /// `[H_J ... H_0]`.
    pub hbar: CMatrix<T>,
    pub n0: T,
    pub blocklen: usize,
    pub n_taps: usize,
    pub n_t: usize,
    pub n_r: usize,
    /// `H̄^H H̄ / N0`, the observation weight folded in every backward step.
    obs_weight: CMatrix<T>,
}

impl<T: Real> StateSpace<T> {
    pub fn new(ch: &ChannelRealization<T>, n0: T, blocklen: usize) -> Result<Self> {
        if !(n0 > T::zero()) {
            return Err(Error::NonPositiveNoise(n0.as_f64()));
        }
        if blocklen == 0 {
            return Err(Error::InvalidConfig("block length must be positive".into()));
        }
        let (n_t, n_r, l) = (ch.n_t(), ch.n_r(), ch.n_taps());
        let dim = n_t * l;
        let one = real(T::one());
        let mut g = DMatrix::zeros(dim, dim);
        for i in 0..dim - n_t {
            g[(i, i + n_t)] = one;
        }
        let mut f = DMatrix::zeros(dim, n_t);
        for i in 0..n_t {
            f[(dim - n_t + i, i)] = one;
        }
        let hbar = ch.hbar();
        let mut obs_weight = hbar.adjoint() * &hbar / real(n0);
        symmetrize(&mut obs_weight);
        Ok(Self {
            g,
            f,
            hbar,
            n0,
            blocklen,
            n_taps: l,
            n_t,
            n_r,
            obs_weight,
        })
    }

    pub fn state_dim(&self) -> usize {
        self.n_t * self.n_taps
    }

    pub fn memory(&self) -> usize {
        self.n_taps - 1
    }

    /// Number of observation vectors, `N + J`.
    pub fn steps(&self) -> usize {
        self.blocklen + self.memory()
    }

    fn check_inputs(&self, y: &CMatrix<T>, priors: &[SymbolMoments<T>]) -> Result<()> {
        if y.shape() != (self.n_r, self.steps()) {
            return Err(Error::DimensionMismatch(format!(
                "observations are {:?}, expected {:?}",
                y.shape(),
                (self.n_r, self.steps())
            )));
        }
        if priors.len() != self.blocklen * self.n_t {
            return Err(Error::LengthMismatch {
                expected: self.blocklen * self.n_t,
                actual: priors.len(),
            });
        }
        Ok(())
    }

    /// Prior of `x_t` (0-based); known zeros outside the block.
    fn prior(&self, priors: &[SymbolMoments<T>], t: usize) -> (CVector<T>, Vec<T>) {
        if t < self.blocklen {
            let floor = T::lit(VARIANCE_FLOOR);
            let p = &priors[t * self.n_t..(t + 1) * self.n_t];
            (
                DVector::from_iterator(self.n_t, p.iter().map(|m| m.mean)),
                p.iter().map(|m| m.variance.max(floor)).collect(),
            )
        } else {
            (DVector::zeros(self.n_t), vec![T::zero(); self.n_t])
        }
    }
}

/// Moves every block of the state one slot toward the past: `G V G^H`, `G m`.
fn shift_forward<T: Real>(msg: &Moments<T>, n_t: usize) -> Moments<T> {
    let dim = msg.dim();
    let keep = dim - n_t;
    let mut cov = DMatrix::zeros(dim, dim);
    cov.view_mut((0, 0), (keep, keep))
        .copy_from(&msg.cov.view((n_t, n_t), (keep, keep)));
    let mut mean = DVector::zeros(dim);
    mean.rows_mut(0, keep).copy_from(&msg.mean.rows(n_t, keep));
    Moments::new(mean, cov)
}

/// Transpose of [`shift_forward`] in dual form: `G^H W G`, `G^H Wm`.
fn shift_backward<T: Real>(msg: &Dual<T>, n_t: usize) -> Dual<T> {
    let dim = msg.dim();
    let keep = dim - n_t;
    let mut weight = DMatrix::zeros(dim, dim);
    weight
        .view_mut((n_t, n_t), (keep, keep))
        .copy_from(&msg.weight.view((0, 0), (keep, keep)));
    let mut wm = DVector::zeros(dim);
    wm.rows_mut(n_t, keep)
        .copy_from(&msg.weighted_mean.rows(0, keep));
    Dual::new(weight, wm)
}

/// Forward messages of `x̄_k` for `k = 1 .. N + J` (index `k - 1`), each
/// before folding in `y_k`.
pub fn forward_pass<T: Real>(
    ss: &StateSpace<T>,
    y: &CMatrix<T>,
    priors: &[SymbolMoments<T>],
) -> Result<Vec<Moments<T>>> {
    ss.check_inputs(y, priors)?;
    let (dim, n_t) = (ss.state_dim(), ss.n_t);
    let vy = DMatrix::from_diagonal_element(ss.n_r, ss.n_r, real(ss.n0));
    // x̄_1 = [0; ...; 0; x_1]: symbols before the block are known zeros
    let mut state = Moments::new(DVector::zeros(dim), DMatrix::zeros(dim, dim));
    inject(&mut state, ss.prior(priors, 0), n_t);
    let mut out = Vec::with_capacity(ss.steps());
    for k in 0..ss.steps() {
        let observed = composite_forward(&state, &ss.hbar, &y.column(k).into_owned(), &vy)?;
        out.push(state);
        state = shift_forward(&observed, n_t);
        if k + 1 < ss.steps() {
            inject(&mut state, ss.prior(priors, k + 1), n_t);
        }
    }
    Ok(out)
}

/// Adder `x̄ = z + F x` with independent prior entries.
fn inject<T: Real>(state: &mut Moments<T>, (mean, var): (CVector<T>, Vec<T>), n_t: usize) {
    let base = state.dim() - n_t;
    for i in 0..n_t {
        state.mean[base + i] += mean[i];
        state.cov[(base + i, base + i)] += real(var[i]);
    }
}

/// Backward messages of `x̄_k` for `k = 1 .. N + J` (index `k - 1`), each
/// including `y_k` and everything after it.
pub fn backward_pass<T: Real>(
    ss: &StateSpace<T>,
    y: &CMatrix<T>,
    priors: &[SymbolMoments<T>],
) -> Result<Vec<Dual<T>>> {
    ss.check_inputs(y, priors)?;
    let (dim, n_t) = (ss.state_dim(), ss.n_t);
    let steps = ss.steps();
    let hbar_h = ss.hbar.adjoint();
    let n0 = real(ss.n0);
    let mut out = vec![Dual::vacuous(dim); steps];
    let mut next = Dual::vacuous(dim);
    for k in (0..steps).rev() {
        // peel off the prior of x_{k+1}; known zeros leave the message as is
        let z = if k + 1 < ss.blocklen {
            let (m_down, var) = ss.prior(priors, k + 1);
            let w_down = DMatrix::from_diagonal(&DVector::from_iterator(
                n_t,
                var.iter().map(|&v| real(v.recip())),
            ));
            composite_backward(&next, &ss.f, &m_down, &w_down)?
        } else {
            next
        };
        let before_shift = shift_backward(&z, n_t);
        let obs = Dual::new(ss.obs_weight.clone(), &hbar_h * y.column(k) / n0);
        let cur = equality_combine(&before_shift, &obs)?;
        out[k] = cur.clone();
        next = cur;
    }
    Ok(out)
}

/// Posterior of a state from its forward and backward messages.
///
/// A forward message in moment form is combined as
/// `V = (I + V_f W_b)^-1 V_f`, `m = (I + V_f W_b)^-1 (m_f + V_f W_b m_b)`,
/// which equals `(V_f^-1 + W_b)^-1` and stays valid when `V_f` is singular.
/// A dual forward message is combined by adding weights, which covers the
/// vacuous `V_f^-1 = 0` case.
pub fn combine<T: Real>(fwd: &GaussianMessage<T>, bwd: &Dual<T>) -> Result<Moments<T>> {
    if fwd.dim() != bwd.dim() {
        return Err(Error::DimensionMismatch("combine operands".into()));
    }
    match fwd {
        GaussianMessage::Moments(f) => {
            let dim = f.dim();
            let system = DMatrix::identity(dim, dim) + &f.cov * &bwd.weight;
            let lu = system.lu();
            let mut cov = lu.solve(&f.cov).ok_or(Error::Singular("combine"))?;
            symmetrize(&mut cov);
            let rhs = &f.mean + &f.cov * &bwd.weighted_mean;
            let mean = lu.solve(&rhs).ok_or(Error::Singular("combine"))?;
            if cov
                .iter()
                .chain(mean.iter())
                .any(|z| !(z.re.is_finite() && z.im.is_finite()))
            {
                return Err(Error::Singular("combine"));
            }
            Ok(Moments::new(mean, cov))
        }
        GaussianMessage::Dual(f) => {
            let total = Dual::new(
                &f.weight + &bwd.weight,
                &f.weighted_mean + &bwd.weighted_mean,
            );
            total.to_moments()
        }
    }
}

/// Per-symbol posteriors `(m_post, v_post)`, indexed `k * n_t + j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorBlock<T> {
    pub blocklen: usize,
    pub n_t: usize,
    pub symbols: Vec<SymbolMoments<T>>,
}

impl<T: Real> PosteriorBlock<T> {
    pub fn get(&self, k: usize, j: usize) -> &SymbolMoments<T> {
        &self.symbols[k * self.n_t + j]
    }
}

/// Combines at `x̄_k` for `k = L, 2L, ...` (plus `k = N` if it is not
/// covered) and reads every symbol off the diagonal blocks.
pub fn combine_and_extract<T: Real>(
    fwd: &[Moments<T>],
    bwd: &[Dual<T>],
    ss: &StateSpace<T>,
) -> Result<PosteriorBlock<T>> {
    if fwd.len() != ss.steps() || bwd.len() != ss.steps() {
        return Err(Error::LengthMismatch {
            expected: ss.steps(),
            actual: fwd.len().min(bwd.len()),
        });
    }
    let (n, l, n_t) = (ss.blocklen, ss.n_taps, ss.n_t);
    let j = l - 1;
    let mut symbols =
        vec![SymbolMoments::new(Complex::new(T::zero(), T::zero()), T::zero()); n * n_t];
    // 1-based state index k covers symbols k - J .. k
    let mut points: Vec<usize> = (1..=n / l).map(|c| c * l).collect();
    if points.last().copied().unwrap_or(0) < n {
        points.push(n);
    }
    for &k in &points {
        let msg = GaussianMessage::Moments(fwd[k - 1].clone());
        let post = combine(&msg, &bwd[k - 1])?;
        for p in 0..l {
            // slot p holds x_{k - J + p}
            let t = k + p;
            if t < j + 1 || t - j > n {
                continue;
            }
            let time = t - j - 1;
            for a in 0..n_t {
                let idx = p * n_t + a;
                let v = post.cov[(idx, idx)].re;
                symbols[time * n_t + a] = SymbolMoments::new(post.mean[idx], v.max(T::zero()));
            }
        }
    }
    Ok(PosteriorBlock {
        blocklen: n,
        n_t,
        symbols,
    })
}

/// Full forward, backward and extraction pass over one block.
pub fn equalize<T: Real>(
    ss: &StateSpace<T>,
    y: &CMatrix<T>,
    priors: &[SymbolMoments<T>],
) -> Result<PosteriorBlock<T>> {
    let fwd = forward_pass(ss, y, priors)?;
    let bwd = backward_pass(ss, y, priors)?;
    combine_and_extract(&fwd, &bwd, ss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmp::rules::{affine_bwd, affine_fwd};
    use crate::scalar::cplx;

    fn siso(h: f64) -> ChannelRealization<f64> {
        ChannelRealization::siso(&[h]).unwrap()
    }

    #[test]
    fn shifts_match_affine_rules() {
        let ch = ChannelRealization::<f64>::generate_rayleigh(2, 2, 3, 1);
        let ss = StateSpace::new(&ch, 0.3, 4).unwrap();
        let dim = ss.state_dim();
        let a = crate::channel::unit_noise::<f64, _>(
            &mut crate::rng::stream(1, 1, crate::rng::Purpose::Instance),
            dim,
            dim,
        );
        let cov = &a * a.adjoint();
        let mean = a.column(0).into_owned();
        let m = Moments::new(mean.clone(), cov.clone());
        let direct = affine_fwd(&ss.g, &m).unwrap();
        let fast = shift_forward(&m, 2);
        assert!((direct.cov - fast.cov).camax() < 1e-14);
        assert!((direct.mean - fast.mean).camax() < 1e-14);

        let d = Dual::new(cov, mean);
        let direct = affine_bwd(&ss.g, &d).unwrap();
        let fast = shift_backward(&d, 2);
        assert!((direct.weight - fast.weight).camax() < 1e-14);
        assert!((direct.weighted_mean - fast.weighted_mean).camax() < 1e-14);
    }

    #[test]
    fn state_space_structure() {
        let ch = ChannelRealization::<f64>::generate_rayleigh(2, 1, 3, 2);
        let ss = StateSpace::new(&ch, 1.0, 5).unwrap();
        // the slot F writes into is always empty after the shift
        assert!((ss.f.adjoint() * &ss.g).camax() == 0.0);
        assert_eq!(ss.f.view((4, 0), (2, 2)), DMatrix::identity(2, 2));
        assert!(StateSpace::new(&ch, 0.0, 5).is_err());
    }

    #[test]
    fn scalar_awgn_reduces_to_per_symbol_mmse() {
        let h = 0.8;
        let n0 = 0.5;
        let ss = StateSpace::new(&siso(h), n0, 3).unwrap();
        let y = DMatrix::from_row_slice(1, 3, &[cplx(0.4, 0.1), cplx(-1.0, 0.0), cplx(0.2, -0.3)]);
        let priors = vec![
            SymbolMoments::new(cplx(0.0, 0.0), 1.0),
            SymbolMoments::new(cplx(0.5, 0.0), 0.4),
            SymbolMoments::new(cplx(-0.2, 0.1), 2.0),
        ];
        let post = equalize(&ss, &y, &priors).unwrap();
        for (k, p) in priors.iter().enumerate() {
            let v = 1.0 / (1.0 / p.variance + h * h / n0);
            let m = v * (p.mean / p.variance + y[(0, k)] * h / n0);
            assert!((post.symbols[k].variance - v).abs() < 1e-13);
            assert!((post.symbols[k].mean - m).norm() < 1e-13);
        }
        let fwd = forward_pass(&ss, &y, &priors).unwrap();
        for (k, p) in priors.iter().enumerate() {
            assert!((fwd[k].cov[(0, 0)].re - p.variance).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_noise_returns_priors() {
        let ch = ChannelRealization::<f64>::generate_rayleigh(2, 2, 2, 3);
        let ss = StateSpace::new(&ch, 1e12, 4).unwrap();
        let y = crate::channel::unit_noise(
            &mut crate::rng::stream(3, 0, crate::rng::Purpose::Noise),
            2,
            5,
        );
        let priors: Vec<_> = (0..8)
            .map(|i| SymbolMoments::new(cplx(0.1 * i as f64, -0.05), 0.5 + 0.1 * i as f64))
            .collect();
        let post = equalize(&ss, &y, &priors).unwrap();
        for (p, q) in post.symbols.iter().zip(&priors) {
            assert!((p.mean - q.mean).norm() < 1e-6);
            assert!((p.variance - q.variance).abs() < 1e-6);
        }
    }

    #[test]
    fn single_block_backward_weight() {
        let ch = ChannelRealization::<f64>::generate_rayleigh(2, 2, 1, 4);
        let n0 = 0.7;
        let ss = StateSpace::new(&ch, n0, 1).unwrap();
        let y = DMatrix::zeros(2, 1);
        let priors = vec![SymbolMoments::uninformed(); 2];
        let bwd = backward_pass(&ss, &y, &priors).unwrap();
        let expected = ss.hbar.adjoint() * &ss.hbar / cplx(n0, 0.0);
        assert!((&bwd[0].weight - expected).camax() < 1e-14);
        assert!(bwd[0].weighted_mean.camax() == 0.0);
    }

    #[test]
    fn zero_inputs_give_zero_means() {
        let ch = ChannelRealization::<f64>::generate_rayleigh(2, 2, 3, 5);
        let ss = StateSpace::new(&ch, 0.2, 6).unwrap();
        let y = DMatrix::zeros(2, 8);
        let priors = vec![SymbolMoments::uninformed(); 12];
        let fwd = forward_pass(&ss, &y, &priors).unwrap();
        let bwd = backward_pass(&ss, &y, &priors).unwrap();
        assert!(fwd.iter().all(|m| m.mean.camax() == 0.0));
        assert!(bwd.iter().all(|m| m.weighted_mean.camax() == 0.0));
    }

    #[test]
    fn combine_limits() {
        let dim = 3;
        let a = crate::channel::unit_noise::<f64, _>(
            &mut crate::rng::stream(9, 0, crate::rng::Purpose::Instance),
            dim,
            dim,
        );
        let cov = &a * a.adjoint() + DMatrix::identity(dim, dim);
        let mean = a.column(1).into_owned();
        let f = Moments::new(mean.clone(), cov.clone());
        let post = combine(&GaussianMessage::Moments(f.clone()), &Dual::vacuous(dim)).unwrap();
        assert!((post.cov - &cov).camax() < 1e-12);
        assert!((post.mean - &mean).camax() < 1e-12);

        let b = Dual::new(cov.clone(), mean.clone());
        let expected = b.to_moments().unwrap();
        let post = combine(&GaussianMessage::Dual(Dual::vacuous(dim)), &b).unwrap();
        assert!((post.cov - &expected.cov).camax() < 1e-12);
        assert!((post.mean - &expected.mean).camax() < 1e-12);

        // both forms agree when the forward covariance is invertible
        let via_moments = combine(&GaussianMessage::Moments(f.clone()), &b).unwrap();
        let via_dual = combine(&GaussianMessage::Dual(f.to_dual().unwrap()), &b).unwrap();
        assert!((via_moments.cov - via_dual.cov).camax() < 1e-12);
        assert!((via_moments.mean - via_dual.mean).camax() < 1e-12);
    }

    #[test]
    fn rejects_bad_shapes() {
        let ss = StateSpace::new(&siso(1.0), 1.0, 3).unwrap();
        let y = DMatrix::zeros(1, 2);
        assert!(forward_pass(&ss, &y, &[SymbolMoments::uninformed(); 3]).is_err());
        let y = DMatrix::zeros(1, 3);
        assert!(backward_pass(&ss, &y, &[SymbolMoments::uninformed(); 2]).is_err());
    }
}
