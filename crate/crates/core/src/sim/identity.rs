//! Cross-module identities checked on random small instances.

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{complex_gaussian, ChannelRealization};
use crate::constellation::{Alphabet, SymbolMoments};
use crate::error::Result;
use crate::gmp::{
    affine_bwd, affine_fwd, composite_backward, composite_forward, equality_combine, equalize,
    sum_bwd, Dual, Moments, StateSpace,
};
use crate::llr_bridge::{
    block_lmmse_oracle, symbol_extrinsic_llrs, wp_direct_oracle, wp_from_posteriors,
};
use crate::rng::{stream, Purpose};
use crate::scalar::{CMatrix, CVector};

/// A random small equalization problem.
#[derive(Debug, Clone)]
pub struct Instance {
    pub channel: ChannelRealization<f64>,
    pub n0: f64,
    pub blocklen: usize,
    pub priors: Vec<SymbolMoments<f64>>,
    pub y: CMatrix<f64>,
}

impl Instance {
    /// `N <= 8`, `n_t, n_r <= 2`, `L <= 3`, `N0` log-uniform on `[0.01, 10]`,
    /// prior means `CN(0, 1/2)` and variances log-uniform on `[0.01, 1.6]`.
    pub fn random(seed: u64, trial: u64) -> Self {
        let mut rng = stream(seed, trial, Purpose::Instance);
        let n_t = rng.random_range(1..=2);
        let n_r = rng.random_range(1..=2);
        let l = rng.random_range(1..=3);
        let blocklen = rng.random_range(1..=8);
        let n0 = 10f64.powf(rng.random_range(-2.0..=1.0));
        let channel = ChannelRealization::rayleigh(n_t, n_r, l, &mut rng);
        let priors = (0..blocklen * n_t)
            .map(|_| {
                let mean = complex_gaussian(&mut rng, 0.5);
                SymbolMoments::new(mean, 10f64.powf(rng.random_range(-2.0..=0.2)))
            })
            .collect();
        let x = DMatrix::from_fn(n_t, blocklen, |_, _| complex_gaussian(&mut rng, 1.0));
        let y = channel
            .transmit(&x, n0, &mut rng)
            .expect("random instance dimensions are consistent");
        Self {
            channel,
            n0,
            blocklen,
            priors,
            y,
        }
    }

    pub fn y_stacked(&self) -> CVector<f64> {
        DVector::from_column_slice(self.y.as_slice())
    }
}

/// `max |a - b| / max |b|`.
pub fn relative_error(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    let scale = b
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
        / scale
}

fn moments_flat(m: &Moments<f64>) -> Vec<Complex<f64>> {
    m.mean.iter().chain(m.cov.iter()).copied().collect()
}

fn dual_flat(d: &Dual<f64>) -> Vec<Complex<f64>> {
    d.weighted_mean
        .iter()
        .chain(d.weight.iter())
        .copied()
        .collect()
}

fn symbols_flat(s: &[SymbolMoments<f64>]) -> Vec<Complex<f64>> {
    s.iter()
        .flat_map(|p| [p.mean, Complex::new(p.variance, 0.0)])
        .collect()
}

pub type CompositeForward =
    fn(&Moments<f64>, &CMatrix<f64>, &CVector<f64>, &CMatrix<f64>) -> Result<Moments<f64>>;
pub type CompositeBackward =
    fn(&Dual<f64>, &CMatrix<f64>, &CVector<f64>, &CMatrix<f64>) -> Result<Dual<f64>>;

/// Composite rules under test; replaceable to check the suite catches faults.
#[derive(Clone, Copy)]
pub struct CompositeRules {
    pub forward: CompositeForward,
    pub backward: CompositeBackward,
}

impl Default for CompositeRules {
    fn default() -> Self {
        Self {
            forward: composite_forward,
            backward: composite_backward,
        }
    }
}

/// GMP posteriors against the block LMMSE oracle.
pub fn gmp_vs_lmmse(inst: &Instance) -> Result<f64> {
    let ss = StateSpace::new(&inst.channel, inst.n0, inst.blocklen)?;
    let gmp = equalize(&ss, &inst.y, &inst.priors)?;
    let hconv = inst.channel.build_stacked(inst.blocklen).hconv;
    let oracle = block_lmmse_oracle(
        &inst.y_stacked(),
        &hconv,
        &inst.priors,
        inst.n0,
        inst.channel.n_t(),
    )?;
    Ok(relative_error(
        &symbols_flat(&gmp.symbols),
        &symbols_flat(&oracle.symbols),
    ))
}

/// WP parameters from oracle posteriors against the direct construction.
pub fn wp_identity(inst: &Instance) -> Result<f64> {
    let y = inst.y_stacked();
    let hconv = inst.channel.build_stacked(inst.blocklen).hconv;
    let post = block_lmmse_oracle(&y, &hconv, &inst.priors, inst.n0, inst.channel.n_t())?;
    let mut via = Vec::new();
    let mut direct = Vec::new();
    for (idx, (p, q)) in post.symbols.iter().zip(&inst.priors).enumerate() {
        let a = wp_from_posteriors(p, q)?;
        let b = wp_direct_oracle(&y, &hconv, &inst.priors, inst.n0, idx)?;
        via.extend([
            a.x_hat,
            Complex::new(a.mu, 0.0),
            Complex::new(a.sigma2, 0.0),
        ]);
        direct.extend([
            b.x_hat,
            Complex::new(b.mu, 0.0),
            Complex::new(b.sigma2, 0.0),
        ]);
    }
    Ok(relative_error(&via, &direct))
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| complex_gaussian(rng, 1.0))
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> CVector<f64> {
    DVector::from_fn(n, |_, _| complex_gaussian(rng, 1.0))
}

/// Well-conditioned random Hermitian positive definite matrix.
fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> CMatrix<f64> {
    let a = random_matrix(rng, n, n);
    let scale = rng.random_range(0.1..=2.0);
    (&a * a.adjoint()) * Complex::new(scale / n as f64, 0.0)
        + CMatrix::identity(n, n) * Complex::new(0.1, 0.0)
}

/// Composite updates against the composition of basic rules on one random
/// draw; returns the larger of the forward and backward errors.
pub fn composite_vs_basic(rng: &mut ChaCha8Rng, rules: &CompositeRules) -> Result<f64> {
    let n = rng.random_range(1..=6);
    let p = rng.random_range(1..=4);
    let a = random_matrix(rng, p, n);

    let x = Moments::new(random_vector(rng, n), random_pd(rng, n));
    let y = random_vector(rng, p);
    let vy = random_pd(rng, p);
    let fast = (rules.forward)(&x, &a, &y, &vy)?;
    let wy = crate::gmp::hermitian_inverse(&vy, "observation covariance")?;
    let obs = Dual::new(wy.clone(), &wy * &y);
    let slow = equality_combine(&x.to_dual()?, &affine_bwd(&a, &obs)?)?.to_moments()?;
    let fwd = relative_error(&moments_flat(&fast), &moments_flat(&slow));

    let xb = Dual::new(random_pd(rng, p), random_vector(rng, p));
    let m_down = random_vector(rng, n);
    let w_down = random_pd(rng, n);
    let fast = (rules.backward)(&xb, &a, &m_down, &w_down)?;
    let u = Moments::new(
        m_down,
        crate::gmp::hermitian_inverse(&w_down, "injection weight")?,
    );
    let slow = sum_bwd(&xb.to_moments()?, &affine_fwd(&a, &u)?)?.to_dual()?;
    let bwd = relative_error(&dual_flat(&fast), &dual_flat(&slow));
    Ok(fwd.max(bwd))
}

/// One-symbol SISO block with uninformed prior: extrinsic LLRs against the
/// matched-filter demapper (BPSK also against `4 Re{h^H y} / N0`).
pub fn single_symbol(rng: &mut ChaCha8Rng, order: usize) -> Result<f64> {
    let alphabet = Alphabet::<f64>::new(order)?;
    let l = rng.random_range(1..=3);
    let ch = ChannelRealization::rayleigh(1, 1, l, rng);
    let n0 = 10f64.powf(rng.random_range(-1.5..=1.0));
    let x = DMatrix::from_element(1, 1, alphabet.points()[rng.random_range(0..order)]);
    let y = ch.transmit(&x, n0, rng)?;
    let ss = StateSpace::new(&ch, n0, 1)?;
    let prior = SymbolMoments::uninformed();
    let post = equalize(&ss, &y, &[prior])?;
    let zeros = vec![0.0; alphabet.bits_per_symbol()];
    let got = symbol_extrinsic_llrs(&post.symbols[0], &prior, &zeros, &alphabet)?;

    let h = ch.build_stacked(1).hconv.column(0).into_owned();
    let yv = DVector::from_column_slice(y.as_slice());
    let energy = h.norm_squared();
    let mf = h.dotc(&yv);
    let want = if order == 2 {
        vec![4.0 * mf.re / n0]
    } else {
        alphabet.awgn_demapper_llrs(mf / energy, n0 / energy)?
    };
    let c = |v: &[f64]| v.iter().map(|&r| Complex::new(r, 0.0)).collect::<Vec<_>>();
    Ok(relative_error(&c(&got), &c(&want)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityEntry {
    pub name: &'static str,
    pub trials: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// First failure that prevented evaluation, if any.
    pub error: Option<String>,
}

impl IdentityEntry {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.max_error < self.tolerance
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityReport {
    pub entries: Vec<IdentityEntry>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(IdentityEntry::passed)
    }

    pub fn get(&self, name: &str) -> Option<&IdentityEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

impl std::fmt::Display for IdentityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for e in &self.entries {
            let status = if e.passed() { "PASS" } else { "FAIL" };
            write!(
                f,
                "{status} {:<24} trials={:<5} max_err={:.3e} tol={:.0e}",
                e.name, e.trials, e.max_error, e.tolerance
            )?;
            if let Some(err) = &e.error {
                write!(f, " error={err}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn entry(
    name: &'static str,
    trials: usize,
    tolerance: f64,
    mut check: impl FnMut(u64) -> Result<f64>,
) -> IdentityEntry {
    let mut max_error = 0.0f64;
    let mut error = None;
    for t in 0..trials as u64 {
        match check(t) {
            Ok(e) if e.is_nan() => max_error = f64::INFINITY,
            Ok(e) => max_error = max_error.max(e),
            Err(e) => {
                error = Some(e.to_string());
                break;
            }
        }
    }
    IdentityEntry {
        name,
        trials,
        max_error,
        tolerance,
        error,
    }
}

pub const GMP_VS_LMMSE: &str = "gmp_vs_block_lmmse";
pub const WP_IDENTITY: &str = "wp_identity";
pub const COMPOSITE: &str = "composite_vs_basic";
pub const SINGLE_BPSK: &str = "single_symbol_bpsk";
pub const SINGLE_QAM: &str = "single_symbol_16qam";

pub fn run_identity_suite(seed: u64, trials: usize) -> IdentityReport {
    run_identity_suite_with(seed, trials, &CompositeRules::default())
}

pub fn run_identity_suite_with(seed: u64, trials: usize, rules: &CompositeRules) -> IdentityReport {
    if trials == 0 {
        return IdentityReport::default();
    }
    let entries = vec![
        entry(GMP_VS_LMMSE, trials, 1e-8, |t| {
            gmp_vs_lmmse(&Instance::random(seed, t))
        }),
        entry(WP_IDENTITY, trials, 1e-8, |t| {
            wp_identity(&Instance::random(seed, t))
        }),
        entry(COMPOSITE, trials, 1e-10, |t| {
            composite_vs_basic(&mut stream(seed, t, Purpose::Channel), rules)
        }),
        entry(SINGLE_BPSK, trials, 1e-9, |t| {
            single_symbol(&mut stream(seed, t, Purpose::Noise), 2)
        }),
        entry(SINGLE_QAM, trials, 1e-8, |t| {
            single_symbol(&mut stream(seed, t, Purpose::Bits), 16)
        }),
    ];
    IdentityReport { entries }
}
