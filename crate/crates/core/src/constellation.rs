//! Square M-QAM alphabets with per-axis Gray labels, and the conversions
//! between bit LLRs and symbol-domain quantities.
//!
//! LLRs follow `L = ln(P[bit = 0] / P[bit = 1])` everywhere in the crate.
//! Bit `q = 0` is the most significant bit of a label; for square QAM the
//! first half of the label selects the in-phase level and the second half the
//! quadrature level.

use nalgebra::Complex;

use crate::error::{Error, Result};
use crate::llr_bridge::WpParams;
use crate::scalar::{log_sum_exp, softplus, Real};

/// Mean and variance of a single complex symbol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymbolMoments<T> {
    pub mean: Complex<T>,
    pub variance: T,
}

impl<T: Real> SymbolMoments<T> {
    pub fn new(mean: Complex<T>, variance: T) -> Self {
        Self { mean, variance }
    }

    /// Zero mean, unit variance: the uninformed prior for a unit-energy alphabet.
    pub fn uninformed() -> Self {
        Self::new(Complex::new(T::zero(), T::zero()), T::one())
    }

    /// Known symbol.
    pub fn point(s: Complex<T>) -> Self {
        Self::new(s, T::zero())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alphabet<T> {
    order: usize,
    bits: usize,
    /// Indexed by label value, so `points[label]` is the symbol carrying `label`.
    points: Vec<Complex<T>>,
    labels: Vec<u32>,
    /// `partitions[q][v]` lists the point indices whose bit `q` equals `v`.
    partitions: Vec<[Vec<usize>; 2]>,
    energy: T,
}

/// Gray-coded PAM levels for one axis, indexed by the axis label.
fn gray_axis_levels(axis_bits: usize) -> Vec<f64> {
    let m = 1usize << axis_bits;
    let mut levels = vec![0.0; m];
    for i in 0..m {
        let gray = i ^ (i >> 1);
        // Index 0 is the most positive level so the all-zero label lands in
        // the first quadrant.
        levels[gray] = ((m - 1) as f64) - 2.0 * i as f64;
    }
    levels
}

impl<T: Real> Alphabet<T> {
    /// Builds BPSK for `order == 2` or square Gray QAM for 4, 16, 64, 256.
    pub fn new(order: usize) -> Result<Self> {
        let bits = match order {
            2 => 1,
            4 => 2,
            16 => 4,
            64 => 6,
            256 => 8,
            _ => return Err(Error::UnsupportedOrder(order)),
        };
        let raw: Vec<(f64, f64)> = if order == 2 {
            vec![(1.0, 0.0), (-1.0, 0.0)]
        } else {
            let axis_bits = bits / 2;
            let levels = gray_axis_levels(axis_bits);
            let mask = (1usize << axis_bits) - 1;
            (0..order)
                .map(|label| (levels[label >> axis_bits], levels[label & mask]))
                .collect()
        };
        let avg: f64 = raw.iter().map(|(i, q)| i * i + q * q).sum::<f64>() / order as f64;
        let scale = avg.sqrt().recip();
        let points: Vec<Complex<T>> = raw
            .iter()
            .map(|&(i, q)| Complex::new(T::lit(i * scale), T::lit(q * scale)))
            .collect();
        let labels: Vec<u32> = (0..order as u32).collect();
        let partitions = (0..bits)
            .map(|q| {
                let shift = bits - 1 - q;
                let mut zero = Vec::with_capacity(order / 2);
                let mut one = Vec::with_capacity(order / 2);
                for (idx, &l) in labels.iter().enumerate() {
                    if (l >> shift) & 1 == 0 {
                        zero.push(idx);
                    } else {
                        one.push(idx);
                    }
                }
                [zero, one]
            })
            .collect();
        let energy = points
            .iter()
            .map(|p| p.norm_sqr())
            .fold(T::zero(), |a, b| a + b)
            / T::lit(order as f64);
        Ok(Self {
            order,
            bits,
            points,
            labels,
            partitions,
            energy,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits
    }

    pub fn points(&self) -> &[Complex<T>] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn energy(&self) -> T {
        self.energy
    }

    /// Point indices whose bit `q` equals `value`.
    pub fn subset(&self, q: usize, value: u8) -> &[usize] {
        &self.partitions[q][value as usize]
    }

    /// Bit `q` of the label carried by point `idx`.
    #[inline]
    pub fn bit(&self, idx: usize, q: usize) -> u8 {
        ((self.labels[idx] >> (self.bits - 1 - q)) & 1) as u8
    }

    pub fn label_bits(&self, idx: usize) -> Vec<u8> {
        (0..self.bits).map(|q| self.bit(idx, q)).collect()
    }

    /// Maps each group of `bits_per_symbol` bits (MSB first) to its point.
    pub fn modulate(&self, bits: &[u8]) -> Result<Vec<Complex<T>>> {
        if !bits.len().is_multiple_of(self.bits) {
            return Err(Error::LengthMismatch {
                expected: bits.len().div_ceil(self.bits) * self.bits,
                actual: bits.len(),
            });
        }
        Ok(bits
            .chunks(self.bits)
            .map(|group| {
                let label = group
                    .iter()
                    .fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.points[label]
            })
            .collect())
    }

    /// Index of the point nearest to `y`.
    pub fn nearest(&self, y: Complex<T>) -> usize {
        let mut best = 0;
        let mut best_d = (y - self.points[0]).norm_sqr();
        for (idx, p) in self.points.iter().enumerate().skip(1) {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best = idx;
                best_d = d;
            }
        }
        best
    }

    /// Minimum-distance hard decisions, inverse of [`Alphabet::modulate`].
    pub fn hard_demap(&self, symbols: &[Complex<T>]) -> Vec<u8> {
        symbols
            .iter()
            .flat_map(|&y| self.label_bits(self.nearest(y)))
            .collect()
    }

    /// `ln p(s)` for every point under independent bit priors.
    fn log_pmf(&self, llrs: &[T]) -> Vec<T> {
        debug_assert_eq!(llrs.len(), self.bits);
        // ln P[0] = -softplus(-L), ln P[1] = -softplus(L)
        let half: Vec<[T; 2]> = llrs
            .iter()
            .map(|&l| [-softplus(-l), -softplus(l)])
            .collect();
        (0..self.order)
            .map(|idx| {
                (0..self.bits).fold(T::zero(), |acc, q| acc + half[q][self.bit(idx, q) as usize])
            })
            .collect()
    }

    /// Symbol mean and variance implied by `bits_per_symbol` prior bit LLRs.
    pub fn prior_moments(&self, llrs: &[T]) -> Result<SymbolMoments<T>> {
        if llrs.len() != self.bits {
            return Err(Error::LengthMismatch {
                expected: self.bits,
                actual: llrs.len(),
            });
        }
        let lp = self.log_pmf(llrs);
        let mut mean = Complex::new(T::zero(), T::zero());
        let mut second = T::zero();
        for (p, s) in lp.iter().zip(&self.points) {
            let w = p.exp();
            if w > T::zero() {
                mean += s * w;
                second += s.norm_sqr() * w;
            }
        }
        let variance = (second - mean.norm_sqr()).max(T::zero());
        Ok(SymbolMoments { mean, variance })
    }

    /// Extrinsic bit LLRs of one symbol under `x_hat = mu * x + eta`,
    /// `eta ~ CN(0, sigma2)`, with independent prior bit LLRs.
    ///
    /// The prior of bit `q` factors out of both subset sums and cancels, so it
    /// is excluded from the metric directly; this keeps saturated priors finite.
    pub fn extrinsic_bit_llrs(&self, wp: &WpParams<T>, prior_llrs: &[T]) -> Result<Vec<T>> {
        if !(wp.sigma2 > T::zero()) {
            return Err(Error::NonPositiveSigma(wp.sigma2.as_f64()));
        }
        if prior_llrs.len() != self.bits {
            return Err(Error::LengthMismatch {
                expected: self.bits,
                actual: prior_llrs.len(),
            });
        }
        let half: Vec<[T; 2]> = prior_llrs
            .iter()
            .map(|&l| [-softplus(-l), -softplus(l)])
            .collect();
        let distance: Vec<T> = self
            .points
            .iter()
            .map(|s| -(wp.x_hat - s * wp.mu).norm_sqr() / wp.sigma2)
            .collect();
        Ok((0..self.bits)
            .map(|q| {
                let metric = |idx: usize| {
                    (0..self.bits)
                        .filter(|&o| o != q)
                        .fold(distance[idx], |acc, o| {
                            acc + half[o][self.bit(idx, o) as usize]
                        })
                };
                let num = log_sum_exp(self.subset(q, 0).iter().map(|&i| metric(i)));
                let den = log_sum_exp(self.subset(q, 1).iter().map(|&i| metric(i)));
                num - den
            })
            .collect())
    }

    /// Exact AWGN bit LLRs for `y = s + n`, `n ~ CN(0, n0)`.
    pub fn awgn_demapper_llrs(&self, y: Complex<T>, n0: T) -> Result<Vec<T>> {
        if !(n0 > T::zero()) {
            return Err(Error::NonPositiveNoise(n0.as_f64()));
        }
        let metric: Vec<T> = self
            .points
            .iter()
            .map(|s| -(y - s).norm_sqr() / n0)
            .collect();
        Ok((0..self.bits)
            .map(|q| {
                log_sum_exp(self.subset(q, 0).iter().map(|&i| metric[i]))
                    - log_sum_exp(self.subset(q, 1).iter().map(|&i| metric[i]))
            })
            .collect())
    }
}
