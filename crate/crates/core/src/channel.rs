//! Quasi-static MIMO ISI channel: tap generation, block transmission with
//! complex AWGN, the stacked observation matrices, and a plain-text fixture
//! format.

use std::fmt::Write as _;

use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scalar::{CMatrix, Real};

/// Taps `H_0 .. H_{L-1}`, each `n_r x n_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization<T: Real> {
    taps: Vec<CMatrix<T>>,
    n_t: usize,
    n_r: usize,
}

/// Stacked forms of a channel for a given block length.
#[derive(Debug, Clone)]
pub struct StackedChannel<T: Real> {
    /// `[H_J ... H_0]`, `n_r x n_t L`.
    pub hbar: CMatrix<T>,
    /// Block-Toeplitz convolution matrix, `n_r (N + J) x n_t N`.
    pub hconv: CMatrix<T>,
    pub blocklen: usize,
}

/// Draws one sample of `CN(0, variance)`.
pub fn complex_gaussian<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<T> {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::lit(re * s), T::lit(im * s))
}

/// Matrix of i.i.d. `CN(0, 1)` entries.
pub fn unit_noise<T: Real, R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix<T> {
    // column-major fill keeps the draw order independent of nalgebra internals
    let mut m = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_gaussian(rng, 1.0);
        }
    }
    m
}

impl<T: Real> ChannelRealization<T> {
    /// Wraps user taps verbatim; all taps must share one shape.
    pub fn from_taps(taps: Vec<CMatrix<T>>) -> Result<Self> {
        let first = taps
            .first()
            .ok_or_else(|| Error::DimensionMismatch("no channel taps".into()))?;
        let (n_r, n_t) = first.shape();
        if n_r == 0 || n_t == 0 {
            return Err(Error::DimensionMismatch("empty tap matrix".into()));
        }
        if let Some(bad) = taps.iter().position(|t| t.shape() != (n_r, n_t)) {
            return Err(Error::DimensionMismatch(format!(
                "tap {bad} is {:?}, expected {:?}",
                taps[bad].shape(),
                (n_r, n_t)
            )));
        }
        if taps
            .iter()
            .any(|t| t.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())))
        {
            return Err(Error::DimensionMismatch("non-finite tap entry".into()));
        }
        Ok(Self { taps, n_t, n_r })
    }

    /// Single-antenna channel from real tap amplitudes.
    pub fn siso(taps: &[f64]) -> Result<Self> {
        Self::from_taps(
            taps.iter()
                .map(|&h| DMatrix::from_element(1, 1, Complex::new(T::lit(h), T::zero())))
                .collect(),
        )
    }

    /// Equal power-delay profile Rayleigh taps: each entry `CN(0, 1/L)`.
    pub fn rayleigh<R: Rng + ?Sized>(n_t: usize, n_r: usize, n_taps: usize, rng: &mut R) -> Self {
        assert!(
            n_t >= 1 && n_r >= 1 && n_taps >= 1,
            "channel dimensions must be positive"
        );
        let var = 1.0 / n_taps as f64;
        let taps = (0..n_taps)
            .map(|_| {
                let mut h = DMatrix::zeros(n_r, n_t);
                for c in 0..n_t {
                    for r in 0..n_r {
                        h[(r, c)] = complex_gaussian(rng, var);
                    }
                }
                h
            })
            .collect();
        Self { taps, n_t, n_r }
    }

    /// Rayleigh realization from a seed alone.
    pub fn generate_rayleigh(n_t: usize, n_r: usize, n_taps: usize, seed: u64) -> Self {
        let mut rng = crate::rng::stream(seed, 0, crate::rng::Purpose::Channel);
        Self::rayleigh(n_t, n_r, n_taps, &mut rng)
    }

    pub fn taps(&self) -> &[CMatrix<T>] {
        &self.taps
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_taps(&self) -> usize {
        self.taps.len()
    }

    /// Channel memory `J = L - 1`.
    pub fn memory(&self) -> usize {
        self.taps.len() - 1
    }

    /// Same taps multiplied by a real gain.
    pub fn scaled(&self, gain: T) -> Self {
        Self {
            taps: self.taps.iter().map(|t| t.map(|z| z * gain)).collect(),
            n_t: self.n_t,
            n_r: self.n_r,
        }
    }

    /// `[H_J ... H_0]`.
    pub fn hbar(&self) -> CMatrix<T> {
        let l = self.taps.len();
        let mut hbar = DMatrix::zeros(self.n_r, self.n_t * l);
        for (i, tap) in self.taps.iter().enumerate() {
            let col = (l - 1 - i) * self.n_t;
            hbar.view_mut((0, col), (self.n_r, self.n_t)).copy_from(tap);
        }
        hbar
    }

    pub fn build_stacked(&self, blocklen: usize) -> StackedChannel<T> {
        assert!(blocklen >= 1, "block length must be positive");
        let j = self.memory();
        let mut hconv = DMatrix::zeros(self.n_r * (blocklen + j), self.n_t * blocklen);
        for k in 0..blocklen {
            for (i, tap) in self.taps.iter().enumerate() {
                hconv
                    .view_mut(((k + i) * self.n_r, k * self.n_t), (self.n_r, self.n_t))
                    .copy_from(tap);
            }
        }
        StackedChannel {
            hbar: self.hbar(),
            hconv,
            blocklen,
        }
    }

    /// Column of the convolution matrix belonging to symbol `(k, j)`,
    /// returned as `(first block row, per-tap entries)`: entry `i` is
    /// `H_i[:, j]`, located at block row `k + i`.
    pub fn symbol_column(&self, j: usize) -> Vec<Vec<Complex<T>>> {
        self.taps
            .iter()
            .map(|t| t.column(j).iter().copied().collect())
            .collect()
    }

    /// Noiseless convolution: `n_t x N` symbols to `n_r x (N + J)` outputs.
    pub fn convolve(&self, x: &CMatrix<T>) -> Result<CMatrix<T>> {
        if x.nrows() != self.n_t {
            return Err(Error::DimensionMismatch(format!(
                "symbol block has {} rows, channel has {} transmit antennas",
                x.nrows(),
                self.n_t
            )));
        }
        let n = x.ncols();
        let j = self.memory();
        let mut y = DMatrix::zeros(self.n_r, n + j);
        for k in 0..n + j {
            let mut yk = y.column_mut(k);
            for (i, tap) in self.taps.iter().enumerate() {
                if k >= i && k - i < n {
                    yk.gemv(
                        Complex::new(T::one(), T::zero()),
                        tap,
                        &x.column(k - i),
                        Complex::new(T::one(), T::zero()),
                    );
                }
            }
        }
        Ok(y)
    }

    /// `y = conv(x) + sqrt(n0) * unit_noise`, with `unit_noise` drawn by the caller.
    pub fn transmit_with_noise(
        &self,
        x: &CMatrix<T>,
        n0: T,
        unit_noise: &CMatrix<T>,
    ) -> Result<CMatrix<T>> {
        let mut y = self.convolve(x)?;
        if unit_noise.shape() != y.shape() {
            return Err(Error::DimensionMismatch(format!(
                "noise is {:?}, observations are {:?}",
                unit_noise.shape(),
                y.shape()
            )));
        }
        if n0 < T::zero() {
            return Err(Error::NonPositiveNoise(n0.as_f64()));
        }
        let s = n0.sqrt();
        y.zip_apply(unit_noise, |a, b| *a += b * s);
        Ok(y)
    }

    /// `y_k = sum_i H_i x_{k-i} + n_k`, `n_k ~ CN(0, n0 I)`, `k = 1 .. N + J`.
    pub fn transmit<R: Rng + ?Sized>(
        &self,
        x: &CMatrix<T>,
        n0: T,
        rng: &mut R,
    ) -> Result<CMatrix<T>> {
        if n0 < T::zero() {
            return Err(Error::NonPositiveNoise(n0.as_f64()));
        }
        if n0 == T::zero() {
            return self.convolve(x);
        }
        let noise = unit_noise(rng, self.n_r, x.ncols() + self.memory());
        self.transmit_with_noise(x, n0, &noise)
    }

    /// Plain-text form: a header line `channel <n_t> <n_r> <L>` followed by
    /// the taps in order, each as `n_r` rows of `n_t` `re+imj` tokens.
    pub fn to_text(&self) -> String {
        let mut out = format!("channel {} {} {}\n", self.n_t, self.n_r, self.taps.len());
        for tap in &self.taps {
            for r in 0..self.n_r {
                let row: Vec<String> = (0..self.n_t).map(|c| format_complex(tap[(r, c)])).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::DimensionMismatch(format!("channel text: {msg}"));
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| bad("missing header"))?
            .split_whitespace()
            .collect();
        if header.len() != 4 || header[0] != "channel" {
            return Err(bad("header must be `channel <n_t> <n_r> <taps>`"));
        }
        let dims: Vec<usize> = header[1..]
            .iter()
            .map(|s| s.parse().map_err(|_| bad("bad dimension")))
            .collect::<Result<_>>()?;
        let (n_t, n_r, n_taps) = (dims[0], dims[1], dims[2]);
        let mut taps = Vec::with_capacity(n_taps);
        for _ in 0..n_taps {
            let mut tap = DMatrix::zeros(n_r, n_t);
            for r in 0..n_r {
                let row: Vec<&str> = lines
                    .next()
                    .ok_or_else(|| bad("truncated"))?
                    .split_whitespace()
                    .collect();
                if row.len() != n_t {
                    return Err(bad("wrong number of entries in row"));
                }
                for (c, tok) in row.iter().enumerate() {
                    let (re, im) =
                        parse_complex(tok).ok_or_else(|| bad(&format!("bad token `{tok}`")))?;
                    tap[(r, c)] = Complex::new(T::lit(re), T::lit(im));
                }
            }
            taps.push(tap);
        }
        if lines.next().is_some() {
            return Err(bad("trailing data"));
        }
        Self::from_taps(taps)
    }
}

fn format_complex<T: Real>(z: Complex<T>) -> String {
    let (re, im) = (z.re.as_f64(), z.im.as_f64());
    if im.is_sign_negative() {
        format!("{re}-{}j", -im)
    } else {
        format!("{re}+{im}j")
    }
}

fn parse_complex(tok: &str) -> Option<(f64, f64)> {
    let body = tok.strip_suffix('j')?;
    let bytes = body.as_bytes();
    let split = (1..bytes.len()).rev().find(|&i| {
        (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E')
    })?;
    let re = body[..split].parse().ok()?;
    let im = body[split..].trim_start_matches('+').parse().ok()?;
    Some((re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::scalar::cplx;

    fn scalar_tap(re: f64, im: f64) -> CMatrix<f64> {
        DMatrix::from_element(1, 1, cplx(re, im))
    }

    fn random_block(n_t: usize, n: usize, seed: u64) -> CMatrix<f64> {
        let mut rng = stream(seed, 0, Purpose::Bits);
        unit_noise(&mut rng, n_t, n)
    }

    #[test]
    fn static_channel_examples() {
        let s6 = 6f64.sqrt();
        let ch = ChannelRealization::<f64>::siso(&[1.0 / s6, 2.0 / s6, 0.0, 0.0, 0.0, 1.0 / s6])
            .unwrap();
        assert_eq!(ch.n_taps(), 6);
        let power: f64 = ch.taps().iter().map(|t| t[(0, 0)].norm_sqr()).sum();
        assert!((power - 1.0).abs() < 1e-15);

        let awgn = ChannelRealization::from_taps(vec![CMatrix::<f64>::identity(2, 2)]).unwrap();
        let x = random_block(2, 5, 1);
        let y = awgn
            .transmit(&x, 0.0, &mut stream(0, 0, Purpose::Noise))
            .unwrap();
        assert_eq!(y, x);

        assert!(ChannelRealization::<f64>::from_taps(vec![]).is_err());
        let mixed = vec![
            CMatrix::<f64>::identity(2, 2),
            CMatrix::<f64>::identity(2, 1),
        ];
        assert!(matches!(
            ChannelRealization::from_taps(mixed),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn stacked_two_tap_unrolled() {
        let (a, b) = (cplx(0.8, 0.1), cplx(-0.3, 0.5));
        let ch =
            ChannelRealization::from_taps(vec![scalar_tap(a.re, a.im), scalar_tap(b.re, b.im)])
                .unwrap();
        let st = ch.build_stacked(2);
        let z = cplx(0.0, 0.0);
        let expected = DMatrix::from_row_slice(3, 2, &[a, z, b, a, z, b]);
        assert_eq!(st.hconv, expected);
        assert_eq!(st.hbar, DMatrix::from_row_slice(1, 2, &[b, a]));
    }

    #[test]
    fn single_tap_is_block_diagonal() {
        let ch = ChannelRealization::<f64>::generate_rayleigh(2, 3, 1, 4);
        let st = ch.build_stacked(4);
        for k in 0..4 {
            for l in 0..4 {
                let blk = st.hconv.view((3 * k, 2 * l), (3, 2));
                if k == l {
                    assert_eq!(blk, ch.taps()[0]);
                } else {
                    assert!(blk.iter().all(|z| z.norm() == 0.0));
                }
            }
        }
    }

    #[test]
    fn hconv_matches_convolution() {
        for (n_t, n_r, l, n) in [(1, 1, 3, 7), (2, 2, 2, 6), (2, 3, 4, 5), (3, 1, 1, 4)] {
            let ch = ChannelRealization::<f64>::generate_rayleigh(n_t, n_r, l, 11 + n as u64);
            let x = random_block(n_t, n, 3);
            let y = ch.convolve(&x).unwrap();
            let st = ch.build_stacked(n);
            let xv = nalgebra::DVector::from_column_slice(x.as_slice());
            let yv = &st.hconv * xv;
            let diff = (yv - nalgebra::DVector::from_column_slice(y.as_slice())).camax();
            assert!(diff < 1e-13, "{diff}");
        }
    }

    #[test]
    fn hconv_columns_are_shifted_taps() {
        let ch = ChannelRealization::<f64>::generate_rayleigh(2, 2, 3, 9);
        let st = ch.build_stacked(5);
        for k in 0..5 {
            for j in 0..2 {
                let col = st.hconv.column(k * 2 + j);
                for (i, tap) in ch.taps().iter().enumerate() {
                    for r in 0..2 {
                        assert_eq!(col[(k + i) * 2 + r], tap[(r, j)]);
                    }
                }
            }
        }
    }

    #[test]
    fn rayleigh_is_deterministic_and_normalized() {
        let a = ChannelRealization::<f64>::generate_rayleigh(2, 2, 5, 42);
        let b = ChannelRealization::<f64>::generate_rayleigh(2, 2, 5, 42);
        assert_eq!(a, b);

        for l in [1usize, 5] {
            let mut rng = stream(5, 0, Purpose::Channel);
            let draws = 10_000;
            let mut total = 0.0;
            let mut per_tap = 0.0;
            for _ in 0..draws {
                let ch = ChannelRealization::<f64>::rayleigh(1, 1, l, &mut rng);
                total += ch.taps().iter().map(|t| t[(0, 0)].norm_sqr()).sum::<f64>();
                per_tap += ch.taps()[0][(0, 0)].norm_sqr();
            }
            let mean = total / draws as f64;
            assert!((mean - 1.0).abs() < 0.05, "L={l}: {mean}");
            assert!((per_tap / draws as f64 - 1.0 / l as f64).abs() < 0.05);
        }
    }

    #[test]
    fn noise_statistics() {
        let ch = ChannelRealization::from_taps(vec![CMatrix::<f64>::identity(1, 1)]).unwrap();
        let n = 40_000;
        let x = DMatrix::zeros(1, n);
        let n0 = 4.0;
        let y = ch
            .transmit(&x, n0, &mut stream(2, 0, Purpose::Noise))
            .unwrap();
        let power: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>() / n as f64;
        let pseudo: Complex<f64> = y.iter().map(|z| z * z).sum::<Complex<f64>>() / n as f64;
        // std of |n|^2 is n0, of n^2 is n0 per component / sqrt(2)
        let tol = 3.0 * n0 / (n as f64).sqrt();
        assert!((power - n0).abs() < tol, "{power}");
        assert!(pseudo.norm() < tol, "{pseudo}");
    }

    #[test]
    fn text_round_trip() {
        let ch = ChannelRealization::<f64>::generate_rayleigh(2, 3, 2, 8);
        let text = ch.to_text();
        let back = ChannelRealization::<f64>::from_text(&text).unwrap();
        assert_eq!(back, ch);
        let parsed =
            ChannelRealization::<f64>::from_text("# fixture\nchannel 1 1 2\n1e-3+2E+1j\n-0.5-0j\n")
                .unwrap();
        assert_eq!(parsed.taps()[0][(0, 0)], cplx(1e-3, 20.0));
        assert_eq!(parsed.taps()[1][(0, 0)], cplx(-0.5, -0.0));
        assert!(ChannelRealization::<f64>::from_text("channel 1 1 2\n1+0j\n").is_err());
        assert!(ChannelRealization::<f64>::from_text("channel 1 1 1\n1+0i\n").is_err());
    }
}
