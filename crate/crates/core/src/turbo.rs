//! Turbo loop: equalizer and APP decoder exchanging extrinsic code-bit LLRs
//! through the interleaver, plus the genie matched-filter-bound receiver.
//!
//! Frame layout on the transmit side is info bits, encode, interleave, zero
//! padding to a whole number of symbol vectors, modulate, spatial multiplex.

use nalgebra::{Complex, DMatrix};

use crate::channel::ChannelRealization;
use crate::coding::{app_decode, encode, CodeSpec, Interleaver, LLR_CLAMP};
use crate::constellation::{Alphabet, SymbolMoments};
use crate::error::{Error, Result};
use crate::gmp::{equalize, StateSpace};
use crate::llr_bridge::{symbol_extrinsic_llrs, wp_from_posteriors};
use crate::scalar::{softplus, CMatrix, Real};

/// Default lower bound on prior variances handed to the equalizer.
pub const DEFAULT_PRIOR_VARIANCE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct TurboConfig<T: Real> {
    pub iterations: usize,
    pub alphabet: Alphabet<T>,
    pub code: CodeSpec,
    pub interleaver_seed: u64,
    pub n_t: usize,
    pub n_r: usize,
    /// Information bits per block.
    pub info_len: usize,
    pub prior_variance_floor: T,
}

impl<T: Real> TurboConfig<T> {
    pub fn new(
        alphabet: Alphabet<T>,
        code: CodeSpec,
        n_t: usize,
        n_r: usize,
        info_len: usize,
    ) -> Self {
        Self {
            iterations: 1,
            alphabet,
            code,
            interleaver_seed: 0,
            n_t,
            n_r,
            info_len,
            prior_variance_floor: T::lit(DEFAULT_PRIOR_VARIANCE_FLOOR),
        }
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_interleaver_seed(mut self, seed: u64) -> Self {
        self.interleaver_seed = seed;
        self
    }
}

/// Lengths and interleaver derived from a [`TurboConfig`].
#[derive(Debug, Clone)]
pub struct Frame {
    pub info_len: usize,
    pub coded_len: usize,
    /// Known zero bits appended after interleaving.
    pub pad_len: usize,
    pub bits_per_symbol: usize,
    pub n_t: usize,
    /// Symbol vectors per block, `N`.
    pub blocklen: usize,
    pub interleaver: Interleaver,
}

impl Frame {
    pub fn new<T: Real>(cfg: &TurboConfig<T>) -> Result<Self> {
        if cfg.iterations == 0 {
            return Err(Error::InvalidConfig(
                "at least one turbo iteration is required".into(),
            ));
        }
        if cfg.n_t == 0 || cfg.n_r == 0 || cfg.info_len == 0 {
            return Err(Error::InvalidConfig(
                "antenna counts and block length must be positive".into(),
            ));
        }
        if (cfg.alphabet.energy() - T::one()).abs() > T::lit(1e-5) {
            return Err(Error::InvalidConfig(
                "alphabet must have unit average energy".into(),
            ));
        }
        let coded_len = cfg.code.coded_len(cfg.info_len);
        let per_vector = cfg.alphabet.bits_per_symbol() * cfg.n_t;
        let total = coded_len.div_ceil(per_vector) * per_vector;
        Ok(Self {
            info_len: cfg.info_len,
            coded_len,
            pad_len: total - coded_len,
            bits_per_symbol: cfg.alphabet.bits_per_symbol(),
            n_t: cfg.n_t,
            blocklen: total / per_vector,
            interleaver: Interleaver::new(coded_len, cfg.interleaver_seed)?,
        })
    }

    pub fn symbols(&self) -> usize {
        self.blocklen * self.n_t
    }

    /// Code rate including the tail and padding.
    pub fn rate(&self) -> f64 {
        self.info_len as f64 / (self.coded_len + self.pad_len) as f64
    }
}

/// `[s_1 .. s_{N n_t}]` to the `n_t x N` block whose column `k` is `x_k`.
pub fn spatial_mux<T: Real>(symbols: &[Complex<T>], n_t: usize) -> Result<CMatrix<T>> {
    if n_t == 0 || !symbols.len().is_multiple_of(n_t) {
        return Err(Error::LengthMismatch {
            expected: symbols.len().div_ceil(n_t.max(1)) * n_t,
            actual: symbols.len(),
        });
    }
    Ok(DMatrix::from_column_slice(
        n_t,
        symbols.len() / n_t,
        symbols,
    ))
}

pub fn spatial_demux<T: Real>(block: &CMatrix<T>) -> Vec<Complex<T>> {
    block.as_slice().to_vec()
}

/// Mean of `1 - log2(1 + e^{-Z})` with `Z = (-1)^c L`.
pub fn information_content<T: Real>(bits: &[u8], llrs: &[T]) -> f64 {
    if bits.is_empty() {
        return 0.0;
    }
    let total: f64 = bits
        .iter()
        .zip(llrs)
        .map(|(&c, &l)| {
            let z = if c == 0 { l.as_f64() } else { -l.as_f64() };
            1.0 - softplus(-z) / std::f64::consts::LN_2
        })
        .sum();
    total / bits.len() as f64
}

/// Transmit side of one block.
#[derive(Debug, Clone)]
pub struct Transmission<T: Real> {
    pub info_bits: Vec<u8>,
    pub coded_bits: Vec<u8>,
    /// Interleaved coded bits followed by the padding.
    pub channel_bits: Vec<u8>,
    pub symbols: CMatrix<T>,
}

pub fn transmit_frame<T: Real>(
    info_bits: &[u8],
    cfg: &TurboConfig<T>,
    frame: &Frame,
) -> Result<Transmission<T>> {
    if info_bits.len() != frame.info_len {
        return Err(Error::LengthMismatch {
            expected: frame.info_len,
            actual: info_bits.len(),
        });
    }
    let coded_bits = encode(info_bits, &cfg.code);
    let mut channel_bits = frame.interleaver.interleave(&coded_bits)?;
    channel_bits.resize(channel_bits.len() + frame.pad_len, 0);
    let symbols = spatial_mux(&cfg.alphabet.modulate(&channel_bits)?, frame.n_t)?;
    Ok(Transmission {
        info_bits: info_bits.to_vec(),
        coded_bits,
        channel_bits,
        symbols,
    })
}

/// Soft-in soft-out equalizer stage: prior bit LLRs (channel order, padding
/// included) in, extrinsic bit LLRs out.
#[derive(Debug, Clone)]
pub struct EqualizerOutput<T> {
    pub llrs: Vec<T>,
    pub mean_mu: f64,
    /// Symbols for which the equalizer added no information.
    pub degenerate: usize,
}

pub fn soft_equalize<T: Real>(
    ss: &StateSpace<T>,
    y: &CMatrix<T>,
    prior_llrs: &[T],
    alphabet: &Alphabet<T>,
    variance_floor: T,
) -> Result<EqualizerOutput<T>> {
    let b = alphabet.bits_per_symbol();
    let n_sym = ss.blocklen * ss.n_t;
    if prior_llrs.len() != n_sym * b {
        return Err(Error::LengthMismatch {
            expected: n_sym * b,
            actual: prior_llrs.len(),
        });
    }
    let priors: Vec<SymbolMoments<T>> = prior_llrs
        .chunks(b)
        .map(|l| {
            let m = alphabet.prior_moments(l)?;
            Ok(SymbolMoments::new(m.mean, m.variance.max(variance_floor)))
        })
        .collect::<Result<_>>()?;
    let post = equalize(ss, y, &priors)?;
    let mut llrs = Vec::with_capacity(prior_llrs.len());
    let mut mu_sum = 0.0;
    let mut degenerate = 0;
    for ((p, q), l) in post.symbols.iter().zip(&priors).zip(prior_llrs.chunks(b)) {
        match wp_from_posteriors(p, q) {
            Ok(wp) => mu_sum += wp.mu.as_f64(),
            Err(Error::NoInformation) => degenerate += 1,
            Err(e) => return Err(e),
        }
        llrs.extend(symbol_extrinsic_llrs(p, q, l, alphabet)?);
    }
    Ok(EqualizerOutput {
        llrs,
        mean_mu: mu_sum / n_sym as f64,
        degenerate,
    })
}

/// Per-iteration record of one turbo decode.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationStats {
    pub decisions: Vec<u8>,
    /// Info-bit errors, when the transmitted bits were supplied.
    pub info_errors: Option<usize>,
    /// Information content of the decoder's extrinsic code-bit LLRs.
    pub info_content: Option<f64>,
    /// Same for the decoder's code-bit posteriors.
    pub info_content_posterior: Option<f64>,
    pub mean_mu: f64,
    pub degenerate_symbols: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationTrace {
    pub iterations: Vec<IterationStats>,
}

impl IterationTrace {
    pub fn final_decisions(&self) -> &[u8] {
        self.iterations
            .last()
            .map(|s| s.decisions.as_slice())
            .unwrap_or(&[])
    }
}

/// Receiver bound to one configuration.
#[derive(Debug, Clone)]
pub struct TurboReceiver<T: Real> {
    pub cfg: TurboConfig<T>,
    pub frame: Frame,
}

impl<T: Real> TurboReceiver<T> {
    pub fn new(cfg: TurboConfig<T>) -> Result<Self> {
        let frame = Frame::new(&cfg)?;
        Ok(Self { cfg, frame })
    }

    pub fn transmit(&self, info_bits: &[u8]) -> Result<Transmission<T>> {
        transmit_frame(info_bits, &self.cfg, &self.frame)
    }

    fn check_channel(&self, ch: &ChannelRealization<T>) -> Result<()> {
        if ch.n_t() != self.cfg.n_t || ch.n_r() != self.cfg.n_r {
            return Err(Error::DimensionMismatch(format!(
                "channel is {}x{}, receiver configured for {}x{}",
                ch.n_r(),
                ch.n_t(),
                self.cfg.n_r,
                self.cfg.n_t
            )));
        }
        Ok(())
    }

    /// Decoder-order LLRs into channel order; padding bits are known zeros.
    pub fn to_channel(&self, llrs: &[T]) -> Result<Vec<T>> {
        let mut out = self.frame.interleaver.interleave(llrs)?;
        out.resize(out.len() + self.frame.pad_len, T::lit(LLR_CLAMP));
        Ok(out)
    }

    /// Channel-order decoder-side LLRs into decoder order, padding dropped.
    pub fn to_decoder(&self, llrs: &[T]) -> Result<Vec<T>> {
        self.frame
            .interleaver
            .deinterleave(&llrs[..self.frame.coded_len])
    }

    fn stats(
        &self,
        out: &crate::coding::AppOutput<T>,
        truth: Option<&(Vec<u8>, Vec<u8>)>,
        eq: &EqualizerOutput<T>,
    ) -> IterationStats {
        let decisions = out.decisions.clone();
        let (info_errors, info_content, info_content_posterior) = match truth {
            Some((info, coded)) => (
                Some(decisions.iter().zip(info).filter(|(a, b)| a != b).count()),
                Some(information_content(coded, &out.extrinsic)),
                Some(information_content(coded, &out.code_posterior)),
            ),
            None => (None, None, None),
        };
        IterationStats {
            decisions,
            info_errors,
            info_content,
            info_content_posterior,
            mean_mu: eq.mean_mu,
            degenerate_symbols: eq.degenerate,
        }
    }

    /// Runs `cfg.iterations` equalizer/decoder rounds on one block.
    ///
    /// `truth`, when given, is the transmitted info bits and enables error
    /// counts and information-content tracking.
    pub fn decode(
        &self,
        y: &CMatrix<T>,
        ch: &ChannelRealization<T>,
        n0: T,
        truth: Option<&[u8]>,
    ) -> Result<IterationTrace> {
        self.check_channel(ch)?;
        let ss = StateSpace::new(ch, n0, self.frame.blocklen)?;
        let truth = truth
            .map(|info| {
                if info.len() != self.frame.info_len {
                    return Err(Error::LengthMismatch {
                        expected: self.frame.info_len,
                        actual: info.len(),
                    });
                }
                Ok((info.to_vec(), encode(info, &self.cfg.code)))
            })
            .transpose()?;
        let mut prior = self.to_channel(&vec![T::zero(); self.frame.coded_len])?;
        let mut trace = IterationTrace::default();
        for _ in 0..self.cfg.iterations {
            let eq = soft_equalize(
                &ss,
                y,
                &prior,
                &self.cfg.alphabet,
                self.cfg.prior_variance_floor,
            )?;
            let out = app_decode(&self.to_decoder(&eq.llrs)?, &self.cfg.code)?;
            trace.iterations.push(self.stats(&out, truth.as_ref(), &eq));
            prior = self.to_channel(&out.extrinsic)?;
        }
        Ok(trace)
    }

    /// Genie matched-filter-bound receiver: every interfering symbol is
    /// cancelled exactly, each symbol is matched-filtered over its stacked
    /// channel column, demapped, and decoded once.
    pub fn decode_mfb(
        &self,
        y: &CMatrix<T>,
        ch: &ChannelRealization<T>,
        n0: T,
        sent: &Transmission<T>,
    ) -> Result<IterationStats> {
        self.check_channel(ch)?;
        if !(n0 > T::zero()) {
            return Err(Error::NonPositiveNoise(n0.as_f64()));
        }
        let x = &sent.symbols;
        // with all symbols known, y - H x leaves exactly the noise seen by the
        // matched filter of each symbol
        let residual = y - ch.convolve(x)?;
        let b = self.frame.bits_per_symbol;
        let mut llrs = Vec::with_capacity(self.frame.symbols() * b);
        let zero = Complex::new(T::zero(), T::zero());
        for k in 0..self.frame.blocklen {
            for j in 0..self.frame.n_t {
                let mut energy = T::zero();
                let mut proj = zero;
                for (i, tap) in ch.taps().iter().enumerate() {
                    for r in 0..ch.n_r() {
                        let h = tap[(r, j)];
                        energy += h.norm_sqr();
                        proj += h.conj() * residual[(r, k + i)];
                    }
                }
                if energy > T::zero() {
                    let z = x[(j, k)] + proj / energy;
                    llrs.extend(self.cfg.alphabet.awgn_demapper_llrs(z, n0 / energy)?);
                } else {
                    llrs.extend(std::iter::repeat_n(T::zero(), b));
                }
            }
        }
        let out = app_decode(&self.to_decoder(&llrs)?, &self.cfg.code)?;
        let eq = EqualizerOutput {
            llrs: Vec::new(),
            mean_mu: 1.0,
            degenerate: 0,
        };
        Ok(self.stats(
            &out,
            Some(&(sent.info_bits.clone(), sent.coded_bits.clone())),
            &eq,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::cplx;

    fn receiver(
        order: usize,
        n_t: usize,
        n_r: usize,
        info: usize,
        iters: usize,
    ) -> TurboReceiver<f64> {
        let cfg = TurboConfig::new(
            Alphabet::new(order).unwrap(),
            CodeSpec::conv_7_5(),
            n_t,
            n_r,
            info,
        )
        .with_iterations(iters)
        .with_interleaver_seed(3);
        TurboReceiver::new(cfg).unwrap()
    }

    fn bits(n: usize, seed: u64) -> Vec<u8> {
        use rand::Rng;
        let mut rng = crate::rng::stream(seed, 0, crate::rng::Purpose::Bits);
        (0..n).map(|_| rng.random_range(0..2u8)).collect()
    }

    #[test]
    fn spatial_mux_examples() {
        let s: Vec<_> = (1..=4).map(|i| cplx::<f64>(i as f64, 0.0)).collect();
        let one = spatial_mux(&s, 1).unwrap();
        assert_eq!(one.shape(), (1, 4));
        assert_eq!(spatial_demux(&one), s);
        let two = spatial_mux(&s, 2).unwrap();
        assert_eq!(two.column(0).as_slice(), &s[0..2]);
        assert_eq!(two.column(1).as_slice(), &s[2..4]);
        assert_eq!(spatial_demux(&two), s);
        assert!(spatial_mux(&s, 3).is_err());
    }

    #[test]
    fn information_content_examples() {
        assert_eq!(information_content(&[0, 1, 0], &[0.0f64; 3]), 0.0);
        let i = information_content(&[0, 1], &[800.0f64, -800.0]);
        assert!((i - 1.0).abs() < 1e-12);
        let i = information_content(&[0], &[3f64.ln()]);
        assert!((i - (1.0 - (4.0f64 / 3.0).log2())).abs() < 1e-12);
        assert!((i - 0.585).abs() < 1e-3);
        let i = information_content(&[0], &[-800.0f64]);
        assert!(i < -1.0);
    }

    #[test]
    fn frame_padding() {
        let rx = receiver(16, 2, 2, 10, 1);
        // 24 coded bits, 8 bits per symbol vector
        assert_eq!(rx.frame.coded_len, 24);
        assert_eq!(rx.frame.pad_len, 0);
        assert_eq!(rx.frame.blocklen, 3);
        let rx = receiver(64, 1, 1, 10, 1);
        assert_eq!(rx.frame.pad_len, 0);
        let rx = receiver(64, 2, 1, 11, 1);
        assert_eq!(rx.frame.pad_len, 10);
        assert_eq!(rx.frame.blocklen, 3);
        let sent = rx.transmit(&bits(11, 1)).unwrap();
        assert_eq!(sent.channel_bits.len(), 36);
        assert!(sent.channel_bits[26..].iter().all(|&b| b == 0));
    }

    #[test]
    fn noiseless_awgn_is_error_free() {
        for order in [2, 4, 16, 64] {
            let rx = receiver(order, 1, 1, 200, 1);
            let info = bits(200, order as u64);
            let sent = rx.transmit(&info).unwrap();
            let ch = ChannelRealization::siso(&[1.0]).unwrap();
            let y = ch.convolve(&sent.symbols).unwrap();
            let trace = rx.decode(&y, &ch, 1e-6, Some(&info)).unwrap();
            assert_eq!(trace.iterations[0].info_errors, Some(0), "M={order}");
            assert_eq!(trace.final_decisions(), info.as_slice());
        }
    }

    #[test]
    fn single_precision_loop() {
        let cfg = TurboConfig::new(
            Alphabet::<f32>::new(4).unwrap(),
            CodeSpec::conv_7_5(),
            2,
            2,
            128,
        )
        .with_iterations(2);
        let rx = TurboReceiver::new(cfg).unwrap();
        let info = bits(128, 12);
        let sent = rx.transmit(&info).unwrap();
        let ch = ChannelRealization::<f32>::generate_rayleigh(2, 2, 3, 8);
        let y = ch
            .transmit(
                &sent.symbols,
                0.01,
                &mut crate::rng::stream(3, 0, crate::rng::Purpose::Noise),
            )
            .unwrap();
        let trace = rx.decode(&y, &ch, 0.01, Some(&info)).unwrap();
        assert_eq!(trace.iterations[1].info_errors, Some(0));
    }

    #[test]
    fn marker_bits_survive_the_loop() {
        let rx = receiver(4, 2, 2, 64, 1);
        let info = bits(64, 9);
        let sent = rx.transmit(&info).unwrap();
        let ch = ChannelRealization::generate_rayleigh(2, 2, 3, 5);
        let y = ch.convolve(&sent.symbols).unwrap();
        let ss = StateSpace::new(&ch, 1e-6, rx.frame.blocklen).unwrap();
        let eq = soft_equalize(
            &ss,
            &y,
            &vec![0.0; sent.channel_bits.len()],
            &rx.cfg.alphabet,
            1e-5,
        )
        .unwrap();
        let dec = rx.to_decoder(&eq.llrs).unwrap();
        for (l, &c) in dec.iter().zip(&sent.coded_bits) {
            assert_eq!(*l < 0.0, c == 1);
        }
    }

    #[test]
    fn mfb_on_awgn_equals_plain_demap_decode() {
        let rx = receiver(16, 1, 1, 100, 1);
        let info = bits(100, 4);
        let sent = rx.transmit(&info).unwrap();
        let ch = ChannelRealization::siso(&[1.0]).unwrap();
        let n0 = 0.2;
        let y = ch
            .transmit(
                &sent.symbols,
                n0,
                &mut crate::rng::stream(1, 0, crate::rng::Purpose::Noise),
            )
            .unwrap();
        let mfb = rx.decode_mfb(&y, &ch, n0, &sent).unwrap();
        let llrs: Vec<f64> = y
            .iter()
            .flat_map(|&z| rx.cfg.alphabet.awgn_demapper_llrs(z, n0).unwrap())
            .collect();
        let direct = app_decode(&rx.to_decoder(&llrs).unwrap(), &rx.cfg.code).unwrap();
        assert_eq!(mfb.decisions, direct.decisions);
    }

    #[test]
    fn rejects_mismatched_channel() {
        let rx = receiver(2, 2, 2, 16, 1);
        let ch = ChannelRealization::siso(&[1.0]).unwrap();
        let y = DMatrix::zeros(1, rx.frame.blocklen);
        assert!(rx.decode(&y, &ch, 1.0, None).is_err());
        assert!(TurboReceiver::new(
            TurboConfig::new(
                Alphabet::<f64>::new(2).unwrap(),
                CodeSpec::conv_7_5(),
                1,
                1,
                8
            )
            .with_iterations(0)
        )
        .is_err());
    }
}
