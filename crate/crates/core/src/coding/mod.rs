//! Rate-1/2 feedforward convolutional code, random interleaver, and the
//! log-MAP APP decoder.

mod bcjr;
mod interleaver;

pub use bcjr::{app_decode, AppOutput, LLR_CLAMP};
pub use interleaver::Interleaver;

use crate::error::{Error, Result};

/// Feedforward rate-1/2 code given by two generator polynomials.
///
/// Generators use the usual octal convention: the most significant tap
/// multiplies the current input bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CodeSpec {
    generators: [u32; 2],
    constraint_length: usize,
    terminated: bool,
}

impl CodeSpec {
    pub fn new(generators: [u32; 2], constraint_length: usize, terminated: bool) -> Result<Self> {
        if generators.contains(&0) {
            return Err(Error::InvalidConfig(
                "generator polynomials must be nonzero".into(),
            ));
        }
        if !(2..=16).contains(&constraint_length) {
            return Err(Error::InvalidConfig(format!(
                "constraint length {constraint_length} out of range"
            )));
        }
        if generators.iter().any(|&g| g >> constraint_length != 0) {
            return Err(Error::InvalidConfig(
                "generator wider than constraint length".into(),
            ));
        }
        Ok(Self {
            generators,
            constraint_length,
            terminated,
        })
    }

    /// Parses octal generator strings such as `"133"`, taking the constraint
    /// length from the widest polynomial.
    pub fn from_octal(g0: &str, g1: &str, terminated: bool) -> Result<Self> {
        let parse = |s: &str| {
            u32::from_str_radix(s, 8)
                .map_err(|_| Error::InvalidConfig(format!("bad octal generator `{s}`")))
        };
        let gens = [parse(g0)?, parse(g1)?];
        let k = gens
            .iter()
            .map(|g| 32 - g.leading_zeros() as usize)
            .max()
            .unwrap_or(0);
        Self::new(gens, k, terminated)
    }

    /// `(7, 5)_8`, constraint length 3.
    pub fn conv_7_5() -> Self {
        Self::new([0o7, 0o5], 3, true).unwrap()
    }

    /// `(133, 171)_8`, constraint length 7.
    pub fn conv_133_171() -> Self {
        Self::new([0o133, 0o171], 7, true).unwrap()
    }

    pub fn generators(&self) -> [u32; 2] {
        self.generators
    }

    pub fn constraint_length(&self) -> usize {
        self.constraint_length
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn states(&self) -> usize {
        1 << (self.constraint_length - 1)
    }

    pub fn tail_len(&self) -> usize {
        if self.terminated {
            self.constraint_length - 1
        } else {
            0
        }
    }

    pub fn coded_len(&self, info_len: usize) -> usize {
        2 * (info_len + self.tail_len())
    }

    /// Info bits per transmitted code bit, tail included.
    pub fn effective_rate(&self, info_len: usize) -> f64 {
        info_len as f64 / self.coded_len(info_len) as f64
    }

    /// `(next_state, [c0, c1])` for `state` and input `bit`.
    #[inline]
    pub(crate) fn step(&self, state: usize, bit: u8) -> (usize, [u8; 2]) {
        let reg = ((bit as usize & 1) << (self.constraint_length - 1)) | state;
        let out = self
            .generators
            .map(|g| ((g as usize & reg).count_ones() & 1) as u8);
        (reg >> 1, out)
    }
}

/// Two output bits per input bit, followed by the zero tail when terminated.
pub fn encode(info_bits: &[u8], spec: &CodeSpec) -> Vec<u8> {
    let mut state = 0;
    let mut out = Vec::with_capacity(spec.coded_len(info_bits.len()));
    for &b in info_bits
        .iter()
        .chain(std::iter::repeat_n(&0u8, spec.tail_len()))
    {
        let (next, c) = spec.step(state, b);
        out.extend_from_slice(&c);
        state = next;
    }
    out
}
