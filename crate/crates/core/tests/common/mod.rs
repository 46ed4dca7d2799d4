//! Shared helpers for the oracle tests.
#![allow(dead_code)]

use mimo_gmp::coding::{encode, CodeSpec};
use mimo_gmp::scalar::log_sum_exp;
pub use mimo_gmp::sim::Instance;

pub fn random_instance(seed: u64, trial: u64) -> Instance {
    Instance::random(seed, trial)
}

/// `max |a - b| / max |b|` over paired complex sequences.
pub fn rel_err_c(a: &[nalgebra::Complex<f64>], b: &[nalgebra::Complex<f64>]) -> f64 {
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

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = b
        .iter()
        .map(|z| z.abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Info bits, codeword, log-probability.
type Word = (Vec<u8>, Vec<u8>, f64);

/// Bit-wise MAP by enumerating every info word: returns (info, code) LLRs.
pub fn exhaustive_map(code_llrs: &[f64], spec: &CodeSpec, k: usize) -> (Vec<f64>, Vec<f64>) {
    let words: Vec<Word> = (0..1u32 << k)
        .map(|w| {
            let info: Vec<u8> = (0..k).map(|i| ((w >> i) & 1) as u8).collect();
            let code = encode(&info, spec);
            // ln P(c) up to a constant, with L = ln P0/P1
            let metric = code
                .iter()
                .zip(code_llrs)
                .map(|(&c, &l)| if c == 0 { l / 2.0 } else { -l / 2.0 })
                .sum();
            (info, code, metric)
        })
        .collect();
    let llr = |bit: &dyn Fn(&Word) -> u8| {
        let zero = log_sum_exp(words.iter().filter(|w| bit(w) == 0).map(|w| w.2));
        let one = log_sum_exp(words.iter().filter(|w| bit(w) == 1).map(|w| w.2));
        zero - one
    };
    let info = (0..k).map(|i| llr(&|w| w.0[i])).collect();
    let code = (0..code_llrs.len()).map(|i| llr(&|w| w.1[i])).collect();
    (info, code)
}
