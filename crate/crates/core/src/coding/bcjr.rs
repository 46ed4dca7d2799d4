//! Exact log-MAP (BCJR) decoding over the code trellis.

use super::CodeSpec;
use crate::error::{Error, Result};
use crate::scalar::{log_add, Real};

/// Input LLRs are clamped to this magnitude before use.
pub const LLR_CLAMP: f64 = 300.0;

#[derive(Debug, Clone, PartialEq)]
pub struct AppOutput<T> {
    /// Extrinsic code-bit LLRs: posterior minus (clamped) input.
    pub extrinsic: Vec<T>,
    /// Code-bit posterior LLRs.
    pub code_posterior: Vec<T>,
    /// Info-bit posterior LLRs, tail excluded.
    pub info_llrs: Vec<T>,
    pub decisions: Vec<u8>,
}

struct Trellis {
    next: Vec<[usize; 2]>,
    out: Vec<[[u8; 2]; 2]>,
}

impl Trellis {
    fn new(spec: &CodeSpec) -> Self {
        let n = spec.states();
        let mut next = vec![[0; 2]; n];
        let mut out = vec![[[0; 2]; 2]; n];
        for s in 0..n {
            for u in 0..2u8 {
                let (ns, c) = spec.step(s, u);
                next[s][u as usize] = ns;
                out[s][u as usize] = c;
            }
        }
        Self { next, out }
    }
}

#[inline]
fn half_metric<T: Real>(bit: u8, llr: T) -> T {
    let h = llr * T::lit(0.5);
    if bit == 0 {
        h
    } else {
        -h
    }
}

/// Decodes one block of code-bit LLRs (two per trellis step, tail included).
pub fn app_decode<T: Real>(code_llrs: &[T], spec: &CodeSpec) -> Result<AppOutput<T>> {
    if !code_llrs.len().is_multiple_of(2) || code_llrs.len() < 2 * (spec.tail_len() + 1) {
        return Err(Error::LengthMismatch {
            expected: 2 * (code_llrs.len() / 2).max(spec.tail_len() + 1),
            actual: code_llrs.len(),
        });
    }
    let steps = code_llrs.len() / 2;
    let info_len = steps - spec.tail_len();
    let clamp = T::lit(LLR_CLAMP);
    let llr: Vec<T> = code_llrs
        .iter()
        .map(|&l| l.max(-clamp).min(clamp))
        .collect();
    let trellis = Trellis::new(spec);
    let ns = spec.states();
    let ninf = -T::infinity();
    let allowed = |t: usize, u: usize| t < info_len || u == 0;

    // alpha[t] is the state metric before step t
    let mut alpha = vec![vec![ninf; ns]; steps + 1];
    alpha[0][0] = T::zero();
    for t in 0..steps {
        let (l0, l1) = (llr[2 * t], llr[2 * t + 1]);
        let mut next = vec![ninf; ns];
        for (s, &a) in alpha[t].iter().enumerate() {
            if a == ninf {
                continue;
            }
            for u in 0..2 {
                if !allowed(t, u) {
                    continue;
                }
                let c = trellis.out[s][u];
                let g = half_metric(c[0], l0) + half_metric(c[1], l1);
                let d = trellis.next[s][u];
                next[d] = log_add(next[d], a + g);
            }
        }
        let norm = next.iter().copied().fold(ninf, |m, v| m.max(v));
        for v in &mut next {
            *v -= norm;
        }
        alpha[t + 1] = next;
    }

    let mut beta = vec![vec![ninf; ns]; steps + 1];
    if spec.terminated() {
        beta[steps][0] = T::zero();
    } else {
        beta[steps].iter_mut().for_each(|v| *v = T::zero());
    }
    for t in (0..steps).rev() {
        let (l0, l1) = (llr[2 * t], llr[2 * t + 1]);
        let mut cur = vec![ninf; ns];
        for (s, slot) in cur.iter_mut().enumerate() {
            for u in 0..2 {
                if !allowed(t, u) {
                    continue;
                }
                let b = beta[t + 1][trellis.next[s][u]];
                if b == ninf {
                    continue;
                }
                let c = trellis.out[s][u];
                let g = half_metric(c[0], l0) + half_metric(c[1], l1);
                *slot = log_add(*slot, g + b);
            }
        }
        let norm = cur.iter().copied().fold(ninf, |m, v| m.max(v));
        for v in &mut cur {
            *v -= norm;
        }
        beta[t] = cur;
    }

    let mut extrinsic = vec![T::zero(); 2 * steps];
    let mut code_posterior = vec![T::zero(); 2 * steps];
    let mut info_llrs = Vec::with_capacity(info_len);
    for t in 0..steps {
        let (l0, l1) = (llr[2 * t], llr[2 * t + 1]);
        // [bit value] accumulators
        let mut info = [ninf; 2];
        let mut post = [[ninf; 2]; 2];
        let mut ext = [[ninf; 2]; 2];
        for s in 0..ns {
            let a = alpha[t][s];
            if a == ninf {
                continue;
            }
            for u in 0..2 {
                if !allowed(t, u) {
                    continue;
                }
                let b = beta[t + 1][trellis.next[s][u]];
                if b == ninf {
                    continue;
                }
                let c = trellis.out[s][u];
                let g0 = half_metric(c[0], l0);
                let g1 = half_metric(c[1], l1);
                let full = a + b + g0 + g1;
                info[u] = log_add(info[u], full);
                post[0][c[0] as usize] = log_add(post[0][c[0] as usize], full);
                post[1][c[1] as usize] = log_add(post[1][c[1] as usize], full);
                ext[0][c[0] as usize] = log_add(ext[0][c[0] as usize], a + b + g1);
                ext[1][c[1] as usize] = log_add(ext[1][c[1] as usize], a + b + g0);
            }
        }
        for i in 0..2 {
            code_posterior[2 * t + i] = post[i][0] - post[i][1];
            // the own-bit metric is +-L/2, a constant offset of L between the two sums
            extrinsic[2 * t + i] = ext[i][0] - ext[i][1];
        }
        if t < info_len {
            info_llrs.push(info[0] - info[1]);
        }
    }
    let decisions = info_llrs.iter().map(|&l| u8::from(l < T::zero())).collect();
    Ok(AppOutput {
        extrinsic,
        code_posterior,
        info_llrs,
        decisions,
    })
}
