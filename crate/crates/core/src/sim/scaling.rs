use std::time::Instant;

use crate::channel::ChannelRealization;
use crate::constellation::SymbolMoments;
use crate::error::Result;
use crate::gmp::{equalize, StateSpace};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub factor: usize,
    pub blocklen: usize,
    /// Best of the repetitions.
    pub seconds: f64,
    /// Relative to the first row.
    pub ratio: f64,
}

/// Times one equalizer pass (forward, backward, extraction) on a 2x2, 5-tap
/// channel at `N = base_n * factor`.
pub fn run_scaling_probe(base_n: usize, factors: &[usize], reps: usize) -> Result<Vec<ScalingRow>> {
    let ch = ChannelRealization::<f64>::generate_rayleigh(2, 2, 5, 11);
    let n0 = 0.1;
    let mut rows: Vec<ScalingRow> = Vec::with_capacity(factors.len());
    for &factor in factors {
        let n = base_n * factor;
        let ss = StateSpace::new(&ch, n0, n)?;
        let y = ch.transmit(
            &nalgebra::DMatrix::zeros(2, n),
            n0,
            &mut stream(11, n as u64, Purpose::Noise),
        )?;
        let priors = vec![SymbolMoments::uninformed(); 2 * n];
        let mut best = f64::INFINITY;
        for _ in 0..reps.max(1) {
            let t = Instant::now();
            std::hint::black_box(equalize(&ss, &y, &priors)?);
            best = best.min(t.elapsed().as_secs_f64());
        }
        let ratio = rows.first().map_or(1.0, |r| best / r.seconds);
        rows.push(ScalingRow {
            factor,
            blocklen: n,
            seconds: best,
            ratio,
        });
    }
    Ok(rows)
}
