//! Monte-Carlo harness: BER sweeps, matched-filter-bound baselines, identity
//! batches and runtime scaling probes.
//!
//! Every block draws its bits, channel and unit-variance noise from streams
//! keyed by `(seed, block index)`, so results do not depend on scheduling and
//! all SNR points (and the MFB run) see the same realizations.

mod identity;
mod scaling;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{unit_noise, ChannelRealization};
use crate::coding::CodeSpec;
use crate::constellation::Alphabet;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::turbo::{IterationStats, TurboConfig, TurboReceiver, DEFAULT_PRIOR_VARIANCE_FLOOR};

pub use identity::*;
pub use scaling::{run_scaling_probe, ScalingRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrKind {
    /// Symbol energy per receive antenna over `N0`.
    EsN0,
    /// Energy per information bit over `N0`.
    EbN0,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scenario: String,
    pub n_t: usize,
    pub n_r: usize,
    /// Channel taps `L` for Rayleigh fading.
    pub taps: usize,
    /// Fixed real SISO taps, normalized to unit energy. Overrides fading.
    pub fixed_taps: Option<Vec<f64>>,
    /// Fixed channel in the text format of [`ChannelRealization::to_text`].
    pub channel_file: Option<PathBuf>,
    pub order: usize,
    /// Octal generator pair, e.g. `"7,5"`.
    pub code: String,
    pub terminated: bool,
    pub info_bits: usize,
    pub snr_db: Vec<f64>,
    pub snr_kind: SnrKind,
    pub iterations: usize,
    /// Block budget per SNR point.
    pub blocks: usize,
    /// Stop a point once the last iteration has this many bit errors; 0 disables.
    pub target_errors: usize,
    /// Blocks run between early-stopping checks.
    pub batch: usize,
    pub seed: u64,
    pub prior_variance_floor: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scenario: "default".into(),
            n_t: 2,
            n_r: 2,
            taps: 5,
            fixed_taps: None,
            channel_file: None,
            order: 2,
            code: "7,5".into(),
            terminated: true,
            info_bits: 4096,
            snr_db: vec![0.0, 2.0, 4.0, 6.0],
            snr_kind: SnrKind::EsN0,
            iterations: 5,
            blocks: 500,
            target_errors: 100,
            batch: 16,
            seed: 1,
            prior_variance_floor: DEFAULT_PRIOR_VARIANCE_FLOOR,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(file) = &cfg.channel_file {
            if file.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.channel_file = Some(dir.join(file));
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.scenario.is_empty() || self.scenario.contains([',', '"', '\n', '\r']) {
            return bad("scenario must be non-empty without commas, quotes or newlines");
        }
        if self.snr_db.is_empty() || self.snr_db.iter().any(|s| !s.is_finite()) {
            return bad("SNR grid must be non-empty and finite");
        }
        if self.blocks == 0 || self.batch == 0 || self.iterations == 0 || self.info_bits == 0 {
            return bad("blocks, batch, iterations and info_bits must be at least 1");
        }
        if self.n_t == 0 || self.n_r == 0 || self.taps == 0 {
            return bad("n_t, n_r and taps must be at least 1");
        }
        if !(self.prior_variance_floor >= 0.0 && self.prior_variance_floor < 1.0) {
            return bad("prior_variance_floor must lie in [0, 1)");
        }
        if let Some(t) = &self.fixed_taps {
            if self.n_t != 1 || self.n_r != 1 {
                return bad("fixed_taps describes a SISO channel");
            }
            if t.is_empty() || t.iter().all(|&v| v == 0.0) || t.iter().any(|v| !v.is_finite()) {
                return bad("fixed_taps must be finite and not all zero");
            }
        }
        self.code_spec()?;
        Alphabet::<f64>::new(self.order)?;
        Ok(())
    }

    pub fn code_spec(&self) -> Result<CodeSpec> {
        let (a, b) = self.code.split_once(',').ok_or_else(|| {
            Error::InvalidConfig(format!("code {:?} is not an octal pair", self.code))
        })?;
        CodeSpec::from_octal(a.trim(), b.trim(), self.terminated)
    }

    pub fn receiver(&self) -> Result<TurboReceiver<f64>> {
        self.receiver_with_iterations(self.iterations)
    }

    fn receiver_with_iterations(&self, iterations: usize) -> Result<TurboReceiver<f64>> {
        let interleaver_seed = stream(self.seed, 0, Purpose::Interleaver).random::<u64>();
        let mut cfg = TurboConfig::new(
            Alphabet::new(self.order)?,
            self.code_spec()?,
            self.n_t,
            self.n_r,
            self.info_bits,
        )
        .with_iterations(iterations)
        .with_interleaver_seed(interleaver_seed);
        cfg.prior_variance_floor = self.prior_variance_floor;
        TurboReceiver::new(cfg)
    }

    fn fixed_channel(&self) -> Result<Option<ChannelRealization<f64>>> {
        if let Some(taps) = &self.fixed_taps {
            let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
            let taps: Vec<f64> = taps.iter().map(|t| t / norm).collect();
            return ChannelRealization::siso(&taps).map(Some);
        }
        if let Some(path) = &self.channel_file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
            let ch = ChannelRealization::from_text(&text)?;
            if ch.n_t() != self.n_t || ch.n_r() != self.n_r {
                return Err(Error::InvalidConfig(
                    "channel_file dimensions differ from n_t, n_r".into(),
                ));
            }
            return Ok(Some(ch));
        }
        Ok(None)
    }

    /// Average received symbol energy per receive antenna.
    fn receive_energy(&self, fixed: Option<&ChannelRealization<f64>>) -> f64 {
        match fixed {
            Some(ch) => {
                ch.taps()
                    .iter()
                    .flat_map(|t| t.iter())
                    .map(|h| h.norm_sqr())
                    .sum::<f64>()
                    / ch.n_r() as f64
            }
            None => self.n_t as f64,
        }
    }
}

/// `Es/N0 - Eb/N0` in dB for the frame of `rx`.
pub fn es_minus_eb_db(rx: &TurboReceiver<f64>) -> f64 {
    let f = &rx.frame;
    10.0 * (f.rate() * f.bits_per_symbol as f64 * f.n_t as f64).log10()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BerRecord {
    pub scenario: String,
    pub snr_db: f64,
    pub iteration: usize,
    pub blocks: usize,
    pub bits: u64,
    pub errors: u64,
    pub ber: f64,
    pub seconds: f64,
}

/// Per-block outcome used by the sweeps: errors per iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockOutcome {
    pub errors: Vec<usize>,
    pub info_content: Vec<f64>,
}

impl BlockOutcome {
    fn from_stats(stats: &[IterationStats]) -> Self {
        Self {
            errors: stats.iter().map(|s| s.info_errors.unwrap_or(0)).collect(),
            info_content: stats
                .iter()
                .map(|s| s.info_content.unwrap_or(0.0))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Receiver {
    Turbo,
    Mfb,
}

/// Prepared simulation: receiver, fixed channel and noise scaling.
pub struct Simulation {
    pub cfg: SimConfig,
    pub rx: TurboReceiver<f64>,
    fixed: Option<ChannelRealization<f64>>,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let rx = cfg.receiver()?;
        let fixed = cfg.fixed_channel()?;
        Ok(Self { cfg, rx, fixed })
    }

    /// `N0` for a grid point.
    pub fn n0(&self, snr_db: f64) -> f64 {
        let es_db = match self.cfg.snr_kind {
            SnrKind::EsN0 => snr_db,
            SnrKind::EbN0 => snr_db + es_minus_eb_db(&self.rx),
        };
        self.cfg.receive_energy(self.fixed.as_ref()) / 10f64.powf(es_db / 10.0)
    }

    fn channel(&self, block: u64) -> ChannelRealization<f64> {
        match &self.fixed {
            Some(ch) => ch.clone(),
            None => ChannelRealization::rayleigh(
                self.cfg.n_t,
                self.cfg.n_r,
                self.cfg.taps,
                &mut stream(self.cfg.seed, block, Purpose::Channel),
            ),
        }
    }

    fn run_one(&self, block: u64, n0: f64, which: Receiver) -> Result<BlockOutcome> {
        let seed = self.cfg.seed;
        let mut bit_rng = stream(seed, block, Purpose::Bits);
        let info: Vec<u8> = (0..self.rx.frame.info_len)
            .map(|_| bit_rng.random_range(0..2u8))
            .collect();
        let sent = self.rx.transmit(&info)?;
        let ch = self.channel(block);
        let noise = unit_noise(
            &mut stream(seed, block, Purpose::Noise),
            ch.n_r(),
            self.rx.frame.blocklen + ch.memory(),
        );
        let y = ch.transmit_with_noise(&sent.symbols, n0, &noise)?;
        match which {
            Receiver::Turbo => Ok(BlockOutcome::from_stats(
                &self.rx.decode(&y, &ch, n0, Some(&info))?.iterations,
            )),
            Receiver::Mfb => Ok(BlockOutcome::from_stats(&[self
                .rx
                .decode_mfb(&y, &ch, n0, &sent)?])),
        }
    }

    /// Runs a turbo receiver decoding of block `block` at `snr_db`.
    pub fn run_block(&self, block: u64, snr_db: f64) -> Result<BlockOutcome> {
        self.run_one(block, self.n0(snr_db), Receiver::Turbo)
    }

    pub fn run_block_mfb(&self, block: u64, snr_db: f64) -> Result<BlockOutcome> {
        self.run_one(block, self.n0(snr_db), Receiver::Mfb)
    }

    /// All blocks of one SNR point, in block order, honouring early stopping.
    pub fn run_point(&self, snr_db: f64, mfb: bool) -> Result<Vec<BlockOutcome>> {
        let which = if mfb { Receiver::Mfb } else { Receiver::Turbo };
        let n0 = self.n0(snr_db);
        let mut out: Vec<BlockOutcome> = Vec::new();
        let mut last_errors = 0usize;
        while out.len() < self.cfg.blocks {
            let start = out.len() as u64;
            let end = (out.len() + self.cfg.batch).min(self.cfg.blocks) as u64;
            let batch: Vec<BlockOutcome> = (start..end)
                .into_par_iter()
                .map(|b| self.run_one(b, n0, which))
                .collect::<Result<_>>()?;
            last_errors += batch
                .iter()
                .map(|o| *o.errors.last().unwrap_or(&0))
                .sum::<usize>();
            out.extend(batch);
            if self.cfg.target_errors > 0 && last_errors >= self.cfg.target_errors {
                break;
            }
        }
        Ok(out)
    }

    fn sweep(&self, mfb: bool) -> Result<Vec<BerRecord>> {
        let scenario = if mfb {
            format!("{}/mfb", self.cfg.scenario)
        } else {
            self.cfg.scenario.clone()
        };
        let bits_per_block = self.rx.frame.info_len as u64;
        let mut records = Vec::new();
        for &snr in &self.cfg.snr_db {
            let t = Instant::now();
            let blocks = self.run_point(snr, mfb)?;
            let seconds = t.elapsed().as_secs_f64();
            let iterations = blocks.first().map_or(0, |b| b.errors.len());
            for it in 0..iterations {
                let errors: u64 = blocks.iter().map(|b| b.errors[it] as u64).sum();
                let bits = bits_per_block * blocks.len() as u64;
                records.push(BerRecord {
                    scenario: scenario.clone(),
                    snr_db: snr,
                    iteration: it + 1,
                    blocks: blocks.len(),
                    bits,
                    errors,
                    ber: errors as f64 / bits as f64,
                    seconds,
                });
            }
        }
        Ok(records)
    }
}

/// Turbo BER per SNR point and iteration.
pub fn run_ber_sweep(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    Simulation::new(cfg.clone())?.sweep(false)
}

/// Matched-filter-bound BER per SNR point on the same realizations.
pub fn run_mfb(cfg: &SimConfig) -> Result<Vec<BerRecord>> {
    Simulation::new(cfg.clone())?.sweep(true)
}

pub const CSV_HEADER: &str = "scenario,snr_db,iteration,blocks,bits,errors,ber,seconds";

/// Writes records as CSV preceded by `#` comment lines. `seconds` is written
/// as 0 unless `timing` is set, keeping repeated runs byte-identical.
pub fn write_csv<W: Write>(
    mut w: W,
    comments: &[String],
    records: &[BerRecord],
    timing: bool,
) -> std::io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        let seconds = if timing { r.seconds } else { 0.0 };
        writeln!(
            w,
            "{},{},{},{},{},{},{:.6e},{:.3}",
            r.scenario, r.snr_db, r.iteration, r.blocks, r.bits, r.errors, r.ber, seconds
        )?;
    }
    Ok(())
}

/// Comment lines describing the SNR convention of a configuration.
pub fn csv_comments(cfg: &SimConfig) -> Result<Vec<String>> {
    let rx = cfg.receiver()?;
    let kind = match cfg.snr_kind {
        SnrKind::EsN0 => "es_n0 per receive antenna",
        SnrKind::EbN0 => "eb_n0",
    };
    Ok(vec![
        format!(
            "snr_db is {kind}; es_n0_db = eb_n0_db + {:.6}",
            es_minus_eb_db(&rx)
        ),
        format!("seed={} rate={:.6}", cfg.seed, rx.frame.rate()),
    ])
}
