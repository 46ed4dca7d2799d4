use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mimo_gmp::sim::{self, SimConfig};

#[derive(Parser)]
#[command(
    version,
    about = "Factor-graph LMMSE turbo equalization for MIMO ISI channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turbo receiver BER sweep.
    Ber(SweepArgs),
    /// Matched-filter-bound BER sweep on the same realizations.
    Mfb(SweepArgs),
    /// Run the oracle identity suite; exits nonzero on any failure.
    Verify(VerifyArgs),
    /// Equalizer wall time against block length.
    Scale(ScaleArgs),
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Block budget per SNR point.
    #[arg(long)]
    blocks: Option<usize>,
    /// Turbo iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Record wall time in the `seconds` column.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Random instances per identity.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
}

#[derive(Args)]
struct ScaleArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 256)]
    base_n: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4])]
    factors: Vec<usize>,
    /// Repetitions per length; the fastest is reported.
    #[arg(long, default_value_t = 5)]
    reps: usize,
}

fn output(path: &Option<PathBuf>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(common: &Common) -> Result<SimConfig, Box<dyn std::error::Error>> {
    let mut cfg = match &common.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn sweep(args: SweepArgs, mfb: bool) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let mut cfg = load(&args.common)?;
    if let Some(b) = args.blocks {
        cfg.blocks = b;
    }
    if let Some(i) = args.iters {
        cfg.iterations = i;
    }
    cfg.validate()?;
    let records = if mfb {
        sim::run_mfb(&cfg)?
    } else {
        sim::run_ber_sweep(&cfg)?
    };
    let mut out = output(&args.common.out)?;
    sim::write_csv(&mut out, &sim::csv_comments(&cfg)?, &records, args.timing)?;
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn verify(args: VerifyArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let seed = load(&args.common)?.seed;
    let report = sim::run_identity_suite(seed, args.trials);
    let mut out = output(&args.common.out)?;
    write!(out, "{report}")?;
    out.flush()?;
    Ok(if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn scale(args: ScaleArgs) -> Result<ExitCode, Box<dyn std::error::Error>> {
    let rows = sim::run_scaling_probe(args.base_n, &args.factors, args.reps)?;
    let mut out = output(&args.common.out)?;
    writeln!(out, "factor,blocklen,seconds,ratio")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.3}",
            r.factor, r.blocklen, r.seconds, r.ratio
        )?;
    }
    out.flush()?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ber(a) => sweep(a, false),
        Command::Mfb(a) => sweep(a, true),
        Command::Verify(a) => verify(a),
        Command::Scale(a) => scale(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
