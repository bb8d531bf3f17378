use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use async_ofdm::cli::{self, Command, HypothesisSettings, Overrides, RunConfig, RunOptions, Sweep};
use async_ofdm::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "async-ofdm", version, about = "Link and network statistics for asynchronous OFDM on Poisson fields")]
struct Args {
    #[command(subcommand)]
    command: Cmd,

    /// TOML run configuration; omitted keys take the reference defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output CSV path (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Threshold sweep in dB as LO:HI:STEP.
    #[arg(long, global = true, allow_hyphen_values = true)]
    sweep: Option<String>,

    /// Comma-separated timing spreads as fractions of N.
    #[arg(long = "sigma-over-n", global = true, value_delimiter = ',')]
    sigma_over_n: Option<Vec<f64>>,

    /// Receiver timing hypotheses as N1,N2,DELTA.
    #[arg(long, global = true)]
    hypotheses: Option<String>,

    #[arg(long, global = true)]
    trials: Option<usize>,

    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Timing offset in samples for link-profile.
    #[arg(long, global = true, allow_hyphen_values = true)]
    offset: Option<i64>,

    /// Add Monte Carlo estimates next to analytic values.
    #[arg(long, global = true)]
    mc: bool,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Per-subcarrier useful and total received power at one offset.
    LinkProfile,
    /// Mean number of decodable transmitters per threshold and timing spread.
    MeanDecodable,
    /// Probability that the nearest transmitter is decodable.
    Nearest,
    /// Truncated-Poisson upper bound on the decodable-count distribution.
    Dist,
    /// Throughput per threshold with the maximizing threshold.
    Throughput,
    /// Mean decodable count with multiple receiver timing hypotheses.
    Hypotheses,
    /// Raw per-trial Monte Carlo output.
    Simulate,
    /// Analytic versus Monte Carlo cross-checks; fails on any mismatch.
    Validate,
}

impl From<&Cmd> for Command {
    fn from(c: &Cmd) -> Self {
        match c {
            Cmd::LinkProfile => Command::LinkProfile,
            Cmd::MeanDecodable => Command::MeanDecodable,
            Cmd::Nearest => Command::Nearest,
            Cmd::Dist => Command::Dist,
            Cmd::Throughput => Command::Throughput,
            Cmd::Hypotheses => Command::Hypotheses,
            Cmd::Simulate => Command::Simulate,
            Cmd::Validate => Command::Validate,
        }
    }
}

fn overrides(args: &Args) -> Result<Overrides> {
    Ok(Overrides {
        seed: args.seed,
        sweep: args.sweep.as_deref().map(Sweep::parse).transpose()?,
        sigmas_over_n: args.sigma_over_n.clone(),
        hypotheses: args.hypotheses.as_deref().map(HypothesisSettings::parse).transpose()?,
        trials: args.trials,
        workers: args.workers,
        offset: args.offset,
    })
}

fn execute(args: &Args) -> Result<bool> {
    let base = match &args.config {
        Some(path) => cli::load_config(path)?,
        None => RunConfig::default(),
    };
    let config = base.apply(&overrides(args)?)?;
    let options = RunOptions { monte_carlo: args.mc };
    let command = Command::from(&args.command);
    let report = match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            let mut w = BufWriter::new(file);
            let r = cli::run(command, &config, options, &mut w)?;
            w.flush().map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            r
        }
        None => cli::run(command, &config, options, io::stdout().lock())?,
    };
    if let Some(s) = &report.summary {
        eprintln!("{s}");
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
