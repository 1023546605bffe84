//! `lora-rake`: Monte Carlo experiments on LoRa receivers over multipath
//! channels. Every subcommand writes CSV to `--out` (or standard output) and a
//! one-line run summary to standard error.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use lora_rake::sim::{self, ChannelSpec, Csir, CsvRow, DetectorKind, EbN0Axis, SimConfig};
use lora_rake::{Error, Symbol};
use sha2::{Digest, Sha256};

#[derive(Parser)]
#[command(name = "lora-rake", version, about = "LoRa multipath receiver simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// SER of the selected detectors over an Eb/N0 grid.
    Ser(SimArgs),
    /// Parasitic-peak indicators for every symbol of a channel.
    Delta(SimArgs),
    /// Operation counts of MF and RAKE receivers.
    Complexity(ComplexityArgs),
    /// RAKE SER versus pilot count, path threshold and forced delay sets.
    EstimateStudy(SimArgs),
    /// cand-RAKE SER versus the number of candidates.
    CandSweep(CandSweepArgs),
    /// Noise-free spectrum and detector outputs for one symbol.
    Demo(DemoArgs),
    /// Median wall-clock time per symbol of each detector.
    Timing(TimingArgs),
}

/// Experiment settings. Flags override the config file, which overrides the
/// built-in defaults.
#[derive(Args, Clone)]
struct SimArgs {
    /// TOML file with `SimConfig` fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sf: Option<u32>,
    /// `c1`, `c2`, `identity` or a channel file.
    #[arg(long)]
    channel: Option<String>,
    /// Comma-separated, e.g. `rake,coh,noncoh`.
    #[arg(long)]
    detectors: Option<String>,
    /// `start:step:stop` or a comma-separated list, in dB.
    #[arg(long, allow_hyphen_values = true)]
    ebn0: Option<String>,
    /// Data symbols per frame.
    #[arg(long)]
    nd: Option<usize>,
    /// Frames per Eb/N0 point.
    #[arg(long)]
    trials: Option<u64>,
    /// Pilot symbols per frame.
    #[arg(long)]
    np: Option<usize>,
    #[arg(long)]
    rho_p: Option<f64>,
    #[arg(long)]
    rho_c: Option<f64>,
    /// Fixed candidate count (overrides `--rho-c`).
    #[arg(long)]
    nc: Option<usize>,
    #[arg(long)]
    rho_tdel: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    /// `perfect`, `estimated`, `known-k` or a delay list like `0,2,3,5`.
    #[arg(long)]
    csir: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ComplexityArgs {
    /// Spreading factors, `start:step:stop` or a list.
    #[arg(long, default_value = "7:1:12")]
    sf_list: String,
    /// Number of paths.
    #[arg(long, default_value_t = 3)]
    k: u64,
    /// Candidate counts.
    #[arg(long, default_value = "4,8,16")]
    nc_list: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CandSweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value = "7,10")]
    sf_list: String,
    /// Normalized candidate counts `N_c / M`.
    #[arg(long)]
    norms: Option<String>,
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long, default_value_t = 64)]
    symbol: usize,
}

#[derive(Args)]
struct TimingArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Received symbols per timed pass.
    #[arg(long, default_value_t = 200)]
    symbols: usize,
    /// Timed passes; the median is reported.
    #[arg(long, default_value_t = 5)]
    runs: usize,
}

impl SimArgs {
    fn resolve(&self) -> Result<SimConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => SimConfig::load(path).map_err(|e| match e {
                Error::Io(io) => Error::Parse {
                    what: path.display().to_string(),
                    message: io.to_string(),
                },
                other => other,
            })?,
            None => SimConfig::default(),
        };
        if let Some(v) = self.sf {
            cfg.sf = v;
        }
        if let Some(v) = &self.channel {
            cfg.channel = v.parse::<ChannelSpec>()?;
        }
        if let Some(v) = &self.detectors {
            cfg.detectors = DetectorKind::parse_list(v)?;
        }
        if let Some(v) = &self.ebn0 {
            cfg.ebn0 = v.parse::<EbN0Axis>()?;
        }
        if let Some(v) = self.nd {
            cfg.n_d = v;
        }
        if let Some(v) = self.trials {
            cfg.n_trials = v;
        }
        if let Some(v) = self.np {
            cfg.n_p = v;
        }
        if let Some(v) = self.rho_p {
            cfg.rho_p = v;
        }
        if let Some(v) = self.rho_c {
            cfg.rho_c = v;
            cfg.n_c = None;
        }
        if let Some(v) = self.nc {
            cfg.n_c = Some(v);
        }
        if let Some(v) = self.rho_tdel {
            cfg.rho_tdel = v;
        }
        if let Some(v) = self.k_max {
            cfg.k_max = v;
        }
        if let Some(v) = &self.csir {
            cfg.csir = v.parse::<Csir>()?;
        }
        if let Some(v) = self.seed {
            cfg.master_seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(String),
    Internal(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig { .. }
            | Error::Parse { .. }
            | Error::InvalidChannel(_)
            | Error::InvalidSpreadingFactor(_)
            | Error::DelayTooLarge { .. }
            | Error::SymbolOutOfRange { .. } => Failure::Config(e.to_string()),
            other => Failure::Internal(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

struct Summary {
    seed: Option<u64>,
    hash_input: String,
    rows: usize,
}

fn config_hash(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn emit<R: CsvRow>(out: Option<&PathBuf>, rows: &[R]) -> anyhow::Result<()> {
    write_text(out, &sim::to_csv_string(rows))
}

fn write_text(out: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn set_threads(n: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = n {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    Ok(())
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>, Error> {
    let values: Vec<f64> = EbN0Axis::Range(s.to_string())
        .values()
        .map_err(|e| Error::InvalidConfig {
            field: what.into(),
            message: e,
        })?;
    values
        .iter()
        .map(|v| {
            v.to_string().parse::<T>().map_err(|_| Error::InvalidConfig {
                field: what.into(),
                message: format!("{v} is not a valid value"),
            })
        })
        .collect()
}

fn run(command: Command) -> Result<Summary, Failure> {
    match command {
        Command::Ser(args) => {
            let cfg = args.resolve()?;
            set_threads(args.threads)?;
            let rows = sim::run_ser_sweep(&cfg)?;
            emit(args.out.as_ref(), &rows)?;
            Ok(Summary {
                seed: Some(cfg.master_seed),
                hash_input: format!("ser\n{}", cfg.to_toml_string()),
                rows: rows.len(),
            })
        }
        Command::Delta(args) => {
            let cfg = args.resolve()?;
            let report = sim::run_delta_report(&cfg.resolve_channel()?, &cfg.params()?);
            write_text(args.out.as_ref(), &report.to_csv())?;
            Ok(Summary {
                seed: None,
                hash_input: format!("delta\n{}\n{:?}", cfg.sf, cfg.channel),
                rows: report.rows.len() + 1,
            })
        }
        Command::Complexity(args) => {
            let sfs: Vec<u32> = parse_list("sf_list", &args.sf_list)?;
            let ncs: Vec<u64> = parse_list("nc_list", &args.nc_list)?;
            if args.k == 0 {
                return Err(Error::InvalidConfig {
                    field: "k".into(),
                    message: "must be at least 1".into(),
                }
                .into());
            }
            let rows = sim::run_complexity_report(&sfs, args.k, &ncs).map_err(|e| Error::InvalidConfig {
                field: "sf_list".into(),
                message: e.to_string(),
            })?;
            emit(args.out.as_ref(), &rows)?;
            Ok(Summary {
                seed: None,
                hash_input: format!("complexity\n{sfs:?}\n{}\n{ncs:?}", args.k),
                rows: rows.len(),
            })
        }
        Command::EstimateStudy(args) => {
            let cfg = args.resolve()?;
            set_threads(args.threads)?;
            let rows = sim::run_estimation_study(&cfg)?;
            emit(args.out.as_ref(), &rows)?;
            Ok(Summary {
                seed: Some(cfg.master_seed),
                hash_input: format!("estimate-study\n{}", cfg.to_toml_string()),
                rows: rows.len(),
            })
        }
        Command::CandSweep(args) => {
            let cfg = args.sim.resolve()?;
            set_threads(args.sim.threads)?;
            let sfs: Vec<u32> = parse_list("sf_list", &args.sf_list)?;
            let norms: Vec<f64> = match &args.norms {
                Some(s) => parse_list("norms", s)?,
                None => sim::CANDIDATE_NORMS.to_vec(),
            };
            if norms.iter().any(|&x| !(x > 0.0 && x <= 1.0)) {
                return Err(Error::InvalidConfig {
                    field: "norms".into(),
                    message: "values must lie in (0, 1]".into(),
                }
                .into());
            }
            let rows = sim::run_candidate_sweep(&cfg, &sfs, &norms)?;
            emit(args.sim.out.as_ref(), &rows)?;
            Ok(Summary {
                seed: Some(cfg.master_seed),
                hash_input: format!("cand-sweep\n{sfs:?}\n{norms:?}\n{}", cfg.to_toml_string()),
                rows: rows.len(),
            })
        }
        Command::Demo(args) => {
            let cfg = args.sim.resolve()?;
            let params = cfg.params()?;
            let a = Symbol::new(args.symbol, &params).map_err(|e| Error::InvalidConfig {
                field: "symbol".into(),
                message: e.to_string(),
            })?;
            let rows = sim::run_demo(&cfg.resolve_channel()?, &params, a)?;
            emit(args.sim.out.as_ref(), &rows)?;
            Ok(Summary {
                seed: None,
                hash_input: format!("demo\n{}\n{:?}\n{}", cfg.sf, cfg.channel, args.symbol),
                rows: rows.len(),
            })
        }
        Command::Timing(args) => {
            let cfg = args.sim.resolve()?;
            let dets = if args.sim.detectors.is_some() {
                cfg.detectors.clone()
            } else {
                DetectorKind::ALL.to_vec()
            };
            let rows = sim::run_timing(
                &cfg.params()?,
                &cfg.resolve_channel()?,
                &dets,
                cfg.selection(),
                args.symbols,
                args.runs,
                cfg.master_seed,
            )?;
            emit(args.sim.out.as_ref(), &rows)?;
            Ok(Summary {
                seed: Some(cfg.master_seed),
                hash_input: format!("timing\n{}", cfg.to_toml_string()),
                rows: rows.len(),
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    match run(cli.command) {
        Ok(summary) => {
            let seed = summary.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
            eprintln!(
                "seed={seed} config={} rows={} wall={:.3}s",
                config_hash(&summary.hash_input),
                summary.rows,
                start.elapsed().as_secs_f64()
            );
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
