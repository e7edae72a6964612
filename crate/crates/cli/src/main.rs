//! `qmimo`: training, BER sweeps and diagnostics for low-resolution MIMO
//! detectors. All experiment state lives in JSON config files; flags only
//! override the seed, paths and verbosity.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qmimo::gradcheck::{self, GradcheckConfig};
use qmimo::harness::{self, CompareConfig, ResultFormat, SweepConfig};
use qmimo::quantizer::gaussian_optimal_step;
use qmimo::unfolded::{train, NetKind, TrainConfig, TrainedParams};
use qmimo::{Error, SystemConfig};

/// Environment variable holding the default worker-thread count.
const WORKERS_ENV: &str = "QMIMO_WORKERS";

/// Largest relative gradient error `gradcheck` accepts.
const GRADCHECK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "qmimo", version, about = "Detectors for massive MIMO with low-resolution ADCs")]
struct Cli {
    /// More log output (-v debug, -vv trace).
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,

    /// Only print warnings and errors.
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,

    /// Worker threads (default: $QMIMO_WORKERS, else all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train OBMNet or FBMNet; writes trained parameters and the loss history.
    Train {
        #[arg(short, long)]
        config: PathBuf,
        /// Trained-parameters JSON.
        #[arg(short, long)]
        out: PathBuf,
        /// Loss-history CSV (default: next to `--out`, suffixed `.loss.csv`).
        #[arg(long)]
        loss_out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// BER sweep over SNR for a set of detectors.
    DetectSweep {
        #[arg(short, long)]
        config: PathBuf,
        /// Result file; `.json` selects JSON, anything else CSV.
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Paired exact vs reformulated exhaustive ML at one and few bits.
    CompareMl {
        #[arg(short, long)]
        config: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the quantizer (Δ, thresholds, levels) of a system config.
    QuantizerInfo {
        #[arg(short, long)]
        config: PathBuf,
        /// Operating SNR in dB (overrides `rho`).
        #[arg(long)]
        snr_db: Option<f64>,
        /// Write the report here instead of stdout.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every analytic gradient.
    Gradcheck {
        /// Optional config; defaults to K=4, N=16, L=5, 100 instances.
        #[arg(short, long)]
        config: Option<PathBuf>,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// `train` config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainJob {
    net_kind: NetKind,
    system: SystemConfig,
    #[serde(default)]
    train: TrainConfig,
}

#[derive(Debug, Serialize)]
struct QuantizerReport {
    b: u32,
    #[serde(rename = "K")]
    k: usize,
    snr_db: f64,
    delta: f64,
    gaussian_optimal_step: Option<f64>,
    thresholds: Vec<f64>,
    levels: Vec<f64>,
}

fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn banner<T: Serialize>(command: &str, seed: u64, config: &T) {
    log::info!(
        "qmimo {} {command}: seed {seed}, config sha256 {}",
        env!("CARGO_PKG_VERSION"),
        config_hash(config)
    );
}

fn worker_count(flag: Option<usize>) -> Result<Option<usize>, Error> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) if v.trim().is_empty() => Ok(None),
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::config(WORKERS_ENV, format!("expected a thread count, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn loss_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.loss.csv"))
}

fn write_loss_csv(history: &[f64], path: &Path) -> Result<(), Error> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["batch", "loss"]).map_err(csv_err)?;
    for (i, l) in history.iter().enumerate() {
        w.write_record([i.to_string(), l.to_string()]).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn run_train(config: &Path, out: &Path, loss_out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Error> {
    let mut job: TrainJob = read_config(config)?;
    if let Some(s) = seed {
        job.train.seed = s;
    }
    job.system.validate()?;
    job.train.validate()?;
    banner("train", job.train.seed, &job);
    let outcome = train(job.net_kind, &job.system, &job.train)?;
    let record = TrainedParams {
        net_kind: job.net_kind,
        k: job.system.k,
        n: job.system.n,
        b: job.system.b,
        l: outcome.params.layers(),
        snr_db: job.train.snr_db,
        alphas: outcome.params.alphas.clone(),
        beta: outcome.params.beta,
        seed: job.train.seed,
        constellation: job.system.constellation,
        delta: job.system.delta,
        train_config: job.train.clone(),
    };
    record.save(out)?;
    let loss_out = loss_out.unwrap_or_else(|| loss_path(out));
    write_loss_csv(&outcome.loss_history, &loss_out)?;
    let last = outcome.loss_history.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} for {} batches{} (final loss {last:.6}); wrote {} and {}",
        job.net_kind,
        outcome.loss_history.len(),
        if outcome.stopped_early { ", stopped early" } else { "" },
        out.display(),
        loss_out.display()
    );
    Ok(())
}

fn run_sweep(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg: SweepConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    banner("detect-sweep", cfg.seed, &cfg);
    let results = harness::ber_sweep(&cfg)?;
    harness::write_results(&results, &cfg, cfg.seed, out, ResultFormat::from_path(out))?;
    println!("wrote {} results to {}", results.len(), out.display());
    Ok(())
}

fn run_compare(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg: CompareConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    banner("compare-ml", cfg.seed, &cfg);
    let table = harness::compare_ml(&cfg)?;
    for row in &table.rows {
        println!(
            "{:>6.2} dB  1-bit: approx-exact {:+.2e} (σ {:.2e})  few-bit: approx-exact {:+.2e} (σ {:.2e})",
            row.snr_db, row.diff_onebit, row.sigma_onebit, row.diff_fewbit, row.sigma_fewbit
        );
    }
    let results = table.results();
    harness::write_results(&results, &cfg, cfg.seed, out, ResultFormat::from_path(out))?;
    println!("wrote {} results to {}", results.len(), out.display());
    Ok(())
}

fn run_quantizer_info(config: &Path, snr_db: Option<f64>, out: Option<PathBuf>) -> Result<(), Error> {
    let mut system: SystemConfig = read_config(config)?;
    if let Some(snr) = snr_db {
        system = system.with_snr_db(snr);
    }
    system.validate()?;
    let q = system.quantizer()?;
    let report = QuantizerReport {
        b: q.b,
        k: system.k,
        snr_db: system.snr_db(),
        delta: q.delta,
        gaussian_optimal_step: if q.b >= 2 { gaussian_optimal_step(q.b).ok() } else { None },
        thresholds: q.thresholds(),
        levels: q.levels(),
    };
    match out {
        Some(path) => write_json(&report, &path)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    Ok(())
}

fn run_gradcheck(config: Option<PathBuf>, out: Option<PathBuf>, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = match config {
        Some(path) => read_config(&path)?,
        None => GradcheckConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    banner("gradcheck", cfg.seed, &cfg);
    let report = gradcheck::run(&cfg)?;
    for e in &report.entries {
        println!("{:<16} {:>4} instances  max relative error {:.3e}", e.name, e.instances, e.max_relative_error);
    }
    let worst = report.max_relative_error();
    println!("max relative error {worst:.3e}");
    if let Some(path) = out {
        write_json(&report, &path)?;
    }
    if !(worst < GRADCHECK_TOLERANCE) {
        return Err(Error::InvalidValue(format!(
            "gradient check failed: max relative error {worst:.3e} >= {GRADCHECK_TOLERANCE:e}"
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(n) = worker_count(cli.workers)? {
        if n == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::config("workers", e.to_string()))?;
    }
    match cli.command {
        Command::Train {
            config,
            out,
            loss_out,
            seed,
        } => run_train(&config, &out, loss_out, seed),
        Command::DetectSweep { config, out, seed } => run_sweep(&config, &out, seed),
        Command::CompareMl { config, out, seed } => run_compare(&config, &out, seed),
        Command::QuantizerInfo { config, snr_db, out } => run_quantizer_info(&config, snr_db, out),
        Command::Gradcheck { config, out, seed } => run_gradcheck(config, out, seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_env("QMIMO_LOG")
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
