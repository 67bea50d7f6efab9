//! Experiment harness behind the `dynma` binary.
//!
//! Exit codes: 0 on success, 1 for usage or configuration errors, 2 when a
//! run or an output write fails.

mod config;
mod sweep;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

pub use config::{ScenarioConfig, SweepAxis};
pub use sweep::{
    run_oracle_comparison, run_single, run_sweep, sig10, GapRow, GapSummary, GapTable, PointSummary, SingleRun,
    SweepTable,
};

use crate::error::{Error, Result};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dynma", version, about = "Joint OMA/NOMA selection, pairing and power allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte-Carlo sweep: aggregated CSV plus a per-trial companion file.
    Sweep(RunArgs),
    /// Hybrid solve against exhaustive search on small networks.
    Oracle(RunArgs),
    /// One realization in every mode with full iteration traces.
    Single(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario file of `key = value` lines.
    config: PathBuf,
    /// Power budget in dB (replaces a power sweep).
    #[arg(long)]
    pmax: Option<f64>,
    /// Minimum SP rate (replaces a rate sweep).
    #[arg(long)]
    rs: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Modes to run, comma-separated (hybrid, oma, noma).
    #[arg(long)]
    mode: Option<String>,
    /// Sweep axis (pmax_db, rs, cost_av, users, edge_fraction).
    #[arg(long)]
    sweep: Option<String>,
    /// Sweep values, comma-separated and increasing.
    #[arg(long, allow_hyphen_values = true)]
    values: Option<String>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Any other config key, as `key=value`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn load(&self) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", self.config.display())))?;
        let mut cfg = ScenarioConfig::parse(&text)?;
        if let Some(s) = &self.sweep {
            cfg.set(0, "sweep", s)?;
        }
        if let Some(v) = &self.values {
            cfg.set(0, "values", v)?;
        }
        if let Some(p) = self.pmax {
            cfg.pmax_db = p;
            if cfg.sweep == SweepAxis::PmaxDb {
                cfg.values.clear();
            }
        }
        if let Some(r) = self.rs {
            cfg.rs = r;
            if cfg.sweep == SweepAxis::Rs {
                cfg.values.clear();
            }
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(m) = &self.mode {
            cfg.set(0, "modes", m)?;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(o) = &self.output {
            cfg.output = o.clone();
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(0, k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// `path` with `infix` inserted before its extension: `out.csv` becomes
/// `out.raw.csv`.
pub fn companion_path(path: &Path, infix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{infix}.{ext}"))
}

fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("cannot write {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    body(&mut w)?;
    w.flush()?;
    Ok(())
}

fn pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Limit(format!("cannot start worker pool: {e}")))
}

enum Failure {
    Config(Error),
    Runtime(Error),
}

fn execute(command: Command) -> std::result::Result<(), Failure> {
    let (args, kind) = match &command {
        Command::Sweep(a) => (a, "sweep"),
        Command::Oracle(a) => (a, "oracle"),
        Command::Single(a) => (a, "single"),
    };
    let cfg = args.load().map_err(Failure::Config)?;
    let out = cfg.output.clone();
    let raw = companion_path(&out, "raw", "csv");
    let clock = Instant::now();
    let pool = pool(cfg.threads).map_err(Failure::Runtime)?;
    let run = || -> Result<()> {
        match kind {
            "sweep" => {
                let table = run_sweep(&cfg)?;
                write_file(&out, |w| table.write_summary(w))?;
                write_file(&raw, |w| table.write_raw(w))?;
            }
            "oracle" => {
                let table = run_oracle_comparison(&cfg)?;
                write_file(&out, |w| table.write_summary(w))?;
                write_file(&raw, |w| table.write_raw(w))?;
                for s in &table.summary {
                    eprintln!(
                        "K={} N={}: mean gap {:.4} over {} seeds",
                        s.users, s.subcarriers, s.mean_gap, s.compared
                    );
                }
            }
            _ => {
                let single = run_single(&cfg)?;
                write_file(&out, |w| single.write_summary(w))?;
                write_file(&companion_path(&out, "trace", "txt"), |w| single.write_trace(w))?;
            }
        }
        Ok(())
    };
    pool.install(run).map_err(Failure::Runtime)?;
    eprintln!("{kind}: wrote {} in {:.1?}", out.display(), clock.elapsed());
    Ok(())
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
