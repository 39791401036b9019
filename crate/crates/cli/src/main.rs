//! `nevlab`: runs declarative scenarios of the value distribution laboratory.
//!
//! Exit status: 0 on success, 1 on an invalid configuration, 2 on a numerical
//! or io failure. The worker thread count is read from `NEVLAB_THREADS` unless
//! `--threads` is given.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nevlab::forms::{dictionary, DICTIONARY_VERSION};
use nevlab::maps::{standard_exhaustion, CATALOG};
use nevlab::nevanlinna::ConditionId;
use nevlab::scenario::{run_with_threads, validate, ScenarioConfig, OUTPUT_SCHEMA};

const THREADS_ENV: &str = "NEVLAB_THREADS";

#[derive(Parser)]
#[command(name = "nevlab", version, about = "Numerical value distribution experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides NEVLAB_THREADS.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Check a scenario without running it.
    Validate { config: PathBuf },
    /// List maps, exhaustions, conditions and test forms.
    Catalog,
}

fn load(path: &Path) -> Result<ScenarioConfig, ExitCode> {
    ScenarioConfig::load(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(1)
    })
}

/// `--out`, else `output` relative to the config file, else `<name>.out`
/// next to it.
fn output_dir(config_path: &Path, config: &ScenarioConfig, out: Option<PathBuf>) -> PathBuf {
    if let Some(o) = out {
        return o;
    }
    let base = config_path.parent().unwrap_or(Path::new("."));
    match &config.output {
        Some(o) if o.is_absolute() => o.clone(),
        Some(o) => base.join(o),
        None => base.join(format!("{}.out", config.name)),
    }
}

fn threads_from_env() -> Result<Option<usize>, ExitCode> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map(Some).map_err(|_| {
            eprintln!("error: {THREADS_ENV}={v:?} is not a thread count");
            ExitCode::from(1)
        }),
        Err(_) => Ok(None),
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>, threads: Option<usize>) -> Result<(), ExitCode> {
    let config = load(path)?;
    let threads = match threads {
        Some(t) => Some(t),
        None => threads_from_env()?,
    };
    let dir = output_dir(path, &config, out);
    match run_with_threads(&config, &dir, threads) {
        Ok(summary) => {
            println!("wrote {} files to {}", summary.files.len(), summary.out_dir.display());
            Ok(())
        }
        Err(e) => {
            eprintln!("error: {e}");
            Err(ExitCode::from(e.exit_code() as u8))
        }
    }
}

fn cmd_validate(path: &Path) -> Result<(), ExitCode> {
    let config = load(path)?;
    let diags = validate(&config);
    if diags.is_empty() {
        println!("{}: ok", path.display());
        return Ok(());
    }
    for d in &diags {
        eprintln!("{}: {d}", path.display());
    }
    Err(ExitCode::from(1))
}

fn cmd_catalog() {
    println!("nevlab {} (output {OUTPUT_SCHEMA})", env!("CARGO_PKG_VERSION"));
    println!("\nmaps:");
    for (id, desc) in CATALOG {
        println!("  {id:<12} {desc}");
    }
    println!("\nexhaustions:");
    for id in ["logAbs", "ballLog", "puncturedDisk"] {
        let e = standard_exhaustion(id, 1).expect("catalog exhaustion");
        println!("  {id:<14} r0 = {}, R = {}", e.r0(), e.r_max());
    }
    println!("\nconditions:");
    for c in ConditionId::ALL {
        println!("  {}", c.name());
    }
    println!("\ntest-form dictionary {DICTIONARY_VERSION}:");
    for m in [1, 2] {
        println!("  P^{m}:");
        for f in dictionary(m) {
            println!("    {:>3}  {}", f.id, f.label());
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out, threads } => cmd_run(&config, out, threads),
        Command::Validate { config } => cmd_validate(&config),
        Command::Catalog => {
            cmd_catalog();
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
