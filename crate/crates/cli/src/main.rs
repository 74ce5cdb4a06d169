use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use helios::config::{preset, preset_names, ExperimentConfig};
use helios::experiment::{run, Command};
use helios::HeliosError;

/// Forward and inverse experiments for radial helium production-diffusion
/// driven by fractional Brownian motion.
#[derive(Parser, Debug)]
#[command(name = "helios", version)]
struct Args {
    /// forward | ensemble | reconstruct | probe-decay | sweep-h
    command: String,
    /// Config file, or a builtin preset (example1, example2, example3).
    config: String,
    /// Output directory for the CSV files.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: machine parallelism).
    #[arg(long, env = "HELIOS_THREADS")]
    threads: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn exit_code(err: &HeliosError) -> u8 {
    match err {
        HeliosError::Config(_) | HeliosError::Domain(_) => 2,
        HeliosError::Numeric(_) | HeliosError::Data(_) => 3,
        HeliosError::Io(_) => 1,
    }
}

fn load_config(spec: &str) -> Result<ExperimentConfig, HeliosError> {
    let path = Path::new(spec);
    if path.exists() {
        return ExperimentConfig::from_file(path);
    }
    match preset(spec) {
        Some(text) => ExperimentConfig::parse(text, None),
        None => Err(HeliosError::Config(format!(
            "config '{spec}' is neither a file nor a preset ({})",
            preset_names().join(", ")
        ))),
    }
}

fn execute(args: &Args) -> Result<(), HeliosError> {
    let command: Command = args.command.parse()?;
    let mut config = load_config(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(k) = args.threads {
        if k == 0 {
            return Err(HeliosError::Config("invariant violated: --threads >= 1 (got 0)".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| HeliosError::Config(format!("cannot size the worker pool: {e}")))?;
    }
    let report = run(command, config, &args.out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    for f in &report.files {
        println!("{}", f.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("helios: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
