use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optrank_cli::{bench_csv, build_json, cmd_bench, cmd_build, cmd_spectrum, load_build, CampaignConfig, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "optrank", version, about = "Algebra-plus-low-rank preconditioners for Toeplitz and Hankel systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Campaign configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output path; defaults to the config's `output`, then stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest n for dense diagnostics.
    #[arg(long)]
    dense_cap: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Build preconditioners and write them as JSON.
    Build(Common),
    /// Solve at every size and write one CSV row per size.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Reuse preconditioners written by `build`.
        #[arg(long)]
        load: Option<PathBuf>,
    },
    /// Write the eigenvalues of the preconditioned operator as CSV.
    Spectrum(Common),
}

fn emit(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn target(common: &Common, cfg: &CampaignConfig) -> Option<PathBuf> {
    common.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from))
}

fn options(common: &Common) -> RunOptions {
    RunOptions { dense_cap: common.dense_cap, seed: common.seed }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Build(common) => {
            let cfg = CampaignConfig::load(&common.config)?;
            let mut cfg = cfg;
            if let Some(s) = common.seed {
                cfg.seed = s;
            }
            let out = cmd_build(&cfg, common.threads)?;
            emit(target(&common, &cfg).as_deref(), &build_json(&out))
        }
        Command::Bench { common, load } => {
            let cfg = CampaignConfig::load(&common.config)?;
            let stored = load.as_deref().map(load_build).transpose()?;
            let (rows, failure) = cmd_bench(&cfg, &options(&common), common.threads, stored.as_ref())?;
            emit(target(&common, &cfg).as_deref(), &bench_csv(&rows)?)?;
            failure.map_or(Ok(()), Err)
        }
        Command::Spectrum(common) => {
            let cfg = CampaignConfig::load(&common.config)?;
            let csv = cmd_spectrum(&cfg, &options(&common), common.threads)?;
            emit(target(&common, &cfg).as_deref(), &csv)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("optrank: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
