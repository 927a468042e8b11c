//! `hexwave` command-line front end.
//!
//! Every compute subcommand takes `--config FILE` (flat `key = value` text
//! with `[section]` headers; see `examples/example.conf` and the settings
//! module for the keys) and an optional `--output DIR` overriding the
//! config's `output` key.
//!
//! Exit status: 0 on success, 2 for configuration errors, 3 for numerical
//! failures, 4 for I/O errors. Failures print `error[CATEGORY]: detail` on
//! stderr.

mod commands;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hexwave::config::Config;
use hexwave::{Category, Result};

#[derive(Parser)]
#[command(name = "hexwave", version, about = "Dirac points and edge transport in honeycomb photonic media")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration file.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Band surface or high-symmetry path sweep to `bands.csv`.
    Bands(ConfigArgs),
    /// Dirac point report.
    Dirac(ConfigArgs),
    /// Gap against perturbation strength to `gap.csv`.
    GapSweep(ConfigArgs),
    /// Low-contrast expansion check.
    LowContrast(ConfigArgs),
    /// Envelope time evolution: observables and field dumps.
    Evolve(ConfigArgs),
    /// Nonlinear line mode or lump.
    SolveMode(ConfigArgs),
    /// Maxwell evolution against the envelope prediction.
    Compare(ConfigArgs),
    /// Grayscale PNG of one component of a field dump.
    Render {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn load(args: &ConfigArgs) -> Result<Config> {
    let mut cfg = Config::load(&args.config)?;
    if let Some(dir) = &args.output {
        let dir = dir.to_str().ok_or_else(|| hexwave::Error::Config("output path is not UTF-8".into()))?;
        cfg.set("", "output", dir);
    }
    Ok(cfg)
}

fn run(cmd: Command) -> Result<Vec<PathBuf>> {
    match cmd {
        Command::Bands(a) => commands::bands(&load(&a)?),
        Command::Dirac(a) => commands::dirac(&load(&a)?),
        Command::GapSweep(a) => commands::gap(&load(&a)?),
        Command::LowContrast(a) => commands::low_contrast(&load(&a)?),
        Command::Evolve(a) => commands::evolve_cmd(&load(&a)?),
        Command::SolveMode(a) => commands::solve_mode(&load(&a)?),
        Command::Compare(a) => commands::compare(&load(&a)?),
        Command::Render { input, channel, output } => commands::render_cmd(&input, channel, &output),
    }
}

fn exit_code(c: Category) -> u8 {
    match c {
        Category::Config => 2,
        Category::Numeric => 3,
        Category::Io => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(files) => {
            for f in files {
                log::info!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{}]: {e}", cat.as_str());
            ExitCode::from(exit_code(cat))
        }
    }
}
