use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fairrank::harness::report::report;
use fairrank::harness::run::{filter_directions, run_experiment, run_training, SweepMode};
use fairrank::harness::synth::{generate_synthetic, save_synthetic, SynthParams};
use fairrank::harness::ExperimentConfig;
use fairrank::noise::Direction;

#[derive(Parser)]
#[command(name = "fairrank", version, about = "Fair learning-to-rank experiments under demographic inference error")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Override the experiment seed that drives the noise scenarios.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Detect the disadvantaged group, split, and train the three models.
    Train(Common),
    /// Train, then run every strategy over the controlled noise grid
    /// (and the fixtures, when configured).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Only this direction: bidirectional, dis_to_adv or adv_to_dis.
        #[arg(long)]
        direction: Option<Direction>,
    },
    /// Train, then run every strategy on the configured inference fixtures.
    Fixtures {
        #[command(flatten)]
        common: Common,
        /// Fixture CSV (`id,name,service,inferred_label`); overrides the config.
        #[arg(long)]
        fixtures: Option<PathBuf>,
    },
    /// Write a synthetic dataset and its schema.
    Synth {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long, default_value_t = 0.78)]
        adv_fraction: f64,
        #[arg(long, default_value_t = 1.5)]
        bias: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// CSV path; the schema goes next to it as `<stem>.schema.toml`.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Rebuild aggregates and charts from a results CSV.
    Report {
        #[arg(long, short)]
        results: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
}

fn load(common: &Common) -> fairrank::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> fairrank::Result<()> {
    match cli.command {
        Command::Train(common) => {
            let config = load(&common)?;
            let dir = run_training(&config, common.out.as_deref())?;
            println!("models written to {}", dir.display());
        }
        Command::Sweep { common, direction } => {
            let mut config = load(&common)?;
            filter_directions(&mut config, direction);
            let dir = run_experiment(&config, SweepMode::Full, common.out.as_deref())?;
            println!("results written to {}", dir.display());
        }
        Command::Fixtures { common, fixtures } => {
            let mut config = load(&common)?;
            if let Some(path) = fixtures {
                config.fixtures = Some(fairrank::harness::config::FixtureConfig { path });
            }
            let dir = run_experiment(&config, SweepMode::FixturesOnly, common.out.as_deref())?;
            println!("results written to {}", dir.display());
        }
        Command::Synth {
            n,
            adv_fraction,
            bias,
            seed,
            out,
        } => {
            let dataset = generate_synthetic(&SynthParams {
                n,
                adv_fraction,
                bias_strength: bias,
                seed,
            })?;
            let schema = save_synthetic(&dataset, &out)?;
            println!("wrote {} and {}", out.display(), schema.display());
        }
        Command::Report { results, out } => {
            let n = report(&results, &out)?;
            println!("{n} rows summarized into {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
