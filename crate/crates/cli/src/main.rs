mod checks;
mod data;
mod experiments;
mod model;
mod plots;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::de::DeserializeOwned;

pub use checks::AssertionFailed;

#[derive(Debug, Parser)]
#[command(
    name = "codimlab",
    version,
    about = "Geometric adversarial-robustness experiments"
)]
struct Cli {
    /// Base seed; sweeps use `seed, seed + 1, …`.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// JSON configuration replacing the subcommand's defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Check the expected orderings and exit with status 3 if one fails.
    #[arg(long = "assert", global = true)]
    assert_mode: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a Circles or Planes train/test split to CSV.
    GenData(data::GenDataArgs),
    /// Build a grid or random cover and measure its radius.
    Cover(data::CoverArgs),
    /// Tabulate the closed-form bounds over a range of ambient dimensions.
    Bounds(data::BoundsArgs),
    /// Train an MLP on a dataset CSV and save a checkpoint.
    Train(model::TrainArgs),
    /// Attack a checkpoint (or a nearest-neighbour index) on an ε grid.
    Attack(model::AttackArgs),
    /// Certify nearest-neighbour robustness on a covered training set.
    Certify(data::CertifyArgs),
    /// Robust accuracy against codimension.
    SweepCodim(experiments::SweepArgs),
    /// L∞-robust training against L2 attacks over sphere dimension.
    Tradeoff(experiments::TradeoffArgs),
    /// Angles between FGSM perturbations and the normal space.
    Angles(experiments::AnglesArgs),
    /// Loss-gradient field of a Planes model.
    Gradfield(experiments::GradfieldArgs),
    /// Decision-boundary cross-sections for Circles in R^3.
    Slices(experiments::SlicesArgs),
    /// Nearest neighbour against natural and robust MLPs on MNIST.
    MnistNn(experiments::MnistArgs),
}

/// Settings shared by every subcommand.
pub struct Ctx {
    pub seed: u64,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub assert_mode: bool,
}

impl Ctx {
    pub fn out_dir(&self) -> Result<&Path> {
        std::fs::create_dir_all(&self.out)
            .with_context(|| format!("creating {}", self.out.display()))?;
        Ok(&self.out)
    }

    /// The `--config` file if given, else `default`.
    pub fn config_or<T: DeserializeOwned>(&self, default: T) -> Result<T> {
        match &self.config {
            None => Ok(default),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
            }
        }
    }

    pub fn write_json<T: serde::Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.out_dir()?.join(name);
        std::fs::write(&path, serde_json::to_string_pretty(value)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx {
        seed: cli.seed,
        out: cli.out,
        config: cli.config,
        assert_mode: cli.assert_mode,
    };
    match cli.command {
        Command::GenData(a) => data::gen_data(&ctx, a),
        Command::Cover(a) => data::cover(&ctx, a),
        Command::Bounds(a) => data::bounds(&ctx, a),
        Command::Train(a) => model::train(&ctx, a),
        Command::Attack(a) => model::attack(&ctx, a),
        Command::Certify(a) => data::certify(&ctx, a),
        Command::SweepCodim(a) => experiments::sweep_codim(&ctx, a),
        Command::Tradeoff(a) => experiments::tradeoff(&ctx, a),
        Command::Angles(a) => experiments::angles(&ctx, a),
        Command::Gradfield(a) => experiments::gradfield(&ctx, a),
        Command::Slices(a) => experiments::slices(&ctx, a),
        Command::MnistNn(a) => experiments::mnist_nn(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<AssertionFailed>() => {
            eprintln!("assertion failed: {e}");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
