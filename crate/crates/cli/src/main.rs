//! Command-line driver for the FDD CSI recovery experiments.
//!
//! Each subcommand runs one pipeline stage, writes its CSV outputs plus a
//! `manifest.toml` capturing the fully resolved configuration (re-running a
//! stage from its manifest reproduces the outputs bit for bit), and prints
//! a short summary. Exit codes: 0 success, 2 configuration error, 3 data
//! error, 4 numerical divergence.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fddcsi::experiment;
use fddcsi::io::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "fddcsi",
    about = "Uplink-trained CSI recovery: datasets, training, evaluation, rates, MMD tests and mask learning",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Experiment configuration (TOML); desk-scale defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for reports, datasets and the manifest.
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Restrict the evaluation to one UL-DL gap in MHz (e.g. 120, 240, 480).
    #[arg(long)]
    gap: Option<u32>,

    /// Override the mask keep fraction.
    #[arg(long)]
    eta: Option<f64>,

    /// Restrict the rate evaluation to one user count.
    #[arg(long)]
    users: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate paired UL/DL datasets and write them as binary files.
    Generate(CommonArgs),
    /// Train the recovery network on uplink data only.
    Train(CommonArgs),
    /// Evaluate DL recovery (NMSE / cosine similarity) against the
    /// linear-interpolation baseline.
    Evaluate(CommonArgs),
    /// Multi-user rate curves under successive zero-forcing precoding.
    Rate(CommonArgs),
    /// MMD two-sample test battery over the configured comparisons.
    Mmdtest(CommonArgs),
    /// Learn a feedback mask with the concrete autoencoder.
    Maskopt(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Generate(a)
            | Command::Train(a)
            | Command::Evaluate(a)
            | Command::Rate(a)
            | Command::Mmdtest(a)
            | Command::Maskopt(a) => a,
        }
    }
}

fn resolve_config(args: &CommonArgs) -> fddcsi::Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
    }
    if let Some(gap) = args.gap {
        config.evaluation.gaps_mhz = vec![gap];
        config.scenario.dl_center_hz = config.scenario.ul_center_hz + gap as f64 * 1e6;
    }
    if let Some(eta) = args.eta {
        config.mask.eta = eta;
    }
    if let Some(users) = args.users {
        config.evaluation.users = vec![users];
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> fddcsi::Result<()> {
    let args = cli.command.common().clone();
    let config = resolve_config(&args)?;
    let out = &args.out;

    match &cli.command {
        Command::Generate(_) => {
            let files = experiment::run_generate(&config, out)?;
            println!("wrote {} dataset files to {}", files.len(), out.display());
            for f in files {
                println!("  {}", f.display());
            }
        }
        Command::Train(_) => {
            let runr = experiment::run_train(&config, out)?;
            println!(
                "trained {} epochs, best validation loss {:.6} at epoch {}",
                runr.curve.len(),
                runr.best_val_loss,
                runr.best_epoch
            );
            println!("checkpoint and loss_curve.csv in {}", out.display());
        }
        Command::Evaluate(_) => {
            let outcome = experiment::run_evaluate(&config, out)?;
            println!(
                "UL reference: median NMSE {:.5}, median cosine {:.5}",
                outcome.ul.nmse_box.median, outcome.ul.cosine_box.median
            );
            for gap in &outcome.gaps {
                println!(
                    "{}: CNN median NMSE {:.5} (cos {:.5}) | interp median NMSE {:.5} (cos {:.5})",
                    gap.gap_label,
                    gap.cnn.nmse_box.median,
                    gap.cnn.cosine_box.median,
                    gap.interp.nmse_box.median,
                    gap.interp.cosine_box.median
                );
            }
        }
        Command::Rate(_) => {
            let outcomes = experiment::run_rate(&config, out)?;
            for outcome in &outcomes {
                println!("gap {} MHz:", outcome.gap_mhz);
                for p in &outcome.points {
                    println!(
                        "  {:>5.1} dB, {} users: perfect {:.4} | cnn {:.4} | interp {:.4} bpcu",
                        p.snr_db, p.users, p.perfect, p.cnn, p.interp
                    );
                }
            }
        }
        Command::Mmdtest(_) => {
            let outcome = experiment::run_mmdtest(&config, out)?;
            for c in &outcome.comparisons {
                println!(
                    "{:<12} TPR {:.3}, median n*MMD^2 {:.4}",
                    c.label, c.tpr, c.median_observed
                );
            }
        }
        Command::Maskopt(_) => {
            let outcome = experiment::run_maskopt(&config, out)?;
            println!(
                "learned mask with {} positions, final reconstruction loss {:.5}",
                outcome.ones, outcome.final_loss
            );
            println!("mask written to {}", outcome.mask_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
