//! Command-line front end: `extract`, `predict`, `train`, `eval`,
//! `ablate` and a `synth` corpus generator.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};
use odisal::Error;

use crate::config::Config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core(e) => match e {
                Error::Io(_)
                | Error::BadImage { .. }
                | Error::CorruptFile { .. }
                | Error::ArchitectureMismatch(_)
                | Error::ShapeMismatch(_)
                | Error::EmptyDataset
                | Error::EmptyFixations => EXIT_IO,
                Error::Diverged { .. } | Error::AllZero | Error::ConstantInput | Error::AllHoles => EXIT_NUMERIC,
                _ => EXIT_USAGE,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "odisal", version, about = "Saliency prediction for equirectangular images")]
pub struct Cli {
    /// Configuration file of `key = value` lines.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads for per-view inference (same as `--set threads=N`).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Seed (same as `--set seed=N`).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Cut the six fixed views out of an image.
    Extract { odi: PathBuf, out_dir: PathBuf },
    /// Predict the saliency map of an image.
    Predict {
        odi: PathBuf,
        weights: PathBuf,
        /// Output `.sal` file.
        out: PathBuf,
        /// Side-by-side preview PNG [default: OUT with a .png extension].
        #[arg(long)]
        preview: Option<PathBuf>,
    },
    /// Train stage 1 (base network, whole images) or stage 2 (whole
    /// network, random views).
    Train {
        manifest: PathBuf,
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        /// Starting weights; required for stage 2.
        #[arg(long)]
        weights_in: Option<PathBuf>,
        #[arg(long)]
        weights_out: PathBuf,
        /// Training log [default: WEIGHTS_OUT/train.log].
        #[arg(long)]
        log: Option<PathBuf>,
        /// Directory with conv1..conv3 weight and bias tensors.
        #[arg(long)]
        pretrained: Option<PathBuf>,
    },
    /// Score predicted maps against ground truth.
    Eval {
        pred_dir: PathBuf,
        gt_dir: PathBuf,
        /// Fixations per image: `<stem>.txt` (`x y` lines) or a binary map.
        #[arg(long)]
        fixations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare whole-image, six-view and full-pipeline predictions.
    Ablate {
        manifest: PathBuf,
        weights: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic corpus with known saliency.
    Synth {
        out_dir: PathBuf,
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
    },
}

fn config_for(cli: &Cli) -> Result<Config, CliError> {
    let mut overrides = cli.overrides.clone();
    if let Some(t) = cli.threads {
        overrides.push(format!("threads={t}"));
    }
    if let Some(s) = cli.seed {
        overrides.push(format!("seed={s}"));
    }
    Ok(Config::load(cli.config.as_deref(), &overrides)?)
}

pub fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = config_for(cli)?;
    match &cli.command {
        Command::Extract { odi, out_dir } => {
            let files = commands::extract(odi, out_dir, &cfg)?;
            println!("wrote {} files to {}", files.len(), out_dir.display());
        }
        Command::Predict {
            odi,
            weights,
            out,
            preview,
        } => {
            commands::predict(odi, weights, out, preview.as_deref(), &cfg)?;
            println!("wrote {}", out.display());
        }
        Command::Train {
            manifest,
            stage,
            weights_in,
            weights_out,
            log,
            pretrained,
        } => {
            let req = commands::TrainRequest {
                manifest,
                stage: *stage,
                weights_in: weights_in.as_deref(),
                weights_out,
                log: log.as_deref(),
                pretrained: pretrained.as_deref(),
            };
            let log = commands::train(&req, &cfg)?;
            println!(
                "train loss {:.6e} -> {:.6e} ({} train / {} test samples)",
                log.initial_train_loss, log.final_train_loss, log.n_train, log.n_test
            );
        }
        Command::Eval {
            pred_dir,
            gt_dir,
            fixations,
            out,
        } => {
            let table = commands::eval(pred_dir, gt_dir, fixations.as_deref(), out, &cfg)?;
            print!("{}", table.to_text()?);
        }
        Command::Ablate { manifest, weights, out } => {
            print!("{}", commands::ablate(manifest, weights, out, &cfg)?.to_text());
        }
        Command::Synth {
            out_dir,
            n,
            width,
            height,
        } => {
            let m = commands::synth(out_dir, *n, *width, *height, cfg.seed)?;
            println!("wrote {}", m.display());
        }
    }
    Ok(())
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cmd = Cli::command().after_help(Config::help_text());
    let cli = match cmd.try_get_matches_from(args).and_then(|m| Cli::from_arg_matches(&m)) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
