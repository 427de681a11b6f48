//! `fnoseg`: dataset generation, training, evaluation and the resolution
//! experiment for 3D Fourier-operator segmentation.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

mod commands;
mod exit;
mod output;
mod run_config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fnoseg3d::model::Variant;

use exit::CliError;
use run_config::{Precision, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "fnoseg",
    version,
    about = "Resolution-robust 3D segmentation with Fourier neural operators"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Run configuration (JSON). Flags below override its fields.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "U64")]
    seed: Option<u64>,
    /// Training downsampling factors, e.g. `1,2`.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    factors: Option<Vec<usize>>,
    /// Model variants, e.g. `fnoseg3d,baseline_cnn`.
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    variants: Option<Vec<Variant>>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    precision: Option<Precision>,
    /// Worker threads for FFTs (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate the synthetic dataset into `--out`.
    SynthGen {
        /// Generator parameters (JSON); defaults to the run config's.
        #[arg(long, value_name = "PATH")]
        spec: Option<PathBuf>,
    },
    /// Train one model; writes a checkpoint, history.csv and results.json.
    Train {
        /// Dataset manifest.
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        variant: Option<Variant>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Segment a split with a checkpoint and report per-region Dice.
    Eval {
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: commands::SplitArg,
        /// Evaluate on inputs downsampled by this factor (1 = native).
        #[arg(long, default_value_t = 1)]
        factor: usize,
    },
    /// Finite-difference gradient checks. Runs both suites unless one is chosen.
    Gradcheck {
        #[arg(long)]
        ops: bool,
        #[arg(long)]
        model: bool,
    },
    /// Exact parameter counts with per-block breakdown.
    ParamCount {
        /// Count the laptop-scale presets instead of the full-size ones.
        #[arg(long)]
        desk: bool,
    },
    /// Train every variant at every factor and test at native resolution.
    Experiment {
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Use at most this many training samples.
        #[arg(long, value_name = "N")]
        max_train: Option<usize>,
    },
}

fn resolve(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(f) = &common.factors {
        cfg.factors = f.clone();
    }
    if let Some(v) = &common.variants {
        cfg.variants = v.clone();
    }
    if let Some(o) = &common.out {
        cfg.out = o.clone();
    }
    if let Some(p) = common.precision {
        cfg.precision = p;
    }
    Ok(cfg)
}

fn set_epochs(cfg: &mut RunConfig, epochs: Option<usize>) {
    if let Some(e) = epochs {
        cfg.train.epochs = e;
        cfg.train.schedule.total_epochs = e;
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let mut cfg = resolve(&cli.common)?;
    match cli.command {
        Command::SynthGen { spec } => {
            if let Some(p) = spec {
                let text =
                    std::fs::read_to_string(&p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                cfg.synthetic =
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            }
            if let Some(s) = cli.common.seed {
                cfg.synthetic.seed = s;
            }
            commands::synth_gen(&cfg)
        }
        Command::Train {
            manifest,
            variant,
            epochs,
        } => {
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            if let Some(v) = variant {
                cfg.variant = v;
            }
            set_epochs(&mut cfg, epochs);
            commands::train(&cfg)
        }
        Command::Eval {
            checkpoint,
            manifest,
            split,
            factor,
        } => {
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            commands::eval(&cfg, &checkpoint, split, factor)
        }
        Command::Gradcheck { ops, model } => commands::gradcheck(&cfg, ops || !model, model || !ops),
        Command::ParamCount { desk } => commands::param_count(&cfg, desk),
        Command::Experiment {
            manifest,
            epochs,
            max_train,
        } => {
            if manifest.is_some() {
                cfg.manifest = manifest;
            }
            set_epochs(&mut cfg, epochs);
            commands::experiment(&cfg, max_train)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::code::OK),
        Err(e) => {
            eprintln!("fnoseg: {e}");
            e.exit()
        }
    }
}
