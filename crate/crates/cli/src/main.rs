//! `pcgseg`: heart-sound segmentation from the command line.

mod commands;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pcgseg::config::{Profile, RunConfig};
use pcgseg::features::parse_components;
use pcgseg::model::HeadActivation;
use pcgseg::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(
    name = "pcgseg",
    version,
    about = "Heart-sound (S1/S2) segmentation with an attention bi-LSTM"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// TOML run configuration (see `pcgseg config dump-defaults`).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Preset used when no --config is given.
    #[arg(long, global = true, value_enum)]
    profile: Option<ProfileArg>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// LSTM units per direction; several values run a sweep (train only).
    #[arg(long, global = true, value_delimiter = ',', value_name = "LIST")]
    hidden: Vec<usize>,
    /// Frames per window (odd).
    #[arg(long = "window-frames", global = true, value_name = "K")]
    window_frames: Option<usize>,
    /// Feature groups, e.g. `MFCC+DELTA+DELTA2` or `HoE,PSD`.
    #[arg(long, global = true, value_name = "LIST")]
    features: Option<String>,
    /// SNR of the training noise augmentation; `inf` disables it.
    #[arg(long = "snr-db", global = true, value_name = "X")]
    snr_db: Option<f64>,
    #[arg(long, global = true, value_enum)]
    head: Option<HeadArg>,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Full,
    Quick,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum HeadArg {
    Linear,
    Relu,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic corpus as WAV files with annotation CSVs.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Number of recordings (defaults to the config value).
        #[arg(long)]
        count: Option<usize>,
    },
    /// Dump raw (unnormalised) features of every recording in a directory.
    Extract {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model; without --data the synthetic corpus of the config is used.
    Train {
        /// Directory of `*.wav` files with `<stem>.csv` annotations.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint on annotated recordings.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// `split.json` written by `train`; restricts scoring to its test ids.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Segment one recording.
    Segment {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        /// Reference annotations, drawn in the SVG overlay.
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write an SVG plot of η against the reference targets.
        #[arg(long)]
        svg: bool,
    },
    /// Export attention weights, occlusion importance, embeddings and PCA.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        wav: PathBuf,
        /// Reference annotations; labels the embeddings (decoded labels otherwise).
        #[arg(long)]
        annotations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train and score every feature combination of the comparison table.
    FeatureStudy {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// Restrict to rows with these names or component lists (repeatable).
        #[arg(long)]
        only: Vec<String>,
    },
    /// Inspect configuration.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand, Debug)]
enum ConfigAction {
    /// Print the effective configuration as TOML.
    DumpDefaults,
    /// Validate a configuration file.
    Check { path: PathBuf },
}

fn resolve_config(g: &GlobalOpts, allow_sweep: bool) -> pcgseg::Result<(RunConfig, Vec<usize>)> {
    let mut cfg = match (&g.config, g.profile) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(ProfileArg::Quick)) => RunConfig::profile(Profile::Quick),
        (None, _) => RunConfig::profile(Profile::Full),
    };
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(k) = g.window_frames {
        cfg.model.window_frames = k;
    }
    if let Some(f) = &g.features {
        cfg.features.components = parse_components(f)?;
    }
    if let Some(x) = g.snr_db {
        cfg.train.noise_snr_db = x;
    }
    if let Some(h) = g.head {
        cfg.model.head = match h {
            HeadArg::Linear => HeadActivation::Linear,
            HeadArg::Relu => HeadActivation::Relu,
        };
    }
    let hidden = g.hidden.clone();
    if hidden.len() > 1 && !allow_sweep {
        return Err(Error::InvalidArgument {
            arg: "--hidden",
            reason: "a list of sizes is only accepted by `train`".into(),
        });
    }
    if let Some(&h) = hidden.first() {
        cfg.model.hidden_dim = h;
    }
    cfg.validate()?;
    Ok((cfg, hidden))
}

fn run(cli: Cli) -> pcgseg::Result<()> {
    let g = &cli.global;
    match cli.command {
        Command::Synth { out, count } => commands::synth(&resolve_config(g, false)?.0, &out, count),
        Command::Extract { input, out } => commands::extract(&resolve_config(g, false)?.0, &input, &out),
        Command::Train { data, out } => {
            let (cfg, hidden) = resolve_config(g, true)?;
            commands::train(&cfg, &hidden, data.as_deref(), &out)
        }
        Command::Eval {
            checkpoint,
            data,
            split,
            out,
        } => commands::eval(&checkpoint, &data, split.as_deref(), &out),
        Command::Segment {
            checkpoint,
            wav,
            annotations,
            out,
            svg,
        } => commands::segment(&checkpoint, &wav, annotations.as_deref(), &out, svg),
        Command::Explain {
            checkpoint,
            wav,
            annotations,
            out,
        } => commands::explain(&checkpoint, &wav, annotations.as_deref(), &out),
        Command::FeatureStudy { out, seeds, only } => {
            commands::feature_study(&resolve_config(g, false)?.0, &seeds, &only, &out)
        }
        Command::Config { action } => match action {
            ConfigAction::DumpDefaults => {
                print!("{}", resolve_config(g, false)?.0.to_toml()?);
                Ok(())
            }
            ConfigAction::Check { path } => {
                RunConfig::load(&path)?;
                println!("{}: ok", path.display());
                Ok(())
            }
        },
    }
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numeric => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
