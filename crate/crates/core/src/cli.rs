//! Command-line front end. [`run`] parses arguments, executes a subcommand
//! and returns the process exit code.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use crate::config::{preset_text, Config, PRESETS};
use crate::error::Error;
use crate::io::config_hash;
use crate::pipeline::{dataset_stats, evaluate_dataset, Generator, Regime};

pub const EXIT_OK: u8 = 0;
/// Bad configuration, missing inputs or missing manifest.
pub const EXIT_CONFIG: u8 = 2;
/// A generated or evaluated frame violates an invariant.
pub const EXIT_INVARIANT: u8 = 3;
pub const EXIT_IO: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "semistereo", version, about = "Semi-synthetic stereo dataset generator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render every frame and write the dataset with its manifest.
    Generate {
        #[command(flatten)]
        scene: SceneArgs,
        /// Dataset root directory.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the available parallelism.
        #[arg(long, env = "SEMISTEREO_WORKERS")]
        workers: Option<usize>,
    },
    /// Render one frame and write left view, disparity colormap and anaglyph.
    Preview {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        frame: u32,
    },
    /// Disparity distribution, occlusion and timing of a generated dataset.
    Stats {
        /// Dataset root directory.
        #[arg(value_name = "DATASET")]
        root: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Score predicted disparities against a generated dataset.
    Eval {
        /// Directory of `<frame>/disp0.pfm` or `<frame>.pfm` predictions.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth dataset root.
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_enum, default_value_t = Regime::All)]
        regime: Regime,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// Scene configuration file (TOML).
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Bundled configuration.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS.iter().map(|(n, _)| *n)))]
    pub preset: Option<String>,
    #[arg(long)]
    pub frames: Option<u32>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replaces `textures.dir`.
    #[arg(long)]
    pub textures: Option<String>,
}

impl SceneArgs {
    /// Resolved configuration and its hash over the source bytes and overrides.
    pub fn load(&self) -> Result<(Config, String), Failure> {
        let (text, base) = match (&self.config, &self.preset) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))
                    .map_err(|e| Failure::new(EXIT_CONFIG, e))?;
                (text, path.parent().map(Path::to_path_buf))
            }
            (None, Some(name)) => (preset_text(name).map_err(Failure::from)?.to_string(), None),
            (None, None) => return Err(Failure::msg(EXIT_CONFIG, "one of --config or --preset is required")),
        };
        let mut cfg = Config::from_toml(&text, base.as_deref()).map_err(Failure::from)?;
        let mut overrides = Vec::new();
        if let Some(f) = self.frames {
            cfg.frames = f;
            overrides.push(("frames", f.to_string()));
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
            overrides.push(("seed", s.to_string()));
        }
        if let Some(t) = &self.textures {
            cfg.textures.dir = t.clone();
            overrides.push(("textures", t.clone()));
        }
        cfg.validate().map_err(Failure::from)?;
        Ok((cfg, config_hash(text.as_bytes(), &overrides)))
    }
}

/// An error with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            error: error.into(),
        }
    }

    pub fn msg(code: u8, msg: impl std::fmt::Display) -> Self {
        Self::new(code, anyhow::anyhow!("{msg}"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(exit_code(&e), e)
    }
}

/// Default exit code of a library error.
pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidRig(_)
        | Error::InvalidMesh(_)
        | Error::InvalidParam(_)
        | Error::MissingUv { .. }
        | Error::BadIndex { .. }
        | Error::Parse { .. }
        | Error::ImageTooSmall { .. }
        | Error::NoTextures
        | Error::NoMeshes
        | Error::CalibParse(_)
        | Error::Config(_)
        | Error::MissingOutput(_) => EXIT_CONFIG,
        Error::MaxDisparityExceeded { .. }
        | Error::Invariant(_)
        | Error::PfmParse(_)
        | Error::DisparityOverflow { .. }
        | Error::EmptyEvaluation
        | Error::BinMismatch
        | Error::ShapeMismatch(_) => EXIT_INVARIANT,
        Error::OutputNotEmpty(_) | Error::Io(_) | Error::Image(_) | Error::Json(_) => EXIT_IO,
    }
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(EXIT_IO, e))?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("writing {}", path.display()))
        .map_err(|e| Failure::new(EXIT_IO, e))
}

pub fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate { scene, out, workers } => {
            let workers = workers.unwrap_or_else(default_workers);
            if workers == 0 {
                return Err(Failure::msg(EXIT_CONFIG, "--workers must be at least 1"));
            }
            let (cfg, hash) = scene.load()?;
            let gen = Generator::new(cfg, hash).map_err(Failure::from)?;
            let summary = gen.generate(&out, workers).map_err(Failure::from)?;
            println!(
                "wrote {} frames to {} in {:.2} s ({:.2} frames/s, {} workers)",
                summary.frames,
                out.display(),
                summary.seconds,
                summary.frames_per_second,
                workers
            );
        }
        Command::Preview { scene, out, frame } => {
            let (cfg, hash) = scene.load()?;
            if frame >= cfg.frames {
                return Err(Failure::msg(
                    EXIT_CONFIG,
                    format!("frame {frame} outside 0..{}", cfg.frames),
                ));
            }
            let gen = Generator::new(cfg, hash).map_err(Failure::from)?;
            for p in gen.preview(frame, &out).map_err(Failure::from)? {
                println!("{}", p.display());
            }
        }
        Command::Stats { root, json } => {
            let report = dataset_stats(&root).map_err(|e| match e {
                Error::MissingOutput(p) if p.ends_with(crate::io::MANIFEST_FILE) => {
                    Failure::msg(EXIT_CONFIG, format!("no dataset manifest at {}", p.display()))
                }
                e => Failure::from(e),
            })?;
            print!("{}", report.to_text());
            if let Some(p) = json {
                write_json(&p, &report)?;
            }
        }
        Command::Eval { pred, gt, regime, json } => {
            let report = evaluate_dataset(&pred, &gt, regime).map_err(|e| match e {
                Error::MissingOutput(p) if p.ends_with(crate::io::MANIFEST_FILE) => {
                    Failure::msg(EXIT_CONFIG, format!("no dataset manifest at {}", p.display()))
                }
                Error::MissingOutput(p) if p.starts_with(&pred) => {
                    Failure::msg(EXIT_INVARIANT, format!("missing prediction for frame {}", p.display()))
                }
                e => Failure::from(e),
            })?;
            print!("{}", report.to_table());
            if let Some(p) = json {
                write_json(&p, &report)?;
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.code
        }
    }
}
