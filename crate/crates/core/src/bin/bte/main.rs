//! `bte`: batch front end for mask encoding, features, perturbation grids,
//! hint rendering and the score reports.
//!
//! Exit status: 0 when every item succeeded, 1 when any item failed, 2 on a
//! configuration or usage error (nothing is processed in that case).

mod commands;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use bte_core::pipeline::{parse_config, ConfigError, RunConfig};
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "bte", version, about = "Bézier tree encoding of vessel masks and counterfactual hint grids")]
struct Cli {
    #[command(flatten)]
    settings: Settings,

    /// More log output (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Errors only.
    #[arg(short, long, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

/// Run settings. Precedence: flag, then config file, then built-in default.
#[derive(Args, Debug, Default)]
struct Settings {
    /// Plain-text `key=value` file with run settings.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Run seed; every per-item seed derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Tortuosity displacement scale.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Square size masks are resampled to.
    #[arg(long, global = true)]
    working_size: Option<usize>,
    /// Endpoint distance for parent links, in pixels.
    #[arg(long, global = true)]
    link_tolerance: Option<f64>,
    /// Shortest skeleton polyline that is fitted.
    #[arg(long, global = true)]
    min_polyline: Option<usize>,
    /// Radius above which a segment counts as thick.
    #[arg(long, global = true)]
    thick_threshold: Option<f64>,
    /// Baseline probability bound of the strict subset.
    #[arg(long, global = true)]
    strict_threshold: Option<f64>,
    /// Comma-separated grid entries, e.g. `baseline,tortuosity_4x`.
    #[arg(long, global = true)]
    configs: Option<String>,
    /// Also write 8-bit PNG previews of hints.
    #[arg(long, global = true)]
    previews: bool,
    /// Worker threads (0: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Encode masks into BTE files, plus a diagnostics CSV.
    Encode {
        /// Mask files or directories of masks.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Compute the 20 geometric features of BTE files against their masks.
    Features {
        /// BTE files or directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Directory holding `<start>.png` (or .pgm/.pbm/.ppm) masks.
        #[arg(long)]
        masks: PathBuf,
        /// `id,label` CSV filling the label column.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Write the perturbed tree of every grid entry as `<start>_<config>.bte`.
    Perturb {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        masks: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Render the hint of every grid entry as `<start>_<config>.btef`.
    Hint {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        masks: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Paired effects, strict-subset effects and contrasts from a scores CSV.
    Score {
        scores: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Observational association table from a features CSV.
    Obs {
        features: PathBuf,
        /// `id,label` CSV overriding the features file's label column.
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Subject-level deduplication of a cohort manifest.
    Dedupe {
        cohort: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate synthetic starts: mask, BTE and ground-truth CSV each.
    Synth {
        #[command(flatten)]
        spec: SpecArgs,
        /// Number of starts, named `synth_000`, `synth_001`, ...
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Generate, rasterize, encode and compare against ground truth.
    Roundtrip {
        #[command(flatten)]
        spec: SpecArgs,
        /// Output CSV; stdout when omitted.
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct SpecArgs {
    #[arg(long, default_value_t = 1)]
    branches: usize,
    #[arg(long, default_value_t = 3)]
    depth: usize,
    #[arg(long, default_value_t = 3.0)]
    root_radius: f64,
    #[arg(long, default_value_t = 0.8)]
    radius_decay: f64,
    #[arg(long, default_value_t = 512)]
    canvas: usize,
}

fn resolve(settings: &Settings) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &settings.config {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            line: None,
            message: format!("{}: {e}", path.display()),
        })?;
        let pairs = parse_config(&text).map_err(|e| ConfigError {
            line: e.line,
            message: format!("{}: {}", path.display(), e.message),
        })?;
        cfg.apply_pairs(&pairs)?;
    }
    let mut flags = BTreeMap::new();
    let mut set = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            flags.insert(k.to_owned(), v);
        }
    };
    set("seed", settings.seed.map(|v| v.to_string()));
    set("gamma", settings.gamma.map(|v| v.to_string()));
    set("working_size", settings.working_size.map(|v| v.to_string()));
    set("link_tolerance", settings.link_tolerance.map(|v| v.to_string()));
    set("min_polyline", settings.min_polyline.map(|v| v.to_string()));
    set("thick_threshold", settings.thick_threshold.map(|v| v.to_string()));
    set("strict_threshold", settings.strict_threshold.map(|v| v.to_string()));
    set("configs", settings.configs.clone());
    set("previews", settings.previews.then(|| "true".to_owned()));
    set("workers", settings.workers.map(|v| v.to_string()));
    cfg.apply_pairs(&flags)?;
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let cfg = match resolve(&cli.settings) {
        Ok(c) => c,
        Err(e) => {
            log::error!("config: {e}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build() {
        Ok(p) => p,
        Err(e) => {
            log::error!("worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    let outcome = pool.install(|| commands::run(&cli.command, &cfg));
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            log::error!("{failed} item(s) failed");
            ExitCode::from(1)
        }
        Err(commands::Fatal::Config(msg)) => {
            log::error!("{msg}");
            ExitCode::from(2)
        }
        Err(commands::Fatal::Run(msg)) => {
            log::error!("{msg}");
            ExitCode::from(1)
        }
    }
}
