//! `aucap` command line. Settings resolve as defaults, then `--config`
//! file, then `--set key=value`, then the dedicated flags.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::captioner::Variant;
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pipeline::{self, OutputLock};
use crate::selfcheck::{gradient_suite, TOLERANCE};

#[derive(Debug, Parser)]
#[command(name = "aucap", version, about = "Audio captioning: features, training, decoding, scoring")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// `key = value` run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// logmel, vggish or panns.
    #[arg(long, global = true)]
    pub variant: Option<Variant>,
    #[arg(long, global = true, value_parser = ["on", "off"])]
    pub use_sve: Option<String>,
    /// Epochs of the stage being run (captioner for `run`).
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Any configuration key, e.g. `--set lr=0.01`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub sets: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute and cache features for every clip.
    ExtractFeatures,
    /// Build the subject/verb corpus from the training captions.
    BuildSve,
    /// Build the vocabulary and train word vectors.
    TrainW2v,
    /// Train the SVE predictor.
    TrainMlp,
    /// Train the captioner.
    TrainCaptioner,
    /// Caption the evaluation (or validation) clips.
    Predict,
    /// Score candidate captions against references.
    Evaluate {
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        references: Option<PathBuf>,
    },
    /// Check analytic gradients of every layer against finite differences.
    Gradcheck,
    /// Every stage in order, from features to scores.
    Run,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ExtractFeatures => "extract-features",
            Command::BuildSve => "build-sve",
            Command::TrainW2v => "train-w2v",
            Command::TrainMlp => "train-mlp",
            Command::TrainCaptioner => "train-captioner",
            Command::Predict => "predict",
            Command::Evaluate { .. } => "evaluate",
            Command::Gradcheck => "gradcheck",
            Command::Run => "run",
        }
    }
}

/// Applies the file, `--set` pairs and flags to the defaults.
pub fn resolve(global: &GlobalArgs, command: &Command) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &global.sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(v) = global.variant {
        cfg.variant = v;
    }
    if let Some(s) = &global.use_sve {
        cfg.use_sve = s == "on";
    }
    if let Some(e) = global.epochs {
        match command {
            Command::TrainW2v => cfg.w2v_epochs = e,
            Command::TrainMlp => cfg.mlp_epochs = e,
            _ => cfg.epochs = e,
        }
    }
    if let Some(b) = global.batch {
        cfg.batch = b;
    }
    if let Some(o) = &global.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn gradcheck(seed: u64) -> Result<i32> {
    let checks = gradient_suite(seed)?;
    let mut worst = 0.0f64;
    for c in &checks {
        println!("{:<12} {:>10.3e}  ({} entries)", c.layer, c.max_relative_error, c.checked);
        worst = worst.max(c.max_relative_error);
    }
    let ok = worst < TOLERANCE;
    println!("{} max relative error {worst:.3e} (tolerance {TOLERANCE:.0e})", if ok { "ok" } else { "FAILED" });
    Ok(if ok { 0 } else { 1 })
}

/// Runs one parsed invocation; returns the process exit code.
pub fn execute(cli: Cli) -> Result<i32> {
    let cfg = resolve(&cli.global, &cli.command)?;
    if let Command::Gradcheck = cli.command {
        return gradcheck(cfg.seed);
    }
    let _lock = OutputLock::acquire(&cfg.out)?;
    let resolved = cfg.to_text();
    info!("resolved configuration:\n{resolved}");
    crate::format::write_atomic(&cfg.out.join(format!("{}.conf", cli.command.name())), resolved.as_bytes())?;

    if let Command::Evaluate { candidates, references } = &cli.command {
        let report = pipeline::evaluate(&cfg, candidates.as_deref(), references.as_deref())?;
        print!("{}", report.to_table());
        return Ok(0);
    }
    let manifest = pipeline::load_manifest(&cfg)?;
    match cli.command {
        Command::ExtractFeatures => {
            pipeline::extract_features(&cfg, &manifest)?;
        }
        Command::BuildSve => {
            pipeline::build_sve(&cfg, &manifest)?;
        }
        Command::TrainW2v => {
            pipeline::train_w2v(&cfg, &manifest)?;
        }
        Command::TrainMlp => {
            pipeline::train_mlp(&cfg, &manifest)?;
        }
        Command::TrainCaptioner => {
            pipeline::train_captioner(&cfg, &manifest)?;
        }
        Command::Predict => {
            let preds = pipeline::predict(&cfg, &manifest)?;
            println!("{} captions written to {}", preds.len(), pipeline::Artifacts::new(&cfg.out).predictions().display());
        }
        Command::Run => {
            pipeline::extract_features(&cfg, &manifest)?;
            pipeline::train_w2v(&cfg, &manifest)?;
            if cfg.use_sve {
                pipeline::build_sve(&cfg, &manifest)?;
                pipeline::train_mlp(&cfg, &manifest)?;
            }
            pipeline::train_captioner(&cfg, &manifest)?;
            pipeline::predict(&cfg, &manifest)?;
            print!("{}", pipeline::evaluate(&cfg, None, None)?.to_table());
        }
        Command::Evaluate { .. } | Command::Gradcheck => unreachable!("handled above"),
    }
    Ok(0)
}

/// Parses `args`, runs, and maps errors to `error[category]: ...` on
/// stderr with a per-category exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("aucap").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_beat_set_beats_file() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("run.conf");
        std::fs::write(&f, "seed = 3\nlr = 0.5\nbatch = 8\n").unwrap();
        let cli = parse(&[
            "train-mlp",
            "--config",
            f.to_str().unwrap(),
            "--set",
            "batch=16",
            "--set",
            "seed=4",
            "--seed",
            "9",
            "--epochs",
            "7",
            "--use-sve",
            "off",
        ]);
        let cfg = resolve(&cli.global, &cli.command).unwrap();
        assert_eq!((cfg.seed, cfg.batch, cfg.lr), (9, 16, 0.5));
        assert_eq!(cfg.mlp_epochs, 7);
        assert_eq!(cfg.epochs, RunConfig::default().epochs);
        assert!(!cfg.use_sve);
    }

    #[test]
    fn unknown_flags_and_values_are_rejected() {
        let p = |a: &[&str]| Cli::try_parse_from(std::iter::once("aucap").chain(a.iter().copied()));
        assert!(p(&["predict", "--bogus"]).is_err());
        assert!(p(&["predict", "--variant", "mfcc"]).is_err());
        assert!(p(&["predict", "--use-sve", "maybe"]).is_err());
        assert!(p(&["dance"]).is_err());
        assert!(p(&["evaluate", "--candidates", "a.tsv"]).is_ok());
    }

    #[test]
    fn bad_set_is_a_config_error() {
        let cli = parse(&["predict", "--set", "nonsense"]);
        assert_eq!(resolve(&cli.global, &cli.command).unwrap_err().exit_code(), 2);
        let cli = parse(&["predict", "--set", "colour=blue"]);
        assert!(resolve(&cli.global, &cli.command).is_err());
    }
}
