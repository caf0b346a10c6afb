//! Command-line front end: amplify, calibrate, detect, forge, report.
//!
//! Configuration layers: a TOML file (`--config`) underneath CLI flags;
//! flags win field by field. Worker parallelism comes from the
//! `NVPDETECT_WORKERS` environment variable.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use minilang::interp::RunLimits;
use nvpdetect::forge::{InputGrid, TransplantKind};
use nvpdetect::pipeline::{
    self, PipelineConfig, PipelineError, RawConfig, DEFAULT_STEP_LIMIT, DEFAULT_TIMEOUT_SECS,
};

#[derive(Parser)]
#[command(
    name = "nvpdetect",
    version,
    about = "Detect computational diversity between program variants by test amplification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// TOML config file; any flag below overrides its value
    #[arg(long)]
    config: Option<PathBuf>,
    /// Corpus root: src/, tests/, and optionally variants/<id>/src/
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory for artifacts and stage caches
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed; required, so every run is reproducible
    #[arg(long)]
    seed: Option<u64>,
    /// Calibration repetitions per environment (default 30)
    #[arg(long)]
    runs: Option<usize>,
    /// Environment perturbations including the base one (default 3)
    #[arg(long)]
    environments: Option<usize>,
    /// Comparison mode, repeatable: FULL, INPUT_ONLY, OBSERVATION_ONLY, TDR
    #[arg(long = "mode")]
    modes: Vec<String>,
    /// Numeric-baseline stack depth (default 1)
    #[arg(long)]
    interaction_level: Option<usize>,
    /// Interpreter step budget per test (default 5000000)
    #[arg(long)]
    step_limit: Option<u64>,
    /// Wall-clock budget per run in seconds; 0 disables (default 10)
    #[arg(long)]
    timeout_secs: Option<u64>,
}

impl ConfigArgs {
    fn layered(&self) -> Result<RawConfig, PipelineError> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    PipelineError::Config(format!("{}: {e}", path.display()))
                })?;
                RawConfig::from_toml(&text)?
            }
            None => RawConfig::default(),
        };
        let flags = RawConfig {
            corpus: self.corpus.clone(),
            out: self.out.clone(),
            seed: self.seed,
            runs: self.runs,
            environments: self.environments,
            modes: (!self.modes.is_empty()).then(|| self.modes.clone()),
            interaction_level: self.interaction_level,
            step_limit: self.step_limit,
            timeout_secs: self.timeout_secs,
        };
        Ok(file.overridden_by(flags))
    }

    fn resolve(&self) -> Result<PipelineConfig, PipelineError> {
        self.layered()?.resolve()
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Add,
    Delete,
    Replace,
}

impl From<KindArg> for TransplantKind {
    fn from(kind: KindArg) -> TransplantKind {
        match kind {
            KindArg::Add => TransplantKind::Add,
            KindArg::Delete => TransplantKind::Delete,
            KindArg::Replace => TransplantKind::Replace,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Amplify the test suite and write the instrumented tests
    Amplify(ConfigArgs),
    /// Calibrate observation points across repeated, perturbed runs
    Calibrate(ConfigArgs),
    /// Run the full detection pipeline against every corpus variant
    Detect(ConfigArgs),
    /// Forge variants by statement transplantation and record ground truth
    Forge {
        #[command(flatten)]
        config: ConfigArgs,
        /// Transplant kind to synthesize
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Maximum candidates to check
        #[arg(long, default_value_t = 10)]
        budget: usize,
    },
    /// Re-render summary and CSV tables from an existing report.json
    Report(ConfigArgs),
}

fn forge_inputs(args: &ConfigArgs) -> Result<(PathBuf, u64, RunLimits), PipelineError> {
    let raw = args.layered()?;
    let corpus = raw
        .corpus
        .ok_or_else(|| PipelineError::Config("corpus directory is required".into()))?;
    let seed = raw
        .seed
        .ok_or_else(|| PipelineError::Config("seed is required; pass --seed or set it in the config file".into()))?;
    let step_limit = raw.step_limit.unwrap_or(DEFAULT_STEP_LIMIT);
    let timeout = raw.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS);
    Ok((
        corpus,
        seed,
        RunLimits {
            step_limit,
            wall: (timeout > 0).then(|| Duration::from_secs(timeout)),
        },
    ))
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    match cli.command {
        Command::Amplify(args) => {
            let cfg = args.resolve()?;
            let manifest = pipeline::amplify_only(&cfg)?;
            let total = manifest.originals.len() + manifest.generated.len();
            println!(
                "amplified {} tests -> {} ({} generated, {} skipped; expected {})",
                manifest.originals.len(),
                total,
                manifest.generated.len(),
                manifest.skipped.len(),
                manifest.counts.formula(),
            );
            println!("{} observation points declared", manifest.points_declared);
            println!("wrote {}", cfg.out.join("ats").display());
        }
        Command::Calibrate(args) => {
            let cfg = args.resolve()?;
            let outcome = pipeline::calibrate_only(&cfg)?;
            let cached = if outcome.cached { " (cached)" } else { "" };
            println!(
                "calibrated {} points over {} runs x {} environments{}: {} stable, {} discarded, {} unexercised",
                outcome.points_declared,
                cfg.runs,
                cfg.environments,
                cached,
                outcome.stable.stable.len(),
                outcome.stable.discarded.len(),
                outcome.stable.unexercised.len(),
            );
            for point in outcome.stable.discarded.keys() {
                println!("discarded {point}");
            }
            println!("wrote {}", cfg.out.join("stable.json").display());
        }
        Command::Detect(args) => {
            let cfg = args.resolve()?;
            let outcome = pipeline::detect(&cfg)?;
            let rendered = pipeline::render_bundle(&outcome.bundle)?;
            print!("{}", rendered.summary);
            println!("wrote {}", cfg.out.join("report.json").display());
        }
        Command::Forge {
            config,
            kind,
            budget,
        } => {
            let (corpus, seed, limits) = forge_inputs(&config)?;
            let kind = TransplantKind::from(kind);
            let report = pipeline::forge_corpus(
                &corpus,
                kind,
                budget,
                seed,
                &limits,
                &InputGrid::default(),
            )?;
            println!(
                "forged {} {} variants ({} sampled, {} uncovered, {} failing, {} unbuildable)",
                report.accepted.len(),
                kind.label(),
                report.sampled,
                report.rejected_uncovered,
                report.rejected_failing,
                report.rejected_build,
            );
            for id in &report.accepted {
                let truth = &report.ground_truth[id];
                let verdict = if truth.diverse { "diverse" } else { "quiet" };
                println!("variant {id}: {verdict} ({} probes)", truth.probes);
            }
            println!(
                "wrote {}",
                corpus.join("variants").join("ground_truth.json").display()
            );
        }
        Command::Report(args) => {
            let raw = args.layered()?;
            let out = raw
                .out
                .ok_or_else(|| PipelineError::Config("output directory is required".into()))?;
            let bundle = pipeline::load_bundle(&out.join("report.json"))?;
            let rendered = pipeline::render_bundle(&bundle)?;
            fs::write(out.join("summary.txt"), &rendered.summary).map_err(|e| {
                PipelineError::Config(format!("{}: {e}", out.display()))
            })?;
            fs::write(out.join("amplification.csv"), &rendered.amplification_csv).map_err(
                |e| PipelineError::Config(format!("{}: {e}", out.display())),
            )?;
            fs::write(out.join("detection.csv"), &rendered.detection_csv).map_err(|e| {
                PipelineError::Config(format!("{}: {e}", out.display()))
            })?;
            print!("{}", rendered.summary);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("nvpdetect: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
