//! End-to-end orchestration: corpus in, report bundle out.
//!
//! A detection run walks fixed stages: amplify the suite, instrument
//! observation points, calibrate away naturally random points, trace the
//! original and every variant across environments, diff the traces per
//! requested mode, and assemble one report bundle. The expensive stages
//! (calibration, tracing) are cached under the output directory behind
//! content keys, so re-running a completed detection is a no-op and any
//! input change invalidates exactly the stages it feeds.
//!
//! Every artifact is deterministic for a fixed corpus, seed, and config:
//! maps are ordered, no timestamps or output paths are embedded, and two
//! runs into fresh directories produce byte-identical bundles.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::amplifier::{self, AmplifiedSuite, Counts, GeneratedTest, SkippedTransformation};
use crate::corpus::{self, CorpusError};
use crate::divergence::{self, DivergenceReport, Mode, Verdict};
use crate::executor::{
    instrument_coverage, measure_coverage, run_checked, run_suite, suite_fingerprint, ExecStats,
    RunSpec, TraceSet,
};
use crate::flake_filter::{calibrate, CalibrationConfig, StablePointSet};
use crate::forge::{self, InputGrid, TransplantKind};
use crate::observer::{discover_points, instrument, AccessorCatalog, PointCatalog, PointSource};
use crate::test_ir::TestSuite;
use minilang::ast::{Program, TestFile};
use minilang::interp::RunLimits;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

pub const DEFAULT_RUNS: usize = 30;
pub const DEFAULT_ENVIRONMENTS: usize = 3;
pub const DEFAULT_INTERACTION_LEVEL: usize = 1;
pub const DEFAULT_STEP_LIMIT: u64 = 5_000_000;
pub const DEFAULT_TIMEOUT_SECS: u64 = 10;

/// Partial configuration as read from a TOML file or CLI flags; every field
/// optional so layers can be merged before resolution.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub runs: Option<usize>,
    pub environments: Option<usize>,
    pub modes: Option<Vec<String>>,
    pub interaction_level: Option<usize>,
    pub step_limit: Option<u64>,
    pub timeout_secs: Option<u64>,
}

impl RawConfig {
    pub fn from_toml(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Layer `over` on top of `self`: any field set in `over` wins.
    pub fn overridden_by(self, over: RawConfig) -> RawConfig {
        RawConfig {
            corpus: over.corpus.or(self.corpus),
            out: over.out.or(self.out),
            seed: over.seed.or(self.seed),
            runs: over.runs.or(self.runs),
            environments: over.environments.or(self.environments),
            modes: over.modes.or(self.modes),
            interaction_level: over.interaction_level.or(self.interaction_level),
            step_limit: over.step_limit.or(self.step_limit),
            timeout_secs: over.timeout_secs.or(self.timeout_secs),
        }
    }

    pub fn resolve(self) -> Result<PipelineConfig, PipelineError> {
        let corpus = self
            .corpus
            .ok_or_else(|| PipelineError::Config("corpus directory is required".into()))?;
        let out = self
            .out
            .ok_or_else(|| PipelineError::Config("output directory is required".into()))?;
        // No wall-clock fallback: an unseeded run could never be reproduced.
        let seed = self
            .seed
            .ok_or_else(|| PipelineError::Config("seed is required; pass --seed or set it in the config file".into()))?;
        let runs = self.runs.unwrap_or(DEFAULT_RUNS);
        if runs < 2 {
            return Err(PipelineError::Config(format!(
                "runs must be at least 2 so variation can show at all, got {runs}"
            )));
        }
        let environments = self.environments.unwrap_or(DEFAULT_ENVIRONMENTS);
        if environments < 1 {
            return Err(PipelineError::Config(
                "environments must be at least 1".into(),
            ));
        }
        let modes = match self.modes {
            None => Mode::ALL.to_vec(),
            Some(names) => {
                let mut parsed = Vec::new();
                for name in &names {
                    parsed.push(parse_mode(name)?);
                }
                parsed.sort();
                parsed.dedup();
                if parsed.is_empty() {
                    return Err(PipelineError::Config("modes must not be empty".into()));
                }
                parsed
            }
        };
        let interaction_level = self.interaction_level.unwrap_or(DEFAULT_INTERACTION_LEVEL);
        if interaction_level < 1 {
            return Err(PipelineError::Config(
                "interaction_level must be at least 1".into(),
            ));
        }
        let step_limit = self.step_limit.unwrap_or(DEFAULT_STEP_LIMIT);
        if step_limit == 0 {
            return Err(PipelineError::Config("step_limit must be positive".into()));
        }
        let timeout_secs = self.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS);
        Ok(PipelineConfig {
            corpus,
            out,
            seed,
            runs,
            environments,
            modes,
            interaction_level,
            limits: RunLimits {
                step_limit,
                // 0 disables the wall clock; step_limit still bounds runaway tests.
                wall: (timeout_secs > 0).then(|| Duration::from_secs(timeout_secs)),
            },
        })
    }
}

fn parse_mode(name: &str) -> Result<Mode, PipelineError> {
    match name.to_ascii_uppercase().as_str() {
        "FULL" => Ok(Mode::Full),
        "INPUT_ONLY" => Ok(Mode::InputOnly),
        "OBSERVATION_ONLY" => Ok(Mode::ObservationOnly),
        "TDR" => Ok(Mode::Tdr),
        other => Err(PipelineError::Config(format!(
            "unknown mode '{other}'; expected FULL, INPUT_ONLY, OBSERVATION_ONLY, or TDR"
        ))),
    }
}

pub fn mode_key(mode: Mode) -> &'static str {
    match mode {
        Mode::Full => "FULL",
        Mode::InputOnly => "INPUT_ONLY",
        Mode::ObservationOnly => "OBSERVATION_ONLY",
        Mode::Tdr => "TDR",
    }
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::NvpDiverse => "NVP_DIVERSE",
        Verdict::NotDetected => "NOT_DETECTED",
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub out: PathBuf,
    pub seed: u64,
    pub runs: usize,
    pub environments: usize,
    /// Requested comparison modes, sorted and deduplicated.
    pub modes: Vec<Mode>,
    /// Stack depth for the numeric-baseline suite.
    pub interaction_level: usize,
    pub limits: RunLimits,
}

impl PipelineConfig {
    fn wants(&self, mode: Mode) -> bool {
        self.modes.contains(&mode)
    }
}

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("original suite is red on {program}: test '{test}' failed: {failure}")]
    SuiteRed {
        program: String,
        test: String,
        failure: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("internal: {0}")]
    Internal(String),
}

impl PipelineError {
    /// Process exit code: 1 config or red baseline, 2 corpus problems,
    /// 3 everything unexpected.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) | PipelineError::SuiteRed { .. } => 1,
            PipelineError::Corpus(_) => 2,
            PipelineError::Io { .. } | PipelineError::Internal(_) => 3,
        }
    }
}

fn internal(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Internal(e.to_string())
}

// ---------------------------------------------------------------------------
// File and cache helpers
// ---------------------------------------------------------------------------

fn write_text(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::Io {
            path: parent.to_path_buf(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_text(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| PipelineError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn hex_digest(hasher: Sha256) -> String {
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Length-prefixed digest over string parts, so part boundaries can never
/// alias each other.
fn digest_parts(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex_digest(h)
}

/// Digest of every source file the corpus contributes: program, tests, and
/// all variant sources, labeled by their location.
fn corpus_digest(root: &Path) -> Result<String, PipelineError> {
    let mut h = Sha256::new();
    let mut feed = |label: &str, files: &[(String, String)]| {
        h.update((label.len() as u64).to_le_bytes());
        h.update(label.as_bytes());
        for (name, text) in files {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            h.update((text.len() as u64).to_le_bytes());
            h.update(text.as_bytes());
        }
    };
    feed("src", &corpus::mini_files(&root.join("src"))?);
    feed("tests", &corpus::mini_files(&root.join("tests"))?);
    for id in corpus::variant_ids(root)? {
        feed(&id, &corpus::mini_files(&root.join("variants").join(&id).join("src"))?);
    }
    Ok(hex_digest(h))
}

/// Load `<out>/<stage>.json` if its key file matches, else compute, persist,
/// and stamp the key. The bool reports whether the cache was hit.
fn cached_json<T, F>(
    out: &Path,
    stage: &str,
    key: &str,
    compute: F,
) -> Result<(T, bool), PipelineError>
where
    T: Serialize + DeserializeOwned,
    F: FnOnce() -> Result<T, PipelineError>,
{
    let key_path = out.join(format!("{stage}.key"));
    let json_path = out.join(format!("{stage}.json"));
    if let (Ok(stored), Ok(text)) = (fs::read_to_string(&key_path), fs::read_to_string(&json_path))
    {
        if stored == key {
            if let Ok(value) = serde_json::from_str(&text) {
                return Ok((value, true));
            }
        }
    }
    let value = compute()?;
    let rendered = serde_json::to_string_pretty(&value).map_err(internal)?;
    write_text(&json_path, &format!("{rendered}\n"))?;
    write_text(&key_path, key)?;
    Ok((value, false))
}

fn reset_dir(dir: &Path) -> Result<(), PipelineError> {
    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| PipelineError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
    }
    fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

// ---------------------------------------------------------------------------
// Amplification and instrumentation stage
// ---------------------------------------------------------------------------

/// Manifest written next to the rendered amplified suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtsManifest {
    pub originals: Vec<String>,
    pub generated: Vec<GeneratedTest>,
    pub skipped: Vec<SkippedTransformation>,
    pub counts: Counts,
    pub hoisted: BTreeMap<String, Vec<usize>>,
    pub points_declared: usize,
}

pub struct TdrStage {
    pub suite: TestSuite,
    pub catalog: PointCatalog,
    pub suite_id: String,
    pub tests: usize,
}

pub struct AtsStage {
    pub amplified: AmplifiedSuite,
    /// Instrumented amplified suite, ready to execute.
    pub ats: TestSuite,
    pub catalog: PointCatalog,
    pub suite_id: String,
    pub tdr: Option<TdrStage>,
}

/// Instrument for the numeric baseline: only original assertion values and
/// the escaping-exception message are observed, no accessor surface.
fn tdr_instrument(
    suite: &TestSuite,
    hoisted: &BTreeMap<String, Vec<usize>>,
    catalog: &AccessorCatalog,
) -> Result<(TestSuite, PointCatalog), PipelineError> {
    let mut files = Vec::with_capacity(suite.files.len());
    let mut per_test = BTreeMap::new();
    for file in &suite.files {
        let mut tests = Vec::with_capacity(file.tests.len());
        for test in &file.tests {
            if !test.params.is_empty() {
                tests.push(test.clone());
                continue;
            }
            let empty = Vec::new();
            let ordinals = hoisted.get(&test.name).unwrap_or(&empty);
            let mut points = discover_points(test, ordinals, catalog);
            points.retain(|p| {
                matches!(
                    p.source,
                    PointSource::OriginalAssertionCall | PointSource::ExceptionMessage
                )
            });
            tests.push(instrument(test, &points).map_err(internal)?);
            per_test.insert(test.name.clone(), points);
        }
        files.push(TestFile {
            name: file.name.clone(),
            imports: file.imports.clone(),
            tests,
        });
    }
    Ok((TestSuite { files }, PointCatalog { per_test }))
}

fn build_ats(
    program: &Program,
    suite: &TestSuite,
    cfg: &PipelineConfig,
) -> Result<AtsStage, PipelineError> {
    let amplified = amplifier::amplify(suite, cfg.seed);
    let catalog = AccessorCatalog::build(program);
    let (ats, point_catalog) =
        crate::observer::instrument_suite(&amplified.suite, &amplified.hoisted, &catalog)
            .map_err(internal)?;
    let suite_id = suite_fingerprint(&ats);
    let tdr = if cfg.wants(Mode::Tdr) {
        let baseline = amplifier::tdr_amplify(suite, cfg.interaction_level);
        let tests = baseline.suite.tests().count();
        let (tdr_suite, tdr_catalog) = tdr_instrument(&baseline.suite, &baseline.hoisted, &catalog)?;
        let tdr_id = suite_fingerprint(&tdr_suite);
        Some(TdrStage {
            suite: tdr_suite,
            catalog: tdr_catalog,
            suite_id: tdr_id,
            tests,
        })
    } else {
        None
    };
    Ok(AtsStage {
        amplified,
        ats,
        catalog: point_catalog,
        suite_id,
        tdr,
    })
}

fn write_suite_dir(dir: &Path, suite: &TestSuite) -> Result<(), PipelineError> {
    reset_dir(dir)?;
    for (name, text) in suite.render().map_err(internal)? {
        write_text(&dir.join(format!("{name}.mini")), &text)?;
    }
    Ok(())
}

fn write_ats_files(out: &Path, stage: &AtsStage) -> Result<AtsManifest, PipelineError> {
    write_suite_dir(&out.join("ats"), &stage.ats)?;
    let manifest = AtsManifest {
        originals: stage.amplified.original_names(),
        generated: stage.amplified.generated.clone(),
        skipped: stage.amplified.skipped.clone(),
        counts: stage.amplified.counts,
        hoisted: stage.amplified.hoisted.clone(),
        points_declared: stage.catalog.points_declared(),
    };
    let rendered = serde_json::to_string_pretty(&manifest).map_err(internal)?;
    write_text(&out.join("ats").join("manifest.json"), &format!("{rendered}\n"))?;
    if let Some(tdr) = &stage.tdr {
        write_suite_dir(&out.join("tdr"), &tdr.suite)?;
    }
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Trace stage
// ---------------------------------------------------------------------------

/// One deterministic run per (program, environment), for the amplified suite
/// and, when requested, the numeric baseline.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TraceStage {
    /// program id -> trace per environment, indexed by environment.
    by_program: BTreeMap<String, Vec<TraceSet>>,
    tdr_by_program: BTreeMap<String, Vec<TraceSet>>,
    /// Execution stats of the original program in the base environment.
    original_stats: ExecStats,
}

pub const ORIGINAL_ID: &str = "original";

fn trace_programs(
    cfg: &PipelineConfig,
    stage: &AtsStage,
    programs: &[(String, Program)],
) -> Result<TraceStage, PipelineError> {
    let mut by_program = BTreeMap::new();
    let mut tdr_by_program = BTreeMap::new();
    let mut original_stats = ExecStats::default();
    for (id, program) in programs {
        let mut runs = Vec::with_capacity(cfg.environments);
        for env in 0..cfg.environments {
            let spec = RunSpec {
                program_id: id.clone(),
                suite_id: stage.suite_id.clone(),
                env_index: env,
                run_index: 0,
                seed: cfg.seed,
                limits: cfg.limits,
            };
            let (traces, stats) =
                run_suite(program, &stage.ats, stage.catalog.points_declared(), &spec);
            if id == ORIGINAL_ID && env == 0 {
                original_stats = stats;
            }
            runs.push(traces);
        }
        by_program.insert(id.clone(), runs);
        if let Some(tdr) = &stage.tdr {
            let mut runs = Vec::with_capacity(cfg.environments);
            for env in 0..cfg.environments {
                let spec = RunSpec {
                    program_id: id.clone(),
                    suite_id: tdr.suite_id.clone(),
                    env_index: env,
                    run_index: 0,
                    seed: cfg.seed,
                    limits: cfg.limits,
                };
                let (traces, _) =
                    run_suite(program, &tdr.suite, tdr.catalog.points_declared(), &spec);
                runs.push(traces);
            }
            tdr_by_program.insert(id.clone(), runs);
        }
    }
    Ok(TraceStage {
        by_program,
        tdr_by_program,
        original_stats,
    })
}

fn write_wire_traces(out: &Path, traces: &TraceStage) -> Result<(), PipelineError> {
    let dir = out.join("runs");
    reset_dir(&dir)?;
    for (id, runs) in &traces.by_program {
        for t in runs {
            write_text(&dir.join(format!("{id}-env{}.trace", t.env_index)), &t.to_lines())?;
        }
    }
    for (id, runs) in &traces.tdr_by_program {
        for t in runs {
            write_text(
                &dir.join(format!("tdr-{id}-env{}.trace", t.env_index)),
                &t.to_lines(),
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Report bundle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub covered: usize,
    pub total: usize,
    pub percent: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationStats {
    pub original_tests: usize,
    pub generated_tests: usize,
    pub skipped_transformations: usize,
    pub total_tests: usize,
    pub multiplier: String,
    pub counts: Counts,
    pub points_declared: usize,
    pub coverage: CoverageStats,
    pub tdr_tests: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationStats {
    pub runs_per_environment: usize,
    pub environments: usize,
    pub stable_points: usize,
    pub discarded_points: usize,
    pub unexercised_points: usize,
    pub exec: ExecStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub verdict: Verdict,
    /// Representative divergence count: the maximum across environments.
    pub count: usize,
    pub per_env: Vec<DivergenceReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub variant: String,
    /// Mode key -> summary; only requested modes appear.
    pub modes: BTreeMap<String, ModeSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub pairs_total: usize,
    pub detected: BTreeMap<String, usize>,
    pub mean_divergence: BTreeMap<String, f64>,
    pub lines: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    /// Corpus path as given; never the output path, which may differ per run.
    pub corpus: String,
    pub seed: u64,
    pub amplification: AmplificationStats,
    pub calibration: CalibrationStats,
    pub pairs: Vec<PairReport>,
    pub summary: Summary,
}

fn multiplier_text(original: usize, total: usize) -> String {
    if original == 0 {
        return "×0.0".into();
    }
    format!("×{:.1}", total as f64 / original as f64)
}

fn percent_text(covered: usize, total: usize) -> String {
    if total == 0 {
        return "0.0%".into();
    }
    format!("{:.1}%", covered as f64 * 100.0 / total as f64)
}

fn summarize_mode(per_env: Vec<DivergenceReport>) -> ModeSummary {
    let (count, verdict) = divergence::pair_summary(&per_env);
    ModeSummary {
        verdict,
        count,
        per_env,
    }
}

fn compare_pairs(
    cfg: &PipelineConfig,
    stage: &AtsStage,
    stable: &StablePointSet,
    traces: &TraceStage,
) -> Result<Vec<PairReport>, PipelineError> {
    let original_tests: BTreeSet<String> =
        stage.amplified.original_names().into_iter().collect();
    let originals = traces
        .by_program
        .get(ORIGINAL_ID)
        .ok_or_else(|| internal("trace stage lost the original program"))?;
    let needs_ablation =
        cfg.wants(Mode::Full) || cfg.wants(Mode::InputOnly) || cfg.wants(Mode::ObservationOnly);
    let mut pairs = Vec::new();
    for (variant, runs) in &traces.by_program {
        if variant == ORIGINAL_ID {
            continue;
        }
        let mut modes = BTreeMap::new();
        if needs_ablation {
            let mut full = Vec::new();
            let mut input = Vec::new();
            let mut observation = Vec::new();
            for env in 0..cfg.environments {
                let reports = divergence::ablate(
                    &originals[env],
                    &runs[env],
                    stable,
                    &stage.catalog,
                    &original_tests,
                )
                .map_err(internal)?;
                full.push(reports.full);
                input.push(reports.input_only);
                observation.push(reports.observation_only);
            }
            if cfg.wants(Mode::Full) {
                modes.insert(mode_key(Mode::Full).to_string(), summarize_mode(full));
            }
            if cfg.wants(Mode::InputOnly) {
                modes.insert(mode_key(Mode::InputOnly).to_string(), summarize_mode(input));
            }
            if cfg.wants(Mode::ObservationOnly) {
                modes.insert(
                    mode_key(Mode::ObservationOnly).to_string(),
                    summarize_mode(observation),
                );
            }
        }
        if cfg.wants(Mode::Tdr) {
            let tdr_originals = traces
                .tdr_by_program
                .get(ORIGINAL_ID)
                .ok_or_else(|| internal("trace stage lost the original baseline run"))?;
            let tdr_runs = traces
                .tdr_by_program
                .get(variant)
                .ok_or_else(|| internal(format!("trace stage lost baseline runs for {variant}")))?;
            let mut reports = Vec::new();
            for env in 0..cfg.environments {
                reports.push(
                    divergence::compare(&tdr_originals[env], &tdr_runs[env], stable, Mode::Tdr)
                        .map_err(internal)?,
                );
            }
            modes.insert(mode_key(Mode::Tdr).to_string(), summarize_mode(reports));
        }
        pairs.push(PairReport {
            variant: variant.clone(),
            modes,
        });
    }
    Ok(pairs)
}

fn summarize_run(cfg: &PipelineConfig, pairs: &[PairReport]) -> Summary {
    let mut detected = BTreeMap::new();
    let mut mean = BTreeMap::new();
    let mut lines = Vec::new();
    if pairs.is_empty() {
        lines.push("no pairs".to_string());
        return Summary {
            pairs_total: 0,
            detected,
            mean_divergence: mean,
            lines,
        };
    }
    for mode in &cfg.modes {
        let key = mode_key(*mode);
        let summaries: Vec<&ModeSummary> =
            pairs.iter().filter_map(|p| p.modes.get(key)).collect();
        if summaries.is_empty() {
            continue;
        }
        let hits = summaries
            .iter()
            .filter(|m| m.verdict == Verdict::NvpDiverse)
            .count();
        let counts: Vec<usize> = summaries.iter().map(|m| m.count).collect();
        detected.insert(key.to_string(), hits);
        if let Ok(value) = divergence::mean_divergence(&counts) {
            mean.insert(key.to_string(), value);
        }
        lines.push(format!("{hits}/{} detected ({key})", summaries.len()));
    }
    Summary {
        pairs_total: pairs.len(),
        detected,
        mean_divergence: mean,
        lines,
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

pub struct RenderedReport {
    pub summary: String,
    pub amplification_csv: String,
    pub detection_csv: String,
}

fn csv_string(records: Vec<Vec<String>>) -> Result<String, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for record in records {
        w.write_record(&record).map_err(internal)?;
    }
    let bytes = w.into_inner().map_err(internal)?;
    String::from_utf8(bytes).map_err(internal)
}

pub fn render_bundle(bundle: &ReportBundle) -> Result<RenderedReport, PipelineError> {
    let a = &bundle.amplification;
    let c = &bundle.calibration;
    let mut s = String::new();
    s.push_str(&format!("corpus: {}\n", bundle.corpus));
    s.push_str(&format!("seed: {}\n", bundle.seed));
    s.push_str(&format!(
        "amplification: {} original -> {} total ({}), {} generated, {} skipped\n",
        a.original_tests, a.total_tests, a.multiplier, a.generated_tests, a.skipped_transformations
    ));
    s.push_str(&format!(
        "observation: {} points declared, {} stable, {} discarded, {} unexercised\n",
        a.points_declared, c.stable_points, c.discarded_points, c.unexercised_points
    ));
    s.push_str(&format!(
        "coverage: {}/{} statements ({})\n",
        a.coverage.covered, a.coverage.total, a.coverage.percent
    ));
    s.push_str(&format!(
        "execution: {} tests declared, {} executed, {} dropped\n",
        c.exec.tests_declared, c.exec.tests_executed, c.exec.dropped_nonexecutable
    ));
    if let Some(tdr) = a.tdr_tests {
        s.push_str(&format!("baseline: {tdr} numeric-stack tests\n"));
    }
    for pair in &bundle.pairs {
        let cells: Vec<String> = pair
            .modes
            .iter()
            .map(|(key, m)| format!("{key}={}({})", verdict_label(m.verdict), m.count))
            .collect();
        s.push_str(&format!("pair {}: {}\n", pair.variant, cells.join(" ")));
    }
    for line in &bundle.summary.lines {
        s.push_str(line);
        s.push('\n');
    }
    if !bundle.summary.mean_divergence.is_empty() {
        let cells: Vec<String> = bundle
            .summary
            .mean_divergence
            .iter()
            .map(|(key, value)| format!("{key}={value:.2}"))
            .collect();
        s.push_str(&format!("mean divergence: {}\n", cells.join(" ")));
    }

    let amplification_csv = csv_string(vec![
        vec![
            "corpus".into(),
            "original_tests".into(),
            "generated_tests".into(),
            "skipped_transformations".into(),
            "total_tests".into(),
            "multiplier".into(),
            "points_declared".into(),
            "stable_points".into(),
            "discarded_points".into(),
            "unexercised_points".into(),
            "dropped_nonexecutable".into(),
            "coverage_covered".into(),
            "coverage_total".into(),
            "coverage_percent".into(),
            "tdr_tests".into(),
        ],
        vec![
            bundle.corpus.clone(),
            a.original_tests.to_string(),
            a.generated_tests.to_string(),
            a.skipped_transformations.to_string(),
            a.total_tests.to_string(),
            a.multiplier.clone(),
            a.points_declared.to_string(),
            c.stable_points.to_string(),
            c.discarded_points.to_string(),
            c.unexercised_points.to_string(),
            c.exec.dropped_nonexecutable.to_string(),
            a.coverage.covered.to_string(),
            a.coverage.total.to_string(),
            a.coverage.percent.clone(),
            a.tdr_tests.map(|t| t.to_string()).unwrap_or_default(),
        ],
    ])?;

    // One row per pair; the baseline keeps its own columns so its verdicts
    // can never be mistaken for the full protocol's.
    let mut detection_rows = vec![vec![
        "variant".to_string(),
        "full_verdict".to_string(),
        "full_count".to_string(),
        "input_only_verdict".to_string(),
        "input_only_count".to_string(),
        "observation_only_verdict".to_string(),
        "observation_only_count".to_string(),
        "tdr_verdict".to_string(),
        "tdr_count".to_string(),
    ]];
    for pair in &bundle.pairs {
        let mut row = vec![pair.variant.clone()];
        for mode in Mode::ALL {
            match pair.modes.get(mode_key(mode)) {
                Some(m) => {
                    row.push(verdict_label(m.verdict).to_string());
                    row.push(m.count.to_string());
                }
                None => {
                    row.push(String::new());
                    row.push(String::new());
                }
            }
        }
        detection_rows.push(row);
    }
    let detection_csv = csv_string(detection_rows)?;

    Ok(RenderedReport {
        summary: s,
        amplification_csv,
        detection_csv,
    })
}

// ---------------------------------------------------------------------------
// Schema validation
// ---------------------------------------------------------------------------

const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");

/// Validate a report value against the shipped schema subset: type,
/// required, properties, items, enum, additionalProperties.
pub fn validate_report(value: &serde_json::Value) -> Result<(), String> {
    let schema: serde_json::Value =
        serde_json::from_str(REPORT_SCHEMA).map_err(|e| format!("schema unreadable: {e}"))?;
    check_node(value, &schema, "$")
}

fn type_name(v: &serde_json::Value) -> &'static str {
    match v {
        serde_json::Value::Null => "null",
        serde_json::Value::Bool(_) => "boolean",
        serde_json::Value::Number(_) => "number",
        serde_json::Value::String(_) => "string",
        serde_json::Value::Array(_) => "array",
        serde_json::Value::Object(_) => "object",
    }
}

fn type_matches(v: &serde_json::Value, ty: &str) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "integer" => v.is_i64() || v.is_u64(),
        "number" => v.is_number(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        _ => false,
    }
}

fn check_node(v: &serde_json::Value, schema: &serde_json::Value, path: &str) -> Result<(), String> {
    if let Some(ty) = schema.get("type") {
        let allowed: Vec<&str> = match ty {
            serde_json::Value::String(s) => vec![s.as_str()],
            serde_json::Value::Array(a) => a.iter().filter_map(|x| x.as_str()).collect(),
            _ => Vec::new(),
        };
        if !allowed.iter().any(|t| type_matches(v, t)) {
            return Err(format!(
                "{path}: expected {}, got {}",
                allowed.join(" or "),
                type_name(v)
            ));
        }
    }
    if let Some(options) = schema.get("enum").and_then(serde_json::Value::as_array) {
        if !options.contains(v) {
            return Err(format!("{path}: value {v} not in enum"));
        }
    }
    if let Some(obj) = v.as_object() {
        if let Some(required) = schema.get("required").and_then(serde_json::Value::as_array) {
            for key in required.iter().filter_map(serde_json::Value::as_str) {
                if !obj.contains_key(key) {
                    return Err(format!("{path}: missing required key '{key}'"));
                }
            }
        }
        let props = schema
            .get("properties")
            .and_then(serde_json::Value::as_object);
        let additional = schema.get("additionalProperties");
        for (key, value) in obj {
            let child_path = format!("{path}.{key}");
            if let Some(prop_schema) = props.and_then(|p| p.get(key)) {
                check_node(value, prop_schema, &child_path)?;
            } else {
                match additional {
                    Some(serde_json::Value::Bool(false)) => {
                        return Err(format!("{path}: unexpected key '{key}'"));
                    }
                    Some(extra @ serde_json::Value::Object(_)) => {
                        check_node(value, extra, &child_path)?;
                    }
                    _ => {}
                }
            }
        }
    }
    if let Some(items) = v.as_array() {
        if let Some(item_schema) = schema.get("items") {
            for (i, item) in items.iter().enumerate() {
                check_node(item, item_schema, &format!("{path}[{i}]"))?;
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Entry points
// ---------------------------------------------------------------------------

#[derive(Debug)]
pub struct DetectOutcome {
    pub bundle: ReportBundle,
    pub calibration_cached: bool,
    pub traces_cached: bool,
}

fn gate_green(
    program: &Program,
    suite: &TestSuite,
    program_id: &str,
    seed: u64,
    limits: &RunLimits,
) -> Result<(), PipelineError> {
    let outcome = run_checked(program, suite, seed, limits);
    if let Some((test, failure)) = outcome.failed.first() {
        return Err(PipelineError::SuiteRed {
            program: program_id.to_string(),
            test: test.clone(),
            failure: failure.clone(),
        });
    }
    Ok(())
}

/// Full detection: amplify, calibrate, trace, compare, report. Expensive
/// stages are cached under `cfg.out` by content key.
pub fn detect(cfg: &PipelineConfig) -> Result<DetectOutcome, PipelineError> {
    let program = corpus::load_program(&cfg.corpus)?;
    let suite = corpus::load_suite(&cfg.corpus)?;
    gate_green(&program, &suite, ORIGINAL_ID, cfg.seed, &cfg.limits)?;

    let stage = build_ats(&program, &suite, cfg)?;
    let manifest = write_ats_files(&cfg.out, &stage)?;

    let source_digest = corpus_digest(&cfg.corpus)?;
    let limits_tag = format!(
        "{}:{}",
        cfg.limits.step_limit,
        cfg.limits.wall.map(|d| d.as_secs()).unwrap_or(0)
    );

    let calibration_key = digest_parts(&[
        "calibrate",
        &source_digest,
        &stage.suite_id,
        &cfg.seed.to_string(),
        &cfg.runs.to_string(),
        &cfg.environments.to_string(),
        &limits_tag,
    ]);
    let (stable, calibration_cached) = cached_json(&cfg.out, "stable", &calibration_key, || {
        calibrate(
            &program,
            &stage.ats,
            &stage.catalog,
            &CalibrationConfig {
                runs_per_environment: cfg.runs,
                environments: cfg.environments,
                seed: cfg.seed,
                limits: cfg.limits,
            },
        )
        .map_err(internal)
    })?;

    let mut programs = vec![(ORIGINAL_ID.to_string(), program.clone())];
    for id in corpus::variant_ids(&cfg.corpus)? {
        programs.push((id.clone(), corpus::load_variant(&cfg.corpus, &id)?));
    }

    let tdr_id = stage.tdr.as_ref().map(|t| t.suite_id.as_str()).unwrap_or("-");
    let trace_key = digest_parts(&[
        "traces",
        &source_digest,
        &stage.suite_id,
        tdr_id,
        &cfg.seed.to_string(),
        &cfg.environments.to_string(),
        &limits_tag,
    ]);
    let (traces, traces_cached) = cached_json(&cfg.out, "traces", &trace_key, || {
        trace_programs(cfg, &stage, &programs)
    })?;
    if !traces_cached {
        write_wire_traces(&cfg.out, &traces)?;
    }

    let covered = measure_coverage(&program, &suite, cfg.seed);
    let coverage_total = instrument_coverage(&program).total();

    let pairs = compare_pairs(cfg, &stage, &stable, &traces)?;
    let summary = summarize_run(cfg, &pairs);

    let original_tests = manifest.originals.len();
    let total_tests = stage.ats.tests().count();
    let bundle = ReportBundle {
        corpus: cfg.corpus.to_string_lossy().into_owned(),
        seed: cfg.seed,
        amplification: AmplificationStats {
            original_tests,
            generated_tests: manifest.generated.len(),
            skipped_transformations: manifest.skipped.len(),
            total_tests,
            multiplier: multiplier_text(original_tests, total_tests),
            counts: manifest.counts,
            points_declared: manifest.points_declared,
            coverage: CoverageStats {
                covered: covered.len(),
                total: coverage_total,
                percent: percent_text(covered.len(), coverage_total),
            },
            tdr_tests: stage.tdr.as_ref().map(|t| t.tests),
        },
        calibration: CalibrationStats {
            runs_per_environment: cfg.runs,
            environments: cfg.environments,
            stable_points: stable.stable.len(),
            discarded_points: stable.discarded.len(),
            unexercised_points: stable.unexercised.len(),
            exec: traces.original_stats,
        },
        pairs,
        summary,
    };

    let value = serde_json::to_value(&bundle).map_err(internal)?;
    validate_report(&value).map_err(|e| internal(format!("report failed its own schema: {e}")))?;
    let rendered_json = serde_json::to_string_pretty(&value).map_err(internal)?;
    write_text(&cfg.out.join("report.json"), &format!("{rendered_json}\n"))?;

    let rendered = render_bundle(&bundle)?;
    write_text(&cfg.out.join("summary.txt"), &rendered.summary)?;
    write_text(&cfg.out.join("amplification.csv"), &rendered.amplification_csv)?;
    write_text(&cfg.out.join("detection.csv"), &rendered.detection_csv)?;

    Ok(DetectOutcome {
        bundle,
        calibration_cached,
        traces_cached,
    })
}

/// Amplify and instrument only; writes the rendered suite and manifest.
pub fn amplify_only(cfg: &PipelineConfig) -> Result<AtsManifest, PipelineError> {
    let program = corpus::load_program(&cfg.corpus)?;
    let suite = corpus::load_suite(&cfg.corpus)?;
    let stage = build_ats(&program, &suite, cfg)?;
    write_ats_files(&cfg.out, &stage)
}

pub struct CalibrateOutcome {
    pub stable: StablePointSet,
    pub cached: bool,
    pub points_declared: usize,
}

/// Amplify, instrument, and calibrate only; persists `stable.json`.
pub fn calibrate_only(cfg: &PipelineConfig) -> Result<CalibrateOutcome, PipelineError> {
    let program = corpus::load_program(&cfg.corpus)?;
    let suite = corpus::load_suite(&cfg.corpus)?;
    gate_green(&program, &suite, ORIGINAL_ID, cfg.seed, &cfg.limits)?;
    let stage = build_ats(&program, &suite, cfg)?;
    write_ats_files(&cfg.out, &stage)?;
    let source_digest = corpus_digest(&cfg.corpus)?;
    let limits_tag = format!(
        "{}:{}",
        cfg.limits.step_limit,
        cfg.limits.wall.map(|d| d.as_secs()).unwrap_or(0)
    );
    let calibration_key = digest_parts(&[
        "calibrate",
        &source_digest,
        &stage.suite_id,
        &cfg.seed.to_string(),
        &cfg.runs.to_string(),
        &cfg.environments.to_string(),
        &limits_tag,
    ]);
    let points_declared = stage.catalog.points_declared();
    let (stable, cached) = cached_json(&cfg.out, "stable", &calibration_key, || {
        calibrate(
            &program,
            &stage.ats,
            &stage.catalog,
            &CalibrationConfig {
                runs_per_environment: cfg.runs,
                environments: cfg.environments,
                seed: cfg.seed,
                limits: cfg.limits,
            },
        )
        .map_err(internal)
    })?;
    Ok(CalibrateOutcome {
        stable,
        cached,
        points_declared,
    })
}

/// Load and re-validate a previously written bundle.
pub fn load_bundle(path: &Path) -> Result<ReportBundle, PipelineError> {
    let text = read_text(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    validate_report(&value)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_value(value)
        .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// Variant forging
// ---------------------------------------------------------------------------

/// Per-variant entry of `variants/ground_truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub kind: String,
    pub transplantation_point: String,
    pub transplant: Option<String>,
    pub bindings: BTreeMap<String, String>,
    pub identity: bool,
    /// Brute-force differential verdict against the original.
    pub diverse: bool,
    pub witness: Option<String>,
    pub self_unstable: usize,
    pub probes: usize,
}

pub struct ForgeReport {
    pub kind: TransplantKind,
    pub accepted: Vec<String>,
    pub sampled: usize,
    pub rejected_uncovered: usize,
    pub rejected_failing: usize,
    pub rejected_build: usize,
    /// Full ground-truth table after merging this run's entries.
    pub ground_truth: BTreeMap<String, GroundTruthEntry>,
}

/// Forge variants of one kind into `<corpus>/variants/<id>/` and refresh the
/// shared ground-truth table with brute-force differential verdicts.
pub fn forge_corpus(
    corpus_root: &Path,
    kind: TransplantKind,
    budget: usize,
    seed: u64,
    limits: &RunLimits,
    grid: &InputGrid,
) -> Result<ForgeReport, PipelineError> {
    let program = corpus::load_program(corpus_root)?;
    let suite = corpus::load_suite(corpus_root)?;
    let outcome = forge::synthesize(&program, &suite, kind, budget, seed, limits).map_err(|e| {
        match e {
            forge::ForgeError::SuiteRed { test, failure } => PipelineError::SuiteRed {
                program: ORIGINAL_ID.to_string(),
                test,
                failure,
            },
            other => internal(other),
        }
    })?;

    let truth_path = corpus_root.join("variants").join("ground_truth.json");
    let mut ground_truth: BTreeMap<String, GroundTruthEntry> = if truth_path.exists() {
        serde_json::from_str(&read_text(&truth_path)?)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", truth_path.display())))?
    } else {
        BTreeMap::new()
    };

    let mut accepted = Vec::new();
    for variant in &outcome.accepted {
        let id = &variant.descriptor.id;
        let dir = corpus_root.join("variants").join(id).join("src");
        corpus::write_sources(&dir, &variant.descriptor.patched_source)?;
        // Reload from disk so the stored sources, not the in-memory patch,
        // are what the oracle judges.
        let forged = corpus::load_variant(corpus_root, id)?;
        let verdict = forge::differential_oracle(&program, &forged, grid, seed, limits);
        ground_truth.insert(
            id.clone(),
            GroundTruthEntry {
                kind: kind.label().to_string(),
                transplantation_point: variant.descriptor.transplantation_point.clone(),
                transplant: variant.descriptor.transplant.clone(),
                bindings: variant.descriptor.bindings.clone(),
                identity: variant.descriptor.identity,
                diverse: verdict.diverse,
                witness: verdict.witness.clone(),
                self_unstable: verdict.self_unstable,
                probes: verdict.probes,
            },
        );
        accepted.push(id.clone());
    }
    let rendered = serde_json::to_string_pretty(&ground_truth).map_err(internal)?;
    write_text(&truth_path, &format!("{rendered}\n"))?;

    Ok(ForgeReport {
        kind,
        accepted,
        sampled: outcome.sampled,
        rejected_uncovered: outcome.rejected_uncovered,
        rejected_failing: outcome.rejected_failing,
        rejected_build: outcome.rejected_build,
        ground_truth,
    })
}

// ===========================================================================
// Tests
// ===========================================================================

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    const CALC_SRC: &str = r#"
class Calc {
    total: int = 0;
    touched: bool = false;

    pub fn add(x: int) {
        this.touched = true;
        this.total = this.total + x;
    }

    pub fn getTotal(): int {
        return this.total;
    }
}
"#;

    const CALC_GUARDED: &str = r#"
class Calc {
    total: int = 0;
    touched: bool = false;

    pub fn add(x: int) {
        this.touched = true;
        this.total = this.total + x;
        if (this.total > 100) {
            this.total = 100;
        }
    }

    pub fn getTotal(): int {
        return this.total;
    }
}
"#;

    const CALC_TEST: &str = r#"
import checks;

test addsSmall() {
    let c: Calc = new Calc();
    c.add(7);
    assertEquals(7, c.getTotal());
}

test addsTwice() {
    let c: Calc = new Calc();
    c.add(60);
    c.add(60);
    assertEquals(120, c.getTotal());
}
"#;

    fn write_corpus(root: &Path, with_variants: bool) {
        fs::create_dir_all(root.join("src")).unwrap();
        fs::create_dir_all(root.join("tests")).unwrap();
        fs::write(root.join("src/Calc.mini"), CALC_SRC).unwrap();
        fs::write(root.join("tests/CalcTest.mini"), CALC_TEST).unwrap();
        if with_variants {
            fs::create_dir_all(root.join("variants/guard/src")).unwrap();
            fs::write(root.join("variants/guard/src/Calc.mini"), CALC_GUARDED).unwrap();
            fs::create_dir_all(root.join("variants/twin/src")).unwrap();
            fs::write(root.join("variants/twin/src/Calc.mini"), CALC_SRC).unwrap();
        }
    }

    fn fast_config(corpus: &Path, out: &Path) -> PipelineConfig {
        RawConfig {
            corpus: Some(corpus.to_path_buf()),
            out: Some(out.to_path_buf()),
            seed: Some(42),
            runs: Some(2),
            environments: Some(1),
            ..RawConfig::default()
        }
        .resolve()
        .unwrap()
    }

    #[test]
    fn config_resolution_fills_defaults_and_sorts_modes() {
        let raw = RawConfig::from_toml(
            "corpus = \"c\"\nout = \"o\"\nseed = 7\nmodes = [\"TDR\", \"full\"]\n",
        )
        .unwrap();
        let cfg = raw.resolve().unwrap();
        assert_eq!(cfg.runs, DEFAULT_RUNS);
        assert_eq!(cfg.environments, DEFAULT_ENVIRONMENTS);
        assert_eq!(cfg.modes, vec![Mode::Full, Mode::Tdr]);
        assert_eq!(cfg.limits.step_limit, DEFAULT_STEP_LIMIT);
        assert_eq!(cfg.limits.wall, Some(Duration::from_secs(DEFAULT_TIMEOUT_SECS)));
    }

    #[test]
    fn config_rejects_missing_seed_bad_mode_and_single_run() {
        let base = RawConfig {
            corpus: Some("c".into()),
            out: Some("o".into()),
            ..RawConfig::default()
        };
        assert!(matches!(
            base.clone().resolve(),
            Err(PipelineError::Config(msg)) if msg.contains("seed")
        ));
        let bad_mode = RawConfig {
            seed: Some(1),
            modes: Some(vec!["WIDE".into()]),
            ..base.clone()
        };
        assert!(matches!(
            bad_mode.resolve(),
            Err(PipelineError::Config(msg)) if msg.contains("WIDE")
        ));
        let one_run = RawConfig {
            seed: Some(1),
            runs: Some(1),
            ..base
        };
        assert!(matches!(
            one_run.resolve(),
            Err(PipelineError::Config(msg)) if msg.contains("runs")
        ));
    }

    #[test]
    fn cli_layer_overrides_file_layer() {
        let file = RawConfig::from_toml("seed = 1\nruns = 5\n").unwrap();
        let flags = RawConfig {
            seed: Some(2),
            ..RawConfig::default()
        };
        let merged = file.overridden_by(flags);
        assert_eq!(merged.seed, Some(2));
        assert_eq!(merged.runs, Some(5));
    }

    #[test]
    fn detect_reports_divergent_variant_and_spares_identical_twin() {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        let out = dir.path().join("out");
        write_corpus(&corpus, true);
        let cfg = fast_config(&corpus, &out);

        let outcome = detect(&cfg).unwrap();
        let bundle = &outcome.bundle;
        assert_eq!(bundle.pairs.len(), 2);
        let guard = bundle.pairs.iter().find(|p| p.variant == "guard").unwrap();
        let twin = bundle.pairs.iter().find(|p| p.variant == "twin").unwrap();
        assert_eq!(guard.modes["FULL"].verdict, Verdict::NvpDiverse);
        assert!(guard.modes["FULL"].count >= 1);
        for (_, summary) in &twin.modes {
            assert_eq!(summary.verdict, Verdict::NotDetected);
            assert_eq!(summary.count, 0);
        }
        assert!(bundle
            .summary
            .lines
            .contains(&"1/2 detected (FULL)".to_string()));

        // artifacts exist and the persisted report passes the schema again
        let report_path = out.join("report.json");
        let value: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&report_path).unwrap()).unwrap();
        validate_report(&value).unwrap();
        assert!(out.join("summary.txt").exists());
        assert!(out.join("detection.csv").exists());
        assert!(out.join("amplification.csv").exists());
        assert!(out.join("ats/manifest.json").exists());
        assert!(out.join("runs").read_dir().unwrap().count() > 0);
    }

    #[test]
    fn identical_runs_into_fresh_directories_are_byte_identical() {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        write_corpus(&corpus, true);
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        detect(&fast_config(&corpus, &out_a)).unwrap();
        detect(&fast_config(&corpus, &out_b)).unwrap();
        for name in ["report.json", "summary.txt", "detection.csv", "amplification.csv"] {
            let a = fs::read(out_a.join(name)).unwrap();
            let b = fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn rerunning_into_same_directory_hits_stage_caches() {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        let out = dir.path().join("out");
        write_corpus(&corpus, true);
        let cfg = fast_config(&corpus, &out);

        let first = detect(&cfg).unwrap();
        assert!(!first.calibration_cached && !first.traces_cached);
        let report_before = fs::read(out.join("report.json")).unwrap();

        let second = detect(&cfg).unwrap();
        assert!(second.calibration_cached && second.traces_cached);
        assert_eq!(report_before, fs::read(out.join("report.json")).unwrap());

        // a different seed invalidates both stages
        let mut reseeded = cfg.clone();
        reseeded.seed = 43;
        let third = detect(&reseeded).unwrap();
        assert!(!third.calibration_cached && !third.traces_cached);
    }

    #[test]
    fn baseline_instrumentation_observes_assertions_only() {
        let program = corpus_program();
        let suite = TestSuite::parse(&[("CalcTest".into(), CALC_TEST.into())]).unwrap();
        let baseline = amplifier::tdr_amplify(&suite, 1);
        let catalog = AccessorCatalog::build(&program);
        let (_, points) = tdr_instrument(&baseline.suite, &baseline.hoisted, &catalog).unwrap();
        assert!(points.points_declared() > 0);
        for point in points.per_test.values().flatten() {
            assert!(matches!(
                point.source,
                PointSource::OriginalAssertionCall | PointSource::ExceptionMessage
            ));
        }
    }

    fn corpus_program() -> Program {
        let dir = TempDir::new().unwrap();
        write_corpus(dir.path(), false);
        corpus::load_program(dir.path()).unwrap()
    }

    #[test]
    fn red_original_suite_stops_detection_with_exit_one() {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        write_corpus(&corpus, false);
        fs::write(
            corpus.join("tests/CalcTest.mini"),
            CALC_TEST.replace("assertEquals(7,", "assertEquals(8,"),
        )
        .unwrap();
        let cfg = fast_config(&corpus, &dir.path().join("out"));
        let err = detect(&cfg).unwrap_err();
        assert!(matches!(err, PipelineError::SuiteRed { .. }));
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn schema_rejects_missing_keys_wrong_types_and_strays() {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        let out = dir.path().join("out");
        write_corpus(&corpus, true);
        detect(&fast_config(&corpus, &out)).unwrap();
        let valid: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();

        let mut missing = valid.clone();
        missing.as_object_mut().unwrap().remove("seed");
        let err = validate_report(&missing).unwrap_err();
        assert!(err.contains("seed"), "{err}");

        let mut wrong_type = valid.clone();
        wrong_type["seed"] = serde_json::json!("42");
        let err = validate_report(&wrong_type).unwrap_err();
        assert!(err.contains("$.seed"), "{err}");

        let mut stray = valid.clone();
        stray
            .as_object_mut()
            .unwrap()
            .insert("timestamp".into(), serde_json::json!(0));
        let err = validate_report(&stray).unwrap_err();
        assert!(err.contains("timestamp"), "{err}");

        let mut bad_verdict = valid;
        bad_verdict["pairs"][0]["modes"]["FULL"]["verdict"] = serde_json::json!("MAYBE");
        assert!(validate_report(&bad_verdict).is_err());
    }

    #[test]
    fn forge_writes_variants_and_merged_ground_truth() {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        write_corpus(&corpus, false);
        let report = forge_corpus(
            &corpus,
            TransplantKind::Delete,
            2,
            9,
            &RunLimits::default(),
            &InputGrid::default(),
        )
        .unwrap();
        assert!(!report.accepted.is_empty());
        for id in &report.accepted {
            assert!(corpus.join("variants").join(id).join("src/Calc.mini").exists());
            let entry = &report.ground_truth[id];
            assert_eq!(entry.kind, "delete");
            assert!(entry.probes > 0);
        }
        let on_disk: BTreeMap<String, GroundTruthEntry> = serde_json::from_str(
            &fs::read_to_string(corpus.join("variants/ground_truth.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(on_disk, report.ground_truth);

        // a second kind merges into the same table instead of replacing it
        let replace = forge_corpus(
            &corpus,
            TransplantKind::Replace,
            1,
            9,
            &RunLimits::default(),
            &InputGrid::default(),
        )
        .unwrap();
        for id in &report.accepted {
            assert!(replace.ground_truth.contains_key(id));
        }
    }

    #[test]
    fn load_bundle_round_trips_written_report() {
        let dir = TempDir::new().unwrap();
        let corpus = dir.path().join("corpus");
        let out = dir.path().join("out");
        write_corpus(&corpus, true);
        let outcome = detect(&fast_config(&corpus, &out)).unwrap();
        let loaded = load_bundle(&out.join("report.json")).unwrap();
        assert_eq!(loaded, outcome.bundle);
        let rendered = render_bundle(&loaded).unwrap();
        assert_eq!(
            rendered.summary,
            fs::read_to_string(out.join("summary.txt")).unwrap()
        );
    }
}
