//! Suite execution against a program variant: trace collection, execution
//! statistics, statement coverage, and the environment model.
//!
//! Runs are in-process interpretations. A test whose body throws before it
//! logs anything (or that exhausts its step or wall-clock budget) is
//! non-executable for the run: it is dropped from the trace set and
//! counted. A throw after at least one record becomes an exception-message
//! record, because a reproducible crash is an observable behavior.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};

use minilang::ast::{PStmt, Program, SourceFile};
use minilang::error::LangError;
use minilang::interp::{ExecEnv, Machine, Observed, RunLimits};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::observer::{exception_point, render_value};
use crate::test_ir::TestSuite;

// ---------------------------------------------------------------------------
// Environment model
// ---------------------------------------------------------------------------

const LOCALES: [&str; 4] = ["fr_FR", "de_DE", "ja_JP", "pt_BR"];
const TIMEZONES: [&str; 4] = [
    "Europe/Paris",
    "America/New_York",
    "Asia/Tokyo",
    "Australia/Sydney",
];

/// Deterministic environment family: index 0 is the base environment,
/// higher indices vary working directory, locale, timezone, and the
/// fixture variables.
pub fn perturb_environment(base: &ExecEnv, index: usize) -> ExecEnv {
    if index == 0 {
        return base.clone();
    }
    let mut env = base.clone();
    env.working_dir = format!("/sandbox/work/env{index}");
    env.locale = LOCALES[(index - 1) % LOCALES.len()].to_string();
    env.timezone = TIMEZONES[(index - 1) % TIMEZONES.len()].to_string();
    env.vars
        .insert("FIXTURE_HOME".to_string(), format!("/home/fixture/env{index}"));
    env.vars
        .insert("FIXTURE_TMPDIR".to_string(), format!("/tmp/fixture/env{index}"));
    env
}

/// `e<env>r<run>`, the run identity used in trace records.
pub fn run_id(env_index: usize, run_index: usize) -> String {
    format!("e{env_index}r{run_index}")
}

/// Entropy stream for one test execution. The test name participates so
/// that deleting a neighboring test can never shift another test's stream.
pub fn derive_entropy(seed: u64, env_index: usize, run_index: usize, test: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((env_index as u64).to_le_bytes());
    h.update((run_index as u64).to_le_bytes());
    h.update(test.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is long enough"))
}

// ---------------------------------------------------------------------------
// Traces and stats
// ---------------------------------------------------------------------------

/// All records of one (program, suite, environment, run) execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSet {
    pub program_id: String,
    /// Fingerprint of the suite that produced these records; empty when the
    /// caller did not pin one.
    pub suite_id: String,
    pub env_index: usize,
    pub run_index: usize,
    /// Test name -> (point id, rendered value) in execution order. Every
    /// non-dropped test has an entry, even with zero records.
    pub per_test: BTreeMap<String, Vec<(String, String)>>,
}

impl TraceSet {
    pub fn run_id(&self) -> String {
        run_id(self.env_index, self.run_index)
    }

    /// One record per line: `run_id \t test_name \t point_id \t value`.
    pub fn to_lines(&self) -> String {
        let rid = self.run_id();
        let mut out = String::new();
        for (test, records) in &self.per_test {
            for (point, value) in records {
                out.push_str(&rid);
                out.push('\t');
                out.push_str(test);
                out.push('\t');
                out.push_str(point);
                out.push('\t');
                out.push_str(value);
                out.push('\n');
            }
        }
        out
    }

    pub fn record_count(&self) -> usize {
        self.per_test.values().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExecStats {
    /// Zero-argument entry tests in the suite.
    pub tests_declared: usize,
    /// Dynamic test invocations, helper tests included.
    pub tests_executed: usize,
    pub points_declared: usize,
    /// Total trace record count.
    pub points_executed: usize,
    pub dropped_nonexecutable: usize,
}

// ---------------------------------------------------------------------------
// Suite execution
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub program_id: String,
    pub suite_id: String,
    pub env_index: usize,
    pub run_index: usize,
    pub seed: u64,
    pub limits: RunLimits,
}

impl RunSpec {
    pub fn new(program_id: &str, env_index: usize, run_index: usize, seed: u64) -> Self {
        RunSpec {
            program_id: program_id.to_string(),
            suite_id: String::new(),
            env_index,
            run_index,
            seed,
            limits: RunLimits::default(),
        }
    }

    pub fn with_suite(mut self, suite_id: &str) -> Self {
        self.suite_id = suite_id.to_string();
        self
    }
}

/// Content fingerprint of a rendered suite, for trace compatibility checks.
pub fn suite_fingerprint(suite: &TestSuite) -> String {
    let mut h = Sha256::new();
    for (name, text) in suite.render().expect("suite renders") {
        h.update(name.as_bytes());
        h.update([0]);
        h.update(text.as_bytes());
        h.update([0]);
    }
    let digest = h.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Run every entry test of an instrumented suite, sequentially in
/// declaration order, each on a fresh machine.
pub fn run_suite(
    program: &Program,
    suite: &TestSuite,
    points_declared: usize,
    spec: &RunSpec,
) -> (TraceSet, ExecStats) {
    let env = perturb_environment(&ExecEnv::base(), spec.env_index);
    let tests = suite.test_set();
    let mut per_test = BTreeMap::new();
    let mut stats = ExecStats {
        points_declared,
        ..ExecStats::default()
    };

    for (_, test) in suite.entry_tests() {
        stats.tests_declared += 1;
        let entropy = derive_entropy(spec.seed, spec.env_index, spec.run_index, &test.name);
        let mut records: Vec<(String, String)> = Vec::new();
        let mut sink = |point: &str, observed: Observed| {
            records.push((point.to_string(), render_value(&observed)));
        };
        let run = Machine::new(program, &tests, &env, entropy, spec.limits.clone())
            .with_observe_sink(&mut sink)
            .run_entry(&test.name);
        match run.outcome {
            Ok(()) => {}
            Err(LangError::StepLimit) | Err(LangError::WallClock) => {
                stats.dropped_nonexecutable += 1;
                continue;
            }
            Err(error) => {
                if records.is_empty() {
                    stats.dropped_nonexecutable += 1;
                    continue;
                }
                records.push((
                    exception_point(&test.name).id.encode(),
                    render_value(&Observed::Thrown(error.message())),
                ));
            }
        }
        stats.tests_executed += run.tests_invoked as usize;
        stats.points_executed += records.len();
        per_test.insert(test.name.clone(), records);
    }

    (
        TraceSet {
            program_id: spec.program_id.clone(),
            suite_id: spec.suite_id.clone(),
            env_index: spec.env_index,
            run_index: spec.run_index,
            per_test,
        },
        stats,
    )
}

/// Outcome of running a plain (assertion-carrying) suite.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteOutcome {
    pub tests_run: usize,
    /// (test name, failure text) for every red test.
    pub failed: Vec<(String, String)>,
}

impl SuiteOutcome {
    pub fn all_green(&self) -> bool {
        self.failed.is_empty()
    }
}

/// Run an original suite with its assertions live, in the base environment.
pub fn run_checked(
    program: &Program,
    suite: &TestSuite,
    seed: u64,
    limits: &RunLimits,
) -> SuiteOutcome {
    let tests = suite.test_set();
    let env = ExecEnv::base();
    let mut outcome = SuiteOutcome {
        tests_run: 0,
        failed: Vec::new(),
    };
    for (_, test) in suite.entry_tests() {
        outcome.tests_run += 1;
        let entropy = derive_entropy(seed, 0, 0, &test.name);
        let run = Machine::new(program, &tests, &env, entropy, limits.clone()).run_entry(&test.name);
        if let Err(error) = run.outcome {
            outcome.failed.push((test.name.clone(), error.to_string()));
        }
    }
    outcome
}

// ---------------------------------------------------------------------------
// Statement coverage
// ---------------------------------------------------------------------------

/// Identity of one program statement for coverage reporting.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StmtKey {
    pub file: String,
    /// Pre-order statement id within the file, matching its enumeration
    /// position.
    pub local_id: usize,
}

#[derive(Debug, Clone)]
pub struct CoverageMap {
    /// The program with a counter probe in front of every statement.
    pub instrumented: Program,
    /// Global probe id -> statement key.
    pub keys: Vec<StmtKey>,
}

impl CoverageMap {
    pub fn total(&self) -> usize {
        self.keys.len()
    }
}

fn inject_body(body: &[PStmt], next: &mut u32, keys: &mut Vec<StmtKey>, file: &str) -> Vec<PStmt> {
    let mut out = Vec::with_capacity(body.len() * 2);
    for stmt in body {
        let id = *next;
        *next += 1;
        keys.push(StmtKey {
            file: file.to_string(),
            local_id: keys
                .iter()
                .rev()
                .take_while(|k| k.file == file)
                .count(),
        });
        out.push(PStmt::CovMark(id));
        let rebuilt = match stmt {
            PStmt::If { cond, then, els } => PStmt::If {
                cond: cond.clone(),
                then: inject_body(then, next, keys, file),
                els: inject_body(els, next, keys, file),
            },
            PStmt::While { cond, body } => PStmt::While {
                cond: cond.clone(),
                body: inject_body(body, next, keys, file),
            },
            PStmt::For {
                var,
                from,
                to,
                body,
            } => PStmt::For {
                var: var.clone(),
                from: from.clone(),
                to: to.clone(),
                body: inject_body(body, next, keys, file),
            },
            other => other.clone(),
        };
        out.push(rebuilt);
    }
    out
}

/// Put a coverage probe in front of every statement, pre-order, file by
/// file. Probe ids equal each statement's enumeration position offset by
/// the preceding files' statement counts.
pub fn instrument_coverage(program: &Program) -> CoverageMap {
    let mut next = 0;
    let mut keys = Vec::new();
    let files = program
        .files
        .iter()
        .map(|file| SourceFile {
            name: file.name.clone(),
            classes: file
                .classes
                .iter()
                .map(|class| minilang::ast::ClassDecl {
                    name: class.name.clone(),
                    fields: class.fields.clone(),
                    methods: class
                        .methods
                        .iter()
                        .map(|m| minilang::ast::MethodDecl {
                            public: m.public,
                            name: m.name.clone(),
                            params: m.params.clone(),
                            ret: m.ret.clone(),
                            body: inject_body(&m.body, &mut next, &mut keys, &file.name),
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect();
    CoverageMap {
        instrumented: Program { files },
        keys,
    }
}

/// Statement ids executed at least once by the suite's entry tests. Tests
/// that throw still contribute the statements they reached.
pub fn measure_coverage(program: &Program, suite: &TestSuite, seed: u64) -> BTreeSet<u32> {
    let map = instrument_coverage(program);
    let tests = suite.test_set();
    let env = ExecEnv::base();
    let mut covered = BTreeSet::new();
    for (_, test) in suite.entry_tests() {
        let entropy = derive_entropy(seed, 0, 0, &test.name);
        let mut sink = |id: u32| {
            covered.insert(id);
        };
        let _ = Machine::new(
            &map.instrumented,
            &tests,
            &env,
            entropy,
            RunLimits::default(),
        )
        .with_coverage_sink(&mut sink)
        .run_entry(&test.name);
    }
    covered
}

// ---------------------------------------------------------------------------
// Worker pool
// ---------------------------------------------------------------------------

/// Worker count for parallel jobs: NVPDETECT_WORKERS when set, otherwise
/// the machine's parallelism, always clamped to the job count.
pub fn worker_count(jobs: usize) -> usize {
    let configured = std::env::var("NVPDETECT_WORKERS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|n| *n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        });
    configured.clamp(1, jobs.max(1))
}

/// Apply `f` to every item on a scoped worker pool, preserving input order
/// in the results.
pub fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = worker_count(items.len());
    if workers <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = AtomicUsize::new(0);
    let mut results: Vec<Option<R>> = (0..items.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                scope.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= items.len() {
                            break;
                        }
                        out.push((i, f(&items[i])));
                    }
                    out
                })
            })
            .collect();
        for handle in handles {
            for (i, r) in handle.join().expect("worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    results
        .into_iter()
        .map(|r| r.expect("every index visited"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observer::{instrument_suite, AccessorCatalog};
    use minilang::parser;
    use std::collections::BTreeMap as Map;

    const PROGRAM: &str = r#"class Counter {
    count: int = 0;

    pub fn getCount(): int {
        return this.count;
    }

    pub fn isEmpty(): bool {
        return this.count == 0;
    }

    pub fn add(n: int): void {
        this.count = this.count + n;
    }

    pub fn boom(): void {
        throw "kaboom";
    }

    pub fn spin(): void {
        while (true) {
            this.count = this.count + 1;
        }
    }
}
"#;

    fn program() -> Program {
        let file = parser::parse_program_file("counter", PROGRAM).unwrap();
        Program { files: vec![file] }
    }

    fn instrumented(src: &str) -> (TestSuite, usize) {
        let suite = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let catalog = AccessorCatalog::build(&program());
        let (out, points) = instrument_suite(&suite, &Map::new(), &catalog).unwrap();
        (out, points.points_declared())
    }

    const HAPPY: &str = r#"test tAdd() {
    let c: Counter = new Counter();
    c.add(2);
}

test tNothing() {
    let x: int = 1;
    x + 1;
}
"#;

    #[test]
    fn run_suite_collects_traces_and_stats() {
        let (suite, declared) = instrumented(HAPPY);
        let (traces, stats) = run_suite(
            &program(),
            &suite,
            declared,
            &RunSpec::new("original", 0, 0, 7),
        );
        assert_eq!(stats.tests_declared, 2);
        assert_eq!(stats.tests_executed, 2);
        assert_eq!(stats.dropped_nonexecutable, 0);
        assert_eq!(stats.points_executed, traces.record_count());
        let add_records = &traces.per_test["tAdd"];
        assert_eq!(add_records.len(), 2, "getCount and isEmpty");
        assert!(add_records.iter().any(|(_, v)| v == "2"));
        assert!(add_records.iter().any(|(_, v)| v == "false"));
        // zero-record tests still appear
        assert!(traces.per_test["tNothing"].is_empty());
    }

    #[test]
    fn identical_specs_reproduce_identical_traces() {
        let (suite, declared) = instrumented(HAPPY);
        let spec = RunSpec::new("original", 1, 4, 99);
        let (a, _) = run_suite(&program(), &suite, declared, &spec);
        let (b, _) = run_suite(&program(), &suite, declared, &spec);
        assert_eq!(a, b);
        assert_eq!(a.to_lines(), b.to_lines());
    }

    #[test]
    fn throw_after_records_becomes_an_exception_record() {
        let src = r#"test tBoom() {
    let c: Counter = new Counter();
    c.add(1);
    observe("tBoom|s2|c|getCount()|0", c.getCount());
    c.boom();
}
"#;
        let suite = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let (traces, stats) = run_suite(&program(), &suite, 2, &RunSpec::new("p", 0, 0, 1));
        assert_eq!(stats.dropped_nonexecutable, 0);
        let records = &traces.per_test["tBoom"];
        assert_eq!(records.len(), 2);
        assert_eq!(records[1].0, "tBoom|s0||!exception|0");
        assert_eq!(records[1].1, "thrown:kaboom");
    }

    #[test]
    fn throw_before_any_record_drops_the_test() {
        let src = r#"test tDead() {
    let c: Counter = new Counter();
    c.boom();
    observe("tDead|s2|c|getCount()|0", c.getCount());
}
"#;
        let suite = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let (traces, stats) = run_suite(&program(), &suite, 1, &RunSpec::new("p", 0, 0, 1));
        assert_eq!(stats.dropped_nonexecutable, 1);
        assert_eq!(stats.tests_executed, 0);
        assert!(!traces.per_test.contains_key("tDead"));
    }

    #[test]
    fn budget_exhaustion_drops_the_test() {
        let src = r#"test tSpin() {
    let c: Counter = new Counter();
    observe("tSpin|s1|c|getCount()|0", c.getCount());
    c.spin();
}
"#;
        let suite = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let mut spec = RunSpec::new("p", 0, 0, 1);
        spec.limits = RunLimits {
            step_limit: 10_000,
            wall: None,
        };
        let (traces, stats) = run_suite(&program(), &suite, 1, &spec);
        assert_eq!(stats.dropped_nonexecutable, 1);
        assert!(traces.per_test.is_empty(), "records are discarded");
    }

    #[test]
    fn traces_of_a_test_ignore_suite_neighbors() {
        let (both, declared) = instrumented(HAPPY);
        let only = {
            let mut s = both.clone();
            s.files[0].tests.retain(|t| t.name == "tAdd");
            s
        };
        let spec = RunSpec::new("p", 0, 0, 123);
        let (full, _) = run_suite(&program(), &both, declared, &spec);
        let (solo, _) = run_suite(&program(), &only, declared, &spec);
        assert_eq!(full.per_test["tAdd"], solo.per_test["tAdd"]);
    }

    #[test]
    fn trace_lines_use_the_tab_separated_format() {
        let (suite, declared) = instrumented(
            "test tAdd() { let c: Counter = new Counter(); c.add(2); }",
        );
        let spec = RunSpec::new("p", 1, 2, 7);
        let (traces, _) = run_suite(&program(), &suite, declared, &spec);
        let lines = traces.to_lines();
        let first = lines.lines().next().unwrap();
        let fields: Vec<&str> = first.split('\t').collect();
        assert_eq!(fields.len(), 4);
        assert_eq!(fields[0], "e1r2");
        assert_eq!(fields[1], "tAdd");
        assert!(fields[2].starts_with("tAdd|s"));
    }

    #[test]
    fn environments_differ_and_index_zero_is_base() {
        let base = ExecEnv::base();
        assert_eq!(perturb_environment(&base, 0), base);
        let one = perturb_environment(&base, 1);
        let two = perturb_environment(&base, 2);
        assert_ne!(one.working_dir, base.working_dir);
        assert_ne!(one.locale, two.locale);
        assert_ne!(one.timezone, two.timezone);
        assert_ne!(one.vars["FIXTURE_TMPDIR"], two.vars["FIXTURE_TMPDIR"]);
    }

    #[test]
    fn coverage_counts_executed_statements_only() {
        let suite = TestSuite::parse(&[(
            "T".to_string(),
            "test t() { let c: Counter = new Counter(); c.add(1); }".to_string(),
        )])
        .unwrap();
        let covered = measure_coverage(&program(), &suite, 3);
        let map = instrument_coverage(&program());
        assert!(!covered.is_empty());
        assert!(covered.len() < map.total(), "boom/spin bodies unreached");
        let empty = TestSuite::parse(&[("T".to_string(), String::new())]);
        // an empty source parses to zero tests
        let empty = empty.unwrap();
        assert!(measure_coverage(&program(), &empty, 3).is_empty());
    }

    #[test]
    fn amplification_never_shrinks_coverage() {
        let src = r#"import checks;

test t() {
    let c: Counter = new Counter();
    c.add(3);
    assertEquals(3, c.getCount());
}
"#;
        let suite = TestSuite::parse(&[("T".to_string(), src.to_string())]).unwrap();
        let amplified = crate::amplifier::amplify(&suite, 5);
        let original = measure_coverage(&program(), &suite, 3);
        let bigger = measure_coverage(&program(), &amplified.suite, 3);
        assert!(original.is_subset(&bigger));
    }

    #[test]
    fn probe_ids_match_enumeration_positions() {
        let map = instrument_coverage(&program());
        let file = &program().files[0];
        assert_eq!(map.keys.len(), minilang::ast::enumerate_stmts(file).len());
        for (i, key) in map.keys.iter().enumerate() {
            assert_eq!(key.local_id, i, "single-file ids are positions");
        }
    }

    #[test]
    fn parallel_map_preserves_order() {
        let items: Vec<usize> = (0..100).collect();
        let doubled = parallel_map(&items, |n| n * 2);
        assert_eq!(doubled, (0..100).map(|n| n * 2).collect::<Vec<_>>());
    }
}
