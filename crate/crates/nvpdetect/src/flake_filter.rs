//! Calibration: repeated runs of the instrumented suite on the original
//! program, across perturbed environments, to find observation points whose
//! values vary naturally. Those points are discarded before any variant
//! comparison so that clock reads, random numbers, and path-dependent
//! values can never masquerade as computational diversity.

use std::collections::{BTreeMap, BTreeSet};

use minilang::ast::Program;
use minilang::interp::RunLimits;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::{parallel_map, run_id, run_suite, RunSpec, TraceSet};
use crate::observer::PointCatalog;
use crate::test_ir::TestSuite;

#[derive(Debug, Clone)]
pub struct CalibrationConfig {
    /// Repetitions inside each environment; at least 2 so variation can
    /// show at all.
    pub runs_per_environment: usize,
    /// Environment perturbations; index 0 is the base environment.
    pub environments: usize,
    pub seed: u64,
    pub limits: RunLimits,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            runs_per_environment: 30,
            environments: 3,
            seed: 0,
            limits: RunLimits::default(),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CalibrationError {
    #[error("calibration needs at least 2 runs per environment, got {0}")]
    TooFewRuns(usize),
    #[error("calibration needs at least 1 environment, got {0}")]
    NoEnvironments(usize),
}

/// Why a point was discarded: the first pair of runs whose value sequences
/// disagree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardEvidence {
    pub run_a: String,
    pub run_b: String,
    pub values_a: Vec<String>,
    pub values_b: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StablePointSet {
    pub stable: BTreeSet<String>,
    pub discarded: BTreeMap<String, DiscardEvidence>,
    /// Declared points that never produced a record during calibration.
    /// Treated as stable by default, but reported so coverage gaps stay
    /// visible.
    pub unexercised: BTreeSet<String>,
    /// Environments in which each executed point produced records.
    pub exercised_envs: BTreeMap<String, BTreeSet<usize>>,
}

impl StablePointSet {
    /// Whether a point may contribute to divergence counting.
    pub fn is_usable(&self, point: &str) -> bool {
        !self.discarded.contains_key(point)
    }
}

/// Per-point value sequences of one run, in record order.
pub fn value_sequences(traces: &TraceSet) -> BTreeMap<String, Vec<String>> {
    let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for records in traces.per_test.values() {
        for (point, value) in records {
            out.entry(point.clone()).or_default().push(value.clone());
        }
    }
    out
}

/// Run the instrumented suite `runs × environments` times on the original
/// program and classify every declared point. A point is discarded iff its
/// value sequence differs between any two runs, environments included;
/// absence in one run and presence in another is a difference.
pub fn calibrate(
    program: &Program,
    suite: &TestSuite,
    catalog: &PointCatalog,
    cfg: &CalibrationConfig,
) -> Result<StablePointSet, CalibrationError> {
    if cfg.runs_per_environment < 2 {
        return Err(CalibrationError::TooFewRuns(cfg.runs_per_environment));
    }
    if cfg.environments < 1 {
        return Err(CalibrationError::NoEnvironments(cfg.environments));
    }

    // environments in parallel, runs within one environment sequential
    let envs: Vec<usize> = (0..cfg.environments).collect();
    let declared = catalog.points_declared();
    let per_env: Vec<Vec<(String, BTreeMap<String, Vec<String>>)>> = parallel_map(&envs, |&env| {
        (0..cfg.runs_per_environment)
            .map(|run| {
                let spec = RunSpec {
                    program_id: "original".to_string(),
                    suite_id: String::new(),
                    env_index: env,
                    run_index: run,
                    seed: cfg.seed,
                    limits: cfg.limits.clone(),
                };
                let (traces, _) = run_suite(program, suite, declared, &spec);
                (run_id(env, run), value_sequences(&traces))
            })
            .collect()
    });

    let runs: Vec<(usize, String, BTreeMap<String, Vec<String>>)> = envs
        .iter()
        .zip(per_env)
        .flat_map(|(&env, list)| {
            list.into_iter()
                .map(move |(rid, seqs)| (env, rid, seqs))
        })
        .collect();

    let mut universe: BTreeSet<String> = BTreeSet::new();
    for (_, _, seqs) in &runs {
        universe.extend(seqs.keys().cloned());
    }

    let empty: Vec<String> = Vec::new();
    let mut out = StablePointSet::default();
    for point in &universe {
        let mut envs_seen = BTreeSet::new();
        let mut first: Option<(&str, &Vec<String>)> = None;
        let mut evidence = None;
        for (env, rid, seqs) in &runs {
            let seq = seqs.get(point).unwrap_or(&empty);
            if !seq.is_empty() {
                envs_seen.insert(*env);
            }
            match first {
                None => first = Some((rid, seq)),
                Some((first_rid, first_seq)) => {
                    if evidence.is_none() && seq != first_seq {
                        evidence = Some(DiscardEvidence {
                            run_a: first_rid.to_string(),
                            run_b: rid.clone(),
                            values_a: first_seq.clone(),
                            values_b: seq.clone(),
                        });
                    }
                }
            }
        }
        out.exercised_envs.insert(point.clone(), envs_seen);
        match evidence {
            Some(e) => {
                out.discarded.insert(point.clone(), e);
            }
            None => {
                out.stable.insert(point.clone());
            }
        }
    }

    for points in catalog.per_test.values() {
        for p in points {
            let encoded = p.id.encode();
            if !universe.contains(&encoded) {
                out.unexercised.insert(encoded);
            }
        }
    }
    Ok(out)
}
