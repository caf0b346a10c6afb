//! Trace comparison across program variants: divergence counting,
//! diversity verdicts, and attribution of detections to input-space versus
//! observation-space amplification.
//!
//! A point diverges when its rendered value sequences differ between the
//! two traces, presence/absence asymmetry included. Points discarded by
//! calibration never contribute. Two variants are diverse exactly when at
//! least one stable point diverges in at least one environment.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::executor::TraceSet;
use crate::flake_filter::{value_sequences, StablePointSet};
use crate::observer::{PointCatalog, PointId, PointSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    NvpDiverse,
    NotDetected,
}

impl Verdict {
    /// The verdict is a pure function of the divergence count.
    pub fn from_count(count: usize) -> Verdict {
        if count >= 1 {
            Verdict::NvpDiverse
        } else {
            Verdict::NotDetected
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Mode {
    Full,
    InputOnly,
    ObservationOnly,
    Tdr,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Full, Mode::InputOnly, Mode::ObservationOnly, Mode::Tdr];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergingPoint {
    pub point: String,
    pub values_a: Vec<String>,
    pub values_b: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub pair: (String, String),
    pub env_index: usize,
    pub mode: Mode,
    /// Sorted by point id.
    pub diverging_points: Vec<DivergingPoint>,
    pub count: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("traces come from different suites ({a} vs {b})")]
    TraceMismatch { a: String, b: String },
    #[error("traces come from different environments ({a} vs {b})")]
    EnvironmentMismatch { a: usize, b: usize },
    #[error("no pair reports to average")]
    EmptySet,
}

/// Compare two trace sets point by point over the calibrated-usable points.
pub fn compare(
    a: &TraceSet,
    b: &TraceSet,
    stable: &StablePointSet,
    mode: Mode,
) -> Result<DivergenceReport, CompareError> {
    if !a.suite_id.is_empty() && !b.suite_id.is_empty() && a.suite_id != b.suite_id {
        return Err(CompareError::TraceMismatch {
            a: a.suite_id.clone(),
            b: b.suite_id.clone(),
        });
    }
    if a.env_index != b.env_index {
        return Err(CompareError::EnvironmentMismatch {
            a: a.env_index,
            b: b.env_index,
        });
    }
    let seq_a = value_sequences(a);
    let seq_b = value_sequences(b);
    let universe: BTreeSet<&String> = seq_a.keys().chain(seq_b.keys()).collect();
    let empty: Vec<String> = Vec::new();
    let mut diverging_points = Vec::new();
    for point in universe {
        if !stable.is_usable(point) {
            continue;
        }
        let va = seq_a.get(point).unwrap_or(&empty);
        let vb = seq_b.get(point).unwrap_or(&empty);
        if va != vb {
            diverging_points.push(DivergingPoint {
                point: point.clone(),
                values_a: va.clone(),
                values_b: vb.clone(),
            });
        }
    }
    let count = diverging_points.len();
    Ok(DivergenceReport {
        pair: (a.program_id.clone(), b.program_id.clone()),
        env_index: a.env_index,
        mode,
        diverging_points,
        count,
        verdict: Verdict::from_count(count),
    })
}

/// Arithmetic mean of per-pair divergence counts.
pub fn mean_divergence(counts: &[usize]) -> Result<f64, CompareError> {
    if counts.is_empty() {
        return Err(CompareError::EmptySet);
    }
    Ok(counts.iter().sum::<usize>() as f64 / counts.len() as f64)
}

/// A pair is diverse when any environment shows a divergence; its
/// representative count is the largest one seen.
pub fn pair_summary(reports: &[DivergenceReport]) -> (usize, Verdict) {
    let count = reports.iter().map(|r| r.count).max().unwrap_or(0);
    (count, Verdict::from_count(count))
}

// ---------------------------------------------------------------------------
// Ablation
// ---------------------------------------------------------------------------

fn point_source(catalog: &PointCatalog, point: &str) -> Option<PointSource> {
    let id = PointId::decode(point)?;
    catalog.find(&id).map(|p| p.source)
}

/// Keep only assertion-derived records (original assertion calls and
/// exception messages) across the whole suite: what amplified inputs alone
/// can show.
pub fn project_input(traces: &TraceSet, catalog: &PointCatalog) -> TraceSet {
    let mut out = traces.clone();
    for records in out.per_test.values_mut() {
        records.retain(|(point, _)| {
            matches!(
                point_source(catalog, point),
                Some(PointSource::OriginalAssertionCall) | Some(PointSource::ExceptionMessage)
            )
        });
    }
    out
}

/// Keep only the original tests' records, with their full instrumentation:
/// what richer observation alone can show.
pub fn project_observation(traces: &TraceSet, original_tests: &BTreeSet<String>) -> TraceSet {
    let mut out = traces.clone();
    out.per_test.retain(|test, _| original_tests.contains(test));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReports {
    pub full: DivergenceReport,
    pub input_only: DivergenceReport,
    pub observation_only: DivergenceReport,
}

/// Compare one pair in all three attribution modes. The projections filter
/// whole points (or whole tests) out of the full traces, so every
/// projected divergence is also a full-mode divergence.
pub fn ablate(
    a: &TraceSet,
    b: &TraceSet,
    stable: &StablePointSet,
    catalog: &PointCatalog,
    original_tests: &BTreeSet<String>,
) -> Result<ModeReports, CompareError> {
    let full = compare(a, b, stable, Mode::Full)?;
    let input_only = compare(
        &project_input(a, catalog),
        &project_input(b, catalog),
        stable,
        Mode::InputOnly,
    )?;
    let observation_only = compare(
        &project_observation(a, original_tests),
        &project_observation(b, original_tests),
        stable,
        Mode::ObservationOnly,
    )?;
    Ok(ModeReports {
        full,
        input_only,
        observation_only,
    })
}
