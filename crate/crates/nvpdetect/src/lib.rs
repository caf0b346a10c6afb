//! Toolchain for detecting computational diversity between program variants.
//!
//! The pipeline amplifies a unit-test suite into a large space of slightly
//! perturbed tests, instruments them with observation points drawn from the
//! program's public surface, calibrates away naturally random points by
//! re-running under perturbed environments, and then diffs the value traces
//! of two variants point by point. Two variants count as diverse exactly when
//! at least one amplified test observes a different value sequence on at
//! least one stable point.

pub mod amplifier;
pub mod corpus;
pub mod divergence;
pub mod executor;
pub mod flake_filter;
pub mod forge;
pub mod observer;
pub mod pipeline;
pub mod test_ir;
pub mod testgen;
