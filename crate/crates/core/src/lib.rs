//! Two-stage group testing.
//!
//! A first stage tests every row of a constant-weight random pooling matrix in
//! parallel. The outcome vector defines a candidate hypergraph whose edges are
//! all defective sets consistent with it; the second stage tests the
//! non-isolated vertices of that hypergraph one by one.
//!
//! Modules:
//! - [`design`]: constant-weight matrix generation and the matrix text format.
//! - [`pooling`]: outcome vectors and the hidden-defective oracle.
//! - [`decoder`]: candidate hypergraph construction.
//! - [`planner`]: the full two-stage algorithm and its partial-recovery variant.
//! - [`certify`]: structural certificates (bad configurations, good codes).
//! - [`rates`]: numerical evaluation of the achievable-rate lower bounds.
//! - [`experiment`]: reproducible Monte Carlo harness.
//!
//! Item indices are 0-based in the API and 1-based in every JSON output.

pub mod bits;
pub mod certify;
pub mod decoder;
pub mod design;
pub mod error;
pub mod experiment;
pub mod numerics;
pub mod planner;
pub mod pooling;
pub mod rates;
pub mod seed;
pub mod subsets;

pub use bits::BitVec;
pub use certify::{BadConfiguration, GoodCodeReport};
pub use decoder::CandidateHypergraph;
pub use design::{Mode, TestMatrix};
pub use error::{Error, Result};
pub use planner::TwoStageResult;
pub use pooling::{DefectiveOracle, OutcomeVector};
pub use rates::{RateGrid, RateQuery, RateResult};
