//! Minimum-cardinality correction of failed elements in linear antenna arrays.
//!
//! The crate models a linear array and its far-field pattern, synthesizes
//! reference tapers, and corrects a faulty array by changing as few working
//! excitations as possible while keeping the sidelobe level under a target.
//! [`cp::cp_correct`] is the greedy correction loop built on the minimum-l1
//! solver in [`solver`]; [`oracle::exhaustive_min`] gives the true minimum
//! by enumeration for small arrays.

pub mod array;
pub mod cp;
pub mod error;
pub mod oracle;
pub mod solver;
pub mod taper;

pub use array::{
    array_factor, beamwidth, dynamic_range, hpbw, max_sll, pattern_db, sidelobe_region, sll_db,
    uniform_positions, AngularRegion, ArrayGeometry, Excitations, FailureScenario, MetricKind,
    MetricSpec, DB_FLOOR, DEFAULT_SPACING, PATTERN_GRID_POINTS, REGION_GRID_POINTS,
};
pub use cp::{
    cp_correct, cp_correct_with, least_important, make_trial, CorrectionResult, CorrectionState,
    ImportanceRule, SmallestMagnitude, TraceEntry, TraceEvent,
};
pub use error::{Error, Result};
pub use oracle::{exhaustive_min, exhaustive_min_with_budget, OracleOutcome, OracleResult};
pub use solver::{l0_norm, l1_norm, solve_constrained_l1, SolveContext, SolverConfig, ZeroMask};
pub use taper::{apply_failures, corrected_weights, dolph_chebyshev};
