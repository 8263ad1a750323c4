//! Scenario runner for `mcfc-core`: spec files, result records, pattern and
//! trace exports, trade-off sweeps, failure-pattern scaling and batch runs.

pub mod baseline;
pub mod harness;
pub mod scenario;

pub use harness::{
    batch_run, frontier, run_oracle, run_scenario, scale_failure_scenario, sig6, tradeoff_sweep,
    ArrayMetrics, FrontierPoint, OracleRecord, ResultRecord, RunOptions, RunOutput, SummaryRow,
    SweepPoint, SweepReport,
};
pub use scenario::{BuiltScenario, ScenarioSpec, SolverOverrides, TaperSpec};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] mcfc_core::Error),
}

impl HarnessError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, HarnessError::Core(e) if e.is_infeasible())
    }
}

impl From<std::io::Error> for HarnessError {
    fn from(e: std::io::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for HarnessError {
    fn from(e: serde_json::Error) -> Self {
        HarnessError::Io(e.to_string())
    }
}
