//! Computational layer: drives per-interval power flows over daily profiles
//! for every month and EV scale factor, and derives comparative metrics.

mod compare;
mod network;
mod study;

use thiserror::Error;

pub use compare::{
    compare_scenarios, voltage_range, worst_swing_month, MonthComparison, Selector, StepDelta,
    SwingRecord,
};
pub use network::PreparedNetwork;
pub use study::{
    run_day, run_study, scenario_label, solve_step, DayResult, FailureKind, StepFailure,
    StepOutcome, StudyOptions, StudyResult, StudyView, BASE_LABEL,
};

use crate::ingest::IngestError;
use crate::network::{BusId, UnitError};
use crate::powerflow::AdmittanceError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("network is invalid: {0}")]
    InvalidNetwork(String),
    #[error(transparent)]
    Units(#[from] UnitError),
    #[error(transparent)]
    Admittance(#[from] AdmittanceError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("profile references bus {0} which is not in the network")]
    BusMismatch(BusId),
    #[error("scenario {0} is not present in the study")]
    MissingScenario(String),
    #[error("month {0} is not present in the study")]
    MissingMonth(u32),
    #[error("unknown selector: {0}")]
    UnknownSelector(String),
    #[error("{0}")]
    Invalid(String),
}
