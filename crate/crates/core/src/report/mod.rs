//! Presentation layer: voltage trajectories, overload and loss summaries,
//! flow comparisons, CSV tables with a hashed manifest, and SVG charts.

mod charts;
mod metrics;
mod persisted;
mod tables;

use std::path::PathBuf;

use thiserror::Error;

pub use charts::{emit_charts, ChartData, ChartSelection, Series, CHART_DATA_PREFIX};
pub use metrics::{
    branch_limits, comparison_labels, flow_comparison, loss_summaries, overload_report,
    voltage_trajectory, BranchLimit, FlowPair, LossSummary, OverloadFinding, VoltageTrajectory,
};
pub use persisted::PersistedStudy;
pub use tables::{
    emit_tables, render_tables, verify_tables, FileEntry, StudyManifest, MANIFEST_FILE, TABLE_FILES,
};

use crate::network::BusId;
use crate::scenario::ScenarioError;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("unknown branch {0}->{1}")]
    UnknownBranch(BusId, BusId),
    #[error("study has no results")]
    EmptyStudy,
    #[error("study does not match network: {0}")]
    NetworkMismatch(String),
    #[error("corrupt study: {file}: {reason}")]
    CorruptStudy { file: String, reason: String },
    #[error("table mismatch in {0}")]
    Verification(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

impl ReportError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        ReportError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(file: impl Into<String>, reason: impl ToString) -> Self {
        ReportError::CorruptStudy {
            file: file.into(),
            reason: reason.to_string(),
        }
    }
}
