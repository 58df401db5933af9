//! Time-series impact analysis of EV charging on a campus distribution grid.
//!
//! The pipeline runs in three layers:
//!
//! - data: [`network`] topology and [`ingest`] of 15-minute meter series into
//!   worst-case daily profiles;
//! - computation: the AC power flow [`powerflow`] engine driven per interval by
//!   the [`scenario`] engine across months and EV scale factors;
//! - presentation: [`report`] tables, overload and loss summaries and SVG charts.
//!
//! The numerical core is generic over [`Scalar`]; the aliases below fix it to
//! `f64`, which is what the study pipeline uses.

pub mod dataset;
pub mod ingest;
pub mod network;
pub mod pipeline;
pub mod powerflow;
pub mod report;
pub mod scalar;
pub mod scenario;

pub use scalar::Scalar;

pub type PerUnitBranch = network::PerUnitBranch<f64>;
pub type AdmittanceMatrix = powerflow::AdmittanceMatrix<f64>;
pub type InjectionSet = powerflow::InjectionSet<f64>;
pub type SolverOptions = powerflow::SolverOptions<f64>;
pub type BusState = powerflow::BusState<f64>;
pub type BranchFlow = powerflow::BranchFlow<f64>;
pub type PowerFlowSolution = powerflow::PowerFlowSolution<f64>;
pub type SolveError = powerflow::SolveError<f64>;

/// Tool version recorded in study manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
