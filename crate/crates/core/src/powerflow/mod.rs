//! Single-snapshot AC power flow: nodal admittance, Newton-Raphson solve and
//! branch flow recovery.
//!
//! Solvers sit behind [`PowerFlowBackend`] so alternative engines can be
//! substituted without touching the scenario layer.

mod flows;
mod linear;
mod newton;
mod ybus;

pub use flows::{branch_flows, BranchFlow, PowerFlowSolution};
pub use linear::{
    minimum_degree_order, DenseLu, LinearSolver, SingularMatrix, SparseLu, SparseMatrix,
};
pub use newton::{
    calculated_injections, jacobian, mismatch, solve, write_trace_csv, BusState, InjectionSet,
    IterationTrace, JacobianLayout, Mismatch, NewtonRaphson, PowerFlowBackend, SolveError,
    SolverOptions, StartMode, VoltageProfile,
};
pub use ybus::{build_admittance, AdmittanceError, AdmittanceMatrix};
