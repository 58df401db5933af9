//! Campus distribution network: topology data model, file format,
//! validation and per-unit normalization.

mod model;
mod perunit;
mod topology;
mod validate;

pub use model::{
    cable_impedance, Bus, BusId, BusKind, CableSegment, Generator, NetworkModel, Transformer,
    DEFAULT_S_BASE_MVA,
};
pub use perunit::{
    impedance_base_ohms, to_per_unit, transformer_impedance_pu, BranchKind, PerUnitBranch,
    UnitError,
};
pub use topology::{
    parse_topology, parse_topology_str, review_topology_str, serialize_topology, SemanticError,
    TopologyError,
};
pub use validate::{validate_network, Finding, FindingCode, Severity, ValidationReport};
