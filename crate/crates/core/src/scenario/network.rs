use std::collections::HashMap;

use sha2::{Digest, Sha256};

use super::ScenarioError;
use crate::network::{serialize_topology, to_per_unit, validate_network, BusId, NetworkModel};
use crate::powerflow::build_admittance;
use crate::{AdmittanceMatrix, PerUnitBranch};

/// A validated network with its per-unit branches and admittance matrix,
/// shared read-only by every solve of a study.
#[derive(Clone, Debug)]
pub struct PreparedNetwork {
    model: NetworkModel,
    branches: Vec<PerUnitBranch>,
    ybus: AdmittanceMatrix,
    index: HashMap<BusId, usize>,
    slack: usize,
    fingerprint: String,
}

impl PreparedNetwork {
    pub fn new(model: NetworkModel) -> Result<Self, ScenarioError> {
        let report = validate_network(&model);
        if let Some(f) = report.fatal().next() {
            return Err(ScenarioError::InvalidNetwork(f.to_string()));
        }
        let branches = to_per_unit::<f64>(&model)?;
        let ybus = build_admittance(&branches, model.buses.len())?;
        let index = model.bus_index();
        let slack = index[&model.slack_buses()[0].id];
        let fingerprint = hex::encode(Sha256::digest(serialize_topology(&model).as_bytes()));
        Ok(PreparedNetwork {
            model,
            branches,
            ybus,
            index,
            slack,
            fingerprint,
        })
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn branches(&self) -> &[PerUnitBranch] {
        &self.branches
    }

    pub fn ybus(&self) -> &AdmittanceMatrix {
        &self.ybus
    }

    pub fn slack(&self) -> usize {
        self.slack
    }

    pub fn s_base_mva(&self) -> f64 {
        self.model.s_base_mva
    }

    pub fn bus_position(&self, id: &BusId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn bus_ids(&self) -> Vec<BusId> {
        self.model.buses.iter().map(|b| b.id.clone()).collect()
    }

    pub fn branch_position(&self, from: &BusId, to: &BusId) -> Option<usize> {
        self.branches
            .iter()
            .position(|b| &b.from_bus == from && &b.to_bus == to)
    }

    /// SHA-256 of the canonical topology serialization.
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }
}
