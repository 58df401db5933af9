use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub const DEFAULT_S_BASE_MVA: f64 = 10.0;

/// Bus label as it appears in topology and meter files.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub String);

impl BusId {
    pub fn new(id: impl Into<String>) -> Self {
        BusId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BusId {
    fn from(s: &str) -> Self {
        BusId(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusKind {
    Slack,
    Load,
    Generator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    #[serde(default)]
    pub name: String,
    pub kind: BusKind,
    /// Line-to-line kilovolts.
    pub nominal_kv: f64,
}

/// Underground cable section; impedance scales with length.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableSegment {
    #[serde(rename = "from")]
    pub from_bus: BusId,
    #[serde(rename = "to")]
    pub to_bus: BusId,
    pub length_miles: f64,
    pub r_per_mile: f64,
    pub x_per_mile: f64,
    /// Thermal limit on real power flow, MW.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_mw: Option<f64>,
}

impl CableSegment {
    pub fn impedance_ohms(&self) -> (f64, f64) {
        cable_impedance(self)
    }
}

/// Total series resistance and reactance of a cable section in ohms.
pub fn cable_impedance(seg: &CableSegment) -> (f64, f64) {
    (
        seg.length_miles * seg.r_per_mile,
        seg.length_miles * seg.x_per_mile,
    )
}

/// Two-winding transformer from nameplate data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    #[serde(rename = "from")]
    pub from_bus: BusId,
    #[serde(rename = "to")]
    pub to_bus: BusId,
    pub rating_mva: f64,
    /// Impedance magnitude in percent on the transformer's own rating.
    pub impedance_pct: f64,
    /// Optional resistive part of `impedance_pct`, same base.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_pct: Option<f64>,
    /// Off-nominal ratio applied on the `from` side.
    #[serde(rename = "tap", default = "unit_tap")]
    pub tap_ratio: f64,
}

fn unit_tap() -> f64 {
    1.0
}

/// Distributed generator (campus PV), driven by a generation meter series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: BusId,
    pub rating_mw: f64,
    pub profile_id: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkModel {
    #[serde(default = "default_s_base")]
    pub s_base_mva: f64,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub cables: Vec<CableSegment>,
    #[serde(default)]
    pub transformers: Vec<Transformer>,
    #[serde(default)]
    pub generators: Vec<Generator>,
}

fn default_s_base() -> f64 {
    DEFAULT_S_BASE_MVA
}

impl NetworkModel {
    pub fn bus(&self, id: &BusId) -> Option<&Bus> {
        self.buses.iter().find(|b| &b.id == id)
    }

    /// Position of every bus in `buses`, which is the solver's bus ordering.
    pub fn bus_index(&self) -> HashMap<BusId, usize> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.clone(), i))
            .collect()
    }

    pub fn slack_buses(&self) -> Vec<&Bus> {
        self.buses
            .iter()
            .filter(|b| b.kind == BusKind::Slack)
            .collect()
    }

    /// Branch endpoints, cables first then transformers.
    pub fn branch_endpoints(&self) -> impl Iterator<Item = (&BusId, &BusId)> {
        self.cables
            .iter()
            .map(|c| (&c.from_bus, &c.to_bus))
            .chain(self.transformers.iter().map(|t| (&t.from_bus, &t.to_bus)))
    }

    pub fn branch_count(&self) -> usize {
        self.cables.len() + self.transformers.len()
    }
}
