//! JSON topology file: parsing with strict validation, and serialization.

use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use super::model::{BusId, NetworkModel};
use super::validate::{validate_network, Finding, FindingCode, Severity};

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("cannot read topology {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("topology syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Semantic(#[from] SemanticError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticError {
    #[error("duplicate bus id {0}")]
    DuplicateBus(BusId),
    #[error("{element} references unknown bus {bus}")]
    DanglingEndpoint { element: String, bus: BusId },
    #[error("no slack bus declared")]
    NoSlack,
    #[error("multiple slack buses: {0:?}")]
    MultipleSlack(Vec<BusId>),
    #[error("buses not connected to the slack bus: {0:?}")]
    Disconnected(Vec<BusId>),
    #[error("{element}: {message}")]
    InvalidElement { element: String, message: String },
}

impl SemanticError {
    fn from_findings<'a>(mut fatal: impl Iterator<Item = &'a Finding>) -> Option<Self> {
        let first = fatal.next()?;
        Some(match first.code {
            FindingCode::DuplicateBus => SemanticError::DuplicateBus(BusId::new(&first.element)),
            FindingCode::DanglingEndpoint => SemanticError::DanglingEndpoint {
                element: first.element.clone(),
                bus: BusId::new(
                    first
                        .message
                        .rsplit(' ')
                        .next()
                        .unwrap_or_default()
                        .to_string(),
                ),
            },
            FindingCode::NoSlack => SemanticError::NoSlack,
            FindingCode::MultipleSlack => {
                SemanticError::MultipleSlack(first.element.split(',').map(BusId::from).collect())
            }
            FindingCode::Disconnected => {
                let mut buses = vec![BusId::new(&first.element)];
                buses.extend(
                    fatal
                        .filter(|f| f.code == FindingCode::Disconnected)
                        .map(|f| BusId::new(&f.element)),
                );
                SemanticError::Disconnected(buses)
            }
            _ => SemanticError::InvalidElement {
                element: first.element.clone(),
                message: first.message.clone(),
            },
        })
    }
}

const TOP_KEYS: &[&str] = &[
    "s_base_mva",
    "buses",
    "cables",
    "transformers",
    "generators",
];
const BUS_KEYS: &[&str] = &["id", "name", "kind", "nominal_kv"];
const CABLE_KEYS: &[&str] = &[
    "from",
    "to",
    "length_miles",
    "r_per_mile",
    "x_per_mile",
    "limit_mw",
];
const TRANSFORMER_KEYS: &[&str] = &["from", "to", "rating_mva", "impedance_pct", "r_pct", "tap"];
const GENERATOR_KEYS: &[&str] = &["bus", "rating_mw", "profile_id"];

fn unknown_keys(doc: &Value) -> Vec<Finding> {
    let mut warnings = Vec::new();
    let Some(top) = doc.as_object() else {
        return warnings;
    };
    for key in top.keys().filter(|k| !TOP_KEYS.contains(&k.as_str())) {
        warnings.push(Finding::warning(
            FindingCode::UnknownKey,
            key.as_str(),
            format!("unknown top-level key {key}"),
        ));
    }
    for (section, known) in [
        ("buses", BUS_KEYS),
        ("cables", CABLE_KEYS),
        ("transformers", TRANSFORMER_KEYS),
        ("generators", GENERATOR_KEYS),
    ] {
        let Some(items) = top.get(section).and_then(Value::as_array) else {
            continue;
        };
        for (i, item) in items.iter().enumerate() {
            let Some(obj) = item.as_object() else {
                continue;
            };
            for key in obj.keys().filter(|k| !known.contains(&k.as_str())) {
                warnings.push(Finding::warning(
                    FindingCode::UnknownKey,
                    format!("{section}[{i}]"),
                    format!("unknown key {key}"),
                ));
            }
        }
    }
    warnings
}

fn syntax(err: serde_json::Error) -> TopologyError {
    TopologyError::Syntax {
        line: err.line(),
        column: err.column(),
        message: err.to_string(),
    }
}

/// Parses and validates topology text. Returns the model together with
/// non-fatal findings (unknown keys).
pub fn parse_topology_str(text: &str) -> Result<(NetworkModel, Vec<Finding>), TopologyError> {
    let doc: Value = serde_json::from_str(text).map_err(syntax)?;
    let model: NetworkModel = serde_json::from_str(text).map_err(syntax)?;
    let report = validate_network(&model);
    if let Some(err) = SemanticError::from_findings(report.fatal()) {
        return Err(err.into());
    }
    let mut warnings = unknown_keys(&doc);
    warnings.extend(
        report
            .findings
            .into_iter()
            .filter(|f| f.severity == Severity::Warning),
    );
    Ok((model, warnings))
}

/// Parses topology text and returns every finding, fatal ones included,
/// without rejecting the model. Only syntax errors fail.
pub fn review_topology_str(text: &str) -> Result<(NetworkModel, Vec<Finding>), TopologyError> {
    let doc: Value = serde_json::from_str(text).map_err(syntax)?;
    let model: NetworkModel = serde_json::from_str(text).map_err(syntax)?;
    let mut findings = validate_network(&model).findings;
    findings.extend(unknown_keys(&doc));
    Ok((model, findings))
}

pub fn parse_topology(path: impl AsRef<Path>) -> Result<NetworkModel, TopologyError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| TopologyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_topology_str(&text).map(|(model, _)| model)
}

pub fn serialize_topology(model: &NetworkModel) -> String {
    serde_json::to_string_pretty(model).expect("network model serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Bus, BusKind, CableSegment, Generator, Transformer};
    use proptest::prelude::*;

    const TWO_BUS: &str = r#"{
        "s_base_mva": 10,
        "buses": [
            {"id": "1", "name": "Substation", "kind": "slack", "nominal_kv": 12.47},
            {"id": "2", "name": "Lot G6", "kind": "load", "nominal_kv": 12.47}
        ],
        "cables": [{"from": "1", "to": "2", "length_miles": 0.5, "r_per_mile": 0.3, "x_per_mile": 0.4}],
        "transformers": [],
        "generators": []
    }"#;

    #[test]
    fn minimal_two_bus() {
        let (model, warnings) = parse_topology_str(TWO_BUS).unwrap();
        assert_eq!(model.buses.len(), 2);
        assert_eq!(model.cables.len(), 1);
        assert!(warnings.is_empty());
    }

    #[test]
    fn unknown_bus_is_named() {
        let text = TWO_BUS.replace(r#""to": "2""#, r#""to": "999""#);
        let err = parse_topology_str(&text).unwrap_err();
        match &err {
            TopologyError::Semantic(SemanticError::DanglingEndpoint { bus, .. }) => {
                assert_eq!(bus.as_str(), "999")
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("999"));
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_topology_str("{\n  \"buses\": [,]\n}").unwrap_err();
        match err {
            TopologyError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn semantic_errors_are_distinct() {
        let dup = TWO_BUS.replace(r#""id": "2""#, r#""id": "1""#);
        assert!(matches!(
            parse_topology_str(&dup),
            Err(TopologyError::Semantic(SemanticError::DuplicateBus(_)))
        ));
        let no_slack = TWO_BUS.replace(r#""kind": "slack""#, r#""kind": "load""#);
        assert!(matches!(
            parse_topology_str(&no_slack),
            Err(TopologyError::Semantic(SemanticError::NoSlack))
        ));
        let two_slack = TWO_BUS.replace(r#""kind": "load""#, r#""kind": "slack""#);
        assert!(matches!(
            parse_topology_str(&two_slack),
            Err(TopologyError::Semantic(SemanticError::MultipleSlack(_)))
        ));
        let island = TWO_BUS.replace(r#""cables": [{"from": "1", "to": "2", "length_miles": 0.5, "r_per_mile": 0.3, "x_per_mile": 0.4}]"#, r#""cables": []"#);
        assert!(matches!(
            parse_topology_str(&island),
            Err(TopologyError::Semantic(SemanticError::Disconnected(_)))
        ));
    }

    #[test]
    fn unknown_keys_warn() {
        let text = TWO_BUS.replace(
            r#""s_base_mva": 10,"#,
            r#""s_base_mva": 10, "owner": "PPM","#,
        );
        let (_, warnings) = parse_topology_str(&text).unwrap();
        assert_eq!(warnings.len(), 1);
        assert_eq!(warnings[0].code, FindingCode::UnknownKey);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            parse_topology("/nonexistent/topology.json"),
            Err(TopologyError::Io { .. })
        ));
    }

    fn arb_model() -> impl Strategy<Value = NetworkModel> {
        (
            2usize..12,
            0.5f64..50.0,
            proptest::collection::vec(
                (
                    0.01f64..5.0,
                    0.0f64..1.0,
                    0.01f64..1.0,
                    proptest::option::of(0.1f64..20.0),
                ),
                11,
            ),
        )
            .prop_map(|(n, s_base, params)| {
                let mut buses = vec![Bus {
                    id: "0".into(),
                    name: "sub".into(),
                    kind: BusKind::Slack,
                    nominal_kv: 12.47,
                }];
                let mut cables = Vec::new();
                for i in 1..n {
                    buses.push(Bus {
                        id: BusId::new(i.to_string()),
                        name: format!("b{i}"),
                        kind: BusKind::Load,
                        nominal_kv: 12.47,
                    });
                    let (len, r, x, limit) = params[i - 1];
                    cables.push(CableSegment {
                        from_bus: BusId::new(((i - 1) / 2).to_string()),
                        to_bus: BusId::new(i.to_string()),
                        length_miles: len,
                        r_per_mile: r,
                        x_per_mile: x,
                        limit_mw: limit,
                    });
                }
                buses.push(Bus {
                    id: "lv".into(),
                    name: String::new(),
                    kind: BusKind::Generator,
                    nominal_kv: 0.48,
                });
                let transformers = vec![Transformer {
                    from_bus: "0".into(),
                    to_bus: "lv".into(),
                    rating_mva: 1.5,
                    impedance_pct: 5.75,
                    r_pct: Some(1.0),
                    tap_ratio: 1.025,
                }];
                let generators = vec![Generator {
                    bus: "lv".into(),
                    rating_mw: 0.467,
                    profile_id: "PV_B2".into(),
                }];
                NetworkModel {
                    s_base_mva: s_base,
                    buses,
                    cables,
                    transformers,
                    generators,
                }
            })
    }

    proptest! {
        #[test]
        fn serialize_parse_round_trip(model in arb_model()) {
            let text = serialize_topology(&model);
            let (back, warnings) = parse_topology_str(&text).unwrap();
            prop_assert_eq!(&back, &model);
            prop_assert!(warnings.is_empty());
            // Every accepted model validates clean.
            prop_assert!(!validate_network(&back).has_fatal());
        }
    }
}
