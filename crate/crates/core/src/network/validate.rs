use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use super::model::{cable_impedance, BusId, NetworkModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Fatal,
    Warning,
}

impl Severity {
    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Fatal => "FATAL",
            Severity::Warning => "WARN",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FindingCode {
    DuplicateBus,
    DanglingEndpoint,
    NoSlack,
    MultipleSlack,
    Disconnected,
    SelfLoop,
    ParallelBranch,
    ZeroImpedance,
    VoltageLevelMismatch,
    InvalidValue,
    UnknownKey,
    /// Meter-level findings raised by the CLI validator.
    MeterFormat,
    GenerationAboveRating,
    UnknownProfile,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingCode::DuplicateBus => "DUPLICATE_BUS",
            FindingCode::DanglingEndpoint => "DANGLING_ENDPOINT",
            FindingCode::NoSlack => "NO_SLACK",
            FindingCode::MultipleSlack => "MULTIPLE_SLACK",
            FindingCode::Disconnected => "DISCONNECTED",
            FindingCode::SelfLoop => "SELF_LOOP",
            FindingCode::ParallelBranch => "PARALLEL_BRANCH",
            FindingCode::ZeroImpedance => "ZERO_IMPEDANCE",
            FindingCode::VoltageLevelMismatch => "VOLTAGE_LEVEL_MISMATCH",
            FindingCode::InvalidValue => "INVALID_VALUE",
            FindingCode::UnknownKey => "UNKNOWN_KEY",
            FindingCode::MeterFormat => "METER_FORMAT",
            FindingCode::GenerationAboveRating => "GENERATION_ABOVE_RATING",
            FindingCode::UnknownProfile => "UNKNOWN_PROFILE",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    /// Offending element: a bus id, `cable[i]`, `transformer[i]`, `generator[i]`, or a path.
    pub element: String,
    pub message: String,
}

impl Finding {
    pub fn fatal(
        code: FindingCode,
        element: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Finding {
            severity: Severity::Fatal,
            code,
            element: element.into(),
            message: message.into(),
        }
    }

    pub fn warning(
        code: FindingCode,
        element: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Finding {
            severity: Severity::Warning,
            code,
            element: element.into(),
            message: message.into(),
        }
    }
}

/// `severity<TAB>code<TAB>element<TAB>message`
impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.severity.as_str(),
            self.code.as_str(),
            self.element,
            self.message.replace(['\t', '\n'], " ")
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn fatal(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Fatal)
    }

    pub fn has_fatal(&self) -> bool {
        self.fatal().next().is_some()
    }

    pub fn push(&mut self, finding: Finding) {
        self.findings.push(finding);
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

/// Checks every structural and value invariant of a network model. Never fails;
/// problems are returned as findings.
pub fn validate_network(model: &NetworkModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut push = |f: Finding| report.findings.push(f);

    if !positive(model.s_base_mva) {
        push(Finding::fatal(
            FindingCode::InvalidValue,
            "s_base_mva",
            format!("system base must be > 0, got {}", model.s_base_mva),
        ));
    }

    let mut kv_of: HashMap<&BusId, f64> = HashMap::new();
    for bus in &model.buses {
        if kv_of.insert(&bus.id, bus.nominal_kv).is_some() {
            push(Finding::fatal(
                FindingCode::DuplicateBus,
                bus.id.as_str(),
                format!("bus id {} declared more than once", bus.id),
            ));
        }
        if !positive(bus.nominal_kv) {
            push(Finding::fatal(
                FindingCode::InvalidValue,
                bus.id.as_str(),
                format!("nominal_kv must be > 0, got {}", bus.nominal_kv),
            ));
        }
    }

    let slacks = model.slack_buses();
    match slacks.len() {
        0 => push(Finding::fatal(
            FindingCode::NoSlack,
            "network",
            "no bus has kind slack",
        )),
        1 => {}
        _ => {
            let ids: Vec<&str> = slacks.iter().map(|b| b.id.as_str()).collect();
            push(Finding::fatal(
                FindingCode::MultipleSlack,
                ids.join(","),
                format!("{} slack buses declared, exactly one required", ids.len()),
            ));
        }
    }

    let check_endpoints =
        |element: &str, from: &BusId, to: &BusId, push: &mut dyn FnMut(Finding)| {
            let mut ok = true;
            for end in [from, to] {
                if !kv_of.contains_key(end) {
                    push(Finding::fatal(
                        FindingCode::DanglingEndpoint,
                        element,
                        format!("references unknown bus {end}"),
                    ));
                    ok = false;
                }
            }
            if from == to {
                push(Finding::fatal(
                    FindingCode::SelfLoop,
                    element,
                    format!("both ends on bus {from}"),
                ));
                ok = false;
            }
            ok
        };

    for (i, c) in model.cables.iter().enumerate() {
        let element = format!("cable[{i}]");
        let linked = check_endpoints(&element, &c.from_bus, &c.to_bus, &mut push);
        for (name, v) in [
            ("length_miles", c.length_miles),
            ("r_per_mile", c.r_per_mile),
            ("x_per_mile", c.x_per_mile),
        ] {
            if !non_negative(v) {
                push(Finding::fatal(
                    FindingCode::InvalidValue,
                    &element,
                    format!("{name} must be >= 0, got {v}"),
                ));
            }
        }
        let (r, x) = cable_impedance(c);
        if r == 0.0 && x == 0.0 {
            push(Finding::fatal(
                FindingCode::ZeroImpedance,
                &element,
                "cable has zero series impedance",
            ));
        }
        if let Some(limit) = c.limit_mw {
            if !positive(limit) {
                push(Finding::fatal(
                    FindingCode::InvalidValue,
                    &element,
                    format!("limit_mw must be > 0, got {limit}"),
                ));
            }
        }
        if linked {
            let (kf, kt) = (kv_of[&c.from_bus], kv_of[&c.to_bus]);
            if kf != kt {
                push(Finding::fatal(
                    FindingCode::VoltageLevelMismatch,
                    &element,
                    format!(
                        "cable joins {} kV bus {} to {} kV bus {}",
                        kf, c.from_bus, kt, c.to_bus
                    ),
                ));
            }
        }
    }

    for (i, t) in model.transformers.iter().enumerate() {
        let element = format!("transformer[{i}]");
        check_endpoints(&element, &t.from_bus, &t.to_bus, &mut push);
        if !positive(t.rating_mva) {
            push(Finding::fatal(
                FindingCode::InvalidValue,
                &element,
                format!("rating_mva must be > 0, got {}", t.rating_mva),
            ));
        }
        if !positive(t.impedance_pct) {
            push(Finding::fatal(
                FindingCode::InvalidValue,
                &element,
                format!("impedance_pct must be > 0, got {}", t.impedance_pct),
            ));
        }
        if let Some(r) = t.r_pct {
            if !non_negative(r) || r > t.impedance_pct {
                push(Finding::fatal(
                    FindingCode::InvalidValue,
                    &element,
                    format!("r_pct must lie in [0, impedance_pct], got {r}"),
                ));
            }
        }
        if !(t.tap_ratio.is_finite() && (0.9..=1.1).contains(&t.tap_ratio)) {
            push(Finding::fatal(
                FindingCode::InvalidValue,
                &element,
                format!("tap must lie in [0.9, 1.1], got {}", t.tap_ratio),
            ));
        }
    }

    let mut seen_pairs: HashMap<(&BusId, &BusId), usize> = HashMap::new();
    for (i, (from, to)) in model.branch_endpoints().enumerate() {
        let key = if from <= to { (from, to) } else { (to, from) };
        if let Some(first) = seen_pairs.insert(key, i) {
            push(Finding::fatal(
                FindingCode::ParallelBranch,
                format!("{from}-{to}"),
                format!("branches {first} and {i} join the same pair of buses"),
            ));
        }
    }

    for (i, g) in model.generators.iter().enumerate() {
        let element = format!("generator[{i}]");
        if !kv_of.contains_key(&g.bus) {
            push(Finding::fatal(
                FindingCode::DanglingEndpoint,
                &element,
                format!("references unknown bus {}", g.bus),
            ));
        }
        if !positive(g.rating_mw) {
            push(Finding::fatal(
                FindingCode::InvalidValue,
                &element,
                format!("rating_mw must be > 0, got {}", g.rating_mw),
            ));
        }
    }

    for bus in unreachable_buses(model) {
        push(Finding::fatal(
            FindingCode::Disconnected,
            bus.as_str(),
            format!("bus {bus} is not connected to the slack bus"),
        ));
    }

    report
}

/// Buses not reachable from the slack bus (or from the first bus when no slack exists).
fn unreachable_buses(model: &NetworkModel) -> Vec<BusId> {
    let Some(root) = model
        .slack_buses()
        .first()
        .map(|b| &b.id)
        .or_else(|| model.buses.first().map(|b| &b.id))
    else {
        return Vec::new();
    };
    let mut adjacency: HashMap<&BusId, Vec<&BusId>> = HashMap::new();
    for (from, to) in model.branch_endpoints() {
        adjacency.entry(from).or_default().push(to);
        adjacency.entry(to).or_default().push(from);
    }
    let mut seen: HashSet<&BusId> = HashSet::from([root]);
    let mut queue = VecDeque::from([root]);
    while let Some(bus) = queue.pop_front() {
        for next in adjacency.get(bus).into_iter().flatten() {
            if seen.insert(next) {
                queue.push_back(next);
            }
        }
    }
    let mut reported = HashSet::new();
    model
        .buses
        .iter()
        .filter(|b| !seen.contains(&b.id) && reported.insert(&b.id))
        .map(|b| b.id.clone())
        .collect()
}
