use super::ReportError;
use crate::network::{BranchKind, BusId};
use crate::scenario::{
    compare_scenarios, PreparedNetwork, Selector, StudyResult, StudyView, BASE_LABEL,
};

/// 96 |V| values at one bus; `None` marks a non-converged step.
#[derive(Clone, Debug, PartialEq)]
pub struct VoltageTrajectory {
    pub bus: BusId,
    pub month: u32,
    pub scenario: String,
    pub values: Vec<Option<f64>>,
}

impl VoltageTrajectory {
    /// Step of the lowest converged voltage, earliest on ties.
    pub fn min_step(&self) -> Option<usize> {
        self.values
            .iter()
            .enumerate()
            .filter_map(|(k, v)| v.map(|v| (k, v)))
            .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
                Some((_, b)) if b <= v => best,
                _ => Some((k, v)),
            })
            .map(|(k, _)| k)
    }
}

pub fn voltage_trajectory(
    view: &impl StudyView,
    bus: &BusId,
    month: u32,
    scenario: &str,
) -> Result<VoltageTrajectory, ReportError> {
    if !view.has_bus(bus) {
        return Err(ReportError::UnknownKey(format!("bus {bus}")));
    }
    let values = view
        .bus_voltages(bus, month, scenario)
        .ok_or_else(|| ReportError::UnknownKey(format!("month {month} scenario {scenario}")))?;
    Ok(VoltageTrajectory {
        bus: bus.clone(),
        month,
        scenario: scenario.to_string(),
        values,
    })
}

/// Thermal limit of one branch in MW (cables) or MVA (transformers).
#[derive(Clone, Debug, PartialEq)]
pub struct BranchLimit {
    pub from: BusId,
    pub to: BusId,
    pub kind: BranchKind,
    pub limit: Option<f64>,
}

pub fn branch_limits(network: &PreparedNetwork) -> Vec<BranchLimit> {
    let s_base = network.s_base_mva();
    network
        .branches()
        .iter()
        .map(|b| BranchLimit {
            from: b.from_bus.clone(),
            to: b.to_bus.clone(),
            kind: b.kind,
            limit: b.flow_limit_pu.map(|l| l * s_base),
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct OverloadFinding {
    pub from: BusId,
    pub to: BusId,
    pub month: u32,
    pub scenario: String,
    pub step: usize,
    pub flow_mw: f64,
    pub limit_mw: f64,
    pub utilization: f64,
}

/// Every (branch, month, scenario, step) loaded above its limit, highest
/// utilization first. Cables compare the larger end |P|, transformers the
/// larger end |S|.
pub fn overload_report(study: &StudyResult, limits: &[BranchLimit]) -> Vec<OverloadFinding> {
    let mut out = Vec::new();
    for ((month, label), day) in &study.days {
        for (step, outcome) in day.steps.iter().enumerate() {
            let Some(sol) = outcome.solution() else {
                continue;
            };
            for (lim, flow) in limits.iter().zip(&sol.branch_flows) {
                let Some(limit) = lim.limit else {
                    continue;
                };
                let loading = match lim.kind {
                    BranchKind::Cable => flow.from_p_mw.abs().max(flow.to_p_mw.abs()),
                    BranchKind::Transformer => flow.apparent_mva(),
                };
                let utilization = loading / limit;
                if utilization > 1.0 {
                    out.push(OverloadFinding {
                        from: lim.from.clone(),
                        to: lim.to.clone(),
                        month: *month,
                        scenario: label.clone(),
                        step,
                        flow_mw: loading,
                        limit_mw: limit,
                        utilization,
                    });
                }
            }
        }
    }
    out.sort_by(|a, b| b.utilization.total_cmp(&a.utilization));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct LossSummary {
    pub month: u32,
    pub scenario: String,
    /// Total real loss per step, MW.
    pub step_loss_mw: Vec<Option<f64>>,
    /// 0.25 h × Σ converged step losses.
    pub energy_mwh: f64,
}

pub fn loss_summaries(study: &StudyResult) -> Vec<LossSummary> {
    study
        .days
        .iter()
        .map(|((month, label), day)| {
            let step_loss_mw: Vec<Option<f64>> = day
                .steps
                .iter()
                .map(|s| s.solution().map(|sol| sol.total_loss_mw()))
                .collect();
            let sum: f64 = step_loss_mw.iter().flatten().sum();
            LossSummary {
                month: *month,
                scenario: label.clone(),
                step_loss_mw,
                energy_mwh: sum * 0.25,
            }
        })
        .collect()
}

/// One step of a base-vs-EV from-end real power comparison.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowPair {
    pub month: u32,
    pub step: usize,
    pub base_mw: Option<f64>,
    pub ev_mw: Option<f64>,
}

pub fn flow_comparison(
    view: &impl StudyView,
    from: &BusId,
    to: &BusId,
    base: &str,
    ev: &str,
    months: &[u32],
) -> Result<Vec<FlowPair>, ReportError> {
    if !view.has_branch(from, to) {
        return Err(ReportError::UnknownBranch(from.clone(), to.clone()));
    }
    let cmp = compare_scenarios(
        view,
        &Selector::Branch(from.clone(), to.clone()),
        base,
        ev,
        months,
    )?;
    Ok(cmp
        .into_iter()
        .flat_map(|m| {
            m.steps
                .into_iter()
                .enumerate()
                .map(move |(step, d)| FlowPair {
                    month: m.month,
                    step,
                    base_mw: d.base,
                    ev_mw: d.ev,
                })
        })
        .collect())
}

/// Baseline and EV labels used for swing and comparison outputs: `base` if
/// present, otherwise the smallest factor, against the largest factor.
pub fn comparison_labels(scenarios: &[(String, f64)]) -> Option<(String, String)> {
    if scenarios.len() < 2 {
        return None;
    }
    let mut sorted = scenarios.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let base = sorted
        .iter()
        .find(|(l, _)| l == BASE_LABEL)
        .unwrap_or(&sorted[0])
        .0
        .clone();
    Some((base, sorted.last().unwrap().0.clone()))
}
