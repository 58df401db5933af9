use std::collections::{BTreeMap, BTreeSet};

use chrono::NaiveDate;
use rayon::prelude::*;

use super::{PreparedNetwork, ScenarioError};
use crate::ingest::{compose_scenarios, DailyProfile, STEPS_PER_DAY};
use crate::network::BusId;
use crate::powerflow::{solve, StartMode, VoltageProfile};
use crate::{InjectionSet, PowerFlowSolution, SolveError, SolverOptions};

/// Label of the zero-EV scenario.
pub const BASE_LABEL: &str = "base";

/// `base` for factor 0, otherwise `ev_x<factor>`.
pub fn scenario_label(factor: f64) -> String {
    if factor == 0.0 {
        BASE_LABEL.to_string()
    } else {
        format!("ev_x{factor}")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyOptions {
    pub solver: SolverOptions,
    /// Start each step from the previous converged step of the same day.
    pub warm_start: bool,
    /// Upper bound on concurrent day runs; `None` uses all cores.
    pub jobs: Option<usize>,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            solver: SolverOptions::default(),
            warm_start: true,
            jobs: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FailureKind {
    NonConvergence,
    SingularJacobian,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepFailure {
    pub kind: FailureKind,
    pub iterations: usize,
    pub worst_bus: Option<BusId>,
    pub worst_mismatch_pu: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Converged(PowerFlowSolution),
    Failed(StepFailure),
}

impl StepOutcome {
    pub fn solution(&self) -> Option<&PowerFlowSolution> {
        match self {
            StepOutcome::Converged(s) => Some(s),
            StepOutcome::Failed(_) => None,
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, StepOutcome::Converged(_))
    }
}

/// 96 interval outcomes for one day and scenario.
#[derive(Clone, Debug, PartialEq)]
pub struct DayResult {
    pub date: NaiveDate,
    pub label: String,
    pub steps: Vec<StepOutcome>,
    /// Net profile demand per interval, MW.
    pub total_load_mw: Vec<f64>,
}

impl DayResult {
    pub fn non_converged(&self) -> usize {
        self.steps.iter().filter(|s| !s.is_converged()).count()
    }
}

fn canonical_zero(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

fn injections(network: &PreparedNetwork, profile: &DailyProfile, step: usize) -> InjectionSet {
    let n = network.model().buses.len();
    let s_base = network.s_base_mva();
    let mut inj = InjectionSet::zeros(n, network.slack());
    for (bus, load) in profile.step_loads(step) {
        let i = network
            .bus_position(bus)
            .expect("profile buses checked against network");
        inj.p[i] -= load.p_mw / s_base;
        inj.q[i] -= load.q_mvar / s_base;
    }
    for v in inj.p.iter_mut().chain(inj.q.iter_mut()) {
        *v = canonical_zero(*v);
    }
    inj
}

fn check_buses(network: &PreparedNetwork, profile: &DailyProfile) -> Result<(), ScenarioError> {
    match profile
        .buses()
        .into_iter()
        .find(|b| network.bus_position(b).is_none())
    {
        Some(bus) => Err(ScenarioError::BusMismatch(bus)),
        None => Ok(()),
    }
}

/// Solves one interval of a profile.
pub fn solve_step(
    network: &PreparedNetwork,
    profile: &DailyProfile,
    step: usize,
    options: &SolverOptions,
) -> StepOutcome {
    let inj = injections(network, profile, step);
    match solve(network.ybus(), &inj, options) {
        Ok(state) => StepOutcome::Converged(PowerFlowSolution::from_state(
            state,
            network.ybus(),
            network.branches(),
            &inj,
            network.s_base_mva(),
        )),
        Err(err) => {
            let bus_at = |i: usize| network.model().buses.get(i).map(|b| b.id.clone());
            let failure = match err {
                SolveError::NonConvergence {
                    iterations,
                    worst_bus,
                    worst_mismatch,
                    ..
                } => StepFailure {
                    kind: FailureKind::NonConvergence,
                    iterations,
                    worst_bus: bus_at(worst_bus),
                    worst_mismatch_pu: worst_mismatch,
                },
                SolveError::SingularJacobian { iteration } => StepFailure {
                    kind: FailureKind::SingularJacobian,
                    iterations: iteration,
                    worst_bus: None,
                    worst_mismatch_pu: f64::NAN,
                },
                SolveError::InvalidInput(msg) => panic!("solver input invariant violated: {msg}"),
            };
            log::debug!("{} step {step}: {failure:?}", profile.date());
            StepOutcome::Failed(failure)
        }
    }
}

/// Runs all 96 intervals of `profile` in order, warm-starting from the last
/// converged interval when enabled.
pub fn run_day(
    network: &PreparedNetwork,
    profile: &DailyProfile,
    label: &str,
    options: &StudyOptions,
) -> Result<DayResult, ScenarioError> {
    check_buses(network, profile)?;
    let mut steps = Vec::with_capacity(STEPS_PER_DAY);
    let mut previous: Option<VoltageProfile<f64>> = None;
    for k in 0..STEPS_PER_DAY {
        let opts = match (&previous, options.warm_start) {
            (Some(v), true) => SolverOptions {
                start: StartMode::Warm(v.clone()),
                ..options.solver.clone()
            },
            _ => options.solver.clone(),
        };
        let outcome = solve_step(network, profile, k, &opts);
        if let Some(sol) = outcome.solution() {
            previous = Some(VoltageProfile {
                v_mag: sol.v_mag.clone(),
                v_ang: sol.v_ang.clone(),
            });
        }
        steps.push(outcome);
    }
    Ok(DayResult {
        date: profile.date(),
        label: label.to_string(),
        steps,
        total_load_mw: (0..STEPS_PER_DAY).map(|k| profile.total_p_mw(k)).collect(),
    })
}

/// Read access to per-step study quantities, satisfied both by an in-memory
/// [`StudyResult`] and by a study reloaded from its tables.
pub trait StudyView {
    fn fingerprint(&self) -> &str;
    fn months(&self) -> Vec<u32>;
    fn scenario_labels(&self) -> Vec<String>;
    fn has_bus(&self, bus: &BusId) -> bool;
    fn has_branch(&self, from: &BusId, to: &BusId) -> bool;
    /// 96 voltage magnitudes; `None` entries mark non-converged steps.
    fn bus_voltages(&self, bus: &BusId, month: u32, label: &str) -> Option<Vec<Option<f64>>>;
    /// 96 from-end real power flows in MW.
    fn branch_p_from(
        &self,
        from: &BusId,
        to: &BusId,
        month: u32,
        label: &str,
    ) -> Option<Vec<Option<f64>>>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyResult {
    pub fingerprint: String,
    pub bus_ids: Vec<BusId>,
    /// (from, to) per branch, in solver order.
    pub branch_keys: Vec<(BusId, BusId)>,
    /// (label, factor) sorted by factor.
    pub scenarios: Vec<(String, f64)>,
    pub months: Vec<u32>,
    pub days: BTreeMap<(u32, String), DayResult>,
}

impl StudyResult {
    pub fn day(&self, month: u32, label: &str) -> Option<&DayResult> {
        self.days.get(&(month, label.to_string()))
    }

    pub fn attempted_solves(&self) -> usize {
        self.days.values().map(|d| d.steps.len()).sum()
    }

    pub fn non_converged(&self) -> usize {
        self.days.values().map(DayResult::non_converged).sum()
    }

    pub fn bus_position(&self, bus: &BusId) -> Option<usize> {
        self.bus_ids.iter().position(|b| b == bus)
    }

    pub fn branch_position(&self, from: &BusId, to: &BusId) -> Option<usize> {
        self.branch_keys
            .iter()
            .position(|(f, t)| f == from && t == to)
    }
}

impl StudyView for StudyResult {
    fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    fn months(&self) -> Vec<u32> {
        self.months.clone()
    }

    fn scenario_labels(&self) -> Vec<String> {
        self.scenarios.iter().map(|(l, _)| l.clone()).collect()
    }

    fn has_bus(&self, bus: &BusId) -> bool {
        self.bus_position(bus).is_some()
    }

    fn has_branch(&self, from: &BusId, to: &BusId) -> bool {
        self.branch_position(from, to).is_some()
    }

    fn bus_voltages(&self, bus: &BusId, month: u32, label: &str) -> Option<Vec<Option<f64>>> {
        let i = self.bus_position(bus)?;
        let day = self.day(month, label)?;
        Some(
            day.steps
                .iter()
                .map(|s| s.solution().map(|sol| sol.v_mag[i]))
                .collect(),
        )
    }

    fn branch_p_from(
        &self,
        from: &BusId,
        to: &BusId,
        month: u32,
        label: &str,
    ) -> Option<Vec<Option<f64>>> {
        let j = self.branch_position(from, to)?;
        let day = self.day(month, label)?;
        Some(
            day.steps
                .iter()
                .map(|s| s.solution().map(|sol| sol.branch_flows[j].from_p_mw))
                .collect(),
        )
    }
}

/// Sweeps every month under every EV scale factor: `12 × 96 × |factors|`
/// solves for a full year. Per-step failures are recorded, not raised.
pub fn run_study(
    network: &PreparedNetwork,
    base: &[DailyProfile],
    ev: &[DailyProfile],
    factors: &[f64],
    options: &StudyOptions,
) -> Result<StudyResult, ScenarioError> {
    if base.is_empty() {
        return Err(ScenarioError::Invalid(
            "study needs at least one month".into(),
        ));
    }
    if factors.is_empty() {
        return Err(ScenarioError::Invalid(
            "study needs at least one scale factor".into(),
        ));
    }
    let months: Vec<u32> = base.iter().map(DailyProfile::month).collect();
    if months.iter().collect::<BTreeSet<_>>().len() != months.len() {
        return Err(ScenarioError::Invalid(
            "a month appears more than once".into(),
        ));
    }
    let mut scenarios: Vec<(String, f64)> =
        factors.iter().map(|&f| (scenario_label(f), f)).collect();
    scenarios.sort_by(|a, b| a.1.total_cmp(&b.1));
    if scenarios.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(ScenarioError::Invalid("duplicate scale factor".into()));
    }

    let mut tasks = Vec::new();
    for (label, factor) in &scenarios {
        let set = compose_scenarios(base, ev, *factor)?;
        for (i, profile) in set.combined_all().into_iter().enumerate() {
            check_buses(network, &profile)?;
            tasks.push((months[i], label.clone(), profile));
        }
    }

    let run = || {
        tasks
            .par_iter()
            .map(|(month, label, profile)| {
                run_day(network, profile, label, options).map(|d| ((*month, label.clone()), d))
            })
            .collect::<Result<Vec<_>, _>>()
    };
    let results = match options.jobs {
        Some(jobs) => rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?
            .install(run),
        None => run(),
    }?;

    let mut sorted_months = months;
    sorted_months.sort_unstable();
    Ok(StudyResult {
        fingerprint: network.fingerprint().to_string(),
        bus_ids: network.bus_ids(),
        branch_keys: network
            .branches()
            .iter()
            .map(|b| (b.from_bus.clone(), b.to_bus.clone()))
            .collect(),
        scenarios,
        months: sorted_months,
        days: results.into_iter().collect(),
    })
}
