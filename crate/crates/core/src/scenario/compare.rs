use super::{ScenarioError, StudyView};
use crate::network::BusId;

/// max − min over the converged entries; `None` if none converged.
pub fn voltage_range(values: &[Option<f64>]) -> Option<f64> {
    let mut it = values.iter().flatten().copied();
    let first = it.next()?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Some(hi - lo)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwingRecord {
    pub bus: BusId,
    pub month: u32,
    pub ev_range_pu: f64,
    pub base_range_pu: f64,
    pub delta_pu: f64,
}

fn require_label(view: &impl StudyView, label: &str) -> Result<(), ScenarioError> {
    if view.scenario_labels().iter().any(|l| l == label) {
        Ok(())
    } else {
        Err(ScenarioError::MissingScenario(label.to_string()))
    }
}

/// Month whose daily voltage range at `bus` grows the most from `base` to
/// `ev`. Ties go to the earliest month; months where either scenario has no
/// converged interval are skipped.
pub fn worst_swing_month(
    view: &impl StudyView,
    bus: &BusId,
    base: &str,
    ev: &str,
) -> Result<SwingRecord, ScenarioError> {
    require_label(view, base)?;
    require_label(view, ev)?;
    if !view.has_bus(bus) {
        return Err(ScenarioError::UnknownSelector(format!("bus {bus}")));
    }
    let mut best: Option<SwingRecord> = None;
    for month in view.months() {
        let range = |label| {
            view.bus_voltages(bus, month, label)
                .as_deref()
                .and_then(voltage_range)
        };
        let (Some(b), Some(e)) = (range(base), range(ev)) else {
            continue;
        };
        let delta = e - b;
        if best.as_ref().is_none_or(|r| delta > r.delta_pu) {
            best = Some(SwingRecord {
                bus: bus.clone(),
                month,
                ev_range_pu: e,
                base_range_pu: b,
                delta_pu: delta,
            });
        }
    }
    best.ok_or_else(|| {
        ScenarioError::Invalid(format!("no month has converged intervals at bus {bus}"))
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Selector {
    /// Voltage magnitude, pu.
    Bus(BusId),
    /// From-end real power, MW.
    Branch(BusId, BusId),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDelta {
    pub base: Option<f64>,
    pub ev: Option<f64>,
    /// ev − base, when both converged.
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonthComparison {
    pub month: u32,
    pub steps: Vec<StepDelta>,
}

/// Per-interval side-by-side values of one quantity under two scenarios.
pub fn compare_scenarios(
    view: &impl StudyView,
    selector: &Selector,
    base: &str,
    ev: &str,
    months: &[u32],
) -> Result<Vec<MonthComparison>, ScenarioError> {
    require_label(view, base)?;
    require_label(view, ev)?;
    match selector {
        Selector::Bus(b) if !view.has_bus(b) => {
            return Err(ScenarioError::UnknownSelector(format!("bus {b}")))
        }
        Selector::Branch(f, t) if !view.has_branch(f, t) => {
            return Err(ScenarioError::UnknownSelector(format!("branch {f}->{t}")))
        }
        _ => {}
    }
    let available = view.months();
    let fetch = |month, label| match selector {
        Selector::Bus(b) => view.bus_voltages(b, month, label),
        Selector::Branch(f, t) => view.branch_p_from(f, t, month, label),
    };
    months
        .iter()
        .map(|&month| {
            if !available.contains(&month) {
                return Err(ScenarioError::MissingMonth(month));
            }
            let b = fetch(month, base).ok_or(ScenarioError::MissingMonth(month))?;
            let e = fetch(month, ev).ok_or(ScenarioError::MissingMonth(month))?;
            let steps = b
                .iter()
                .zip(&e)
                .map(|(&base, &ev)| StepDelta {
                    base,
                    ev,
                    delta: base.zip(ev).map(|(b, e)| e - b),
                })
                .collect();
            Ok(MonthComparison { month, steps })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    struct Fake {
        months: Vec<u32>,
        volts: BTreeMap<(u32, String), Vec<Option<f64>>>,
    }

    impl Fake {
        fn new() -> Self {
            Fake {
                months: (1..=12).collect(),
                volts: BTreeMap::new(),
            }
        }

        fn set(&mut self, month: u32, label: &str, v: Vec<Option<f64>>) {
            self.volts.insert((month, label.to_string()), v);
        }
    }

    impl StudyView for Fake {
        fn fingerprint(&self) -> &str {
            "x"
        }
        fn months(&self) -> Vec<u32> {
            self.months.clone()
        }
        fn scenario_labels(&self) -> Vec<String> {
            vec!["base".into(), "ev_x4".into()]
        }
        fn has_bus(&self, bus: &BusId) -> bool {
            bus.as_str() == "B1"
        }
        fn has_branch(&self, _: &BusId, _: &BusId) -> bool {
            false
        }
        fn bus_voltages(&self, _: &BusId, month: u32, label: &str) -> Option<Vec<Option<f64>>> {
            Some(
                self.volts
                    .get(&(month, label.to_string()))
                    .cloned()
                    .unwrap_or_else(|| vec![Some(1.0), Some(0.99)]),
            )
        }
        fn branch_p_from(&self, _: &BusId, _: &BusId, _: u32, _: &str) -> Option<Vec<Option<f64>>> {
            None
        }
    }

    fn b1() -> BusId {
        BusId::new("B1")
    }

    #[test]
    fn range_skips_failed_steps() {
        assert_eq!(
            voltage_range(&[Some(1.0), None, Some(0.97)]),
            Some(1.0 - 0.97)
        );
        assert_eq!(voltage_range(&[None, None]), None);
    }

    #[test]
    fn identical_scenarios_pick_january() {
        let r = worst_swing_month(&Fake::new(), &b1(), "base", "ev_x4").unwrap();
        assert_eq!(r.month, 1);
        assert_eq!(r.delta_pu, 0.0);
    }

    #[test]
    fn only_changed_month_wins() {
        let mut f = Fake::new();
        f.set(3, "ev_x4", vec![Some(1.0), Some(0.95)]);
        let r = worst_swing_month(&f, &b1(), "base", "ev_x4").unwrap();
        assert_eq!(r.month, 3);
        assert!((r.delta_pu - 0.04).abs() < 1e-12);
    }

    #[test]
    fn missing_label_and_bus() {
        let f = Fake::new();
        assert!(matches!(
            worst_swing_month(&f, &b1(), "base", "ev_x9"),
            Err(ScenarioError::MissingScenario(_))
        ));
        assert!(matches!(
            worst_swing_month(&f, &BusId::new("nope"), "base", "ev_x4"),
            Err(ScenarioError::UnknownSelector(_))
        ));
    }

    #[test]
    fn month_with_no_converged_steps_is_skipped() {
        let mut f = Fake::new();
        f.set(1, "ev_x4", vec![None, None]);
        f.set(2, "ev_x4", vec![Some(1.0), Some(0.98)]);
        assert_eq!(
            worst_swing_month(&f, &b1(), "base", "ev_x4").unwrap().month,
            2
        );
    }

    #[test]
    fn compare_deltas() {
        let mut f = Fake::new();
        f.set(5, "ev_x4", vec![Some(0.98), None]);
        let c = compare_scenarios(&f, &Selector::Bus(b1()), "base", "ev_x4", &[5]).unwrap();
        assert!((c[0].steps[0].delta.unwrap() + 0.02).abs() < 1e-12);
        assert_eq!(c[0].steps[1].delta, None);
        assert!(matches!(
            compare_scenarios(&f, &Selector::Bus(b1()), "base", "ev_x4", &[13]),
            Err(ScenarioError::MissingMonth(13))
        ));
        assert!(matches!(
            compare_scenarios(&f, &Selector::Branch(b1(), b1()), "base", "ev_x4", &[5]),
            Err(ScenarioError::UnknownSelector(_))
        ));
    }
}
