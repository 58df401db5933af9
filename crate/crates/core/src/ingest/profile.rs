use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate, NaiveDateTime, Timelike};

use super::{IngestError, MeterKind, MeterSeries};
use crate::network::BusId;

pub const STEPS_PER_DAY: usize = 96;

/// Interval index of a timestamp within its day: `[15k, 15(k+1))` minutes.
pub fn step_of(t: &NaiveDateTime) -> usize {
    (t.hour() * 4 + t.minute() / 15) as usize
}

/// Consumption at one bus for one interval; negative P is net injection.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BusLoad {
    pub p_mw: f64,
    pub q_mvar: f64,
}

impl BusLoad {
    pub fn new(p_mw: f64, q_mvar: f64) -> Self {
        BusLoad { p_mw, q_mvar }
    }
}

/// 96-interval per-bus load schedule for one day.
///
/// Loads are stored as extracted and multiplied by `scale` on access, so
/// repeated scaling composes exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct DailyProfile {
    date: NaiveDate,
    steps: Vec<BTreeMap<BusId, BusLoad>>,
    scale: f64,
}

impl DailyProfile {
    pub fn new(date: NaiveDate, steps: Vec<BTreeMap<BusId, BusLoad>>) -> Result<Self, IngestError> {
        if steps.len() != STEPS_PER_DAY {
            return Err(IngestError::Invalid(format!(
                "daily profile for {date} has {} steps, expected {STEPS_PER_DAY}",
                steps.len()
            )));
        }
        Ok(DailyProfile {
            date,
            steps,
            scale: 1.0,
        })
    }

    /// Same loads at every interval.
    pub fn constant(date: NaiveDate, loads: BTreeMap<BusId, BusLoad>) -> Self {
        DailyProfile {
            date,
            steps: vec![loads; STEPS_PER_DAY],
            scale: 1.0,
        }
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    pub fn month(&self) -> u32 {
        self.date.month()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn buses(&self) -> BTreeSet<BusId> {
        self.steps.iter().flat_map(|s| s.keys().cloned()).collect()
    }

    /// Scaled load at `bus` for `step`, zero when the bus carries none.
    pub fn load(&self, step: usize, bus: &BusId) -> BusLoad {
        self.steps[step]
            .get(bus)
            .map(|l| BusLoad::new(l.p_mw * self.scale, l.q_mvar * self.scale))
            .unwrap_or_default()
    }

    pub fn step_loads(&self, step: usize) -> impl Iterator<Item = (&BusId, BusLoad)> + '_ {
        self.steps[step]
            .iter()
            .map(move |(b, l)| (b, BusLoad::new(l.p_mw * self.scale, l.q_mvar * self.scale)))
    }

    pub fn total_p_mw(&self, step: usize) -> f64 {
        self.step_loads(step).map(|(_, l)| l.p_mw).sum()
    }
}

/// Meter-to-bus assignment; meters not listed use the bus from their file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BusMapping {
    overrides: BTreeMap<String, BusId>,
}

impl BusMapping {
    pub fn with(mut self, meter_id: impl Into<String>, bus: BusId) -> Self {
        self.overrides.insert(meter_id.into(), bus);
        self
    }

    pub fn bus_for(&self, series: &MeterSeries) -> BusId {
        self.overrides
            .get(&series.meter_id)
            .cloned()
            .unwrap_or_else(|| series.bus.clone())
    }
}

/// Per-date interval totals over days on which every series is complete.
fn complete_day_totals(series: &[&MeterSeries]) -> BTreeMap<NaiveDate, [f64; STEPS_PER_DAY]> {
    let mut totals: BTreeMap<NaiveDate, ([f64; STEPS_PER_DAY], usize)> = BTreeMap::new();
    for s in series {
        for chunk in s
            .samples
            .chunk_by(|a, b| a.timestamp.date() == b.timestamp.date())
        {
            // Strictly increasing quarter-hour stamps: 96 of them cover the day.
            if chunk.len() != STEPS_PER_DAY {
                continue;
            }
            let entry = totals
                .entry(chunk[0].timestamp.date())
                .or_insert(([0.0; STEPS_PER_DAY], 0));
            for sample in chunk {
                entry.0[step_of(&sample.timestamp)] += sample.p_kw;
            }
            entry.1 += 1;
        }
    }
    totals
        .into_iter()
        .filter(|(_, (_, count))| *count == series.len())
        .map(|(date, (t, _))| (date, t))
        .collect()
}

/// Day of `month` whose largest interval total of P over `series` is highest;
/// ties go to the earliest date. Days with other than 96 intervals in any
/// series are not candidates.
pub fn worst_case_day(series: &[&MeterSeries], month: u32) -> Result<NaiveDate, IngestError> {
    let mut best: Option<(NaiveDate, f64)> = None;
    if !series.is_empty() {
        for (date, totals) in complete_day_totals(series) {
            if date.month() != month {
                continue;
            }
            let peak = totals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best.is_none_or(|(_, b)| peak > b) {
                best = Some((date, peak));
            }
        }
    }
    best.map(|(d, _)| d)
        .ok_or(IngestError::NoCompleteDay { month })
}

/// Sums the meters mapped to each bus on `date`, converting kW/kVAr to
/// MW/MVAr. Generation meters enter as negative load with zero Q.
pub fn extract_daily_profile(
    series: &[&MeterSeries],
    date: NaiveDate,
    mapping: &BusMapping,
) -> Result<DailyProfile, IngestError> {
    let mut steps: Vec<BTreeMap<BusId, BusLoad>> = vec![BTreeMap::new(); STEPS_PER_DAY];
    for s in series {
        let day = s.day(date);
        if day.len() != STEPS_PER_DAY {
            let present: BTreeSet<usize> = day.iter().map(|m| step_of(&m.timestamp)).collect();
            return Err(IngestError::IncompleteDay {
                meter: s.meter_id.clone(),
                date,
                missing_steps: (0..STEPS_PER_DAY)
                    .filter(|k| !present.contains(k))
                    .collect(),
            });
        }
        let bus = mapping.bus_for(s);
        for sample in day {
            let (p, q) = match s.kind {
                MeterKind::PvGeneration => (-sample.p_kw / 1000.0, 0.0),
                _ => (sample.p_kw / 1000.0, sample.q_kvar / 1000.0),
            };
            let slot = steps[step_of(&sample.timestamp)]
                .entry(bus.clone())
                .or_default();
            slot.p_mw += p;
            slot.q_mvar += q;
        }
    }
    DailyProfile::new(date, steps)
}

/// Multiplies every entry of an EV profile by `factor`.
pub fn scale_ev(profile: &DailyProfile, factor: f64) -> DailyProfile {
    assert!(
        factor.is_finite() && factor >= 0.0,
        "EV scale factor must be finite and >= 0, got {factor}"
    );
    DailyProfile {
        scale: profile.scale * factor,
        ..profile.clone()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonthScenario {
    pub base: DailyProfile,
    pub ev: DailyProfile,
}

impl MonthScenario {
    pub fn month(&self) -> u32 {
        self.base.month()
    }
}

/// Base and EV profiles aligned by date, combined as `base + ev_scale · ev`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet {
    pub months: Vec<MonthScenario>,
    pub ev_scale: f64,
}

impl ScenarioSet {
    /// Per-bus combination for month entry `i`, P and Q kept separate.
    pub fn combined(&self, i: usize) -> DailyProfile {
        let m = &self.months[i];
        let ev = scale_ev(&m.ev, self.ev_scale);
        let buses: BTreeSet<BusId> = m.base.buses().union(&ev.buses()).cloned().collect();
        let steps = (0..STEPS_PER_DAY)
            .map(|k| {
                buses
                    .iter()
                    .map(|b| {
                        let (base, ev) = (m.base.load(k, b), ev.load(k, b));
                        (
                            b.clone(),
                            BusLoad::new(base.p_mw + ev.p_mw, base.q_mvar + ev.q_mvar),
                        )
                    })
                    .collect()
            })
            .collect();
        DailyProfile {
            date: m.base.date,
            steps,
            scale: 1.0,
        }
    }

    pub fn combined_all(&self) -> Vec<DailyProfile> {
        (0..self.months.len()).map(|i| self.combined(i)).collect()
    }
}

pub fn compose_scenarios(
    base: &[DailyProfile],
    ev: &[DailyProfile],
    ev_scale: f64,
) -> Result<ScenarioSet, IngestError> {
    if !(ev_scale.is_finite() && ev_scale >= 0.0) {
        return Err(IngestError::Invalid(format!(
            "EV scale factor must be finite and >= 0, got {ev_scale}"
        )));
    }
    if base.len() != ev.len() {
        return Err(IngestError::Invalid(format!(
            "{} base profiles but {} EV profiles",
            base.len(),
            ev.len()
        )));
    }
    let months = base
        .iter()
        .zip(ev)
        .map(|(b, e)| {
            if b.date != e.date {
                return Err(IngestError::DateMisalignment {
                    base: b.date,
                    ev: e.date,
                });
            }
            Ok(MonthScenario {
                base: b.clone(),
                ev: e.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(ScenarioSet { months, ev_scale })
}
