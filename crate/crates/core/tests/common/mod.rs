#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use chrono::NaiveDate;
use gridimpact::dataset::{generate, write_dataset, Dataset, DEFAULT_BUSES, DEFAULT_SEED};
use gridimpact::ingest::{BusLoad, DailyProfile};
use gridimpact::network::{Bus, BusId, BusKind, CableSegment, NetworkModel};
use gridimpact::pipeline::{load_config, load_inputs, Overrides, StudyInputs};

pub struct Bundled {
    _dir: tempfile::TempDir,
    pub root: PathBuf,
    pub dataset: Dataset,
}

impl Bundled {
    pub fn config(&self) -> PathBuf {
        self.root.join("config.json")
    }

    pub fn topology(&self) -> PathBuf {
        self.root.join("topology.json")
    }

    pub fn meters(&self) -> Vec<PathBuf> {
        let mut v: Vec<PathBuf> = std::fs::read_dir(self.root.join("meters"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        v.sort();
        v
    }
}

/// The default synthetic dataset written once per test binary.
pub fn bundled() -> &'static Bundled {
    static CELL: OnceLock<Bundled> = OnceLock::new();
    CELL.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let dataset = generate(DEFAULT_BUSES, DEFAULT_SEED).unwrap();
        write_dataset(&dataset, dir.path()).unwrap();
        Bundled {
            root: dir.path().to_path_buf(),
            _dir: dir,
            dataset,
        }
    })
}

pub fn inputs_from(config: &Path, warm_start: bool) -> StudyInputs {
    let overrides = Overrides {
        jobs: None,
        warm_start: Some(warm_start),
    };
    load_inputs(load_config(config, &overrides).unwrap()).unwrap()
}

/// Bundled study inputs with warm start off.
pub fn bundled_inputs() -> &'static StudyInputs {
    static CELL: OnceLock<StudyInputs> = OnceLock::new();
    CELL.get_or_init(|| inputs_from(&bundled().config(), false))
}

fn bus(id: &str, kind: BusKind, kv: f64) -> Bus {
    Bus {
        id: BusId::new(id),
        name: String::new(),
        kind,
        nominal_kv: kv,
    }
}

/// 1 kV, 1 MVA base chain `S - L1 - L2 ...` so ohms equal per-unit.
pub fn toy_feeder(sections: &[(f64, f64)], limit_mw: Option<f64>) -> NetworkModel {
    let mut buses = vec![bus("S", BusKind::Slack, 1.0)];
    let mut cables = Vec::new();
    for (i, &(r, x)) in sections.iter().enumerate() {
        let id = format!("L{}", i + 1);
        buses.push(bus(&id, BusKind::Load, 1.0));
        cables.push(CableSegment {
            from_bus: buses[i].id.clone(),
            to_bus: BusId::new(&id),
            length_miles: 1.0,
            r_per_mile: r,
            x_per_mile: x,
            limit_mw,
        });
    }
    NetworkModel {
        s_base_mva: 1.0,
        buses,
        cables,
        transformers: Vec::new(),
        generators: Vec::new(),
    }
}

pub fn date(m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(2023, m, d).unwrap()
}

pub fn constant_day(date: NaiveDate, loads: &[(&str, f64, f64)]) -> DailyProfile {
    let map: BTreeMap<BusId, BusLoad> = loads
        .iter()
        .map(|(b, p, q)| (BusId::new(*b), BusLoad::new(*p, *q)))
        .collect();
    DailyProfile::constant(date, map)
}

/// Profile with `p(step)` MW at one bus.
pub fn shaped_day(date: NaiveDate, bus: &str, p: impl Fn(usize) -> f64) -> DailyProfile {
    let steps = (0..96)
        .map(|k| BTreeMap::from([(BusId::new(bus), BusLoad::new(p(k), 0.0))]))
        .collect();
    DailyProfile::new(date, steps).unwrap()
}
