//! Deterministic synthetic campus: a radial 12.47 kV network with metered
//! buildings, EV stations and PV behind 0.48 kV transformers, plus one year
//! of 15-minute meter data.

use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{MeterKind, MeterSample, MeterSeries, METER_HEADER, STEPS_PER_DAY};
use crate::network::{
    serialize_topology, Bus, BusId, BusKind, CableSegment, Generator, NetworkModel, Transformer,
};

pub const DEFAULT_BUSES: usize = 150;
pub const DEFAULT_SEED: u64 = 2023;
pub const YEAR: i32 = 2023;
/// Month with the heaviest EV charging activity.
pub const EV_HEAVY_MONTH: u32 = 4;
/// Inclusive step range in which EV stations draw power.
pub const CHARGING_WINDOW: (usize, usize) = (35, 65);

const FEEDERS: usize = 4;
const EV_FEEDER: usize = 0;
const BUILDINGS: usize = 16;
const EV_STATIONS: usize = 4;
const PV_KW: [f64; 3] = [467.0, 225.0, 1200.0];
const MV_KV: f64 = 12.47;
const LV_KV: f64 = 0.48;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("need at least {minimum} buses, got {requested}")]
    TooFewBuses { requested: usize, minimum: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// What the generator built in, for tests that check the study against it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub seed: u64,
    pub buses: usize,
    pub year: i32,
    pub ev_heavy_month: u32,
    pub charging_window: (usize, usize),
    /// EV-station buses, the monitored one first.
    pub ev_buses: Vec<BusId>,
    pub pv_buses: Vec<BusId>,
    /// Substation cable feeding the EV-heavy feeder.
    pub feeder_head: (BusId, BusId),
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub network: NetworkModel,
    pub meters: Vec<MeterSeries>,
    pub info: DatasetInfo,
}

/// Minimum bus count: substation, one LV bus per meter, three MV nodes per feeder.
pub fn minimum_buses() -> usize {
    1 + BUILDINGS + EV_STATIONS + PV_KW.len() + 3 * FEEDERS
}

struct Site {
    meter_id: String,
    name: String,
    kind: MeterKind,
    feeder: usize,
    /// Building peak, EV station peak, or PV rating in kW.
    size_kw: f64,
}

fn sites(rng: &mut ChaCha8Rng) -> Vec<Site> {
    let mut out = Vec::new();
    for i in 0..BUILDINGS {
        out.push(Site {
            meter_id: format!("BLDG{:02}", i + 1),
            name: format!("Building {}", i + 1),
            kind: MeterKind::Building,
            feeder: i % FEEDERS,
            size_kw: rng.gen_range(150.0..450.0),
        });
    }
    for i in 0..EV_STATIONS {
        out.push(Site {
            meter_id: format!("EV{}", i + 1),
            name: format!("EV station {}", i + 1),
            kind: MeterKind::EvStation,
            feeder: if i < EV_STATIONS - 1 { EV_FEEDER } else { 2 },
            size_kw: rng.gen_range(80.0..140.0),
        });
    }
    for (i, kw) in PV_KW.iter().enumerate() {
        out.push(Site {
            meter_id: format!("PV{}", i + 1),
            name: format!("PV array {}", i + 1),
            kind: MeterKind::PvGeneration,
            feeder: 1 + i,
            size_kw: *kw,
        });
    }
    out
}

fn building_shape(k: usize) -> f64 {
    let h = k as f64 / 4.0;
    match h {
        h if h < 6.5 => 0.45,
        h if h < 10.0 => 0.45 + 0.55 * (h - 6.5) / 3.5,
        h if h < 16.0 => 1.0,
        h if h < 20.0 => 1.0 - 0.5 * (h - 16.0) / 4.0,
        _ => 0.5 - 0.05 * (h - 20.0) / 4.0,
    }
}

fn building_season(month: u32) -> f64 {
    1.0 + 0.2 * (2.0 * PI * (month as f64 - 7.5) / 12.0).cos()
}

fn ev_shape(k: usize) -> f64 {
    let (a, b) = CHARGING_WINDOW;
    if k < a || k > b {
        return 0.0;
    }
    let x = (k - a) as f64 + 0.5;
    (PI * x / (b - a + 1) as f64).sin().powf(1.5)
}

fn ev_season(month: u32) -> f64 {
    match month {
        m if m == EV_HEAVY_MONTH => 2.0,
        6..=8 => 0.55,
        12 | 1 => 0.7,
        _ => 0.9,
    }
}

fn pv_shape(k: usize, month: u32) -> f64 {
    let h = k as f64 / 4.0 + 0.125;
    let half = 6.0 + 1.0 * (2.0 * PI * (month as f64 - 6.5) / 12.0).cos();
    let x = (h - 12.5) / half;
    if x.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * PI * x).cos().powi(2)
    }
}

/// Formats to three decimals and keeps the value the CSV will parse back to.
fn kw(v: f64) -> f64 {
    format!("{v:.3}").parse().expect("formatted float parses")
}

fn meter_year(site: &Site, bus: &BusId, rng: &mut ChaCha8Rng) -> MeterSeries {
    let start = NaiveDate::from_ymd_opt(YEAR, 1, 1).unwrap();
    let mut samples = Vec::with_capacity(365 * STEPS_PER_DAY);
    let mut date = start;
    while date.year() == YEAR {
        let month = date.month();
        let weekend = matches!(date.weekday(), Weekday::Sat | Weekday::Sun);
        let day_factor = match site.kind {
            MeterKind::Building => {
                building_season(month) * if weekend { 0.6 } else { 1.0 } * rng.gen_range(0.92..1.0)
            }
            MeterKind::EvStation => {
                ev_season(month) * if weekend { 0.25 } else { 1.0 } * rng.gen_range(0.8..1.0)
            }
            MeterKind::PvGeneration => rng.gen_range(0.45..0.95),
        };
        let midnight = date.and_hms_opt(0, 0, 0).unwrap();
        for k in 0..STEPS_PER_DAY {
            let noise = rng.gen_range(0.95..1.05);
            let (p, q) = match site.kind {
                MeterKind::Building => {
                    let p = site.size_kw * building_shape(k) * day_factor * noise;
                    (p, p * 0.42)
                }
                MeterKind::EvStation => {
                    let p = site.size_kw * ev_shape(k) * day_factor * noise;
                    (p, p * 0.2)
                }
                MeterKind::PvGeneration => {
                    let p = site.size_kw * pv_shape(k, month) * day_factor * noise;
                    (p.min(0.98 * site.size_kw), 0.0)
                }
            };
            samples.push(MeterSample {
                timestamp: midnight + Duration::minutes(15 * k as i64),
                p_kw: kw(p),
                q_kvar: kw(q),
            });
        }
        date = date.succ_opt().unwrap();
    }
    MeterSeries {
        meter_id: site.meter_id.clone(),
        bus: bus.clone(),
        kind: site.kind,
        samples,
    }
}

fn peak_kw(series: &MeterSeries) -> f64 {
    series.samples.iter().map(|s| s.p_kw).fold(0.0, f64::max)
}

fn peak_kva(series: &MeterSeries) -> f64 {
    series
        .samples
        .iter()
        .map(|s| s.p_kw.hypot(s.q_kvar))
        .fold(0.0, f64::max)
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).ceil() * step
}

/// Builds the dataset for `buses` total buses from `seed`.
///
/// Transformers are rated 1.5× their site peak (2.5× for EV stations, so a
/// fourfold EV scenario overloads them). Cable limits are 1.5× the
/// non-coincident downstream peak plus downstream PV rating.
pub fn generate(buses: usize, seed: u64) -> Result<Dataset, DatasetError> {
    if buses < minimum_buses() {
        return Err(DatasetError::TooFewBuses {
            requested: buses,
            minimum: minimum_buses(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sites = sites(&mut rng);
    let mv_nodes = buses - 1 - sites.len();

    let mut model = NetworkModel {
        s_base_mva: 10.0,
        buses: vec![Bus {
            id: BusId::new("B1"),
            name: "Substation".into(),
            kind: BusKind::Slack,
            nominal_kv: MV_KV,
        }],
        cables: Vec::new(),
        transformers: Vec::new(),
        generators: Vec::new(),
    };
    let mut next_id = 2;
    let mut new_bus = |model: &mut NetworkModel, name: String, kind, kv| {
        let id = BusId::new(format!("B{next_id}"));
        next_id += 1;
        model.buses.push(Bus {
            id: id.clone(),
            name,
            kind,
            nominal_kv: kv,
        });
        id
    };

    // Per feeder: MV node ids, their parent index (None = substation) and depth.
    let mut feeders: Vec<Vec<(BusId, Option<usize>, usize)>> = vec![Vec::new(); FEEDERS];
    for f in 0..FEEDERS {
        let count = mv_nodes / FEEDERS + usize::from(f < mv_nodes % FEEDERS);
        for j in 0..count {
            let id = new_bus(
                &mut model,
                format!("Feeder {} node {}", f + 1, j + 1),
                BusKind::Load,
                MV_KV,
            );
            let parent = if j == 0 {
                None
            } else {
                Some(j - 1 - rng.gen_range(0..j.min(3)))
            };
            let depth = parent.map_or(1, |p| feeders[f][p].2 + 1);
            feeders[f].push((id, parent, depth));
        }
    }

    let mut meters = Vec::new();
    let mut attach: Vec<(usize, usize)> = Vec::new();
    let mut ev_buses = Vec::new();
    let mut pv_buses = Vec::new();
    for site in &sites {
        let nodes = &feeders[site.feeder];
        let node = match site.kind {
            // EV stations go to the deepest free nodes.
            MeterKind::EvStation => {
                let mut order: Vec<usize> = (0..nodes.len()).collect();
                order.sort_by_key(|&i| (std::cmp::Reverse(nodes[i].2), i));
                *order
                    .iter()
                    .find(|i| !attach.contains(&(site.feeder, **i)))
                    .unwrap_or(&order[0])
            }
            _ => rng.gen_range(0..nodes.len()),
        };
        attach.push((site.feeder, node));
        let kind = match site.kind {
            MeterKind::PvGeneration => BusKind::Generator,
            _ => BusKind::Load,
        };
        let lv = new_bus(&mut model, site.name.clone(), kind, LV_KV);
        let series = meter_year(site, &lv, &mut rng);
        let rating = match site.kind {
            MeterKind::Building => round_to(1.5 * peak_kva(&series) / 1000.0, 0.075),
            MeterKind::EvStation => round_to(2.5 * peak_kva(&series) / 1000.0, 0.025),
            MeterKind::PvGeneration => round_to(1.25 * site.size_kw / 1000.0, 0.025),
        };
        model.transformers.push(Transformer {
            from_bus: nodes[node].0.clone(),
            to_bus: lv.clone(),
            rating_mva: rating,
            impedance_pct: 5.75,
            r_pct: Some(1.1),
            tap_ratio: 1.0,
        });
        match site.kind {
            MeterKind::EvStation => ev_buses.push((site.feeder, nodes[node].2, lv.clone())),
            MeterKind::PvGeneration => {
                pv_buses.push(lv.clone());
                model.generators.push(Generator {
                    bus: lv.clone(),
                    rating_mw: site.size_kw / 1000.0,
                    profile_id: site.meter_id.clone(),
                });
            }
            MeterKind::Building => {}
        }
        meters.push(series);
    }

    // Downstream non-coincident demand and PV rating per MV node, children first.
    let mut demand: Vec<Vec<f64>> = feeders.iter().map(|n| vec![0.0; n.len()]).collect();
    for ((f, node), (site, series)) in attach.iter().zip(sites.iter().zip(&meters)) {
        demand[*f][*node] += match site.kind {
            MeterKind::PvGeneration => site.size_kw,
            _ => peak_kw(series),
        } / 1000.0;
    }
    for f in 0..FEEDERS {
        for j in (0..feeders[f].len()).rev() {
            if let Some(p) = feeders[f][j].1 {
                demand[f][p] += demand[f][j];
            }
        }
        for (j, (id, parent, _)) in feeders[f].iter().enumerate() {
            let from = parent.map_or_else(|| BusId::new("B1"), |p| feeders[f][p].0.clone());
            let trunk = parent.is_none() || j < 4;
            model.cables.push(CableSegment {
                from_bus: from,
                to_bus: id.clone(),
                length_miles: kw(rng.gen_range(0.05..0.25)),
                r_per_mile: if trunk { 0.19 } else { 0.31 },
                x_per_mile: if trunk { 0.28 } else { 0.36 },
                limit_mw: Some(round_to((1.5 * demand[f][j]).max(0.1), 0.05)),
            });
        }
    }

    // Monitored EV bus: the deepest on the EV feeder.
    ev_buses.sort_by_key(|(f, depth, _)| (*f != EV_FEEDER, std::cmp::Reverse(*depth)));
    let head = &feeders[EV_FEEDER][0].0;
    let info = DatasetInfo {
        seed,
        buses,
        year: YEAR,
        ev_heavy_month: EV_HEAVY_MONTH,
        charging_window: CHARGING_WINDOW,
        ev_buses: ev_buses.into_iter().map(|(_, _, b)| b).collect(),
        pv_buses,
        feeder_head: (BusId::new("B1"), head.clone()),
    };
    Ok(Dataset {
        network: model,
        meters,
        info,
    })
}

/// Paths written by [`write_dataset`], relative to its output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFiles {
    pub topology: PathBuf,
    pub meters: Vec<PathBuf>,
    pub config: PathBuf,
    pub info: PathBuf,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    fs::write(path, bytes).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `topology.json`, `meters/<id>.csv`, `config.json` and `dataset.json`.
/// The last EV station's file leaves `q_kvar` empty.
pub fn write_dataset(dataset: &Dataset, out_dir: &Path) -> Result<DatasetFiles, DatasetError> {
    let meter_dir = out_dir.join("meters");
    fs::create_dir_all(&meter_dir).map_err(|source| DatasetError::Io {
        path: meter_dir.clone(),
        source,
    })?;
    write_file(
        &out_dir.join("topology.json"),
        serialize_topology(&dataset.network).as_bytes(),
    )?;

    let last_ev = dataset
        .meters
        .iter()
        .rposition(|m| m.kind == MeterKind::EvStation);
    let mut meter_paths = Vec::new();
    for (i, m) in dataset.meters.iter().enumerate() {
        let rel = PathBuf::from("meters").join(format!("{}.csv", m.meter_id));
        let mut buf = Vec::with_capacity(m.samples.len() * 56);
        writeln!(buf, "{}", METER_HEADER.join(",")).unwrap();
        for s in &m.samples {
            let q = if Some(i) == last_ev {
                String::new()
            } else {
                format!("{:.3}", s.q_kvar)
            };
            writeln!(
                buf,
                "{},{},{},{},{:.3},{q}",
                s.timestamp.format("%Y-%m-%dT%H:%M:%S"),
                m.meter_id,
                m.bus,
                m.kind.as_str(),
                s.p_kw
            )
            .unwrap();
        }
        write_file(&out_dir.join(&rel), &buf)?;
        meter_paths.push(rel);
    }

    let config = serde_json::json!({
        "topology": "topology.json",
        "meters": meter_paths,
        "ev_scale_factors": [1, 4],
        "months": (1..=12).collect::<Vec<u32>>(),
        "warm_start": true,
        "solver": { "tolerance": 1e-8, "max_iterations": 50 },
        "max_gap_steps": 4,
    });
    let mut text = serde_json::to_string_pretty(&config).unwrap();
    text.push('\n');
    write_file(&out_dir.join("config.json"), text.as_bytes())?;
    let mut info = serde_json::to_string_pretty(&dataset.info).unwrap();
    info.push('\n');
    write_file(&out_dir.join("dataset.json"), info.as_bytes())?;

    Ok(DatasetFiles {
        topology: "topology.json".into(),
        meters: meter_paths,
        config: "config.json".into(),
        info: "dataset.json".into(),
    })
}

/// Timestamp of step `k` on `date`.
pub fn step_time(date: NaiveDate, k: usize) -> NaiveDateTime {
    date.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(15 * k as i64)
}
