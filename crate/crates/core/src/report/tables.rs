use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::metrics::{comparison_labels, overload_report, BranchLimit};
use super::{PersistedStudy, ReportError};
use crate::network::BusId;
use crate::scenario::{worst_swing_month, StudyResult, StudyView};

pub const MANIFEST_FILE: &str = "manifest.json";

pub const TABLE_FILES: [&str; 6] = [
    "voltages.csv",
    "flows.csv",
    "losses.csv",
    "overloads.csv",
    "swing.csv",
    "deviation.csv",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    /// Data rows, header excluded.
    pub rows: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEntry {
    pub label: String,
    pub factor: f64,
}

/// Everything needed to reload a study from its tables. Contains no
/// timestamps so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyManifest {
    pub tool: String,
    pub version: String,
    pub fingerprint: String,
    pub scenarios: Vec<ScenarioEntry>,
    pub months: Vec<u32>,
    pub buses: Vec<BusId>,
    pub branches: Vec<(BusId, BusId)>,
    /// (baseline, EV) labels used by swing.csv and deviation.csv.
    pub comparison: Option<(String, String)>,
    pub attempted_solves: usize,
    pub non_converged: usize,
    pub files: Vec<FileEntry>,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

struct Table {
    writer: csv::Writer<Vec<u8>>,
    rows: usize,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { writer, rows: 0 }
    }

    fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
        self.rows += 1;
    }

    fn finish(self) -> (Vec<u8>, usize) {
        (
            self.writer.into_inner().expect("in-memory flush"),
            self.rows,
        )
    }
}

fn voltages(study: &StudyResult) -> (Vec<u8>, usize) {
    let mut t = Table::new(&["month", "scenario", "step", "bus_id", "v_pu", "converged"]);
    for ((month, label), day) in &study.days {
        for (step, outcome) in day.steps.iter().enumerate() {
            let sol = outcome.solution();
            for (i, bus) in study.bus_ids.iter().enumerate() {
                t.row([
                    month.to_string(),
                    label.clone(),
                    step.to_string(),
                    bus.to_string(),
                    opt(sol.map(|s| s.v_mag[i])),
                    sol.is_some().to_string(),
                ]);
            }
        }
    }
    t.finish()
}

fn flows(study: &StudyResult) -> (Vec<u8>, usize) {
    let mut t = Table::new(&[
        "month",
        "scenario",
        "step",
        "from_bus",
        "to_bus",
        "p_mw_from",
        "q_mvar_from",
        "p_mw_to",
        "q_mvar_to",
        "loss_mw",
    ]);
    for ((month, label), day) in &study.days {
        for (step, outcome) in day.steps.iter().enumerate() {
            let sol = outcome.solution();
            for (j, (from, to)) in study.branch_keys.iter().enumerate() {
                let f = sol.map(|s| s.branch_flows[j]);
                t.row([
                    month.to_string(),
                    label.clone(),
                    step.to_string(),
                    from.to_string(),
                    to.to_string(),
                    opt(f.map(|f| f.from_p_mw)),
                    opt(f.map(|f| f.from_q_mvar)),
                    opt(f.map(|f| f.to_p_mw)),
                    opt(f.map(|f| f.to_q_mvar)),
                    opt(f.map(|f| f.loss_p_mw)),
                ]);
            }
        }
    }
    t.finish()
}

fn losses(study: &StudyResult) -> (Vec<u8>, usize) {
    let mut t = Table::new(&["month", "scenario", "step", "total_loss_mw"]);
    for ((month, label), day) in &study.days {
        for (step, outcome) in day.steps.iter().enumerate() {
            t.row([
                month.to_string(),
                label.clone(),
                step.to_string(),
                opt(outcome.solution().map(|s| s.total_loss_mw())),
            ]);
        }
    }
    t.finish()
}

fn overloads(study: &StudyResult, limits: &[BranchLimit]) -> (Vec<u8>, usize) {
    let mut t = Table::new(&[
        "month",
        "scenario",
        "step",
        "from_bus",
        "to_bus",
        "flow_mw",
        "limit_mw",
        "utilization",
    ]);
    for f in overload_report(study, limits) {
        t.row([
            f.month.to_string(),
            f.scenario,
            f.step.to_string(),
            f.from.to_string(),
            f.to.to_string(),
            num(f.flow_mw),
            num(f.limit_mw),
            num(f.utilization),
        ]);
    }
    t.finish()
}

fn swing(study: &StudyResult, labels: Option<&(String, String)>) -> (Vec<u8>, usize) {
    let mut t = Table::new(&[
        "bus_id",
        "month",
        "base_range_pu",
        "ev_range_pu",
        "delta_pu",
    ]);
    if let Some((base, ev)) = labels {
        for bus in &study.bus_ids {
            if let Ok(r) = worst_swing_month(study, bus, base, ev) {
                t.row([
                    bus.to_string(),
                    r.month.to_string(),
                    num(r.base_range_pu),
                    num(r.ev_range_pu),
                    num(r.delta_pu),
                ]);
            }
        }
    }
    t.finish()
}

/// Percent voltage deviation `100 × (base − ev) / base` per bus and step.
fn deviation(study: &StudyResult, labels: Option<&(String, String)>) -> (Vec<u8>, usize) {
    let mut t = Table::new(&[
        "month",
        "step",
        "bus_id",
        "base_v_pu",
        "ev_v_pu",
        "deviation_pct",
    ]);
    if let Some((base, ev)) = labels {
        for &month in &study.months {
            let (Some(b), Some(e)) = (study.day(month, base), study.day(month, ev)) else {
                continue;
            };
            for (step, (bs, es)) in b.steps.iter().zip(&e.steps).enumerate() {
                for (i, bus) in study.bus_ids.iter().enumerate() {
                    let vb = bs.solution().map(|s| s.v_mag[i]);
                    let ve = es.solution().map(|s| s.v_mag[i]);
                    let pct = vb.zip(ve).map(|(b, e)| 100.0 * (b - e) / b);
                    t.row([
                        month.to_string(),
                        step.to_string(),
                        bus.to_string(),
                        opt(vb),
                        opt(ve),
                        opt(pct),
                    ]);
                }
            }
        }
    }
    t.finish()
}

/// File name and CSV bytes.
pub type RenderedTable = (&'static str, Vec<u8>);

/// Renders every table in memory, in [`TABLE_FILES`] order, plus the
/// manifest describing them.
pub fn render_tables(
    study: &StudyResult,
    limits: &[BranchLimit],
) -> Result<(Vec<RenderedTable>, StudyManifest), ReportError> {
    if study.days.is_empty() {
        return Err(ReportError::EmptyStudy);
    }
    if limits.len() != study.branch_keys.len() {
        return Err(ReportError::NetworkMismatch(format!(
            "{} branch limits for {} branches",
            limits.len(),
            study.branch_keys.len()
        )));
    }
    let labels = comparison_labels(&study.scenarios);
    let rendered: Vec<(Vec<u8>, usize)> = (0..TABLE_FILES.len())
        .into_par_iter()
        .map(|i| match i {
            0 => voltages(study),
            1 => flows(study),
            2 => losses(study),
            3 => overloads(study, limits),
            4 => swing(study, labels.as_ref()),
            _ => deviation(study, labels.as_ref()),
        })
        .collect();
    let files = TABLE_FILES
        .iter()
        .zip(&rendered)
        .map(|(name, (bytes, rows))| FileEntry {
            name: name.to_string(),
            rows: *rows,
            sha256: hex::encode(Sha256::digest(bytes)),
        })
        .collect();
    let manifest = StudyManifest {
        tool: "gridimpact".into(),
        version: crate::VERSION.into(),
        fingerprint: study.fingerprint.clone(),
        scenarios: study
            .scenarios
            .iter()
            .map(|(label, factor)| ScenarioEntry {
                label: label.clone(),
                factor: *factor,
            })
            .collect(),
        months: study.months.clone(),
        buses: study.bus_ids.clone(),
        branches: study.branch_keys.clone(),
        comparison: labels,
        attempted_solves: study.attempted_solves(),
        non_converged: study.non_converged(),
        files,
    };
    let tables = TABLE_FILES
        .iter()
        .copied()
        .zip(rendered.into_iter().map(|(b, _)| b))
        .collect();
    Ok((tables, manifest))
}

/// Writes all tables, then the manifest.
pub fn emit_tables(
    study: &StudyResult,
    limits: &[BranchLimit],
    out_dir: &Path,
) -> Result<StudyManifest, ReportError> {
    let (tables, manifest) = render_tables(study, limits)?;
    fs::create_dir_all(out_dir).map_err(|e| ReportError::io(out_dir, e))?;
    tables.par_iter().try_for_each(|(name, bytes)| {
        let path = out_dir.join(name);
        fs::write(&path, bytes).map_err(|e| ReportError::io(path, e))
    })?;
    let path = out_dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(|e| ReportError::io(path, e))?;
    Ok(manifest)
}

/// Re-derives every table from the in-memory study and checks it against the
/// files in `dir`, then reloads the tables and checks each value bitwise.
pub fn verify_tables(
    study: &StudyResult,
    limits: &[BranchLimit],
    dir: &Path,
) -> Result<(), ReportError> {
    let (tables, manifest) = render_tables(study, limits)?;
    for (name, bytes) in &tables {
        let path = dir.join(name);
        let disk = fs::read(&path).map_err(|e| ReportError::io(path, e))?;
        if &disk != bytes {
            return Err(ReportError::Verification(name.to_string()));
        }
    }
    let persisted = PersistedStudy::load(dir)?;
    if persisted.manifest() != &manifest {
        return Err(ReportError::Verification(MANIFEST_FILE.into()));
    }
    for &month in &study.months {
        for (label, _) in &study.scenarios {
            for bus in &study.bus_ids {
                if !same(
                    persisted.bus_voltages(bus, month, label),
                    study.bus_voltages(bus, month, label),
                ) {
                    return Err(ReportError::Verification("voltages.csv".into()));
                }
            }
            for (from, to) in &study.branch_keys {
                if !same(
                    persisted.branch_p_from(from, to, month, label),
                    study.branch_p_from(from, to, month, label),
                ) {
                    return Err(ReportError::Verification("flows.csv".into()));
                }
            }
        }
    }
    Ok(())
}

fn same(a: Option<Vec<Option<f64>>>, b: Option<Vec<Option<f64>>>) -> bool {
    let bits = |v: Option<Vec<Option<f64>>>| {
        v.map(|v| {
            v.into_iter()
                .map(|x| x.map(f64::to_bits))
                .collect::<Vec<_>>()
        })
    };
    bits(a) == bits(b)
}
