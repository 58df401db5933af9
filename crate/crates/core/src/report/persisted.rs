use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::tables::{StudyManifest, MANIFEST_FILE};
use super::ReportError;
use crate::network::BusId;
use crate::scenario::StudyView;

type Series = Vec<Vec<Option<f64>>>;

/// A study reloaded from its tables; every file is hash-checked against the
/// manifest first.
#[derive(Clone, Debug)]
pub struct PersistedStudy {
    manifest: StudyManifest,
    bus_index: HashMap<BusId, usize>,
    branch_index: HashMap<(BusId, BusId), usize>,
    /// (month, label) → [bus][step]
    voltages: BTreeMap<(u32, String), Series>,
    /// (month, label) → [branch][step]
    p_from: BTreeMap<(u32, String), Series>,
}

fn parse_opt(file: &str, line: u64, s: &str) -> Result<Option<f64>, ReportError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| ReportError::corrupt(file, format!("line {line}: bad number {s:?}")))
}

impl PersistedStudy {
    pub fn load(dir: &Path) -> Result<Self, ReportError> {
        let manifest_path = dir.join(MANIFEST_FILE);
        let text =
            fs::read_to_string(&manifest_path).map_err(|e| ReportError::io(&manifest_path, e))?;
        let manifest: StudyManifest =
            serde_json::from_str(&text).map_err(|e| ReportError::corrupt(MANIFEST_FILE, e))?;
        let mut contents = HashMap::new();
        for entry in &manifest.files {
            let path = dir.join(&entry.name);
            let bytes = fs::read(&path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => ReportError::corrupt(&entry.name, "missing"),
                _ => ReportError::io(&path, e),
            })?;
            let actual = hex::encode(Sha256::digest(&bytes));
            if actual != entry.sha256 {
                return Err(ReportError::corrupt(
                    &entry.name,
                    format!("sha256 {actual} does not match manifest {}", entry.sha256),
                ));
            }
            contents.insert(entry.name.clone(), bytes);
        }
        let bus_index: HashMap<BusId, usize> = manifest
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.clone(), i))
            .collect();
        let branch_index: HashMap<(BusId, BusId), usize> = manifest
            .branches
            .iter()
            .enumerate()
            .map(|(j, k)| (k.clone(), j))
            .collect();
        let mut empty = BTreeMap::new();
        for &month in &manifest.months {
            for s in &manifest.scenarios {
                empty.insert((month, s.label.clone()), ());
            }
        }
        let voltages = read_series(
            "voltages.csv",
            &contents,
            &empty,
            manifest.buses.len(),
            |r| Ok(*bus_index.get(&BusId::new(&r[3])).ok_or("unknown bus")?),
            4,
        )?;
        let p_from = read_series(
            "flows.csv",
            &contents,
            &empty,
            manifest.branches.len(),
            |r| {
                let key = (BusId::new(&r[3]), BusId::new(&r[4]));
                Ok(*branch_index.get(&key).ok_or("unknown branch")?)
            },
            5,
        )?;
        Ok(PersistedStudy {
            manifest,
            bus_index,
            branch_index,
            voltages,
            p_from,
        })
    }

    pub fn manifest(&self) -> &StudyManifest {
        &self.manifest
    }
}

fn read_series(
    file: &str,
    contents: &HashMap<String, Vec<u8>>,
    keys: &BTreeMap<(u32, String), ()>,
    width: usize,
    element: impl Fn(&csv::StringRecord) -> Result<usize, &'static str>,
    value_col: usize,
) -> Result<BTreeMap<(u32, String), Series>, ReportError> {
    let bytes = contents
        .get(file)
        .ok_or_else(|| ReportError::corrupt(file, "not listed in manifest"))?;
    let mut out: BTreeMap<(u32, String), Series> = keys
        .keys()
        .map(|k| {
            (
                k.clone(),
                vec![vec![None; crate::ingest::STEPS_PER_DAY]; width],
            )
        })
        .collect();
    let mut reader = csv::Reader::from_reader(bytes.as_slice());
    for rec in reader.records() {
        let rec = rec.map_err(|e| ReportError::corrupt(file, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: &str| ReportError::corrupt(file, format!("line {line}: {m}"));
        if rec.len() <= value_col {
            return Err(bad("too few fields"));
        }
        let month: u32 = rec[0].parse().map_err(|_| bad("bad month"))?;
        let step: usize = rec[2].parse().map_err(|_| bad("bad step"))?;
        let idx = element(&rec).map_err(bad)?;
        let series = out
            .get_mut(&(month, rec[1].to_string()))
            .ok_or_else(|| bad("month or scenario not in manifest"))?;
        let slot = series[idx]
            .get_mut(step)
            .ok_or_else(|| bad("step out of range"))?;
        *slot = parse_opt(file, line, &rec[value_col])?;
    }
    Ok(out)
}

impl StudyView for PersistedStudy {
    fn fingerprint(&self) -> &str {
        &self.manifest.fingerprint
    }

    fn months(&self) -> Vec<u32> {
        self.manifest.months.clone()
    }

    fn scenario_labels(&self) -> Vec<String> {
        self.manifest
            .scenarios
            .iter()
            .map(|s| s.label.clone())
            .collect()
    }

    fn has_bus(&self, bus: &BusId) -> bool {
        self.bus_index.contains_key(bus)
    }

    fn has_branch(&self, from: &BusId, to: &BusId) -> bool {
        self.branch_index.contains_key(&(from.clone(), to.clone()))
    }

    fn bus_voltages(&self, bus: &BusId, month: u32, label: &str) -> Option<Vec<Option<f64>>> {
        let i = *self.bus_index.get(bus)?;
        Some(self.voltages.get(&(month, label.to_string()))?[i].clone())
    }

    fn branch_p_from(
        &self,
        from: &BusId,
        to: &BusId,
        month: u32,
        label: &str,
    ) -> Option<Vec<Option<f64>>> {
        let j = *self.branch_index.get(&(from.clone(), to.clone()))?;
        Some(self.p_from.get(&(month, label.to_string()))?[j].clone())
    }
}
