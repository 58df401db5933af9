use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::{NaiveDate, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{IngestError, CADENCE_SECONDS};
use crate::network::BusId;

pub const METER_HEADER: [&str; 6] = ["timestamp", "meter_id", "bus_id", "kind", "p_kw", "q_kvar"];
const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeterKind {
    Building,
    EvStation,
    PvGeneration,
}

impl MeterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MeterKind::Building => "building",
            MeterKind::EvStation => "ev_station",
            MeterKind::PvGeneration => "pv_generation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "building" => Some(MeterKind::Building),
            "ev_station" => Some(MeterKind::EvStation),
            "pv_generation" => Some(MeterKind::PvGeneration),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeterSample {
    pub timestamp: NaiveDateTime,
    pub p_kw: f64,
    pub q_kvar: f64,
}

/// A run of missing intervals: `start` is the first absent timestamp.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Gap {
    pub start: NaiveDateTime,
    pub missing_steps: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeterSeries {
    pub meter_id: String,
    pub bus: BusId,
    pub kind: MeterKind,
    /// Strictly increasing timestamps.
    pub samples: Vec<MeterSample>,
}

impl MeterSeries {
    pub fn gaps(&self) -> Vec<Gap> {
        self.samples
            .windows(2)
            .filter_map(|w| {
                let steps = (w[1].timestamp - w[0].timestamp).num_seconds() / CADENCE_SECONDS;
                (steps > 1).then(|| Gap {
                    start: w[0].timestamp + chrono::Duration::seconds(CADENCE_SECONDS),
                    missing_steps: steps - 1,
                })
            })
            .collect()
    }

    pub fn span(&self) -> Option<(NaiveDateTime, NaiveDateTime)> {
        Some((
            self.samples.first()?.timestamp,
            self.samples.last()?.timestamp,
        ))
    }

    /// Samples falling on `date`, in order.
    pub fn day(&self, date: NaiveDate) -> &[MeterSample] {
        let lo = self.samples.partition_point(|s| s.timestamp.date() < date);
        let hi = self.samples.partition_point(|s| s.timestamp.date() <= date);
        &self.samples[lo..hi]
    }
}

/// Every meter found in one CSV file, in order of first appearance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MeterFile {
    pub series: Vec<MeterSeries>,
    /// Rows whose `q_kvar` was empty and defaulted to zero.
    pub missing_q: usize,
}

pub fn parse_meter_csv(path: impl AsRef<Path>) -> Result<MeterFile, IngestError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_meter_reader(std::io::BufReader::new(file), &path.display().to_string())
}

fn is_quarter_hour(t: &NaiveDateTime) -> bool {
    t.minute().is_multiple_of(15) && t.second() == 0 && t.nanosecond() == 0
}

/// Parses meter CSV text; `source_name` labels error messages.
pub fn parse_meter_reader<R: Read>(reader: R, source_name: &str) -> Result<MeterFile, IngestError> {
    let format = |line: u64, message: String| IngestError::Format {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::None)
        .from_reader(reader);
    let header = csv.headers().map_err(|e| format(1, e.to_string()))?.clone();
    if header.iter().ne(METER_HEADER.iter().copied()) {
        return Err(format(
            1,
            format!("header must be `{}`", METER_HEADER.join(",")),
        ));
    }

    let mut out = MeterFile::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let more = csv.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            format(line, e.to_string())
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line());
        let timestamp = NaiveDateTime::parse_from_str(&record[0], TIMESTAMP_FORMAT)
            .map_err(|e| format(line, format!("bad timestamp {:?}: {e}", &record[0])))?;
        let meter_id = &record[1];
        if meter_id.is_empty() {
            return Err(format(line, "empty meter_id".into()));
        }
        if !is_quarter_hour(&timestamp) {
            return Err(IngestError::NonQuarterHour {
                meter: meter_id.to_string(),
                at: timestamp,
            });
        }
        let kind = MeterKind::parse(&record[3])
            .ok_or_else(|| format(line, format!("unknown kind {:?}", &record[3])))?;
        let number = |field: &str, name: &str| -> Result<f64, IngestError> {
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format(line, format!("bad {name} {field:?}")))
        };
        let p_kw = number(&record[4], "p_kw")?;
        let q_kvar = if record[5].is_empty() {
            out.missing_q += 1;
            0.0
        } else {
            number(&record[5], "q_kvar")?
        };
        let bus = BusId::new(&record[2]);
        let slot = *index.entry(meter_id.to_string()).or_insert_with(|| {
            out.series.push(MeterSeries {
                meter_id: meter_id.to_string(),
                bus: bus.clone(),
                kind,
                samples: Vec::new(),
            });
            out.series.len() - 1
        });
        let series = &mut out.series[slot];
        if series.bus != bus || series.kind != kind {
            return Err(format(
                line,
                format!("meter {meter_id} changes bus or kind mid-file"),
            ));
        }
        series.samples.push(MeterSample {
            timestamp,
            p_kw,
            q_kvar,
        });
    }

    for series in &mut out.series {
        if !series
            .samples
            .windows(2)
            .all(|w| w[0].timestamp < w[1].timestamp)
        {
            series.samples.sort_by_key(|s| s.timestamp);
        }
        if let Some(w) = series
            .samples
            .windows(2)
            .find(|w| w[0].timestamp == w[1].timestamp)
        {
            return Err(IngestError::DuplicateTimestamp {
                meter: series.meter_id.clone(),
                at: w[0].timestamp,
            });
        }
    }
    Ok(out)
}
