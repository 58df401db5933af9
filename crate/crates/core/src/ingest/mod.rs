//! Interval meter ingestion and construction of representative daily load
//! profiles and base-vs-EV scenario schedules.

mod gaps;
mod meter;
mod profile;

use chrono::{NaiveDate, NaiveDateTime};
use thiserror::Error;

pub use gaps::fill_gaps;
pub use meter::{
    parse_meter_csv, parse_meter_reader, Gap, MeterFile, MeterKind, MeterSample, MeterSeries,
    METER_HEADER,
};
pub use profile::{
    compose_scenarios, extract_daily_profile, scale_ev, step_of, worst_case_day, BusLoad,
    BusMapping, DailyProfile, MonthScenario, ScenarioSet, STEPS_PER_DAY,
};

/// Nominal meter cadence in seconds.
pub const CADENCE_SECONDS: i64 = 900;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{source_name} line {line}: {message}")]
    Format {
        source_name: String,
        line: u64,
        message: String,
    },
    #[error("meter {meter}: duplicate timestamp {at}")]
    DuplicateTimestamp { meter: String, at: NaiveDateTime },
    #[error("meter {meter}: timestamp {at} is not on a 15-minute boundary")]
    NonQuarterHour { meter: String, at: NaiveDateTime },
    #[error("meter {meter}: gap of {missing_steps} intervals starting {start} exceeds limit")]
    GapTooLarge {
        meter: String,
        start: NaiveDateTime,
        missing_steps: i64,
    },
    #[error("month {month} has no complete 96-interval day")]
    NoCompleteDay { month: u32 },
    #[error("meter {meter} is missing steps {missing_steps:?} on {date}")]
    IncompleteDay {
        meter: String,
        date: NaiveDate,
        missing_steps: Vec<usize>,
    },
    #[error("base profile for {base} is not aligned with EV profile for {ev}")]
    DateMisalignment { base: NaiveDate, ev: NaiveDate },
    #[error("{0}")]
    Invalid(String),
}
