//! End-to-end commands behind the CLI: input validation, study runs that
//! persist their tables, and chart reports built from persisted studies.

mod config;
mod select;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{parse_config_str, Overrides, StudyConfig};
pub use select::{parse_selection, ReportSelections};

use crate::ingest::{
    extract_daily_profile, fill_gaps, parse_meter_reader, worst_case_day, BusMapping, DailyProfile,
    IngestError, MeterKind, MeterSeries,
};
use crate::network::{
    parse_topology_str, review_topology_str, Finding, FindingCode, TopologyError,
};
use crate::report::{
    branch_limits, emit_charts, emit_tables, PersistedStudy, ReportError, StudyManifest,
};
use crate::scenario::{
    run_study, PreparedNetwork, ScenarioError, StudyOptions, StudyResult, StudyView,
};
use crate::SolverOptions;

pub const RUN_MANIFEST_FILE: &str = "run_manifest.json";

/// Process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Exit {
    Success = 0,
    /// Invalid inputs or a failed domain check.
    Domain = 1,
    /// Unreadable or unwritable files.
    Environment = 2,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{}: key `{key}`: {message}", path.display())]
    Config {
        path: PathBuf,
        key: String,
        message: String,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("unknown selection: {0}")]
    UnknownSelection(String),
}

impl PipelineError {
    pub fn exit(&self) -> Exit {
        match self {
            PipelineError::Io { .. }
            | PipelineError::Topology(TopologyError::Io { .. })
            | PipelineError::Ingest(IngestError::Io { .. })
            | PipelineError::Report(ReportError::Io { .. }) => Exit::Environment,
            _ => Exit::Domain,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn read(path: &Path) -> Result<Vec<u8>, PipelineError> {
    fs::read(path).map_err(|e| PipelineError::io(path, e))
}

fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Outcome of `validate`: every finding plus the exit status they imply.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationOutcome {
    pub findings: Vec<Finding>,
    pub exit: Exit,
}

/// Checks a topology and meter files without running any power flow.
pub fn cmd_validate(
    topology: &Path,
    meters: &[PathBuf],
) -> Result<ValidationOutcome, PipelineError> {
    let text = fs::read_to_string(topology).map_err(|e| PipelineError::io(topology, e))?;
    let mut findings = Vec::new();
    let model = match review_topology_str(&text) {
        Ok((model, f)) => {
            findings.extend(f);
            Some(model)
        }
        Err(e) => {
            findings.push(Finding::fatal(
                FindingCode::InvalidValue,
                topology.display().to_string(),
                e.to_string(),
            ));
            None
        }
    };
    let mut series = Vec::new();
    for path in meters {
        let bytes = read(path)?;
        match parse_meter_reader(bytes.as_slice(), &path.display().to_string()) {
            Ok(file) => {
                if file.missing_q > 0 {
                    findings.push(Finding::warning(
                        FindingCode::MeterFormat,
                        path.display().to_string(),
                        format!("{} rows without q_kvar, taken as 0", file.missing_q),
                    ));
                }
                series.extend(file.series);
            }
            Err(e) => findings.push(Finding::fatal(
                FindingCode::MeterFormat,
                path.display().to_string(),
                e.to_string(),
            )),
        }
    }
    for s in &series {
        for gap in s.gaps() {
            findings.push(Finding::warning(
                FindingCode::MeterFormat,
                s.meter_id.clone(),
                format!("{} missing intervals from {}", gap.missing_steps, gap.start),
            ));
        }
    }
    if let Some(model) = &model {
        let buses: BTreeSet<_> = model.buses.iter().map(|b| &b.id).collect();
        for s in &series {
            if !buses.contains(&s.bus) {
                findings.push(Finding::fatal(
                    FindingCode::DanglingEndpoint,
                    s.meter_id.clone(),
                    format!("meter references unknown bus {}", s.bus),
                ));
            }
        }
        if !meters.is_empty() {
            for g in &model.generators {
                let Some(s) = series.iter().find(|s| s.meter_id == g.profile_id) else {
                    findings.push(Finding::warning(
                        FindingCode::UnknownProfile,
                        g.profile_id.clone(),
                        format!("generator at {} has no meter series", g.bus),
                    ));
                    continue;
                };
                let peak_mw = s.samples.iter().map(|x| x.p_kw).fold(0.0, f64::max) / 1000.0;
                if peak_mw > g.rating_mw {
                    findings.push(Finding::fatal(
                        FindingCode::GenerationAboveRating,
                        g.profile_id.clone(),
                        format!("peak {peak_mw} MW exceeds rating {} MW", g.rating_mw),
                    ));
                }
            }
        }
    }
    let exit = if findings
        .iter()
        .any(|f| f.severity == crate::network::Severity::Fatal)
    {
        Exit::Domain
    } else {
        Exit::Success
    };
    Ok(ValidationOutcome { findings, exit })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InputHash {
    pub path: PathBuf,
    pub sha256: String,
}

/// Parsed inputs of a study, ready to solve.
#[derive(Clone, Debug)]
pub struct StudyInputs {
    pub config: StudyConfig,
    pub network: PreparedNetwork,
    pub series: Vec<MeterSeries>,
    pub dates: Vec<NaiveDate>,
    pub base: Vec<DailyProfile>,
    pub ev: Vec<DailyProfile>,
    pub hashes: Vec<InputHash>,
    pub missing_q: usize,
}

impl StudyInputs {
    pub fn options(&self) -> StudyOptions {
        StudyOptions {
            solver: SolverOptions {
                tolerance_pu: self.config.tolerance,
                max_iterations: self.config.max_iterations,
                ..SolverOptions::default()
            },
            warm_start: self.config.warm_start,
            jobs: self.config.jobs,
        }
    }

    pub fn run(&self) -> Result<StudyResult, PipelineError> {
        Ok(run_study(
            &self.network,
            &self.base,
            &self.ev,
            &self.config.ev_scale_factors,
            &self.options(),
        )?)
    }
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<StudyConfig, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| PipelineError::io(path, e))?;
    let mut config = parse_config_str(&text, path)?;
    config.apply(overrides);
    Ok(config)
}

/// Reads, gap-fills and reduces the meter data to one worst-case day per
/// configured month. The day is ranked on building plus EV demand; PV is
/// excluded from the ranking but kept in the base profile.
pub fn load_inputs(config: StudyConfig) -> Result<StudyInputs, PipelineError> {
    let mut hashes = Vec::new();
    let bytes = read(&config.topology)?;
    hashes.push(InputHash {
        path: config.topology.clone(),
        sha256: sha256(&bytes),
    });
    let text = String::from_utf8(bytes).map_err(|e| {
        PipelineError::io(
            &config.topology,
            std::io::Error::new(std::io::ErrorKind::InvalidData, e),
        )
    })?;
    let (model, warnings) = parse_topology_str(&text)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let network = PreparedNetwork::new(model)?;

    let mut series = Vec::new();
    let mut missing_q = 0;
    for path in &config.meters {
        let bytes = read(path)?;
        hashes.push(InputHash {
            path: path.clone(),
            sha256: sha256(&bytes),
        });
        let file = parse_meter_reader(bytes.as_slice(), &path.display().to_string())?;
        if file.missing_q > 0 {
            log::warn!(
                "{}: {} rows without q_kvar, taken as 0",
                path.display(),
                file.missing_q
            );
        }
        missing_q += file.missing_q;
        for s in file.series {
            series.push(fill_gaps(&s, config.max_gap_steps)?);
        }
    }

    let demand: Vec<&MeterSeries> = series
        .iter()
        .filter(|s| s.kind != MeterKind::PvGeneration)
        .collect();
    let base_meters: Vec<&MeterSeries> = series
        .iter()
        .filter(|s| s.kind != MeterKind::EvStation)
        .collect();
    let ev_meters: Vec<&MeterSeries> = series
        .iter()
        .filter(|s| s.kind == MeterKind::EvStation)
        .collect();
    let mapping = BusMapping::default();
    let mut dates = Vec::new();
    let (mut base, mut ev) = (Vec::new(), Vec::new());
    for &month in &config.months {
        let date = worst_case_day(&demand, month)?;
        log::info!("month {month}: worst-case day {date}");
        base.push(extract_daily_profile(&base_meters, date, &mapping)?);
        ev.push(extract_daily_profile(&ev_meters, date, &mapping)?);
        dates.push(date);
    }
    Ok(StudyInputs {
        config,
        network,
        series,
        dates,
        base,
        ev,
        hashes,
        missing_q,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: StudyConfig,
    pub inputs: Vec<InputHash>,
    pub worst_case_days: Vec<NaiveDate>,
    pub started_at: String,
    pub finished_at: String,
    pub attempted_solves: usize,
    pub non_converged: usize,
    pub missing_q_rows: usize,
    pub exit_status: i32,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub study: StudyResult,
    pub manifest: StudyManifest,
    pub run: RunManifest,
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, bytes).map_err(|e| PipelineError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| PipelineError::io(path, e))
}

/// Runs the configured study and persists its tables, table manifest and a
/// run manifest into `out_dir`. Non-converged steps do not fail the run.
pub fn cmd_run(
    config: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<RunOutcome, PipelineError> {
    let started_at = now();
    let inputs = load_inputs(load_config(config, overrides)?)?;
    let study = inputs.run()?;
    if study.non_converged() > 0 {
        log::warn!(
            "{} of {} steps did not converge",
            study.non_converged(),
            study.attempted_solves()
        );
    }
    let manifest = emit_tables(&study, &branch_limits(&inputs.network), out_dir)?;
    let run = RunManifest {
        config: inputs.config.clone(),
        inputs: inputs.hashes.clone(),
        worst_case_days: inputs.dates.clone(),
        started_at,
        finished_at: now(),
        attempted_solves: study.attempted_solves(),
        non_converged: study.non_converged(),
        missing_q_rows: inputs.missing_q,
        exit_status: Exit::Success.code(),
    };
    let mut json = serde_json::to_string_pretty(&run).expect("run manifest serializes");
    json.push('\n');
    write_atomic(&out_dir.join(RUN_MANIFEST_FILE), json.as_bytes())?;
    Ok(RunOutcome {
        study,
        manifest,
        run,
    })
}

/// Draws the selected charts from a persisted study into `out_dir`. Nothing
/// is re-solved.
pub fn cmd_report(
    study_dir: &Path,
    selections: &ReportSelections,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, PipelineError> {
    let study = PersistedStudy::load(study_dir)?;
    let (base, ev) = match &study.manifest().comparison {
        Some((b, e)) => (b.clone(), e.clone()),
        None => {
            let only = study.scenario_labels().remove(0);
            (only.clone(), only)
        }
    };
    let charts = selections.resolve(&study)?;
    emit_charts(&study, &charts, &base, &ev, out_dir).map_err(|e| match e {
        ReportError::UnknownKey(k) => PipelineError::UnknownSelection(k),
        ReportError::UnknownBranch(f, t) => {
            PipelineError::UnknownSelection(format!("branch {f}->{t}"))
        }
        other => other.into(),
    })
}
