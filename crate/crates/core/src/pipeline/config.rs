use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use super::PipelineError;

const KEYS: [&str; 8] = [
    "topology",
    "meters",
    "ev_scale_factors",
    "months",
    "warm_start",
    "solver",
    "jobs",
    "max_gap_steps",
];

/// Study configuration with paths resolved against the config file's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StudyConfig {
    pub topology: PathBuf,
    pub meters: Vec<PathBuf>,
    pub ev_scale_factors: Vec<f64>,
    pub months: Vec<u32>,
    pub warm_start: bool,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub jobs: Option<usize>,
    pub max_gap_steps: usize,
}

/// Command-line values that take precedence over the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub jobs: Option<usize>,
    pub warm_start: Option<bool>,
}

impl StudyConfig {
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(j) = overrides.jobs {
            self.jobs = Some(j);
        }
        if let Some(w) = overrides.warm_start {
            self.warm_start = w;
        }
    }
}

struct Ctx<'a> {
    path: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, key: &str, message: impl Into<String>) -> PipelineError {
        PipelineError::Config {
            path: self.path.to_path_buf(),
            key: key.to_string(),
            message: message.into(),
        }
    }

    fn string(&self, key: &str, v: &Value) -> Result<String, PipelineError> {
        v.as_str()
            .map(str::to_string)
            .ok_or_else(|| self.err(key, "expected a string"))
    }

    fn uint(&self, key: &str, v: &Value) -> Result<u64, PipelineError> {
        v.as_u64()
            .ok_or_else(|| self.err(key, "expected a non-negative integer"))
    }

    fn array<'v>(&self, key: &str, v: &'v Value) -> Result<&'v Vec<Value>, PipelineError> {
        v.as_array()
            .ok_or_else(|| self.err(key, "expected an array"))
    }
}

pub fn parse_config_str(text: &str, path: &Path) -> Result<StudyConfig, PipelineError> {
    let ctx = Ctx { path };
    let doc: Value = serde_json::from_str(text).map_err(|e| ctx.err("", e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| ctx.err("", "expected a JSON object"))?;
    if let Some(k) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(ctx.err(k, "unknown key"));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: String| base.join(p);

    let topology = obj
        .get("topology")
        .ok_or_else(|| ctx.err("topology", "required"))?;
    let topology = resolve(ctx.string("topology", topology)?);

    let meters = obj
        .get("meters")
        .ok_or_else(|| ctx.err("meters", "required"))?;
    let meters = ctx
        .array("meters", meters)?
        .iter()
        .enumerate()
        .map(|(i, v)| ctx.string(&format!("meters[{i}]"), v).map(resolve))
        .collect::<Result<Vec<_>, _>>()?;
    if meters.is_empty() {
        return Err(ctx.err("meters", "at least one meter file is required"));
    }

    let ev_scale_factors = match obj.get("ev_scale_factors") {
        None => vec![1.0, 4.0],
        Some(v) => ctx
            .array("ev_scale_factors", v)?
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let key = format!("ev_scale_factors[{i}]");
                match f.as_f64() {
                    Some(x) if x.is_finite() && x >= 0.0 => Ok(x),
                    _ => Err(ctx.err(&key, "expected a finite number >= 0")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    if ev_scale_factors.is_empty() {
        return Err(ctx.err("ev_scale_factors", "at least one factor is required"));
    }

    let months = match obj.get("months") {
        None => (1..=12).collect(),
        Some(v) => ctx
            .array("months", v)?
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let key = format!("months[{i}]");
                match ctx.uint(&key, m)? {
                    m @ 1..=12 => Ok(m as u32),
                    _ => Err(ctx.err(&key, "month must be 1..12")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
    };
    if months.is_empty() {
        return Err(ctx.err("months", "at least one month is required"));
    }

    let warm_start = match obj.get("warm_start") {
        None => true,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| ctx.err("warm_start", "expected a boolean"))?,
    };

    let (mut tolerance, mut max_iterations) = (1e-8, 50);
    if let Some(s) = obj.get("solver") {
        let s = s
            .as_object()
            .ok_or_else(|| ctx.err("solver", "expected an object"))?;
        for (k, v) in s {
            let key = format!("solver.{k}");
            match k.as_str() {
                "tolerance" => match v.as_f64() {
                    Some(t) if t > 0.0 && t.is_finite() => tolerance = t,
                    _ => return Err(ctx.err(&key, "expected a positive number")),
                },
                "max_iterations" => match ctx.uint(&key, v)? {
                    0 => return Err(ctx.err(&key, "must be at least 1")),
                    n => max_iterations = n as usize,
                },
                _ => return Err(ctx.err(&key, "unknown key")),
            }
        }
    }

    let jobs = match obj.get("jobs") {
        None | Some(Value::Null) => None,
        Some(v) => match ctx.uint("jobs", v)? {
            0 => return Err(ctx.err("jobs", "must be at least 1")),
            n => Some(n as usize),
        },
    };
    let max_gap_steps = match obj.get("max_gap_steps") {
        None => 4,
        Some(v) => ctx.uint("max_gap_steps", v)? as usize,
    };

    Ok(StudyConfig {
        topology,
        meters,
        ev_scale_factors,
        months,
        warm_start,
        tolerance,
        max_iterations,
        jobs,
        max_gap_steps,
    })
}
