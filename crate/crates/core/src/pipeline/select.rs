use super::PipelineError;
use crate::network::BusId;
use crate::report::ChartSelection;
use crate::scenario::StudyView;

/// Raw `key=value` selections from the command line.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReportSelections {
    pub voltage: Vec<String>,
    pub swing: Vec<String>,
    pub flow: Vec<String>,
}

/// Splits `a=1,b=x,y` into `[(a, "1"), (b, "x,y")]`: a token without `=`
/// continues the previous value, so month lists need no quoting.
pub fn parse_selection(text: &str) -> Result<Vec<(String, String)>, PipelineError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for token in text.split([',', ' ']).filter(|t| !t.is_empty()) {
        match token.split_once('=') {
            Some((k, v)) => out.push((k.trim().to_string(), v.trim().to_string())),
            None => match out.last_mut() {
                Some((_, v)) => {
                    v.push(',');
                    v.push_str(token.trim());
                }
                None => return Err(PipelineError::UnknownSelection(text.to_string())),
            },
        }
    }
    Ok(out)
}

fn months(value: &str, available: &[u32], raw: &str) -> Result<Vec<u32>, PipelineError> {
    if value == "all" {
        return Ok(available.to_vec());
    }
    value
        .split(',')
        .map(|m| match m.trim().parse::<u32>() {
            Ok(m) if available.contains(&m) => Ok(m),
            _ => Err(PipelineError::UnknownSelection(format!(
                "month {m:?} in {raw}"
            ))),
        })
        .collect()
}

fn take(
    pairs: &[(String, String)],
    allowed: &[&str],
    raw: &str,
) -> Result<Vec<Option<String>>, PipelineError> {
    if let Some((k, _)) = pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(PipelineError::UnknownSelection(format!(
            "key {k:?} in {raw}"
        )));
    }
    Ok(allowed
        .iter()
        .map(|a| pairs.iter().find(|(k, _)| k == a).map(|(_, v)| v.clone()))
        .collect())
}

fn required(v: Option<String>, key: &str, raw: &str) -> Result<String, PipelineError> {
    v.ok_or_else(|| PipelineError::UnknownSelection(format!("missing {key}= in {raw}")))
}

impl ReportSelections {
    pub fn is_empty(&self) -> bool {
        self.voltage.is_empty() && self.swing.is_empty() && self.flow.is_empty()
    }

    /// Parses every selection and checks its keys against the study.
    pub fn resolve(&self, study: &impl StudyView) -> Result<Vec<ChartSelection>, PipelineError> {
        let available = study.months();
        let mut out = Vec::new();
        let bus = |id: String| {
            let b = BusId::new(id);
            if study.has_bus(&b) {
                Ok(b)
            } else {
                Err(PipelineError::UnknownSelection(format!("bus {b}")))
            }
        };
        for raw in &self.voltage {
            let mut v = take(&parse_selection(raw)?, &["bus", "months"], raw)?.into_iter();
            let b = bus(required(v.next().flatten(), "bus", raw)?)?;
            let m = v.next().flatten().unwrap_or_else(|| "all".into());
            out.push(ChartSelection::Voltage {
                bus: b,
                months: months(&m, &available, raw)?,
            });
        }
        for raw in &self.swing {
            let mut v = take(&parse_selection(raw)?, &["bus"], raw)?.into_iter();
            out.push(ChartSelection::Swing {
                bus: bus(required(v.next().flatten(), "bus", raw)?)?,
            });
        }
        for raw in &self.flow {
            let mut v = take(&parse_selection(raw)?, &["from", "to", "months"], raw)?.into_iter();
            let from = BusId::new(required(v.next().flatten(), "from", raw)?);
            let to = BusId::new(required(v.next().flatten(), "to", raw)?);
            if !study.has_branch(&from, &to) {
                return Err(PipelineError::UnknownSelection(format!(
                    "branch {from}->{to}"
                )));
            }
            let m = v.next().flatten().unwrap_or_else(|| "all".into());
            out.push(ChartSelection::Flow {
                from,
                to,
                months: months(&m, &available, raw)?,
            });
        }
        Ok(out)
    }
}
