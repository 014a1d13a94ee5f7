//! JSON schedule files: a header describing the run and a body of steps,
//! each a list of `[row, col]` pairs.

use std::path::Path;

use haltonmask_core::{Coord, GridSpec, Schedule};
use serde::{Deserialize, Serialize};

use crate::config::{ModelParams, NumericChoice, PlanChoice, SchedulerChoice};
use crate::error::{CliError, Result};
use crate::io::write_atomic;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleHeader {
    pub version: u32,
    pub height: usize,
    pub width: usize,
    pub steps: usize,
    pub scheduler: SchedulerChoice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub params: ScheduleParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleParams {
    pub plan: PlanChoice,
    pub numeric_mode: NumericChoice,
    /// Present for the confidence scheduler, whose order depends on the
    /// field and its noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gumbel_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub softmax_temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDocument {
    header: ScheduleHeader,
    body: Vec<Vec<[usize; 2]>>,
}

pub fn to_json(header: &ScheduleHeader, schedule: &Schedule) -> Result<String> {
    let doc = ScheduleDocument {
        header: header.clone(),
        body: schedule
            .steps()
            .iter()
            .map(|step| step.iter().map(|c| [c.row, c.col]).collect())
            .collect(),
    };
    let mut text = serde_json::to_string(&doc).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Parses and validates a schedule: the body must partition the header's
/// grid into exactly `steps` non-empty steps.
pub fn from_json(text: &str) -> Result<(ScheduleHeader, Schedule)> {
    let doc: ScheduleDocument = serde_json::from_str(text)
        .map_err(|e| CliError::config(format!("malformed schedule file: {e}")))?;
    let h = &doc.header;
    if h.version != FORMAT_VERSION {
        return Err(CliError::config(format!(
            "unsupported schedule file version {} (expected {FORMAT_VERSION})",
            h.version
        )));
    }
    if h.steps != doc.body.len() {
        return Err(CliError::config(format!(
            "header declares {} steps but the body has {}",
            h.steps,
            doc.body.len()
        )));
    }
    let grid = GridSpec::new(h.height, h.width)?;
    let steps = doc
        .body
        .iter()
        .map(|step| step.iter().map(|&[r, c]| Coord::new(r, c)).collect())
        .collect();
    let schedule = Schedule::new(grid, steps)?;
    Ok((doc.header, schedule))
}

pub fn write(path: &Path, header: &ScheduleHeader, schedule: &Schedule) -> Result<()> {
    write_atomic(path, to_json(header, schedule)?.as_bytes())
}

pub fn read(path: &Path) -> Result<(ScheduleHeader, Schedule)> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    from_json(&text)
}
