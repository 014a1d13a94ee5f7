//! Run configuration: command-line flags layered over an optional JSON file.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use haltonmask_core::gridmap::NumericMode;
use haltonmask_core::schedulers::step_size_plan;
use haltonmask_core::toymodel::Neighborhood;
use haltonmask_core::{ConfidenceConfig, GridSpec, PlanShape, StepSizePlan, ToyJointModel};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedulerChoice {
    Halton,
    Random,
    Confidence,
    /// Raster order cut into contiguous blocks.
    #[value(alias = "raster")]
    #[serde(alias = "raster")]
    Clustered,
}

impl SchedulerChoice {
    pub fn name(self) -> &'static str {
        match self {
            SchedulerChoice::Halton => "halton",
            SchedulerChoice::Random => "random",
            SchedulerChoice::Confidence => "confidence",
            SchedulerChoice::Clustered => "clustered",
        }
    }

    pub fn uses_seed(self) -> bool {
        matches!(self, SchedulerChoice::Random | SchedulerChoice::Confidence)
    }
}

impl fmt::Display for SchedulerChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlanChoice {
    Cosine,
    Linear,
}

impl From<PlanChoice> for PlanShape {
    fn from(p: PlanChoice) -> Self {
        match p {
            PlanChoice::Cosine => PlanShape::Cosine,
            PlanChoice::Linear => PlanShape::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumericChoice {
    Rational,
    Float,
}

impl From<NumericChoice> for NumericMode {
    fn from(m: NumericChoice) -> Self {
        match m {
            NumericChoice::Rational => NumericMode::Rational,
            NumericChoice::Float => NumericMode::Float,
        }
    }
}

/// Interaction radius: a distance or `"full"` for every pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusSetting {
    Distance(f64),
    Named(FullKeyword),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FullKeyword {
    Full,
}

fn parse_radius(s: &str) -> std::result::Result<RadiusSetting, String> {
    if s.eq_ignore_ascii_case("full") {
        return Ok(RadiusSetting::Named(FullKeyword::Full));
    }
    s.parse::<f64>()
        .map(RadiusSetting::Distance)
        .map_err(|_| format!("expected a distance or \"full\", got {s:?}"))
}

/// Flags shared by every subcommand. Any flag given here wins over the
/// same key in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON file with any of the keys below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "HxW")]
    pub grid: Option<String>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Repeat or comma-separate to compare several.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub scheduler: Vec<SchedulerChoice>,
    /// Generated and printed when absent.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub vocab: Option<usize>,
    /// Interaction radius in cells, or "full".
    #[arg(long, value_parser = parse_radius)]
    pub radius: Option<RadiusSetting>,
    #[arg(long, value_enum)]
    pub plan: Option<PlanChoice>,
    /// Initial Gumbel noise scale of the confidence scheduler.
    #[arg(long)]
    pub gumbel_scale: Option<f64>,
    /// Temperature applied to marginals when sampling values.
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Report exact information-theoretic quantities.
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub numeric_mode: Option<NumericChoice>,
}

/// The on-disk form of a configuration. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub grid: Option<String>,
    pub steps: Option<usize>,
    pub schedulers: Option<Vec<SchedulerChoice>>,
    pub seed: Option<u64>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub vocab: Option<usize>,
    pub radius: Option<RadiusSetting>,
    pub plan: Option<PlanChoice>,
    pub gumbel_scale: Option<f64>,
    pub softmax_temperature: Option<f64>,
    pub temperature: Option<f64>,
    pub exact: Option<bool>,
    pub out: Option<PathBuf>,
    pub numeric_mode: Option<NumericChoice>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))
    }
}

/// Toy-field parameters as recorded in output headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub vocab: usize,
    pub beta: f64,
    pub lambda: f64,
    pub radius: RadiusSetting,
}

impl ModelParams {
    pub fn build(&self, grid: GridSpec) -> Result<ToyJointModel> {
        let neighborhood = match self.radius {
            RadiusSetting::Distance(r) => Neighborhood::Radius(r),
            RadiusSetting::Named(FullKeyword::Full) => Neighborhood::Full,
        };
        Ok(ToyJointModel::new(
            grid,
            self.vocab,
            self.beta,
            self.lambda,
            neighborhood,
        )?)
    }
}

/// A fully resolved and validated run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub grid: GridSpec,
    pub plan: StepSizePlan,
    pub plan_shape: PlanChoice,
    pub schedulers: Vec<SchedulerChoice>,
    pub seed: Option<u64>,
    pub model: ModelParams,
    pub confidence: ConfidenceConfig,
    pub temperature: f64,
    pub exact: bool,
    pub out: PathBuf,
    pub numeric_mode: NumericChoice,
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        let grid_text = args
            .grid
            .clone()
            .or(file.grid)
            .ok_or_else(|| CliError::config("--grid is required"))?;
        let grid = parse_grid(&grid_text)?;
        let steps = args
            .steps
            .or(file.steps)
            .ok_or_else(|| CliError::config("--steps is required"))?;
        let plan_shape = args.plan.or(file.plan).unwrap_or(PlanChoice::Cosine);
        let plan = step_size_plan(grid.cell_count(), steps, plan_shape.into())?;
        let schedulers = if args.scheduler.is_empty() {
            file.schedulers.unwrap_or_default()
        } else {
            args.scheduler.clone()
        };

        let model = ModelParams {
            vocab: args.vocab.or(file.vocab).unwrap_or(2),
            beta: args.beta.or(file.beta).unwrap_or(1.0),
            lambda: args.lambda.or(file.lambda).unwrap_or(1.0),
            radius: args
                .radius
                .or(file.radius)
                .unwrap_or(RadiusSetting::Distance(std::f64::consts::SQRT_2)),
        };
        // Surface model parameter errors before any work starts.
        model.build(grid)?;

        let defaults = ConfidenceConfig::default();
        let confidence = ConfidenceConfig::new(
            args.gumbel_scale
                .or(file.gumbel_scale)
                .unwrap_or(defaults.gumbel_scale_initial()),
            file.softmax_temperature
                .unwrap_or(defaults.softmax_temperature()),
        )?;
        let temperature = args.temperature.or(file.temperature).unwrap_or(1.0);
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(CliError::config("temperature must be finite and > 0"));
        }

        Ok(RunConfig {
            grid,
            plan,
            plan_shape,
            schedulers,
            seed: args.seed.or(file.seed),
            model,
            confidence,
            temperature,
            exact: args.exact || file.exact.unwrap_or(false),
            out: args
                .out
                .clone()
                .or(file.out)
                .unwrap_or_else(|| PathBuf::from(".")),
            numeric_mode: args
                .numeric_mode
                .or(file.numeric_mode)
                .unwrap_or(NumericChoice::Float),
        })
    }

    /// The single scheduler of a one-scheduler command.
    pub fn single_scheduler(&self, default: SchedulerChoice) -> Result<SchedulerChoice> {
        match self.schedulers.as_slice() {
            [] => Ok(default),
            [one] => Ok(*one),
            _ => Err(CliError::config(
                "this command takes exactly one --scheduler",
            )),
        }
    }

    /// The configured seed, or a fresh one announced on stderr.
    pub fn seed_or_generate(&mut self) -> u64 {
        *self.seed.get_or_insert_with(|| {
            let seed = rand::random::<u64>();
            eprintln!("no --seed given, using generated seed {seed}");
            seed
        })
    }
}

pub fn parse_grid(text: &str) -> Result<GridSpec> {
    let bad = || CliError::config(format!("grid must look like HxW, got {text:?}"));
    let (h, w) = text.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    let h = h.trim().parse().map_err(|_| bad())?;
    let w = w.trim().parse().map_err(|_| bad())?;
    Ok(GridSpec::new(h, w)?)
}
