use std::path::PathBuf;

use haltonmask_core::gridmap::halton_token_order_with;
use haltonmask_core::infotheory::{aggregate_mi, trajectory_mi};
use haltonmask_core::schedulers::{random_schedule, raster_schedule};
use haltonmask_core::simulate::SamplingTrace;
use haltonmask_core::toymodel::EXACT_STATE_LIMIT;
use haltonmask_core::{run_sampling, Schedule, SchedulerKind, ToyJointModel};
use serde::Serialize;

use crate::config::{RunConfig, SchedulerChoice};
use crate::error::{CliError, Result};
use crate::io::write_atomic;
use crate::report::{entropy_csv, frame_name, frame_pgm, MetricsCsv};
use crate::schedule_file::{self, ScheduleHeader, ScheduleParams, FORMAT_VERSION};

fn halton(cfg: &RunConfig) -> Result<Schedule> {
    let order = halton_token_order_with(cfg.grid, cfg.numeric_mode.into())?;
    Ok(Schedule::from_order(&order, &cfg.plan)?)
}

fn scheduler_kind(cfg: &RunConfig, choice: SchedulerChoice) -> Result<SchedulerKind> {
    Ok(match choice {
        SchedulerChoice::Halton => SchedulerKind::Fixed(halton(cfg)?),
        SchedulerChoice::Clustered => SchedulerKind::Fixed(raster_schedule(cfg.grid, &cfg.plan)?),
        SchedulerChoice::Random => SchedulerKind::Random,
        SchedulerChoice::Confidence => SchedulerKind::Confidence(cfg.confidence),
    })
}

fn sample(
    cfg: &RunConfig,
    model: &ToyJointModel,
    choice: SchedulerChoice,
    seed: u64,
) -> Result<SamplingTrace> {
    let kind = scheduler_kind(cfg, choice)?;
    Ok(run_sampling(
        model,
        &kind,
        cfg.grid,
        &cfg.plan,
        seed,
        cfg.temperature,
    )?)
}

/// Writes `schedule.json` and returns its path.
pub fn schedule(mut cfg: RunConfig) -> Result<PathBuf> {
    let choice = cfg.single_scheduler(SchedulerChoice::Halton)?;
    let seed = choice.uses_seed().then(|| cfg.seed_or_generate());
    let mut params = ScheduleParams {
        plan: cfg.plan_shape,
        numeric_mode: cfg.numeric_mode,
        gumbel_scale: None,
        softmax_temperature: None,
        temperature: None,
        model: None,
    };
    let schedule = match (choice, seed) {
        (SchedulerChoice::Halton, _) => halton(&cfg)?,
        (SchedulerChoice::Clustered, _) => raster_schedule(cfg.grid, &cfg.plan)?,
        (SchedulerChoice::Random, Some(seed)) => random_schedule(cfg.grid, &cfg.plan, seed)?,
        (SchedulerChoice::Confidence, Some(seed)) => {
            params.gumbel_scale = Some(cfg.confidence.gumbel_scale_initial());
            params.softmax_temperature = Some(cfg.confidence.softmax_temperature());
            params.temperature = Some(cfg.temperature);
            params.model = Some(cfg.model);
            let model = cfg.model.build(cfg.grid)?;
            sample(&cfg, &model, choice, seed)?.schedule()?
        }
        _ => return Err(CliError::Internal("seeded scheduler without a seed".into())),
    };
    let header = ScheduleHeader {
        version: FORMAT_VERSION,
        height: cfg.grid.height(),
        width: cfg.grid.width(),
        steps: schedule.step_count(),
        scheduler: choice,
        seed,
        params,
    };
    let path = cfg.out.join("schedule.json");
    schedule_file::write(&path, &header, &schedule)?;
    // Read back so a file that would not load is never reported as written.
    let (_, back) = schedule_file::read(&path)?;
    if back != schedule {
        return Err(CliError::Internal(
            "schedule file did not round trip".into(),
        ));
    }
    Ok(path)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchedulerSummary {
    pub scheduler: SchedulerChoice,
    /// Expected aggregate mutual information of the realized schedule, in
    /// nats. Only computed in exact mode.
    pub aggregate_mi_nats: Option<f64>,
    pub final_step_entropy_sum_nats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareSummary {
    pub grid: String,
    pub steps: usize,
    pub seed: u64,
    pub exact: bool,
    pub schedulers: Vec<SchedulerSummary>,
}

struct Analysis {
    trace: SamplingTrace,
    kl: Option<Vec<f64>>,
    aggregate: Option<f64>,
}

fn analyse(
    cfg: &RunConfig,
    model: &ToyJointModel,
    choice: SchedulerChoice,
    seed: u64,
) -> Result<Analysis> {
    let trace = sample(cfg, model, choice, seed)?;
    let (kl, aggregate) = if cfg.exact {
        let realized = trace.schedule()?;
        let kl = trajectory_mi(model, &realized, &trace.final_grid)?
            .iter()
            .map(|d| d.kl_joint_vs_product)
            .collect();
        (Some(kl), Some(aggregate_mi(model, &realized)?))
    } else {
        (None, None)
    };
    Ok(Analysis {
        trace,
        kl,
        aggregate,
    })
}

/// Writes `metrics.csv` and `summary.json`.
pub fn compare(mut cfg: RunConfig) -> Result<CompareSummary> {
    if cfg.schedulers.is_empty() {
        cfg.schedulers = vec![
            SchedulerChoice::Halton,
            SchedulerChoice::Random,
            SchedulerChoice::Confidence,
        ];
    }
    let model = cfg.model.build(cfg.grid)?;
    if cfg.exact && model.state_space() > EXACT_STATE_LIMIT {
        return Err(haltonmask_core::Error::ResourceLimit {
            what: "exact joint table",
            needed: model.state_space(),
            limit: EXACT_STATE_LIMIT,
        }
        .into());
    }
    let seed = cfg.seed_or_generate();

    // Each scheduler is independent; results are gathered in request order.
    let analyses: Vec<Result<Analysis>> = std::thread::scope(|scope| {
        let handles: Vec<_> = cfg
            .schedulers
            .iter()
            .map(|&choice| {
                let (cfg, model) = (&cfg, &model);
                scope.spawn(move || analyse(cfg, model, choice, seed))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Internal("analysis thread panicked".into())))
            })
            .collect()
    });

    let mut csv = MetricsCsv::new()?;
    let mut summaries = Vec::new();
    for (&choice, analysis) in cfg.schedulers.iter().zip(analyses) {
        let a = analysis?;
        csv.push_trace(choice.name(), &a.trace, a.kl.as_deref())?;
        summaries.push(SchedulerSummary {
            scheduler: choice,
            aggregate_mi_nats: a.aggregate,
            final_step_entropy_sum_nats: a
                .trace
                .steps
                .last()
                .map_or(0.0, |s| s.metrics.entropy_sum),
        });
    }
    write_atomic(&cfg.out.join("metrics.csv"), &csv.finish()?)?;

    let summary = CompareSummary {
        grid: cfg.grid.to_string(),
        steps: cfg.plan.steps(),
        seed,
        exact: cfg.exact,
        schedulers: summaries,
    };
    let mut json =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Internal(e.to_string()))?;
    json.push('\n');
    write_atomic(&cfg.out.join("summary.json"), json.as_bytes())?;
    Ok(summary)
}

/// Writes one graymap per step plus `entropies.csv`; returns the frame
/// count.
pub fn entropy_maps(mut cfg: RunConfig) -> Result<usize> {
    let choice = cfg.single_scheduler(SchedulerChoice::Halton)?;
    let seed = cfg.seed_or_generate();
    let model = cfg.model.build(cfg.grid)?;
    let trace = sample(&cfg, &model, choice, seed)?;
    let steps = trace.steps.len();
    let frames = (1..=steps)
        .map(|s| {
            trace
                .frame_after(s)
                .ok_or_else(|| CliError::Internal(format!("no frame after step {s}")))
        })
        .collect::<Result<Vec<_>>>()?;
    for (i, frame) in frames.iter().enumerate() {
        write_atomic(
            &cfg.out.join(frame_name(i + 1, steps)),
            &frame_pgm(frame, trace.vocab)?,
        )?;
    }
    write_atomic(&cfg.out.join("entropies.csv"), &entropy_csv(&frames)?)?;
    Ok(steps)
}
