//! The iterative unmasking loop.
//!
//! Each step queries the predictor on the current mask state, draws a
//! provisional value for every masked cell from its (tempered) marginal, then
//! commits the values of the cells chosen for this step. Fixed-order
//! schedulers choose the precomputed cells; the confidence scheduler ranks the
//! provisional values. Provisional values of cells that are not chosen are
//! discarded and redrawn at the next step.
//!
//! Randomness comes from one seed split into independent substreams (values,
//! selection noise, random permutation), so the value draws of a run do not
//! depend on which scheduler picked the cells.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gridmap::{Coord, GridSpec};
use crate::infotheory::entropy_unchecked;
use crate::math::{exp, ln};
use crate::metrics::StepMetrics;
use crate::rng::{substream, Substream};
use crate::schedulers::{
    check_distribution, confidence_select, halton_schedule, random_schedule, CellMarginal,
    ConfidenceConfig, Schedule, StepSizePlan,
};
use crate::toymodel::{MaskState, ToyJointModel};

/// Anything that predicts a categorical distribution for each masked cell.
pub trait MarginalPredictor {
    fn vocab(&self) -> usize;

    /// One marginal per masked cell of `state`.
    fn predict(&self, state: &MaskState) -> Result<Vec<CellMarginal>>;
}

/// The exact field is a perfectly calibrated predictor.
impl MarginalPredictor for ToyJointModel {
    fn vocab(&self) -> usize {
        ToyJointModel::vocab(self)
    }

    fn predict(&self, state: &MaskState) -> Result<Vec<CellMarginal>> {
        self.conditional_marginals(state)
    }
}

impl<P: MarginalPredictor + ?Sized> MarginalPredictor for &P {
    fn vocab(&self) -> usize {
        (**self).vocab()
    }

    fn predict(&self, state: &MaskState) -> Result<Vec<CellMarginal>> {
        (**self).predict(state)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SchedulerKind {
    Halton,
    /// Uniform random order from the run's permutation substream.
    Random,
    Confidence(ConfidenceConfig),
    /// A precomputed schedule replayed as is.
    Fixed(Schedule),
}

impl SchedulerKind {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerKind::Halton => "halton",
            SchedulerKind::Random => "random",
            SchedulerKind::Confidence(_) => "confidence",
            SchedulerKind::Fixed(_) => "fixed",
        }
    }
}

/// Per-cell marginal entropies; `None` marks revealed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyMap {
    grid: GridSpec,
    cells: Vec<Option<f64>>,
}

impl EntropyMap {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn get(&self, c: Coord) -> Option<f64> {
        self.cells[self.grid.index(c)]
    }

    /// Row-major values.
    pub fn values(&self) -> &[Option<f64>] {
        &self.cells
    }

    pub fn all_revealed(grid: GridSpec) -> Self {
        EntropyMap {
            grid,
            cells: vec![None; grid.cell_count()],
        }
    }
}

/// Entropy of every masked cell's predicted marginal.
pub fn entropy_map<P: MarginalPredictor + ?Sized>(
    predictor: &P,
    state: &MaskState,
) -> Result<EntropyMap> {
    let marginals = validated_prediction(predictor, state)?;
    Ok(map_from(state.grid(), &marginals))
}

fn map_from(grid: GridSpec, marginals: &[CellMarginal]) -> EntropyMap {
    let mut cells = vec![None; grid.cell_count()];
    for m in marginals {
        cells[grid.index(m.coord)] = Some(entropy_unchecked(&m.probs));
    }
    EntropyMap { grid, cells }
}

/// Queries the predictor and checks its output against the contract.
fn validated_prediction<P: MarginalPredictor + ?Sized>(
    predictor: &P,
    state: &MaskState,
) -> Result<Vec<CellMarginal>> {
    let mut marginals = predictor.predict(state)?;
    marginals.sort_by_key(|m| m.coord);
    let masked = state.masked();
    for m in &marginals {
        if !state.is_masked(m.coord) {
            return Err(Error::ContractViolation {
                cell: m.coord,
                detail: "marginal returned for a revealed or out-of-grid cell".into(),
            });
        }
        if m.probs.len() != state.vocab() {
            return Err(Error::ContractViolation {
                cell: m.coord,
                detail: alloc::format!(
                    "distribution has {} entries, vocabulary is {}",
                    m.probs.len(),
                    state.vocab()
                ),
            });
        }
        check_distribution(&m.probs).map_err(|e| Error::ContractViolation {
            cell: m.coord,
            detail: e.into(),
        })?;
    }
    if marginals.len() != masked.len() || marginals.iter().zip(&masked).any(|(m, c)| m.coord != *c)
    {
        let missing = masked
            .iter()
            .find(|c| marginals.binary_search_by_key(*c, |m| m.coord).is_err())
            .or_else(|| {
                marginals
                    .windows(2)
                    .find(|w| w[0].coord == w[1].coord)
                    .map(|w| &w[0].coord)
            })
            .copied()
            .unwrap_or(Coord::new(0, 0));
        return Err(Error::ContractViolation {
            cell: missing,
            detail: "predictor must return exactly one marginal per masked cell".into(),
        });
    }
    Ok(marginals)
}

/// Draws from `probs` raised to `1/temperature` and renormalized.
fn sample_value<R: Rng + ?Sized>(probs: &[f64], temperature: f64, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let pick = |weights: &[f64]| {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += w / total;
            if u < acc {
                return i;
            }
        }
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    };
    if temperature == 1.0 {
        return pick(probs);
    }
    let logits: Vec<f64> = probs.iter().map(|&p| ln(p) / temperature).collect();
    let top = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logits.iter().map(|&l| exp(l - top)).collect();
    pick(&weights)
}

/// One unmasking step of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Cells committed at this step, in the scheduler's order.
    pub cells: Vec<Coord>,
    pub values: Vec<usize>,
    /// Marginal entropy of each committed cell when it was predicted.
    pub entropies: Vec<f64>,
    /// Entropy map of the state at the start of the step.
    pub entropy_map: EntropyMap,
    pub metrics: StepMetrics,
}

/// The realized trajectory of one sampling run.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingTrace {
    pub grid: GridSpec,
    pub vocab: usize,
    pub seed: u64,
    pub steps: Vec<TraceStep>,
    /// Final token grid, row-major.
    pub final_grid: Vec<usize>,
}

impl SamplingTrace {
    /// The order in which cells were actually revealed.
    pub fn schedule(&self) -> Result<Schedule> {
        Schedule::new(
            self.grid,
            self.steps.iter().map(|s| s.cells.clone()).collect(),
        )
    }

    /// Entropy map after `step` steps (`1..=S`); all revealed after the last.
    pub fn frame_after(&self, step: usize) -> Option<EntropyMap> {
        match step {
            0 => self.steps.first().map(|s| s.entropy_map.clone()),
            s if s < self.steps.len() => Some(self.steps[s].entropy_map.clone()),
            s if s == self.steps.len() => Some(EntropyMap::all_revealed(self.grid)),
            _ => None,
        }
    }
}

/// Runs the unmasking loop to completion.
pub fn run_sampling<P: MarginalPredictor + ?Sized>(
    predictor: &P,
    scheduler: &SchedulerKind,
    grid: GridSpec,
    plan: &StepSizePlan,
    seed: u64,
    value_temperature: f64,
) -> Result<SamplingTrace> {
    if !(value_temperature > 0.0 && value_temperature.is_finite()) {
        return Err(Error::invalid("value temperature must be finite and > 0"));
    }
    if plan.total() != grid.cell_count() {
        return Err(Error::invalid(alloc::format!(
            "plan reveals {} tokens but the {grid} grid has {}",
            plan.total(),
            grid.cell_count()
        )));
    }
    let vocab = predictor.vocab();
    let fixed = match scheduler {
        SchedulerKind::Halton => Some(halton_schedule(grid, plan)?),
        SchedulerKind::Random => Some(random_schedule(grid, plan, seed)?),
        SchedulerKind::Fixed(s) => {
            if s.grid() != grid || s.plan() != *plan {
                return Err(Error::invalid(
                    "fixed schedule does not match grid and plan",
                ));
            }
            Some(s.clone())
        }
        SchedulerKind::Confidence(_) => None,
    };

    let mut values_rng = substream(seed, Substream::Values);
    let mut noise_rng = substream(seed, Substream::Selection);
    let mut state = MaskState::fully_masked(grid, vocab);
    let mut revealed: Vec<Coord> = Vec::with_capacity(grid.cell_count());
    let total_steps = plan.steps();
    let mut steps = Vec::with_capacity(total_steps);

    for (s, &k) in plan.counts().iter().enumerate() {
        let marginals = validated_prediction(predictor, &state)?;
        let provisional: Vec<usize> = marginals
            .iter()
            .map(|m| sample_value(&m.probs, value_temperature, &mut values_rng))
            .collect();

        let chosen = match (&fixed, scheduler) {
            (Some(schedule), _) => schedule.steps()[s].clone(),
            (None, SchedulerKind::Confidence(cfg)) => {
                let fraction = (s + 1) as f64 / total_steps as f64;
                confidence_select(&marginals, &provisional, k, cfg, fraction, &mut noise_rng)?
            }
            (None, _) => return Err(Error::internal("scheduler without a selection rule")),
        };
        if chosen.len() != k {
            return Err(Error::internal("step size differs from plan"));
        }

        let mut values = Vec::with_capacity(k);
        let mut entropies = Vec::with_capacity(k);
        for &c in &chosen {
            let i = marginals
                .binary_search_by_key(&c, |m| m.coord)
                .map_err(|_| Error::internal(alloc::format!("cell {c} revealed twice")))?;
            values.push(provisional[i]);
            entropies.push(entropy_unchecked(&marginals[i].probs));
        }
        let metrics = StepMetrics::compute(s + 1, &chosen, &revealed, entropies.iter().sum())?;
        for (&c, &v) in chosen.iter().zip(&values) {
            state
                .reveal(c, v)
                .map_err(|e| Error::internal(alloc::format!("{e}")))?;
        }
        revealed.extend_from_slice(&chosen);
        steps.push(TraceStep {
            cells: chosen,
            values,
            entropies,
            entropy_map: map_from(grid, &marginals),
            metrics,
        });
    }

    let final_grid = state
        .assignment()
        .ok_or_else(|| Error::internal("cells left masked after the last step"))?;
    Ok(SamplingTrace {
        grid,
        vocab,
        seed,
        steps,
        final_grid,
    })
}
