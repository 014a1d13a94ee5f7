//! Unmasking schedules: ordered partitions of the token grid into steps.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::FRAC_PI_2;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gridmap::{halton_token_order, Coord, GridSpec, TokenOrder};
use crate::math::{cos, exp, floor, ln};
use crate::rng::{gumbel, substream, Substream};

/// How per-step token counts grow over the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PlanShape {
    /// Revealed fraction after step `t` follows `1 - cos(pi/2 * t/S)`:
    /// few tokens first, many at the end.
    #[default]
    Cosine,
    /// Near-equal counts; any remainder goes to the last steps.
    Linear,
}

/// Number of tokens revealed at each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepSizePlan {
    counts: Vec<usize>,
}

impl StepSizePlan {
    pub fn from_counts(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::invalid("step plan needs at least one step"));
        }
        if counts.contains(&0) {
            return Err(Error::invalid("every step must reveal at least one token"));
        }
        Ok(StepSizePlan { counts })
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn steps(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// One token per step.
    pub fn singleton(n: usize) -> Result<Self> {
        step_size_plan(n, n, PlanShape::Linear)
    }

    fn check_total(&self, grid: GridSpec) -> Result<()> {
        if self.total() != grid.cell_count() {
            return Err(Error::invalid(alloc::format!(
                "plan reveals {} tokens but the {grid} grid has {}",
                self.total(),
                grid.cell_count()
            )));
        }
        Ok(())
    }
}

/// Splits `n` tokens over `steps` steps.
pub fn step_size_plan(n: usize, steps: usize, shape: PlanShape) -> Result<StepSizePlan> {
    if n == 0 || steps == 0 {
        return Err(Error::invalid("token count and step count must be >= 1"));
    }
    if steps > n {
        return Err(Error::invalid(alloc::format!(
            "steps exceed token count ({steps} > {n})"
        )));
    }
    let counts = match shape {
        PlanShape::Linear => {
            let base = n / steps;
            let extra = n % steps;
            (0..steps)
                .map(|t| base + usize::from(t >= steps - extra))
                .collect()
        }
        PlanShape::Cosine => cosine_counts(n, steps),
    };
    StepSizePlan::from_counts(counts)
}

/// Every step gets one token, the remaining `n - S` are shared out in
/// proportion to the cosine increments by largest remainder, then sorted so
/// counts never decrease.
fn cosine_counts(n: usize, steps: usize) -> Vec<usize> {
    let s = steps as f64;
    let weights: Vec<f64> = (1..=steps)
        .map(|t| cos(FRAC_PI_2 * (t - 1) as f64 / s) - cos(FRAC_PI_2 * t as f64 / s))
        .collect();
    let total: f64 = weights.iter().sum();
    let extra = n - steps;
    let shares: Vec<f64> = weights.iter().map(|w| w / total * extra as f64).collect();
    let mut counts: Vec<usize> = shares.iter().map(|x| floor(*x) as usize).collect();
    while counts.iter().sum::<usize>() > extra {
        // float round-off only
        let i = (0..steps).max_by_key(|&i| counts[i]).unwrap_or(0);
        counts[i] -= 1;
    }
    let mut left = extra - counts.iter().sum::<usize>();

    let mut by_remainder: Vec<usize> = (0..steps).collect();
    by_remainder.sort_by(|&a, &b| {
        let ra = shares[a] - floor(shares[a]);
        let rb = shares[b] - floor(shares[b]);
        rb.total_cmp(&ra).then(b.cmp(&a))
    });
    for &t in by_remainder.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[t] += 1;
        left -= 1;
    }
    for c in &mut counts {
        *c += 1;
    }
    counts.sort_unstable();
    counts
}

/// An ordered partition of every grid cell into non-empty steps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    grid: GridSpec,
    steps: Vec<Vec<Coord>>,
}

impl Schedule {
    /// Validates disjointness, completeness and non-empty steps.
    pub fn new(grid: GridSpec, steps: Vec<Vec<Coord>>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::invalid("schedule has no steps"));
        }
        let mut seen = vec![false; grid.cell_count()];
        let mut covered = 0;
        for (s, step) in steps.iter().enumerate() {
            if step.is_empty() {
                return Err(Error::invalid(alloc::format!("step {} is empty", s + 1)));
            }
            for &c in step {
                grid.check(c)?;
                let i = grid.index(c);
                if seen[i] {
                    return Err(Error::invalid(alloc::format!(
                        "cell {c} scheduled twice (again at step {})",
                        s + 1
                    )));
                }
                seen[i] = true;
                covered += 1;
            }
        }
        if covered != grid.cell_count() {
            return Err(Error::invalid(alloc::format!(
                "schedule covers {covered} of {} cells",
                grid.cell_count()
            )));
        }
        Ok(Schedule { grid, steps })
    }

    /// Slices `order` into consecutive chunks sized by `plan`.
    pub fn from_order(order: &TokenOrder, plan: &StepSizePlan) -> Result<Self> {
        let grid = order.grid();
        plan.check_total(grid)?;
        let mut rest = order.coords();
        let mut steps = Vec::with_capacity(plan.steps());
        for &k in plan.counts() {
            let (head, tail) = rest.split_at(k);
            steps.push(head.to_vec());
            rest = tail;
        }
        Ok(Schedule { grid, steps })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn steps(&self) -> &[Vec<Coord>] {
        &self.steps
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    pub fn plan(&self) -> StepSizePlan {
        StepSizePlan {
            counts: self.steps.iter().map(Vec::len).collect(),
        }
    }

    /// All cells in reveal order.
    pub fn order(&self) -> impl Iterator<Item = Coord> + '_ {
        self.steps.iter().flatten().copied()
    }
}

/// Halton order sliced by `plan`. Independent of any seed.
pub fn halton_schedule(grid: GridSpec, plan: &StepSizePlan) -> Result<Schedule> {
    plan.check_total(grid)?;
    Schedule::from_order(&halton_token_order(grid)?, plan)
}

/// Uniform random permutation of the cells, sliced by `plan`.
pub fn random_schedule(grid: GridSpec, plan: &StepSizePlan, seed: u64) -> Result<Schedule> {
    plan.check_total(grid)?;
    let mut cells: Vec<Coord> = grid.cells().collect();
    cells.shuffle(&mut substream(seed, Substream::Permutation));
    Schedule::from_order(&TokenOrder::new(grid, cells)?, plan)
}

/// Row-major raster order sliced by `plan`: contiguous blocks of cells.
pub fn raster_schedule(grid: GridSpec, plan: &StepSizePlan) -> Result<Schedule> {
    Schedule::from_order(&TokenOrder::raster(grid), plan)
}

/// Time profile of the Gumbel noise scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseDecay {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceConfig {
    gumbel_scale_initial: f64,
    softmax_temperature: f64,
    decay: NoiseDecay,
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        ConfidenceConfig {
            gumbel_scale_initial: 4.5,
            softmax_temperature: 1.0,
            decay: NoiseDecay::Linear,
        }
    }
}

impl ConfidenceConfig {
    pub fn new(gumbel_scale_initial: f64, softmax_temperature: f64) -> Result<Self> {
        if !(gumbel_scale_initial >= 0.0 && gumbel_scale_initial.is_finite()) {
            return Err(Error::invalid("gumbel scale must be finite and >= 0"));
        }
        if !(softmax_temperature > 0.0 && softmax_temperature.is_finite()) {
            return Err(Error::invalid("softmax temperature must be finite and > 0"));
        }
        Ok(ConfidenceConfig {
            gumbel_scale_initial,
            softmax_temperature,
            decay: NoiseDecay::Linear,
        })
    }

    /// Deterministic top-k by confidence.
    pub fn greedy() -> Self {
        ConfidenceConfig {
            gumbel_scale_initial: 0.0,
            ..Self::default()
        }
    }

    pub fn gumbel_scale_initial(&self) -> f64 {
        self.gumbel_scale_initial
    }

    pub fn softmax_temperature(&self) -> f64 {
        self.softmax_temperature
    }

    pub fn decay(&self) -> NoiseDecay {
        self.decay
    }

    /// Noise scale once a fraction `step_fraction` of the run has elapsed.
    pub fn noise_scale(&self, step_fraction: f64) -> f64 {
        match self.decay {
            NoiseDecay::Linear => (self.gumbel_scale_initial * (1.0 - step_fraction)).max(0.0),
        }
    }
}

/// A masked cell with its predicted categorical distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMarginal {
    pub coord: Coord,
    pub probs: Vec<f64>,
}

pub(crate) const NORMALIZATION_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_distribution(probs: &[f64]) -> core::result::Result<(), &'static str> {
    if probs.is_empty() {
        return Err("empty distribution");
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err("negative or non-finite probability");
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
        return Err("probabilities do not sum to 1");
    }
    Ok(())
}

/// Log-probability of `value` under `probs` raised to `1/temperature`.
fn tempered_log_prob(probs: &[f64], value: usize, temperature: f64) -> f64 {
    if temperature == 1.0 {
        return ln(probs[value]);
    }
    let scaled: Vec<f64> = probs.iter().map(|&p| ln(p) / temperature).collect();
    let top = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let norm: f64 = scaled.iter().map(|&l| exp(l - top)).sum();
    scaled[value] - top - ln(norm)
}

/// Picks the `k` masked cells with the highest noisy confidence.
///
/// `score = log p(sampled value) + g * noise_scale(step_fraction)` with one
/// standard Gumbel `g` per candidate, drawn in candidate order. Ties go to the
/// earlier cell in row-major order. The result is sorted row-major.
pub fn confidence_select<R: Rng + ?Sized>(
    marginals: &[CellMarginal],
    sampled_values: &[usize],
    k: usize,
    config: &ConfidenceConfig,
    step_fraction: f64,
    noise: &mut R,
) -> Result<Vec<Coord>> {
    if marginals.len() != sampled_values.len() {
        return Err(Error::invalid("one sampled value per marginal is required"));
    }
    if k > marginals.len() {
        return Err(Error::invalid(alloc::format!(
            "cannot select {k} of {} masked cells",
            marginals.len()
        )));
    }
    if !(0.0..=1.0).contains(&step_fraction) {
        return Err(Error::invalid("step fraction must lie in [0, 1]"));
    }
    let scale = config.noise_scale(step_fraction);
    let mut scored = Vec::with_capacity(marginals.len());
    for (m, &v) in marginals.iter().zip(sampled_values) {
        check_distribution(&m.probs)
            .map_err(|e| Error::invalid(alloc::format!("marginal at {}: {e}", m.coord)))?;
        if v >= m.probs.len() {
            return Err(Error::invalid(alloc::format!(
                "sampled value {v} out of range at {}",
                m.coord
            )));
        }
        let g = gumbel(noise);
        let score = tempered_log_prob(&m.probs, v, config.softmax_temperature) + g * scale;
        scored.push((score, m.coord));
    }
    scored.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(&b.1),
        o => o,
    });
    let mut picked: Vec<Coord> = scored.into_iter().take(k).map(|(_, c)| c).collect();
    picked.sort_unstable();
    Ok(picked)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(h: usize, w: usize) -> GridSpec {
        GridSpec::new(h, w).unwrap()
    }

    #[test]
    fn plan_examples() {
        assert_eq!(
            step_size_plan(4, 4, PlanShape::Linear).unwrap().counts(),
            &[1, 1, 1, 1]
        );
        assert_eq!(
            step_size_plan(10, 1, PlanShape::Linear).unwrap().counts(),
            &[10]
        );
        assert_eq!(
            step_size_plan(10, 1, PlanShape::Cosine).unwrap().counts(),
            &[10]
        );
        let cos = step_size_plan(1024, 32, PlanShape::Cosine).unwrap();
        assert_eq!(cos.total(), 1024);
        assert!(cos.counts()[0] < cos.counts()[31]);
        assert!(cos.counts().windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(
            step_size_plan(10, 3, PlanShape::Linear).unwrap().counts(),
            &[3, 3, 4]
        );
    }

    #[test]
    fn plan_rejects_too_many_steps() {
        let err = step_size_plan(16, 20, PlanShape::Cosine).unwrap_err();
        assert!(alloc::format!("{err}").contains("steps exceed token count"));
        assert!(step_size_plan(4, 0, PlanShape::Linear).is_err());
    }

    #[test]
    fn halton_schedule_examples() {
        let g = grid(2, 2);
        let s = halton_schedule(g, &StepSizePlan::singleton(4).unwrap()).unwrap();
        let expect: Vec<Vec<Coord>> = [(0, 1), (1, 0), (0, 0), (1, 1)]
            .iter()
            .map(|&(r, c)| vec![Coord::new(r, c)])
            .collect();
        assert_eq!(s.steps(), &expect[..]);

        let one = halton_schedule(g, &StepSizePlan::from_counts(vec![4]).unwrap()).unwrap();
        assert_eq!(one.step_count(), 1);
        assert_eq!(one.steps()[0].len(), 4);

        assert!(halton_schedule(g, &StepSizePlan::from_counts(vec![3]).unwrap()).is_err());
    }

    #[test]
    fn random_schedule_is_seeded() {
        let g = grid(4, 4);
        let plan = step_size_plan(16, 4, PlanShape::Linear).unwrap();
        assert_eq!(
            random_schedule(g, &plan, 11).unwrap(),
            random_schedule(g, &plan, 11).unwrap()
        );
        assert_ne!(
            random_schedule(g, &plan, 11).unwrap(),
            random_schedule(g, &plan, 12).unwrap()
        );
        let all =
            random_schedule(grid(2, 2), &StepSizePlan::from_counts(vec![4]).unwrap(), 3).unwrap();
        assert_eq!(all.steps()[0].len(), 4);
    }

    #[test]
    fn schedule_new_rejects_bad_partitions() {
        let g = grid(1, 2);
        let a = Coord::new(0, 0);
        let b = Coord::new(0, 1);
        assert!(Schedule::new(g, vec![vec![a], vec![a, b]]).is_err());
        assert!(Schedule::new(g, vec![vec![a]]).is_err());
        assert!(Schedule::new(g, vec![vec![a, b], vec![]]).is_err());
        assert!(Schedule::new(g, vec![vec![b], vec![a]]).is_ok());
    }

    fn marginal(row: usize, col: usize, probs: &[f64]) -> CellMarginal {
        CellMarginal {
            coord: Coord::new(row, col),
            probs: probs.to_vec(),
        }
    }

    #[test]
    fn greedy_picks_most_confident() {
        let ms = [
            marginal(0, 0, &[0.5, 0.5]),
            marginal(0, 1, &[0.9, 0.1]),
            marginal(1, 0, &[0.3, 0.7]),
        ];
        let mut rng = substream(0, Substream::Selection);
        let picked = confidence_select(
            &ms,
            &[0, 0, 1],
            1,
            &ConfidenceConfig::greedy(),
            0.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(picked, vec![Coord::new(0, 1)]);
    }

    #[test]
    fn greedy_ties_break_row_major() {
        let ms = [
            marginal(1, 1, &[0.5, 0.5]),
            marginal(0, 1, &[0.5, 0.5]),
            marginal(1, 0, &[0.5, 0.5]),
        ];
        let mut rng = substream(0, Substream::Selection);
        let picked = confidence_select(
            &ms,
            &[0, 1, 0],
            2,
            &ConfidenceConfig::greedy(),
            0.3,
            &mut rng,
        )
        .unwrap();
        assert_eq!(picked, vec![Coord::new(0, 1), Coord::new(1, 0)]);
    }

    #[test]
    fn select_validates_inputs() {
        let ms = [marginal(0, 0, &[0.5, 0.5])];
        let mut rng = substream(0, Substream::Selection);
        let cfg = ConfidenceConfig::default();
        assert!(confidence_select(&ms, &[0], 2, &cfg, 0.0, &mut rng).is_err());
        assert!(confidence_select(&ms, &[2], 1, &cfg, 0.0, &mut rng).is_err());
        let bad = [marginal(0, 0, &[0.5, 0.6])];
        assert!(confidence_select(&bad, &[0], 1, &cfg, 0.0, &mut rng).is_err());
    }

    #[test]
    fn noise_decays_linearly_to_zero() {
        let cfg = ConfidenceConfig::new(4.0, 1.0).unwrap();
        assert_eq!(cfg.noise_scale(0.0), 4.0);
        assert_eq!(cfg.noise_scale(0.25), 3.0);
        assert_eq!(cfg.noise_scale(1.0), 0.0);
        assert!(ConfidenceConfig::new(-1.0, 1.0).is_err());
        assert!(ConfidenceConfig::new(1.0, 0.0).is_err());
    }

    #[test]
    fn tempered_log_prob_sharpens() {
        let p = [0.75, 0.25];
        assert!((tempered_log_prob(&p, 0, 1.0) - ln(0.75)).abs() < 1e-15);
        // p^2 renormalized: 0.9 / 0.1
        assert!((tempered_log_prob(&p, 0, 0.5) - ln(0.9)).abs() < 1e-12);
    }
}
