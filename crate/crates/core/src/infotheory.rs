//! Entropy, KL divergence and the mutual information a schedule incurs.
//!
//! All quantities are in nats.
//!
//! For a step `s` with cells `X_s` revealed after the prefix `X_<s`, the
//! per-step mutual information is the KL divergence between the exact joint
//! `p(X_s | x_<s)` and the product of its marginals, i.e. the error made by
//! sampling every cell of the step independently. [`aggregate_mi`] sums it
//! over steps in expectation over prefixes drawn from the true joint.
//! [`expected_marginal_entropy_sum`] computes the first term of the entropy
//! decomposition through a separate route (entropies of subset marginals), so
//! the identity `aggregate = Σ_s Σ_i E[H(X_s^i | X_<s)] - H(X)` can be checked
//! between two independent computations.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gridmap::Coord;
use crate::math::ln;
use crate::schedulers::{check_distribution, Schedule};
use crate::toymodel::{JointTable, MaskState, ToyJointModel};

fn validated(dist: &[f64]) -> Result<()> {
    check_distribution(dist).map_err(Error::invalid)
}

/// Shannon entropy `-Σ p ln p`, with `0 ln 0 = 0`.
pub fn entropy(dist: &[f64]) -> Result<f64> {
    validated(dist)?;
    Ok(entropy_unchecked(dist))
}

pub(crate) fn entropy_unchecked(dist: &[f64]) -> f64 {
    let h: f64 = dist.iter().filter(|&&p| p > 0.0).map(|&p| -p * ln(p)).sum();
    h.max(0.0)
}

/// `Σ p ln(p / q)`. Requires `q > 0` wherever `p > 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::invalid(
            "KL divergence needs distributions on the same support",
        ));
    }
    validated(p)?;
    validated(q)?;
    kl_unchecked(p, q)
}

fn kl_unchecked(p: &[f64], q: &[f64]) -> Result<f64> {
    let mut total = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi > 0.0 {
            if qi <= 0.0 {
                return Err(Error::invalid(
                    "p is not absolutely continuous with respect to q",
                ));
            }
            total += pi * ln(pi / qi);
        }
    }
    Ok(total.max(0.0))
}

/// Divergence between the joint of a step's cells and the product of their
/// marginals, at one realized prefix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDivergence {
    /// 1-based step number, 0 when computed outside a schedule.
    pub step_index: usize,
    pub kl_joint_vs_product: f64,
    /// `Σ_i H(X_s^i | x_<s)`.
    pub marginal_entropy_sum: f64,
    /// `H(X_s | x_<s)`.
    pub joint_entropy: f64,
}

impl StepDivergence {
    /// `kl - marginal_entropy_sum`: everything in the KL that is not the
    /// marginal-entropy term.
    pub fn residual(&self) -> f64 {
        self.kl_joint_vs_product - self.marginal_entropy_sum
    }
}

fn divergence_of(probs: &[f64], vocab: usize, k: usize) -> Result<StepDivergence> {
    let joint = crate::toymodel::JointDistribution {
        cells: vec![Coord::new(0, 0); k],
        vocab,
        probs: probs.to_vec(),
    };
    let marginal_entropy_sum = (0..k).map(|i| entropy_unchecked(&joint.marginal(i))).sum();
    let product = joint.product_of_marginals();
    Ok(StepDivergence {
        step_index: 0,
        kl_joint_vs_product: kl_unchecked(probs, &product)?,
        marginal_entropy_sum,
        joint_entropy: entropy_unchecked(probs),
    })
}

/// Mutual information among `cells` given the revealed values in `state`.
pub fn step_mi(
    model: &ToyJointModel,
    state: &MaskState,
    cells: &[Coord],
) -> Result<StepDivergence> {
    if cells.is_empty() {
        return Err(Error::invalid("step_mi needs at least one cell"));
    }
    let joint = model.exact_conditional_joint(state, cells)?;
    divergence_of(&joint.probs, model.vocab(), cells.len())
}

/// Per-step divergences along one complete assignment.
pub fn trajectory_mi(
    model: &ToyJointModel,
    schedule: &Schedule,
    assignment: &[usize],
) -> Result<Vec<StepDivergence>> {
    check_schedule(model, schedule)?;
    if assignment.len() != model.grid().cell_count() {
        return Err(Error::invalid("assignment length does not match the grid"));
    }
    let grid = model.grid();
    let mut state = MaskState::fully_masked(grid, model.vocab());
    let mut out = Vec::with_capacity(schedule.step_count());
    for (s, step) in schedule.steps().iter().enumerate() {
        let mut d = step_mi(model, &state, step)?;
        d.step_index = s + 1;
        out.push(d);
        for &c in step {
            state.reveal(c, assignment[grid.index(c)])?;
        }
    }
    Ok(out)
}

fn check_schedule(model: &ToyJointModel, schedule: &Schedule) -> Result<()> {
    if schedule.grid() != model.grid() {
        return Err(Error::invalid("schedule and model use different grids"));
    }
    Ok(())
}

/// Mixed-radix index of the values at `cells` (row-major indices).
fn index_over(assignment: &[usize], cells: &[usize], vocab: usize) -> usize {
    cells.iter().fold(0, |acc, &c| acc * vocab + assignment[c])
}

/// `E_{x ~ p}[Σ_s MI(X_s | x_<s)]`, by grouping the joint table by prefix.
pub fn aggregate_mi(model: &ToyJointModel, schedule: &Schedule) -> Result<f64> {
    Ok(aggregate_mi_by_step(model, schedule)?.iter().sum())
}

/// Expected mutual information of each step, in schedule order.
pub fn aggregate_mi_by_step(model: &ToyJointModel, schedule: &Schedule) -> Result<Vec<f64>> {
    check_schedule(model, schedule)?;
    let table = model.joint_table()?;
    let grid = model.grid();
    let v = model.vocab();
    let rows: Vec<Vec<usize>> = table.iter().map(|(_, _, x)| x).collect();

    let mut prefix: Vec<usize> = Vec::new();
    let mut per_step = Vec::with_capacity(schedule.step_count());
    for step in schedule.steps() {
        let cells: Vec<usize> = step.iter().map(|&c| grid.index(c)).collect();
        let step_states = v.pow(cells.len() as u32);
        let prefix_states = v.pow(prefix.len() as u32);
        let mut grouped = vec![0.0; prefix_states * step_states];
        for (x, &p) in rows.iter().zip(table.probs()) {
            let i = index_over(x, &prefix, v) * step_states + index_over(x, &cells, v);
            grouped[i] += p;
        }
        let mut expected = 0.0;
        for block in grouped.chunks(step_states) {
            let mass: f64 = block.iter().sum();
            if mass <= 0.0 {
                continue;
            }
            let conditional: Vec<f64> = block.iter().map(|p| p / mass).collect();
            expected += mass * divergence_of(&conditional, v, cells.len())?.kl_joint_vs_product;
        }
        per_step.push(expected);
        prefix.extend(cells);
    }
    Ok(per_step)
}

/// Entropy of the marginal of `table` on `cells` (row-major indices).
fn subset_entropy(table: &JointTable, cells: &[usize]) -> f64 {
    let v = table.vocab();
    let mut marginal = vec![0.0; v.pow(cells.len() as u32)];
    for (_, p, x) in table.iter() {
        marginal[index_over(&x, cells, v)] += p;
    }
    entropy_unchecked(&marginal)
}

/// `Σ_s Σ_i E[H(X_s^i | X_<s)]`, each term as `H(X_<s, X_s^i) - H(X_<s)`.
pub fn expected_marginal_entropy_sum(model: &ToyJointModel, schedule: &Schedule) -> Result<f64> {
    check_schedule(model, schedule)?;
    let table = model.joint_table()?;
    let grid = model.grid();
    let mut prefix: Vec<usize> = Vec::new();
    let mut total = 0.0;
    for step in schedule.steps() {
        let h_prefix = subset_entropy(&table, &prefix);
        for &c in step {
            let mut with_cell = prefix.clone();
            with_cell.push(grid.index(c));
            total += subset_entropy(&table, &with_cell) - h_prefix;
        }
        prefix.extend(step.iter().map(|&c| grid.index(c)));
    }
    Ok(total)
}

/// `H(X)` of the whole field.
pub fn joint_entropy(model: &ToyJointModel) -> Result<f64> {
    Ok(entropy_unchecked(model.joint_table()?.probs()))
}

/// `Σ_i H(X_i) - H(X)`.
pub fn total_correlation(model: &ToyJointModel) -> Result<f64> {
    let table = model.joint_table()?;
    let singles: f64 = (0..model.grid().cell_count())
        .map(|i| subset_entropy(&table, &[i]))
        .sum();
    Ok(singles - entropy_unchecked(table.probs()))
}
