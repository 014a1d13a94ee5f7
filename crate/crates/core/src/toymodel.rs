//! A Potts-style Markov random field on the token grid with exact inference.
//!
//! `p(x) ∝ exp(beta * Σ_{pairs (i,j)} w(d_ij) [x_i = x_j])` where the sum runs
//! over cell pairs within the neighbor radius and
//! `w(d) = exp(-(d - 1) / length_scale)`, so that nearest neighbors carry
//! unit weight and the weight decays strictly with Euclidean distance.
//!
//! Two exact inference routes are available:
//!
//! * brute-force enumeration over the masked cells (`V^masked` states), which
//!   also provides conditional joints;
//! * a row-wise transfer-matrix (forward-backward over row configurations),
//!   valid whenever every interacting pair sits on the same or adjacent rows.
//!   It handles grids far beyond enumeration, e.g. 8x8 with `V = 2`.
//!
//! Assignments are indexed in mixed radix over cells in row-major order, with
//! the first cell as the most significant digit.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gridmap::{Coord, GridSpec};
use crate::math::exp;
use crate::schedulers::CellMarginal;

/// Largest state space any enumeration will touch.
pub const EXACT_STATE_LIMIT: u128 = 10_000_000;

/// Largest number of row configurations for the transfer-matrix route.
pub const ROW_CONFIG_LIMIT: usize = 1024;

/// Which cell pairs interact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Neighborhood {
    /// Pairs with Euclidean distance at most this radius.
    Radius(f64),
    /// Every pair of cells. Only allowed on grids of at most 3x3.
    Full,
}

impl Default for Neighborhood {
    fn default() -> Self {
        Neighborhood::Radius(core::f64::consts::SQRT_2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pair {
    a: usize,
    b: usize,
    weight: f64,
}

#[derive(Debug, Clone)]
pub struct ToyJointModel {
    grid: GridSpec,
    vocab: usize,
    coupling: f64,
    length_scale: f64,
    neighborhood: Neighborhood,
    pairs: Vec<Pair>,
    chain: Option<RowChain>,
}

impl ToyJointModel {
    pub fn new(
        grid: GridSpec,
        vocab: usize,
        coupling: f64,
        length_scale: f64,
        neighborhood: Neighborhood,
    ) -> Result<Self> {
        if vocab < 2 {
            return Err(Error::invalid("vocabulary size must be >= 2"));
        }
        if !(coupling >= 0.0 && coupling.is_finite()) {
            return Err(Error::invalid("coupling must be finite and >= 0"));
        }
        if !(length_scale > 0.0 && length_scale.is_finite()) {
            return Err(Error::invalid("length scale must be finite and > 0"));
        }
        match neighborhood {
            Neighborhood::Radius(r) if !(r >= 0.0 && r.is_finite()) => {
                return Err(Error::invalid("neighbor radius must be finite and >= 0"));
            }
            Neighborhood::Full if grid.cell_count() > 9 => {
                return Err(Error::invalid(
                    "full-pairwise neighborhood is limited to grids of at most 3x3",
                ));
            }
            _ => {}
        }

        let n = grid.cell_count();
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let d = grid.coord(a).distance(&grid.coord(b));
                let within = match neighborhood {
                    Neighborhood::Radius(r) => d <= r + 1e-12,
                    Neighborhood::Full => true,
                };
                if within {
                    pairs.push(Pair {
                        a,
                        b,
                        weight: exp(-(d - 1.0) / length_scale),
                    });
                }
            }
        }

        let mut model = ToyJointModel {
            grid,
            vocab,
            coupling,
            length_scale,
            neighborhood,
            pairs,
            chain: None,
        };
        model.chain = RowChain::build(&model);
        Ok(model)
    }

    /// Model with the default 8-neighborhood.
    pub fn with_defaults(
        grid: GridSpec,
        vocab: usize,
        coupling: f64,
        length_scale: f64,
    ) -> Result<Self> {
        Self::new(grid, vocab, coupling, length_scale, Neighborhood::default())
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn neighborhood(&self) -> Neighborhood {
        self.neighborhood
    }

    /// Pair weight `w(d)`.
    pub fn weight(&self, distance: f64) -> f64 {
        exp(-(distance - 1.0) / self.length_scale)
    }

    /// `V^n`, saturating.
    pub fn state_space(&self) -> u128 {
        state_count(self.vocab, self.grid.cell_count())
    }

    pub fn supports_row_chain(&self) -> bool {
        self.chain.is_some()
    }

    /// `Σ w [x_a = x_b]` over interacting pairs.
    pub fn energy(&self, assignment: &[usize]) -> f64 {
        self.pairs
            .iter()
            .filter(|p| assignment[p.a] == assignment[p.b])
            .map(|p| p.weight)
            .sum()
    }

    fn boltzmann(&self, assignment: &[usize]) -> f64 {
        exp(self.coupling * self.energy(assignment))
    }

    /// The full normalized joint `p(x)` by enumeration.
    pub fn joint_table(&self) -> Result<JointTable> {
        let n = self.grid.cell_count();
        let size = checked_states(self.vocab, n, "joint table")?;
        let mut probs = Vec::with_capacity(size);
        let mut digits = vec![0usize; n];
        for idx in 0..size {
            if idx > 0 {
                increment(&mut digits, self.vocab);
            }
            probs.push(self.boltzmann(&digits));
        }
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
        Ok(JointTable {
            grid: self.grid,
            vocab: self.vocab,
            probs,
        })
    }

    fn check_state(&self, state: &MaskState) -> Result<()> {
        if state.grid != self.grid || state.vocab != self.vocab {
            return Err(Error::invalid("mask state does not match the model"));
        }
        Ok(())
    }

    /// Exact distribution of all masked cells given the revealed ones.
    pub fn conditional_table(&self, state: &MaskState) -> Result<ConditionalTable> {
        self.check_state(state)?;
        let masked = state.masked();
        let size = checked_states(self.vocab, masked.len(), "conditional enumeration")?;
        let mut full: Vec<usize> = state.values.iter().map(|v| v.unwrap_or(0)).collect();
        let slots: Vec<usize> = masked.iter().map(|&c| self.grid.index(c)).collect();
        let mut digits = vec![0usize; masked.len()];
        let mut probs = Vec::with_capacity(size);
        for idx in 0..size {
            if idx > 0 {
                increment(&mut digits, self.vocab);
            }
            for (&slot, &d) in slots.iter().zip(&digits) {
                full[slot] = d;
            }
            probs.push(self.boltzmann(&full));
        }
        let z: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= z;
        }
        Ok(ConditionalTable {
            vocab: self.vocab,
            cells: masked,
            probs,
        })
    }

    /// `p(X_cell | revealed)`.
    pub fn exact_conditional_marginal(&self, state: &MaskState, cell: Coord) -> Result<Vec<f64>> {
        self.check_state(state)?;
        self.grid.check(cell)?;
        if !state.is_masked(cell) {
            return Err(Error::invalid(alloc::format!(
                "cell {cell} is already revealed"
            )));
        }
        let all = self.conditional_marginals(state)?;
        all.into_iter()
            .find(|m| m.coord == cell)
            .map(|m| m.probs)
            .ok_or_else(|| Error::internal("masked cell missing from marginals"))
    }

    /// `p(X_cells | revealed)` as a joint over `V^|cells|`, first cell most
    /// significant.
    pub fn exact_conditional_joint(
        &self,
        state: &MaskState,
        cells: &[Coord],
    ) -> Result<JointDistribution> {
        self.check_state(state)?;
        for (i, &c) in cells.iter().enumerate() {
            self.grid.check(c)?;
            if !state.is_masked(c) {
                return Err(Error::invalid(alloc::format!(
                    "cell {c} is already revealed"
                )));
            }
            if cells[..i].contains(&c) {
                return Err(Error::invalid(alloc::format!("cell {c} listed twice")));
            }
        }
        Ok(self.conditional_table(state)?.marginalize(cells))
    }

    /// Marginals of every masked cell, in row-major order.
    ///
    /// Uses whichever exact route is cheaper for the current state.
    pub fn conditional_marginals(&self, state: &MaskState) -> Result<Vec<CellMarginal>> {
        self.check_state(state)?;
        let enum_cost = state_count(self.vocab, state.masked_count())
            .saturating_mul(self.pairs.len().max(1) as u128);
        let chain_cost = self.chain.as_ref().map(|c| c.cost());
        match chain_cost {
            Some(cost) if cost < enum_cost => self.marginals_by_row_chain(state),
            _ if state_count(self.vocab, state.masked_count()) <= EXACT_STATE_LIMIT => {
                self.marginals_by_enumeration(state)
            }
            Some(_) => self.marginals_by_row_chain(state),
            None => Err(Error::ResourceLimit {
                what: "exact conditional marginals",
                needed: state_count(self.vocab, state.masked_count()),
                limit: EXACT_STATE_LIMIT,
            }),
        }
    }

    pub fn marginals_by_enumeration(&self, state: &MaskState) -> Result<Vec<CellMarginal>> {
        let table = self.conditional_table(state)?;
        Ok(table
            .cells
            .iter()
            .map(|&c| CellMarginal {
                coord: c,
                probs: table.marginalize(&[c]).probs,
            })
            .collect())
    }

    pub fn marginals_by_row_chain(&self, state: &MaskState) -> Result<Vec<CellMarginal>> {
        self.check_state(state)?;
        let chain = self.chain.as_ref().ok_or(Error::ResourceLimit {
            what: "row transfer matrix",
            needed: state_count(self.vocab, self.grid.width()),
            limit: ROW_CONFIG_LIMIT as u128,
        })?;
        chain.marginals(self, state)
    }
}

/// Forward-backward over row configurations.
#[derive(Debug, Clone)]
struct RowChain {
    configs: usize,
    /// `digits[c * width + col]`: value at `col` in row configuration `c`.
    digits: Vec<usize>,
    /// `exp(beta * intra-row energy)` per configuration.
    row_factor: Vec<f64>,
    /// `exp(beta * energy between consecutive rows)`, `configs x configs`.
    link_factor: Vec<f64>,
}

impl RowChain {
    fn build(model: &ToyJointModel) -> Option<Self> {
        let grid = model.grid;
        let width = grid.width();
        let configs = usize::try_from(state_count(model.vocab, width)).ok()?;
        if configs > ROW_CONFIG_LIMIT {
            return None;
        }
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        // Pairs depend only on offsets, so rows 0 and 1 describe every row.
        for p in &model.pairs {
            let (ca, cb) = (grid.coord(p.a), grid.coord(p.b));
            match (ca.row, cb.row - ca.row) {
                (_, d) if d > 1 => return None,
                (0, 0) => intra.push((ca.col, cb.col, p.weight)),
                (0, 1) => inter.push((ca.col, cb.col, p.weight)),
                _ => {}
            }
        }
        let mut digits = vec![0usize; configs * width];
        let mut cur = vec![0usize; width];
        for c in 0..configs {
            if c > 0 {
                increment(&mut cur, model.vocab);
            }
            digits[c * width..(c + 1) * width].copy_from_slice(&cur);
        }
        let row = |c: usize| &digits[c * width..(c + 1) * width];
        let row_factor = (0..configs)
            .map(|c| {
                let r = row(c);
                let e: f64 = intra
                    .iter()
                    .filter(|(a, b, _)| r[*a] == r[*b])
                    .map(|t| t.2)
                    .sum();
                exp(model.coupling * e)
            })
            .collect();
        let mut link_factor = vec![0.0; configs * configs];
        for upper in 0..configs {
            let u = row(upper);
            for lower in 0..configs {
                let l = row(lower);
                let e: f64 = inter
                    .iter()
                    .filter(|(a, b, _)| u[*a] == l[*b])
                    .map(|t| t.2)
                    .sum();
                link_factor[upper * configs + lower] = exp(model.coupling * e);
            }
        }
        Some(RowChain {
            configs,
            digits,
            row_factor,
            link_factor,
        })
    }

    fn cost(&self) -> u128 {
        (self.configs as u128) * (self.configs as u128) * 2
    }

    fn marginals(&self, model: &ToyJointModel, state: &MaskState) -> Result<Vec<CellMarginal>> {
        let grid = model.grid;
        let (h, w, k) = (grid.height(), grid.width(), self.configs);

        // Row potentials with revealed cells clamped.
        let unary: Vec<Vec<f64>> = (0..h)
            .map(|r| {
                (0..k)
                    .map(|c| {
                        let cfg = &self.digits[c * w..(c + 1) * w];
                        let consistent = (0..w).all(|col| match state.value(Coord::new(r, col)) {
                            Some(v) => cfg[col] == v,
                            None => true,
                        });
                        if consistent {
                            self.row_factor[c]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();

        let normalize = |v: &mut Vec<f64>| -> Result<()> {
            let z: f64 = v.iter().sum();
            if !(z > 0.0 && z.is_finite()) {
                return Err(Error::internal("transfer-matrix message degenerated"));
            }
            v.iter_mut().for_each(|x| *x /= z);
            Ok(())
        };

        let mut forward = vec![vec![0.0; k]; h];
        forward[0] = unary[0].clone();
        normalize(&mut forward[0])?;
        for r in 1..h {
            let mut next = vec![0.0; k];
            for (upper, &a) in forward[r - 1].iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let links = &self.link_factor[upper * k..(upper + 1) * k];
                for (n, l) in next.iter_mut().zip(links) {
                    *n += a * l;
                }
            }
            for (n, u) in next.iter_mut().zip(&unary[r]) {
                *n *= u;
            }
            normalize(&mut next)?;
            forward[r] = next;
        }

        let mut backward = vec![vec![1.0; k]; h];
        for r in (0..h - 1).rev() {
            let weighted: Vec<f64> = unary[r + 1]
                .iter()
                .zip(&backward[r + 1])
                .map(|(u, b)| u * b)
                .collect();
            let mut prev = vec![0.0; k];
            for (upper, p) in prev.iter_mut().enumerate() {
                let links = &self.link_factor[upper * k..(upper + 1) * k];
                *p = links.iter().zip(&weighted).map(|(l, x)| l * x).sum();
            }
            normalize(&mut prev)?;
            backward[r] = prev;
        }

        let mut out = Vec::with_capacity(state.masked_count());
        for r in 0..h {
            let mut row_marginal: Vec<f64> = forward[r]
                .iter()
                .zip(&backward[r])
                .map(|(a, b)| a * b)
                .collect();
            normalize(&mut row_marginal)?;
            for col in 0..w {
                let coord = Coord::new(r, col);
                if !state.is_masked(coord) {
                    continue;
                }
                let mut probs = vec![0.0; model.vocab];
                for (c, &p) in row_marginal.iter().enumerate() {
                    probs[self.digits[c * w + col]] += p;
                }
                let z: f64 = probs.iter().sum();
                probs.iter_mut().for_each(|p| *p /= z);
                out.push(CellMarginal { coord, probs });
            }
        }
        Ok(out)
    }
}

/// Normalized `p(x)` over all `V^n` assignments.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    grid: GridSpec,
    vocab: usize,
    probs: Vec<f64>,
}

impl JointTable {
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    /// Per-cell values of assignment `index`.
    pub fn assignment(&self, index: usize) -> Vec<usize> {
        decode(index, self.vocab, self.grid.cell_count())
    }

    pub fn index_of(&self, assignment: &[usize]) -> usize {
        encode(assignment, self.vocab)
    }

    /// `(index, probability, assignment)` for every state.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64, Vec<usize>)> + '_ {
        let n = self.grid.cell_count();
        let mut digits = vec![0usize; n];
        self.probs.iter().enumerate().map(move |(i, &p)| {
            if i > 0 {
                increment(&mut digits, self.vocab);
            }
            (i, p, digits.clone())
        })
    }
}

/// Joint distribution of the masked cells given the revealed ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalTable {
    vocab: usize,
    cells: Vec<Coord>,
    probs: Vec<f64>,
}

impl ConditionalTable {
    pub fn cells(&self) -> &[Coord] {
        &self.cells
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal over `keep` (each must be one of `self.cells`).
    pub fn marginalize(&self, keep: &[Coord]) -> JointDistribution {
        let m = self.cells.len();
        let positions: Vec<usize> = keep
            .iter()
            .map(|c| {
                self.cells
                    .iter()
                    .position(|x| x == c)
                    .expect("cell not in table")
            })
            .collect();
        let mut probs = vec![0.0; state_count(self.vocab, keep.len()) as usize];
        let mut digits = vec![0usize; m];
        for (i, &p) in self.probs.iter().enumerate() {
            if i > 0 {
                increment(&mut digits, self.vocab);
            }
            let idx = positions
                .iter()
                .fold(0, |acc, &pos| acc * self.vocab + digits[pos]);
            probs[idx] += p;
        }
        JointDistribution {
            cells: keep.to_vec(),
            vocab: self.vocab,
            probs,
        }
    }
}

/// Categorical distribution over joint values of a list of cells.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub cells: Vec<Coord>,
    pub vocab: usize,
    pub probs: Vec<f64>,
}

impl JointDistribution {
    /// Marginal of the `i`-th cell.
    pub fn marginal(&self, i: usize) -> Vec<f64> {
        let k = self.cells.len();
        let mut out = vec![0.0; self.vocab];
        for (idx, &p) in self.probs.iter().enumerate() {
            out[decode(idx, self.vocab, k)[i]] += p;
        }
        out
    }

    /// Product of the per-cell marginals, laid out like `probs`.
    pub fn product_of_marginals(&self) -> Vec<f64> {
        let k = self.cells.len();
        let marginals: Vec<Vec<f64>> = (0..k).map(|i| self.marginal(i)).collect();
        (0..self.probs.len())
            .map(|idx| {
                decode(idx, self.vocab, k)
                    .iter()
                    .zip(&marginals)
                    .map(|(&v, m)| m[v])
                    .product()
            })
            .collect()
    }
}

/// Revealed token values plus the set of still-masked cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MaskState {
    grid: GridSpec,
    vocab: usize,
    values: Vec<Option<usize>>,
}

impl MaskState {
    pub fn fully_masked(grid: GridSpec, vocab: usize) -> Self {
        MaskState {
            grid,
            vocab,
            values: vec![None; grid.cell_count()],
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn reveal(&mut self, cell: Coord, value: usize) -> Result<()> {
        self.grid.check(cell)?;
        if value >= self.vocab {
            return Err(Error::invalid(alloc::format!(
                "token value {value} outside vocabulary of {}",
                self.vocab
            )));
        }
        let slot = &mut self.values[self.grid.index(cell)];
        if slot.is_some() {
            return Err(Error::invalid(alloc::format!("cell {cell} revealed twice")));
        }
        *slot = Some(value);
        Ok(())
    }

    pub fn with_revealed(mut self, cell: Coord, value: usize) -> Result<Self> {
        self.reveal(cell, value)?;
        Ok(self)
    }

    pub fn value(&self, cell: Coord) -> Option<usize> {
        self.values.get(self.grid.index(cell)).copied().flatten()
    }

    pub fn is_masked(&self, cell: Coord) -> bool {
        self.grid.contains(cell) && self.values[self.grid.index(cell)].is_none()
    }

    /// Masked cells, row-major.
    pub fn masked(&self) -> Vec<Coord> {
        self.grid.cells().filter(|&c| self.is_masked(c)).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    /// Revealed cells and their values, row-major.
    pub fn revealed(&self) -> Vec<(Coord, usize)> {
        self.grid
            .cells()
            .filter_map(|c| self.value(c).map(|v| (c, v)))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    /// Complete assignment once every cell is revealed.
    pub fn assignment(&self) -> Option<Vec<usize>> {
        self.values.iter().copied().collect()
    }
}

pub(crate) fn state_count(vocab: usize, cells: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..cells {
        total = total.saturating_mul(vocab as u128);
    }
    total
}

fn checked_states(vocab: usize, cells: usize, what: &'static str) -> Result<usize> {
    let needed = state_count(vocab, cells);
    if needed > EXACT_STATE_LIMIT {
        return Err(Error::ResourceLimit {
            what,
            needed,
            limit: EXACT_STATE_LIMIT,
        });
    }
    Ok(needed as usize)
}

/// Mixed-radix increment, last digit least significant.
pub(crate) fn increment(digits: &mut [usize], radix: usize) {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < radix {
            return;
        }
        *d = 0;
    }
}

pub(crate) fn decode(mut index: usize, radix: usize, len: usize) -> Vec<usize> {
    let mut out = vec![0usize; len];
    for d in out.iter_mut().rev() {
        *d = index % radix;
        index /= radix;
    }
    out
}

pub(crate) fn encode(digits: &[usize], radix: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * radix + d)
}
