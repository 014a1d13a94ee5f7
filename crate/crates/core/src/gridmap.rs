//! Token-grid geometry and the Halton token order.
//!
//! Axis convention: the base-2 coordinate selects the column, the base-3
//! coordinate selects the row. A point maps to
//! `(floor(y * height), floor(x * width))`.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::lds::{ExactHalton2DIter, ExactPoint2D, Halton2DIter, HaltonPoint2D};
use crate::math::{floor, sqrt};

/// Arithmetic used when mapping Halton points onto the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NumericMode {
    /// Exact fractions, exact floors.
    Rational,
    #[default]
    Float,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridSpec {
    height: usize,
    width: usize,
}

impl GridSpec {
    pub fn new(height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::invalid(alloc::format!(
                "grid dimensions must be >= 1, got {height}x{width}"
            )));
        }
        height
            .checked_mul(width)
            .ok_or_else(|| Error::invalid("grid cell count overflows"))?;
        Ok(GridSpec { height, width })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Total token count `n`.
    pub fn cell_count(&self) -> usize {
        self.height * self.width
    }

    pub fn contains(&self, c: Coord) -> bool {
        c.row < self.height && c.col < self.width
    }

    /// Row-major index of `c`.
    pub fn index(&self, c: Coord) -> usize {
        c.row * self.width + c.col
    }

    pub fn coord(&self, index: usize) -> Coord {
        Coord::new(index / self.width, index % self.width)
    }

    /// All cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = Coord> + '_ {
        (0..self.cell_count()).map(|i| self.coord(i))
    }

    pub(crate) fn check(&self, c: Coord) -> Result<()> {
        if self.contains(c) {
            Ok(())
        } else {
            Err(Error::invalid(alloc::format!(
                "cell {c} outside {}x{} grid",
                self.height,
                self.width
            )))
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.height, self.width)
    }
}

/// A cell address. Ordering is row-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coord {
    pub row: usize,
    pub col: usize,
}

impl Coord {
    pub const fn new(row: usize, col: usize) -> Self {
        Coord { row, col }
    }

    /// Euclidean distance in grid units.
    pub fn distance(&self, other: &Coord) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        sqrt(dr * dr + dc * dc)
    }
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

/// A permutation of every cell of a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenOrder {
    grid: GridSpec,
    coords: Vec<Coord>,
}

impl TokenOrder {
    /// Checks that `coords` visits every cell of `grid` exactly once.
    pub fn new(grid: GridSpec, coords: Vec<Coord>) -> Result<Self> {
        if coords.len() != grid.cell_count() {
            return Err(Error::invalid(alloc::format!(
                "token order has {} cells, grid has {}",
                coords.len(),
                grid.cell_count()
            )));
        }
        let mut seen = vec![false; grid.cell_count()];
        for &c in &coords {
            grid.check(c)?;
            let i = grid.index(c);
            if seen[i] {
                return Err(Error::invalid(alloc::format!("cell {c} appears twice")));
            }
            seen[i] = true;
        }
        Ok(TokenOrder { grid, coords })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<Coord> {
        self.coords
    }

    /// Row-major raster order.
    pub fn raster(grid: GridSpec) -> Self {
        TokenOrder {
            grid,
            coords: grid.cells().collect(),
        }
    }
}

/// Maps a point of `[0,1)^2` to its grid cell.
pub fn discretize(point: HaltonPoint2D, grid: GridSpec) -> Coord {
    let col = floor(point.x * grid.width as f64) as usize;
    let row = floor(point.y * grid.height as f64) as usize;
    Coord::new(row.min(grid.height - 1), col.min(grid.width - 1))
}

/// Same mapping as [`discretize`] with exact floors.
pub fn discretize_exact(point: ExactPoint2D, grid: GridSpec) -> Option<Coord> {
    let col = point.x.floor_mul(grid.width as u128)? as usize;
    let row = point.y.floor_mul(grid.height as u128)? as usize;
    Some(Coord::new(
        row.min(grid.height - 1),
        col.min(grid.width - 1),
    ))
}

/// Multiplier on the cell count bounding how many Halton points are drawn.
const MAX_POINTS_PER_CELL: usize = 1_000_000;

/// Every cell of `grid`, ordered by first hit of the 2D Halton sequence.
pub fn halton_token_order(grid: GridSpec) -> Result<TokenOrder> {
    halton_token_order_with(grid, NumericMode::Float)
}

pub fn halton_token_order_with(grid: GridSpec, mode: NumericMode) -> Result<TokenOrder> {
    match mode {
        NumericMode::Float => {
            first_hits(grid, Halton2DIter::new().map(|p| Some(discretize(p, grid))))
        }
        NumericMode::Rational => first_hits(
            grid,
            ExactHalton2DIter::new().map(|p| discretize_exact(p, grid)),
        ),
    }
}

/// Keeps the first occurrence of each cell. Points are drawn in batches:
/// `2n` to start, doubling while cells remain uncovered.
fn first_hits<I>(grid: GridSpec, cells: I) -> Result<TokenOrder>
where
    I: Iterator<Item = Option<Coord>>,
{
    let n = grid.cell_count();
    let cap = n.saturating_mul(MAX_POINTS_PER_CELL);
    let mut budget = n.saturating_mul(2);
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut drawn = 0usize;
    let mut cells = cells;

    while order.len() < n {
        if drawn == budget {
            if budget >= cap {
                return Err(Error::internal(alloc::format!(
                    "Halton sequence did not cover {grid} within {cap} points"
                )));
            }
            budget = budget.saturating_mul(2).min(cap);
        }
        let c = cells
            .next()
            .flatten()
            .ok_or_else(|| Error::internal("Halton generator overflowed"))?;
        drawn += 1;
        let i = grid.index(c);
        if !seen[i] {
            seen[i] = true;
            order.push(c);
        }
    }
    Ok(TokenOrder {
        grid,
        coords: order,
    })
}
