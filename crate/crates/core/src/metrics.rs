//! Spatial spread of unmasking steps and star discrepancy of point sets.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::gridmap::Coord;
use crate::lds::HaltonPoint2D;

/// Nearest-neighbor distances within one step.
///
/// Both fields are `f64::INFINITY` for a single-cell step, where no
/// neighbor exists.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spread {
    pub min: f64,
    pub mean: f64,
}

impl Spread {
    pub fn is_applicable(&self) -> bool {
        self.min.is_finite()
    }
}

/// Min and mean over `cells` of the distance to the nearest other cell.
pub fn intra_step_spread(cells: &[Coord]) -> Result<Spread> {
    if cells.is_empty() {
        return Err(Error::invalid("spread of an empty step"));
    }
    if cells.len() == 1 {
        return Ok(Spread {
            min: f64::INFINITY,
            mean: f64::INFINITY,
        });
    }
    let nearest: Vec<f64> = cells
        .iter()
        .enumerate()
        .map(|(i, a)| {
            cells
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, b)| a.distance(b))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    Ok(Spread {
        min: nearest.iter().copied().fold(f64::INFINITY, f64::min),
        mean: nearest.iter().sum::<f64>() / nearest.len() as f64,
    })
}

/// Mean over `cells` of the distance to the closest revealed cell.
pub fn distance_to_revealed(cells: &[Coord], revealed: &[Coord]) -> Result<f64> {
    if revealed.is_empty() {
        return Err(Error::invalid("no revealed cells to measure against"));
    }
    if cells.is_empty() {
        return Err(Error::invalid("distance of an empty step"));
    }
    let total: f64 = cells
        .iter()
        .map(|a| {
            revealed
                .iter()
                .map(|b| a.distance(b))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    Ok(total / cells.len() as f64)
}

/// Per-step diagnostics of a sampling run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    pub step_index: usize,
    /// Sum of the predicted marginal entropies of the cells revealed at this
    /// step, in nats.
    pub entropy_sum: f64,
    pub intra_step_min_nn_distance: f64,
    pub intra_step_mean_nn_distance: f64,
    /// `None` at the first step.
    pub mean_distance_to_revealed: Option<f64>,
    pub tokens_revealed_cumulative: usize,
}

impl StepMetrics {
    pub fn compute(
        step_index: usize,
        cells: &[Coord],
        revealed_before: &[Coord],
        entropy_sum: f64,
    ) -> Result<Self> {
        let spread = intra_step_spread(cells)?;
        let mean_distance_to_revealed = if revealed_before.is_empty() {
            None
        } else {
            Some(distance_to_revealed(cells, revealed_before)?)
        };
        Ok(StepMetrics {
            step_index,
            entropy_sum,
            intra_step_min_nn_distance: spread.min,
            intra_step_mean_nn_distance: spread.mean,
            mean_distance_to_revealed,
            tokens_revealed_cumulative: revealed_before.len() + cells.len(),
        })
    }
}

/// Largest point set accepted by [`star_discrepancy`].
pub const STAR_DISCREPANCY_LIMIT: usize = 512;

/// Exact star discrepancy of points in `[0,1)^2`.
///
/// Every anchored box `[0,a) x [0,b)` whose corner lies on point coordinates
/// (or 1) is checked both as an open box (`ab - count/k`) and as a closed box
/// (`count/k - ab`).
pub fn star_discrepancy(points: &[HaltonPoint2D]) -> Result<f64> {
    let k = points.len();
    if k == 0 {
        return Err(Error::invalid("star discrepancy of an empty point set"));
    }
    if k > STAR_DISCREPANCY_LIMIT {
        return Err(Error::ResourceLimit {
            what: "exact star discrepancy",
            needed: k as u128,
            limit: STAR_DISCREPANCY_LIMIT as u128,
        });
    }
    let corners = |f: fn(&HaltonPoint2D) -> f64| {
        let mut v: Vec<f64> = points.iter().map(f).collect();
        v.push(1.0);
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let xs = corners(|p| p.x);
    let ys = corners(|p| p.y);
    let kf = k as f64;

    let mut worst: f64 = 0.0;
    let mut open_ys: Vec<f64> = Vec::with_capacity(k);
    let mut closed_ys: Vec<f64> = Vec::with_capacity(k);
    for &a in &xs {
        open_ys.clear();
        closed_ys.clear();
        for p in points {
            if p.x < a {
                open_ys.push(p.y);
            }
            if p.x <= a {
                closed_ys.push(p.y);
            }
        }
        open_ys.sort_by(f64::total_cmp);
        closed_ys.sort_by(f64::total_cmp);
        for &b in &ys {
            let open = open_ys.partition_point(|&y| y < b) as f64;
            let closed = closed_ys.partition_point(|&y| y <= b) as f64;
            let area = a * b;
            worst = worst.max(area - open / kf).max(closed / kf - area);
        }
    }
    Ok(worst.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(r: usize, col: usize) -> Coord {
        Coord::new(r, col)
    }

    #[test]
    fn spread_examples() {
        let s = intra_step_spread(&[c(0, 0), c(0, 1)]).unwrap();
        assert_eq!((s.min, s.mean), (1.0, 1.0));
        assert_eq!(intra_step_spread(&[c(0, 0), c(3, 4)]).unwrap().min, 5.0);
        let corners = [c(0, 0), c(0, 31), c(31, 0), c(31, 31)];
        let s = intra_step_spread(&corners).unwrap();
        assert_eq!(s.min, 31.0);
        assert_eq!(s.mean, 31.0);
        assert!(!intra_step_spread(&[c(2, 2)]).unwrap().is_applicable());
        assert!(intra_step_spread(&[]).is_err());
    }

    #[test]
    fn distance_to_revealed_examples() {
        assert_eq!(
            distance_to_revealed(&[c(0, 1), c(1, 0)], &[c(0, 0)]).unwrap(),
            1.0
        );
        assert_eq!(
            distance_to_revealed(&[c(2, 2)], &[c(2, 2), c(0, 0)]).unwrap(),
            0.0
        );
        assert!(distance_to_revealed(&[c(0, 0)], &[]).is_err());
    }

    #[test]
    fn step_metrics_first_step_has_no_revealed_distance() {
        let m = StepMetrics::compute(1, &[c(0, 0), c(2, 2)], &[], 1.2).unwrap();
        assert_eq!(m.mean_distance_to_revealed, None);
        assert_eq!(m.tokens_revealed_cumulative, 2);
    }

    fn pt(x: f64, y: f64) -> HaltonPoint2D {
        HaltonPoint2D::new(x, y).unwrap()
    }

    #[test]
    fn discrepancy_of_a_single_center_point() {
        assert!((star_discrepancy(&[pt(0.5, 0.5)]).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn clustered_points_have_large_discrepancy() {
        let pts: Vec<_> = (0..10)
            .map(|i| pt(0.04 * i as f64, 0.45 - 0.04 * i as f64))
            .collect();
        assert!(star_discrepancy(&pts).unwrap() >= 0.75);
    }

    #[test]
    fn discrepancy_limits() {
        assert!(star_discrepancy(&[]).is_err());
        let many = alloc::vec![pt(0.1, 0.1); STAR_DISCREPANCY_LIMIT + 1];
        assert!(matches!(
            star_discrepancy(&many),
            Err(Error::ResourceLimit { .. })
        ));
    }
}
