//! Cubic lattice of side `s` over the reduced space.
//!
//! Cell `m` covers the half-open box `[m_j s, (m_j + 1) s)` in every
//! coordinate. Distances to a cell are measured to its closed box.

use std::fmt;

use crate::error::{Error, Result};

/// Default cap on the number of cells a single cover may contain.
pub const DEFAULT_ENUM_BUDGET: u64 = 10_000_000;

/// Largest coordinate magnitude, in cells, accepted by [`quantize`].
const COORD_LIMIT: f64 = (1u64 << 62) as f64;

/// Integer lattice coordinates of one cell. Ordered lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellId(pub Vec<i64>);

impl CellId {
    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

fn check_side(side: f64) -> Result<()> {
    if !(side > 0.0) || !side.is_finite() {
        return Err(Error::invalid(format!("grid side must be positive (got {side})")));
    }
    Ok(())
}

#[inline]
fn cell_bounds(m: i64, side: f64) -> (f64, f64) {
    (m as f64 * side, (m + 1) as f64 * side)
}

/// Per-coordinate distance from `x` to the closed interval of cell `m`.
#[inline]
fn residual(m: i64, x: f64, side: f64) -> f64 {
    let (lo, hi) = cell_bounds(m, side);
    if x < lo {
        lo - x
    } else if x > hi {
        x - hi
    } else {
        0.0
    }
}

/// Cell index of one coordinate, corrected so that the computed bounds
/// `[m s, (m+1) s)` really contain `x` in floating point.
fn quantize_coord(x: f64, side: f64) -> Result<i64> {
    let q = (x / side).floor();
    if !q.is_finite() || q.abs() > COORD_LIMIT {
        return Err(Error::invalid(format!(
            "coordinate {x} is outside the representable lattice for side {side}"
        )));
    }
    let mut m = q as i64;
    let (lo, hi) = cell_bounds(m, side);
    if x < lo {
        m -= 1;
    } else if x >= hi {
        m += 1;
    }
    Ok(m)
}

/// `floor(x_j / s)` per coordinate.
pub fn quantize(x: &[f64], side: f64) -> Result<CellId> {
    let mut coords = Vec::with_capacity(x.len());
    quantize_into(x, side, &mut coords)?;
    Ok(CellId(coords))
}

pub(crate) fn quantize_into(x: &[f64], side: f64, out: &mut Vec<i64>) -> Result<()> {
    check_side(side)?;
    out.clear();
    for &v in x {
        out.push(quantize_coord(v, side)?);
    }
    Ok(())
}

/// Euclidean distance from `center` to the closed box of `cell`.
pub fn box_ball_distance(cell: &CellId, center: &[f64], side: f64) -> Result<f64> {
    if cell.dim() != center.len() {
        return Err(Error::invalid(format!(
            "cell has dimension {}, center has {}",
            cell.dim(),
            center.len()
        )));
    }
    check_side(side)?;
    Ok(box_distance_sq(cell.coords(), center, side).sqrt())
}

fn box_distance_sq(coords: &[i64], center: &[f64], side: f64) -> f64 {
    coords
        .iter()
        .zip(center)
        .map(|(&m, &x)| {
            let r = residual(m, x, side);
            r * r
        })
        .sum()
}

/// All cells whose closed box lies within `radius` of `center`, in
/// lexicographic order.
pub fn cells_intersecting_ball(center: &[f64], radius: f64, side: f64, budget: u64) -> Result<Vec<CellId>> {
    let mut out = Vec::new();
    for_each_cell_in_ball(center, radius, side, budget, |c| out.push(CellId(c.to_vec())))?;
    Ok(out)
}

/// Visits the cover of the ball in lexicographic order without allocating a
/// `CellId` per cell. Returns the number of cells visited.
///
/// Depth-first over coordinates; a prefix is abandoned once its accumulated
/// squared residual already exceeds `radius^2`. Partial sums only grow, so
/// pruning on them never drops a cell the final test would accept.
pub fn for_each_cell_in_ball<F: FnMut(&[i64])>(
    center: &[f64],
    radius: f64,
    side: f64,
    budget: u64,
    mut visit: F,
) -> Result<u64> {
    check_side(side)?;
    if !(radius >= 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("radius must be non-negative (got {radius})")));
    }
    if let Some(x) = center.iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite center coordinate {x}")));
    }
    // Reject centers off the lattice before any cell arithmetic.
    for &x in center {
        quantize_coord(x, side)?;
        quantize_coord(x + radius.copysign(x), side)?;
    }

    let mut walk = BallWalk {
        center,
        radius,
        side,
        budget,
        count: 0,
        coords: vec![0; center.len()],
        partial: vec![0.0; center.len() + 1],
    };
    walk.descend(0, &mut visit)?;
    Ok(walk.count)
}

struct BallWalk<'a> {
    center: &'a [f64],
    radius: f64,
    side: f64,
    budget: u64,
    count: u64,
    coords: Vec<i64>,
    /// `partial[j]` is the summed squared residual of coordinates `0..j`.
    partial: Vec<f64>,
}

impl BallWalk<'_> {
    fn descend<F: FnMut(&[i64])>(&mut self, depth: usize, visit: &mut F) -> Result<()> {
        if depth == self.center.len() {
            if self.partial[depth].sqrt() <= self.radius {
                self.count += 1;
                if self.count > self.budget {
                    return Err(Error::BudgetExceeded {
                        k: self.center.len(),
                        radius_over_side: self.radius / self.side,
                        budget: self.budget,
                    });
                }
                visit(&self.coords);
            }
            return Ok(());
        }
        let x = self.center[depth];
        let acc = self.partial[depth];
        let reach = (self.radius * self.radius - acc).max(0.0).sqrt();
        // One extra cell on each side absorbs rounding in the range ends;
        // every candidate is still tested exactly below.
        let lo = ((x - reach) / self.side).floor() as i64 - 1;
        let hi = ((x + reach) / self.side).floor() as i64 + 1;
        for m in lo..=hi {
            let r = residual(m, x, self.side);
            let next = acc + r * r;
            if next.sqrt() > self.radius {
                continue;
            }
            self.coords[depth] = m;
            self.partial[depth + 1] = next;
            self.descend(depth + 1, visit)?;
        }
        Ok(())
    }
}
