//! Cells, the query hypercube, and exact coverage volumes.
//!
//! Everything is expressed in the unit model: the query is `[-1/2, 1/2)^d`
//! and grid `i` contributes the cell `[u - 1, u)` per dimension, where
//! `u = offsets[i][j]` is uniform on `[0, 1)`. Half-open intervals are used
//! throughout, so ties at breakpoints never change a volume.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spec::CoverageSpec;

/// Largest cell count the exact decomposition accepts.
pub const MAX_CELLS: usize = 8;
/// Largest dimensionality the exact decomposition accepts.
pub const MAX_DIM: usize = 8;

/// One realization of `m` origin-containing cells, stored as an `m × d`
/// row-major matrix of upper-boundary offsets.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSet<T> {
    m: usize,
    d: usize,
    offsets: Vec<T>,
}

impl<T: Real> CellSet<T> {
    /// Builds a cell set from rows of offsets; every entry must lie in `[0, 1)`.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let m = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if m == 0 || d == 0 {
            return Err(Error::InvalidParameter("cell set needs at least one cell and one dimension".into()));
        }
        let mut offsets = Vec::with_capacity(m * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::InvalidParameter("ragged offset matrix".into()));
            }
            for &u in row {
                if !(u >= T::zero() && u < T::one()) {
                    return Err(Error::InvalidParameter(format!("offset {u:?} outside [0, 1)")));
                }
                offsets.push(u);
            }
        }
        Ok(Self { m, d, offsets })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn offset(&self, cell: usize, dim: usize) -> T {
        self.offsets[cell * self.d + dim]
    }

    pub fn row(&self, cell: usize) -> &[T] {
        &self.offsets[cell * self.d..(cell + 1) * self.d]
    }

    /// Returns a copy with one more cell appended.
    pub fn with_cell(&self, row: &[T]) -> Result<Self> {
        let mut rows: Vec<Vec<T>> = (0..self.m).map(|i| self.row(i).to_vec()).collect();
        rows.push(row.to_vec());
        Self::from_rows(&rows)
    }

    /// Number of cells containing `point` (query coordinates).
    pub fn multiplicity(&self, point: &[T]) -> usize {
        (0..self.m)
            .filter(|&i| {
                self.row(i)
                    .iter()
                    .zip(point)
                    .all(|(&u, &x)| u - T::one() <= x && x < u)
            })
            .count()
    }
}

/// Draws `m × d` independent uniform offsets for `spec`.
pub fn sample_cell_set<T: Real, R: Rng + ?Sized>(rng: &mut R, spec: &CoverageSpec) -> CellSet<T> {
    let (m, d) = (spec.m(), spec.d());
    let offsets = (0..m * d).map(|_| T::sample_unit(rng)).collect();
    CellSet { m, d, offsets }
}

/// Per-dimension intersections of each cell with the query hypercube.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedIntervalSet<T> {
    m: usize,
    d: usize,
    // dimension-major: intervals[j * m + i]
    intervals: Vec<(T, T)>,
}

impl<T: Real> ClippedIntervalSet<T> {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// `[lower, upper)` of cell `cell` in dimension `dim`.
    pub fn interval(&self, cell: usize, dim: usize) -> (T, T) {
        self.intervals[dim * self.m + cell]
    }

    pub fn length(&self, cell: usize, dim: usize) -> T {
        let (lo, hi) = self.interval(cell, dim);
        hi - lo
    }

    pub fn dimension(&self, dim: usize) -> &[(T, T)] {
        &self.intervals[dim * self.m..(dim + 1) * self.m]
    }
}

pub fn clip_to_query<T: Real>(cells: &CellSet<T>) -> ClippedIntervalSet<T> {
    let half = T::lit(0.5);
    let mut intervals = Vec::with_capacity(cells.m * cells.d);
    for j in 0..cells.d {
        for i in 0..cells.m {
            let u = cells.offset(i, j);
            intervals.push(((u - T::one()).max(-half), u.min(half)));
        }
    }
    ClippedIntervalSet { m: cells.m, d: cells.d, intervals }
}

/// Elementary slabs of one dimension: (bitmask of covering cells, length),
/// with equal masks merged.
fn slabs<T: Real>(intervals: &[(T, T)]) -> Vec<(u32, T)> {
    let half = T::lit(0.5);
    let mut cuts: Vec<T> = Vec::with_capacity(2 * intervals.len() + 2);
    cuts.push(-half);
    cuts.push(half);
    for &(lo, hi) in intervals {
        cuts.push(lo);
        cuts.push(hi);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    cuts.dedup();

    let mut out: Vec<(u32, T)> = Vec::new();
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mask = intervals
            .iter()
            .enumerate()
            .filter(|(_, &(lo, hi))| lo <= a && b <= hi)
            .fold(0u32, |acc, (i, _)| acc | (1 << i));
        match out.iter_mut().find(|(m, _)| *m == mask) {
            Some(slot) => slot.1 = slot.1 + (b - a),
            None => out.push((mask, b - a)),
        }
    }
    out
}

/// Exact volume fraction of the query covered by at least `ell` cells.
///
/// The query is cut into elementary boxes by every interval endpoint; a box
/// is covered by a cell iff the cell covers the box's slab in every
/// dimension. Rather than enumerating the `(2m + 1)^d` boxes, the volume is
/// accumulated one dimension at a time, keyed by the set of cells still
/// covering (at most `2^m` states).
pub fn coverage_volume<T: Real>(cells: &CellSet<T>, ell: usize) -> Result<T> {
    if ell == 0 {
        return Err(Error::InvalidParameter("ell must be at least 1".into()));
    }
    if ell > cells.m {
        return Ok(T::zero());
    }
    if cells.m > MAX_CELLS || cells.d > MAX_DIM {
        return Err(Error::DecompositionLimit {
            m: cells.m,
            d: cells.d,
            max_m: MAX_CELLS,
            max_d: MAX_DIM,
        });
    }

    let clipped = clip_to_query(cells);
    let states = 1usize << cells.m;
    let mut volume = vec![T::zero(); states];
    volume[states - 1] = T::one();
    let mut next = vec![T::zero(); states];

    for j in 0..cells.d {
        let slabs = slabs(clipped.dimension(j));
        next.iter_mut().for_each(|v| *v = T::zero());
        for (mask, &vol) in volume.iter().enumerate() {
            if vol == T::zero() {
                continue;
            }
            for &(slab_mask, len) in &slabs {
                let k = mask & slab_mask as usize;
                next[k] = next[k] + vol * len;
            }
        }
        std::mem::swap(&mut volume, &mut next);
    }

    let total = volume
        .iter()
        .enumerate()
        .filter(|(mask, _)| mask.count_ones() as usize >= ell)
        .fold(T::zero(), |acc, (_, &v)| acc + v);
    Ok(total.max(T::zero()).min(T::one()))
}
