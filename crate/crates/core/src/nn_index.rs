//! Exact incremental nearest-neighbour search over an append-only point set.
//!
//! For `d <= 3` points are bucketed into a uniform grid whose resolution
//! tracks the point count (roughly two points per cell, re-bucketed each time
//! the count doubles). Queries scan Chebyshev rings of cells outward from the
//! query cell, clipped to the bounding box of occupied cells, and stop once
//! the next ring cannot beat the best candidate. Higher dimensions fall back
//! to a linear scan.
//!
//! Distances are compared squared and ties go to the smallest insertion
//! index, so the result is bit-identical to [`nearest_bruteforce`].

use crate::error::{Error, Result};
use crate::space::{check_dim, squared_distance, Point};

const GRID_MAX_DIM: usize = 3;
const POINTS_PER_CELL: f64 = 2.0;
const MAX_CELLS: usize = 1 << 22;
const FIRST_REBUILD: usize = 64;
/// Absolute slack on squared-distance pruning; only ever makes the search
/// visit more cells, never fewer.
const PRUNE_SLACK: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct NnIndex {
    d: usize,
    coords: Vec<f64>,
    grid: Option<Grid>,
}

#[derive(Clone, Debug)]
struct Grid {
    per_axis: usize,
    side: f64,
    cells: Vec<Vec<u32>>,
    // Bounding box of occupied cells, inclusive, per axis.
    lo: [usize; GRID_MAX_DIM],
    hi: [usize; GRID_MAX_DIM],
    next_rebuild: usize,
}

impl NnIndex {
    pub fn new(d: usize) -> Result<Self> {
        check_dim(d)?;
        let grid = (d <= GRID_MAX_DIM).then(|| Grid::empty(d));
        Ok(Self {
            d,
            coords: Vec::new(),
            grid,
        })
    }

    /// Index that always scans linearly, whatever the dimension.
    pub fn brute_force(d: usize) -> Result<Self> {
        check_dim(d)?;
        Ok(Self {
            d,
            coords: Vec::new(),
            grid: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    /// Appends `p` and returns its 0-based insertion index.
    pub fn insert(&mut self, p: &Point) -> Result<usize> {
        if p.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: p.dim(),
            });
        }
        let idx = self.len();
        self.coords.extend_from_slice(p.coords());
        if let Some(grid) = self.grid.as_mut() {
            if idx + 1 >= grid.next_rebuild {
                grid.rebuild(self.d, &self.coords);
            } else {
                grid.add(self.d, p.coords(), idx);
            }
        }
        Ok(idx)
    }

    /// Exact nearest inserted point to `q` as `(index, distance)`.
    pub fn nearest(&self, q: &Point) -> Result<(usize, f64)> {
        if q.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: q.dim(),
            });
        }
        let (i, d2) = self.nearest_sq(q.coords())?;
        Ok((i, d2.sqrt()))
    }

    /// Like [`nearest`](Self::nearest) but on a raw slice, returning the
    /// squared distance.
    pub fn nearest_sq(&self, q: &[f64]) -> Result<(usize, f64)> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        Ok(match &self.grid {
            Some(grid) => grid.nearest(self.d, &self.coords, q),
            None => scan(self.d, &self.coords, q),
        })
    }
}

/// Linear-scan reference: exact argmin with ties to the lowest index.
pub fn nearest_bruteforce(points: &[Point], q: &Point) -> Result<(usize, f64)> {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in points.iter().enumerate() {
        if p.dim() != q.dim() {
            return Err(Error::DimensionMismatch {
                expected: q.dim(),
                got: p.dim(),
            });
        }
        let d2 = squared_distance(q.coords(), p.coords());
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    if best.0 == usize::MAX {
        return Err(Error::EmptyIndex);
    }
    Ok((best.0, best.1.sqrt()))
}

fn scan(d: usize, coords: &[f64], q: &[f64]) -> (usize, f64) {
    let mut best = (usize::MAX, f64::INFINITY);
    for (i, p) in coords.chunks_exact(d).enumerate() {
        let d2 = squared_distance(q, p);
        if d2 < best.1 {
            best = (i, d2);
        }
    }
    best
}

impl Grid {
    fn empty(d: usize) -> Self {
        let mut g = Self {
            per_axis: 1,
            side: 1.0,
            cells: vec![Vec::new()],
            lo: [usize::MAX; GRID_MAX_DIM],
            hi: [0; GRID_MAX_DIM],
            next_rebuild: FIRST_REBUILD,
        };
        for axis in d..GRID_MAX_DIM {
            g.lo[axis] = 0;
        }
        g
    }

    fn resolution_for(d: usize, n: usize) -> usize {
        let max_per_axis = (MAX_CELLS as f64).powf(1.0 / d as f64).floor() as usize;
        let per_axis = (n as f64 / POINTS_PER_CELL).powf(1.0 / d as f64).floor() as usize;
        per_axis.clamp(1, max_per_axis.max(1))
    }

    fn rebuild(&mut self, d: usize, coords: &[f64]) {
        let n = coords.len() / d;
        let per_axis = Self::resolution_for(d, n);
        let total = per_axis.pow(d as u32);
        *self = Self::empty(d);
        self.per_axis = per_axis;
        self.side = 1.0 / per_axis as f64;
        self.cells = vec![Vec::new(); total];
        self.next_rebuild = (2 * n).max(FIRST_REBUILD);
        for (i, p) in coords.chunks_exact(d).enumerate() {
            self.add(d, p, i);
        }
    }

    #[inline]
    fn axis_cell(&self, x: f64) -> usize {
        ((x * self.per_axis as f64) as usize).min(self.per_axis - 1)
    }

    fn add(&mut self, d: usize, p: &[f64], idx: usize) {
        let mut flat = 0;
        for (axis, &x) in p.iter().enumerate() {
            let c = self.axis_cell(x);
            self.lo[axis] = self.lo[axis].min(c);
            self.hi[axis] = self.hi[axis].max(c);
            flat = flat * self.per_axis + c;
        }
        debug_assert!(d <= GRID_MAX_DIM);
        self.cells[flat].push(idx as u32);
    }

    fn nearest(&self, d: usize, coords: &[f64], q: &[f64]) -> (usize, f64) {
        let mut qc = [0usize; GRID_MAX_DIM];
        for axis in 0..d {
            qc[axis] = self.axis_cell(q[axis]);
        }
        let mut search = RingSearch {
            grid: self,
            d,
            coords,
            q,
            best: (usize::MAX, f64::INFINITY),
        };
        let mut r = 0usize;
        loop {
            if r > 0 {
                // Every cell in ring r is at least (r - 1) cells away along some axis.
                let reach = (r - 1) as f64 * self.side;
                if reach * reach > search.best.1 + PRUNE_SLACK {
                    break;
                }
            }
            let mut ranges = [(0usize, 0usize); GRID_MAX_DIM];
            let mut empty = false;
            let mut covers_bbox = true;
            for axis in 0..d {
                let from = qc[axis].saturating_sub(r);
                let to = (qc[axis] + r).min(self.per_axis - 1);
                let from_c = from.max(self.lo[axis]);
                let to_c = to.min(self.hi[axis]);
                if from_c > to_c {
                    empty = true;
                }
                if from > self.lo[axis] || to < self.hi[axis] {
                    covers_bbox = false;
                }
                ranges[axis] = (from_c, to_c);
            }
            if !empty {
                search.shell(&qc, r, &ranges, 0, false, 0);
            }
            if covers_bbox {
                break;
            }
            r += 1;
        }
        search.best
    }
}

struct RingSearch<'a> {
    grid: &'a Grid,
    d: usize,
    coords: &'a [f64],
    q: &'a [f64],
    best: (usize, f64),
}

impl RingSearch<'_> {
    /// Visits every cell whose Chebyshev offset from `qc` is exactly `r`,
    /// restricted to `ranges`.
    fn shell(
        &mut self,
        qc: &[usize; GRID_MAX_DIM],
        r: usize,
        ranges: &[(usize, usize); GRID_MAX_DIM],
        axis: usize,
        on_shell: bool,
        flat: usize,
    ) {
        let (from, to) = ranges[axis];
        let last = axis + 1 == self.d;
        let lo_face = qc[axis].checked_sub(r);
        let hi_face = qc[axis] + r;
        if last && !on_shell {
            if let Some(c) = lo_face {
                if (from..=to).contains(&c) {
                    self.cell(flat * self.grid.per_axis + c);
                }
            }
            if r > 0 && (from..=to).contains(&hi_face) {
                self.cell(flat * self.grid.per_axis + hi_face);
            }
            return;
        }
        for c in from..=to {
            let next = flat * self.grid.per_axis + c;
            if last {
                self.cell(next);
            } else {
                let hit = on_shell || Some(c) == lo_face || c == hi_face;
                self.shell(qc, r, ranges, axis + 1, hit, next);
            }
        }
    }

    fn cell(&mut self, flat: usize) {
        let bucket = &self.grid.cells[flat];
        if bucket.is_empty() {
            return;
        }
        if self.cell_lower_bound(flat) > self.best.1 + PRUNE_SLACK {
            return;
        }
        for &i in bucket {
            let i = i as usize;
            let d2 = squared_distance(self.q, &self.coords[i * self.d..(i + 1) * self.d]);
            if d2 < self.best.1 || (d2 == self.best.1 && i < self.best.0) {
                self.best = (i, d2);
            }
        }
    }

    fn cell_lower_bound(&self, mut flat: usize) -> f64 {
        let g = self.grid;
        let mut acc = 0.0;
        for axis in (0..self.d).rev() {
            let c = flat % g.per_axis;
            flat /= g.per_axis;
            let lo = c as f64 * g.side;
            let hi = (c + 1) as f64 * g.side;
            let x = self.q[axis];
            let gap = if x < lo {
                lo - x
            } else if x > hi {
                x - hi
            } else {
                0.0
            };
            acc += gap * gap;
        }
        acc
    }
}
