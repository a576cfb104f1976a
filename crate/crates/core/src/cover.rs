//! ε-cover tracking through a grid certificate, plus the constants and
//! harmonic-number reference curves for covering times.
//!
//! The cube is split into `k^d` cells with `k = ⌈√d/ε⌉`, so each cell has
//! diagonal at most `ε`. A vertex inside a cell covers the whole cell, and a
//! vertex in every cell certifies that the ε-balls around the vertices cover
//! the cube.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::nn_index::NnIndex;
use crate::space::{squared_distance, uniform_sample, Point, RngStream};
use crate::tree::StepOutcome;

pub const MAX_CELLS: u64 = 1 << 31;

#[derive(Clone, Debug)]
pub struct CoverState {
    d: usize,
    epsilon: f64,
    cells_per_axis: u64,
    cell_count: u64,
    occupied: Vec<u64>,
    occupied_count: u64,
    cover_step: Option<u64>,
}

impl CoverState {
    pub fn new(d: usize, epsilon: f64) -> Result<Self> {
        crate::space::check_dim(d)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(crate::error::invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        let cells_per_axis = cells_per_axis(d, epsilon);
        let cell_count = checked_cell_count(d, cells_per_axis)?;
        Ok(Self {
            d,
            epsilon,
            cells_per_axis,
            cell_count,
            occupied: vec![0; cell_count.div_ceil(64) as usize],
            occupied_count: 0,
            cover_step: None,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn cells_per_axis(&self) -> u64 {
        self.cells_per_axis
    }

    pub fn cell_count(&self) -> u64 {
        self.cell_count
    }

    pub fn occupied_count(&self) -> u64 {
        self.occupied_count
    }

    /// Step at which the last empty cell was filled.
    pub fn cover_step(&self) -> Option<u64> {
        self.cover_step
    }

    pub fn is_covered(&self) -> bool {
        self.cover_step.is_some()
    }

    /// Row-major cell index with axis 0 varying fastest (`x` is the column,
    /// `y` the row); coordinate 1.0 falls into the last cell.
    pub fn cell_of(&self, p: &Point) -> u64 {
        debug_assert_eq!(p.dim(), self.d);
        let k = self.cells_per_axis;
        p.coords().iter().rev().fold(0u64, |acc, &x| {
            let c = ((x * k as f64) as u64).min(k - 1);
            acc * k + c
        })
    }

    pub fn is_occupied(&self, cell: u64) -> bool {
        self.occupied[(cell / 64) as usize] & (1 << (cell % 64)) != 0
    }

    /// Marks the cell containing `p`. Returns `true` exactly when this call
    /// fills the last empty cell, recording `step` as the cover step.
    pub fn register_vertex(&mut self, p: &Point, step: u64) -> bool {
        let cell = self.cell_of(p);
        let word = &mut self.occupied[(cell / 64) as usize];
        let bit = 1u64 << (cell % 64);
        if *word & bit != 0 {
            return false;
        }
        *word |= bit;
        self.occupied_count += 1;
        if self.occupied_count == self.cell_count {
            self.cover_step = Some(step);
            return true;
        }
        false
    }
}

pub fn cells_per_axis(d: usize, epsilon: f64) -> u64 {
    ((d as f64).sqrt() / epsilon).ceil().max(1.0) as u64
}

fn checked_cell_count(d: usize, cells_per_axis: u64) -> Result<u64> {
    let mut total: u64 = 1;
    for _ in 0..d {
        total = total
            .checked_mul(cells_per_axis)
            .filter(|&t| t <= MAX_CELLS)
            .ok_or(Error::GridTooLarge { d, cells_per_axis })?;
    }
    Ok(total)
}

/// Validates that an `(d, ε)` grid fits the memory guard without allocating.
pub fn check_grid(d: usize, epsilon: f64) -> Result<u64> {
    checked_cell_count(d, cells_per_axis(d, epsilon))
}

/// Occupancy of the new vertex's cell agrees with occupancy of the target's
/// cell, both judged on the state *before* the step is registered.
pub fn lemma1_check(state: &CoverState, outcome: &StepOutcome, new_position: &Point) -> bool {
    let x_free = !state.is_occupied(state.cell_of(new_position));
    let y_free = !state.is_occupied(state.cell_of(&outcome.target));
    x_free == y_free
}

/// Samples `probes` uniform points and returns the first one farther than
/// `epsilon` from every vertex. Finding one proves the ε-cover is incomplete.
pub fn uncovered_witness(
    vertices: &[Point],
    epsilon: f64,
    probes: usize,
    rng: &mut RngStream,
) -> Option<Point> {
    let d = vertices.first()?.dim();
    let mut idx = NnIndex::new(d).ok()?;
    for v in vertices {
        idx.insert(v).ok()?;
    }
    uncovered_witness_indexed(&idx, epsilon, probes, rng)
}

/// [`uncovered_witness`] against an existing index.
pub fn uncovered_witness_indexed(
    idx: &NnIndex,
    epsilon: f64,
    probes: usize,
    rng: &mut RngStream,
) -> Option<Point> {
    let eps2 = epsilon * epsilon;
    (0..probes).find_map(|_| {
        let q = uniform_sample(rng, idx.dim());
        let (_, d2) = idx.nearest_sq(q.coords()).ok()?;
        (d2 > eps2).then_some(q)
    })
}

/// Volume of the Euclidean ball of radius `r` in dimension `d`.
pub fn ball_volume(d: usize, r: f64) -> f64 {
    let half = d as f64 / 2.0;
    std::f64::consts::PI.powf(half) * r.powi(d as i32) / gamma(half + 1.0)
}

/// `β = Γ(d/2 + 1) / (ε^d π^{d/2})`, the inverse volume of an ε-ball.
pub fn beta_const(d: usize, epsilon: f64) -> f64 {
    let half = d as f64 / 2.0;
    gamma(half + 1.0) / (epsilon.powi(d as i32) * std::f64::consts::PI.powf(half))
}

/// `α = d^{d/2} / ε^d`, the inverse volume of a cell of side `ε/√d`.
pub fn alpha_const(d: usize, epsilon: f64) -> f64 {
    (d as f64).powf(d as f64 / 2.0) / epsilon.powi(d as i32)
}

/// `H_n = Σ_{k=1}^{n} 1/k`, summed from the smallest term up.
pub fn harmonic(n: u64) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

/// Lower reference curve `(β / 2^d) · H_⌊β⌋`.
pub fn lower_reference(d: usize, epsilon: f64) -> f64 {
    let beta = beta_const(d, epsilon);
    beta / 2f64.powi(d as i32) * harmonic(beta.floor() as u64)
}

/// Upper reference curve `α · H_⌈α⌉`.
pub fn upper_reference(d: usize, epsilon: f64) -> f64 {
    let alpha = alpha_const(d, epsilon);
    alpha * harmonic(alpha.ceil() as u64)
}

/// Expected draws to see all `n` coupon types: `n · H_n`.
pub fn coupon_expected(n: u64) -> f64 {
    n as f64 * harmonic(n)
}

/// Draws uniform coupon types until all `n` have appeared.
pub fn coupon_simulate(n: u64, rng: &mut RngStream) -> u64 {
    assert!(n >= 1, "need at least one coupon type");
    let mut seen = vec![false; n as usize];
    let mut missing = n;
    let mut draws = 0;
    while missing > 0 {
        draws += 1;
        let k = rng.below(n) as usize;
        if !seen[k] {
            seen[k] = true;
            missing -= 1;
        }
    }
    draws
}

/// Whether every probe lies within `epsilon` of some vertex, by brute force.
/// Slow; meant for certificate soundness checks.
pub fn probes_all_covered(vertices: &[Point], epsilon: f64, probes: &[Point]) -> bool {
    let eps2 = epsilon * epsilon;
    probes.iter().all(|q| {
        vertices
            .iter()
            .any(|v| squared_distance(v.coords(), q.coords()) <= eps2)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::Tree;

    fn pt(c: &[f64]) -> Point {
        Point::new(c).unwrap()
    }

    fn grid10() -> CoverState {
        // √2 / 0.15 = 9.43 → 10 cells per axis.
        let s = CoverState::new(2, 0.15).unwrap();
        assert_eq!(s.cells_per_axis(), 10);
        s
    }

    #[test]
    fn cell_of_examples() {
        let s = grid10();
        assert_eq!(s.cell_of(&pt(&[0.05, 0.05])), 0);
        assert_eq!(s.cell_of(&pt(&[1.0, 1.0])), 99);
        assert_eq!(s.cell_of(&pt(&[0.35, 0.71])), 73);
    }

    #[test]
    fn register_examples() {
        let mut one = CoverState::new(1, 2.0).unwrap();
        assert_eq!(one.cell_count(), 1);
        assert!(one.register_vertex(&pt(&[0.3]), 0));
        assert_eq!(one.cover_step(), Some(0));

        let mut s = grid10();
        assert!(!s.register_vertex(&pt(&[0.05, 0.05]), 1));
        assert!(!s.register_vertex(&pt(&[0.06, 0.01]), 2));
        assert_eq!(s.occupied_count(), 1);

        let mut s = CoverState::new(1, 0.5).unwrap();
        assert_eq!(s.cell_count(), 2);
        assert!(!s.register_vertex(&pt(&[0.1]), 3));
        assert!(s.register_vertex(&pt(&[0.9]), 137));
        assert_eq!(s.cover_step(), Some(137));
        assert!(!s.register_vertex(&pt(&[0.8]), 140));
        assert_eq!(s.cover_step(), Some(137));
    }

    #[test]
    fn memory_guard() {
        assert!(matches!(
            CoverState::new(9, 0.1),
            Err(Error::GridTooLarge { d: 9, .. })
        ));
        assert!(check_grid(3, 0.05).is_ok());
    }

    #[test]
    fn lemma1_detector() {
        let mut s = grid10();
        s.register_vertex(&pt(&[0.05, 0.05]), 0);
        let outcome = |target: Point| StepOutcome {
            new_vertex: 1,
            parent: 0,
            target,
            reached_target: false,
        };
        // Both in the occupied cell.
        assert!(lemma1_check(&s, &outcome(pt(&[0.02, 0.08])), &pt(&[0.01, 0.01])));
        // X forced into an empty cell while Y sits in the occupied one.
        assert!(!lemma1_check(&s, &outcome(pt(&[0.02, 0.08])), &pt(&[0.55, 0.55])));
    }

    #[test]
    fn witness_examples() {
        let mut rng = RngStream::new(8, 0);
        assert_eq!(uncovered_witness(&[pt(&[0.5, 0.5])], 1.0, 1000, &mut rng), None);
        let w = uncovered_witness(&[pt(&[0.0, 0.0])], 0.1, 100, &mut rng).unwrap();
        assert!(w.coords()[0].hypot(w.coords()[1]) > 0.1);
    }

    #[test]
    fn constants() {
        assert!((beta_const(2, 0.1) - 31.830_988_618_379_067).abs() < 1e-9);
        assert!((alpha_const(2, 0.1) - 200.0).abs() < 1e-9);
        assert!((beta_const(1, 0.5) - 1.0).abs() < 1e-12);
        for d in 1..=16 {
            for eps in [0.05, 0.1, 0.3, 1.0] {
                let prod = beta_const(d, eps) * ball_volume(d, eps);
                assert!((prod - 1.0).abs() < 1e-10, "d={d} eps={eps} {prod}");
            }
        }
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic(0), 0.0);
        assert_eq!(harmonic(1), 1.0);
        assert!((harmonic(4) - 25.0 / 12.0).abs() < 1e-15);
        // ln n + γ + 1/(2n) - 1/(12n²)
        let n = 1_000_000f64;
        let em = n.ln() + 0.577_215_664_901_532_9 + 1.0 / (2.0 * n) - 1.0 / (12.0 * n * n);
        assert!((harmonic(1_000_000) - em).abs() < 1e-9);
    }

    #[test]
    fn coupon_small_cases() {
        assert_eq!(coupon_expected(1), 1.0);
        assert_eq!(coupon_expected(2), 3.0);
        let mut rng = RngStream::new(1, 0);
        for _ in 0..10 {
            assert_eq!(coupon_simulate(1, &mut rng), 1);
        }
    }

    #[test]
    fn certified_cover_has_no_witness() {
        let mut rng = RngStream::new(21, 0);
        let mut tree = Tree::rrt(Point::centre(2).unwrap(), 0.2).unwrap();
        let mut idx = tree.build_index().unwrap();
        let mut state = CoverState::new(2, 0.2).unwrap();
        state.register_vertex(tree.root(), 0);
        while !state.is_covered() {
            let out = tree.rrt_step(&mut idx, &mut rng).unwrap();
            let p = tree.nodes()[out.new_vertex].position.clone();
            state.register_vertex(&p, out.new_vertex as u64);
        }
        let mut probe_rng = RngStream::new(21, 1);
        assert_eq!(uncovered_witness_indexed(&idx, 0.2, 10_000, &mut probe_rng), None);
    }
}
