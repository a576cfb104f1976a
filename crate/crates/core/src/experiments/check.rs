//! Pathwise conformance checks: the RRT step rule, the agreement between the
//! new vertex's cell and the target's cell, and the coupling between a
//! connection process and a bare NNT.

use crate::cover::{self, CoverState};
use crate::error::Result;
use crate::space::{distance, Point, RngStream};
use crate::tree::{self, CouplingViolation, Tree};

/// Slack allowed on edge lengths and step sizes.
pub const LENGTH_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckReport {
    pub steps: u64,
    /// Edges longer than `ε`, or steered edges not of length `ε`.
    pub step_size_violations: u64,
    /// Targets within `ε` of their nearest vertex that were not adopted, or
    /// adopted targets farther than `ε`.
    pub adoption_violations: u64,
    /// Steps where the new vertex's cell and the target's cell disagree on
    /// prior occupancy.
    pub cell_violations: u64,
    pub max_edge: f64,
    pub cover_step: Option<u64>,
    /// Grown connection nodes checked against the bare NNT (0 if the RRT never
    /// covered, since the connection process starts from the covered tree).
    pub coupled_steps: u64,
    pub coupling: Option<CouplingViolation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.step_size_violations == 0
            && self.adoption_violations == 0
            && self.cell_violations == 0
            && self.coupling.is_none()
    }
}

/// Runs `steps` traced RRT steps from the cube centre and checks every one.
/// If the tree covers, a connection process of `coupled_steps` nodes is grown
/// on the covered tree and checked against its coupled NNT.
pub fn run_check(
    d: usize,
    epsilon: f64,
    steps: u64,
    coupled_steps: u64,
    rng: &mut RngStream,
) -> Result<CheckReport> {
    let mut tree = Tree::rrt(Point::centre(d)?, epsilon)?.with_trace();
    let mut idx = tree.build_index()?;
    let mut state = CoverState::new(d, epsilon)?;
    state.register_vertex(tree.root(), 0);
    let mut report = CheckReport {
        steps,
        ..Default::default()
    };
    let mut base = None;
    for step in 1..=steps {
        let out = tree.rrt_step(&mut idx, rng)?;
        let node = &tree.nodes()[out.new_vertex];
        let gap = distance(&tree.nodes()[out.parent].position, &out.target)?;
        report.max_edge = report.max_edge.max(node.edge_length);
        if node.edge_length > epsilon + LENGTH_TOLERANCE
            || (!out.reached_target && (node.edge_length - epsilon).abs() > LENGTH_TOLERANCE)
        {
            report.step_size_violations += 1;
        }
        let adopted = out.reached_target && node.position == out.target;
        if adopted != (gap <= epsilon) {
            report.adoption_violations += 1;
        }
        if !cover::lemma1_check(&state, &out, &node.position) {
            report.cell_violations += 1;
        }
        if state.register_vertex(&node.position, step) {
            report.cover_step = Some(step);
            base = Some(tree.clone());
        }
    }
    if let (Some(base), true) = (base, coupled_steps > 0) {
        let stream = RngStream::new(rng.seed(), !rng.stream_index());
        report.coupled_steps = coupled_steps;
        report.coupling = tree::coupled_connection(&base, coupled_steps, &stream)?
            .check(base.height())
            .err();
    }
    Ok(report)
}

/// Outcome of one coupled run on top of a covered RRT.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingReport {
    /// Grid-cover step of the base RRT, which is also its non-root node count.
    pub base_size: u64,
    pub base_height: u32,
    pub violation: Option<CouplingViolation>,
}

/// Grows an RRT from the cube centre until its grid certificate fires, then
/// grows `n_extra` connection nodes on it next to a bare NNT fed the same
/// draws. Returns `None` if the RRT does not cover within `max_steps`.
pub fn coupled_check(
    d: usize,
    epsilon: f64,
    n_extra: u64,
    max_steps: u64,
    rng: &mut RngStream,
) -> Result<Option<CouplingReport>> {
    let mut base = Tree::rrt(Point::centre(d)?, epsilon)?;
    let mut idx = base.build_index()?;
    let mut state = CoverState::new(d, epsilon)?;
    state.register_vertex(base.root(), 0);
    let (steps, covered) = tree::grow_until(
        &mut base,
        &mut idx,
        rng,
        |t, out| state.register_vertex(&t.nodes()[out.new_vertex].position, out.new_vertex as u64),
        max_steps,
    )?;
    if !covered {
        return Ok(None);
    }
    let run = tree::coupled_connection(&base, n_extra, rng)?;
    Ok(Some(CouplingReport {
        base_size: steps,
        base_height: base.height(),
        violation: run.check(base.height()).err(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_check_passes() {
        let mut rng = RngStream::new(9, 0);
        let report = run_check(2, 0.2, 3000, 500, &mut rng).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.cover_step.is_some());
        assert_eq!(report.coupled_steps, 500);
        assert!(report.max_edge <= 0.2 + LENGTH_TOLERANCE);
    }

    #[test]
    fn coupled_check_on_small_base() {
        let mut rng = RngStream::new(3, 3);
        let report = coupled_check(2, 0.3, 2000, 100_000, &mut rng).unwrap().unwrap();
        assert_eq!(report.violation, None);
        assert!(report.base_size > 0);
        let mut rng = RngStream::new(3, 3);
        assert_eq!(coupled_check(2, 0.01, 10, 5, &mut rng).unwrap(), None);
    }

    #[test]
    fn uncovered_run_skips_coupling() {
        let mut rng = RngStream::new(9, 0);
        let report = run_check(2, 0.01, 50, 500, &mut rng).unwrap();
        assert!(report.passed());
        assert_eq!(report.cover_step, None);
        assert_eq!(report.coupled_steps, 0);
    }
}
