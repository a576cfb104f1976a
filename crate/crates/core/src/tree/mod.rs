//! Growth processes on the unit cube.
//!
//! Three kinds of tree share one node layout:
//!
//! * **RRT**: each step draws a uniform target, finds the nearest vertex and
//!   either adopts the target (when it is within `ε`) or steps `ε` toward it.
//! * **NNT**: each uniform draw is attached directly to its nearest vertex.
//! * **Connection**: an NNT grown on top of a fixed base tree; new draws
//!   attach to the nearest vertex among base and grown nodes alike.
//!
//! Node `i` always has a parent index `< i`, so the node vector is a valid
//! topological order and depths can be maintained incrementally.

pub mod io;

use crate::error::{Error, Result};
use crate::nn_index::NnIndex;
use crate::space::{distance, steer, Point, RngStream, TargetSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TreeKind {
    Rrt,
    Nnt,
    Connection,
}

impl TreeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TreeKind::Rrt => "rrt",
            TreeKind::Nnt => "nnt",
            TreeKind::Connection => "connection",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rrt" => Some(TreeKind::Rrt),
            "nnt" => Some(TreeKind::Nnt),
            "connection" => Some(TreeKind::Connection),
            _ => None,
        }
    }
}

/// Whether a node of a connection tree was copied from the base tree or
/// grown afterwards. RRT and NNT nodes are always `Grown` (the root too).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Base,
    Grown,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TreeNode {
    pub position: Point,
    pub parent: Option<usize>,
    /// Euclidean length of the edge to the parent; 0 for the root.
    pub edge_length: f64,
    pub depth: u32,
    pub step: u64,
    pub origin: Origin,
}

/// Result of a single growth step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome {
    pub new_vertex: usize,
    pub parent: usize,
    /// The uniform draw that drove the step.
    pub target: Point,
    /// The new vertex is the target itself (always true for NNT steps).
    pub reached_target: bool,
}

#[derive(Clone, Debug)]
pub struct Tree {
    kind: TreeKind,
    d: usize,
    epsilon: Option<f64>,
    nodes: Vec<TreeNode>,
    targets: Option<Vec<Point>>,
    base_size: Option<usize>,
    height: u32,
}

impl Tree {
    /// An RRT rooted at `root` with step size `epsilon`.
    pub fn rrt(root: Point, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(crate::error::invalid("epsilon", format!("must be positive, got {epsilon}")));
        }
        Ok(Self::with_root(TreeKind::Rrt, root, Some(epsilon)))
    }

    pub fn nnt(root: Point) -> Self {
        Self::with_root(TreeKind::Nnt, root, None)
    }

    fn with_root(kind: TreeKind, root: Point, epsilon: Option<f64>) -> Self {
        Self {
            kind,
            d: root.dim(),
            epsilon,
            nodes: vec![TreeNode {
                position: root,
                parent: None,
                edge_length: 0.0,
                depth: 0,
                step: 0,
                origin: Origin::Grown,
            }],
            targets: None,
            base_size: None,
            height: 0,
        }
    }

    /// Turns on recording of every drawn target. Targets of steps taken
    /// before this call are not recoverable.
    pub fn with_trace(mut self) -> Self {
        self.targets.get_or_insert_with(Vec::new);
        self
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> Result<&TreeNode> {
        self.nodes.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.nodes.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &Point {
        &self.nodes[0].position
    }

    pub fn positions(&self) -> impl Iterator<Item = &Point> + '_ {
        self.nodes.iter().map(|n| &n.position)
    }

    /// Recorded targets, one per step, when trace mode is on.
    pub fn targets(&self) -> Option<&[Point]> {
        self.targets.as_deref()
    }

    /// For connection trees: `S`, the index of the last base vertex (the
    /// base tree has `S + 1` vertices).
    pub fn base_size(&self) -> Option<usize> {
        self.base_size
    }

    /// Maximum depth over all nodes, tracked incrementally.
    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn depth(&self, i: usize) -> Result<u32> {
        Ok(self.node(i)?.depth)
    }

    /// Depth recomputed by walking the parent chain.
    pub fn depth_by_chain(&self, i: usize) -> Result<u32> {
        let mut cur = self.node(i)?;
        let mut depth = 0;
        while let Some(p) = cur.parent {
            cur = &self.nodes[p];
            depth += 1;
        }
        Ok(depth)
    }

    pub fn height_by_chain(&self) -> u32 {
        (0..self.len())
            .map(|i| self.depth_by_chain(i).unwrap_or(0))
            .max()
            .unwrap_or(0)
    }

    /// Sum of edge lengths from node `i` up to the root.
    pub fn root_path_length(&self, i: usize) -> Result<f64> {
        let mut cur = self.node(i)?;
        let mut total = 0.0;
        while let Some(p) = cur.parent {
            total += cur.edge_length;
            cur = &self.nodes[p];
        }
        Ok(total)
    }

    /// Appends a node; the caller has already validated `parent`.
    fn push(&mut self, position: Point, parent: usize, origin: Origin) -> usize {
        let parent_node = &self.nodes[parent];
        let edge_length = crate::space::squared_distance(
            position.coords(),
            parent_node.position.coords(),
        )
        .sqrt();
        let depth = parent_node.depth + 1;
        let index = self.nodes.len();
        self.nodes.push(TreeNode {
            position,
            parent: Some(parent),
            edge_length,
            depth,
            step: index as u64,
            origin,
        });
        self.height = self.height.max(depth);
        index
    }

    fn check_sync(&self, idx: &NnIndex) -> Result<()> {
        if idx.len() != self.nodes.len() {
            return Err(Error::IndexOutOfSync {
                index_len: idx.len(),
                tree_len: self.nodes.len(),
            });
        }
        Ok(())
    }

    /// One RRT step: draw a target, find its nearest vertex, then either adopt
    /// the target (nearest distance `<= ε`) or step `ε` toward it.
    pub fn rrt_step<S: TargetSource + ?Sized>(
        &mut self,
        idx: &mut NnIndex,
        source: &mut S,
    ) -> Result<StepOutcome> {
        if self.kind != TreeKind::Rrt {
            return Err(Error::WrongTreeKind {
                expected: "rrt",
                got: self.kind.as_str(),
            });
        }
        self.check_sync(idx)?;
        let epsilon = self.epsilon.expect("rrt trees carry a step size");
        let target = source.next_target(self.d)?;
        let (parent, dist) = idx.nearest(&target)?;
        let (position, reached_target) = if dist <= epsilon {
            (target.clone(), true)
        } else {
            (steer(&self.nodes[parent].position, &target, epsilon, dist)?, false)
        };
        idx.insert(&position)?;
        let new_vertex = self.push(position, parent, Origin::Grown);
        if let Some(t) = self.targets.as_mut() {
            t.push(target.clone());
        }
        Ok(StepOutcome {
            new_vertex,
            parent,
            target,
            reached_target,
        })
    }

    /// One NNT (or connection-process) step: the draw itself becomes the new
    /// vertex, attached to its nearest existing vertex.
    pub fn nnt_step<S: TargetSource + ?Sized>(
        &mut self,
        idx: &mut NnIndex,
        source: &mut S,
    ) -> Result<StepOutcome> {
        if self.kind == TreeKind::Rrt {
            return Err(Error::WrongTreeKind {
                expected: "nnt",
                got: self.kind.as_str(),
            });
        }
        self.check_sync(idx)?;
        let target = source.next_target(self.d)?;
        let (parent, _) = idx.nearest(&target)?;
        idx.insert(&target)?;
        let new_vertex = self.push(target.clone(), parent, Origin::Grown);
        if let Some(t) = self.targets.as_mut() {
            t.push(target.clone());
        }
        Ok(StepOutcome {
            new_vertex,
            parent,
            target,
            reached_target: true,
        })
    }

    /// Steps with the rule matching the tree kind.
    pub fn step<S: TargetSource + ?Sized>(
        &mut self,
        idx: &mut NnIndex,
        source: &mut S,
    ) -> Result<StepOutcome> {
        match self.kind {
            TreeKind::Rrt => self.rrt_step(idx, source),
            TreeKind::Nnt | TreeKind::Connection => self.nnt_step(idx, source),
        }
    }

    /// Builds a nearest-neighbour index over the current node positions.
    pub fn build_index(&self) -> Result<NnIndex> {
        let mut idx = NnIndex::new(self.d)?;
        for p in self.positions() {
            idx.insert(p)?;
        }
        Ok(idx)
    }

    /// Assembles a tree from already-validated parts (used by the loader).
    pub(crate) fn from_parts(
        kind: TreeKind,
        d: usize,
        epsilon: Option<f64>,
        nodes: Vec<TreeNode>,
        base_size: Option<usize>,
    ) -> Self {
        let height = nodes.iter().map(|n| n.depth).max().unwrap_or(0);
        Self {
            kind,
            d,
            epsilon,
            nodes,
            targets: None,
            base_size,
            height,
        }
    }
}

/// Steps until `stop` fires or `max_steps` steps have been taken.
///
/// Returns `(steps_taken, stopped)`.
pub fn grow_until<S, F>(
    tree: &mut Tree,
    idx: &mut NnIndex,
    source: &mut S,
    mut stop: F,
    max_steps: u64,
) -> Result<(u64, bool)>
where
    S: TargetSource + ?Sized,
    F: FnMut(&Tree, &StepOutcome) -> bool,
{
    if max_steps == 0 {
        return Err(crate::error::invalid("max_steps", "must be at least 1"));
    }
    for taken in 1..=max_steps {
        let outcome = tree.step(idx, source)?;
        if stop(tree, &outcome) {
            return Ok((taken, true));
        }
    }
    Ok((max_steps, false))
}

/// Starts a connection process on top of `base`: the base nodes are copied
/// verbatim (positions, parents, depths) and flagged [`Origin::Base`].
pub fn connection_onto(base: &Tree) -> Result<(Tree, NnIndex)> {
    if base.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let nodes = base
        .nodes
        .iter()
        .map(|n| TreeNode {
            origin: Origin::Base,
            ..n.clone()
        })
        .collect();
    let tree = Tree::from_parts(
        TreeKind::Connection,
        base.d,
        None,
        nodes,
        Some(base.len() - 1),
    );
    let idx = tree.build_index()?;
    Ok((tree, idx))
}

/// Grows `n_extra` nearest-neighbour nodes onto a copy of `base`.
pub fn grow_connection<S: TargetSource + ?Sized>(
    base: &Tree,
    n_extra: u64,
    source: &mut S,
) -> Result<Tree> {
    let (mut tree, mut idx) = connection_onto(base)?;
    for _ in 0..n_extra {
        tree.nnt_step(&mut idx, source)?;
    }
    Ok(tree)
}

/// A connection process and a bare NNT driven by identical draws.
///
/// The NNT is rooted at the base root, so at every step its candidate parents
/// are a subset of the connection process's candidates.
#[derive(Clone, Debug)]
pub struct CoupledRun {
    pub connection: Tree,
    pub nnt: Tree,
}

pub fn coupled_connection(base: &Tree, n_extra: u64, rng: &RngStream) -> Result<CoupledRun> {
    let connection = grow_connection(base, n_extra, &mut rng.clone())?;
    let mut nnt = Tree::nnt(base.root().clone());
    let mut idx = nnt.build_index()?;
    let mut stream = rng.clone();
    for _ in 0..n_extra {
        nnt.nnt_step(&mut idx, &mut stream)?;
    }
    Ok(CoupledRun { connection, nnt })
}

/// First step at which a coupled run breaks one of the pathwise inequalities
/// `δ'ₙ <= δₙ` and `D'_{S+n} <= Dₙ + H(base) + 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum CouplingViolation {
    EdgeLength { n: usize, connection: f64, nnt: f64 },
    Depth { n: usize, connection: u32, bound: u32 },
}

impl CoupledRun {
    pub fn check(&self, base_height: u32) -> std::result::Result<(), CouplingViolation> {
        let s = self.connection.base_size().unwrap_or(0);
        for n in 1..self.nnt.len() {
            let grown = &self.connection.nodes[s + n];
            let bare = &self.nnt.nodes[n];
            debug_assert_eq!(grown.position, bare.position);
            if grown.edge_length > bare.edge_length {
                return Err(CouplingViolation::EdgeLength {
                    n,
                    connection: grown.edge_length,
                    nnt: bare.edge_length,
                });
            }
            let bound = bare.depth + base_height + 1;
            if grown.depth > bound {
                return Err(CouplingViolation::Depth {
                    n,
                    connection: grown.depth,
                    bound,
                });
            }
        }
        Ok(())
    }
}

/// Checks that a connection tree's first `S + 1` nodes replicate `base`.
pub fn replicates_base(connection: &Tree, base: &Tree) -> bool {
    connection.base_size() == Some(base.len() - 1)
        && connection.len() >= base.len()
        && connection.nodes[..base.len()]
            .iter()
            .zip(&base.nodes)
            .all(|(c, b)| {
                c.origin == Origin::Base
                    && c.position == b.position
                    && c.parent == b.parent
                    && c.depth == b.depth
            })
}

/// Checks the structural invariants every tree must satisfy: parents precede
/// children, depths chain, edge lengths match positions, and the height
/// matches the maximum depth.
pub fn validate(tree: &Tree) -> Result<()> {
    let bad = |line: usize, reason: String| Error::Parse { line, reason };
    for (i, node) in tree.nodes.iter().enumerate() {
        match node.parent {
            None if i == 0 => {
                if node.depth != 0 || node.edge_length != 0.0 {
                    return Err(bad(i, "root must have depth 0 and edge length 0".into()));
                }
            }
            None => return Err(bad(i, "only node 0 may lack a parent".into())),
            Some(p) if p >= i => return Err(bad(i, format!("parent {p} does not precede node"))),
            Some(p) => {
                let parent = &tree.nodes[p];
                if node.depth != parent.depth + 1 {
                    return Err(bad(i, "depth is not parent depth + 1".into()));
                }
                let expect = distance(&node.position, &parent.position)?;
                if expect.to_bits() != node.edge_length.to_bits() {
                    return Err(bad(i, format!("edge length {} != {}", node.edge_length, expect)));
                }
            }
        }
    }
    if tree.height != tree.height_by_chain() {
        return Err(bad(0, "height does not match maximum depth".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ScriptedTargets;

    fn pt(c: &[f64]) -> Point {
        Point::new(c).unwrap()
    }

    fn scripted(points: &[&[f64]]) -> ScriptedTargets {
        ScriptedTargets::new(points.iter().map(|c| pt(c)))
    }

    #[test]
    fn rrt_within_step_adopts_target() {
        let mut t = Tree::rrt(pt(&[0.0, 0.0]), 0.1).unwrap();
        let mut idx = t.build_index().unwrap();
        let out = t.rrt_step(&mut idx, &mut scripted(&[&[0.05, 0.0]])).unwrap();
        assert!(out.reached_target);
        assert_eq!(t.nodes()[1].position, pt(&[0.05, 0.0]));
    }

    #[test]
    fn rrt_far_target_steers() {
        let mut t = Tree::rrt(pt(&[0.0, 0.0]), 0.1).unwrap();
        let mut idx = t.build_index().unwrap();
        let out = t.rrt_step(&mut idx, &mut scripted(&[&[1.0, 0.0]])).unwrap();
        assert!(!out.reached_target);
        assert_eq!(out.parent, 0);
        let n = &t.nodes()[1];
        assert!((n.position.coords()[0] - 0.1).abs() < 1e-15);
        assert_eq!(n.position.coords()[1], 0.0);
    }

    #[test]
    fn duplicate_target_takes_adopt_branch() {
        // Distance 0 <= ε, so steering never sees a zero direction here.
        let mut t = Tree::rrt(pt(&[0.5, 0.5]), 0.1).unwrap();
        let mut idx = t.build_index().unwrap();
        assert!(t.rrt_step(&mut idx, &mut scripted(&[&[0.5, 0.5]])).unwrap().reached_target);
        assert_eq!(t.len(), 2);
    }

    #[test]
    fn nnt_examples() {
        let mut t = Tree::nnt(pt(&[0.0, 0.0]));
        let mut idx = t.build_index().unwrap();
        let mut src = scripted(&[&[1.0, 1.0]]);
        t.nnt_step(&mut idx, &mut src).unwrap();
        assert_eq!(t.nodes()[1].edge_length, std::f64::consts::SQRT_2);

        let mut t = Tree::nnt(pt(&[0.0, 0.0]));
        let mut idx = t.build_index().unwrap();
        let mut src = scripted(&[&[1.0, 0.0], &[0.6, 0.0]]);
        t.nnt_step(&mut idx, &mut src).unwrap();
        let out = t.nnt_step(&mut idx, &mut src).unwrap();
        assert_eq!(out.parent, 1);
        assert!((t.nodes()[2].edge_length - 0.4).abs() < 1e-15);
    }

    #[test]
    fn kind_mismatch_and_sync_errors() {
        let mut t = Tree::nnt(pt(&[0.0, 0.0]));
        let mut idx = t.build_index().unwrap();
        assert!(matches!(
            t.rrt_step(&mut idx, &mut scripted(&[&[0.1, 0.1]])),
            Err(Error::WrongTreeKind { .. })
        ));
        let mut stale = NnIndex::new(2).unwrap();
        assert!(matches!(
            t.nnt_step(&mut stale, &mut scripted(&[&[0.1, 0.1]])),
            Err(Error::IndexOutOfSync { .. })
        ));
        assert!(Tree::rrt(pt(&[0.0]), 0.0).is_err());
    }

    #[test]
    fn grow_until_examples() {
        let mut rng = RngStream::new(1, 0);
        let mut t = Tree::rrt(pt(&[0.0, 0.0]), 0.1).unwrap();
        let mut idx = t.build_index().unwrap();
        let (steps, stopped) =
            grow_until(&mut t, &mut idx, &mut rng, |t, _| t.len() >= 10, 1000).unwrap();
        assert_eq!((steps, stopped, t.len()), (9, true, 10));

        let mut t = Tree::rrt(pt(&[0.0, 0.0]), 0.1).unwrap();
        let mut idx = t.build_index().unwrap();
        let (_, stopped) = grow_until(
            &mut t,
            &mut idx,
            &mut rng,
            |t, o| t.nodes()[o.new_vertex].position.coords()[0] >= 0.5,
            1_000_000,
        )
        .unwrap();
        assert!(stopped);
        assert!(t.nodes().last().unwrap().position.coords()[0] >= 0.5);

        let mut t = Tree::nnt(pt(&[0.0, 0.0]));
        let mut idx = t.build_index().unwrap();
        let r = grow_until(&mut t, &mut idx, &mut rng, |_, _| false, 100).unwrap();
        assert_eq!((r, t.len()), ((100, false), 101));
        assert!(grow_until(&mut t, &mut idx, &mut rng, |_, _| false, 0).is_err());
    }

    #[test]
    fn depth_and_path_length() {
        let mut t = Tree::nnt(pt(&[0.0, 0.0]));
        let mut idx = t.build_index().unwrap();
        let mut src = scripted(&[&[0.1, 0.0], &[0.3, 0.0]]);
        t.nnt_step(&mut idx, &mut src).unwrap();
        t.nnt_step(&mut idx, &mut src).unwrap();
        assert_eq!(t.depth(0).unwrap(), 0);
        assert_eq!(t.root_path_length(0).unwrap(), 0.0);
        assert_eq!(t.depth(2).unwrap(), 2);
        assert!((t.root_path_length(2).unwrap() - 0.3).abs() < 1e-15);
        assert!(matches!(t.depth(3), Err(Error::IndexOutOfRange { .. })));

        let mut star = Tree::nnt(pt(&[0.5, 0.5]));
        let mut idx = star.build_index().unwrap();
        let mut src = scripted(&[&[0.9, 0.5], &[0.1, 0.5], &[0.5, 0.9], &[0.5, 0.1]]);
        for _ in 0..4 {
            star.nnt_step(&mut idx, &mut src).unwrap();
        }
        assert_eq!(star.height(), 1);
        assert_eq!(star.height_by_chain(), 1);
    }

    #[test]
    fn connection_on_bare_root_matches_nnt() {
        let base = Tree::nnt(pt(&[0.2, 0.7]));
        let rng = RngStream::new(17, 3);
        let run = coupled_connection(&base, 500, &rng).unwrap();
        assert!(replicates_base(&run.connection, &base));
        for (a, b) in run.connection.nodes().iter().zip(run.nnt.nodes()).skip(1) {
            assert_eq!(a.position, b.position);
            assert_eq!(a.parent, b.parent);
            assert_eq!(a.depth, b.depth);
        }
        assert_eq!(run.check(0), Ok(()));
    }

    #[test]
    fn connection_coupling_holds_on_rrt_base() {
        let mut rng = RngStream::new(4, 0);
        let mut base = Tree::rrt(pt(&[0.0, 0.0]), 0.1).unwrap();
        let mut idx = base.build_index().unwrap();
        for _ in 0..300 {
            base.rrt_step(&mut idx, &mut rng).unwrap();
        }
        let run = coupled_connection(&base, 2000, &RngStream::new(4, 1)).unwrap();
        assert!(replicates_base(&run.connection, &base));
        assert_eq!(run.check(base.height()), Ok(()));
        validate(&run.connection).unwrap();
        validate(&run.nnt).unwrap();
    }

    #[test]
    fn trace_records_targets() {
        let mut rng = RngStream::new(2, 0);
        let mut t = Tree::rrt(pt(&[0.0, 0.0]), 0.05).unwrap().with_trace();
        let mut idx = t.build_index().unwrap();
        for _ in 0..50 {
            let out = t.rrt_step(&mut idx, &mut rng).unwrap();
            assert_eq!(
                out.reached_target,
                t.nodes()[out.new_vertex].position == out.target
            );
        }
        assert_eq!(t.targets().unwrap().len(), 50);
    }
}
