//! Per-step observables of a growing tree: edge length `δₙ`, the scaled edge
//! length `δₙ·√(πn)`, total length `Δₙ`, root-path length `Lₙ`, depth `Dₙ`
//! and height `Hₙ`; plus the tail bounds and the depth-model oracle.

use std::f64::consts::{E, PI};
use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::nn_index::NnIndex;
use crate::space::{uniform_sample, RngStream};
use crate::tree::Tree;

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSample {
    pub n: u64,
    pub delta: f64,
    /// `delta · √(π n)`.
    pub delta_scaled: f64,
    pub cum_length: f64,
    /// Only evaluated on checkpoint steps (see [`is_checkpoint`]).
    pub root_path: Option<f64>,
    pub depth: u32,
    pub height_so_far: u32,
}

/// Running series for one tree. Feed it every new vertex in order.
#[derive(Clone, Debug, Default)]
pub struct Series {
    cum_length: f64,
    keep_all: bool,
    samples: Vec<SeriesSample>,
}

impl Series {
    /// Keeps every sample.
    pub fn full() -> Self {
        Self {
            keep_all: true,
            ..Self::default()
        }
    }

    /// Keeps only checkpoint samples.
    pub fn checkpoints_only() -> Self {
        Self::default()
    }

    pub fn samples(&self) -> &[SeriesSample] {
        &self.samples
    }

    pub fn cum_length(&self) -> f64 {
        self.cum_length
    }

    /// Records the node just appended at index `new_vertex`.
    pub fn record_step(&mut self, tree: &Tree, new_vertex: usize) -> Result<SeriesSample> {
        let node = tree.node(new_vertex)?;
        let n = new_vertex as u64;
        self.cum_length += node.edge_length;
        let checkpoint = is_checkpoint(n);
        let sample = SeriesSample {
            n,
            delta: node.edge_length,
            delta_scaled: node.edge_length * (PI * n as f64).sqrt(),
            cum_length: self.cum_length,
            root_path: if checkpoint {
                Some(tree.root_path_length(new_vertex)?)
            } else {
                None
            },
            depth: node.depth,
            height_so_far: tree.height(),
        };
        if self.keep_all || checkpoint {
            self.samples.push(sample.clone());
        }
        Ok(sample)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,delta,delta_scaled,cum_length,root_path,depth,height\n");
        for s in &self.samples {
            let root = s.root_path.map(|r| r.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                s.n, s.delta, s.delta_scaled, s.cum_length, root, s.depth, s.height_so_far
            )
            .unwrap();
        }
        out
    }
}

const DECADE_MULTIPLES: [u64; 8] = [10, 16, 20, 25, 40, 50, 64, 80];

/// Steps at which expensive observables are evaluated: powers of two plus
/// `{1, 1.6, 2, 2.5, 4, 5, 6.4, 8} · 10^k`.
pub fn is_checkpoint(n: u64) -> bool {
    if n == 0 {
        return false;
    }
    if n.is_power_of_two() {
        return true;
    }
    let mut m = n;
    while m.is_multiple_of(10) && m > 80 {
        m /= 10;
    }
    DECADE_MULTIPLES.contains(&m) || (m < 10 && [1, 2, 4, 5, 8].contains(&m))
}

/// `P[δₙ > x] <= (1 - πx²)^{n-1}` for the NNT on `[0,1]²`.
pub fn tail_bound_delta(n: u64, x: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(0.0..=1.0 / PI.sqrt()).contains(&x) {
        return Err(invalid("x", format!("{x} outside [0, 1/sqrt(pi)]")));
    }
    Ok((1.0 - PI * x * x).powf((n - 1) as f64))
}

/// One draw of `inf{k : ⌊…⌊⌊n U₁⌋ U₂⌋ … U_k⌋ = 0}`, the depth law of the
/// `n`-th node of a nearest neighbour tree.
pub fn depth_model_sample(n: u64, rng: &mut RngStream) -> u32 {
    let mut v = n;
    let mut k = 0;
    while v > 0 {
        v = (v as f64 * rng.unit()) as u64;
        k += 1;
    }
    k
}

/// `min(1, (1/n)(e ln n / x)^x)`, valid for `x > ln n`.
pub fn depth_tail_bound(n: u64, x: f64) -> Result<f64> {
    if n < 2 {
        return Err(invalid("n", "must be at least 2"));
    }
    let ln_n = (n as f64).ln();
    if !(x > ln_n) {
        return Err(invalid("x", format!("{x} must exceed ln n = {ln_n}")));
    }
    let log_bound = -ln_n + x * ((E * ln_n).ln() - x.ln());
    Ok(log_bound.exp().min(1.0))
}

/// Monte Carlo estimate of `E[δ_{n+1} | tree so far]`: the mean, over uniform
/// probes, of the distance from the probe to the next vertex's parent. For an
/// RRT (`epsilon = Some`) the edge is capped at `ε`.
pub fn conditional_next_delta(
    idx: &NnIndex,
    epsilon: Option<f64>,
    probes: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    if probes == 0 {
        return Err(invalid("probes", "must be at least 1"));
    }
    let mut total = 0.0;
    for _ in 0..probes {
        let q = uniform_sample(rng, idx.dim());
        let (_, d2) = idx.nearest_sq(q.coords())?;
        let dist = d2.sqrt();
        total += epsilon.map_or(dist, |e| dist.min(e));
    }
    Ok(total / probes as f64)
}
