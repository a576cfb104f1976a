//! Long-run statistics: edge lengths, total and root-path length, depth and
//! height of RRTs and NNTs grown far past the covering time, plus the
//! depth-model oracle comparisons for the NNT.

use std::f64::consts::PI;

use super::{config_label, run_replicas, stats, stream_index, ExperimentOutput, ExperimentPlan, RawRow, Summary};
use crate::cover::CoverState;
use crate::error::Result;
use crate::metrics::{conditional_next_delta, depth_model_sample, is_checkpoint, Series};
use crate::space::{uniform_sample, Point, RngStream};
use crate::tree::{Tree, TreeKind};

/// Seed offset for the probe stream, so probing never perturbs growth draws.
const PROBE_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

/// Observables of one tree at one checkpoint `n` (the index of the newest node).
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub n: u64,
    /// `δₙ √(πn)`.
    pub delta_scaled: f64,
    /// `√(πn)` times a probe estimate of `E[δₙ | first n nodes]`; NaN when
    /// probing is off.
    pub delta_scaled_cond: f64,
    /// `Δₙ / √n`.
    pub length_scaled: f64,
    pub root_path: f64,
    pub depth: u32,
    pub height: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialSeries {
    pub checkpoints: Vec<Checkpoint>,
    /// Grid-cover step for RRTs whose grid fits the memory guard.
    pub cover_step: Option<u64>,
}

impl TrialSeries {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }
}

/// The private probe stream paired with a growth stream.
pub fn probe_stream(rng: &RngStream) -> RngStream {
    RngStream::new(rng.seed() ^ PROBE_SEED_SALT, rng.stream_index())
}

/// Grows `tree` until node `n_final` exists, recording checkpoint observables.
/// `probes == 0` disables the conditional edge-length estimate.
pub fn grow_series(
    tree: &mut Tree,
    n_final: u64,
    probes: usize,
    rng: &mut RngStream,
) -> Result<TrialSeries> {
    let mut probe_rng = probe_stream(rng);
    let mut idx = tree.build_index()?;
    let mut cover = match (tree.kind(), tree.epsilon()) {
        (TreeKind::Rrt, Some(eps)) if crate::cover::check_grid(tree.dim(), eps).is_ok() => {
            let mut state = CoverState::new(tree.dim(), eps)?;
            for (i, p) in tree.positions().enumerate() {
                state.register_vertex(p, i as u64);
            }
            Some(state)
        }
        _ => None,
    };
    let mut series = Series::checkpoints_only();
    let mut checkpoints = Vec::new();
    let mut n = tree.len() as u64;
    while n <= n_final {
        let checkpoint = is_checkpoint(n);
        let cond = if checkpoint && probes > 0 {
            conditional_next_delta(&idx, tree.epsilon(), probes, &mut probe_rng)?
        } else {
            f64::NAN
        };
        let out = tree.step(&mut idx, rng)?;
        if let Some(state) = cover.as_mut() {
            state.register_vertex(&tree.nodes()[out.new_vertex].position, n);
        }
        let sample = series.record_step(tree, out.new_vertex)?;
        if checkpoint {
            let scale = (PI * n as f64).sqrt();
            checkpoints.push(Checkpoint {
                n,
                delta_scaled: sample.delta_scaled,
                delta_scaled_cond: cond * scale,
                length_scaled: sample.cum_length / (n as f64).sqrt(),
                root_path: sample.root_path.expect("checkpoints carry the root path"),
                depth: sample.depth,
                height: sample.height_so_far,
            });
        }
        n += 1;
    }
    Ok(TrialSeries {
        checkpoints,
        cover_step: cover.and_then(|s| s.cover_step()),
    })
}

/// An RRT rooted at the cube centre, grown to `n_final` nodes past the root.
pub fn rrt_series(
    d: usize,
    epsilon: f64,
    n_final: u64,
    probes: usize,
    rng: &mut RngStream,
) -> Result<TrialSeries> {
    let mut tree = Tree::rrt(Point::centre(d)?, epsilon)?;
    grow_series(&mut tree, n_final, probes, rng)
}

/// An NNT with a uniform root, grown to `n_final` nodes past the root.
pub fn nnt_series(d: usize, n_final: u64, probes: usize, rng: &mut RngStream) -> Result<TrialSeries> {
    let mut tree = Tree::nnt(uniform_sample(rng, d));
    grow_series(&mut tree, n_final, probes, rng)
}

/// Grows an NNT with a uniform root to `n` nodes past the root and returns
/// the new tree.
pub fn nnt_grown(d: usize, n: u64, rng: &mut RngStream) -> Result<Tree> {
    let mut tree = Tree::nnt(uniform_sample(rng, d));
    let mut idx = tree.build_index()?;
    for _ in 0..n {
        tree.nnt_step(&mut idx, rng)?;
    }
    Ok(tree)
}

/// Depth of node `n` in a fresh NNT.
pub fn nnt_depth_at(d: usize, n: u64, rng: &mut RngStream) -> Result<u32> {
    let tree = nnt_grown(d, n, rng)?;
    Ok(tree.nodes()[n as usize].depth)
}

/// Parent index of node `n` in a fresh NNT.
pub fn nnt_parent_at(d: usize, n: u64, rng: &mut RngStream) -> Result<usize> {
    let tree = nnt_grown(d, n, rng)?;
    Ok(tree.nodes()[n as usize].parent.expect("non-root node"))
}

type Extract = fn(&Checkpoint) -> Option<f64>;

const SERIES_OBSERVABLES: [(&str, Extract); 8] = [
    ("delta_scaled", |c| Some(c.delta_scaled)),
    ("delta_scaled_cond", |c| {
        Some(c.delta_scaled_cond).filter(|v| !v.is_nan())
    }),
    ("length_scaled", |c| Some(c.length_scaled)),
    ("root_path", |c| Some(c.root_path)),
    ("depth", |c| Some(c.depth as f64)),
    ("height", |c| Some(c.height as f64)),
    ("depth_over_ln", |c| {
        (c.n >= 2).then(|| c.depth as f64 / (c.n as f64).ln())
    }),
    ("height_over_ln", |c| {
        (c.n >= 2).then(|| c.height as f64 / (c.n as f64).ln())
    }),
];

/// Aggregates per-checkpoint observables across replicas into `out`.
fn push_series(
    out: &mut ExperimentOutput,
    prefix: &str,
    d: usize,
    epsilon: Option<f64>,
    label: &str,
    trials: &[TrialSeries],
) {
    let Some(first) = trials.first() else { return };
    for (j, cp) in first.checkpoints.iter().enumerate() {
        for (name, extract) in SERIES_OBSERVABLES {
            let kind = format!("{prefix}/{name}");
            let values: Vec<Option<f64>> =
                trials.iter().map(|t| extract(&t.checkpoints[j])).collect();
            if values.iter().all(Option::is_none) {
                continue;
            }
            for (t, v) in values.iter().enumerate() {
                out.raw.push(RawRow {
                    kind: kind.clone(),
                    epsilon,
                    n_or_step: Some(cp.n),
                    trial: t as u64,
                    stream: stream_index(label, t as u64),
                    value: *v,
                });
            }
            let kept: Vec<f64> = values.into_iter().flatten().collect();
            out.push(kind, d, epsilon, Some(cp.n), Summary::of(&kept));
        }
    }
}

pub fn run_post_cover(plan: &ExperimentPlan, jobs: usize) -> Result<ExperimentOutput> {
    let d = plan.d;
    let mut out = ExperimentOutput::default();
    for &eps in &plan.epsilons {
        let label = config_label("post_cover", d, Some(eps));
        let trials = run_replicas(jobs, plan.seed, &label, plan.trials, |_, mut rng| {
            rrt_series(d, eps, plan.max_steps, plan.probes, &mut rng)
        })?;
        let taus = Summary::of_censored(trials.iter().map(|t| t.cover_step.map(|s| s as f64)));
        out.total_trials += plan.trials;
        out.censored_trials += taus.censored;
        for (t, tr) in trials.iter().enumerate() {
            out.raw.push(RawRow {
                kind: "post_cover/tau_grid".into(),
                epsilon: Some(eps),
                n_or_step: None,
                trial: t as u64,
                stream: stream_index(&label, t as u64),
                value: tr.cover_step.map(|s| s as f64),
            });
        }
        out.push("post_cover/tau_grid", d, Some(eps), None, taus);
        push_series(&mut out, "post_cover", d, Some(eps), &label, &trials);
    }
    Ok(out)
}

pub fn run_nnt_stats(plan: &ExperimentPlan, jobs: usize) -> Result<ExperimentOutput> {
    let d = plan.d;
    let n = plan.max_steps;
    let mut out = ExperimentOutput {
        total_trials: plan.trials,
        ..Default::default()
    };

    let label = config_label("nnt_stats/nnt", d, None);
    let nnt = run_replicas(jobs, plan.seed, &label, plan.trials, |_, mut rng| {
        nnt_series(d, n, plan.probes, &mut rng)
    })?;
    push_series(&mut out, "nnt_stats/nnt", d, None, &label, &nnt);

    let oracle_label = config_label("nnt_stats/oracle", d, None);
    let oracle = run_replicas(jobs, plan.seed, &oracle_label, plan.trials, |_, mut rng| {
        Ok(depth_model_sample(n, &mut rng) as f64)
    })?;
    let measured: Vec<f64> = nnt
        .iter()
        .map(|t| t.last().map_or(f64::NAN, |c| c.depth as f64))
        .collect();
    out.push("nnt_stats/oracle_depth", d, None, Some(n), Summary::of(&oracle));
    out.push(
        "nnt_stats/depth_ks",
        d,
        None,
        Some(n),
        Summary::exact(stats::ks_statistic(&measured, &oracle)),
    );
    out.push(
        "nnt_stats/depth_ks_critical",
        d,
        None,
        Some(n),
        Summary::exact(stats::ks_critical(0.001, measured.len(), oracle.len())),
    );

    const PARENT_N: u64 = 8;
    let parent_label = config_label("nnt_stats/parent", d, None);
    let parents = run_replicas(jobs, plan.seed, &parent_label, plan.trials, |_, mut rng| {
        nnt_parent_at(d, PARENT_N, &mut rng)
    })?;
    let mut counts = [0u64; PARENT_N as usize];
    for p in parents {
        counts[p] += 1;
    }
    let (_, p_value) = stats::chi_square_uniform(&counts)?;
    out.push(
        "nnt_stats/parent_chi2_p",
        d,
        None,
        Some(PARENT_N),
        Summary::exact(p_value),
    );

    for &eps in &plan.epsilons {
        let label = config_label("nnt_stats/rrt", d, Some(eps));
        let rrt = run_replicas(jobs, plan.seed, &label, plan.trials, |_, mut rng| {
            rrt_series(d, eps, n, plan.probes, &mut rng)
        })?;
        out.total_trials += plan.trials;
        push_series(&mut out, "nnt_stats/rrt", d, Some(eps), &label, &rrt);
    }
    Ok(out)
}
