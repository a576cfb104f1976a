//! Initial growth: how long an RRT rooted at the origin needs to reach the
//! half-space `x₀ >= 1/2`.

use super::{config_label, run_replicas, ExperimentOutput, ExperimentPlan, RawRow, Summary};
use crate::error::{invalid, Result};
use crate::space::{in_half_space, Point};
use crate::tree::{grow_until, Tree};

/// `h(δ, z) = √(δ² + z²) − z`: how far a circle of radius `z` bulges past
/// its chord at lateral offset `δ`.
pub fn cap_height(delta: f64, z: f64) -> Result<f64> {
    if !(delta >= 0.0) {
        return Err(invalid("delta", "must be non-negative"));
    }
    if !(z > 0.0) {
        return Err(invalid("z", "must be positive"));
    }
    Ok(delta.hypot(z) - z)
}

/// Steps until the first vertex with `x₀ >= threshold`, or `None` if the cap
/// was reached first.
pub fn hit_time_trial(
    d: usize,
    epsilon: f64,
    threshold: f64,
    max_steps: u64,
    rng: &mut crate::space::RngStream,
) -> Result<Option<u64>> {
    let root = Point::origin(d)?;
    if in_half_space(&root, 0, threshold) {
        return Ok(Some(0));
    }
    let mut tree = Tree::rrt(root, epsilon)?;
    let mut idx = tree.build_index()?;
    let (steps, hit) = grow_until(
        &mut tree,
        &mut idx,
        rng,
        |t, out| in_half_space(&t.nodes()[out.new_vertex].position, 0, threshold),
        max_steps,
    )?;
    Ok(hit.then_some(steps))
}

pub fn run_hit_time(plan: &ExperimentPlan, jobs: usize) -> Result<ExperimentOutput> {
    let mut out = ExperimentOutput::default();
    let mut inv_eps = Vec::new();
    let mut means = Vec::new();
    for &eps in &plan.epsilons {
        let label = config_label("hit_time", plan.d, Some(eps));
        let results = run_replicas(jobs, plan.seed, &label, plan.trials, |_, mut rng| {
            hit_time_trial(plan.d, eps, plan.stop_threshold, plan.max_steps, &mut rng)
        })?;
        for (t, r) in results.iter().enumerate() {
            out.raw.push(RawRow {
                kind: "hit_time/steps".into(),
                epsilon: Some(eps),
                n_or_step: None,
                trial: t as u64,
                stream: super::stream_index(&label, t as u64),
                value: r.map(|s| s as f64),
            });
        }
        let summary = Summary::of_censored(results.iter().map(|r| r.map(|s| s as f64)));
        out.total_trials += plan.trials;
        out.censored_trials += summary.censored;
        if summary.censored == 0 && summary.mean > 0.0 {
            inv_eps.push(1.0 / eps);
            means.push(summary.mean);
        }
        out.push("hit_time/steps", plan.d, Some(eps), None, summary);
    }
    if inv_eps.len() >= 3 {
        let fit = super::stats::fit_loglog(&inv_eps, &means)?;
        out.push_fit("hit_time/exponent", plan.d, fit);
    }
    Ok(out)
}
