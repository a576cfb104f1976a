//! Covering times: RRT grid-cover time against the harmonic reference
//! curves, and the coupon collector.

use super::{config_label, run_replicas, stats, ExperimentOutput, ExperimentPlan, RawRow, Summary};
use crate::cover::{self, CoverState};
use crate::error::Result;
use crate::space::{Point, RngStream};
use crate::tree::Tree;

/// Grows an RRT from the cube centre until every grid cell holds a vertex.
/// Returns the grid-cover step, or `None` if `max_steps` ran out first.
pub fn cover_time_trial(
    d: usize,
    epsilon: f64,
    max_steps: u64,
    rng: &mut RngStream,
) -> Result<Option<u64>> {
    let mut tree = Tree::rrt(Point::centre(d)?, epsilon)?;
    let mut idx = tree.build_index()?;
    let mut state = CoverState::new(d, epsilon)?;
    if state.register_vertex(tree.root(), 0) {
        return Ok(Some(0));
    }
    for step in 1..=max_steps {
        let out = tree.rrt_step(&mut idx, rng)?;
        if state.register_vertex(&tree.nodes()[out.new_vertex].position, step) {
            return Ok(Some(step));
        }
    }
    Ok(None)
}

pub fn run_cover_time(plan: &ExperimentPlan, jobs: usize) -> Result<ExperimentOutput> {
    let d = plan.d;
    let mut out = ExperimentOutput::default();
    let mut log_inv_eps = Vec::new();
    let mut scaled = Vec::new();
    for &eps in &plan.epsilons {
        let label = config_label("cover_time", d, Some(eps));
        let results = run_replicas(jobs, plan.seed, &label, plan.trials, |_, mut rng| {
            cover_time_trial(d, eps, plan.max_steps, &mut rng)
        })?;
        for (t, r) in results.iter().enumerate() {
            out.raw.push(RawRow {
                kind: "cover_time/tau_grid".into(),
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
        let eps_d = eps.powi(d as i32);
        out.push("cover_time/tau_grid", d, Some(eps), None, summary);
        out.push(
            "cover_time/lower_ref",
            d,
            Some(eps),
            None,
            Summary::exact(cover::lower_reference(d, eps)),
        );
        out.push(
            "cover_time/upper_ref",
            d,
            Some(eps),
            None,
            Summary::exact(cover::upper_reference(d, eps)),
        );
        let cells = cover::check_grid(d, eps)?;
        out.push(
            "cover_time/grid_cells",
            d,
            Some(eps),
            None,
            Summary::exact(cells as f64),
        );
        out.push(
            "cover_time/scaled_tau",
            d,
            Some(eps),
            None,
            Summary {
                mean: summary.mean * eps_d,
                ci95: summary.ci95 * eps_d,
                ..summary
            },
        );
        if summary.censored == 0 {
            log_inv_eps.push((1.0 / eps).ln());
            scaled.push(summary.mean * eps_d);
        }
    }
    if log_inv_eps.len() >= 3 {
        let fit = stats::fit_linear(&log_inv_eps, &scaled)?;
        out.push_fit("cover_time/scaled_vs_log_inv_eps", d, fit);
    }
    Ok(out)
}

pub fn run_coupon(plan: &ExperimentPlan, jobs: usize) -> Result<ExperimentOutput> {
    let n = plan.coupons;
    let label = format!("coupon|n={n}");
    let draws = run_replicas(jobs, plan.seed, &label, plan.trials, |_, mut rng| {
        Ok(cover::coupon_simulate(n, &mut rng) as f64)
    })?;
    let mut out = ExperimentOutput {
        total_trials: plan.trials,
        ..Default::default()
    };
    for (t, &v) in draws.iter().enumerate() {
        out.raw.push(RawRow {
            kind: "coupon/draws".into(),
            epsilon: None,
            n_or_step: Some(n),
            trial: t as u64,
            stream: super::stream_index(&label, t as u64),
            value: Some(v),
        });
    }
    out.push("coupon/draws", 0, None, Some(n), Summary::of(&draws));
    out.push(
        "coupon/expected",
        0,
        None,
        Some(n),
        Summary::exact(cover::coupon_expected(n)),
    );
    Ok(out)
}
