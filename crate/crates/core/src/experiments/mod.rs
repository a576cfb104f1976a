//! Seeded, replicated experiments for each growth phase.
//!
//! Every replica owns a private [`RngStream`] whose stream index is
//! `config_hash ⊕ replica`, so replicas can run in any order or in parallel
//! and the aggregates stay bit-identical. Aggregation always walks replicas in
//! index order.

pub mod check;
pub mod phase1;
pub mod phase2;
pub mod phase3;
pub mod stats;

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::space::{check_dim, RngStream};
pub use stats::{FitResult, Summary};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    HitTime,
    CoverTime,
    PostCover,
    NntStats,
    Coupon,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::HitTime => "hit_time",
            ExperimentKind::CoverTime => "cover_time",
            ExperimentKind::PostCover => "post_cover",
            ExperimentKind::NntStats => "nnt_stats",
            ExperimentKind::Coupon => "coupon",
        }
    }
}

/// A declarative sweep over step sizes for one experiment kind.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub d: usize,
    pub epsilons: Vec<f64>,
    pub trials: u64,
    /// Safety cap on growth steps; for the phase-3 experiments it is also the
    /// final tree size.
    pub max_steps: u64,
    pub seed: u64,
    /// Hit-time target: the half-space `x₀ >= stop_threshold`.
    pub stop_threshold: f64,
    /// Number of coupon types (coupon experiments only).
    pub coupons: u64,
    /// Uniform probes per checkpoint for the conditional edge-length estimate.
    pub probes: usize,
    pub out_path: Option<String>,
}

impl ExperimentPlan {
    pub fn new(kind: ExperimentKind, d: usize, epsilons: Vec<f64>, trials: u64, seed: u64) -> Self {
        Self {
            kind,
            d,
            epsilons,
            trials,
            max_steps: 10_000_000,
            seed,
            stop_threshold: 0.5,
            coupons: 100,
            probes: 1000,
            out_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_dim(self.d)?;
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be at least 1"));
        }
        if self.kind == ExperimentKind::Coupon {
            if self.coupons == 0 {
                return Err(invalid("n", "need at least one coupon type"));
            }
            return Ok(());
        }
        if self.epsilons.is_empty() {
            return Err(invalid("epsilons", "list must not be empty"));
        }
        for &e in &self.epsilons {
            if !(e > 0.0 && e.is_finite()) {
                return Err(invalid("epsilons", format!("{e} is not a positive step size")));
            }
        }
        if !(0.0..=1.0).contains(&self.stop_threshold) {
            return Err(invalid("threshold", "must lie in [0, 1]"));
        }
        if self.probes == 0 {
            return Err(invalid("probes", "must be at least 1"));
        }
        match self.kind {
            ExperimentKind::CoverTime => {
                for &e in &self.epsilons {
                    crate::cover::check_grid(self.d, e)?;
                }
            }
            ExperimentKind::HitTime | ExperimentKind::PostCover if self.d != 2 => {
                return Err(invalid("d", "this experiment is defined on [0,1]^2 only"));
            }
            _ => {}
        }
        Ok(())
    }
}

/// One line of the aggregate CSV.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    /// `<experiment>/<observable>`, e.g. `cover_time/tau_grid`.
    pub kind: String,
    pub d: usize,
    pub epsilon: Option<f64>,
    pub n_or_step: Option<u64>,
    pub summary: Summary,
}

/// One replica's value for one observable.
#[derive(Clone, Debug, PartialEq)]
pub struct RawRow {
    pub kind: String,
    pub epsilon: Option<f64>,
    pub n_or_step: Option<u64>,
    pub trial: u64,
    pub stream: u64,
    pub value: Option<f64>,
}

#[derive(Clone, Debug, Default)]
pub struct ExperimentOutput {
    pub rows: Vec<AggregateRow>,
    pub raw: Vec<RawRow>,
    pub fits: Vec<(String, FitResult)>,
    pub total_trials: u64,
    pub censored_trials: u64,
}

impl ExperimentOutput {
    pub fn censored_fraction(&self) -> f64 {
        if self.total_trials == 0 {
            0.0
        } else {
            self.censored_trials as f64 / self.total_trials as f64
        }
    }

    /// Finds the aggregate row for an observable.
    pub fn row(&self, kind: &str, epsilon: Option<f64>, n: Option<u64>) -> Option<&AggregateRow> {
        self.rows
            .iter()
            .find(|r| r.kind == kind && r.epsilon == epsilon && r.n_or_step == n)
    }

    pub fn fit(&self, name: &str) -> Option<&FitResult> {
        self.fits.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn aggregate_csv(&self) -> String {
        let mut out = String::from("kind,d,epsilon,n_or_step,trials,mean,ci95,censored\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.kind,
                r.d,
                opt(r.epsilon),
                opt(r.n_or_step),
                r.summary.trials,
                r.summary.mean,
                r.summary.ci95,
                r.summary.censored
            )
            .unwrap();
        }
        out
    }

    pub fn raw_csv(&self) -> String {
        let mut out = String::from("kind,epsilon,n_or_step,trial,stream,value\n");
        for r in &self.raw {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.kind,
                opt(r.epsilon),
                opt(r.n_or_step),
                r.trial,
                r.stream,
                opt(r.value)
            )
            .unwrap();
        }
        out
    }

    /// Aggregates as a JSON array mirroring the CSV columns.
    pub fn aggregate_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "kind": r.kind,
                    "d": r.d,
                    "epsilon": r.epsilon,
                    "n_or_step": r.n_or_step,
                    "trials": r.summary.trials,
                    "mean": finite(r.summary.mean),
                    "ci95": finite(r.summary.ci95),
                    "censored": r.summary.censored,
                })
            })
            .collect();
        serde_json::to_string_pretty(&rows).expect("rows serialize")
    }

    pub(crate) fn push(
        &mut self,
        kind: impl Into<String>,
        d: usize,
        epsilon: Option<f64>,
        n_or_step: Option<u64>,
        summary: Summary,
    ) {
        self.rows.push(AggregateRow {
            kind: kind.into(),
            d,
            epsilon,
            n_or_step,
            summary,
        });
    }

    /// Records the fit and mirrors it into the aggregate table.
    pub(crate) fn push_fit(&mut self, name: &str, d: usize, fit: FitResult) {
        self.push(
            format!("{name}_slope"),
            d,
            None,
            None,
            Summary {
                trials: 0,
                mean: fit.slope,
                ci95: 1.96 * fit.stderr_slope,
                censored: 0,
            },
        );
        self.push(format!("{name}_r2"), d, None, None, Summary::exact(fit.r_squared));
        self.fits.push((name.to_string(), fit));
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// 64-bit FNV-1a, used to derive per-configuration stream offsets.
pub fn config_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Stream index for replica `trial` of the configuration named `label`.
pub fn stream_index(label: &str, trial: u64) -> u64 {
    config_hash(label) ^ trial
}

pub(crate) fn config_label(kind: &str, d: usize, epsilon: Option<f64>) -> String {
    match epsilon {
        Some(e) => format!("{kind}|d={d}|eps={:016x}", e.to_bits()),
        None => format!("{kind}|d={d}"),
    }
}

/// Runs `f(trial, rng)` for every replica with up to `jobs` threads and
/// returns the results in replica order.
pub fn run_replicas<T, F>(jobs: usize, seed: u64, label: &str, trials: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, RngStream) -> Result<T> + Sync,
{
    let body = || {
        (0..trials)
            .into_par_iter()
            .map(|t| f(t, RngStream::new(seed, stream_index(label, t))))
            .collect::<Result<Vec<T>>>()
    };
    if jobs <= 1 {
        return (0..trials)
            .map(|t| f(t, RngStream::new(seed, stream_index(label, t))))
            .collect();
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| invalid("jobs", e.to_string()))?
        .install(body)
}

/// Runs the experiment described by `plan` using up to `jobs` threads.
pub fn run(plan: &ExperimentPlan, jobs: usize) -> Result<ExperimentOutput> {
    plan.validate()?;
    match plan.kind {
        ExperimentKind::HitTime => phase1::run_hit_time(plan, jobs),
        ExperimentKind::CoverTime => phase2::run_cover_time(plan, jobs),
        ExperimentKind::Coupon => phase2::run_coupon(plan, jobs),
        ExperimentKind::PostCover => phase3::run_post_cover(plan, jobs),
        ExperimentKind::NntStats => phase3::run_nnt_stats(plan, jobs),
    }
}
