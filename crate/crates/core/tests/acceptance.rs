//! Acceptance panel. Each test prints one `criterion N: PASS|FAIL | ...` line
//! to stderr (uncaptured) and then asserts.

use std::io::Write as _;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rrt_core::cover;
use rrt_core::experiments::check::{coupled_check, run_check, LENGTH_TOLERANCE};
use rrt_core::experiments::phase3::{nnt_depth_at, nnt_parent_at, nnt_series};
use rrt_core::experiments::{run, run_replicas, stats, ExperimentKind, ExperimentOutput, ExperimentPlan, Summary};
use rrt_core::metrics::depth_model_sample;
use rrt_core::nn_index::{nearest_bruteforce, NnIndex};
use rrt_core::space::{uniform_sample, Point, RngStream};

const SEED: u64 = 2024;
const POST_COVER_EPS: f64 = 0.05;
const SQRT_PI_HALF: f64 = 0.886_226_925_452_758;

fn report(criterion: u32, pass: bool, detail: String) {
    let line = format!(
        "criterion {criterion:>2}: {} | {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{}", line.trim_end());
}

fn row(out: &ExperimentOutput, kind: &str, eps: Option<f64>, n: Option<u64>) -> Summary {
    out.row(kind, eps, n)
        .unwrap_or_else(|| panic!("missing row {kind} eps={eps:?} n={n:?}"))
        .summary
}

/// RRTs at ε = 0.05 grown to 1.6·10^5 nodes, shared by the post-cover criteria.
fn post_cover() -> &'static ExperimentOutput {
    static OUT: OnceLock<ExperimentOutput> = OnceLock::new();
    OUT.get_or_init(|| {
        let mut plan = ExperimentPlan::new(ExperimentKind::PostCover, 2, vec![POST_COVER_EPS], 100, SEED);
        plan.max_steps = 160_000;
        run(&plan, 1).unwrap()
    })
}

#[test]
fn criterion_01_step_rule() {
    let start = Instant::now();
    let mut rng = RngStream::new(SEED, 1);
    let r = run_check(2, 0.05, 100_000, 0, &mut rng).unwrap();
    let elapsed = start.elapsed();
    let pass = r.step_size_violations == 0
        && r.adoption_violations == 0
        && r.max_edge <= 0.05 + LENGTH_TOLERANCE
        && elapsed < Duration::from_secs(10);
    report(
        1,
        pass,
        format!(
            "10^5 steps, step-size violations {}, adoption violations {}, max edge {:.15}, {:.2?}",
            r.step_size_violations, r.adoption_violations, r.max_edge, elapsed
        ),
    );
}

#[test]
fn criterion_02_cell_agreement() {
    let mut violations = 0;
    let mut runs = 0;
    for d in 1..=3 {
        for s in 0..10 {
            let mut rng = RngStream::new(SEED + s, d as u64);
            violations += run_check(d, 0.05, 100_000, 0, &mut rng).unwrap().cell_violations;
            runs += 1;
        }
    }
    report(2, violations == 0, format!("{runs} runs x 10^5 steps, d=1..3, violations {violations}"));
}

#[test]
fn criterion_03_cover_time_sandwich() {
    let plan = ExperimentPlan::new(ExperimentKind::CoverTime, 2, vec![0.2, 0.1, 0.05], 30, SEED);
    let out = run(&plan, 1).unwrap();
    let mut pass = out.censored_trials == 0;
    let mut detail = Vec::new();
    for &eps in &plan.epsilons {
        let tau = row(&out, "cover_time/tau_grid", Some(eps), None);
        let lo = cover::lower_reference(2, eps);
        let hi = cover::upper_reference(2, eps);
        let ok = tau.mean >= lo - tau.ci95 && tau.mean <= hi + tau.ci95;
        pass &= ok;
        detail.push(format!(
            "eps={eps}: {lo:.1} <= {:.1}+-{:.1} <= {hi:.1} {}",
            tau.mean,
            tau.ci95,
            if ok { "ok" } else { "out" }
        ));
    }
    let fit = out.fit("cover_time/scaled_vs_log_inv_eps").expect("three uncensored points");
    pass &= fit.slope > 0.0 && fit.r_squared >= 0.9;
    detail.push(format!("fit slope {:.3} r2 {:.4}", fit.slope, fit.r_squared));
    report(3, pass, detail.join("; "));
}

#[test]
fn criterion_04_coupon_collector() {
    let mut plan = ExperimentPlan::new(ExperimentKind::Coupon, 1, vec![], 10_000, SEED);
    plan.coupons = 100;
    let out = run(&plan, 1).unwrap();
    let mean = row(&out, "coupon/draws", None, Some(100)).mean;
    let expected = cover::coupon_expected(100);
    let rel = (mean / expected - 1.0).abs();
    report(4, rel <= 0.05, format!("mean {mean:.2} vs n*H_n {expected:.2}, rel err {rel:.4}"));
}

#[test]
fn criterion_05_hit_time_exponent() {
    let plan = ExperimentPlan::new(ExperimentKind::HitTime, 2, vec![0.2, 0.1, 0.05, 0.025], 200, SEED);
    let out = run(&plan, 1).unwrap();
    let means: Vec<String> = plan
        .epsilons
        .iter()
        .map(|&e| format!("{:.2}", row(&out, "hit_time/steps", Some(e), None).mean))
        .collect();
    let fit = out.fit("hit_time/exponent").expect("four uncensored points");
    let pass = out.censored_trials == 0 && (1.0..=1.6).contains(&fit.slope);
    report(
        5,
        pass,
        format!(
            "exponent {:.4} +- {:.4} (r2 {:.4}), means [{}]",
            fit.slope,
            1.96 * fit.stderr_slope,
            fit.r_squared,
            means.join(", ")
        ),
    );
}

#[test]
fn criterion_06_coupling() {
    let mut failures = Vec::new();
    let mut max_base_height = 0;
    for s in 0..20 {
        let mut rng = RngStream::new(SEED, 600 + s);
        match coupled_check(2, POST_COVER_EPS, 10_000, 10_000_000, &mut rng).unwrap() {
            Some(r) => {
                max_base_height = max_base_height.max(r.base_height);
                if let Some(v) = r.violation {
                    failures.push(format!("seed {s}: {v:?}"));
                }
            }
            None => failures.push(format!("seed {s}: base never covered")),
        }
    }
    report(
        6,
        failures.is_empty(),
        format!(
            "20 seeds x 10^4 nodes, max base height {max_base_height}, violations [{}]",
            failures.join("; ")
        ),
    );
}

#[test]
fn criterion_07_scaled_edge_length() {
    let n = 100_000;
    let nnt = run_replicas(1, SEED, "acceptance/nnt-edge", 100, |_, mut rng| {
        Ok(nnt_series(2, n, 200, &mut rng)?.last().cloned().expect("checkpoint at n"))
    })
    .unwrap();
    assert!(nnt.iter().all(|c| c.n == n));
    let nnt_raw = Summary::of(&nnt.iter().map(|c| c.delta_scaled).collect::<Vec<_>>());
    let nnt_cond = Summary::of(&nnt.iter().map(|c| c.delta_scaled_cond).collect::<Vec<_>>());
    let out = post_cover();
    let rrt_raw = row(out, "post_cover/delta_scaled", Some(POST_COVER_EPS), Some(n));
    let rrt_cond = row(out, "post_cover/delta_scaled_cond", Some(POST_COVER_EPS), Some(n));
    let limit = SQRT_PI_HALF + 0.05;
    let pass = out.censored_trials == 0 && nnt_raw.mean <= limit && rrt_raw.mean <= limit;
    report(
        7,
        pass,
        format!(
            "limit {limit:.4}; NNT {:.4}+-{:.4} (conditional {:.4}); RRT eps=0.05 {:.4}+-{:.4} (conditional {:.4})",
            nnt_raw.mean, nnt_raw.ci95, nnt_cond.mean, rrt_raw.mean, rrt_raw.ci95, rrt_cond.mean
        ),
    );
}

#[test]
fn criterion_08_total_length() {
    let out = post_cover();
    let at = |n| row(out, "post_cover/length_scaled", Some(POST_COVER_EPS), Some(n)).mean;
    let (a, b, c) = (at(10_000), at(40_000), at(160_000));
    let (r1, r2) = (b / a, c / b);
    report(
        8,
        (0.8..=1.2).contains(&r2),
        format!("Delta_n/sqrt(n) = {a:.4}, {b:.4}, {c:.4}; ratios {r1:.4} (first), {r2:.4}"),
    );
}

#[test]
fn criterion_09_root_path() {
    let out = post_cover();
    let a = row(out, "post_cover/root_path", Some(POST_COVER_EPS), Some(10_000));
    let b = row(out, "post_cover/root_path", Some(POST_COVER_EPS), Some(100_000));
    let pooled = (a.ci95.powi(2) + b.ci95.powi(2)).sqrt();
    let diff = (b.mean - a.mean).abs();
    report(
        9,
        diff <= 2.0 * pooled,
        format!(
            "L at 10^4 {:.4}+-{:.4}, at 10^5 {:.4}+-{:.4}; |diff| {diff:.4} vs 2x pooled {:.4}",
            a.mean,
            a.ci95,
            b.mean,
            b.ci95,
            2.0 * pooled
        ),
    );
}

#[test]
fn criterion_10_depth_law() {
    let reps = 10_000;
    let parents = run_replicas(1, SEED, "acceptance/parent8", reps, |_, mut rng| nnt_parent_at(2, 8, &mut rng)).unwrap();
    let mut counts = [0u64; 8];
    for p in parents {
        counts[p] += 1;
    }
    let (chi2, p_value) = stats::chi_square_uniform(&counts).unwrap();

    let n = 10_000;
    let measured: Vec<f64> = run_replicas(1, SEED, "acceptance/depth", reps, |_, mut rng| {
        Ok(nnt_depth_at(2, n, &mut rng)? as f64)
    })
    .unwrap();
    let mut rng = RngStream::new(SEED, 1010);
    let oracle: Vec<f64> = (0..reps).map(|_| depth_model_sample(n, &mut rng) as f64).collect();
    let ks = stats::ks_statistic(&measured, &oracle);
    let critical = stats::ks_critical(0.001, measured.len(), oracle.len());
    report(
        10,
        p_value > 0.001 && ks < critical,
        format!(
            "parent of node 8: chi2 {chi2:.2} p {p_value:.4} counts {counts:?}; depth at 10^4: KS {ks:.4} vs critical {critical:.4}"
        ),
    );
}

#[test]
fn criterion_11_depth_and_height() {
    let mut plan = ExperimentPlan::new(ExperimentKind::NntStats, 2, vec![POST_COVER_EPS], 200, SEED);
    plan.max_steps = 100_000;
    plan.probes = 50;
    let out = run(&plan, 1).unwrap();
    let n = Some(100_000);
    let nd = row(&out, "nnt_stats/nnt/depth_over_ln", None, n);
    let nh = row(&out, "nnt_stats/nnt/height_over_ln", None, n);
    let rd = row(&out, "nnt_stats/rrt/depth_over_ln", Some(POST_COVER_EPS), n);
    let rh = row(&out, "nnt_stats/rrt/height_over_ln", Some(POST_COVER_EPS), n);
    let h_limit = std::f64::consts::E + 0.2;
    let pass = nd.mean <= 1.1 && nh.mean <= h_limit && rd.mean <= 1.1 && rh.mean <= h_limit;
    report(
        11,
        pass,
        format!(
            "D/ln n: NNT {:.4}, RRT eps=0.05 {:.4} (limit 1.1); H/ln n: NNT {:.4}, RRT eps=0.05 {:.4} (limit {h_limit:.4})",
            nd.mean, rd.mean, nh.mean, rh.mean
        ),
    );
}

#[test]
fn criterion_12_index_oracle() {
    let mut mismatches = 0;
    let mut queries = 0;
    for d in 1..=3 {
        for panel in 0..3u64 {
            let mut rng = RngStream::new(SEED, 1200 + 10 * d as u64 + panel);
            let draw = |rng: &mut RngStream| match panel {
                0 => uniform_sample(rng, d),
                // Lattice: exact ties and duplicates.
                1 => {
                    let c: Vec<f64> = (0..d).map(|_| rng.below(9) as f64 / 8.0).collect();
                    Point::new(&c).unwrap()
                }
                // Clustered near a corner, with far-away queries.
                _ => {
                    let c: Vec<f64> = (0..d).map(|_| rng.unit().powi(6)).collect();
                    Point::new(&c).unwrap()
                }
            };
            let points: Vec<Point> = (0..1000).map(|_| draw(&mut rng)).collect();
            let mut idx = NnIndex::new(d).unwrap();
            for (i, p) in points.iter().enumerate() {
                idx.insert(p).unwrap();
                // Query while growing as well as on the full set.
                if i % 50 == 49 {
                    let q = uniform_sample(&mut rng, d);
                    let got = idx.nearest(&q).unwrap();
                    let want = nearest_bruteforce(&points[..=i], &q).unwrap();
                    queries += 1;
                    mismatches += (got.0 != want.0 || got.1.to_bits() != want.1.to_bits()) as u32;
                }
            }
            for _ in 0..1000 {
                let q = if panel == 0 { uniform_sample(&mut rng, d) } else { draw(&mut rng) };
                let got = idx.nearest(&q).unwrap();
                let want = nearest_bruteforce(&points, &q).unwrap();
                queries += 1;
                mismatches += (got.0 != want.0 || got.1.to_bits() != want.1.to_bits()) as u32;
            }
        }
    }
    report(12, mismatches == 0, format!("{queries} queries over d=1..3, 3 panels, mismatches {mismatches}"));
}

#[test]
fn criterion_13_determinism() {
    let mut plans = vec![ExperimentPlan::new(ExperimentKind::CoverTime, 2, vec![0.2, 0.1], 24, SEED)];
    let mut p = ExperimentPlan::new(ExperimentKind::NntStats, 2, vec![0.2], 12, SEED);
    p.max_steps = 2_000;
    p.probes = 20;
    plans.push(p);
    let mut p = ExperimentPlan::new(ExperimentKind::PostCover, 2, vec![0.1], 12, SEED);
    p.max_steps = 5_000;
    p.probes = 20;
    plans.push(p);
    plans.push(ExperimentPlan::new(ExperimentKind::HitTime, 2, vec![0.2, 0.1, 0.05], 24, SEED));
    let mut differing = Vec::new();
    for plan in &plans {
        let one = run(plan, 1).unwrap();
        let four = run(plan, 4).unwrap();
        if one.aggregate_csv() != four.aggregate_csv() || one.raw_csv() != four.raw_csv() {
            differing.push(plan.kind.as_str());
        }
    }
    report(
        13,
        differing.is_empty(),
        format!("{} plans at jobs 1 and 4, differing [{}]", plans.len(), differing.join(", ")),
    );
}
