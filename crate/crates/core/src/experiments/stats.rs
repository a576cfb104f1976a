//! Small statistics toolkit for the experiment harness: summaries with
//! Student-t confidence intervals, least-squares fits, two-sample
//! Kolmogorov–Smirnov and chi-square uniformity tests.

use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{invalid, Result};

/// Mean of uncensored values with a 95% confidence half-width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub trials: u64,
    pub mean: f64,
    pub ci95: f64,
    pub censored: u64,
}

impl Summary {
    /// Summarises `values`; `None` entries count as censored and are left
    /// out of the mean.
    pub fn of_censored<I>(values: I) -> Self
    where
        I: IntoIterator<Item = Option<f64>>,
    {
        let mut kept = Vec::new();
        let mut censored = 0;
        for v in values {
            match v {
                Some(x) => kept.push(x),
                None => censored += 1,
            }
        }
        let mut s = Self::of(&kept);
        s.censored = censored;
        s
    }

    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                trials: 0,
                mean: f64::NAN,
                ci95: f64::NAN,
                censored: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ci95 = if n < 2 {
            f64::INFINITY
        } else {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            t_quantile_975(n as f64 - 1.0) * (var / n as f64).sqrt()
        };
        Self {
            trials: n as u64,
            mean,
            ci95,
            censored: 0,
        }
    }

    /// A single exact value, reported with zero uncertainty.
    pub fn exact(value: f64) -> Self {
        Self {
            trials: 0,
            mean: value,
            ci95: 0.0,
            censored: 0,
        }
    }
}

fn t_quantile_975(df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df > 0")
        .inverse_cdf(0.975)
}

/// Ordinary least-squares line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub stderr_slope: f64,
}

/// Least squares of `y` on `x`.
pub fn fit_linear(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(invalid("ys", "length differs from xs"));
    }
    let n = xs.len();
    if n < 3 {
        return Err(invalid("xs", format!("need at least 3 points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("xs", "all x values are equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    };
    let stderr_slope = (sse / (nf - 2.0) / sxx).sqrt();
    Ok(FitResult {
        slope,
        intercept,
        r_squared,
        stderr_slope,
    })
}

/// Least squares of `ln y` on `ln x`; the slope estimates a power-law exponent.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(invalid("xs", "log-log fit needs strictly positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_linear(&lx, &ly)
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F₁ - F₂|`. Ties are
/// handled by evaluating both empirical CDFs after each distinct value.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut sup: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}

/// Large-sample critical value of the two-sample KS statistic at level `alpha`.
pub fn ks_critical(alpha: f64, na: usize, nb: usize) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let (na, nb) = (na as f64, nb as f64);
    c * ((na + nb) / (na * nb)).sqrt()
}

/// Pearson chi-square test of `counts` against the uniform distribution.
/// Returns `(statistic, p_value)`.
pub fn chi_square_uniform(counts: &[u64]) -> Result<(f64, f64)> {
    if counts.len() < 2 {
        return Err(invalid("counts", "need at least two categories"));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(invalid("counts", "no observations"));
    }
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("df > 0");
    Ok((stat, dist.sf(stat)))
}
