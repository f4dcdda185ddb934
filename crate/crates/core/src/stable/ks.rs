//! Kolmogorov–Smirnov statistics and the self-similarity test.
//!
//! Critical values use the asymptotic Kolmogorov distribution:
//! c(a) = √(−ln(a/2)/2), so the one-sample threshold at level a is c(a)/√n
//! and the two-sample threshold is c(a)·√((n₁+n₂)/(n₁n₂)). At the sample
//! sizes used here (≥ 200) the asymptotic approximation is accurate.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::StableError;

/// Outcome of a distributional test: pass when the statistic is below the
/// critical value at the stated level.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub critical_value: f64,
    pub level: f64,
    pub pass: bool,
}

impl TestReport {
    fn new(statistic: f64, critical_value: f64, level: f64) -> Self {
        Self { statistic, critical_value, level, pass: statistic < critical_value }
    }
}

fn kolmogorov_c(level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt()
}

/// Asymptotic one-sample KS critical value at the given level.
pub fn ks_critical_one_sample(n: usize, level: f64) -> f64 {
    kolmogorov_c(level) / (n as f64).sqrt()
}

/// Asymptotic two-sample KS critical value at the given level.
pub fn ks_critical_two_sample(n1: usize, n2: usize, level: f64) -> f64 {
    let (n1, n2) = (n1 as f64, n2 as f64);
    kolmogorov_c(level) * ((n1 + n2) / (n1 * n2)).sqrt()
}

/// Two-sample KS statistic sup_x |F̂_a(x) − F̂_b(x)|.
pub fn ks_statistic_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a: Vec<f64> = a.to_vec();
    let mut b: Vec<f64> = b.to_vec();
    a.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        if x <= y {
            i += 1;
        }
        if y <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// One-sample KS statistic against a Normal(mean, sd) reference.
pub fn ks_statistic_normal(samples: &[f64], mean: f64, sd: f64) -> f64 {
    let normal = Normal::new(mean, sd).expect("sd must be positive");
    let mut s: Vec<f64> = samples.to_vec();
    s.sort_unstable_by(|x, y| x.partial_cmp(y).unwrap());
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (idx, &x) in s.iter().enumerate() {
        let f = normal.cdf(x);
        d = d.max((f - idx as f64 / n).abs());
        d = d.max(((idx + 1) as f64 / n - f).abs());
    }
    d
}

/// Two-sample KS test at the given level.
pub fn two_sample_ks_test(a: &[f64], b: &[f64], level: f64) -> TestReport {
    let stat = ks_statistic_two_sample(a, b);
    TestReport::new(stat, ks_critical_two_sample(a.len(), b.len(), level), level)
}

/// One-sample KS normality test against Normal(mean, sd).
pub fn normality_test(samples: &[f64], mean: f64, sd: f64, level: f64) -> TestReport {
    let stat = ks_statistic_normal(samples, mean, sd);
    TestReport::new(stat, ks_critical_one_sample(samples.len(), level), level)
}

/// Tests the defining stability property X₁ + X₂ ≗ 2^{1/α} X on a sample.
///
/// The sample is split into two halves; element-wise sums across the halves
/// are compared against the 2^{1/α}-scaled original sample with a two-sample
/// KS statistic at the given level. The two comparison samples share the
/// underlying draws, which biases the statistic low — the test is
/// conservative for a true stable law, while gross scaling mismatches (any
/// non-stable law) still register clearly at the sample sizes required.
pub fn self_similarity_test(
    samples: &[f64],
    alpha: f64,
    level: f64,
) -> Result<TestReport, StableError> {
    if samples.len() < 200 || samples.len() % 2 != 0 {
        return Err(StableError::InsufficientData(format!(
            "self-similarity test needs an even sample count >= 200, have {}",
            samples.len()
        )));
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(StableError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "tail index must lie in (0, 2]",
        });
    }
    let half = samples.len() / 2;
    let sums: Vec<f64> = (0..half).map(|i| samples[i] + samples[half + i]).collect();
    let scale = 2f64.powf(1.0 / alpha);
    let scaled: Vec<f64> = samples.iter().map(|x| scale * x).collect();
    Ok(two_sample_ks_test(&sums, &scaled, level))
}
