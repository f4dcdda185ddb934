//! Statistical post-processing of SGD experiments.
//!
//! This module turns raw [`SgdTrace`] collections into quantitative
//! summaries:
//!
//! * [`moment_curve`] — empirical p-th moment of the error along the
//!   checkpoint grid, with standard errors or bootstrap bands depending on
//!   whether the moments being averaged look heavy-tailed themselves;
//! * [`fit_rate`] — least-squares slope of a moment curve in log-log
//!   coordinates, compared against a theoretical exponent;
//! * [`check_vecexpandp`], [`check_p_expand`], [`check_rho_exp`],
//!   [`check_phi_sum`], [`fabian_recursion`] — deterministic and Monte-Carlo
//!   verifiers for the inequalities and recursions the convergence theory
//!   rests on (see [`lemmas`](self) items for statements);
//! * [`stable_limit_diagnostic`] — distributional tests that the normalized
//!   Polyak–Ruppert error converges to an α-stable (or Gaussian) limit.
//!
//! Everything here is deterministic given its inputs: Monte-Carlo helpers
//! take an explicit [`RngStream`] and internal resampling uses fixed seeds,
//! so repeated runs produce identical reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;
use crate::sgd::SgdTrace;
use crate::stable::{self, StableError};
use crate::stats::Welford;

mod lemmas;
mod limits;

pub use lemmas::{
    check_p_expand, check_phi_sum, check_rho_exp, check_vecexpandp, fabian_recursion,
    relative_oscillation, PExpandCheck, VecExpandCheck,
};
pub use limits::{
    default_directions, stable_limit_diagnostic, DirectionReport, StableLimitReport,
    MIN_REPLICATIONS,
};

#[cfg(test)]
mod tests;

/// Errors from the analysis layer.
#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    /// Input traces are structurally incompatible with each other or with
    /// the requested computation (checkpoint grids differ, dimensions clash,
    /// a requested time is absent, ...).
    #[error("incompatible traces: {0}")]
    MismatchedTraces(String),
    /// Not enough data points to carry out the estimate.
    #[error("insufficient data: need at least {needed}, have {got}")]
    InsufficientData { needed: usize, got: usize },
    /// A log-log fit was requested through a non-positive or non-finite
    /// curve value.
    #[error("cannot fit in log coordinates: value {value} at t = {time}")]
    LogDomain { time: u64, value: f64 },
    /// A numerical sub-procedure failed to produce a usable estimate.
    #[error("estimation failed: {0}")]
    Estimation(String),
    #[error(transparent)]
    Stable(#[from] StableError),
    #[error("csv output failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o failed: {0}")]
    Io(#[from] std::io::Error),
}

/// Burn-in used by the fitting pipeline when the caller does not override
/// it: checkpoints with t < 100 are dominated by the deterministic bias
/// term and are excluded from rate fits.
pub const DEFAULT_BURN_IN: u64 = 100;

/// Resamples drawn when a moment curve needs bootstrap bands.
const BOOTSTRAP_RESAMPLES: usize = 200;

/// Fixed seed for the internal bootstrap so that analysis output is a pure
/// function of its inputs.
const BOOTSTRAP_SEED: u64 = 2_718_281_828;

/// Empirical E|x_t − x*|^p along a checkpoint grid, averaged over
/// replications.
///
/// `std_errors` is `Some` exactly when the per-replication moments passed a
/// tail-index screen (estimated tail index ≥ 2p, so the averaged quantity
/// has finite variance and the usual CLT error bars are meaningful).
/// Otherwise `heavy_tailed` is set and `bootstrap_bands` carries a
/// quartile band of the resampled mean instead — for infinite-variance
/// summands a naive standard error is an inconsistent (and visually
/// misleading) uncertainty estimate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    /// Moment order, in (0, 2).
    pub p: f64,
    /// Checkpoint times, strictly increasing.
    pub times: Vec<u64>,
    /// Mean of |x_t − x*|₂^p over replications, per checkpoint.
    pub values: Vec<f64>,
    /// CLT standard errors of `values`; present iff the tail screen passed.
    pub std_errors: Option<Vec<f64>>,
    /// Replications censored upstream (diverged before finishing).
    pub censored: usize,
    /// True when the tail screen flagged the p-th moments as plausibly
    /// having infinite variance.
    pub heavy_tailed: bool,
    /// (25%, 75%) band of the bootstrap distribution of each mean;
    /// present iff `heavy_tailed`.
    pub bootstrap_bands: Option<Vec<(f64, f64)>>,
}

/// Averages |x_t − x*|₂^p across replications at every checkpoint.
///
/// All traces must share one checkpoint grid and one dimension. The moment
/// is recomputed from the stored iterates (not from any cached error
/// columns) so the routine works with an arbitrary reference point.
///
/// `censored` is the number of replications that diverged upstream and is
/// recorded verbatim in the curve; the estimate itself uses exactly the
/// traces given. Passing the uncensored survivors of a
/// [`crate::sgd::Replicated`] makes the curve a censored-sample estimate,
/// which is the standard treatment for heavy-tailed SGD where a vanishing
/// fraction of runs can exit the stability region.
pub fn moment_curve(
    traces: &[SgdTrace],
    censored: usize,
    p: f64,
    x_star: &[f64],
) -> Result<MomentCurve, AnalysisError> {
    if !(p.is_finite() && p > 0.0 && p < 2.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "p",
            value: p,
            reason: "moment order must lie in the open interval (0, 2)",
        });
    }
    let r = traces.len();
    if r == 0 {
        return Err(AnalysisError::InsufficientData { needed: 1, got: 0 });
    }
    let grid = &traces[0].checkpoints;
    if grid.is_empty() {
        return Err(AnalysisError::InsufficientData { needed: 1, got: 0 });
    }
    let k = grid.len();
    let dim = x_star.len();
    for (idx, tr) in traces.iter().enumerate() {
        if tr.checkpoints != *grid {
            return Err(AnalysisError::MismatchedTraces(format!(
                "replication {idx} uses a different checkpoint grid"
            )));
        }
        if tr.iterates.iter().any(|x| x.len() != dim) {
            return Err(AnalysisError::MismatchedTraces(format!(
                "replication {idx} has iterate dimension != reference dimension {dim}"
            )));
        }
    }

    // Per-replication p-th powers of the error, laid out [replication][checkpoint].
    let powers: Vec<Vec<f64>> = traces
        .iter()
        .map(|tr| {
            tr.iterates
                .iter()
                .map(|x| {
                    let d2: f64 = x
                        .iter()
                        .zip(x_star)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    d2.sqrt().powf(p)
                })
                .collect()
        })
        .collect();

    let mut values = Vec::with_capacity(k);
    let mut ses = Vec::with_capacity(k);
    for col in 0..k {
        let mut w = Welford::default();
        for row in &powers {
            w.push(row[col]);
        }
        values.push(w.mean());
        ses.push(w.std_error());
    }

    // Tail screen: Hill index of the final-checkpoint errors. The averaged
    // quantity |x − x*|^p has finite variance iff the error's tail index
    // exceeds 2p, so flag whenever the estimate falls below that line.
    // Degenerate samples (zeros, too few points) simply leave the screen
    // unflagged — their empirical variance is honest there.
    let finals: Vec<f64> = traces
        .iter()
        .map(|tr| {
            let x = tr.iterates.last().expect("nonempty grid");
            let d2: f64 = x
                .iter()
                .zip(x_star)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            d2.sqrt()
        })
        .collect();
    let heavy_tailed = match stable::hill_tail_index(&finals, stable::default_hill_k(r)) {
        Ok(alpha_hat) => alpha_hat < 2.0 * p,
        Err(_) => false,
    };

    let (std_errors, bootstrap_bands) = if heavy_tailed {
        (None, Some(bootstrap_quartile_bands(&powers, k)))
    } else {
        (Some(ses), None)
    };

    Ok(MomentCurve {
        p,
        times: grid.clone(),
        values,
        std_errors,
        censored,
        heavy_tailed,
        bootstrap_bands,
    })
}

/// (25%, 75%) band of the bootstrap distribution of the per-checkpoint
/// mean, from [`BOOTSTRAP_RESAMPLES`] resamples of replication indices with
/// a fixed seed. The modulo index draw has bias O(R/2⁶⁴), irrelevant here.
fn bootstrap_quartile_bands(powers: &[Vec<f64>], k: usize) -> Vec<(f64, f64)> {
    let r = powers.len();
    let mut rng = RngStream::new(BOOTSTRAP_SEED, 0);
    let mut means = vec![Vec::with_capacity(BOOTSTRAP_RESAMPLES); k];
    let mut acc = vec![0.0f64; k];
    for _ in 0..BOOTSTRAP_RESAMPLES {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for _ in 0..r {
            let pick = (rand::RngCore::next_u64(&mut rng) % r as u64) as usize;
            for (a, v) in acc.iter_mut().zip(&powers[pick]) {
                *a += *v;
            }
        }
        for (col, a) in acc.iter().enumerate() {
            means[col].push(a / r as f64);
        }
    }
    means
        .into_iter()
        .map(|mut m| {
            m.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            (quantile_sorted(&m, 0.25), quantile_sorted(&m, 0.75))
        })
        .collect()
}

/// Type-7 (linear interpolation) quantile of an ascending-sorted slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if frac == 0.0 || lo + 1 == sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    }
}

/// Least-squares fit of ln value against ln t on a [`MomentCurve`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// Fitted log-log slope (the empirical decay exponent, typically < 0).
    pub slope: f64,
    /// Fitted intercept in log coordinates.
    pub intercept: f64,
    /// Coefficient of determination in log coordinates, clamped to [0, 1].
    pub r_squared: f64,
    /// Checkpoints with t < burn_in were excluded from the fit.
    pub burn_in: u64,
    /// Theoretical exponent the slope is compared against.
    pub theory_slope: f64,
    /// |slope − theory_slope|.
    pub abs_gap: f64,
}

/// Fits ln(values) ~ intercept + slope·ln(t) over checkpoints with
/// t ≥ `burn_in` and compares the slope with `theory_slope`.
///
/// Needs at least 5 surviving points; every surviving value must be
/// strictly positive and finite (otherwise [`AnalysisError::LogDomain`]
/// names the offending checkpoint). With identical log-values the fit is
/// exact and r² is reported as 1.
pub fn fit_rate(
    curve: &MomentCurve,
    burn_in: u64,
    theory_slope: f64,
) -> Result<RateFit, AnalysisError> {
    if !theory_slope.is_finite() {
        return Err(AnalysisError::InvalidParameter {
            name: "theory_slope",
            value: theory_slope,
            reason: "theoretical exponent must be finite",
        });
    }
    let mut lx = Vec::new();
    let mut ly = Vec::new();
    for (&t, &v) in curve.times.iter().zip(&curve.values) {
        if t < burn_in {
            continue;
        }
        if !(v.is_finite() && v > 0.0) {
            return Err(AnalysisError::LogDomain { time: t, value: v });
        }
        lx.push((t as f64).ln());
        ly.push(v.ln());
    }
    if lx.len() < 5 {
        return Err(AnalysisError::InsufficientData {
            needed: 5,
            got: lx.len(),
        });
    }
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Estimation(
            "checkpoint times after burn-in are all identical".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ly.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        burn_in,
        theory_slope,
        abs_gap: (slope - theory_slope).abs(),
    })
}

/// Writes a moment curve and its fit as CSV with columns
/// `t,value,stderr_low,stderr_high,fit_value,theory_value`.
///
/// The uncertainty columns carry value ± standard error, or the bootstrap
/// quartile band when the curve was flagged heavy-tailed. `fit_value` is
/// the fitted power law exp(intercept)·t^slope; `theory_value` is the
/// theoretical power law anchored at the same intercept so the two lines
/// are directly comparable on a log-log plot.
pub fn write_rate_csv<W: std::io::Write>(
    writer: W,
    curve: &MomentCurve,
    fit: &RateFit,
) -> Result<(), AnalysisError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "t",
        "value",
        "stderr_low",
        "stderr_high",
        "fit_value",
        "theory_value",
    ])?;
    for (idx, (&t, &v)) in curve.times.iter().zip(&curve.values).enumerate() {
        let (lo, hi) = match (&curve.bootstrap_bands, &curve.std_errors) {
            (Some(bands), _) => bands[idx],
            (None, Some(se)) => (v - se[idx], v + se[idx]),
            (None, None) => (v, v),
        };
        let lnt = (t as f64).ln();
        let fit_value = (fit.intercept + fit.slope * lnt).exp();
        let theory_value = (fit.intercept + fit.theory_slope * lnt).exp();
        out.write_record([
            t.to_string(),
            format!("{v:.17e}"),
            format!("{lo:.17e}"),
            format!("{hi:.17e}"),
            format!("{fit_value:.17e}"),
            format!("{theory_value:.17e}"),
        ])?;
    }
    out.flush()?;
    Ok(())
}
