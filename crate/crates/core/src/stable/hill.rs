//! Hill estimator of a polynomial tail index.
//!
//! For samples with Pr(|X| > x) ≈ C x^{−α}, the log-spacings of the k
//! largest order statistics of |X| are approximately i.i.d. Exp(1/α), giving
//! the estimator α̂ = k / Σ_{i=1}^{k} (ln X_(i) − ln X_(k+1)) where
//! X_(1) ≥ X_(2) ≥ … are magnitudes in decreasing order. The estimate is
//! exactly invariant under positive rescaling of the sample (the scale
//! cancels in the log-spacings).

use super::StableError;

/// Default number of upper order statistics: ⌊√n⌋, the usual bias/variance
/// compromise when nothing is known about the second-order tail behavior.
pub fn default_hill_k(n: usize) -> usize {
    (n as f64).sqrt().floor() as usize
}

/// Hill estimate of the tail index from the `k` largest magnitudes.
///
/// Requires k ≥ 2 and at least k+1 strictly positive magnitudes. A sample
/// whose top k+1 magnitudes are all equal has zero log-spacings and is
/// reported as degenerate.
pub fn hill_tail_index(samples: &[f64], k: usize) -> Result<f64, StableError> {
    if k < 2 {
        return Err(StableError::InvalidParameter {
            name: "k",
            value: k as f64,
            reason: "Hill estimator needs at least 2 upper order statistics",
        });
    }
    let mut mags: Vec<f64> = samples
        .iter()
        .map(|x| x.abs())
        .filter(|m| *m > 0.0 && m.is_finite())
        .collect();
    if mags.len() < k + 1 {
        return Err(StableError::InsufficientData(format!(
            "need at least k+1 = {} positive finite magnitudes, have {}",
            k + 1,
            mags.len()
        )));
    }
    // Sort descending; only the top k+1 entries matter.
    mags.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    // Dividing before taking the log makes the estimate invariant under
    // positive rescaling of the sample (bit-exactly so for powers of two).
    let threshold = mags[k];
    let sum: f64 = mags[..k].iter().map(|m| (m / threshold).ln()).sum();
    if sum <= 0.0 {
        return Err(StableError::Degenerate(
            "zero log-spacings in the upper order statistics".into(),
        ));
    }
    Ok(k as f64 / sum)
}
