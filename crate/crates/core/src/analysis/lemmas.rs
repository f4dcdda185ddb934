//! Verifiers for the deterministic inequalities and recursions behind the
//! convergence rates.
//!
//! Each checker either evaluates both sides of an inequality on concrete
//! inputs ([`check_vecexpandp`], [`check_p_expand`]) or runs a normalized
//! recursion whose decay the theory predicts ([`check_rho_exp`],
//! [`check_phi_sum`], [`fabian_recursion`]). They return raw numbers so
//! callers (tests, the `verify-lemmas` command) can apply their own
//! tolerances and report margins, not just booleans.

use serde::{Deserialize, Serialize};

use crate::ppd::{signed_power, SymMatrix};
use crate::rng::RngStream;
use crate::stable::Sampler;
use crate::stats::Welford;

use super::AnalysisError;

/// Runs the scalar Fabian-style recursion
/// b_{t+1} = b_t·(1 − a·t^{−α}) + b·t^{−α−β}
/// and returns [b_1, …, b_T] with b_1 = `b0`.
///
/// For 0 < α < 1 and β > 0 the comparison lemma gives t^β·b_t → b/a, which
/// is what the acceptance checks assert on this output.
pub fn fabian_recursion(
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    b0: f64,
    t_count: usize,
) -> Result<Vec<f64>, AnalysisError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "a",
            value: a,
            reason: "contraction coefficient must be positive and finite",
        });
    }
    if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "step exponent must lie in the open interval (0, 1)",
        });
    }
    if !b.is_finite() {
        return Err(AnalysisError::InvalidParameter {
            name: "b",
            value: b,
            reason: "forcing coefficient must be finite",
        });
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "beta",
            value: beta,
            reason: "forcing exponent must be nonnegative and finite",
        });
    }
    if !b0.is_finite() {
        return Err(AnalysisError::InvalidParameter {
            name: "b0",
            value: b0,
            reason: "initial value must be finite",
        });
    }
    if t_count < 10 {
        return Err(AnalysisError::InvalidParameter {
            name: "t_count",
            value: t_count as f64,
            reason: "need at least ten terms for a meaningful sequence",
        });
    }
    let mut seq = Vec::with_capacity(t_count);
    seq.push(b0);
    for t in 1..t_count {
        let tf = t as f64;
        let prev = seq[t - 1];
        seq.push(prev * (1.0 - a * tf.powf(-alpha)) + b * tf.powf(-alpha - beta));
    }
    Ok(seq)
}

/// Maximal relative deviation of a positive sequence from its window
/// midpoint: (max − min) / (max + min).
///
/// "The sequence is constant to within ±r" means every value lies in
/// [c(1−r), c(1+r)] for some c, which holds exactly when this quantity is
/// at most r (take c as the midpoint of the range). It is the flatness
/// measure the Θ(t^{−β}) checks use on t^β·b_t.
///
/// Returns `None` for an empty slice, non-finite values, or a window whose
/// midpoint is not strictly positive.
pub fn relative_oscillation(values: &[f64]) -> Option<f64> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        if !v.is_finite() {
            return None;
        }
        min = min.min(v);
        max = max.max(v);
    }
    if values.is_empty() || max + min <= 0.0 {
        return None;
    }
    Some((max - min) / (max + min))
}

/// Both sides of the vector power-expansion inequality
/// ∥x + y∥_p^p ≤ ∥x∥_p^p + 4∥y∥_p^p + p·⟨y, x^{⟨p−1⟩}⟩ for p ∈ [1, 2],
/// where x^{⟨q⟩} is the coordinate-wise signed power.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VecExpandCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// lhs ≤ rhs up to a 1e-12 relative rounding allowance.
    pub holds: bool,
}

/// Rounding allowance for the deterministic inequality checks: the two
/// sides are evaluated with O(n) floating-point operations each, so equality
/// cases can land either way by a few ulps.
const EXPAND_SLACK: f64 = 1e-12;

/// Evaluates the vector power-expansion inequality on concrete vectors.
///
/// # Panics
///
/// Panics when p ∉ [1, 2] or the vectors' lengths differ — the inequality
/// is only stated on that domain, so calling outside it is a programming
/// error rather than a data condition.
pub fn check_vecexpandp(x: &[f64], y: &[f64], p: f64) -> VecExpandCheck {
    assert!(
        p.is_finite() && (1.0..=2.0).contains(&p),
        "power-expansion inequality requires p in [1, 2], got {p}"
    );
    assert_eq!(x.len(), y.len(), "vectors must share a dimension");
    let lhs: f64 = x.iter().zip(y).map(|(a, b)| (a + b).abs().powf(p)).sum();
    let xp: f64 = x.iter().map(|a| a.abs().powf(p)).sum();
    let yp: f64 = y.iter().map(|a| a.abs().powf(p)).sum();
    let sgn = signed_power(x, p - 1.0).expect("p - 1 lies in [0, 1]");
    let cross: f64 = y.iter().zip(&sgn).map(|(b, s)| b * s).sum();
    let rhs = xp + 4.0 * yp + p * cross;
    VecExpandCheck {
        lhs,
        rhs,
        holds: lhs <= rhs + EXPAND_SLACK * (1.0 + rhs.abs()),
    }
}

/// Monte-Carlo estimate of both sides of the martingale power expansion
/// E|S_t|^{1+p} ≤ 2^{1−p}·n^{1−(1+p)/2}·t·E|X|^{1+p}, with uncertainty.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PExpandCheck {
    /// Empirical E|S_t|₂^{1+p} over the requested trials.
    pub lhs: f64,
    /// The bound evaluated with the empirical per-increment moment.
    pub bound: f64,
    /// lhs / bound (0 when both sides vanish).
    pub ratio: f64,
    /// Combined relative standard error of the two estimates (conservative
    /// sum of the two relative errors — the estimates are positively
    /// correlated, so the sum over-covers).
    pub rel_std_error: f64,
    /// lhs ≤ bound within 3 combined standard errors.
    pub holds: bool,
}

/// Checks E|S_t|^{1+p} ≤ 2^{1−p} n^{(1−p)/2} t E|X|^{1+p} by simulation,
/// where S_t sums t i.i.d. vectors with coordinates drawn from `sampler`
/// and |·| is the Euclidean norm on ℝⁿ.
///
/// Both moments are estimated from the same draws, so the comparison is a
/// paired one; `holds` allows 3 combined standard errors of slack. With
/// t = 1 and n = 1 the two estimates use identical samples and the ratio is
/// exactly 2^{p−1}.
pub fn check_p_expand(
    sampler: &dyn Sampler,
    p: f64,
    t: u64,
    trials: u64,
    n: usize,
    rng: &mut RngStream,
) -> Result<PExpandCheck, AnalysisError> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(AnalysisError::InvalidParameter {
            name: "p",
            value: p,
            reason: "martingale expansion requires p in [0, 1]",
        });
    }
    if t == 0 {
        return Err(AnalysisError::InvalidParameter {
            name: "t",
            value: 0.0,
            reason: "need at least one increment",
        });
    }
    if trials < 2 {
        return Err(AnalysisError::InvalidParameter {
            name: "trials",
            value: trials as f64,
            reason: "need at least two trials for a standard error",
        });
    }
    if n == 0 {
        return Err(AnalysisError::InvalidParameter {
            name: "n",
            value: 0.0,
            reason: "dimension must be at least 1",
        });
    }
    let q = 1.0 + p;
    let mut sum_moment = Welford::default();
    let mut inc_moment = Welford::default();
    let mut s = vec![0.0f64; n];
    for _ in 0..trials {
        s.iter_mut().for_each(|c| *c = 0.0);
        for _ in 0..t {
            let mut inc_sq = 0.0;
            for c in s.iter_mut() {
                let x = sampler.sample(rng);
                inc_sq += x * x;
                *c += x;
            }
            inc_moment.push(inc_sq.sqrt().powf(q));
        }
        let s_sq: f64 = s.iter().map(|c| c * c).sum();
        sum_moment.push(s_sq.sqrt().powf(q));
    }
    let lhs = sum_moment.mean();
    let per_inc = inc_moment.mean();
    let bound = 2f64.powf(1.0 - p) * (n as f64).powf(1.0 - q / 2.0) * t as f64 * per_inc;
    let mut rel = 0.0;
    if lhs > 0.0 {
        rel += sum_moment.std_error() / lhs;
    }
    if per_inc > 0.0 {
        rel += inc_moment.std_error() / per_inc;
    }
    let ratio = if bound > 0.0 {
        lhs / bound
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(PExpandCheck {
        lhs,
        bound,
        ratio,
        rel_std_error: rel,
        holds: lhs <= bound * (1.0 + 3.0 * rel) + EXPAND_SLACK * (1.0 + bound.abs()),
    })
}

fn validate_rate_pair(rho: f64, kappa: f64) -> Result<(), AnalysisError> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "rho",
            value: rho,
            reason: "step exponent must be positive and finite",
        });
    }
    if !(kappa.is_finite() && kappa > rho && kappa <= 1.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "kappa",
            value: kappa,
            reason: "normalization exponent must satisfy rho < kappa <= 1",
        });
    }
    Ok(())
}

/// Normalized exponential-sum sequence
/// s_t = t^{−κ} Σ_{j=1}^{t−1} exp(−λ Σ_{i=j}^{t−1} γ_i), γ_i = γ₀ i^{−ρ},
/// returned for t = 1..=T (s_1 = 0).
///
/// The inner sums telescope, so the whole sequence is produced by the O(T)
/// recursion A_{t+1} = (A_t + 1)·e^{−λγ_t}. For ρ < κ ≤ 1 the theory
/// predicts s_t → 0; the verifier surfaces the raw sequence so callers can
/// check both the final level and the decay.
pub fn check_rho_exp(
    rho: f64,
    kappa: f64,
    lam: f64,
    gamma0: f64,
    t_max: u64,
) -> Result<Vec<f64>, AnalysisError> {
    validate_rate_pair(rho, kappa)?;
    if !(lam.is_finite() && lam > 0.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "lam",
            value: lam,
            reason: "curvature parameter must be positive and finite",
        });
    }
    if !(gamma0.is_finite() && gamma0 > 0.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "gamma0",
            value: gamma0,
            reason: "step-size scale must be positive and finite",
        });
    }
    if t_max < 2 {
        return Err(AnalysisError::InvalidParameter {
            name: "t_max",
            value: t_max as f64,
            reason: "need at least two terms",
        });
    }
    let mut out = Vec::with_capacity(t_max as usize);
    out.push(0.0);
    let mut acc = 0.0f64;
    for t in 1..t_max {
        let gamma = gamma0 * (t as f64).powf(-rho);
        acc = (acc + 1.0) * (-lam * gamma).exp();
        out.push(((t + 1) as f64).powf(-kappa) * acc);
    }
    Ok(out)
}

/// Hard cap on the horizon of [`check_phi_sum`]: the recursion is O(T²)
/// matrix products, so long horizons belong to the scalar specialization
/// [`check_rho_exp`] instead.
const PHI_SUM_T_CAP: u64 = 5_000;

/// Normalized matrix Abel-sum residuals
/// u_t = t^{−κ} Σ_{j=1}^{t−1} ∥A^{−1} − γ_j Σ_{i=j}^{t−1} X_j^i∥₂,
/// where X_j^j = I and X_j^{i+1} = (I − γ_i A)·X_j^i, γ_i = γ₀ i^{−ρ},
/// returned for t = 1..=T (u_1 = 0).
///
/// The inner sum γ_j Σ_i X_j^i is a Riemann-style approximation of A^{−1};
/// the theory needs its accumulated operator-norm error to vanish after
/// t^{−κ} normalization. `a` must be symmetric positive definite, and all
/// iterates are symmetric (polynomials in A), so ∥·∥₂ is computed by the
/// symmetric spectral-norm kernel.
///
/// Runs the full O(T²) double recursion; `t_max` is capped at 5000.
pub fn check_phi_sum(
    a: &SymMatrix,
    rho: f64,
    kappa: f64,
    gamma0: f64,
    t_max: u64,
) -> Result<Vec<f64>, AnalysisError> {
    validate_rate_pair(rho, kappa)?;
    if !(gamma0.is_finite() && gamma0 > 0.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "gamma0",
            value: gamma0,
            reason: "step-size scale must be positive and finite",
        });
    }
    if !(2..=PHI_SUM_T_CAP).contains(&t_max) {
        return Err(AnalysisError::InvalidParameter {
            name: "t_max",
            value: t_max as f64,
            reason: "horizon must lie in [2, 5000] for the dense recursion",
        });
    }
    let lambda_min = a.lambda_min();
    if !(lambda_min.is_finite() && lambda_min > 0.0) {
        return Err(AnalysisError::InvalidParameter {
            name: "a",
            value: lambda_min,
            reason: "matrix must be symmetric positive definite",
        });
    }
    let n = a.n();
    let a_flat: Vec<f64> = a.rows().into_iter().flatten().collect();
    let inv = a
        .to_dmatrix()
        .try_inverse()
        .ok_or_else(|| AnalysisError::Estimation("failed to invert the curvature matrix".into()))?;
    let mut a_inv = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            a_inv[i * n + j] = inv[(i, j)];
        }
    }
    let gammas: Vec<f64> = (1..t_max)
        .map(|i| gamma0 * (i as f64).powf(-rho))
        .collect();

    let tm = t_max as usize;
    let mut acc = vec![0.0f64; tm + 1];
    let mut x = vec![0.0f64; n * n];
    let mut sum = vec![0.0f64; n * n];
    let mut phi = vec![0.0f64; n * n];
    let mut tmp = vec![0.0f64; n * n];
    for j in 1..tm {
        // x = X_j^i starting at i = j; sum = Σ_{i'=j}^{i} X_j^{i'}.
        x.iter_mut().for_each(|v| *v = 0.0);
        for d in 0..n {
            x[d * n + d] = 1.0;
        }
        sum.copy_from_slice(&x);
        let gj = gammas[j - 1];
        for t in (j + 1)..=tm {
            for idx in 0..n * n {
                phi[idx] = a_inv[idx] - gj * sum[idx];
            }
            acc[t] += sym_spectral_norm(n, &phi);
            if t == tm {
                break;
            }
            // Advance X_j^{t−1} → X_j^t = (I − γ_{t−1} A)·X and extend the sum.
            let g = gammas[t - 2];
            mat_mul(n, &a_flat, &x, &mut tmp);
            for idx in 0..n * n {
                x[idx] -= g * tmp[idx];
                sum[idx] += x[idx];
            }
        }
    }
    Ok((1..=tm)
        .map(|t| (t as f64).powf(-kappa) * acc[t])
        .collect())
}

/// out = a·b for square row-major matrices.
fn mat_mul(n: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = s;
        }
    }
}

/// Spectral norm (largest |eigenvalue|) of a symmetric row-major matrix.
///
/// Uses closed forms for n ≤ 3 and power iteration on M² (deterministic
/// start vector) above that; intended for the small dense matrices this
/// module produces internally. Exposed to the crate so tests can pit it
/// against the eigensolver route.
pub(crate) fn sym_spectral_norm(n: usize, m: &[f64]) -> f64 {
    debug_assert_eq!(m.len(), n * n);
    match n {
        0 => 0.0,
        1 => m[0].abs(),
        2 => {
            let a = m[0];
            let b = 0.5 * (m[1] + m[2]);
            let d = m[3];
            let mean = 0.5 * (a + d);
            let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            mean.abs() + r
        }
        3 => {
            let (a, b, c) = (m[0], m[4], m[8]);
            let (d, e, f) = (
                0.5 * (m[1] + m[3]),
                0.5 * (m[2] + m[6]),
                0.5 * (m[5] + m[7]),
            );
            let p1 = d * d + e * e + f * f;
            if p1 == 0.0 {
                return a.abs().max(b.abs()).max(c.abs());
            }
            let q = (a + b + c) / 3.0;
            let p2 = (a - q) * (a - q) + (b - q) * (b - q) + (c - q) * (c - q) + 2.0 * p1;
            let p = (p2 / 6.0).sqrt();
            if p == 0.0 {
                return q.abs();
            }
            // det((M − qI)/p) / 2, clamped into acos domain.
            let (ba, bb, bc) = ((a - q) / p, (b - q) / p, (c - q) / p);
            let (bd, be, bf) = (d / p, e / p, f / p);
            let det_b = ba * (bb * bc - bf * bf) - bd * (bd * bc - bf * be)
                + be * (bd * bf - bb * be);
            let r = (det_b / 2.0).clamp(-1.0, 1.0);
            let phi = r.acos() / 3.0;
            let eig1 = q + 2.0 * p * phi.cos();
            let eig3 = q + 2.0 * p * (phi + 2.0 * std::f64::consts::FRAC_PI_3).cos();
            let eig2 = 3.0 * q - eig1 - eig3;
            eig1.abs().max(eig2.abs()).max(eig3.abs())
        }
        _ => {
            // Cyclic Jacobi sweeps on a scratch copy. Quadratic convergence
            // makes the diagonal accurate to a few ulps within a handful of
            // sweeps, and the route is independent of the tridiagonal-QR
            // eigensolver used elsewhere in the crate.
            let mut a = m.to_vec();
            let frob = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            if frob == 0.0 {
                return 0.0;
            }
            let tol = 1e-15 * frob;
            for _ in 0..60 {
                let mut off = 0.0f64;
                for p in 0..n {
                    for q in (p + 1)..n {
                        off += a[p * n + q] * a[p * n + q];
                    }
                }
                if off.sqrt() <= tol {
                    break;
                }
                for p in 0..n {
                    for q in (p + 1)..n {
                        let apq = a[p * n + q];
                        if apq == 0.0 {
                            continue;
                        }
                        let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                        let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                        let c = 1.0 / (t * t + 1.0).sqrt();
                        let s = t * c;
                        for k in 0..n {
                            if k == p || k == q {
                                continue;
                            }
                            let akp = a[k * n + p];
                            let akq = a[k * n + q];
                            a[k * n + p] = c * akp - s * akq;
                            a[p * n + k] = a[k * n + p];
                            a[k * n + q] = s * akp + c * akq;
                            a[q * n + k] = a[k * n + q];
                        }
                        a[p * n + p] -= t * apq;
                        a[q * n + q] += t * apq;
                        a[p * n + q] = 0.0;
                        a[q * n + p] = 0.0;
                    }
                }
            }
            (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max)
        }
    }
}
