//! The stochastic approximation engine: the recursion
//! `x_t = x_{t−1} − γ_t (∇f(x_{t−1}) + ζ_t + m_t)` with polynomially decaying
//! steps, online Polyak–Ruppert averaging, geometric checkpointing, and
//! replication across independent random-number streams.
//!
//! Models plug in through [`StochasticOracle`], which bundles the mean
//! gradient with the two noise parts: an i.i.d. zero-mean component `ζ`
//! (typically heavy-tailed; see [`crate::stable::NoiseLaw`]) and an optional
//! state-dependent martingale-difference component `m`.  Oracles that carry an
//! `m` rule must declare a constant `K` for which
//! `E[|m|² | past] ≤ K (1 + |x|²)`; the engine accumulates the empirical ratio
//! along the run and reports whether the declared bound held within sampling
//! error.
//!
//! Heavy-tailed draws can legitimately overflow the iterate; that is reported
//! as a [`SgdError::Divergence`] carrying the first bad step, and
//! [`replicate`] records such replications as censored rather than failing the
//! whole batch.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::RngStream;
use crate::stable::StableError;
use crate::stats::Welford;


/// Errors from schedule construction, run validation, and the recursion
/// itself.
#[derive(Debug, Error)]
pub enum SgdError {
    #[error("invalid parameter {name}: {reason} (got {value})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid noise specification: {0}")]
    Noise(#[from] StableError),
    #[error(
        "iterate diverged: non-finite value first encountered at step {step} \
         (heavy-tailed draws can overflow; treat this replication as censored)"
    )]
    Divergence { step: u64 },
}

/// Polynomially decaying step-size schedule `γ_t = γ₀ (t + t₀)^{−ρ}`.
///
/// The exponent must satisfy `ρ ∈ (0, 1)` (strictly), which makes the
/// schedule strictly decreasing and keeps `γ_t ≍ t^{−ρ}` for any fixed
/// offset `t₀ ≥ 0`.  The offset tames the first steps for stiff problems
/// without changing asymptotics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    gamma0: f64,
    rho: f64,
    t0: u64,
}

impl StepSchedule {
    pub fn new(gamma0: f64, rho: f64, t0: u64) -> Result<Self, SgdError> {
        if !gamma0.is_finite() || gamma0 <= 0.0 {
            return Err(SgdError::InvalidParameter {
                name: "gamma0",
                value: gamma0,
                reason: "step-size scale must be positive and finite",
            });
        }
        if !rho.is_finite() || rho <= 0.0 || rho >= 1.0 {
            return Err(SgdError::InvalidParameter {
                name: "rho",
                value: rho,
                reason: "step-size exponent rho must lie in the open interval (0, 1)",
            });
        }
        Ok(StepSchedule { gamma0, rho, t0 })
    }

    /// `γ_t` for step `t ≥ 1`.
    pub fn gamma(&self, t: u64) -> f64 {
        self.gamma0 * ((t + self.t0) as f64).powf(-self.rho)
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn t0(&self) -> u64 {
        self.t0
    }
}

/// Strictly increasing iteration indices at which the engine records state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointPlan {
    times: Vec<u64>,
}

impl CheckpointPlan {
    /// Geometric plan `⌈ratio^k⌉` deduplicated, always ending at `t_max`,
    /// giving O(log `t_max`) evenly log-spaced abscissae for rate fits.
    pub fn geometric(t_max: u64, ratio: f64) -> Result<Self, SgdError> {
        if t_max < 1 {
            return Err(SgdError::InvalidParameter {
                name: "t_max",
                value: t_max as f64,
                reason: "need at least one iteration",
            });
        }
        if !ratio.is_finite() || ratio <= 1.0 {
            return Err(SgdError::InvalidParameter {
                name: "ratio",
                value: ratio,
                reason: "checkpoint ratio must exceed 1",
            });
        }
        let mut times = Vec::new();
        let mut value = 1.0f64;
        loop {
            let t = value.ceil() as u64;
            if t >= t_max {
                break;
            }
            if times.last() != Some(&t) {
                times.push(t);
            }
            value *= ratio;
        }
        times.push(t_max);
        Ok(CheckpointPlan { times })
    }

    /// Every iteration from 1 to `t_max`; intended for small-T tests.
    pub fn dense(t_max: u64) -> Result<Self, SgdError> {
        if t_max < 1 {
            return Err(SgdError::InvalidParameter {
                name: "t_max",
                value: t_max as f64,
                reason: "need at least one iteration",
            });
        }
        Ok(CheckpointPlan {
            times: (1..=t_max).collect(),
        })
    }

    /// A plan from explicit times (must be strictly increasing, starting
    /// at 1 or later).
    pub fn from_times(times: Vec<u64>) -> Result<Self, SgdError> {
        if times.is_empty() || times[0] < 1 {
            return Err(SgdError::InvalidParameter {
                name: "times",
                value: times.first().copied().unwrap_or(0) as f64,
                reason: "checkpoint times must start at 1 or later",
            });
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SgdError::InvalidParameter {
                name: "times",
                value: times.len() as f64,
                reason: "checkpoint times must be strictly increasing",
            });
        }
        Ok(CheckpointPlan { times })
    }

    pub fn times(&self) -> &[u64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// A model's view of one stochastic gradient step.
///
/// Implementations must satisfy two stream contracts so that runs are
/// reproducible and decomposable:
/// 1. [`draw`](Self::draw) consumes a fixed number of stream values per call,
///    independent of `x`;
/// 2. [`draw_decomposed`](Self::draw_decomposed) consumes exactly the same
///    stream values as `draw` and returns the identical total gradient along
///    with its `ζ` and `m` parts, so `g = ∇f(x) + ζ + m` holds to float
///    accuracy.
pub trait StochasticOracle: Sync {
    /// Problem dimension.
    fn dim(&self) -> usize;

    /// Population gradient `∇f(x)` (no randomness).
    fn mean_grad(&self, x: &[f64], out: &mut [f64]);

    /// Draws one stochastic gradient `g = ∇f(x) + ζ + m` into `g`.
    fn draw(&self, x: &[f64], rng: &mut RngStream, g: &mut [f64]);

    /// As [`draw`](Self::draw), also exposing the noise decomposition.
    fn draw_decomposed(
        &self,
        x: &[f64],
        rng: &mut RngStream,
        g: &mut [f64],
        zeta: &mut [f64],
        m: &mut [f64],
    );

    /// The constant `K` declared for the state-dependent noise bound
    /// `E[|m|² | past] ≤ K (1 + |x|²)`, or `None` when the oracle has no `m`
    /// component and the bound is vacuous.
    fn declared_k(&self) -> Option<f64> {
        None
    }

    /// The population optimum when known in closed form.
    fn x_star(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Empirical check of the declared state-dependent noise bound: running
/// statistics of `|m_t|² / (1 + |x_{t−1}|²)` over the whole run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MSpotCheck {
    pub samples: u64,
    pub mean: f64,
    pub std_error: f64,
    pub declared_k: f64,
    /// `mean ≤ declared_k + 3·std_error`.
    pub within_bound: bool,
}

/// Record of one trajectory at the checkpoint times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdTrace {
    pub seed: u64,
    pub stream_id: u64,
    /// Strictly increasing iteration indices.
    pub checkpoints: Vec<u64>,
    /// `x_t` at each checkpoint.
    pub iterates: Vec<Vec<f64>>,
    /// Polyak–Ruppert average `x̄_t = (x₀ + … + x_{t−1})/t` at each
    /// checkpoint, maintained online via
    /// `x̄_{t+1} = x̄_t + (x_t − x̄_t)/(t+1)`.
    pub pr_averages: Vec<Vec<f64>>,
    /// `|x_t − x*|` (ℓ2) when the oracle knows its optimum.
    pub errors: Option<Vec<f64>>,
    /// `|x̄_t − x*|` (ℓ2) when the oracle knows its optimum.
    pub pr_errors: Option<Vec<f64>>,
    /// Present when the oracle declared a state-dependent noise constant.
    pub m_spot_check: Option<MSpotCheck>,
}

fn l2_norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn l2_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Runs the recursion for `t_max` steps from `x0`, recording state at the
/// checkpoint times.
///
/// Per step `t`: the engine first folds `x_{t−1}` into the running average
/// (so the recorded pair at a checkpoint is `(x_t, x̄_t)` with
/// `x̄_t = (x₀ + … + x_{t−1})/t`), then draws the stochastic gradient at
/// `x_{t−1}` and applies `x_t = x_{t−1} − γ_t g`.  A non-finite iterate
/// aborts with [`SgdError::Divergence`] carrying the first bad step.
pub fn sgd_run(
    oracle: &dyn StochasticOracle,
    x0: &[f64],
    schedule: StepSchedule,
    t_max: u64,
    plan: &CheckpointPlan,
    rng: &mut RngStream,
) -> Result<SgdTrace, SgdError> {
    let n = oracle.dim();
    if x0.len() != n {
        return Err(SgdError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        });
    }
    if t_max < 1 {
        return Err(SgdError::InvalidParameter {
            name: "t_max",
            value: t_max as f64,
            reason: "need at least one iteration",
        });
    }
    if let Some(&last) = plan.times().last() {
        if last > t_max {
            return Err(SgdError::InvalidParameter {
                name: "checkpoints",
                value: last as f64,
                reason: "checkpoint beyond the final iteration",
            });
        }
    }
    let x_star = oracle.x_star();
    if let Some(ref s) = x_star {
        if s.len() != n {
            return Err(SgdError::DimensionMismatch {
                expected: n,
                got: s.len(),
            });
        }
    }
    let declared_k = oracle.declared_k();

    let mut x = x0.to_vec();
    let mut xbar = x0.to_vec();
    let mut g = vec![0.0; n];
    let mut zeta = vec![0.0; n];
    let mut m = vec![0.0; n];
    let mut spot = Welford::default();

    let cap = plan.len();
    let mut checkpoints = Vec::with_capacity(cap);
    let mut iterates = Vec::with_capacity(cap);
    let mut pr_averages = Vec::with_capacity(cap);
    let mut errors = x_star.as_ref().map(|_| Vec::with_capacity(cap));
    let mut pr_errors = x_star.as_ref().map(|_| Vec::with_capacity(cap));

    let mut next_cp = 0usize;
    for t in 1..=t_max {
        // x̄_t from x_{t−1} (the running mean absorbs the pre-step iterate).
        let inv_t = 1.0 / t as f64;
        for i in 0..n {
            xbar[i] += (x[i] - xbar[i]) * inv_t;
        }
        if declared_k.is_some() {
            let x_norm_sq = l2_norm_sq(&x);
            oracle.draw_decomposed(&x, rng, &mut g, &mut zeta, &mut m);
            spot.push(l2_norm_sq(&m) / (1.0 + x_norm_sq));
        } else {
            oracle.draw(&x, rng, &mut g);
        }
        let gamma = schedule.gamma(t);
        let mut finite = true;
        for i in 0..n {
            x[i] -= gamma * g[i];
            finite &= x[i].is_finite();
        }
        if !finite {
            return Err(SgdError::Divergence { step: t });
        }
        if next_cp < plan.times().len() && plan.times()[next_cp] == t {
            checkpoints.push(t);
            iterates.push(x.clone());
            pr_averages.push(xbar.clone());
            if let Some(ref s) = x_star {
                errors.as_mut().expect("allocated").push(l2_dist(&x, s));
                pr_errors.as_mut().expect("allocated").push(l2_dist(&xbar, s));
            }
            next_cp += 1;
        }
    }

    let m_spot_check = declared_k.map(|k| MSpotCheck {
        samples: spot.count(),
        mean: spot.mean(),
        std_error: spot.std_error(),
        declared_k: k,
        within_bound: spot.mean() <= k + 3.0 * spot.std_error(),
    });

    Ok(SgdTrace {
        seed: rng.seed(),
        stream_id: rng.stream_id(),
        checkpoints,
        iterates,
        pr_averages,
        errors,
        pr_errors,
        m_spot_check,
    })
}

/// The scaled averaged error `t^{1−1/α} (x̄_t − x*)` at every checkpoint.
///
/// `α` must lie in `(1, 2]`; at `α = 2` the factor is the classical `√t`.
pub fn scaled_pr_error(
    trace: &SgdTrace,
    alpha: f64,
    x_star: &[f64],
) -> Result<Vec<(u64, Vec<f64>)>, SgdError> {
    if !alpha.is_finite() || alpha <= 1.0 || alpha > 2.0 {
        return Err(SgdError::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "scaling exponent requires alpha in (1, 2]",
        });
    }
    let exponent = 1.0 - 1.0 / alpha;
    let mut out = Vec::with_capacity(trace.checkpoints.len());
    for (idx, &t) in trace.checkpoints.iter().enumerate() {
        let xbar = &trace.pr_averages[idx];
        if xbar.len() != x_star.len() {
            return Err(SgdError::DimensionMismatch {
                expected: xbar.len(),
                got: x_star.len(),
            });
        }
        let factor = (t as f64).powf(exponent);
        out.push((
            t,
            xbar.iter()
                .zip(x_star)
                .map(|(a, s)| factor * (a - s))
                .collect(),
        ));
    }
    Ok(out)
}

/// A replication censored by divergence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoredReplication {
    /// Replication index within the batch (stream `base + index`).
    pub index: usize,
    /// First step at which a non-finite iterate appeared.
    pub step: u64,
}

/// Outcome of a replicated run: completed traces in replication order with
/// diverged replications censored (recorded, not dropped silently).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replicated {
    /// One slot per replication; `None` marks a censored replication.
    pub traces: Vec<Option<SgdTrace>>,
    pub censored: Vec<CensoredReplication>,
}

impl Replicated {
    /// Completed traces, in replication order.
    pub fn uncensored(&self) -> impl Iterator<Item = &SgdTrace> {
        self.traces.iter().filter_map(|t| t.as_ref())
    }

    pub fn censored_count(&self) -> usize {
        self.censored.len()
    }

    pub fn replication_count(&self) -> usize {
        self.traces.len()
    }
}

/// Runs `replications` independent trajectories on streams
/// `base_stream .. base_stream + replications − 1` of the given seed.
///
/// Replications are embarrassingly parallel and the result is identical for
/// any degree of parallelism: each replication's randomness depends only on
/// its stream id, and results are collected in replication order.
pub fn replicate(
    oracle: &dyn StochasticOracle,
    x0: &[f64],
    schedule: StepSchedule,
    t_max: u64,
    plan: &CheckpointPlan,
    seed: u64,
    base_stream: u64,
    replications: usize,
) -> Result<Replicated, SgdError> {
    if replications < 1 {
        return Err(SgdError::InvalidParameter {
            name: "replications",
            value: replications as f64,
            reason: "need at least one replication",
        });
    }
    if base_stream.checked_add(replications as u64 - 1).is_none() {
        return Err(SgdError::InvalidParameter {
            name: "base_stream",
            value: base_stream as f64,
            reason: "stream id range overflows",
        });
    }
    let results: Vec<Result<SgdTrace, SgdError>> = (0..replications)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, base_stream + i as u64);
            sgd_run(oracle, x0, schedule, t_max, plan, &mut rng)
        })
        .collect();
    let mut traces = Vec::with_capacity(replications);
    let mut censored = Vec::new();
    for (index, res) in results.into_iter().enumerate() {
        match res {
            Ok(trace) => traces.push(Some(trace)),
            Err(SgdError::Divergence { step }) => {
                traces.push(None);
                censored.push(CensoredReplication { index, step });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(Replicated { traces, censored })
}

/// Quadratic test model `f(x) = ½ (x − x*)ᵀ A (x − x*)` with i.i.d. additive
/// noise `ζ` per coordinate and no state-dependent component.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    a: crate::ppd::SymMatrix,
    x_star: Vec<f64>,
    noise: crate::stable::NoiseLaw,
    /// Precomputed `A x*` so the hot loop needs no scratch vector.
    ax_star: Vec<f64>,
}

impl QuadraticModel {
    pub fn new(
        a: crate::ppd::SymMatrix,
        x_star: Vec<f64>,
        noise: crate::stable::NoiseLaw,
    ) -> Result<Self, SgdError> {
        if a.n() != x_star.len() {
            return Err(SgdError::DimensionMismatch {
                expected: a.n(),
                got: x_star.len(),
            });
        }
        noise.validate_zero_mean()?;
        let mut ax_star = vec![0.0; a.n()];
        a.mul_vec(&x_star, &mut ax_star);
        Ok(QuadraticModel {
            a,
            x_star,
            noise,
            ax_star,
        })
    }

    pub fn matrix(&self) -> &crate::ppd::SymMatrix {
        &self.a
    }

    pub fn noise(&self) -> &crate::stable::NoiseLaw {
        &self.noise
    }
}

impl StochasticOracle for QuadraticModel {
    fn dim(&self) -> usize {
        self.x_star.len()
    }

    fn mean_grad(&self, x: &[f64], out: &mut [f64]) {
        // A(x − x*) = A x − A x*, with A x* precomputed in the same
        // summation order so the optimum maps to an exact zero gradient.
        self.a.mul_vec(x, out);
        for (o, b) in out.iter_mut().zip(&self.ax_star) {
            *o -= b;
        }
    }

    fn draw(&self, x: &[f64], rng: &mut RngStream, g: &mut [f64]) {
        self.mean_grad(x, g);
        for gi in g.iter_mut() {
            *gi += self.noise.draw(rng);
        }
    }

    fn draw_decomposed(
        &self,
        x: &[f64],
        rng: &mut RngStream,
        g: &mut [f64],
        zeta: &mut [f64],
        m: &mut [f64],
    ) {
        self.mean_grad(x, g);
        for i in 0..g.len() {
            zeta[i] = self.noise.draw(rng);
            g[i] += zeta[i];
            m[i] = 0.0;
        }
    }

    fn x_star(&self) -> Option<Vec<f64>> {
        Some(self.x_star.clone())
    }
}
