//! Streaming gradient oracles for two regression families with heavy-tailed
//! response noise: ordinary least squares and ridge-regularized generalized
//! linear models.
//!
//! Both models observe `(z_t, y_t)` with Gaussian covariates `z = C g`
//! (`g` standard normal, so the second moment `Σ = CCᵀ` is known exactly)
//! and responses `y = zᵀβ₀ + ε` with zero-mean, possibly infinite-variance
//! `ε`.  Each oracle exposes the exact split of its stochastic gradient into
//!
//! * `ζ` — i.i.d. noise independent of the iterate (the response part), and
//! * `m` — a zero-conditional-mean state-dependent part (the covariate part),
//!
//! with `g = ∇f(x) + ζ + m` holding as an algebraic identity.
//!
//! GLM population expectations `E[z ψ′(zᵀx)]` have no closed form for the
//! logistic link, so they are evaluated on a fixed panel of covariate draws
//! (common random numbers) taken from the reserved stream id
//! [`PANEL_STREAM`]; this makes `∇f`, [`find_glm_optimum`], and the GLM noise
//! decomposition deterministic functions of the seed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ppd::{spectral_norm, SymMatrix};
use crate::rng::RngStream;
use crate::sgd::StochasticOracle;
use crate::stable::{NoiseLaw, StableError};
use crate::stats::Welford;


/// Stream id reserved for the GLM covariate panel.  Replicated runs use
/// consecutive ids starting from a small base, so the top id never collides.
pub const PANEL_STREAM: u64 = u64::MAX;

/// Default panel size for GLM expectation evaluation.
pub const DEFAULT_PANEL_SIZE: usize = 100_000;

/// Default iteration budget for [`find_glm_optimum`].
pub const DEFAULT_OPTIMUM_BUDGET: u64 = 200_000;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid parameter {name}: {reason} (got {value})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid noise specification: {0}")]
    Noise(#[from] StableError),
    #[error(
        "covariate second moment must be positive definite \
         (smallest eigenvalue {lambda_min:.3e})"
    )]
    Covariance { lambda_min: f64 },
    #[error("expectation estimation failed: {reason}")]
    Estimation { reason: String },
    #[error(
        "optimum search did not reach tolerance {tol:.3e} within {iterations} \
         iterations (achieved gradient norm {achieved:.3e})"
    )]
    NonConvergence {
        achieved: f64,
        tol: f64,
        iterations: u64,
    },
}

/// Square factor `C` of the covariate second moment: covariates are drawn as
/// `z = C g` with `g` i.i.d. standard normal, so `E[zzᵀ] = CCᵀ` exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovFactor {
    n: usize,
    /// Row-major `n × n` entries.
    flat: Vec<f64>,
}

impl CovFactor {
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let n = rows.len();
        if n == 0 {
            return Err(ModelError::Dimension { expected: 1, got: 0 });
        }
        let mut flat = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(ModelError::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            for &v in row {
                if !v.is_finite() {
                    return Err(ModelError::InvalidParameter {
                        name: "cov_factor",
                        value: v,
                        reason: "entries must be finite",
                    });
                }
                flat.push(v);
            }
        }
        Ok(CovFactor { n, flat })
    }

    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "identity requires n >= 1");
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            flat[i * n + i] = 1.0;
        }
        CovFactor { n, flat }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `out = C g`.
    pub fn apply(&self, g: &[f64], out: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.flat[i * n..(i + 1) * n];
            out[i] = row.iter().zip(g).map(|(c, v)| c * v).sum();
        }
    }

    /// The exact second moment `Σ = CCᵀ`.
    pub fn second_moment(&self) -> SymMatrix {
        let n = self.n;
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let ri = &self.flat[i * n..(i + 1) * n];
                let rj = &self.flat[j * n..(j + 1) * n];
                rows[i][j] = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
            }
        }
        SymMatrix::new(&rows).expect("CCᵀ is symmetric by construction")
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stack scratch for the per-step covariate vector in the hot draw path.
const STACK_DIM: usize = 32;

fn with_z_buffer<R>(n: usize, f: impl FnOnce(&mut [f64]) -> R) -> R {
    if n <= STACK_DIM {
        let mut buf = [0.0f64; STACK_DIM];
        f(&mut buf[..n])
    } else {
        let mut buf = vec![0.0f64; n];
        f(&mut buf)
    }
}

/// Validates that `Σ` is positive definite and returns its smallest
/// eigenvalue.
fn require_spd(sigma: &SymMatrix) -> Result<f64, ModelError> {
    let lambda_min = sigma.lambda_min();
    if lambda_min <= 0.0 {
        return Err(ModelError::Covariance { lambda_min });
    }
    Ok(lambda_min)
}

/// Ordinary least squares: `f(x) = ½ E[(zᵀx − y)²]`, population optimum
/// `x* = β₀`.
///
/// Per step the oracle draws `(z, ε)` (`n` standard normals, then one noise
/// draw), forms `y = zᵀβ₀ + ε`, and returns `g = z(zᵀx − y)` with the split
/// `ζ = Σβ₀ − zy` and `m = (zzᵀ − Σ)x`.
///
/// The declared state-noise constant uses the exact Gaussian fourth moment
/// `E|z|⁴ = (tr Σ)² + 2 tr(Σ²)`: from `‖zzᵀ − Σ‖₂ ≤ |z|² + ‖Σ‖₂` one gets
/// `E[|m|² | x] ≤ (2E|z|⁴ + 2‖Σ‖₂²)(1 + |x|²)`.
#[derive(Debug, Clone)]
pub struct OlsModel {
    beta0: Vec<f64>,
    factor: CovFactor,
    eps: NoiseLaw,
    sigma: SymMatrix,
    /// `Σβ₀ = E[zy]`, precomputed so the optimum has an exactly zero
    /// population gradient.
    sigma_beta0: Vec<f64>,
    declared_k: f64,
}

impl OlsModel {
    pub fn new(beta0: Vec<f64>, factor: CovFactor, eps: NoiseLaw) -> Result<Self, ModelError> {
        if beta0.len() != factor.n() {
            return Err(ModelError::Dimension {
                expected: factor.n(),
                got: beta0.len(),
            });
        }
        eps.validate_zero_mean()?;
        let sigma = factor.second_moment();
        require_spd(&sigma)?;
        let mut sigma_beta0 = vec![0.0; beta0.len()];
        sigma.mul_vec(&beta0, &mut sigma_beta0);

        let n = sigma.n();
        let s2 = spectral_norm(&sigma);
        let tr: f64 = (0..n).map(|i| sigma.entry(i, i)).sum();
        let tr_sq: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| sigma.entry(i, j) * sigma.entry(i, j))
            .sum();
        let fourth = tr * tr + 2.0 * tr_sq;
        let declared_k = 2.0 * fourth + 2.0 * s2 * s2;

        Ok(OlsModel {
            beta0,
            factor,
            eps,
            sigma,
            sigma_beta0,
            declared_k,
        })
    }

    pub fn second_moment(&self) -> &SymMatrix {
        &self.sigma
    }

    /// The Hessian `Σ`, independent of `x`.
    pub fn hessian_at(&self, _x: &[f64]) -> SymMatrix {
        self.sigma.clone()
    }
}

impl StochasticOracle for OlsModel {
    fn dim(&self) -> usize {
        self.beta0.len()
    }

    fn mean_grad(&self, x: &[f64], out: &mut [f64]) {
        self.sigma.mul_vec(x, out);
        for (o, b) in out.iter_mut().zip(&self.sigma_beta0) {
            *o -= b;
        }
    }

    fn draw(&self, x: &[f64], rng: &mut RngStream, g: &mut [f64]) {
        let n = self.beta0.len();
        with_z_buffer(n, |z| {
            for gi in g.iter_mut() {
                *gi = rng.standard_normal();
            }
            self.factor.apply(g, z);
            let eps = self.eps.draw(rng);
            let zx = dot(z, x);
            let y = dot(z, &self.beta0) + eps;
            let s = zx - y;
            for i in 0..n {
                g[i] = z[i] * s;
            }
        })
    }

    fn draw_decomposed(
        &self,
        x: &[f64],
        rng: &mut RngStream,
        g: &mut [f64],
        zeta: &mut [f64],
        m: &mut [f64],
    ) {
        let n = self.beta0.len();
        // Scratch layout: g temporarily holds Σx, zeta the Gaussian vector,
        // m the covariate z; all are overwritten with their outputs below.
        self.sigma.mul_vec(x, g);
        for zi in zeta.iter_mut() {
            *zi = rng.standard_normal();
        }
        self.factor.apply(zeta, m);
        let eps = self.eps.draw(rng);
        let zx = dot(m, x);
        let y = dot(m, &self.beta0) + eps;
        let s = zx - y;
        for i in 0..n {
            let z_i = m[i];
            let sigma_x_i = g[i];
            g[i] = z_i * s;
            zeta[i] = self.sigma_beta0[i] - z_i * y;
            m[i] = z_i * zx - sigma_x_i;
        }
    }

    fn declared_k(&self) -> Option<f64> {
        Some(self.declared_k)
    }

    fn x_star(&self) -> Option<Vec<f64>> {
        Some(self.beta0.clone())
    }
}

/// One decomposed OLS gradient draw `(g, ζ, m)` with
/// `g = ∇f(x) + ζ + m` exact up to float rounding.
pub fn ols_noise_step(
    spec: &OlsModel,
    x: &[f64],
    rng: &mut RngStream,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let n = spec.dim();
    assert_eq!(x.len(), n, "iterate dimension mismatch");
    let mut g = vec![0.0; n];
    let mut zeta = vec![0.0; n];
    let mut m = vec![0.0; n];
    spec.draw_decomposed(x, rng, &mut g, &mut zeta, &mut m);
    (g, zeta, m)
}

/// Built-in cumulant generating functions ψ for the GLM objective
/// `f(x) = E[ψ(zᵀx) − y zᵀx] + (λ/2)|x|²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cgf {
    /// `ψ(s) = ln(1 + eˢ)` (logistic regression); evaluated in a form that
    /// never overflows.
    Logistic,
    /// `ψ(s) = s²/2`; reduces the GLM gradient to OLS plus the ridge term.
    Linear,
}

impl Cgf {
    pub fn psi(&self, s: f64) -> f64 {
        match self {
            Cgf::Linear => 0.5 * s * s,
            Cgf::Logistic => {
                if s > 0.0 {
                    s + (-s).exp().ln_1p()
                } else {
                    s.exp().ln_1p()
                }
            }
        }
    }

    pub fn psi_prime(&self, s: f64) -> f64 {
        match self {
            Cgf::Linear => s,
            Cgf::Logistic => {
                if s >= 0.0 {
                    1.0 / (1.0 + (-s).exp())
                } else {
                    let e = s.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    pub fn psi_second(&self, s: f64) -> f64 {
        match self {
            Cgf::Linear => 1.0,
            Cgf::Logistic => {
                let e = (-s.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    /// Global upper bound on ψ″, used for the deterministic descent step.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            Cgf::Linear => 1.0,
            Cgf::Logistic => 0.25,
        }
    }
}

/// Cached GLM optimum: the zero of the population gradient on the fixed
/// panel, with the achieved gradient norm and the tolerance requested.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmOptimum {
    pub x_star: Vec<f64>,
    pub grad_norm: f64,
    pub tol: f64,
}

/// Ridge-regularized GLM: `f(x) = E[ψ(zᵀx) − y zᵀx] + (λ/2)|x|²` with
/// responses `y = zᵀβ₀ + ε`.
///
/// Per step the oracle draws `(z, ε)` exactly like [`OlsModel`] and returns
/// `g = z ψ′(zᵀx) − z y + λx` with the split `ζ = Σβ₀ − zy` and
/// `m = z ψ′(zᵀx) − E[z ψ′(zᵀx)]`; the expectation is a fixed-panel average,
/// making the decomposition (and `∇f`) deterministic given the seed.
///
/// The decomposition costs one panel sweep, so unlike OLS the model does not
/// declare a state-noise constant to the engine; use [`glm_noise_step`] for
/// diagnostics instead.
#[derive(Debug, Clone)]
pub struct GlmModel {
    cgf: Cgf,
    lambda: f64,
    beta0: Vec<f64>,
    factor: CovFactor,
    eps: NoiseLaw,
    sigma: SymMatrix,
    sigma_beta0: Vec<f64>,
    /// Fixed covariate panel, row-major `panel_size × n`.
    panel: Vec<f64>,
    panel_size: usize,
    panel_sigma: SymMatrix,
    x_star_cache: Option<GlmOptimum>,
}

impl GlmModel {
    pub fn new(
        cgf: Cgf,
        lambda: f64,
        beta0: Vec<f64>,
        factor: CovFactor,
        eps: NoiseLaw,
        panel_size: usize,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(ModelError::InvalidParameter {
                name: "lambda",
                value: lambda,
                reason: "ridge weight must be positive and finite",
            });
        }
        if beta0.len() != factor.n() {
            return Err(ModelError::Dimension {
                expected: factor.n(),
                got: beta0.len(),
            });
        }
        if panel_size < 2 {
            return Err(ModelError::InvalidParameter {
                name: "panel_size",
                value: panel_size as f64,
                reason: "expectation panel needs at least two draws",
            });
        }
        eps.validate_zero_mean()?;
        let sigma = factor.second_moment();
        require_spd(&sigma)?;
        let n = beta0.len();
        let mut sigma_beta0 = vec![0.0; n];
        sigma.mul_vec(&beta0, &mut sigma_beta0);

        let mut rng = RngStream::new(seed, PANEL_STREAM);
        let mut panel = vec![0.0; panel_size * n];
        let mut gauss = vec![0.0; n];
        let mut moment = vec![vec![0.0; n]; n];
        for p in 0..panel_size {
            for gi in gauss.iter_mut() {
                *gi = rng.standard_normal();
            }
            let row = &mut panel[p * n..(p + 1) * n];
            factor.apply(&gauss, row);
            for i in 0..n {
                for j in 0..n {
                    moment[i][j] += row[i] * row[j];
                }
            }
        }
        for row in moment.iter_mut() {
            for v in row.iter_mut() {
                *v /= panel_size as f64;
            }
        }
        let panel_sigma = SymMatrix::new(&moment).expect("panel moment is symmetric");

        Ok(GlmModel {
            cgf,
            lambda,
            beta0,
            factor,
            eps,
            sigma,
            sigma_beta0,
            panel,
            panel_size,
            panel_sigma,
            x_star_cache: None,
        })
    }

    pub fn cgf(&self) -> Cgf {
        self.cgf
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The exact covariate second moment `Σ = CCᵀ`.
    pub fn second_moment(&self) -> &SymMatrix {
        &self.sigma
    }

    /// The empirical second moment of the fixed panel (the matrix the
    /// deterministic optimum computation actually sees).
    pub fn panel_second_moment(&self) -> &SymMatrix {
        &self.panel_sigma
    }

    pub fn panel_size(&self) -> usize {
        self.panel_size
    }

    /// Attaches a computed optimum so the oracle reports `x*` to the engine.
    pub fn with_x_star(mut self, optimum: GlmOptimum) -> Self {
        self.x_star_cache = Some(optimum);
        self
    }

    pub fn x_star_info(&self) -> Option<&GlmOptimum> {
        self.x_star_cache.as_ref()
    }

    /// Panel average `E[z ψ′(zᵀx)]` into `out`.
    fn panel_mean_psi_prime(&self, x: &[f64], out: &mut [f64]) {
        let n = self.beta0.len();
        out.fill(0.0);
        for p in 0..self.panel_size {
            let z = &self.panel[p * n..(p + 1) * n];
            let w = self.cgf.psi_prime(dot(z, x));
            for i in 0..n {
                out[i] += z[i] * w;
            }
        }
        let inv = 1.0 / self.panel_size as f64;
        for o in out.iter_mut() {
            *o *= inv;
        }
    }

    /// Monte-Carlo Hessian estimate `E[zzᵀ ψ″(zᵀx)] + λI` from fresh draws,
    /// with a per-entry standard error.
    pub fn hessian_at(
        &self,
        x: &[f64],
        draws: usize,
        rng: &mut RngStream,
    ) -> Result<HessianEstimate, ModelError> {
        let n = self.beta0.len();
        if x.len() != n {
            return Err(ModelError::Dimension {
                expected: n,
                got: x.len(),
            });
        }
        if draws < 2 {
            return Err(ModelError::InvalidParameter {
                name: "draws",
                value: draws as f64,
                reason: "need at least two draws for a standard error",
            });
        }
        // One accumulator per upper-triangle entry; samples are exactly
        // symmetric so the lower triangle mirrors them.
        let mut acc = vec![Welford::default(); n * (n + 1) / 2];
        let mut gauss = vec![0.0; n];
        let mut z = vec![0.0; n];
        for _ in 0..draws {
            for gi in gauss.iter_mut() {
                *gi = rng.standard_normal();
            }
            self.factor.apply(&gauss, &mut z);
            let w = self.cgf.psi_second(dot(&z, x));
            let mut k = 0;
            for i in 0..n {
                for j in i..n {
                    acc[k].push(z[i] * z[j] * w);
                    k += 1;
                }
            }
        }
        let mut rows = vec![vec![0.0; n]; n];
        let mut std_errors = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let mean = acc[k].mean();
                if !mean.is_finite() {
                    return Err(ModelError::Estimation {
                        reason: format!("non-finite Hessian entry ({i}, {j})"),
                    });
                }
                let se = acc[k].std_error();
                let value = if i == j { mean + self.lambda } else { mean };
                rows[i][j] = value;
                rows[j][i] = value;
                std_errors[i * n + j] = se;
                std_errors[j * n + i] = se;
                k += 1;
            }
        }
        Ok(HessianEstimate {
            matrix: SymMatrix::new(&rows).expect("estimate is symmetric"),
            std_errors,
            draws: draws as u64,
        })
    }
}

impl StochasticOracle for GlmModel {
    fn dim(&self) -> usize {
        self.beta0.len()
    }

    fn mean_grad(&self, x: &[f64], out: &mut [f64]) {
        self.panel_mean_psi_prime(x, out);
        for i in 0..out.len() {
            out[i] += self.lambda * x[i] - self.sigma_beta0[i];
        }
    }

    fn draw(&self, x: &[f64], rng: &mut RngStream, g: &mut [f64]) {
        let n = self.beta0.len();
        with_z_buffer(n, |z| {
            for gi in g.iter_mut() {
                *gi = rng.standard_normal();
            }
            self.factor.apply(g, z);
            let eps = self.eps.draw(rng);
            let zx = dot(z, x);
            let y = dot(z, &self.beta0) + eps;
            let w = self.cgf.psi_prime(zx);
            for i in 0..n {
                g[i] = z[i] * w - z[i] * y + self.lambda * x[i];
            }
        })
    }

    fn draw_decomposed(
        &self,
        x: &[f64],
        rng: &mut RngStream,
        g: &mut [f64],
        zeta: &mut [f64],
        m: &mut [f64],
    ) {
        let n = self.beta0.len();
        // Scratch layout: m holds the panel expectation, zeta the Gaussian
        // vector; the covariate z needs its own buffer.
        self.panel_mean_psi_prime(x, m);
        with_z_buffer(n, |z| {
            for zi in zeta.iter_mut() {
                *zi = rng.standard_normal();
            }
            self.factor.apply(zeta, z);
            let eps = self.eps.draw(rng);
            let zx = dot(z, x);
            let y = dot(z, &self.beta0) + eps;
            let w = self.cgf.psi_prime(zx);
            for i in 0..n {
                let expectation_i = m[i];
                g[i] = z[i] * w - z[i] * y + self.lambda * x[i];
                zeta[i] = self.sigma_beta0[i] - z[i] * y;
                m[i] = z[i] * w - expectation_i;
            }
        })
    }

    fn x_star(&self) -> Option<Vec<f64>> {
        self.x_star_cache.as_ref().map(|o| o.x_star.clone())
    }
}

/// One decomposed GLM gradient draw `(g, ζ, m)`.
///
/// Fails with an estimation error when the expectation or the draw is
/// non-finite (e.g. a linear link at an enormous iterate).
pub fn glm_noise_step(
    spec: &GlmModel,
    x: &[f64],
    rng: &mut RngStream,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), ModelError> {
    let n = spec.dim();
    if x.len() != n {
        return Err(ModelError::Dimension {
            expected: n,
            got: x.len(),
        });
    }
    let mut g = vec![0.0; n];
    let mut zeta = vec![0.0; n];
    let mut m = vec![0.0; n];
    spec.draw_decomposed(x, rng, &mut g, &mut zeta, &mut m);
    if g.iter().chain(&zeta).chain(&m).any(|v| !v.is_finite()) {
        let max_x = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        return Err(ModelError::Estimation {
            reason: format!(
                "non-finite gradient decomposition at |x|_inf = {max_x:.3e} \
                 (cgf {:?})",
                spec.cgf
            ),
        });
    }
    Ok((g, zeta, m))
}

/// Deterministic fixed-step gradient descent for the GLM optimum on the
/// fixed panel: runs until `|∇f| < tol` or the iteration budget is spent.
///
/// The step is `1/L` with `L = sup ψ″ · ‖Σ̂‖₂ + λ` (`Σ̂` the panel second
/// moment), which makes the strongly convex descent monotone.
pub fn find_glm_optimum(
    spec: &GlmModel,
    tol: f64,
    max_iters: u64,
) -> Result<GlmOptimum, ModelError> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(ModelError::InvalidParameter {
            name: "tol",
            value: tol,
            reason: "tolerance must be positive and finite",
        });
    }
    if max_iters < 1 {
        return Err(ModelError::InvalidParameter {
            name: "max_iters",
            value: max_iters as f64,
            reason: "need at least one iteration",
        });
    }
    let n = spec.dim();
    let step = 1.0 / (spec.cgf.curvature_bound() * spectral_norm(&spec.panel_sigma) + spec.lambda);
    let mut x = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut achieved = f64::INFINITY;
    for _ in 0..max_iters {
        spec.mean_grad(&x, &mut grad);
        let norm = dot(&grad, &grad).sqrt();
        if !norm.is_finite() {
            return Err(ModelError::Estimation {
                reason: format!("non-finite panel gradient during descent (norm {norm})"),
            });
        }
        if norm < tol {
            return Ok(GlmOptimum {
                x_star: x,
                grad_norm: norm,
                tol,
            });
        }
        achieved = norm;
        for i in 0..n {
            x[i] -= step * grad[i];
        }
    }
    Err(ModelError::NonConvergence {
        achieved,
        tol,
        iterations: max_iters,
    })
}

/// GLM Hessian estimate with per-entry sampling error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianEstimate {
    pub matrix: SymMatrix,
    /// Row-major `n × n` standard errors (0 for the deterministic `λ` on the
    /// diagonal is not separated out; errors refer to the MC part).
    pub std_errors: Vec<f64>,
    pub draws: u64,
}
