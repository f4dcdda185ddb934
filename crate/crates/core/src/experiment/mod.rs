//! Config-driven experiment orchestration.
//!
//! An experiment is described by a TOML file with five sections — `[model]`,
//! `[noise]`, `[schedule]`, `[run]`, `[analysis]` — every field of which has
//! a default, so the empty string is already a valid experiment (synthetic
//! quadratic, A = I in dimension 2, symmetrized Pareto noise with tail
//! index 1.5, ρ = 0.7). [`run_experiment`] resolves the config, replicates
//! the SGD run, analyzes the traces, and writes a self-contained run
//! directory:
//!
//! * `manifest.json` — the fully-resolved config plus seed/stream
//!   bookkeeping; feeding the manifest back to [`run_experiment`] (via
//!   [`ExperimentConfig::from_manifest_str`]) reproduces every output
//!   byte for byte;
//! * `traces.csv` — long-format iterate/average trajectories;
//! * `analysis.json` — moment curves, rate fits, and the stable-limit
//!   diagnostic when it applies;
//! * `rate-p<q>.csv` — one plot-ready file per requested moment order.
//!
//! The directory name is `run-` followed by the first 12 hex digits of the
//! SHA-256 of the resolved config, so identical experiments land in the
//! same place and sweeps self-organize. All files are written to a
//! temporary name and renamed into place; a killed run never leaves a
//! partial file that parses as complete. Nothing in the artifacts depends
//! on wall-clock time.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{
    self, fit_rate, moment_curve, stable_limit_diagnostic, AnalysisError, MomentCurve, RateFit,
    StableLimitReport,
};
use crate::models::{
    find_glm_optimum, Cgf, CovFactor, GlmModel, ModelError, OlsModel, PANEL_STREAM,
};
use crate::ppd::SymMatrix;
use crate::sgd::{
    replicate, CensoredReplication, CheckpointPlan, QuadraticModel, Replicated, SgdError,
    SgdTrace, StepSchedule, StochasticOracle,
};
use crate::stable::{NoiseLaw, ParetoParams, StableError, StableParams};


/// Version stamp for `manifest.json` and `analysis.json`.
pub const SCHEMA_VERSION: u32 = 1;

/// Version stamp for the CSV layouts (recorded in the manifest: a CSV
/// cannot carry a version field without breaking strict parsers).
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    /// The configuration is structurally invalid (references the offending
    /// field in the message).
    #[error("invalid configuration: {0}")]
    Config(String),
    /// More than half of the replications diverged; results would be
    /// dominated by censoring. No artifacts are written.
    #[error("{censored} of {total} replications diverged; refusing to analyze a majority-censored run")]
    DivergenceMajority { censored: usize, total: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sgd(#[from] SgdError),
    #[error(transparent)]
    Stable(#[from] StableError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("config serialize error: {0}")]
    TomlSer(#[from] toml::ser::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

// ------------------------------------------------------------------ config

/// Which objective the experiment optimizes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    /// Synthetic quadratic ½(x−x*)⊤A(x−x*) with additive noise.
    Quadratic,
    /// Streaming ordinary least squares with Gaussian covariates.
    Ols,
    /// Streaming ridge-regularized GLM (logistic or linear link).
    Glm,
}

/// Which additive-noise law drives the gradient oracle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Pareto, made zero-mean either by symmetrization (`symmetrize =
    /// true`, the default) or by subtracting the mean (`symmetrize =
    /// false`, needs tail index > 1).
    Pareto,
    /// α-stable via the Chambers–Mallows–Stuck sampler.
    Stable,
    /// Convenience alias for stable with α = 2; `scale` is the standard
    /// deviation.
    Gaussian,
    /// No additive noise (deterministic gradient flow).
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub kind: ModelKind,
    /// State dimension; overridden by explicit vectors/matrices below.
    pub n: usize,
    /// Quadratic curvature matrix (row-major, symmetric). Default: identity.
    pub a: Option<Vec<Vec<f64>>>,
    /// Quadratic optimum. Default: the origin.
    pub x_star: Option<Vec<f64>>,
    /// Regression ground truth for `ols` / `glm`. Default: (+1, −1, +1, …).
    pub beta0: Option<Vec<f64>>,
    /// Covariate factor C (covariates are C·g, g standard normal), so the
    /// covariance is CC⊤. Default: identity.
    pub factor: Option<Vec<Vec<f64>>>,
    /// GLM link: `"logistic"` or `"linear"`.
    pub link: Cgf,
    /// GLM ridge weight.
    pub lambda: f64,
    /// GLM calibration-panel size.
    pub panel_size: usize,
    /// Gradient-norm tolerance when solving for the GLM optimum.
    pub optimum_tol: f64,
    /// Iteration budget for the GLM optimum solve.
    pub optimum_budget: u64,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            kind: ModelKind::Quadratic,
            n: 2,
            a: None,
            x_star: None,
            beta0: None,
            factor: None,
            link: Cgf::Logistic,
            lambda: 0.1,
            panel_size: 20_000,
            optimum_tol: 1e-10,
            optimum_budget: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub law: NoiseKind,
    /// Tail index for the heavy-tailed laws.
    pub alpha: f64,
    /// Scale: Pareto scale c, stable scale σ, or Gaussian standard
    /// deviation depending on `law`.
    pub scale: f64,
    /// For `law = "pareto"`: symmetrize (true) or subtract the mean
    /// (false) to make the noise zero-mean.
    pub symmetrize: bool,
    /// Skewness θ ∈ [−1, 1] for `law = "stable"` only.
    pub theta: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            law: NoiseKind::Pareto,
            alpha: 1.5,
            scale: 1.0,
            symmetrize: true,
            theta: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleSection {
    pub gamma0: f64,
    pub rho: f64,
    pub t0: u64,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            gamma0: 0.1,
            rho: 0.7,
            t0: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub t_max: u64,
    pub replications: usize,
    /// Geometric checkpoint spacing ratio (> 1).
    pub checkpoint_ratio: f64,
    pub seed: u64,
    /// First replication stream; replication r uses stream `base_stream + r`.
    pub base_stream: u64,
    /// Starting iterate. Default: the origin.
    pub x0: Option<Vec<f64>>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_max: 10_000,
            replications: 16,
            checkpoint_ratio: 1.2,
            seed: 42,
            base_stream: 0,
            x0: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Moment orders p ∈ (0, 2) to estimate and fit.
    pub moments: Vec<f64>,
    /// Checkpoints below this time are excluded from rate fits.
    pub burn_in: u64,
    /// Level for every distributional test.
    pub level: f64,
    /// Run the stable-limit battery when the replication count allows it.
    pub stable_diagnostic: bool,
    /// Checkpoint for the stable-limit battery. Default: t_max.
    pub t_final: Option<u64>,
    /// Projection directions for the stable-limit battery. Default: the
    /// coordinate axes plus four fixed pseudo-random unit vectors.
    pub directions: Option<Vec<Vec<f64>>>,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            moments: vec![1.2],
            burn_in: analysis::DEFAULT_BURN_IN,
            level: 0.01,
            stable_diagnostic: true,
            t_final: None,
            directions: None,
        }
    }
}

/// A fully-defaulted experiment description. Parsing applies defaults
/// field-by-field, so the struct is always fully resolved; serializing it
/// back out yields the canonical form that gets hashed and echoed into the
/// manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSection,
    pub noise: NoiseSection,
    pub schedule: ScheduleSection,
    pub run: RunSection,
    pub analysis: AnalysisSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSection::default(),
            noise: NoiseSection::default(),
            schedule: ScheduleSection::default(),
            run: RunSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses a TOML experiment description, applying defaults.
    pub fn from_toml_str(text: &str) -> Result<Self, ExperimentError> {
        let config: ExperimentConfig = toml::from_str(text)?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(ExperimentError::Config(format!(
                "unsupported schema_version {} (this build writes {SCHEMA_VERSION})",
                config.schema_version
            )));
        }
        Ok(config)
    }

    /// Extracts the resolved config from an emitted `manifest.json`, so a
    /// run can be reproduced from its manifest alone.
    pub fn from_manifest_str(text: &str) -> Result<Self, ExperimentError> {
        let manifest: Manifest = serde_json::from_str(text)?;
        Ok(manifest.config)
    }

    /// Loads either a TOML config or an emitted JSON manifest, deciding by
    /// file extension (`.json` means manifest).
    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path)?;
        if path.extension().and_then(|e| e.to_str()) == Some("json") {
            Self::from_manifest_str(&text)
        } else {
            Self::from_toml_str(&text)
        }
    }

    /// Canonical serialized form: field order fixed by the struct, all
    /// defaults materialized.
    pub fn to_canonical_toml(&self) -> Result<String, ExperimentError> {
        Ok(toml::to_string_pretty(self)?)
    }

    /// `run-<12 hex chars>` content address of the resolved config.
    pub fn run_dir_name(&self) -> Result<String, ExperimentError> {
        let canon = self.to_canonical_toml()?;
        let digest = Sha256::digest(canon.as_bytes());
        let mut hex = String::with_capacity(12);
        for byte in digest.iter().take(6) {
            write!(hex, "{byte:02x}").expect("writing to a String cannot fail");
        }
        Ok(format!("run-{hex}"))
    }
}

// ------------------------------------------------------------- components

/// The tail index governing the run's limit theory: the noise tail for
/// heavy-tailed laws, 2 for Gaussian, `None` for noiseless runs.
fn effective_alpha(noise: &NoiseSection) -> Option<f64> {
    match noise.law {
        NoiseKind::Pareto | NoiseKind::Stable => Some(noise.alpha),
        NoiseKind::Gaussian => Some(2.0),
        NoiseKind::None => None,
    }
}

fn build_noise(noise: &NoiseSection) -> Result<NoiseLaw, ExperimentError> {
    if noise.theta != 0.0 && noise.law != NoiseKind::Stable {
        return Err(ExperimentError::Config(format!(
            "noise.theta only applies to law = \"stable\", got theta = {} with {:?}",
            noise.theta, noise.law
        )));
    }
    Ok(match noise.law {
        NoiseKind::Pareto if noise.symmetrize => {
            NoiseLaw::SymmetrizedPareto(ParetoParams::new(noise.alpha, noise.scale, false)?)
        }
        NoiseKind::Pareto => {
            NoiseLaw::CenteredPareto(ParetoParams::new(noise.alpha, noise.scale, true)?)
        }
        NoiseKind::Stable => {
            NoiseLaw::Stable(StableParams::new(noise.alpha, noise.scale, noise.theta, 0.0)?)
        }
        // α = 2 stable with scale σ has variance 2σ², so σ = sd/√2 makes
        // `scale` the standard deviation.
        NoiseKind::Gaussian => NoiseLaw::Stable(StableParams::new(
            2.0,
            noise.scale / std::f64::consts::SQRT_2,
            0.0,
            0.0,
        )?),
        NoiseKind::None => NoiseLaw::None,
    })
}

fn symmetric_from_rows(rows: &[Vec<f64>], what: &str) -> Result<SymMatrix, ExperimentError> {
    SymMatrix::new(rows).map_err(|e| ExperimentError::Config(format!("{what}: {e}")))
}

enum BuiltModel {
    Quadratic(QuadraticModel),
    Ols(OlsModel),
    Glm(GlmModel),
}

impl BuiltModel {
    fn oracle(&self) -> &dyn StochasticOracle {
        match self {
            BuiltModel::Quadratic(m) => m,
            BuiltModel::Ols(m) => m,
            BuiltModel::Glm(m) => m,
        }
    }
}

/// Resolves the state dimension from the section's explicit shapes, falling
/// back to `n`; inconsistent explicit shapes are a config error.
fn resolve_dim(model: &ModelSection) -> Result<usize, ExperimentError> {
    let mut dim: Option<(usize, &'static str)> = None;
    let mut merge = |len: usize, what: &'static str| -> Result<(), ExperimentError> {
        match dim {
            None => {
                dim = Some((len, what));
                Ok(())
            }
            Some((prev, prev_what)) if prev != len => Err(ExperimentError::Config(format!(
                "model.{what} has dimension {len} but model.{prev_what} has dimension {prev}"
            ))),
            Some(_) => Ok(()),
        }
    };
    if let Some(a) = &model.a {
        merge(a.len(), "a")?;
    }
    if let Some(x) = &model.x_star {
        merge(x.len(), "x_star")?;
    }
    if let Some(b) = &model.beta0 {
        merge(b.len(), "beta0")?;
    }
    if let Some(f) = &model.factor {
        merge(f.len(), "factor")?;
    }
    let n = dim.map_or(model.n, |(len, _)| len);
    if n == 0 {
        return Err(ExperimentError::Config(
            "model dimension must be at least 1".into(),
        ));
    }
    Ok(n)
}

fn default_beta0(n: usize) -> Vec<f64> {
    (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

fn build_model(config: &ExperimentConfig) -> Result<(BuiltModel, Vec<f64>), ExperimentError> {
    let section = &config.model;
    let n = resolve_dim(section)?;
    let noise = build_noise(&config.noise)?;
    match section.kind {
        ModelKind::Quadratic => {
            if section.beta0.is_some() || section.factor.is_some() {
                return Err(ExperimentError::Config(
                    "model.beta0/model.factor apply to ols/glm, not quadratic".into(),
                ));
            }
            let a = match &section.a {
                Some(rows) => symmetric_from_rows(rows, "model.a")?,
                None => SymMatrix::identity(n),
            };
            let x_star = section.x_star.clone().unwrap_or_else(|| vec![0.0; n]);
            let model = QuadraticModel::new(a, x_star.clone(), noise)?;
            Ok((BuiltModel::Quadratic(model), x_star))
        }
        ModelKind::Ols | ModelKind::Glm => {
            if section.a.is_some() || section.x_star.is_some() {
                return Err(ExperimentError::Config(
                    "model.a/model.x_star apply to quadratic, not ols/glm".into(),
                ));
            }
            let beta0 = section.beta0.clone().unwrap_or_else(|| default_beta0(n));
            let factor = match &section.factor {
                Some(rows) => CovFactor::new(rows)?,
                None => CovFactor::identity(n),
            };
            if section.kind == ModelKind::Ols {
                let model = OlsModel::new(beta0.clone(), factor, noise)?;
                Ok((BuiltModel::Ols(model), beta0))
            } else {
                let model = GlmModel::new(
                    section.link,
                    section.lambda,
                    beta0,
                    factor,
                    noise,
                    section.panel_size,
                    config.run.seed,
                )?;
                let optimum =
                    find_glm_optimum(&model, section.optimum_tol, section.optimum_budget)?;
                let x_star = optimum.x_star.clone();
                Ok((BuiltModel::Glm(model.with_x_star(optimum)), x_star))
            }
        }
    }
}

// -------------------------------------------------------------- artifacts

/// Feasible-exponent condition of the averaging CLT for one moment order:
/// max((α+αρ)/(1+αρ), αρ) ≤ p ≤ α. Violations are recorded and warned
/// about, never fatal — the rate theory may still apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentCondition {
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
    pub satisfied: bool,
}

fn exponent_conditions(config: &ExperimentConfig) -> Vec<ExponentCondition> {
    let Some(alpha) = effective_alpha(&config.noise) else {
        return Vec::new();
    };
    let rho = config.schedule.rho;
    config
        .analysis
        .moments
        .iter()
        .map(|&p| {
            let lower = ((alpha + alpha * rho) / (1.0 + alpha * rho)).max(alpha * rho);
            ExponentCondition {
                p,
                lower,
                upper: alpha,
                satisfied: lower <= p && p <= alpha,
            }
        })
        .collect()
}

/// Seed/stream bookkeeping echoed into the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamInfo {
    pub seed: u64,
    pub base_stream: u64,
    pub replications: usize,
    /// The reserved stream the GLM calibration panel draws from, when a
    /// GLM model is configured.
    pub panel_stream: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub csv_schema_version: u32,
    /// The fully-resolved config; reproducing the run needs nothing else.
    pub config: ExperimentConfig,
    pub run_dir: String,
    pub streams: StreamInfo,
    pub censored: Vec<CensoredReplication>,
    pub exponent_condition: Vec<ExponentCondition>,
    /// Files this run wrote, relative to the run directory.
    pub outputs: Vec<String>,
}

/// One analyzed moment order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveReport {
    pub p: f64,
    pub theory_slope: Option<f64>,
    pub curve: MomentCurve,
    pub fit: Option<RateFit>,
    /// Why `fit` is absent, when it is.
    pub fit_note: Option<String>,
    /// Plot-ready CSV for this curve, relative to the run directory.
    pub csv: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub censored: usize,
    pub replications: usize,
    pub curves: Vec<CurveReport>,
    pub stable_limit: Option<StableLimitReport>,
    /// Why `stable_limit` is absent, when it is.
    pub stable_limit_note: Option<String>,
}

/// Everything [`run_experiment`] produced, with the manifest and analysis
/// in memory for callers that want to inspect them without re-reading the
/// files.
#[derive(Debug)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    pub manifest: Manifest,
    pub report: AnalysisReport,
    /// Human-readable warnings (exponent-condition violations, skipped
    /// diagnostics); the CLI forwards these to the diagnostic stream.
    pub warnings: Vec<String>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ExperimentError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Renders the long-format trace table. Columns (CSV schema v1):
/// `replication,t,coordinate,x,x_bar,err,err_bar,scaled_err_bar` where
/// `err`/`err_bar` are the ℓ2 errors (repeated on every coordinate row of
/// a checkpoint) and `scaled_err_bar` is t^{1−1/α}·err_bar with α = 2 for
/// light-tailed or noiseless runs.
fn render_traces_csv(
    replicated: &Replicated,
    x_star: &[f64],
    alpha_eff: f64,
) -> Result<Vec<u8>, ExperimentError> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record([
        "replication",
        "t",
        "coordinate",
        "x",
        "x_bar",
        "err",
        "err_bar",
        "scaled_err_bar",
    ])?;
    let exponent = 1.0 - 1.0 / alpha_eff;
    for (rep, slot) in replicated.traces.iter().enumerate() {
        let Some(trace) = slot else { continue };
        for (k, &t) in trace.checkpoints.iter().enumerate() {
            let x = &trace.iterates[k];
            let xb = &trace.pr_averages[k];
            let err = l2_error(x, x_star);
            let err_bar = l2_error(xb, x_star);
            let scaled = (t as f64).powf(exponent) * err_bar;
            for (coord, (&xi, &xbi)) in x.iter().zip(xb).enumerate() {
                out.write_record([
                    rep.to_string(),
                    t.to_string(),
                    coord.to_string(),
                    xi.to_string(),
                    xbi.to_string(),
                    err.to_string(),
                    err_bar.to_string(),
                    scaled.to_string(),
                ])?;
            }
        }
    }
    out.into_inner()
        .map_err(|e| ExperimentError::Config(format!("csv buffer error: {e}")))
}

fn l2_error(x: &[f64], x_star: &[f64]) -> f64 {
    x.iter()
        .zip(x_star)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn validate_moments(moments: &[f64]) -> Result<(), ExperimentError> {
    for &p in moments {
        if !(p.is_finite() && p > 0.0 && p < 2.0) {
            return Err(ExperimentError::Config(format!(
                "analysis.moments entries must lie in the open interval (0, 2), got {p}"
            )));
        }
    }
    Ok(())
}

/// Runs one experiment end to end and writes its run directory under
/// `out_root`, returning the manifest and accumulated warnings.
///
/// Fails without writing anything when the config is invalid or more than
/// half of the replications diverge ([`ExperimentError::DivergenceMajority`]).
pub fn run_experiment(
    config: &ExperimentConfig,
    out_root: &Path,
) -> Result<RunSummary, ExperimentError> {
    validate_moments(&config.analysis.moments)?;
    if config.run.replications == 0 {
        return Err(ExperimentError::Config(
            "run.replications must be at least 1".into(),
        ));
    }
    let (model, x_star) = build_model(config)?;
    let n = x_star.len();
    let x0 = match &config.run.x0 {
        Some(x0) => {
            if x0.len() != n {
                return Err(ExperimentError::Config(format!(
                    "run.x0 has dimension {} but the model has dimension {n}",
                    x0.len()
                )));
            }
            x0.clone()
        }
        None => vec![0.0; n],
    };
    let schedule = StepSchedule::new(
        config.schedule.gamma0,
        config.schedule.rho,
        config.schedule.t0,
    )?;
    let plan = CheckpointPlan::geometric(config.run.t_max, config.run.checkpoint_ratio)?;

    let replicated = replicate(
        model.oracle(),
        &x0,
        schedule,
        config.run.t_max,
        &plan,
        config.run.seed,
        config.run.base_stream,
        config.run.replications,
    )?;
    let censored = replicated.censored_count();
    let total = replicated.replication_count();
    if censored * 2 > total {
        return Err(ExperimentError::DivergenceMajority { censored, total });
    }

    let mut warnings = Vec::new();
    let conditions = exponent_conditions(config);
    for c in &conditions {
        if !c.satisfied {
            warnings.push(format!(
                "moment order p = {} violates the feasible-exponent condition {:.4} <= p <= {} \
                 of the averaging limit theorem; rate estimates still run",
                c.p, c.lower, c.upper
            ));
        }
    }

    let traces: Vec<SgdTrace> = replicated.uncensored().cloned().collect();
    let (report, rate_csvs, analysis_warnings) =
        analyze(config, &traces, censored, total, &x_star)?;
    warnings.extend(analysis_warnings);

    // ---- write the run directory
    let dir_name = config.run_dir_name()?;
    let run_dir = out_root.join(&dir_name);
    std::fs::create_dir_all(&run_dir)?;

    let alpha_eff = effective_alpha(&config.noise);
    let traces_bytes = render_traces_csv(&replicated, &x_star, alpha_eff.unwrap_or(2.0))?;
    let mut outputs = vec!["manifest.json".to_string(), "traces.csv".to_string(), "analysis.json".to_string()];
    outputs.extend(rate_csvs.iter().map(|(name, _)| name.clone()));

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        csv_schema_version: CSV_SCHEMA_VERSION,
        config: config.clone(),
        run_dir: dir_name,
        streams: StreamInfo {
            seed: config.run.seed,
            base_stream: config.run.base_stream,
            replications: total,
            panel_stream: match config.model.kind {
                ModelKind::Glm => Some(PANEL_STREAM),
                _ => None,
            },
        },
        censored: replicated.censored.clone(),
        exponent_condition: conditions,
        outputs,
    };

    write_atomic(&run_dir.join("traces.csv"), &traces_bytes)?;
    write_analysis(&run_dir, &report, &rate_csvs)?;
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest)?;
    manifest_bytes.push(b'\n');
    write_atomic(&run_dir.join("manifest.json"), &manifest_bytes)?;

    Ok(RunSummary {
        run_dir,
        manifest,
        report,
        warnings,
    })
}

/// The analysis stage shared by [`run_experiment`] and re-analysis of an
/// existing run directory: moment curves with rate fits, plot-ready CSVs,
/// and the stable-limit battery. Returns the report, the rendered
/// `rate-p<q>.csv` bodies, and human-readable warnings.
fn analyze(
    config: &ExperimentConfig,
    traces: &[SgdTrace],
    censored: usize,
    total: usize,
    x_star: &[f64],
) -> Result<(AnalysisReport, Vec<(String, Vec<u8>)>, Vec<String>), ExperimentError> {
    validate_moments(&config.analysis.moments)?;
    let n = x_star.len();
    let alpha_eff = effective_alpha(&config.noise);
    let rho = config.schedule.rho;
    let mut warnings = Vec::new();

    let mut curves = Vec::new();
    let mut rate_csvs: Vec<(String, Vec<u8>)> = Vec::new();
    for &p in &config.analysis.moments {
        let curve = moment_curve(traces, censored, p, x_star)?;
        let csv_name = format!("rate-p{p}.csv");
        let theory_slope = alpha_eff.map(|alpha| -rho * p * (alpha - 1.0) / alpha);
        let (fit, fit_note) = match theory_slope {
            Some(theory) => match fit_rate(&curve, config.analysis.burn_in, theory) {
                Ok(fit) => {
                    let mut buf = Vec::new();
                    analysis::write_rate_csv(&mut buf, &curve, &fit)?;
                    rate_csvs.push((csv_name.clone(), buf));
                    (Some(fit), None)
                }
                Err(err) => (None, Some(format!("rate fit unavailable: {err}"))),
            },
            None => (
                None,
                Some("noiseless runs decay geometrically; no power-law rate to fit".into()),
            ),
        };
        if fit.is_none() {
            if let Some(note) = &fit_note {
                warnings.push(format!("moment order p = {p}: {note}"));
            }
        }
        curves.push(CurveReport {
            p,
            theory_slope,
            curve,
            fit,
            fit_note,
            csv: csv_name,
        });
    }

    let t_final = config.analysis.t_final.unwrap_or(config.run.t_max);
    let (stable_limit, stable_limit_note) = if !config.analysis.stable_diagnostic {
        (None, Some("disabled by analysis.stable_diagnostic".into()))
    } else {
        match alpha_eff {
            None => (None, Some("noiseless run has no distributional limit".into())),
            Some(alpha) if !(alpha > 1.0 && alpha <= 2.0) => (
                None,
                Some(format!(
                    "stable-limit battery needs tail index in (1, 2], run has {alpha}"
                )),
            ),
            Some(alpha) => {
                if traces.len() < analysis::MIN_REPLICATIONS {
                    (
                        None,
                        Some(format!(
                            "stable-limit battery needs >= {} uncensored replications, have {}",
                            analysis::MIN_REPLICATIONS,
                            traces.len()
                        )),
                    )
                } else {
                    let directions = match &config.analysis.directions {
                        Some(dirs) => dirs.clone(),
                        None => analysis::default_directions(n),
                    };
                    let report = stable_limit_diagnostic(
                        traces,
                        alpha,
                        x_star,
                        &directions,
                        t_final,
                        config.analysis.level,
                    )?;
                    (Some(report), None)
                }
            }
        }
    };
    if let Some(note) = &stable_limit_note {
        if config.analysis.stable_diagnostic {
            warnings.push(format!("stable-limit diagnostic skipped: {note}"));
        }
    }

    let report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        censored,
        replications: total,
        curves,
        stable_limit,
        stable_limit_note,
    };
    Ok((report, rate_csvs, warnings))
}

/// Re-runs the analysis stage on traces loaded from disk. The model is
/// rebuilt from the config to recover the optimum x*, which is
/// deterministic (the GLM calibration panel is seeded by the config).
pub fn analyze_traces(
    config: &ExperimentConfig,
    traces: &[SgdTrace],
    censored: usize,
    total: usize,
) -> Result<(AnalysisReport, Vec<(String, Vec<u8>)>, Vec<String>), ExperimentError> {
    let (_, x_star) = build_model(config)?;
    analyze(config, traces, censored, total, &x_star)
}

/// Writes `analysis.json` and the per-moment rate CSVs into `run_dir`
/// atomically.
pub fn write_analysis(
    run_dir: &Path,
    report: &AnalysisReport,
    rate_csvs: &[(String, Vec<u8>)],
) -> Result<(), ExperimentError> {
    for (name, bytes) in rate_csvs {
        write_atomic(&run_dir.join(name), bytes)?;
    }
    let mut report_bytes = serde_json::to_vec_pretty(report)?;
    report_bytes.push(b'\n');
    write_atomic(&run_dir.join("analysis.json"), &report_bytes)?;
    Ok(())
}

/// Reads a run directory back: the manifest plus the uncensored traces
/// reconstructed from `traces.csv` (in replication order, with seed and
/// stream ids recovered from the manifest). The martingale spot check is
/// not persisted in the CSV, so reconstructed traces carry `None` there.
pub fn load_run(run_dir: &Path) -> Result<(Manifest, Vec<SgdTrace>), ExperimentError> {
    let manifest_text = std::fs::read_to_string(run_dir.join("manifest.json"))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)?;

    struct Partial {
        rep: u64,
        checkpoints: Vec<u64>,
        iterates: Vec<Vec<f64>>,
        pr_averages: Vec<Vec<f64>>,
        errors: Vec<f64>,
        pr_errors: Vec<f64>,
    }

    let path = run_dir.join("traces.csv");
    let mut reader = csv::Reader::from_path(&path)?;
    {
        let headers = reader.headers()?;
        let expected = [
            "replication",
            "t",
            "coordinate",
            "x",
            "x_bar",
            "err",
            "err_bar",
            "scaled_err_bar",
        ];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(ExperimentError::Config(format!(
                "unexpected traces.csv header in {}: {:?}",
                path.display(),
                headers
            )));
        }
    }

    let parse = |field: &str, what: &str| -> Result<f64, ExperimentError> {
        field.parse::<f64>().map_err(|_| {
            ExperimentError::Config(format!("traces.csv: unparseable {what} value {field:?}"))
        })
    };
    let mut partials: Vec<Partial> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let rep: u64 = record[0]
            .parse()
            .map_err(|_| ExperimentError::Config("traces.csv: bad replication id".into()))?;
        let t: u64 = record[1]
            .parse()
            .map_err(|_| ExperimentError::Config("traces.csv: bad checkpoint time".into()))?;
        let coord: usize = record[2]
            .parse()
            .map_err(|_| ExperimentError::Config("traces.csv: bad coordinate index".into()))?;
        let x = parse(&record[3], "x")?;
        let xb = parse(&record[4], "x_bar")?;
        let err = parse(&record[5], "err")?;
        let err_bar = parse(&record[6], "err_bar")?;

        if partials.last().map(|p| p.rep) != Some(rep) {
            partials.push(Partial {
                rep,
                checkpoints: Vec::new(),
                iterates: Vec::new(),
                pr_averages: Vec::new(),
                errors: Vec::new(),
                pr_errors: Vec::new(),
            });
        }
        let part = partials.last_mut().expect("just ensured non-empty");
        if part.checkpoints.last() != Some(&t) {
            part.checkpoints.push(t);
            part.iterates.push(Vec::new());
            part.pr_averages.push(Vec::new());
            part.errors.push(err);
            part.pr_errors.push(err_bar);
        }
        let row = part.iterates.last_mut().expect("checkpoint row exists");
        if coord != row.len() {
            return Err(ExperimentError::Config(format!(
                "traces.csv: replication {rep}, t = {t}: expected coordinate {}, found {coord}",
                row.len()
            )));
        }
        row.push(x);
        part.pr_averages
            .last_mut()
            .expect("checkpoint row exists")
            .push(xb);
    }

    let seed = manifest.config.run.seed;
    let base = manifest.config.run.base_stream;
    let traces = partials
        .into_iter()
        .map(|p| SgdTrace {
            seed,
            stream_id: base + p.rep,
            checkpoints: p.checkpoints,
            iterates: p.iterates,
            pr_averages: p.pr_averages,
            errors: Some(p.errors),
            pr_errors: Some(p.pr_errors),
            m_spot_check: None,
        })
        .collect();
    Ok((manifest, traces))
}
