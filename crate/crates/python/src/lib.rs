//! Python bindings for the `heavytail` crate.
//!
//! The module mirrors the library's function-style surface over plain
//! Python floats and lists — samplers and distributional tests, ℓ_p cone
//! margins, the numerical lemma oracles, and the config-driven experiment
//! runner. Reports are returned as dicts keyed like the corresponding Rust
//! structs, and validation failures raise `ValueError`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use heavytail::experiment::{run_experiment as run_experiment_rs, ExperimentConfig};
use heavytail::ppd::{self, SymMatrix};
use heavytail::stable::{self, NoiseLaw, ParetoParams, Sampler, StableParams, TestReport};
use heavytail::{analysis, RngStream};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn test_report_dict<'py>(py: Python<'py>, report: &TestReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("statistic", report.statistic)?;
    d.set_item("critical_value", report.critical_value)?;
    d.set_item("level", report.level)?;
    d.set_item("pass", report.pass)?;
    Ok(d)
}

fn matrix_from_rows(rows: Vec<Vec<f64>>) -> PyResult<SymMatrix> {
    SymMatrix::new(&rows).map_err(value_err)
}

/// Draws `n` α-stable variates with the given parameters.
#[pyfunction]
#[pyo3(signature = (alpha, sigma, theta, mu, n, seed, stream = 0))]
fn sample_stable(
    alpha: f64,
    sigma: f64,
    theta: f64,
    mu: f64,
    n: usize,
    seed: u64,
    stream: u64,
) -> PyResult<Vec<f64>> {
    let params = StableParams::new(alpha, sigma, theta, mu).map_err(value_err)?;
    let mut rng = RngStream::new(seed, stream);
    Ok((0..n).map(|_| stable::sample_stable(&params, &mut rng)).collect())
}

/// Draws `n` Pareto variates; `centered` subtracts the mean (requires
/// tail index > 1), `symmetrized` attaches a fair sign instead.
#[pyfunction]
#[pyo3(signature = (alpha, scale, n, seed, stream = 0, centered = false, symmetrized = false))]
fn sample_pareto(
    alpha: f64,
    scale: f64,
    n: usize,
    seed: u64,
    stream: u64,
    centered: bool,
    symmetrized: bool,
) -> PyResult<Vec<f64>> {
    if centered && symmetrized {
        return Err(PyValueError::new_err(
            "choose at most one of centered and symmetrized",
        ));
    }
    let params = ParetoParams::new(alpha, scale, centered).map_err(value_err)?;
    let law = if symmetrized {
        NoiseLaw::SymmetrizedPareto(params)
    } else if centered {
        NoiseLaw::CenteredPareto(params)
    } else {
        // Raw (uncentered, unsigned) draws.
        let mut rng = RngStream::new(seed, stream);
        return Ok((0..n).map(|_| stable::sample_pareto(&params, &mut rng)).collect());
    };
    let mut rng = RngStream::new(seed, stream);
    Ok((0..n).map(|_| law.sample(&mut rng)).collect())
}

/// The α-stable characteristic function at `u`, as an (re, im) pair.
#[pyfunction]
fn stable_char_fn(alpha: f64, sigma: f64, theta: f64, mu: f64, u: f64) -> PyResult<(f64, f64)> {
    let params = StableParams::new(alpha, sigma, theta, mu).map_err(value_err)?;
    let z = stable::stable_char_fn(&params, u);
    Ok((z.re, z.im))
}

/// The empirical characteristic function of `samples` at `u`.
#[pyfunction]
fn empirical_char_fn(samples: Vec<f64>, u: f64) -> PyResult<(f64, f64)> {
    if samples.is_empty() {
        return Err(PyValueError::new_err("samples must be non-empty"));
    }
    let z = stable::empirical_char_fn(&samples, u);
    Ok((z.re, z.im))
}

/// Hill tail-index estimate from the `k` largest magnitudes
/// (default k = ⌊√n⌋).
#[pyfunction]
#[pyo3(signature = (samples, k = None))]
fn hill_tail_index(samples: Vec<f64>, k: Option<usize>) -> PyResult<f64> {
    let k = k.unwrap_or_else(|| stable::default_hill_k(samples.len()));
    stable::hill_tail_index(&samples, k).map_err(value_err)
}

/// One-sample KS test of `samples` against Normal(mean, sd²).
#[pyfunction]
fn normality_test(
    py: Python<'_>,
    samples: Vec<f64>,
    mean: f64,
    sd: f64,
    level: f64,
) -> PyResult<Py<PyDict>> {
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(PyValueError::new_err("sd must be positive and finite"));
    }
    let report = stable::normality_test(&samples, mean, sd, level);
    Ok(test_report_dict(py, &report)?.into())
}

/// Two-sample KS test at the given level.
#[pyfunction]
fn two_sample_ks_test(
    py: Python<'_>,
    a: Vec<f64>,
    b: Vec<f64>,
    level: f64,
) -> PyResult<Py<PyDict>> {
    if a.is_empty() || b.is_empty() {
        return Err(PyValueError::new_err("both samples must be non-empty"));
    }
    let report = stable::two_sample_ks_test(&a, &b, level);
    Ok(test_report_dict(py, &report)?.into())
}

/// Distributional self-similarity test X₁ + X₂ ≗ 2^{1/α}·X.
#[pyfunction]
fn self_similarity_test(
    py: Python<'_>,
    samples: Vec<f64>,
    alpha: f64,
    level: f64,
) -> PyResult<Py<PyDict>> {
    let report = stable::self_similarity_test(&samples, alpha, level).map_err(value_err)?;
    Ok(test_report_dict(py, &report)?.into())
}

/// Componentwise signed power sg(vᵢ)·|vᵢ|^q.
#[pyfunction]
fn signed_power(v: Vec<f64>, q: f64) -> PyResult<Vec<f64>> {
    ppd::signed_power(&v, q).map_err(value_err)
}

/// Membership margin of a symmetric matrix in the p-positive-definite
/// cone, minimized over a grid on the ℓ_p unit sphere.
#[pyfunction]
#[pyo3(signature = (rows, p, resolution = None))]
fn ppd_margin(
    py: Python<'_>,
    rows: Vec<Vec<f64>>,
    p: f64,
    resolution: Option<usize>,
) -> PyResult<Py<PyDict>> {
    let q = matrix_from_rows(rows)?;
    let report = ppd::ppd_margin(&q, p, resolution.unwrap_or(ppd::DEFAULT_RESOLUTION))
        .map_err(value_err)?;
    let d = PyDict::new(py);
    d.set_item("p", report.p)?;
    d.set_item("margin", report.margin)?;
    d.set_item("witness", report.witness.clone())?;
    d.set_item("member_pd", report.member_pd)?;
    d.set_item("member_psd", report.member_psd)?;
    d.set_item("grid_resolution", report.grid_resolution)?;
    d.set_item("tolerance", report.tolerance)?;
    Ok(d.into())
}

/// Classifies a symmetric matrix against the nested cones at each
/// requested exponent plus the endpoints, with endpoint cross-checks.
#[pyfunction]
fn classify_cones(py: Python<'_>, rows: Vec<Vec<f64>>, p_list: Vec<f64>) -> PyResult<Py<PyDict>> {
    let q = matrix_from_rows(rows)?;
    let class = ppd::classify_cones(&q, &p_list).map_err(value_err)?;
    let reports = PyList::empty(py);
    for r in &class.reports {
        let d = PyDict::new(py);
        d.set_item("p", r.p)?;
        d.set_item("margin", r.margin)?;
        d.set_item("member_pd", r.member_pd)?;
        d.set_item("member_psd", r.member_psd)?;
        reports.append(d)?;
    }
    let d = PyDict::new(py);
    d.set_item("reports", reports)?;
    d.set_item("diag_dominance", class.diag_dominance)?;
    d.set_item("lambda_min", class.lambda_min)?;
    d.set_item("p1_cross_check", class.p1_cross_check)?;
    d.set_item("p2_cross_check", class.p2_cross_check)?;
    d.set_item("order_violation", class.order_violation.clone())?;
    Ok(d.into())
}

/// Runs the scalar comparison recursion b_{t+1} = b_t(1 − A·t^{−alpha}) +
/// B·t^{−alpha−beta} from b0 for t_count values.
#[pyfunction]
fn fabian_recursion(
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    b0: f64,
    t_count: usize,
) -> PyResult<Vec<f64>> {
    analysis::fabian_recursion(a, b, alpha, beta, b0, t_count).map_err(value_err)
}

/// (max − min) / (max + min) of a positive sequence; None when undefined.
#[pyfunction]
fn relative_oscillation(values: Vec<f64>) -> Option<f64> {
    analysis::relative_oscillation(&values)
}

/// The step-ratio exponential-sum sequence; decays to 0 when κ < 1.
#[pyfunction]
fn check_rho_exp(rho: f64, kappa: f64, lam: f64, gamma0: f64, t_max: u64) -> PyResult<Vec<f64>> {
    analysis::check_rho_exp(rho, kappa, lam, gamma0, t_max).map_err(value_err)
}

/// The averaged resolvent-deviation sequence for a symmetric matrix.
#[pyfunction]
fn check_phi_sum(
    rows: Vec<Vec<f64>>,
    rho: f64,
    kappa: f64,
    gamma0: f64,
    t_max: u64,
) -> PyResult<Vec<f64>> {
    let a = matrix_from_rows(rows)?;
    analysis::check_phi_sum(&a, rho, kappa, gamma0, t_max).map_err(value_err)
}

/// Evaluates the vector power-expansion inequality on concrete vectors.
#[pyfunction]
fn check_vecexpandp(py: Python<'_>, x: Vec<f64>, y: Vec<f64>, p: f64) -> PyResult<Py<PyDict>> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err("vectors must share a dimension"));
    }
    if !(p.is_finite() && (1.0..=2.0).contains(&p)) {
        return Err(PyValueError::new_err("p must lie in [1, 2]"));
    }
    let check = analysis::check_vecexpandp(&x, &y, p);
    let d = PyDict::new(py);
    d.set_item("lhs", check.lhs)?;
    d.set_item("rhs", check.rhs)?;
    d.set_item("holds", check.holds)?;
    Ok(d.into())
}

/// Runs a config-driven experiment (TOML text) into `out_root` and
/// returns a summary dict; artifacts land in the returned `run_dir`.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str, out_root: &str) -> PyResult<Py<PyDict>> {
    let config = ExperimentConfig::from_toml_str(config_toml).map_err(value_err)?;
    let summary = run_experiment_rs(&config, std::path::Path::new(out_root))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let curves = PyList::empty(py);
    for c in &summary.report.curves {
        let d = PyDict::new(py);
        d.set_item("p", c.p)?;
        d.set_item("theory_slope", c.theory_slope)?;
        match &c.fit {
            Some(fit) => {
                d.set_item("slope", fit.slope)?;
                d.set_item("r_squared", fit.r_squared)?;
                d.set_item("abs_gap", fit.abs_gap)?;
            }
            None => d.set_item("fit_note", c.fit_note.clone())?,
        }
        curves.append(d)?;
    }
    let d = PyDict::new(py);
    d.set_item("run_dir", summary.run_dir.to_string_lossy())?;
    d.set_item("replications", summary.manifest.streams.replications)?;
    d.set_item("censored", summary.manifest.censored.len())?;
    d.set_item("curves", curves)?;
    d.set_item(
        "battery_aggregate",
        summary.report.stable_limit.as_ref().and_then(|b| b.aggregate_pass),
    )?;
    d.set_item("warnings", summary.warnings.clone())?;
    Ok(d.into())
}

#[pymodule]
fn heavytail_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(sample_stable, m)?)?;
    m.add_function(wrap_pyfunction!(sample_pareto, m)?)?;
    m.add_function(wrap_pyfunction!(stable_char_fn, m)?)?;
    m.add_function(wrap_pyfunction!(empirical_char_fn, m)?)?;
    m.add_function(wrap_pyfunction!(hill_tail_index, m)?)?;
    m.add_function(wrap_pyfunction!(normality_test, m)?)?;
    m.add_function(wrap_pyfunction!(two_sample_ks_test, m)?)?;
    m.add_function(wrap_pyfunction!(self_similarity_test, m)?)?;
    m.add_function(wrap_pyfunction!(signed_power, m)?)?;
    m.add_function(wrap_pyfunction!(ppd_margin, m)?)?;
    m.add_function(wrap_pyfunction!(classify_cones, m)?)?;
    m.add_function(wrap_pyfunction!(fabian_recursion, m)?)?;
    m.add_function(wrap_pyfunction!(relative_oscillation, m)?)?;
    m.add_function(wrap_pyfunction!(check_rho_exp, m)?)?;
    m.add_function(wrap_pyfunction!(check_phi_sum, m)?)?;
    m.add_function(wrap_pyfunction!(check_vecexpandp, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
