//! The p-positive-definite cone: signed powers, membership margins,
//! contraction checks, and cone-inclusion classification.
//!
//! For an exponent `p ∈ [1, 2]` and a symmetric matrix `Q`, the central
//! quantity is the margin
//!
//! ```text
//! λ(Q, p) = inf { vᵀ Q v^⟨p−1⟩ : ‖v‖_p = 1 },
//! ```
//!
//! where `v^⟨q⟩` applies `x ↦ sg(x)·|x|^q` componentwise with `sg(0) = 0`.
//! `Q` is called p-positive-definite when the margin is strictly positive and
//! p-positive-semidefinite when it is non-negative.  The two endpoints have
//! closed forms: at `p = 2` the margin is the smallest eigenvalue, and at
//! `p = 1` positivity is equivalent to strict diagonal dominance.  For `p`
//! in between there is no closed form, so [`ppd_margin`] minimizes over a
//! deterministic sphere grid and polishes the best candidates with a
//! golden-section local descent; the grid resolution is recorded in the
//! report so the accuracy is auditable.
//!
//! The cones are nested: 1-positive-semidefinite implies
//! p-positive-semidefinite implies 2-positive-semidefinite for `1 ≤ p ≤ 2`.
//! [`classify_cones`] reports membership across a list of exponents and
//! cross-checks the endpoints against diagonal dominance and the
//! eigendecomposition, flagging any ordering violation.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

mod io;
mod search;
#[cfg(test)]
mod tests;

pub use io::{
    matrix_to_json, matrix_to_text, parse_matrix_auto, parse_matrix_json, parse_matrix_text,
    read_matrix_file,
};

/// Default sphere-grid resolution used when callers do not override it.
///
/// For `n = 2` this is the number of angular grid points on the half-circle;
/// for `3 ≤ n ≤ 8` the grid holds `resolution²` quasi-uniform directions.
pub const DEFAULT_RESOLUTION: usize = 256;

/// Absolute slack accepted between `q[i][j]` and `q[j][i]` on construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Membership tolerance at the exactly computable endpoints `p ∈ {1, 2}`.
pub const ENDPOINT_TOL: f64 = 1e-9;

/// Largest dimension for which interior-`p` margins are computed; beyond it
/// only the closed-form endpoints `p ∈ {1, 2}` are available.
const MAX_INTERIOR_DIM: usize = 8;

/// Errors produced by the cone machinery.
#[derive(Debug, Error)]
pub enum PpdError {
    #[error("invalid parameter {name}: {reason} (got {value})")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("matrix must be square and non-empty: {0}")]
    Shape(String),
    #[error("matrix entries must be finite")]
    NonFinite,
    #[error("matrix is not symmetric: max |q[i][j] - q[j][i]| = {max_asymmetry:.3e} exceeds 1e-12")]
    NotSymmetric { max_asymmetry: f64 },
    #[error(
        "dimension {n} exceeds the cap of 8 for interior exponent p = {p}; \
         larger matrices are supported at p = 1 and p = 2 only"
    )]
    DimensionCap { n: usize, p: f64 },
    #[error("failed to read matrix: {0}")]
    Io(#[from] std::io::Error),
    #[error("failed to parse matrix: {0}")]
    Parse(String),
}

/// A real symmetric matrix, symmetrized on construction.
///
/// Construction accepts entries whose asymmetry is at most [`SYMMETRY_TOL`]
/// in absolute value and stores `(Q + Qᵀ)/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    /// Row-major storage; symmetry makes the layout order immaterial.
    flat: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from rows, validating shape, finiteness and
    /// symmetry (within [`SYMMETRY_TOL`]), then averaging `q[i][j]` with
    /// `q[j][i]`.
    pub fn new(rows: &[Vec<f64>]) -> Result<Self, PpdError> {
        let n = rows.len();
        if n == 0 {
            return Err(PpdError::Shape("matrix has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(PpdError::Shape(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    n
                )));
            }
        }
        let mut flat = vec![0.0; n * n];
        let mut max_asym: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let a = rows[i][j];
                let b = rows[j][i];
                if !a.is_finite() {
                    return Err(PpdError::NonFinite);
                }
                max_asym = max_asym.max((a - b).abs());
                flat[i * n + j] = 0.5 * (a + b);
            }
        }
        if max_asym > SYMMETRY_TOL {
            return Err(PpdError::NotSymmetric {
                max_asymmetry: max_asym,
            });
        }
        Ok(SymMatrix { n, flat })
    }

    /// The identity matrix of dimension `n` (must be ≥ 1).
    pub fn identity(n: usize) -> Self {
        assert!(n >= 1, "identity requires n >= 1");
        let mut flat = vec![0.0; n * n];
        for i in 0..n {
            flat[i * n + i] = 1.0;
        }
        SymMatrix { n, flat }
    }

    /// A diagonal matrix with the given (finite) diagonal.
    pub fn diagonal(diag: &[f64]) -> Self {
        assert!(!diag.is_empty(), "diagonal requires at least one entry");
        let n = diag.len();
        let mut flat = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            assert!(d.is_finite(), "diagonal entries must be finite");
            flat[i * n + i] = d;
        }
        SymMatrix { n, flat }
    }

    /// Dimension of the matrix.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Entry `(i, j)` of the symmetrized matrix.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.flat[i * self.n + j]
    }

    /// The matrix as nested rows (useful for serialization).
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| self.flat[i * self.n..(i + 1) * self.n].to_vec())
            .collect()
    }

    /// Copies the matrix into an `nalgebra` dense matrix.
    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.flat)
    }

    /// Largest entry magnitude; 0 only for the zero matrix.
    pub fn max_abs_entry(&self) -> f64 {
        self.flat.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.to_dmatrix().symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Smallest eigenvalue.
    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// The matrix scaled entrywise by `c`.
    pub fn scaled(&self, c: f64) -> SymMatrix {
        SymMatrix {
            n: self.n,
            flat: self.flat.iter().map(|v| c * v).collect(),
        }
    }

    /// Matrix–vector product `out = Q v` (slices must have length `n`).
    pub fn mul_vec(&self, v: &[f64], out: &mut [f64]) {
        assert_eq!(v.len(), self.n);
        assert_eq!(out.len(), self.n);
        for i in 0..self.n {
            let row = &self.flat[i * self.n..(i + 1) * self.n];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

// Serialized as nested rows; deserialization re-runs the constructor so a
// hand-edited file cannot smuggle in an asymmetric or non-finite matrix.
impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SymMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(deserializer)?;
        SymMatrix::new(&rows).map_err(serde::de::Error::custom)
    }
}

/// Report of a margin computation for one exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PpdReport {
    /// Exponent `p ∈ [1, 2]`.
    pub p: f64,
    /// Approximate infimum of `vᵀ Q v^⟨p−1⟩` over the ℓ_p unit sphere.
    pub margin: f64,
    /// Point on the ℓ_p unit sphere attaining (approximately) the margin.
    /// At `p = 1` the infimum is a limit into a vertex; the witness is an
    /// arbitrarily close interior approximant.
    pub witness: Vec<f64>,
    /// `margin > tolerance`.
    pub member_pd: bool,
    /// `margin > -tolerance`.
    pub member_psd: bool,
    /// Sphere-grid resolution used (see [`DEFAULT_RESOLUTION`] for units).
    pub grid_resolution: usize,
    /// Membership tolerance separating float noise from genuine boundary
    /// cases: 1e-9 at `p ∈ {1, 2}`, the grid tolerance at interior `p`.
    pub tolerance: f64,
}

impl PpdReport {
    /// True when the margin sits inside the tolerance band, i.e. the matrix is
    /// too close to the cone boundary for the computation to call strict
    /// definiteness either way (membership is then reported as semidefinite
    /// but not definite rather than guessed).
    pub fn boundary(&self) -> bool {
        self.margin.abs() <= self.tolerance
    }
}

fn make_report(
    p: f64,
    margin: f64,
    witness: Vec<f64>,
    grid_resolution: usize,
    tolerance: f64,
) -> PpdReport {
    PpdReport {
        p,
        margin,
        witness,
        member_pd: margin > tolerance,
        member_psd: margin > -tolerance,
        grid_resolution,
        tolerance,
    }
}

#[inline]
pub(crate) fn signed_pow_scalar(x: f64, q: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(q)
    }
}

/// Componentwise signed power `v^⟨q⟩ = (sg(v₁)|v₁|^q, …, sg(vₙ)|vₙ|^q)`.
///
/// Zero components map to zero for every `q ≥ 0` (including `q = 0`, by the
/// convention `sg(0) = 0`).  Negative or NaN exponents are rejected.
pub fn signed_power(v: &[f64], q: f64) -> Result<Vec<f64>, PpdError> {
    if !(q >= 0.0) {
        return Err(PpdError::InvalidParameter {
            name: "q",
            value: q,
            reason: "signed-power exponent must be non-negative",
        });
    }
    Ok(v.iter().map(|&x| signed_pow_scalar(x, q)).collect())
}

/// Worst-row diagonal dominance margin `min_i (q_ii − Σ_{j≠i} |q_ij|)`.
pub fn diag_dominance_margin(q: &SymMatrix) -> f64 {
    let n = q.n;
    (0..n)
        .map(|i| {
            let off: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| q.entry(i, j).abs())
                .sum();
            q.entry(i, i) - off
        })
        .fold(f64::INFINITY, f64::min)
}

fn validate_p(p: f64) -> Result<(), PpdError> {
    if !p.is_finite() || !(1.0..=2.0).contains(&p) {
        return Err(PpdError::InvalidParameter {
            name: "p",
            value: p,
            reason: "exponent must lie in [1, 2]",
        });
    }
    Ok(())
}

/// The documented margin accuracy of the refined grid search at interior `p`.
fn grid_tolerance(q: &SymMatrix) -> f64 {
    (1e-6 * q.max_abs_entry().max(1.0)).max(ENDPOINT_TOL)
}

/// The objective `x ↦ xᵀ Q x^⟨p−1⟩ / ‖x‖_p^p`, a scale-invariant extension of
/// the sphere-restricted form (degree-p numerator over degree-p denominator).
fn cone_objective<'a>(q: &'a SymMatrix, p: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    let n = q.n;
    let pm1 = p - 1.0;
    move |x: &[f64]| {
        let mut w = [0.0f64; MAX_INTERIOR_DIM];
        let mut s = 0.0;
        for i in 0..n {
            let a = x[i].abs();
            s += if p == 2.0 { a * a } else { a.powf(p) };
            w[i] = if pm1 == 1.0 {
                x[i]
            } else {
                signed_pow_scalar(x[i], pm1)
            };
        }
        if !(s > 1e-300) || !s.is_finite() {
            return f64::INFINITY;
        }
        let mut acc = 0.0;
        for i in 0..n {
            let row = &q.flat[i * n..(i + 1) * n];
            let mut yi = 0.0;
            for (rij, wj) in row.iter().zip(&w[..n]) {
                yi += rij * wj;
            }
            acc += x[i] * yi;
        }
        acc / s
    }
}

/// `x ↦ ‖M x‖_p^p / ‖x‖_p^p`; its supremum over the sphere is the p-th power
/// of the operator p-norm of `M`.
fn norm_objective<'a>(m: &'a SymMatrix, p: f64) -> impl Fn(&[f64]) -> f64 + 'a {
    let n = m.n;
    move |x: &[f64]| {
        let mut s = 0.0;
        for &xi in &x[..n] {
            let a = xi.abs();
            s += if p == 2.0 { a * a } else { a.powf(p) };
        }
        if !(s > 1e-300) || !s.is_finite() {
            return f64::NEG_INFINITY;
        }
        let mut num = 0.0;
        for i in 0..n {
            let row = &m.flat[i * n..(i + 1) * n];
            let mut yi = 0.0;
            for (rij, xj) in row.iter().zip(&x[..n]) {
                yi += rij * xj;
            }
            let a = yi.abs();
            num += if p == 2.0 { a * a } else { a.powf(p) };
        }
        num / s
    }
}

/// Approximates the cone margin `inf_{‖v‖_p = 1} vᵀ Q v^⟨p−1⟩`.
///
/// * `p = 1`: the objective is linear in the coordinate magnitudes within each
///   sign orthant and discontinuous where coordinates vanish, so the infimum is
///   approached along edges running into a vertex `±e_i` with adversarial signs
///   on the vanishing coordinates.  The limiting directional values are
///   enumerated exactly (their minimum equals the diagonal-dominance margin)
///   and the witness is a near-vertex interior approximant.
/// * `1 < p ≤ 2`, `n ≤ 8`: deterministic sphere grid of the stated resolution
///   plus golden-section local refinement of the best candidates.
/// * `p = 2`, `n > 8`: smallest eigenvalue with its eigenvector as witness.
///
/// Errors: `p` outside `[1, 2]`, `resolution < 8`, or `n > 8` at interior `p`.
pub fn ppd_margin(q: &SymMatrix, p: f64, resolution: usize) -> Result<PpdReport, PpdError> {
    validate_p(p)?;
    if resolution < 8 {
        return Err(PpdError::InvalidParameter {
            name: "resolution",
            value: resolution as f64,
            reason: "sphere-grid resolution must be at least 8",
        });
    }
    let n = q.n;
    if p == 1.0 {
        return Ok(l1_margin_report(q, resolution));
    }
    if n > MAX_INTERIOR_DIM {
        if p == 2.0 {
            return Ok(eigen_margin_report(q, resolution));
        }
        return Err(PpdError::DimensionCap { n, p });
    }
    let obj = cone_objective(q, p);
    let out = search::minimize_on_sphere(n, p, resolution, &obj);
    let tol = if p == 2.0 {
        ENDPOINT_TOL
    } else {
        grid_tolerance(q)
    };
    Ok(make_report(p, out.value, out.witness, resolution, tol))
}

/// Exact `p = 1` margin via enumeration of the limiting directional values.
fn l1_margin_report(q: &SymMatrix, resolution: usize) -> PpdReport {
    let n = q.n;
    let mut best_val = f64::INFINITY;
    let mut best_i = 0usize;
    if n <= 12 {
        // For sign pattern s (s_i fixed to +1; the objective is even) the value
        // approached at vertex e_i with the remaining coordinates vanishing is
        // Σ_j s_j q_ij; minimize it over vertices and sign patterns.
        for i in 0..n {
            for mask in 0..(1usize << n) {
                if (mask >> i) & 1 == 1 {
                    continue;
                }
                let mut val = 0.0;
                for j in 0..n {
                    let s = if (mask >> j) & 1 == 1 { -1.0 } else { 1.0 };
                    val += s * q.entry(i, j);
                }
                if val < best_val {
                    best_val = val;
                    best_i = i;
                }
            }
        }
    } else {
        for i in 0..n {
            let off: f64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| q.entry(i, j).abs())
                .sum();
            let val = q.entry(i, i) - off;
            if val < best_val {
                best_val = val;
                best_i = i;
            }
        }
    }
    // Near-vertex witness: weight 1 − mε on the worst vertex, ε on each
    // adversarially signed off-diagonal direction; its ℓ1 norm is exactly 1
    // and its objective value converges to the margin as ε → 0.
    let eps = 1e-10;
    let mut witness = vec![0.0; n];
    let mut off_mass = 0.0;
    for j in 0..n {
        if j != best_i && q.entry(best_i, j) != 0.0 {
            witness[j] = -q.entry(best_i, j).signum() * eps;
            off_mass += eps;
        }
    }
    witness[best_i] = 1.0 - off_mass;
    make_report(1.0, best_val, witness, resolution, ENDPOINT_TOL)
}

/// Exact `p = 2` margin by eigendecomposition (used beyond the grid's
/// dimension cap).
fn eigen_margin_report(q: &SymMatrix, resolution: usize) -> PpdReport {
    let eig = SymmetricEigen::new(q.to_dmatrix());
    let mut k = 0;
    for (i, &v) in eig.eigenvalues.iter().enumerate() {
        if v < eig.eigenvalues[k] {
            k = i;
        }
    }
    let col = eig.eigenvectors.column(k);
    let witness = search::normalize_p(col.as_slice(), 2.0);
    make_report(2.0, eig.eigenvalues[k], witness, resolution, ENDPOINT_TOL)
}

/// One `t` entry of a [`ContractionReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionRow {
    /// Step size.
    pub t: f64,
    /// Estimate of `‖I − tQ‖_p^p` (exact at `p ∈ {1, 2}`, otherwise a sphere
    /// search lower bound).
    pub norm_p_pow: f64,
    /// Coefficient `L = max(0, pλ − 4 t^{p−1} ‖Q‖_p^p)` derived from the
    /// margin `λ`.
    pub coefficient: f64,
    /// Right-hand side `1 − L t`.
    pub linear_bound: f64,
    /// Whether `norm_p_pow ≤ 1 − L t` held.
    pub satisfied: bool,
}

/// Result of [`contraction_check`].
///
/// When `norm_exact` is false the operator norms are sphere-search lower
/// bounds, so a passing check is necessary but not certified.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    pub p: f64,
    /// Cone margin λ of `Q` at this `p`.
    pub margin: f64,
    /// Upper bound on the operator p-norm of `Q` (exact at `p ∈ {1, 2}`,
    /// log-convex interpolation `‖Q‖₁^{2/p−1}‖Q‖₂^{2−2/p}` in between).
    pub q_norm_p_bound: f64,
    /// True when the per-`t` operator norms are computed exactly.
    pub norm_exact: bool,
    pub rows: Vec<ContractionRow>,
}

/// Operator ℓ1 norm (max absolute column sum).
pub fn l1_operator_norm(q: &SymMatrix) -> f64 {
    let n = q.n;
    (0..n)
        .map(|j| (0..n).map(|i| q.entry(i, j).abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Operator ℓ2 norm of a symmetric matrix (largest absolute eigenvalue).
pub fn spectral_norm(q: &SymMatrix) -> f64 {
    q.eigenvalues().iter().fold(0.0, |m: f64, &v| m.max(v.abs()))
}

/// Upper bound on the operator p-norm, exact at the endpoints.
pub fn operator_p_norm_bound(q: &SymMatrix, p: f64) -> f64 {
    let l1 = l1_operator_norm(q);
    if p == 1.0 {
        return l1;
    }
    let l2 = spectral_norm(q);
    if p == 2.0 {
        return l2;
    }
    let theta = 2.0 / p - 1.0;
    l1.powf(theta) * l2.powf(1.0 - theta)
}

/// `I − tQ` (symmetric since `Q` is).
fn contraction_matrix(q: &SymMatrix, t: f64) -> SymMatrix {
    let n = q.n;
    let mut flat = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let id = if i == j { 1.0 } else { 0.0 };
            flat[i * n + j] = id - t * q.flat[i * n + j];
        }
    }
    SymMatrix { n, flat }
}

/// Checks the step contraction bound `‖I − tQ‖_p^p ≤ 1 − Lt` on a grid of
/// step sizes, with `L` derived from the cone margin.
///
/// The operator norm of `I − tQ` is computed exactly at `p ∈ {1, 2}` and
/// estimated from below by a sphere search at interior `p`; the report's
/// `norm_exact` flag records which case applied.  A matrix that is not
/// p-positive-definite is allowed — the rows then simply report violations.
pub fn contraction_check(
    q: &SymMatrix,
    p: f64,
    t_grid: &[f64],
) -> Result<ContractionReport, PpdError> {
    validate_p(p)?;
    for &t in t_grid {
        if !t.is_finite() || t <= 0.0 {
            return Err(PpdError::InvalidParameter {
                name: "t",
                value: t,
                reason: "step sizes must be positive and finite",
            });
        }
    }
    let margin = ppd_margin(q, p, DEFAULT_RESOLUTION)?.margin;
    let qn = operator_p_norm_bound(q, p);
    let norm_exact = p == 1.0 || p == 2.0;
    let mut rows = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let m = contraction_matrix(q, t);
        let norm_p_pow = if p == 1.0 {
            l1_operator_norm(&m)
        } else if p == 2.0 {
            let s = spectral_norm(&m);
            s * s
        } else {
            let obj = norm_objective(&m, p);
            search::maximize_on_sphere(q.n, p, DEFAULT_RESOLUTION, &obj).value
        };
        let coefficient = (p * margin - 4.0 * t.powf(p - 1.0) * qn.powf(p)).max(0.0);
        let linear_bound = 1.0 - coefficient * t;
        let satisfied = norm_p_pow <= linear_bound + 1e-12 * (1.0 + linear_bound.abs());
        rows.push(ContractionRow {
            t,
            norm_p_pow,
            coefficient,
            linear_bound,
            satisfied,
        });
    }
    Ok(ContractionReport {
        p,
        margin,
        q_norm_p_bound: qn,
        norm_exact,
        rows,
    })
}

/// Cone-membership table for a matrix across exponents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConeClassification {
    /// One report per exponent, ascending in `p`; always includes `p = 1` and
    /// `p = 2` in addition to the requested list.
    pub reports: Vec<PpdReport>,
    /// Independent diagonal-dominance margin (cross-check for `p = 1`).
    pub diag_dominance: f64,
    /// Independent smallest eigenvalue (cross-check for `p = 2`).
    pub lambda_min: f64,
    /// `p = 1` margin agreed with `diag_dominance` within 1e-9.
    pub p1_cross_check: bool,
    /// `p = 2` margin agreed with `lambda_min` within 1e-3 relative.
    pub p2_cross_check: bool,
    /// Description of any cone-inclusion ordering violation (confident
    /// membership at a smaller `p` paired with confident non-membership at a
    /// larger one); `None` when the table is consistent.
    pub order_violation: Option<String>,
}

/// Classifies `Q` against the nested cones at `p = 1`, each requested interior
/// exponent, and `p = 2`, with endpoint cross-checks.  Uses the default grid
/// resolution; see [`classify_cones_with_resolution`] to override it.
pub fn classify_cones(q: &SymMatrix, p_list: &[f64]) -> Result<ConeClassification, PpdError> {
    classify_cones_with_resolution(q, p_list, DEFAULT_RESOLUTION)
}

/// [`classify_cones`] with an explicit sphere-grid resolution.
pub fn classify_cones_with_resolution(
    q: &SymMatrix,
    p_list: &[f64],
    resolution: usize,
) -> Result<ConeClassification, PpdError> {
    let mut ps = vec![1.0, 2.0];
    for &p in p_list {
        validate_p(p)?;
        ps.push(p);
    }
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let reports: Vec<PpdReport> = ps
        .iter()
        .map(|&p| ppd_margin(q, p, resolution))
        .collect::<Result<_, _>>()?;
    let diag_dominance = diag_dominance_margin(q);
    let lambda_min = q.lambda_min();
    let r1 = reports.iter().find(|r| r.p == 1.0).expect("p = 1 present");
    let r2 = reports.iter().find(|r| r.p == 2.0).expect("p = 2 present");
    let p1_cross_check = (r1.margin - diag_dominance).abs() <= 1e-9;
    let p2_tol = (1e-3 * lambda_min.abs()).max(1e-6 * q.max_abs_entry().max(1.0));
    let p2_cross_check = (r2.margin - lambda_min).abs() <= p2_tol;
    let order_violation = check_cone_order(&reports);
    Ok(ConeClassification {
        reports,
        diag_dominance,
        lambda_min,
        p1_cross_check,
        p2_cross_check,
        order_violation,
    })
}

/// Scans a margin table for a confident violation of the cone nesting
/// S¹₊ ⊆ Sᵖ₊ ⊆ S²₊ (margins beyond tolerance on the member side paired with
/// strict non-membership at a larger exponent).
fn check_cone_order(reports: &[PpdReport]) -> Option<String> {
    let r1 = reports.iter().find(|r| r.p == 1.0)?;
    let r2 = reports.iter().find(|r| r.p == 2.0)?;
    for r in reports.iter().filter(|r| r.p > 1.0) {
        if r1.margin > r.tolerance && !r.member_psd {
            return Some(format!(
                "1-cone member (margin {:.6e}) but p = {} reports margin {:.6e}, outside the cone",
                r1.margin, r.p, r.margin
            ));
        }
    }
    for r in reports.iter().filter(|r| r.p < 2.0) {
        if r.margin > r.tolerance && !r2.member_psd {
            return Some(format!(
                "p = {} member (margin {:.6e}) but p = 2 reports margin {:.6e}, outside the cone",
                r.p, r.margin, r2.margin
            ));
        }
    }
    None
}
