//! Deterministic sphere search shared by the margin and operator-norm
//! estimates.
//!
//! The optimizers work on scale-invariant objectives (ratios of degree-p
//! forms), so candidate points never need exact normalization during the
//! search; witnesses are normalized to the ℓ_p sphere on the way out.
//!
//! Grids are fully deterministic: an angular grid on the half-circle for
//! `n = 2`, a Fibonacci sphere for `n = 3`, and an R-sequence (generalized
//! golden ratio) of quasirandom directions pushed through the inverse normal
//! CDF for `4 ≤ n ≤ 8`; the coordinate axes are always appended.  The best
//! candidates are refined by golden-section descent alternating coordinate
//! translations with pairwise rotations (the rotations resolve slow, nearly
//! degenerate directions the way Jacobi sweeps do for eigenproblems).
//! Reduction is serial with an explicit lexicographic tie-break, so results
//! are independent of thread count.

use statrs::distribution::{ContinuousCDF, Normal};
use std::f64::consts::PI;

/// Number of grid candidates kept for local refinement.
const TOP_STARTS: usize = 6;

/// Inverse golden ratio `(√5 − 1)/2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section iterations per one-dimensional line search.
const GOLDEN_ITERS: usize = 40;

/// Local-descent half-widths shrink geometrically from 0.5 down to this.
const DESCENT_FLOOR: f64 = 1e-9;

pub(crate) struct SearchOutcome {
    pub value: f64,
    /// ℓ_p-normalized argument attaining `value`.
    pub witness: Vec<f64>,
}

/// Minimizes a scale-invariant objective over the ℓ_p unit sphere.
pub(crate) fn minimize_on_sphere(
    n: usize,
    p: f64,
    resolution: usize,
    obj: &dyn Fn(&[f64]) -> f64,
) -> SearchOutcome {
    assert!((1..=8).contains(&n), "sphere search supports 1 <= n <= 8");
    if n == 1 {
        return SearchOutcome {
            value: obj(&[1.0]),
            witness: vec![1.0],
        };
    }
    let mut top: Vec<(f64, Vec<f64>)> = Vec::with_capacity(TOP_STARTS + 1);
    for_each_grid_point(n, resolution, &mut |pt| {
        let v = obj(pt);
        if v.is_finite() {
            consider(&mut top, v, pt);
        }
    });
    let mut best: Option<(f64, Vec<f64>)> = None;
    for (_, start) in &top {
        // Keep the unrefined candidate too: descent only ever accepts strict
        // improvements, but re-evaluation after normalization can differ in
        // the last ulp.
        let s = normalize_p(start, p);
        let vs = obj(&s);
        if vs.is_finite() {
            best = Some(merge(best, (vs, s)));
        }
        let (_, x) = refine_local(obj, p, start);
        let w = normalize_p(&x, p);
        let vw = obj(&w);
        if vw.is_finite() {
            best = Some(merge(best, (vw, w)));
        }
    }
    let (value, witness) = best.expect("sphere grid produced at least one finite value");
    SearchOutcome { value, witness }
}

/// Maximizes a scale-invariant objective over the ℓ_p unit sphere.
pub(crate) fn maximize_on_sphere(
    n: usize,
    p: f64,
    resolution: usize,
    obj: &dyn Fn(&[f64]) -> f64,
) -> SearchOutcome {
    let neg = |x: &[f64]| -obj(x);
    let out = minimize_on_sphere(n, p, resolution, &neg);
    SearchOutcome {
        value: -out.value,
        witness: out.witness,
    }
}

fn merge(best: Option<(f64, Vec<f64>)>, cand: (f64, Vec<f64>)) -> (f64, Vec<f64>) {
    match best {
        None => cand,
        Some(b) => {
            if cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1) {
                cand
            } else {
                b
            }
        }
    }
}

/// Inserts a candidate into the ascending top list (value, then lexicographic
/// witness as the tie-break), keeping at most [`TOP_STARTS`] entries.
fn consider(top: &mut Vec<(f64, Vec<f64>)>, v: f64, pt: &[f64]) {
    if top.len() == TOP_STARTS {
        let last = top.last().expect("non-empty");
        if v > last.0 || (v == last.0 && pt >= last.1.as_slice()) {
            return;
        }
    }
    let idx = top.partition_point(|e| e.0 < v || (e.0 == v && e.1.as_slice() < pt));
    top.insert(idx, (v, pt.to_vec()));
    top.truncate(TOP_STARTS);
}

/// Visits every grid direction (unit scale is irrelevant to the callers'
/// scale-invariant objectives).
fn for_each_grid_point(n: usize, resolution: usize, f: &mut dyn FnMut(&[f64])) {
    let mut buf = [0.0f64; 8];
    for i in 0..n {
        buf[..n].fill(0.0);
        buf[i] = 1.0;
        f(&buf[..n]);
    }
    match n {
        2 => {
            // The objective is even, so half the circle covers every direction.
            for k in 0..resolution {
                let phi = PI * k as f64 / resolution as f64;
                buf[0] = phi.cos();
                buf[1] = phi.sin();
                f(&buf[..2]);
            }
        }
        3 => {
            let npts = (resolution * resolution).clamp(resolution, 4_000_000);
            let golden_angle = PI * (3.0 - 5.0f64.sqrt());
            for k in 0..npts {
                let z = 1.0 - (2.0 * (k as f64 + 0.5)) / npts as f64;
                let r = (1.0 - z * z).max(0.0).sqrt();
                let th = golden_angle * k as f64;
                buf[0] = r * th.cos();
                buf[1] = r * th.sin();
                buf[2] = z;
                f(&buf[..3]);
            }
        }
        _ => {
            let npts = (resolution * resolution).clamp(resolution, 2_000_000);
            // R-sequence: additive recurrence with the generalized golden
            // ratio, the positive root of x^{n+1} = x + 1.
            let mut phi = 2.0f64;
            for _ in 0..80 {
                phi = (1.0 + phi).powf(1.0 / (n as f64 + 1.0));
            }
            let alphas: Vec<f64> = (1..=n as i32).map(|i| phi.powi(-i).fract()).collect();
            let gauss = Normal::new(0.0, 1.0).expect("standard normal");
            let mut u = vec![0.5f64; n];
            for _ in 0..npts {
                for i in 0..n {
                    u[i] = (u[i] + alphas[i]).fract();
                    let c = u[i].clamp(1e-12, 1.0 - 1e-12);
                    buf[i] = gauss.inverse_cdf(c);
                }
                f(&buf[..n]);
            }
        }
    }
}

/// Golden-section minimization of `f` over `[a, b]`; returns the best probe
/// and its value.
fn golden_min(mut a: f64, mut b: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..GOLDEN_ITERS {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Golden-section descent alternating coordinate translations with pairwise
/// rotations, both with geometrically shrinking half-widths.
fn refine_local(obj: &dyn Fn(&[f64]) -> f64, p: f64, start: &[f64]) -> (f64, Vec<f64>) {
    let n = start.len();
    let mut x = normalize_p(start, p);
    let mut fx = obj(&x);
    let mut trial = x.clone();
    let mut delta = 0.5f64;
    let mut psi = 0.5f64;
    while delta > DESCENT_FLOOR {
        for i in 0..n {
            trial.copy_from_slice(&x);
            let (s, fs) = golden_min(x[i] - delta, x[i] + delta, |s| {
                trial[i] = s;
                obj(&trial)
            });
            if fs < fx {
                x[i] = s;
                fx = fs;
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let (xi, xj) = (x[i], x[j]);
                trial.copy_from_slice(&x);
                let (ang, fa) = golden_min(-psi, psi, |ang| {
                    let (s, c) = ang.sin_cos();
                    trial[i] = c * xi - s * xj;
                    trial[j] = s * xi + c * xj;
                    obj(&trial)
                });
                if fa < fx {
                    let (s, c) = ang.sin_cos();
                    x[i] = c * xi - s * xj;
                    x[j] = s * xi + c * xj;
                    fx = fa;
                }
            }
        }
        let renorm = normalize_p(&x, p);
        x.copy_from_slice(&renorm);
        fx = obj(&x);
        delta *= 0.65;
        psi *= 0.65;
    }
    (fx, x)
}

/// Scales `x` onto the ℓ_p unit sphere (returns `x` unchanged if degenerate).
pub(crate) fn normalize_p(x: &[f64], p: f64) -> Vec<f64> {
    let mut s = 0.0;
    for &xi in x {
        let a = xi.abs();
        s += if p == 2.0 { a * a } else { a.powf(p) };
    }
    if !(s > 0.0) || !s.is_finite() {
        return x.to_vec();
    }
    let scale = if p == 2.0 { s.sqrt() } else { s.powf(1.0 / p) };
    x.iter().map(|&xi| xi / scale).collect()
}
