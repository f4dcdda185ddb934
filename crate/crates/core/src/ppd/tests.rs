use super::*;
use crate::RngStream;
use proptest::prelude::*;

fn random_sym(n: usize, seed: u64) -> SymMatrix {
    let mut rng = RngStream::new(seed, 0);
    let mut rows = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = 4.0 * rng.open01() - 2.0;
            rows[i][j] = v;
            rows[j][i] = v;
        }
    }
    SymMatrix::new(&rows).unwrap()
}

fn worked_matrix() -> SymMatrix {
    SymMatrix::new(&[vec![1.0, 1.5], vec![1.5, 4.0]]).unwrap()
}

/// Smallest eigenvalue of the worked matrix, (5 − √18)/2.
const WORKED_LAMBDA_MIN: f64 = 0.378_679_656_440_357_43;

fn lp_norm(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

fn eval_cone(q: &SymMatrix, p: f64, v: &[f64]) -> f64 {
    let w = signed_power(v, p - 1.0).unwrap();
    let mut qw = vec![0.0; v.len()];
    q.mul_vec(&w, &mut qw);
    let num: f64 = v.iter().zip(&qw).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
    num / den
}

#[test]
fn signed_power_identity_exponent() {
    let r = signed_power(&[2.0, -3.0], 1.0).unwrap();
    assert!((r[0] - 2.0).abs() < 1e-15 && (r[1] + 3.0).abs() < 1e-15, "{r:?}");
}

#[test]
fn signed_power_signum_with_zero() {
    let r = signed_power(&[2.0, -3.0, 0.0], 0.0).unwrap();
    assert_eq!(r, vec![1.0, -1.0, 0.0]);
    let r = signed_power(&[-0.0, 0.0], 0.5).unwrap();
    assert_eq!(r, vec![0.0, 0.0]);
}

#[test]
fn signed_power_componentwise_root() {
    let r = signed_power(&[4.0, -9.0], 0.5).unwrap();
    assert!((r[0] - 2.0).abs() < 1e-12 && (r[1] + 3.0).abs() < 1e-12, "{r:?}");
}

#[test]
fn signed_power_rejects_bad_exponents() {
    assert!(matches!(
        signed_power(&[1.0], -0.5),
        Err(PpdError::InvalidParameter { name: "q", .. })
    ));
    assert!(signed_power(&[1.0], f64::NAN).is_err());
}

proptest! {
    /// vᵀ v^⟨p−1⟩ = ‖v‖_p^p up to float rounding.
    #[test]
    fn duality_identity(
        v in proptest::collection::vec(-10.0f64..10.0, 1..6),
        p in 1.0f64..=2.0,
    ) {
        let w = signed_power(&v, p - 1.0).unwrap();
        let lhs: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let rhs: f64 = v.iter().map(|x| x.abs().powf(p)).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }
}

#[test]
fn sym_matrix_symmetrizes_small_slack() {
    let q = SymMatrix::new(&[vec![1.0, 0.5 + 4e-13], vec![0.5, 2.0]]).unwrap();
    assert!((q.entry(0, 1) - q.entry(1, 0)).abs() == 0.0);
    assert!((q.entry(0, 1) - (0.5 + 2e-13)).abs() < 1e-15);
}

#[test]
fn sym_matrix_rejects_bad_input() {
    assert!(matches!(
        SymMatrix::new(&[vec![1.0, 2.0], vec![0.0, 1.0]]),
        Err(PpdError::NotSymmetric { .. })
    ));
    assert!(matches!(
        SymMatrix::new(&[vec![1.0, 2.0]]),
        Err(PpdError::Shape(_))
    ));
    assert!(matches!(SymMatrix::new(&[]), Err(PpdError::Shape(_))));
    assert!(matches!(
        SymMatrix::new(&[vec![f64::NAN]]),
        Err(PpdError::NonFinite)
    ));
}

#[test]
fn identity_margin_is_one_at_every_p() {
    for n in [1usize, 2, 3, 4] {
        for p in [1.0, 1.3, 1.5, 2.0] {
            let r = ppd_margin(&SymMatrix::identity(n), p, 64).unwrap();
            assert!(
                (r.margin - 1.0).abs() <= 1e-12,
                "n={n} p={p} margin={}",
                r.margin
            );
            assert!(r.member_pd && r.member_psd);
        }
    }
}

#[test]
fn diagonal_margin_is_smallest_entry() {
    let r = ppd_margin(&SymMatrix::diagonal(&[2.0, 3.0]), 1.5, 256).unwrap();
    assert!((r.margin - 2.0).abs() <= 1e-9, "margin={}", r.margin);
    let r = ppd_margin(&SymMatrix::diagonal(&[5.0, 1.0, 3.0]), 1.7, 64).unwrap();
    assert!((r.margin - 1.0).abs() <= 1e-7, "margin={}", r.margin);
}

#[test]
fn worked_matrix_margin_at_p2() {
    let r = ppd_margin(&worked_matrix(), 2.0, 256).unwrap();
    assert!(
        (r.margin - WORKED_LAMBDA_MIN).abs() <= 1e-9,
        "margin={} expected={}",
        r.margin,
        WORKED_LAMBDA_MIN
    );
    assert!(r.member_pd);
    assert!((lp_norm(&r.witness, 2.0) - 1.0).abs() <= 1e-9);
}

#[test]
fn worked_matrix_margin_at_p1() {
    let q = worked_matrix();
    let r = ppd_margin(&q, 1.0, 64).unwrap();
    assert!((r.margin + 0.5).abs() <= 1e-12, "margin={}", r.margin);
    assert!(!r.member_pd && !r.member_psd);
    assert!((lp_norm(&r.witness, 1.0) - 1.0).abs() <= 1e-9);
    // The witness approximates the limiting direction, so its objective value
    // reproduces the margin to tight tolerance.
    assert!((eval_cone(&q, 1.0, &r.witness) + 0.5).abs() <= 1e-7);
}

#[test]
fn margin_p2_matches_eigenvalue_on_random_matrices() {
    for seed in 0..5u64 {
        for n in [2usize, 3] {
            let q = random_sym(n, 100 + seed);
            let r = ppd_margin(&q, 2.0, 128).unwrap();
            let lmin = q.lambda_min();
            let tol = 1e-7 * q.max_abs_entry().max(1.0);
            assert!(
                (r.margin - lmin).abs() <= tol,
                "seed={seed} n={n} margin={} lambda_min={lmin}",
                r.margin
            );
        }
    }
}

#[test]
fn margin_p1_matches_diag_dominance_on_random_matrices() {
    for seed in 0..8u64 {
        for n in [2usize, 3, 4] {
            let q = random_sym(n, 200 + seed);
            let r = ppd_margin(&q, 1.0, 64).unwrap();
            let dd = diag_dominance_margin(&q);
            assert!(
                (r.margin - dd).abs() <= 1e-9,
                "seed={seed} n={n} margin={} dd={dd}",
                r.margin
            );
        }
    }
}

#[test]
fn margin_is_positively_homogeneous() {
    let q = worked_matrix();
    let base = ppd_margin(&q, 1.5, 128).unwrap().margin;
    let scaled = ppd_margin(&q.scaled(3.0), 1.5, 128).unwrap().margin;
    assert!(
        (scaled - 3.0 * base).abs() <= 1e-9 * (1.0 + (3.0 * base).abs()),
        "base={base} scaled={scaled}"
    );
    let b1 = ppd_margin(&q, 1.0, 64).unwrap().margin;
    let s1 = ppd_margin(&q.scaled(3.0), 1.0, 64).unwrap().margin;
    assert!((s1 - 3.0 * b1).abs() <= 1e-12);
}

#[test]
fn witness_stays_on_the_sphere() {
    let q = worked_matrix();
    for p in [1.0, 1.25, 1.5, 2.0] {
        let r = ppd_margin(&q, p, 64).unwrap();
        assert!(
            (lp_norm(&r.witness, p) - 1.0).abs() <= 1e-9,
            "p={p} witness={:?}",
            r.witness
        );
    }
}

#[test]
fn membership_flags_and_tolerance_semantics() {
    let r = ppd_margin(&SymMatrix::identity(3), 1.5, 64).unwrap();
    assert!(r.member_pd && r.member_psd);
    let r = ppd_margin(&SymMatrix::identity(2).scaled(-1.0), 1.5, 64).unwrap();
    assert!(!r.member_pd && !r.member_psd);
    // A margin inside the tolerance band counts as boundary: PSD but not PD.
    let r = ppd_margin(&SymMatrix::identity(2).scaled(1e-12), 2.0, 64).unwrap();
    assert!(!r.member_pd && r.member_psd);
    assert!(r.boundary());
    assert!(!ppd_margin(&SymMatrix::identity(2), 2.0, 64).unwrap().boundary());
    for seed in 0..6u64 {
        let r = ppd_margin(&random_sym(3, 300 + seed), 1.5, 64).unwrap();
        assert!(!r.member_pd || r.member_psd);
    }
}

#[test]
fn dimension_cap_applies_only_to_interior_p() {
    let q = SymMatrix::identity(9);
    assert!(matches!(
        ppd_margin(&q, 1.5, 64),
        Err(PpdError::DimensionCap { n: 9, .. })
    ));
    let r2 = ppd_margin(&q, 2.0, 64).unwrap();
    assert!((r2.margin - 1.0).abs() <= 1e-12);
    assert!((lp_norm(&r2.witness, 2.0) - 1.0).abs() <= 1e-9);
    let r1 = ppd_margin(&q, 1.0, 64).unwrap();
    assert!((r1.margin - 1.0).abs() <= 1e-12);
}

#[test]
fn parameter_validation() {
    let q = SymMatrix::identity(2);
    assert!(ppd_margin(&q, 0.9, 64).is_err());
    assert!(ppd_margin(&q, 2.1, 64).is_err());
    assert!(ppd_margin(&q, f64::NAN, 64).is_err());
    assert!(matches!(
        ppd_margin(&q, 1.5, 7),
        Err(PpdError::InvalidParameter { name: "resolution", .. })
    ));
}

#[test]
fn contraction_identity_case() {
    let rep = contraction_check(&SymMatrix::identity(2), 2.0, &[0.1]).unwrap();
    assert!(rep.norm_exact);
    let row = &rep.rows[0];
    assert!((row.norm_p_pow - 0.81).abs() <= 1e-12, "{}", row.norm_p_pow);
    assert!((row.coefficient - 1.6).abs() <= 1e-6, "{}", row.coefficient);
    assert!((row.linear_bound - 0.84).abs() <= 1e-6);
    assert!(row.satisfied);
}

#[test]
fn contraction_diagonal_case_contracts() {
    let rep = contraction_check(&SymMatrix::diagonal(&[1.0, 2.0]), 1.5, &[0.05]).unwrap();
    assert!(!rep.norm_exact);
    let row = &rep.rows[0];
    // max over the sphere is attained at the first axis: 0.95^1.5.
    let expected = 0.95f64.powf(1.5);
    assert!(row.norm_p_pow < 1.0);
    assert!(
        (row.norm_p_pow - expected).abs() <= 1e-6,
        "norm^p={} expected={expected}",
        row.norm_p_pow
    );
    assert!(row.satisfied);
}

#[test]
fn contraction_detects_violation_without_dominance() {
    let rep = contraction_check(&worked_matrix(), 1.0, &[0.1]).unwrap();
    assert!(rep.norm_exact);
    assert!((rep.margin + 0.5).abs() <= 1e-12);
    let row = &rep.rows[0];
    // ℓ1 operator norm of [[0.9, −0.15], [−0.15, 0.6]] is the first column sum.
    assert!((row.norm_p_pow - 1.05).abs() <= 1e-12, "{}", row.norm_p_pow);
    assert!((row.coefficient - 0.0).abs() == 0.0);
    assert!(!row.satisfied);
}

#[test]
fn contraction_rejects_bad_steps() {
    let q = SymMatrix::identity(2);
    assert!(contraction_check(&q, 2.0, &[0.0]).is_err());
    assert!(contraction_check(&q, 2.0, &[-0.1]).is_err());
    assert!(contraction_check(&q, 2.0, &[f64::INFINITY]).is_err());
}

#[test]
fn classify_diagonally_dominant_matrix() {
    let q = SymMatrix::new(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
    let c = classify_cones_with_resolution(&q, &[1.5], 64).unwrap();
    assert_eq!(c.reports.len(), 3);
    assert!(c.reports.iter().all(|r| r.member_pd), "{c:?}");
    assert!((c.diag_dominance - 1.0).abs() <= 1e-12);
    assert!((c.lambda_min - 1.0).abs() <= 1e-9);
    assert!(c.p1_cross_check && c.p2_cross_check);
    assert!(c.order_violation.is_none());
}

#[test]
fn classify_worked_matrix() {
    let c = classify_cones_with_resolution(&worked_matrix(), &[1.5], 64).unwrap();
    let r1 = c.reports.iter().find(|r| r.p == 1.0).unwrap();
    let r2 = c.reports.iter().find(|r| r.p == 2.0).unwrap();
    let rm = c.reports.iter().find(|r| r.p == 1.5).unwrap();
    assert!(!r1.member_psd && (r1.margin + 0.5).abs() <= 1e-12);
    assert!(r2.member_pd && (r2.margin - WORKED_LAMBDA_MIN).abs() <= 1e-6);
    // Interior membership is whatever the computed margin says; it must sit
    // between the endpoint margins here and stay order-consistent.
    assert!(rm.margin >= r1.margin - 1e-9 && rm.margin <= r2.margin + 1e-9);
    assert!(c.p1_cross_check && c.p2_cross_check);
    assert!(c.order_violation.is_none());
}

#[test]
fn classify_negative_identity() {
    let c = classify_cones_with_resolution(&SymMatrix::identity(3).scaled(-1.0), &[1.5], 64)
        .unwrap();
    for r in &c.reports {
        assert!(!r.member_pd && !r.member_psd, "{r:?}");
        assert!((r.margin + 1.0).abs() <= 1e-9);
    }
    assert!(c.order_violation.is_none());
}

#[test]
fn classify_preserves_cone_order_on_random_matrices() {
    for seed in 0..6u64 {
        let q = random_sym(3, 400 + seed);
        let c = classify_cones_with_resolution(&q, &[1.25, 1.5, 1.75], 64).unwrap();
        assert!(c.order_violation.is_none(), "seed={seed}: {:?}", c.order_violation);
        assert!(c.p1_cross_check, "seed={seed}");
        assert!(c.p2_cross_check, "seed={seed}");
        let ps: Vec<f64> = c.reports.iter().map(|r| r.p).collect();
        assert_eq!(ps, vec![1.0, 1.25, 1.5, 1.75, 2.0]);
    }
}

#[test]
fn operator_norm_bound_interpolates() {
    let q = worked_matrix();
    let l1 = operator_p_norm_bound(&q, 1.0);
    assert!((l1 - 5.5).abs() <= 1e-12);
    let l2 = operator_p_norm_bound(&q, 2.0);
    let expected_l2 = (5.0 + 18.0f64.sqrt()) / 2.0;
    assert!((l2 - expected_l2).abs() <= 1e-9);
    let mid = operator_p_norm_bound(&q, 1.5);
    assert!((mid - l1.powf(1.0 / 3.0) * l2.powf(2.0 / 3.0)).abs() <= 1e-9);
    assert!(mid >= l2 - 1e-9 && mid <= l1 + 1e-9);
}

#[test]
fn matrix_text_round_trip() {
    let q = worked_matrix();
    let text = matrix_to_text(&q);
    let q2 = parse_matrix_text(&text).unwrap();
    assert_eq!(q, q2);
    let with_comment = format!("# worked example\n\n{text}");
    assert_eq!(parse_matrix_auto(&with_comment).unwrap(), q);
}

#[test]
fn matrix_json_round_trip() {
    let q = random_sym(3, 7);
    let json = matrix_to_json(&q);
    assert_eq!(parse_matrix_json(&json).unwrap(), q);
    assert_eq!(parse_matrix_auto(&json).unwrap(), q);
}

#[test]
fn matrix_parse_errors() {
    assert!(matches!(
        parse_matrix_text("1 2\n3"),
        Err(PpdError::Shape(_))
    ));
    assert!(matches!(
        parse_matrix_text("1 x\n3 4"),
        Err(PpdError::Parse(_))
    ));
    assert!(matches!(
        parse_matrix_json("[[1, 2], [2]]"),
        Err(PpdError::Shape(_))
    ));
    assert!(parse_matrix_json("not json").is_err());
}

#[test]
fn reports_serialize_round_trip() {
    let rep = ppd_margin(&worked_matrix(), 1.5, 64).unwrap();
    let json = serde_json::to_string(&rep).unwrap();
    let back: PpdReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.p, rep.p);
    assert_eq!(back.margin, rep.margin);
    assert_eq!(back.witness, rep.witness);
    let con = contraction_check(&SymMatrix::identity(2), 2.0, &[0.1, 0.2]).unwrap();
    let json = serde_json::to_string(&con).unwrap();
    let back: ContractionReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back.rows.len(), 2);
}
