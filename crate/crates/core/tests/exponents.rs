use cordes_core::{
    cordes_ratio, critical_exponent, effective_dimension, indicial_roots, mode_eigenvalue, sigma_window, LabError,
    ProblemParams, TheoremCase,
};
use proptest::prelude::*;

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn closed_form_values() {
    assert_eq!(critical_exponent(4, 1.0), 9.0);
    assert_eq!(effective_dimension(3, 1.0), 2.0);
    assert_eq!(effective_dimension(4, 1.0), 2.5);
    assert!((cordes_ratio(4, 1.0) - 25.0 / 7.0).abs() < 1e-15);
    for n in 3..=10 {
        for k in 0..=8 {
            assert_eq!(mode_eigenvalue(k, n), (k * (k + n - 2)) as f64);
        }
    }
}

#[test]
fn cordes_ratio_crossing_is_located_by_bisection() {
    for n in 3..=12usize {
        let target = n as f64 / (n as f64 - 2.0);
        let root = bisect(1e-6, 50.0, |g| cordes_ratio(n, g) - (n as f64 - 1.0), 1e-12);
        assert!((root - target).abs() < 1e-10, "N = {n}: {root} vs {target}");
        assert!(cordes_ratio(n, 0.5 * target) > n as f64 - 1.0);
        assert!(cordes_ratio(n, 2.0 * target) < n as f64 - 1.0);
    }
}

#[test]
fn case_windows_reject_other_regimes() {
    let err = TheoremCase::classify(&ProblemParams::new(4, 1.0, 3.0, 0.6, 5.0).unwrap()).unwrap_err();
    assert!(matches!(err, LabError::Window { .. }));
    assert!(err.is_hypothesis_violation());
    assert!(sigma_window(TheoremCase::Case2, 4, 1.0).is_err());
    assert!(ProblemParams::new(2, 1.0, 3.0, 0.1, 5.0).is_err());
    assert!(ProblemParams::new(4, 1.0, 3.0, 0.1, 4.0).is_err());
}

proptest! {
    #[test]
    fn indicial_roots_solve_their_quadratic(n in 3usize..12, gamma in 0.01f64..20.0, k in 0usize..=8) {
        let params = ProblemParams::new(n, gamma, 2.0, 0.0, n as f64 + 1.0).unwrap();
        let r = indicial_roots(k, &params);
        let scale = 1.0 + mode_eigenvalue(k, n) + (1.0 + gamma) * r.beta_minus.powi(2).max(r.beta_plus.powi(2));
        prop_assert!(r.quadratic(r.beta_plus, n, gamma).abs() <= 1e-12 * scale);
        prop_assert!(r.quadratic(r.beta_minus, n, gamma).abs() <= 1e-12 * scale);
        prop_assert!(r.beta_minus <= 0.0 && r.beta_plus >= 0.0);
        prop_assert!(r.beta_minus <= r.beta_plus);
    }

    #[test]
    fn effective_dimension_is_affine_identity(n in 3usize..20, gamma in 0.0f64..50.0) {
        let d = effective_dimension(n, gamma);
        prop_assert!(((1.0 + gamma) * d - (n as f64 + gamma)).abs() < 1e-9 * (1.0 + gamma + n as f64));
        prop_assert!(d > 1.0 && d <= n as f64);
    }

    #[test]
    fn critical_exponent_matches_effective_dimension(n in 3usize..12, frac in 0.01f64..0.99) {
        // p_{N,γ} is the Sobolev exponent (N_γ+2)/(N_γ−2) of the effective dimension.
        let gamma = frac * (n as f64 - 2.0);
        let d = effective_dimension(n, gamma);
        let p = critical_exponent(n, gamma);
        prop_assert!((p - (d + 2.0) / (d - 2.0)).abs() <= 1e-9 * p);
    }

    #[test]
    fn windows_are_nonempty_and_ordered(n in 3usize..12, frac in 0.02f64..0.98) {
        let gamma = frac * (n as f64 - 2.0);
        let w1 = sigma_window(TheoremCase::Case1, n, gamma).unwrap();
        let w3 = sigma_window(TheoremCase::Case3, n, gamma).unwrap();
        prop_assert!(w1.lower == 0.0 && w1.upper > 0.0);
        prop_assert!(w3.lower < 0.0 && w3.upper == 0.0);
        let w2 = sigma_window(TheoremCase::Case2, n, (n as f64 - 2.0) / frac).unwrap();
        prop_assert!(w2.lower < 0.0 && w2.lower > -1.0);
    }
}
