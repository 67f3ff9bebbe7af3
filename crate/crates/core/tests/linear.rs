use std::sync::Arc;

use cordes_core::linear::apply_mode_operator;
use cordes_core::{
    k0_green_apply, kernel_check, mode_eigenvalue, radial_solution, solve_cordes_mode, solve_linearized_mode, GridSpec,
    LogGrid, ModeProfile, ProblemParams, TheoremCase,
};
use proptest::prelude::*;

fn grid() -> Arc<LogGrid> {
    Arc::new(GridSpec::default().build())
}

fn case_params() -> [(TheoremCase, ProblemParams); 3] {
    [
        (TheoremCase::Case1, ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap()),
        (TheoremCase::Case2, ProblemParams::new(4, 3.0, 3.0, -0.125, 5.0).unwrap()),
        (TheoremCase::Case3, ProblemParams::new(4, 1.0, 3.0, -0.3, 5.0).unwrap()),
    ]
}

/// `a = r^{k+2}(1 − r)` with exact derivatives, and `M_k a` in closed form.
fn test_pair(k: usize, params: &ProblemParams, grid: &Arc<LogGrid>) -> (ModeProfile, ModeProfile) {
    let e = k as f64 + 2.0;
    let a = ModeProfile::from_fn(k, grid.clone(), |r| {
        (
            r.powf(e) - r.powf(e + 1.0),
            e * r.powf(e - 1.0) - (e + 1.0) * r.powf(e),
            e * (e - 1.0) * r.powf(e - 2.0) - (e + 1.0) * e * r.powf(e - 1.0),
        )
    });
    let g1 = 1.0 + params.gamma;
    let nm1 = params.dim() - 1.0;
    let lam = mode_eigenvalue(k, params.n);
    let coef = |q: f64| g1 * q * (q - 1.0) + nm1 * q - lam;
    let b = ModeProfile::from_values(k, grid.clone(), |r| coef(e) * r.powf(e - 2.0) - coef(e + 1.0) * r.powf(e - 1.0));
    (a, b)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn apply_then_solve_recovers_the_mode() {
    let g = grid();
    for (case, params) in case_params() {
        for k in [0usize, 1, 2, 4].into_iter().filter(|k| *k >= case.first_mode()) {
            let (a, b) = test_pair(k, &params, &g);
            let rep = solve_cordes_mode(k, &b, &params).unwrap();
            let err: Vec<f64> = rep.solution.a.iter().zip(&a.a).map(|(x, y)| x - y).collect();
            assert!(sup(&err) <= 1e-7 * sup(&a.a), "{case:?} k = {k}: {:e}", sup(&err) / sup(&a.a));
            assert!(rep.invariants_hold(), "{case:?} k = {k}: {rep:?}");
        }
    }
}

#[test]
fn solve_then_apply_recovers_the_data() {
    let g = grid();
    for (case, params) in case_params() {
        for k in [0usize, 1, 2, 4].into_iter().filter(|k| *k >= case.first_mode()) {
            let b = ModeProfile::from_values(k, g.clone(), |r| r.powi(k as i32) * (1.0 - 2.0 * r + 3.0 * r * r));
            let rep = solve_cordes_mode(k, &b, &params).unwrap();
            let back = apply_mode_operator(&rep.solution, &params);
            let err: Vec<f64> = back.iter().zip(&b.a).map(|(x, y)| x - y).collect();
            assert!(sup(&err) <= 1e-7 * sup(&b.a), "{case:?} k = {k}: {:e}", sup(&err) / sup(&b.a));
            assert!(rep.boundary_value <= 1e-12);
        }
    }
}

#[test]
fn k0_reproduces_quadratic_for_unit_data() {
    let g = grid();
    for (_, params) in case_params() {
        let sol = k0_green_apply(&vec![1.0; g.len()], &g, &params).unwrap();
        let c = 2.0 * (params.dim() + params.gamma);
        for (r, u) in g.radii().iter().zip(&sol.u.a) {
            assert!((u - (r * r - 1.0) / c).abs() <= 1e-10);
        }
    }
}

#[test]
fn case3_rejects_the_radial_mode() {
    let (_, params) = case_params()[2];
    let b = ModeProfile::from_values(0, grid(), |_| 1.0);
    let err = solve_cordes_mode(0, &b, &params).unwrap_err();
    assert!(err.is_hypothesis_violation());
}

#[test]
fn kernel_is_trivial_for_reference_sets() {
    for (n, gamma, p, sigma) in [(4, 1.0, 3.0, 0.25), (3, 2.0, 5.0, -0.15)] {
        let params = ProblemParams::new(n, gamma, p, sigma, n as f64 + 1.0).unwrap();
        let w = radial_solution(&params).unwrap();
        for k in 0..=8 {
            let kc = kernel_check(k, &w, &params).unwrap();
            assert!(kc.trivial, "{params:?} k = {k}: {kc:?}");
        }
        assert!(w.w_prime_at_one().abs() > 1e-3);
    }
}

#[test]
fn linearized_solve_inverts_its_operator() {
    let params = ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap();
    let w = radial_solution(&params).unwrap();
    for k in [0usize, 1, 3] {
        let b = ModeProfile::from_values(k, w.grid.clone(), |r| r.powi(k as i32) * (1.0 + r));
        let rep = solve_linearized_mode(k, &b, &w, &params).unwrap();
        assert!(rep.ode_residual_sup <= 1e-7, "k = {k}: {rep:?}");
        assert!(rep.boundary_value <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn mode_solve_is_linear(c0 in -2.0f64..2.0, c1 in -2.0f64..2.0, alpha in -3.0f64..3.0, k in 0usize..4) {
        let g = grid();
        let params = case_params()[0].1;
        let b1 = ModeProfile::from_values(k, g.clone(), move |r| c0 + c1 * r);
        let b2 = ModeProfile::from_values(k, g.clone(), |r| r * r);
        let sum = b1.combine(alpha, &b2, 1.0).unwrap();
        let s1 = solve_cordes_mode(k, &b1, &params).unwrap().solution;
        let s2 = solve_cordes_mode(k, &b2, &params).unwrap().solution;
        let s = solve_cordes_mode(k, &sum, &params).unwrap().solution;
        let scale = 1.0 + sup(&s1.a) * alpha.abs() + sup(&s2.a);
        for i in 0..s.a.len() {
            prop_assert!((s.a[i] - alpha * s1.a[i] - s2.a[i]).abs() <= 1e-10 * scale);
        }
    }
}
