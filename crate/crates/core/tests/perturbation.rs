use std::sync::Arc;

use cordes_core::modes::project_field;
use cordes_core::perturb::{
    dilation_oracle, fixed_point_domain_with, linearization_check, sweep_ratio, taylor_constant, DomainOptions,
    CP_SWEEP_SAMPLES,
};
use cordes_core::zonal::AngularRule;
use cordes_core::{
    domain_map_invert, fixed_point_zero_order, maximum_principle_barrier, perturbation_terms, radial_solution,
    solve_cordes_mode, taylor_remainders, zero_order_rhs, DomainMap, ForcingKind, GridSpec, ModeProfile, ModeSet,
    ProblemParams, PsiKind, RadialProfile, ZeroOrderConfig,
};
use proptest::prelude::*;

fn case_x() -> ProblemParams {
    ProblemParams::new(4, 3.0, 3.0, -0.125, 5.0).unwrap()
}

fn config(params: ProblemParams, w: &RadialProfile, delta: f64, g: ForcingKind) -> ZeroOrderConfig {
    ZeroOrderConfig::new(params, delta, g.modes(params.n, &w.grid, 8).unwrap())
}

fn assert_contracts(trace: &cordes_core::FixedPointTrace) {
    assert!(trace.converged);
    let k = trace.contraction_bound.expect("enough iterations for a bound");
    assert!(k < 0.9, "K0 = {k}");
    for r in trace.contraction_ratios.iter().skip(1) {
        assert!(*r <= k);
    }
}

#[test]
fn zero_delta_is_a_fixed_point() {
    let params = case_x();
    let w = radial_solution(&params).unwrap();
    let sol = fixed_point_zero_order(&config(params, &w, 0.0, ForcingKind::One), &w).unwrap();
    assert_eq!(sol.trace.iterations, 1);
    assert!(sol.phi.modes.iter().all(|m| m.sup_abs() == 0.0));
}

#[test]
fn radial_forcing_with_zero_phi_is_pure_mode_zero() {
    let params = case_x();
    let w = radial_solution(&params).unwrap();
    let cfg = config(params, &w, 0.02, ForcingKind::RadialBump);
    let zero = ModeSet {
        modes: (0..=8).map(|k| ModeProfile::zero(k, w.grid.clone())).collect(),
    };
    let f = zero_order_rhs(&zero, &w, &cfg).unwrap();
    assert!(f.modes.mode(0).unwrap().sup_abs() > 0.0);
    assert!(f.modes.modes.iter().filter(|m| m.k > 0).all(|m| m.sup_abs() < 1e-13));
}

#[test]
fn projection_is_stable_under_angular_refinement() {
    let params = case_x();
    let w = radial_solution(&params).unwrap();
    let grid = w.grid.clone();
    let kmax = 8;
    let phi = ModeSet {
        modes: (0..=kmax)
            .map(|k| ModeProfile::from_values(k, grid.clone(), move |r| 0.05 * (1.0 - r) * r.powi(k as i32) / (1.0 + k as f64)))
            .collect(),
    };
    let project = |nodes: usize| {
        let rule = AngularRule::with_nodes(params.n, kmax, nodes);
        let field = phi.synthesize(&rule, false).unwrap();
        let nt = rule.len();
        let values: Vec<f64> = field
            .f
            .iter()
            .enumerate()
            .map(|(idx, ph)| {
                let wi = w.w[idx / nt];
                (1.01 + 0.01 * rule.theta[idx % nt].cos()) * (wi + ph).abs().powf(3.0) - wi.powi(3) - 3.0 * wi * wi * ph
            })
            .collect();
        project_field(&values, &grid, &rule, kmax).unwrap().modes
    };
    let coarse = project(64);
    let fine = project(128);
    assert!(coarse.sup_diff(&fine).unwrap() < 1e-9);
}

#[test]
fn frozen_taylor_constant_covers_an_independent_sweep() {
    for p in [1.5, 2.0, 3.0] {
        let c = taylor_constant(p).unwrap();
        let fresh = sweep_ratio(p, CP_SWEEP_SAMPLES, 0xBADC_0DE);
        assert!(fresh <= c, "p = {p}: {fresh} > {c}");
    }
}

#[test]
fn zero_order_case_x_converges_with_certificates() {
    let params = case_x();
    let w = radial_solution(&params).unwrap();
    let cfg = config(params, &w, 0.01, ForcingKind::One);
    let sol = fixed_point_zero_order(&cfg, &w).unwrap();
    assert_contracts(&sol.trace);
    assert!(sol.trace.final_residual <= 10.0 * cfg.tol, "{:e}", sol.trace.final_residual);
    assert!(sol.positivity.certified && sol.positivity.implication_holds);
    let lin = linearization_check(&cfg, &w).unwrap();
    assert!(lin.within, "{lin:?}");
}

#[test]
fn zero_order_split_regime_converges_with_certificates() {
    let params = ProblemParams::new(4, 1.0, 4.0, -0.3, 5.0).unwrap();
    assert!(params.p > (4.0 + 2.0) / (4.0 - 2.0));
    let w = radial_solution(&params).unwrap();
    let cfg = config(params, &w, 0.01, ForcingKind::RadialBump);
    let sol = fixed_point_zero_order(&cfg, &w).unwrap();
    assert_contracts(&sol.trace);
    assert!(sol.trace.final_residual <= 10.0 * cfg.tol, "{:e}", sol.trace.final_residual);
    assert!(sol.positivity.certified && sol.positivity.implication_holds);
}

#[test]
fn solution_size_scales_linearly_in_delta() {
    let params = case_x();
    let w = radial_solution(&params).unwrap();
    let q: Vec<f64> = [0.02, 0.01, 0.005]
        .iter()
        .map(|&d| {
            let sol = fixed_point_zero_order(&config(params, &w, d, ForcingKind::One), &w).unwrap();
            cordes_core::x_norm(&sol.phi, &params).unwrap().norm_value / d
        })
        .collect();
    assert!(q.iter().all(|v| v.is_finite() && *v > 0.0));
    assert!((q[2] - q[1]).abs() < (q[1] - q[0]).abs(), "{q:?}");
    assert!((q[2] - q[1]).abs() <= 0.05 * q[2], "{q:?}");
}

#[test]
fn perturbation_terms_vanish_without_perturbation() {
    let params = ProblemParams::new(4, 1.0, 4.0, 0.1, 5.0).unwrap();
    let w = radial_solution(&params).unwrap();
    let rule = AngularRule::new(4, 4);
    let v = ModeSet {
        modes: vec![
            ModeProfile::from_fn(0, w.grid.clone(), |r| (1.0 - r * r, -2.0 * r, -2.0)),
            ModeProfile::from_fn(2, w.grid.clone(), |r| (r * r * (1.0 - r), 2.0 * r - 3.0 * r * r, 2.0 - 6.0 * r)),
        ],
    };
    for psi in [PsiKind::Dilation, PsiKind::AxialQuadratic, PsiKind::RadialBump] {
        let map = DomainMap::new(psi, 0.0, 4).unwrap();
        let f = perturbation_terms(&v, &map, &params, &rule).unwrap();
        for field in [&f.e_delta, &f.e_ij, &f.coefficient_term, &f.coefficient_delta, &f.total] {
            assert!(field.iter().all(|x| *x == 0.0), "{psi:?}");
        }
    }
    let map = DomainMap::new(PsiKind::Dilation, 0.05, 4).unwrap();
    let f = perturbation_terms(&v, &map, &params, &rule).unwrap();
    assert!(f.coefficient_delta.iter().all(|x| x.abs() < 1e-15));
    assert!(f.total.iter().any(|x| x.abs() > 1e-6));
}

#[test]
fn domain_problem_matches_dilation_oracle() {
    let params = ProblemParams::new(4, 1.0, 4.0, 0.1, 5.0).unwrap();
    let w = radial_solution(&params).unwrap();
    let map = DomainMap::new(PsiKind::Dilation, 0.01, 4).unwrap();
    let sol = fixed_point_domain_with(&map, &params, &w, &DomainOptions::default()).unwrap();
    assert_contracts(&sol.trace);
    assert!(sol.relative_error(dilation_oracle(&w, 4.0, 0.01)).unwrap() <= 1e-6);
    assert!(sol.transformed_residual <= 1e-6);
    assert!(sol.trace.final_residual <= 10.0 * sol.trace.tol);
    let barrier = sol.barrier.unwrap();
    assert!(barrier.barrier_ok && barrier.margin > 0.0);
    assert!(sol.boundedness.unwrap().bounded);
}

#[test]
fn domain_problem_without_perturbation_is_trivial() {
    let params = case_x();
    let w = radial_solution(&params).unwrap();
    let map = DomainMap::new(PsiKind::AxialQuadratic, 0.0, 4).unwrap();
    let opts = DomainOptions {
        certify: false,
        ..DomainOptions::default()
    };
    let sol = fixed_point_domain_with(&map, &params, &w, &opts).unwrap();
    assert!(sol.phi.modes.iter().all(|m| m.sup_abs() == 0.0));
}

#[test]
fn axial_domain_perturbation_converges_positive() {
    let params = ProblemParams::new(3, 2.0, 5.0, -0.15, 4.0).unwrap();
    let w = radial_solution(&params).unwrap();
    let map = DomainMap::new(PsiKind::AxialQuadratic, 0.005, 3).unwrap();
    let opts = DomainOptions {
        kmax: 12,
        ..DomainOptions::default()
    };
    let sol = fixed_point_domain_with(&map, &params, &w, &opts).unwrap();
    assert_contracts(&sol.trace);
    assert!(sol.trace.final_residual <= 1e-6);
    let pos = sol.positivity.unwrap();
    assert!(pos.certified && pos.implication_holds);
}

#[test]
fn barrier_trivial_and_model_forcing() {
    let params = ProblemParams::new(8, 1.0, 2.0, 0.5, 9.0).unwrap();
    let grid = Arc::new(GridSpec::default().build());
    let zero = ModeSet::single(ModeProfile::zero(0, grid.clone()));
    let rep = maximum_principle_barrier(&zero, &zero, &params, None).unwrap();
    assert!(rep.barrier_ok && rep.margin == 0.0);

    let psi0 = AngularRule::new(8, 0).psi[0][0];
    let sp = params.sigma * params.p;
    let f = ModeProfile::from_values(0, grid.clone(), |r| -r.powf(-sp) / psi0);
    let u = solve_cordes_mode(0, &f, &params).unwrap().solution;
    let rep = maximum_principle_barrier(&ModeSet::single(u), &ModeSet::single(f), &params, None).unwrap();
    assert!(rep.barrier_ok && rep.margin > 0.0, "{rep:?}");
    assert_eq!(rep.stabilized, Some(true));
    let last = &rep.exhaustion[rep.exhaustion.len() - 2];
    assert!(last.diff_to_next.unwrap() <= 1e-6);
}

#[test]
fn barrier_rejects_negative_denominator() {
    let grid = Arc::new(GridSpec::default().build());
    let zero = ModeSet::single(ModeProfile::zero(0, grid));
    let params = ProblemParams::new(4, 1.0, 3.0, 0.6, 5.0).unwrap();
    let err = maximum_principle_barrier(&zero, &zero, &params, None).unwrap_err();
    assert!(err.is_hypothesis_violation());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn taylor_bounds_hold(w in 0.01f64..10.0, phi in -5.0f64..5.0, phi_hat in -5.0f64..5.0, pi in 0usize..3) {
        let p = [1.5, 2.0, 3.0][pi];
        prop_assert!(taylor_remainders(w, phi, phi_hat, p).unwrap().holds());
    }

    #[test]
    fn domain_map_round_trip(x0 in -0.6f64..0.6, x1 in -0.6f64..0.6, x2 in -0.6f64..0.6, delta in 0.0f64..0.05, pk in 0usize..3) {
        let psi = [PsiKind::Dilation, PsiKind::AxialQuadratic, PsiKind::RadialBump][pk];
        let map = DomainMap::new(psi, delta, 3).unwrap();
        let x = [x0, x1, x2];
        let y = map.forward(&x);
        let back = domain_map_invert(&map, &y).unwrap();
        for i in 0..3 {
            prop_assert!((back[i] - x[i]).abs() <= 1e-12);
        }
        if psi == PsiKind::Dilation {
            for i in 0..3 {
                prop_assert!((back[i] - y[i] / (1.0 + delta)).abs() <= 1e-14);
            }
        }
    }
}
