use std::sync::Arc;

use cordes_core::norms::{x_norm_with, y_norm_with};
use cordes_core::{pointwise_bound_check, x_norm, y_norm, GridSpec, LogGrid, ModeProfile, ModeSet, NormOptions, ProblemParams};
use proptest::prelude::*;

fn params() -> ProblemParams {
    ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap()
}

fn grid() -> Arc<LogGrid> {
    Arc::new(GridSpec::default().build())
}

/// `Σ_k c_k r^{k+1}(1 − r)` on modes `0..3`.
fn field(grid: &Arc<LogGrid>, c: [f64; 3]) -> ModeSet {
    ModeSet {
        modes: (0..3)
            .map(|k| {
                let e = k as f64 + 1.0;
                let ck = c[k];
                ModeProfile::from_fn(k, grid.clone(), move |r| {
                    (
                        ck * (r.powf(e) - r.powf(e + 1.0)),
                        ck * (e * r.powf(e - 1.0) - (e + 1.0) * r.powf(e)),
                        ck * (e * (e - 1.0) * r.powf(e - 2.0) - (e + 1.0) * e * r.powf(e - 1.0)),
                    )
                })
            })
            .collect(),
    }
}

#[test]
fn power_law_extremal_has_flat_annulus_profile() {
    let g = grid();
    for sigma in [0.1, 0.25, 0.4] {
        let p = params().with_sigma(sigma);
        let f = ModeSet::single(ModeProfile::from_values(0, g.clone(), |r| r.powf(-(2.0 + sigma))));
        let rep = y_norm(&f, &p).unwrap();
        let vals: Vec<f64> = rep.per_annulus.iter().map(|a| a.value).collect();
        let max = vals.iter().copied().fold(0.0, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        assert!(max / min <= 1.02, "sigma = {sigma}: {}", max / min);
        assert!(!rep.divergent);
    }
}

#[test]
fn refinement_is_stable() {
    let p = params();
    let coarse = GridSpec::default();
    let fine = GridSpec { per_octave: 128, ..coarse };
    let c = [1.0, -0.7, 0.4];
    let set_c = field(&Arc::new(coarse.build()), c);
    let set_f = field(&Arc::new(fine.build()), c);
    let opts = NormOptions::default();
    for (a, b) in [
        (x_norm_with(&set_c, &p, &opts).unwrap().norm_value, x_norm_with(&set_f, &p, &opts.refined()).unwrap().norm_value),
        (y_norm_with(&set_c, &p, &opts).unwrap().norm_value, y_norm_with(&set_f, &p, &opts.refined()).unwrap().norm_value),
    ] {
        assert!((a - b).abs() <= 0.02 * b, "{a} vs {b}");
    }
}

#[test]
fn pointwise_bound_holds_for_smooth_fields() {
    let set = field(&grid(), [1.0, 0.5, -0.25]);
    let pb = pointwise_bound_check(&set, &params()).unwrap();
    assert!(pb.ok, "{pb:?}");
}

#[test]
fn achieving_annulus_is_reported() {
    let set = field(&grid(), [1.0, 0.0, 0.0]);
    let rep = x_norm(&set, &params()).unwrap();
    assert!(rep.per_annulus.iter().any(|a| a.s == rep.achieving_s && a.value == rep.norm_value));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn norms_are_homogeneous(c0 in -3.0f64..3.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, lam in -5.0f64..5.0) {
        let g = grid();
        let p = params();
        let f = field(&g, [c0, c1, c2]);
        let fl = f.scaled(lam);
        for norm in [x_norm, y_norm] {
            let a = norm(&fl, &p).unwrap().norm_value;
            let b = lam.abs() * norm(&f, &p).unwrap().norm_value;
            prop_assert!((a - b).abs() <= 1e-10 * (1.0 + b));
        }
    }

    #[test]
    fn norms_satisfy_triangle_inequality(a in prop::array::uniform3(-3.0f64..3.0), b in prop::array::uniform3(-3.0f64..3.0)) {
        let g = grid();
        let p = params();
        let (fa, fb) = (field(&g, a), field(&g, b));
        let sum = fa.plus(&fb);
        for norm in [x_norm, y_norm] {
            let lhs = norm(&sum, &p).unwrap().norm_value;
            let rhs = norm(&fa, &p).unwrap().norm_value + norm(&fb, &p).unwrap().norm_value;
            prop_assert!(lhs <= rhs * (1.0 + 1e-10) + 1e-10);
        }
    }
}
