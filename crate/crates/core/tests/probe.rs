use cordes_core::{operator_norm_probe, ProblemParams};

#[test]
fn operator_norm_estimates_level_off() {
    let params = ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap();
    let probe = operator_norm_probe(&params, &[4, 8, 16], 64, 2024).unwrap();
    let d8 = probe.estimate(8).unwrap();
    let d16 = probe.estimate(16).unwrap();
    assert!(d8 > 0.0 && d16 >= d8);
    assert!((d16 - d8).abs() <= 0.25 * d8, "D_8 = {d8}, D_16 = {d16}");
    assert!(probe.estimate(4).unwrap() <= d8);
}

#[test]
fn probe_is_reproducible() {
    let params = ProblemParams::new(4, 3.0, 3.0, -0.125, 5.0).unwrap();
    let a = operator_norm_probe(&params, &[2, 4], 4, 11).unwrap();
    let b = operator_norm_probe(&params, &[2, 4], 4, 11).unwrap();
    assert_eq!(a.estimate(4).unwrap().to_bits(), b.estimate(4).unwrap().to_bits());
}
