use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{LabError, Result};

/// Samples in the sweep that fixes `C_p`.
pub const CP_SWEEP_SAMPLES: usize = 100_000;
/// Safety factor applied to the swept constant.
pub const CP_SAFETY: f64 = 2.0;
const CP_SEED: u64 = 0x00C0_FFEE;

/// Second-order Taylor remainders of `s ↦ |s|^p` about `w > 0` and the
/// matching bounds `C_p(w^{p−2}φ² + |φ|^p)` and
/// `C_p(w^{p−2}(|φ|+|φ̂|) + |φ|^{p−1} + |φ̂|^{p−1})|φ̂−φ|`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TaylorRemainders {
    pub r1: f64,
    pub r2: f64,
    pub bound1: f64,
    pub bound2: f64,
}

impl TaylorRemainders {
    pub fn holds(&self) -> bool {
        self.r1.abs() <= self.bound1 * (1.0 + 1e-12) && self.r2.abs() <= self.bound2 * (1.0 + 1e-12)
    }
}

/// Remainders with a given constant `c_p`.
pub fn taylor_remainders_with(w: f64, phi: f64, phi_hat: f64, p: f64, c_p: f64) -> Result<TaylorRemainders> {
    if !(w > 0.0) {
        return Err(LabError::Domain(format!("Taylor remainders need w > 0, got {w}")));
    }
    let (s1, s2) = shapes(w, phi, phi_hat, p);
    let r1 = power_remainder(w, phi, p);
    let r2 = power_remainder(w, phi_hat, p) - r1;
    Ok(TaylorRemainders {
        r1,
        r2,
        bound1: c_p * s1,
        bound2: c_p * s2,
    })
}

/// `|w+φ|^p − w^p − p w^{p−1}φ` for `w ≥ 0`. For `|φ| ≪ w` the binomial
/// series in `s = φ/w` replaces the direct difference, which would lose all
/// digits to cancellation.
pub fn power_remainder(w: f64, phi: f64, p: f64) -> f64 {
    let s = if w > 0.0 { phi / w } else { f64::INFINITY };
    if s.abs() >= SERIES_LIMIT {
        return (w + phi).abs().powf(p) - w.powf(p) - p * w.powf(p - 1.0) * phi;
    }
    // Σ_{j≥2} binom(p, j) s^j
    let mut c = p * (p - 1.0) / 2.0;
    let mut sum = c * s * s;
    for j in 2..SERIES_TERMS {
        c *= (p - j as f64) / (j as f64 + 1.0);
        sum += c * s.powi(j as i32 + 1);
    }
    w.powf(p) * sum
}

const SERIES_LIMIT: f64 = 0.1;
const SERIES_TERMS: usize = 24;

/// Remainders with the frozen sweep constant for `p`.
pub fn taylor_remainders(w: f64, phi: f64, phi_hat: f64, p: f64) -> Result<TaylorRemainders> {
    taylor_remainders_with(w, phi, phi_hat, p, taylor_constant(p)?)
}

fn shapes(w: f64, phi: f64, phi_hat: f64, p: f64) -> (f64, f64) {
    let wp2 = w.powf(p - 2.0);
    let s1 = wp2 * phi * phi + phi.abs().powf(p);
    let s2 = (wp2 * (phi.abs() + phi_hat.abs()) + phi.abs().powf(p - 1.0) + phi_hat.abs().powf(p - 1.0)) * (phi_hat - phi).abs();
    (s1, s2)
}

/// Largest ratios `|R1|/shape1`, `|R2|/shape2` over `samples` seeded draws of
/// `(w, φ, φ̂) ∈ (0, 10] × [−5, 5]²`.
pub fn sweep_ratio(p: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ p.to_bits());
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let w = 10.0 - rng.random_range(0.0..10.0);
        let phi = rng.random_range(-5.0..5.0);
        let phi_hat = rng.random_range(-5.0..5.0);
        let t = taylor_remainders_with(w, phi, phi_hat, p, 1.0).expect("w > 0 by construction");
        if t.bound1 > 0.0 {
            worst = worst.max(t.r1.abs() / t.bound1);
        }
        if t.bound2 > 0.0 {
            worst = worst.max(t.r2.abs() / t.bound2);
        }
    }
    worst
}

/// `C_p`: the seeded sweep maximum times the safety factor.
pub fn taylor_constant(p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(LabError::Domain(format!("Taylor constant needs p > 1, got {p}")));
    }
    Ok(CP_SAFETY * sweep_ratio(p, CP_SWEEP_SAMPLES, CP_SEED))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_cases() {
        let t = taylor_remainders_with(1.3, 0.0, 0.0, 3.0, 1.0).unwrap();
        assert_eq!(t.r1, 0.0);
        assert_eq!(t.r2, 0.0);
        let t = taylor_remainders_with(0.7, -0.4, -0.4, 1.5, 1.0).unwrap();
        assert_eq!(t.r2, 0.0);
    }

    #[test]
    fn series_branch_matches_integral_remainder() {
        // R = p(p−1)φ² ∫_0^1 (1−t)(w+tφ)^{p−2} dt by Gauss-Legendre.
        let (x, wt) = crate::quadrature::gauss_legendre(24);
        for p in [1.5, 2.0, 3.0, 4.5] {
            for s in [-0.09, -2e-4, 3e-7, 9.9e-4, 0.05, 0.2, -0.5] {
                let w = 1.7f64;
                let phi = s * w;
                let integral: f64 = x
                    .iter()
                    .zip(&wt)
                    .map(|(xi, wi)| {
                        let t = 0.5 * (xi + 1.0);
                        0.5 * wi * (1.0 - t) * (w + t * phi).powf(p - 2.0)
                    })
                    .sum();
                let exact = p * (p - 1.0) * phi * phi * integral;
                let got = power_remainder(w, phi, p);
                assert!((got - exact).abs() <= 1e-12 * exact.abs(), "p = {p}, s = {s}");
            }
        }
        assert_eq!(power_remainder(2.0, 0.0, 3.0), 0.0);
        assert!((power_remainder(0.0, 0.5, 2.0) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_nonpositive_w() {
        assert!(taylor_remainders(0.0, 1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn quadratic_remainder_is_exact_square() {
        // p = 2, w + φ > 0: R1 = φ².
        let t = taylor_remainders_with(2.0, 0.5, 0.0, 2.0, 1.0).unwrap();
        assert!((t.r1 - 0.25).abs() < 1e-14);
    }
}
