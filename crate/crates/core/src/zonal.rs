//! Zonal (axisymmetric) spherical harmonics on `S^{N−1}` and the polar-angle
//! quadrature used to integrate over the sphere.
//!
//! `ψ_k(θ) = c_k C_k^{α}(cos θ)` with `α = (N−2)/2`, normalised so that
//! `∫_{S^{N−1}} ψ_k² = 1`.

use std::f64::consts::PI;

use crate::quadrature::gauss_legendre;

/// `Γ(x)` for positive integers and half-integers.
pub fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!(
        (2.0 * x - twice).abs() < 1e-12 && twice >= 1.0,
        "gamma_half_integer needs a positive (half-)integer, got {x}"
    );
    let m = twice as usize;
    if m % 2 == 0 {
        (1..m / 2).map(|i| i as f64).product()
    } else {
        // Γ(1/2) = √π, Γ(x+1) = xΓ(x)
        let mut v = PI.sqrt();
        let mut y = 0.5;
        while y < x - 0.25 {
            v *= y;
            y += 1.0;
        }
        v
    }
}

/// Surface area of the unit sphere `S^m ⊂ R^{m+1}`: `2π^{(m+1)/2}/Γ((m+1)/2)`.
pub fn sphere_area(m: usize) -> f64 {
    let h = (m as f64 + 1.0) / 2.0;
    2.0 * PI.powf(h) / gamma_half_integer(h)
}

/// `∫_{−1}^{1} C_k^α(z)² (1−z²)^{α−1/2} dz` for `α = (N−2)/2`.
pub fn gegenbauer_norm_sq(k: usize, n: usize) -> f64 {
    let alpha = (n as f64 - 2.0) / 2.0;
    // π 2^{1−2α} Γ(k+2α) / (k! (k+α) Γ(α)²), with Γ(k+2α)/k! formed as a product.
    let two_alpha = 2.0 * alpha;
    let mut ratio = gamma_half_integer(two_alpha);
    for j in 1..=k {
        ratio *= (j as f64 - 1.0 + two_alpha) / j as f64;
    }
    let ga = gamma_half_integer(alpha);
    PI * (1.0 - two_alpha).exp2() * ratio / ((k as f64 + alpha) * ga * ga)
}

/// Normalising constant `c_k` of `ψ_k = c_k C_k^α(cos θ)`.
pub fn zonal_normalization(k: usize, n: usize) -> f64 {
    1.0 / (sphere_area(n - 2) * gegenbauer_norm_sq(k, n)).sqrt()
}

/// `C_k^α(z)` for `k = 0..=kmax`.
pub fn gegenbauer(kmax: usize, alpha: f64, z: f64) -> Vec<f64> {
    let mut c = Vec::with_capacity(kmax + 1);
    c.push(1.0);
    if kmax >= 1 {
        c.push(2.0 * alpha * z);
    }
    for k in 2..=kmax {
        let kf = k as f64;
        let next = (2.0 * z * (kf + alpha - 1.0) * c[k - 1] - (kf + 2.0 * alpha - 2.0) * c[k - 2]) / kf;
        c.push(next);
    }
    c
}

/// Values of `ψ_k`, `dψ_k/dz` and `d²ψ_k/dz²` at `z = cos θ` for `k = 0..=kmax`.
pub fn zonal_with_derivatives(kmax: usize, n: usize, z: f64) -> Vec<[f64; 3]> {
    let alpha = (n as f64 - 2.0) / 2.0;
    let c0 = gegenbauer(kmax, alpha, z);
    let c1 = gegenbauer(kmax, alpha + 1.0, z);
    let c2 = gegenbauer(kmax, alpha + 2.0, z);
    (0..=kmax)
        .map(|k| {
            let norm = zonal_normalization(k, n);
            let d1 = if k >= 1 { 2.0 * alpha * c1[k - 1] } else { 0.0 };
            let d2 = if k >= 2 {
                4.0 * alpha * (alpha + 1.0) * c2[k - 2]
            } else {
                0.0
            };
            [norm * c0[k], norm * d1, norm * d2]
        })
        .collect()
}

/// Gauss-Legendre rule in the polar angle with the spherical measure folded in.
///
/// `Σ_i weight[i] F(θ_i) ≈ ∫_{S^{N−1}} F(θ) dS` for zonal `F`. Per-node tables
/// hold `ψ_k`, `∂_θψ_k`, `∂_θ²ψ_k` and `cot θ ∂_θψ_k`.
#[derive(Debug, Clone)]
pub struct AngularRule {
    pub n: usize,
    pub kmax: usize,
    pub theta: Vec<f64>,
    pub weight: Vec<f64>,
    /// `psi[k][i] = ψ_k(θ_i)`.
    pub psi: Vec<Vec<f64>>,
    pub psi_theta: Vec<Vec<f64>>,
    pub psi_theta_theta: Vec<Vec<f64>>,
    pub cot_psi_theta: Vec<Vec<f64>>,
}

/// Default node count for modes up to `kmax`.
pub fn default_angular_nodes(kmax: usize) -> usize {
    64.max(4 * kmax + 16)
}

impl AngularRule {
    pub fn new(n: usize, kmax: usize) -> Self {
        Self::with_nodes(n, kmax, default_angular_nodes(kmax))
    }

    pub fn with_nodes(n: usize, kmax: usize, nodes: usize) -> Self {
        assert!(n >= 3);
        let (x, w) = gauss_legendre(nodes);
        let area = sphere_area(n - 2);
        let theta: Vec<f64> = x.iter().map(|x| 0.5 * PI * (x + 1.0)).collect();
        let weight: Vec<f64> = theta
            .iter()
            .zip(&w)
            .map(|(t, w)| 0.5 * PI * w * area * t.sin().powi(n as i32 - 2))
            .collect();
        let mut psi = vec![vec![0.0; nodes]; kmax + 1];
        let mut psi_theta = psi.clone();
        let mut psi_theta_theta = psi.clone();
        let mut cot_psi_theta = psi.clone();
        for (i, t) in theta.iter().enumerate() {
            let (s, c) = t.sin_cos();
            for (k, [v, d1, d2]) in zonal_with_derivatives(kmax, n, c).into_iter().enumerate() {
                psi[k][i] = v;
                psi_theta[k][i] = -s * d1;
                psi_theta_theta[k][i] = -c * d1 + s * s * d2;
                cot_psi_theta[k][i] = -c * d1;
            }
        }
        Self {
            n,
            kmax,
            theta,
            weight,
            psi,
            psi_theta,
            psi_theta_theta,
            cot_psi_theta,
        }
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Projection coefficients `∫ F ψ_k dS` for `k = 0..=kmax` from samples of `F` at the nodes.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        self.psi
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&self.weight)
                    .zip(values)
                    .map(|((p, w), v)| p * w * v)
                    .sum()
            })
            .collect()
    }

    /// `∫ F dS` from samples of `F` at the nodes.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        self.weight.iter().zip(values).map(|(w, v)| w * v).sum()
    }
}
