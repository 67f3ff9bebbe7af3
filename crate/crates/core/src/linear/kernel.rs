use serde::Serialize;

use crate::error::Result;
use crate::ode::{integrate, OdeOptions};
use crate::operator::{indicial_roots, mode_eigenvalue, ProblemParams};
use crate::radial::{evaluate_w, RadialProfile};

/// Normalised boundary value above which the homogeneous problem counts as
/// having only the trivial solution.
pub const KERNEL_THRESHOLD: f64 = 1e-3;

const START: f64 = 1e-4;

#[derive(Debug, Clone, Serialize)]
pub struct KernelCheck {
    pub k: usize,
    /// `|a(1)| / sup |a|` for the admissible homogeneous solution.
    pub boundary_value: f64,
    pub trivial: bool,
    /// Radii and values of the shot solution.
    #[serde(skip)]
    pub r: Vec<f64>,
    #[serde(skip)]
    pub a: Vec<f64>,
}

/// Shoots the admissible solution of the homogeneous linearised mode equation
/// `(1+γ)a″ + (N−1)a′/r − λ_k a/r² + p w^{p−1} a = 0` from the origin and
/// checks whether it can vanish at `r = 1`.
pub fn kernel_check(k: usize, w: &RadialProfile, params: &ProblemParams) -> Result<KernelCheck> {
    let g1 = 1.0 + params.gamma;
    let nm1 = params.dim() - 1.0;
    let lambda = mode_eigenvalue(k, params.n);
    let p = params.p;
    let pot = |r: f64| -> f64 {
        let wv = evaluate_w(w, r.min(1.0)).map(|v| v.0).unwrap_or(0.0);
        p * wv.max(0.0).powf(p - 1.0)
    };
    let p0 = p * w.w0().powf(p - 1.0);
    let r0 = START;
    // Frobenius start r^β (1 + c r²) with the admissible exponent.
    let beta = if k == 0 { 0.0 } else { indicial_roots(k, params).beta_plus };
    let q2 = g1 * (beta + 2.0) * (beta + 2.0) + (params.gap()) * (beta + 2.0) - lambda;
    let c = -p0 / q2;
    let y0 = [
        r0.powf(beta) * (1.0 + c * r0 * r0),
        beta * r0.powf(beta - 1.0) * (1.0 + c * r0 * r0) + 2.0 * c * r0.powf(beta + 1.0),
    ];
    let rhs = |r: f64, y: &[f64; 2]| [y[1], (-nm1 * y[1] / r + lambda * y[0] / (r * r) - pot(r) * y[0]) / g1];
    let opts = OdeOptions {
        h_init: r0,
        h_max: 1.0 / 256.0,
        atol: 1e-16,
        ..OdeOptions::default()
    };
    let sol = integrate(rhs, r0, y0, 1.0, &opts, None)?;
    let traj = sol.trajectory;
    let a: Vec<f64> = traj.y.iter().map(|y| y[0]).collect();
    let sup = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let end = a.last().unwrap().abs();
    let normalized = if sup > 0.0 { end / sup } else { 0.0 };
    Ok(KernelCheck {
        k,
        boundary_value: normalized,
        trivial: normalized > KERNEL_THRESHOLD,
        r: traj.t,
        a,
    })
}
