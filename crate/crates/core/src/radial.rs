//! Positive radial solution of `−L_γ w = w^p` in the unit ball.
//!
//! In the radial variable the equation reads `(1+γ)w″ + (N−1)w′/r + w^p = 0`,
//! which is the Lane-Emden ODE in the fractional dimension `N_γ`. The profile
//! is built by shooting from `w(0) = 1` to the first zero `R₀` and rescaling
//! `w_λ(r) = R₀^{2/(p−1)} w(R₀ r)`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::ode::{integrate, OdeOptions, Trajectory};
use crate::operator::ProblemParams;
use crate::quadrature::{bracket, quintic_hermite, GridSpec, LogGrid};

/// Radius at which the Taylor start hands over to the integrator.
pub const TAYLOR_START: f64 = 1e-4;

/// Absolute tolerance of the shooting solve. Near the hand-over radius `w′` is
/// of size `r₀`, so the error control has to be essentially relative.
const ABS_TOL: f64 = 1e-16;

/// Default search radius for the first zero.
pub const DEFAULT_R_MAX: f64 = 1e3;

/// Shooting solution on `[0, R₀]` with `w(0) = height`.
#[derive(Debug, Clone)]
pub struct RawProfile {
    pub params: ProblemParams,
    pub height: f64,
    /// First zero `R₀`.
    pub r_zero: f64,
    /// Accepted steps `(ρ, [w − height, w′])` starting at the Taylor hand-over
    /// radius. Storing the offset from `w(0)` keeps the small-`ρ` data accurate
    /// enough for second derivatives of the interpolant.
    pub steps: Trajectory<2>,
    c2: f64,
    c4: f64,
}

impl RawProfile {
    /// `(w, w′, w″)` at `ρ ∈ [0, R₀]`.
    pub fn eval(&self, rho: f64) -> Result<(f64, f64, f64)> {
        let t = &self.steps.t;
        if rho < t[0] {
            let r2 = rho * rho;
            return Ok((
                self.height + (self.c2 * r2 + self.c4 * r2 * r2),
                2.0 * self.c2 * rho + 4.0 * self.c4 * r2 * rho,
                2.0 * self.c2 + 12.0 * self.c4 * r2,
            ));
        }
        let i = bracket(t, rho)?;
        let node = |j: usize| (self.steps.y[j][0], self.steps.y[j][1], self.steps.dy[j][1]);
        let (v, d, c) = if rho == t[i] {
            node(i)
        } else if rho == t[i + 1] {
            node(i + 1)
        } else {
            quintic_hermite(t[i], t[i + 1], node(i), node(i + 1), rho)
        };
        Ok((self.height + v, d, c))
    }
}

fn taylor_coefficients(params: &ProblemParams, height: f64) -> (f64, f64) {
    let n_eff = params.effective_dimension();
    let c2 = -height.powf(params.p) / (2.0 * (params.dim() + params.gamma));
    let c4 = -params.p * c2 * height.powf(params.p - 1.0) / (4.0 * (1.0 + params.gamma) * (n_eff + 2.0));
    (c2, c4)
}

/// Shoots from `w(0) = 1`, `w′(0) = 0` to the first zero.
pub fn solve_ivp_unit_height(params: &ProblemParams) -> Result<RawProfile> {
    solve_ivp_with_height(params, 1.0, DEFAULT_R_MAX)
}

/// Shoots from `w(0) = height` and stops at the first zero, searching up to `r_max`.
pub fn solve_ivp_with_height(params: &ProblemParams, height: f64, r_max: f64) -> Result<RawProfile> {
    params.validate()?;
    if !(height > 0.0) {
        return Err(LabError::Domain(format!("initial height must be positive, got {height}")));
    }
    let (c2, c4) = taylor_coefficients(params, height);
    let r0 = TAYLOR_START;
    let y0 = [
        c2 * r0 * r0 + c4 * r0.powi(4),
        2.0 * c2 * r0 + 4.0 * c4 * r0.powi(3),
    ];
    let a = 1.0 + params.gamma;
    let nm1 = params.dim() - 1.0;
    let p = params.p;
    let rhs = move |r: f64, y: &[f64; 2]| [y[1], -(nm1 * y[1] / r + (height + y[0]).abs().powf(p)) / a];
    let event = |y: &[f64; 2]| height + y[0];

    let mut opts = OdeOptions {
        h_init: r0,
        atol: ABS_TOL,
        ..OdeOptions::default()
    };
    let first = integrate(rhs, r0, y0, r_max, &opts, Some(&event))?;
    let r_zero = first.event.ok_or(LabError::NoSignChange { r_max })?;

    // Second pass with a step cap.
    opts.h_max = r_zero / 1024.0;
    let second = integrate(rhs, r0, y0, r_max, &opts, Some(&event))?;
    let r_zero = second.event.ok_or(LabError::NoSignChange { r_max })?;
    let mut steps = second.trajectory;
    if let Some(last) = steps.y.last_mut() {
        last[0] = -height;
    }
    if let Some(last) = steps.dy.last_mut() {
        last[1] = -nm1 * steps.y.last().unwrap()[1] / r_zero / a;
    }
    Ok(RawProfile {
        params: *params,
        height,
        r_zero,
        steps,
        c2,
        c4,
    })
}

/// `w`, `w′`, `w″` on the unit ball, sampled on a log grid, with the raw
/// shooting record kept for evaluation anywhere in `(0, 1]`.
#[derive(Debug, Clone)]
pub struct RadialProfile {
    pub params: ProblemParams,
    pub grid: Arc<LogGrid>,
    pub w: Vec<f64>,
    pub w_prime: Vec<f64>,
    pub w_double_prime: Vec<f64>,
    raw: Arc<RawProfile>,
    amplitude: f64,
}

/// Rescales a raw profile to vanish at `r = 1` and samples it on `grid`.
pub fn rescale_to_unit_ball(raw: RawProfile, grid: GridSpec) -> Result<RadialProfile> {
    let r_zero = raw.r_zero;
    if !(r_zero.is_finite() && r_zero > 0.0) {
        return Err(LabError::Domain(format!("R0 must be finite and positive, got {r_zero}")));
    }
    if (grid.r_max - 1.0).abs() > 0.0 {
        return Err(LabError::Input("radial profiles live on grids ending at r = 1".into()));
    }
    let amplitude = r_zero.powf(2.0 / (raw.params.p - 1.0));
    let grid = Arc::new(grid.build());
    let mut profile = RadialProfile {
        params: raw.params,
        grid: grid.clone(),
        w: Vec::new(),
        w_prime: Vec::new(),
        w_double_prime: Vec::new(),
        raw: Arc::new(raw),
        amplitude,
    };
    let n = grid.len();
    let (mut w, mut wp, mut wpp) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for &r in grid.radii() {
        let (a, b, c) = profile.eval(r)?;
        w.push(a);
        wp.push(b);
        wpp.push(c);
    }
    profile.w = w;
    profile.w_prime = wp;
    profile.w_double_prime = wpp;
    Ok(profile)
}

/// Convenience: shoot, rescale, and sample on the default grid.
pub fn radial_solution(params: &ProblemParams) -> Result<RadialProfile> {
    rescale_to_unit_ball(solve_ivp_unit_height(params)?, GridSpec::default())
}

/// `(w, w′, w″)` at `r ∈ (0, 1]`.
pub fn evaluate_w(profile: &RadialProfile, r: f64) -> Result<(f64, f64, f64)> {
    profile.eval(r)
}

/// Summary statistics of a profile, as written by the front end.
#[derive(Debug, Clone, Serialize)]
pub struct RadialSummary {
    pub r_zero: f64,
    pub w0: f64,
    pub w_prime_at_1: f64,
    pub residual_sup: f64,
    pub monotone: bool,
    pub origin_gradient_constant: f64,
    pub origin_hessian_constant: f64,
}

impl RadialProfile {
    fn eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        if !(r > 0.0 && r <= 1.0) {
            return Err(LabError::Domain(format!("r = {r} outside (0, 1]")));
        }
        let rho = (self.raw.r_zero * r).min(self.raw.r_zero);
        let (w, wp, wpp) = self.raw.eval(rho)?;
        let s = self.raw.r_zero;
        Ok((self.amplitude * w, self.amplitude * s * wp, self.amplitude * s * s * wpp))
    }

    pub fn raw(&self) -> &RawProfile {
        &self.raw
    }

    pub fn r_zero(&self) -> f64 {
        self.raw.r_zero
    }

    /// `w(0)`.
    pub fn w0(&self) -> f64 {
        self.amplitude * self.raw.height
    }

    pub fn sup(&self) -> f64 {
        self.w0()
    }

    /// `w′(1)`.
    pub fn w_prime_at_one(&self) -> f64 {
        *self.w_prime.last().unwrap()
    }

    /// `(1+γ)w″ + (N−1)w′/r + |w|^p` at `r`.
    pub fn residual_at(&self, r: f64) -> Result<f64> {
        let (w, wp, wpp) = self.eval(r)?;
        Ok((1.0 + self.params.gamma) * wpp + (self.params.dim() - 1.0) * wp / r + w.abs().powf(self.params.p))
    }

    /// Sup of the ODE residual over grid nodes and geometric midpoints, divided
    /// by `max(1, w(0)^p)`.
    pub fn residual_sup(&self) -> Result<f64> {
        let r = self.grid.radii();
        let mut worst = 0.0f64;
        for j in 0..r.len() {
            worst = worst.max(self.residual_at(r[j])?.abs());
            if j + 1 < r.len() {
                worst = worst.max(self.residual_at((r[j] * r[j + 1]).sqrt())?.abs());
            }
        }
        Ok(worst / self.w0().powf(self.params.p).max(1.0))
    }

    /// `w′ < 0` at every grid node.
    pub fn is_monotone(&self) -> bool {
        self.w_prime.iter().all(|d| *d < 0.0)
    }

    /// Empirical `C` in `|w′(r)| ≤ C r`, `|w″(r)| ≤ C` over the grid.
    pub fn origin_bounds(&self) -> (f64, f64) {
        let g = self
            .grid
            .radii()
            .iter()
            .zip(&self.w_prime)
            .map(|(r, d)| d.abs() / r)
            .fold(0.0, f64::max);
        let h = self.w_double_prime.iter().map(|v| v.abs()).fold(0.0, f64::max);
        (g, h)
    }

    /// `w^{p−1}` on the profile grid.
    pub fn w_pow(&self, e: f64) -> Vec<f64> {
        self.w.iter().map(|w| w.max(0.0).powf(e)).collect()
    }

    /// Samples `(w, w′, w″)` on another unit-ball grid.
    pub fn resample(&self, grid: &LogGrid) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let mut out = (Vec::new(), Vec::new(), Vec::new());
        for &r in grid.radii() {
            let (a, b, c) = self.eval(r)?;
            out.0.push(a);
            out.1.push(b);
            out.2.push(c);
        }
        Ok(out)
    }

    /// Same solution sampled on a different grid.
    pub fn on_grid(&self, spec: GridSpec) -> Result<RadialProfile> {
        if spec == self.grid.spec() {
            return Ok(self.clone());
        }
        rescale_to_unit_ball((*self.raw).clone(), spec)
    }

    pub fn summary(&self) -> Result<RadialSummary> {
        let (g, h) = self.origin_bounds();
        Ok(RadialSummary {
            r_zero: self.r_zero(),
            w0: self.w0(),
            w_prime_at_1: self.w_prime_at_one(),
            residual_sup: self.residual_sup()?,
            monotone: self.is_monotone(),
            origin_gradient_constant: g,
            origin_hessian_constant: h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, gamma: f64, p: f64) -> ProblemParams {
        ProblemParams::new(n, gamma, p, 0.1, n as f64 + 1.0).unwrap()
    }

    #[test]
    fn classical_first_zero() {
        let raw = solve_ivp_unit_height(&params(3, 0.0, 3.0)).unwrap();
        assert!((raw.r_zero - 6.896_848_619).abs() < 1e-8, "R0 = {}", raw.r_zero);
        // p = 1 in N = 3 would give π; p = 0 gives √6. Check the quadratic case too.
    }

    #[test]
    fn profile_invariants() {
        for (n, g, p) in [(3, 0.0, 3.0), (4, 1.0, 3.0), (3, 1.0, 4.0), (4, 3.0, 3.0), (3, 2.0, 5.0)] {
            let w = radial_solution(&params(n, g, p)).unwrap();
            assert!(w.is_monotone());
            assert!(w.w_prime_at_one() < 0.0);
            assert_eq!(evaluate_w(&w, 1.0).unwrap().0, 0.0);
            let res = w.residual_sup().unwrap();
            assert!(res < 1e-8, "(N={n}, γ={g}, p={p}) residual {res}");
            assert!(w.w.iter().take(w.w.len() - 1).all(|v| *v > 0.0));
        }
    }

    #[test]
    fn taylor_start_is_quartic_accurate() {
        let raw = solve_ivp_unit_height(&params(4, 1.0, 3.0)).unwrap();
        let c = -1.0 / (2.0 * 5.0);
        let err = |r: f64| (raw.eval(r).unwrap().0 - 1.0 - c * r * r).abs();
        let slope = (err(0.02) / err(0.01)).log2();
        assert!(slope > 3.5, "slope {slope}");
    }

    #[test]
    fn supercritical_refuses() {
        // p above p_{3,0} = 5 has no first zero.
        let err = solve_ivp_with_height(&params(3, 0.0, 6.0), 1.0, 1e3).unwrap_err();
        assert!(matches!(err, LabError::NoSignChange { .. }));
    }

    #[test]
    fn evaluation_domain() {
        let w = radial_solution(&params(4, 1.0, 3.0)).unwrap();
        assert!(evaluate_w(&w, 0.0).is_err());
        assert!(evaluate_w(&w, 1.5).is_err());
        let j = 700;
        let (a, b, c) = evaluate_w(&w, w.grid.radii()[j]).unwrap();
        assert_eq!((a, b, c), (w.w[j], w.w_prime[j], w.w_double_prime[j]));
    }
}
