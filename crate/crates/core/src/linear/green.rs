use std::sync::Arc;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::modes::{ModeProfile, ModeSet};
use crate::norms::{x_norm, y_norm};
use crate::operator::{indicial_roots, mode_eigenvalue, IndicialPair, ProblemParams, TheoremCase};
use crate::quadrature::{two_sum, LogGrid};

/// Data exponents at or below this margin count as non-integrable.
const INTEGRABILITY_MARGIN: f64 = 1e-8;

/// Mode operator `M_k a = (1+γ)a″ + (N−1)a′/r − λ_k a/r²` applied to stored
/// derivative samples (finite differences fill any that are missing).
pub fn apply_mode_operator(mode: &ModeProfile, params: &ProblemParams) -> Vec<f64> {
    let m = if mode.has_derivatives() {
        mode.clone()
    } else {
        mode.clone().with_fd_derivatives()
    };
    let ap = m.a_prime.as_ref().unwrap();
    let app = m.a_double_prime.as_ref().unwrap();
    mode_operator(&m.a, ap, app, m.grid.radii(), m.k, params)
}

fn mode_operator(a: &[f64], ap: &[f64], app: &[f64], r: &[f64], k: usize, params: &ProblemParams) -> Vec<f64> {
    let g1 = 1.0 + params.gamma;
    let nm1 = params.dim() - 1.0;
    let lambda = mode_eigenvalue(k, params.n);
    (0..a.len())
        .map(|i| g1 * app[i] + nm1 * ap[i] / r[i] - lambda * a[i] / (r[i] * r[i]))
        .collect()
}

/// Nodes where the derivative stencil is centred.
pub(crate) fn interior(n: usize) -> std::ops::Range<usize> {
    3.min(n)..n.saturating_sub(3)
}

/// `M_k a − b` over the grid interior with `a″` taken by differencing the
/// stored `a′`, relative to `sup |b|` (absolute if `b ≡ 0`).
pub fn fd_residual(mode: &ModeProfile, b: &[f64], params: &ProblemParams) -> f64 {
    let ap = mode
        .a_prime
        .clone()
        .unwrap_or_else(|| mode.grid.derivative(&mode.a));
    let app = mode.grid.derivative(&ap);
    let lhs = mode_operator(&mode.a, &ap, &app, mode.grid.radii(), mode.k, params);
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let worst = interior(lhs.len())
        .map(|i| (lhs[i] - b[i]).abs())
        .fold(0.0f64, f64::max);
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

/// Tail model for `∫_0^{r_min}` in the variation-of-parameters integrals.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Tail {
    /// Exponent read off the two innermost samples; checks integrability.
    FromData,
    /// Data treated as locally constant; linear in the data.
    Linear,
}

/// Precomputed powers for the variation-of-parameters formula of one mode.
#[derive(Debug, Clone)]
pub(crate) struct GreenKernel {
    pub k: usize,
    pub roots: IndicialPair,
    grid: Arc<LogGrid>,
    gamma1: f64,
    nm1: f64,
    lambda: f64,
    denom: f64,
    r_bm: Vec<f64>,
    r_bp: Vec<f64>,
    w_minus: Vec<f64>,
    w_plus: Vec<f64>,
}

impl GreenKernel {
    pub fn new(k: usize, grid: Arc<LogGrid>, params: &ProblemParams) -> Result<Self> {
        let roots = indicial_roots(k, params);
        let (bp, bm) = (roots.beta_plus, roots.beta_minus);
        let gamma1 = 1.0 + params.gamma;
        let denom = gamma1 * (bm - bp);
        if denom == 0.0 {
            return Err(LabError::window(format!(
                "mode {k}: indicial roots coincide (gamma = N-2); no Green function"
            )));
        }
        let r = grid.radii();
        Ok(Self {
            k,
            roots,
            gamma1,
            nm1: params.dim() - 1.0,
            lambda: mode_eigenvalue(k, params.n),
            denom,
            r_bm: r.iter().map(|r| r.powf(bm)).collect(),
            r_bp: r.iter().map(|r| r.powf(bp)).collect(),
            w_minus: r.iter().map(|r| r.powf(1.0 - bm)).collect(),
            w_plus: r.iter().map(|r| r.powf(1.0 - bp)).collect(),
            grid,
        })
    }

    /// Returns `(a, a′, a″, C_k)` for data `b`.
    pub fn apply(&self, b: &[f64], tail: Tail) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, f64)> {
        let g = &self.grid;
        let r = g.radii();
        let n = r.len();
        let bm = self.roots.beta_minus;
        let bp = self.roots.beta_plus;
        let gm: Vec<f64> = b.iter().zip(&self.w_minus).map(|(b, w)| b * w).collect();
        let gp: Vec<f64> = b.iter().zip(&self.w_plus).map(|(b, w)| b * w).collect();

        let exponent = match tail {
            Tail::Linear => 0.0,
            Tail::FromData => {
                let (b0, b1) = (b[0], b[1]);
                if b0 != 0.0 && b1 != 0.0 && b0.signum() == b1.signum() {
                    (b1 / b0).ln() / g.log_step()
                } else {
                    0.0
                }
            }
        };
        let tail_power = exponent + 2.0 - bm;
        if tail_power <= INTEGRABILITY_MARGIN && b[0] != 0.0 {
            return Err(LabError::Integrability {
                k: self.k,
                exponent: exponent + 1.0 - bm,
                condition: format!("beta_k^- + sigma < 0 (beta_{}^- = {bm:.6})", self.k),
            });
        }
        let tail_value = gm[0] * r[0] / tail_power;

        let mut a_cum = g.cumulative_from_inner(&gm);
        for v in a_cum.iter_mut() {
            *v += tail_value;
        }
        let (b_up, b_lo) = g.cumulative_from_outer_compensated(&gp);
        let c = -a_cum[n - 1];

        let mut a = Vec::with_capacity(n);
        let mut ap = Vec::with_capacity(n);
        let mut app = Vec::with_capacity(n);
        for i in 0..n {
            let (hi, lo) = two_sum(b_up[i], c);
            let upper = hi + (lo + b_lo[i]);
            let v = (self.r_bm[i] * a_cum[i] + self.r_bp[i] * upper) / self.denom;
            let d = (bm * self.r_bm[i] * a_cum[i] + bp * self.r_bp[i] * upper) / (self.denom * r[i]);
            let dd = (b[i] - self.nm1 * d / r[i] + self.lambda * v / (r[i] * r[i])) / self.gamma1;
            a.push(v);
            ap.push(d);
            app.push(dd);
        }
        a[n - 1] = 0.0;
        Ok((a, ap, app, c))
    }

    /// Dense matrix of the linear-tail Green action; `G[(i, j)]` maps `b_j` to `a_i`.
    pub fn matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.grid.len();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let (a, _, _, _) = self.apply(&e, Tail::Linear).expect("linear tail never fails");
            m.set_column(j, &nalgebra::DVector::from_vec(a));
            e[j] = 0.0;
        }
        m
    }
}

/// Outcome of a single-mode solve.
#[derive(Debug, Clone, Serialize)]
pub struct ModeSolveReport {
    pub k: usize,
    #[serde(skip)]
    pub solution: ModeProfile,
    pub beta_plus: f64,
    pub beta_minus: f64,
    /// The constant `C_k = −∫_0^1 b τ^{1−β⁻} dτ` of the explicit formula.
    pub c_k: Option<f64>,
    pub ode_residual_sup: f64,
    pub boundary_value: f64,
    /// `‖a_k ψ_k‖_X / ‖b_k ψ_k‖_Y`.
    pub norm_ratio: f64,
}

impl ModeSolveReport {
    pub(crate) fn build(solution: ModeProfile, b: &[f64], roots: IndicialPair, c_k: Option<f64>, params: &ProblemParams) -> Result<Self> {
        let k = solution.k;
        let residual = fd_residual(&solution, b, params);
        let data = ModeProfile::new(k, solution.grid.clone(), b.to_vec())?;
        let y = y_norm(&ModeSet::single(data), params)?.norm_value;
        let x = x_norm(&ModeSet::single(solution.clone()), params)?.norm_value;
        Ok(Self {
            k,
            boundary_value: solution.boundary_value().abs(),
            beta_plus: roots.beta_plus,
            beta_minus: roots.beta_minus,
            c_k,
            ode_residual_sup: residual,
            norm_ratio: if y > 0.0 { x / y } else { 0.0 },
            solution,
        })
    }

    /// Both report invariants: residual and boundary value.
    pub fn invariants_hold(&self) -> bool {
        self.ode_residual_sup <= 1e-7 && self.boundary_value <= 1e-8
    }
}

/// Checks the window of the active case and the mode range it covers.
pub(crate) fn check_case(k: usize, params: &ProblemParams) -> Result<TheoremCase> {
    let case = TheoremCase::classify(params)?;
    if k < case.first_mode() {
        return Err(LabError::window(format!(
            "{case:?} covers modes k >= {} only (got k = {k})",
            case.first_mode()
        )));
    }
    Ok(case)
}

/// Solves `(1+γ)a″ + (N−1)a′/r − λ_k a/r² = b` with `a(1) = 0` by variation of
/// parameters, choosing the homogeneous part so that the solution lies in `X`.
pub fn solve_cordes_mode(k: usize, b: &ModeProfile, params: &ProblemParams) -> Result<ModeSolveReport> {
    if b.k != k {
        return Err(LabError::Input(format!("data is mode {}, requested mode {k}", b.k)));
    }
    let kernel = GreenKernel::new(k, b.grid.clone(), params)?;
    let (a, ap, app, c) = kernel.apply(&b.a, Tail::FromData)?;
    check_case(k, params)?;
    let sol = ModeProfile::with_derivatives(k, b.grid.clone(), a, ap, app)?;
    ModeSolveReport::build(sol, &b.a, kernel.roots, Some(c), params)
}

/// Green action without diagnostics, for inner loops.
pub(crate) fn green_profile(k: usize, grid: &Arc<LogGrid>, b: &[f64], params: &ProblemParams) -> Result<ModeProfile> {
    let kernel = GreenKernel::new(k, grid.clone(), params)?;
    let (a, ap, app, _) = kernel.apply(b, Tail::FromData)?;
    ModeProfile::with_derivatives(k, grid.clone(), a, ap, app)
}

/// Radial solution of `(1+γ)u″ + (N−1)u′/r = g`, `u(1) = 0`, through the
/// explicit formula `u = −∫_r^1 h`, `h(r) = r^{−q} ∫_0^r τ^q g/(1+γ)`.
#[derive(Debug, Clone)]
pub struct K0Solution {
    pub u: ModeProfile,
    /// `sup(|u| + |u′|) / sup |g|`.
    pub c3: f64,
}

pub fn k0_green_apply(g: &[f64], grid: &Arc<LogGrid>, params: &ProblemParams) -> Result<K0Solution> {
    if g.len() != grid.len() {
        return Err(LabError::Input("data and grid lengths differ".into()));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(LabError::Domain("K0 needs bounded data; samples are not finite".into()));
    }
    let (b0, b1) = (g[0], g[1]);
    if b0 != 0.0 && b1 != 0.0 && b0.signum() == b1.signum() {
        let e = (b1 / b0).ln() / grid.log_step();
        let mid = g[g.len() / 2].abs();
        if e < -1e-3 && b0.abs() > 10.0 * mid {
            return Err(LabError::Domain(format!(
                "K0 needs bounded data; samples grow like r^{e:.4} at the origin"
            )));
        }
    }
    let (u, up, upp) = k0_apply_raw(g, grid, params, true);
    let sup_g = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_u = u.iter().zip(&up).fold(0.0f64, |m, (a, b)| m.max(a.abs() + b.abs()));
    let c3 = if sup_g > 0.0 { sup_u / sup_g } else { 0.0 };
    Ok(K0Solution {
        u: ModeProfile::with_derivatives(0, grid.clone(), u, up, upp)?,
        c3,
    })
}

pub(crate) fn k0_apply_raw(g: &[f64], grid: &LogGrid, params: &ProblemParams, data_tail: bool) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let gamma1 = 1.0 + params.gamma;
    let q = (params.dim() - 1.0) / gamma1;
    let r = grid.radii();
    let n = r.len();
    let integrand: Vec<f64> = g.iter().zip(r).map(|(g, r)| r.powf(q) * g / gamma1).collect();
    let e = if data_tail && g[0] != 0.0 && g[1] != 0.0 && g[0].signum() == g[1].signum() {
        (g[1] / g[0]).ln() / grid.log_step()
    } else {
        0.0
    };
    let tail = integrand[0] * r[0] / (q + 1.0 + e);
    let inner = grid.cumulative_from_inner(&integrand);
    let h: Vec<f64> = inner.iter().zip(r).map(|(v, r)| (v + tail) * r.powf(-q)).collect();
    let outer = grid.cumulative_from_outer(&h);
    let u: Vec<f64> = outer.iter().map(|v| -v).collect();
    let upp: Vec<f64> = (0..n)
        .map(|i| (g[i] - (params.dim() - 1.0) * h[i] / r[i]) / gamma1)
        .collect();
    (u, h, upp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GridSpec;

    fn grid() -> Arc<LogGrid> {
        Arc::new(GridSpec::default().build())
    }

    #[test]
    fn zero_data_zero_solution() {
        let p = ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap();
        let rep = solve_cordes_mode(2, &ModeProfile::zero(2, grid()), &p).unwrap();
        assert!(rep.solution.a.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn constant_data_mode_zero() {
        // (1+γ)a″ + (N−1)a′/r = 1 with a = αr² + β: α(2(1+γ) + 2(N−1)) = 1.
        let p = ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap();
        let g = grid();
        let rep = solve_cordes_mode(0, &ModeProfile::from_values(0, g.clone(), |_| 1.0), &p).unwrap();
        let alpha = 1.0 / (2.0 * (4.0 + 1.0));
        for (r, a) in g.radii().iter().zip(&rep.solution.a) {
            assert!((a - alpha * (r * r - 1.0)).abs() < 1e-9);
        }
        assert!(rep.invariants_hold(), "{rep:?}");
    }

    #[test]
    fn k0_constant_data() {
        let p = ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap();
        let g = grid();
        let sol = k0_green_apply(&vec![1.0; g.len()], &g, &p).unwrap();
        for (r, u) in g.radii().iter().zip(&sol.u.a) {
            assert!((u - (r * r - 1.0) / 10.0).abs() < 1e-10);
        }
    }

    #[test]
    fn integrability_violation_is_reported() {
        let p = ProblemParams::new(4, 1.0, 3.0, 0.6, 5.0).unwrap();
        let g = grid();
        let b = ModeProfile::from_values(0, g, |r| r.powf(-2.6));
        let err = solve_cordes_mode(0, &b, &p).unwrap_err();
        assert!(matches!(err, LabError::Integrability { .. }), "{err:?}");
    }
}
