//! Fixed-point solvers for the two perturbed problems: the zero-order
//! perturbation `(1+δg)u^p` on the unit ball and the perturbed domain
//! `Ω_δ = {x + δψ(x)}` pulled back to the ball.
//!
//! Both iterate `φ ↦ J_δ(φ)`, where `J_δ` evaluates a nonlinear right side on
//! the `(r, θ)` tensor grid, projects it onto zonal modes and solves the
//! linearised operator `L = L_γ + p w^{p−1}` mode by mode.

mod barrier;
mod domain;
mod taylor;
mod zero_order;

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::linear::{route_for, LinearizedSolver};
use crate::modes::{project_field, ModeProfile, ModeSet, PolarField};
use crate::norms::x_norm;
use crate::operator::ProblemParams;
use crate::quadrature::LogGrid;
use crate::radial::{evaluate_w, RadialProfile};
use crate::zonal::AngularRule;

pub use barrier::{boundedness_bootstrap, EXHAUSTION_LEVELS, OUTER_RADIUS, maximum_principle_barrier, BarrierReport, BoundednessReport, ExhaustionLevel};
pub use domain::{
    dilation_oracle, domain_map_invert, fixed_point_domain, fixed_point_domain_with, perturbation_terms, transformed_residual, DomainMap, DomainOptions,
    DomainSolution, PerturbationFields, PsiJet, PsiKind,
};
pub use taylor::{power_remainder, sweep_ratio, taylor_constant, taylor_remainders, taylor_remainders_with, TaylorRemainders, CP_SAFETY, CP_SWEEP_SAMPLES};
pub use zero_order::{
    fixed_point_zero_order, linearization_check, zero_order_rhs, ForcingKind, IntoCondition, LinearizationCheck, RhsProjection,
    ZeroOrderConfig, ZeroOrderSolution,
};

/// Largest tolerated share of projected energy outside the retained modes.
pub const MODE_BUDGET: f64 = 0.1;
/// Consecutive non-contracting iterations that abort a run.
pub const NO_CONTRACTION_STREAK: usize = 5;
/// Iterations excluded when reporting the contraction bound.
pub const BURN_IN: usize = 2;

/// `exp(1 − 1/(1 − 4r²))` on `r < 1/2`, zero outside; equals 1 at the origin.
pub fn bump(r: f64) -> f64 {
    let s = 1.0 - 4.0 * r * r;
    if s <= 0.0 {
        0.0
    } else {
        (1.0 - 1.0 / s).exp()
    }
}

/// Norm monitored by a fixed-point run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// The weighted `X` norm.
    X,
    /// `sup_r(|φ₀| + |φ₀′|) + ‖φ₁‖_X`, splitting off the radial mode.
    WHat,
}

/// One row of a fixed-point trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub norm: f64,
    pub diff: f64,
    pub ratio: Option<f64>,
    /// Residual of the iterate fed into this step.
    pub residual: f64,
}

/// History and diagnostics of a fixed-point run.
#[derive(Debug, Clone, Serialize)]
pub struct FixedPointTrace {
    pub norm_kind: NormKind,
    pub iterate_norms: Vec<f64>,
    pub diff_norms: Vec<f64>,
    pub contraction_ratios: Vec<f64>,
    pub iterate_residuals: Vec<f64>,
    /// Largest ratio past the burn-in.
    pub contraction_bound: Option<f64>,
    /// Largest per-mode residual of the returned iterate, relative to `max(1, sup|u|^p)`.
    pub final_residual: f64,
    pub mode_residuals: Vec<f64>,
    /// `min u` over the tensor grid (`r < 1`).
    pub positivity: f64,
    pub iterations: usize,
    pub converged: bool,
    pub tol: f64,
    /// Largest truncation tail met during the run.
    pub tail_fraction: f64,
}

impl FixedPointTrace {
    pub fn rows(&self) -> Vec<TraceRow> {
        (0..self.diff_norms.len())
            .map(|i| TraceRow {
                iter: i + 1,
                norm: self.iterate_norms[i],
                diff: self.diff_norms[i],
                ratio: if i == 0 { None } else { self.contraction_ratios.get(i - 1).copied() },
                residual: self.iterate_residuals[i],
            })
            .collect()
    }

    pub fn residual_ok(&self) -> bool {
        self.final_residual <= self.tol
    }
}

/// Positivity of `u = w + φ`: `min u > 0` on the grid and
/// `sup_{r>1/2} |∇φ| < |w′(1)|/2` together certify `u > 0`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PositivityCertificate {
    pub min_u: f64,
    pub grad_sup_outer: f64,
    pub w_prime_one: f64,
    pub certified: bool,
    /// `min u` on radial midpoints and a doubled angular rule.
    pub refined_min: f64,
    /// `certified ⇒ refined_min > 0`.
    pub implication_holds: bool,
}

/// Shared discretisation: radial grid of `w`, angular rule and the cached
/// linearised solver.
pub(crate) struct Workspace {
    pub params: ProblemParams,
    pub profile: RadialProfile,
    pub grid: Arc<LogGrid>,
    pub rule: AngularRule,
    pub kmax: usize,
    pub psi0: f64,
    pub solver: LinearizedSolver,
}

impl Workspace {
    pub fn new(w: &RadialProfile, params: &ProblemParams, kmax: usize, angular_nodes: Option<usize>) -> Result<Self> {
        params.validate()?;
        let grid = w.grid.clone();
        let rule = match angular_nodes {
            Some(m) => AngularRule::with_nodes(params.n, kmax, m),
            None => AngularRule::new(params.n, kmax),
        };
        let psi0 = rule.psi[0][0];
        let solver = LinearizedSolver::new(w, params, grid.clone())?;
        Ok(Self {
            params: *params,
            profile: w.clone(),
            grid,
            rule,
            kmax,
            psi0,
            solver,
        })
    }

    pub fn w(&self) -> &[f64] {
        &self.profile.w
    }

    /// `w` as a mode-0 profile with derivatives.
    pub fn w_mode(&self) -> ModeProfile {
        let s = 1.0 / self.psi0;
        let sc = |v: &Vec<f64>| v.iter().map(|x| x * s).collect::<Vec<_>>();
        ModeProfile {
            k: 0,
            grid: self.grid.clone(),
            a: sc(&self.profile.w),
            a_prime: Some(sc(&self.profile.w_prime)),
            a_double_prime: Some(sc(&self.profile.w_double_prime)),
        }
    }

    pub fn zero_set(&self) -> ModeSet {
        ModeSet {
            modes: (0..=self.kmax).map(|k| ModeProfile::zero(k, self.grid.clone())).collect(),
        }
    }

    /// Projects tensor-grid samples onto modes `0..=kmax`, enforcing the mode budget.
    pub fn project(&self, values: &[f64]) -> Result<(ModeSet, f64)> {
        let proj = project_field(values, &self.grid, &self.rule, self.kmax)?;
        if proj.tail_fraction > MODE_BUDGET {
            return Err(LabError::ModeBudget {
                tail_fraction: proj.tail_fraction,
            });
        }
        Ok((proj.modes, proj.tail_fraction))
    }

    /// Solves `−L ψ_k = f_k` for every mode; zero data gives zero modes.
    pub fn solve(&self, f: &ModeSet) -> Result<ModeSet> {
        let modes = (0..=self.kmax)
            .into_par_iter()
            .map(|k| {
                let Some(fk) = f.mode(k) else {
                    return Ok(ModeProfile::zero(k, self.grid.clone()));
                };
                if fk.a.iter().all(|v| *v == 0.0) {
                    return Ok(ModeProfile::zero(k, self.grid.clone()));
                }
                let b: Vec<f64> = fk.a.iter().map(|v| -v).collect();
                self.solver.solve_profile(k, &b, route_for(k, &self.params))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ModeSet { modes })
    }

    /// Per-mode sup over the grid interior of `|L φ_k + f_k|`, each node
    /// divided by `max(scale, size of the balanced terms)`.
    pub fn mode_residuals(&self, phi: &ModeSet, f: &ModeSet, scale: f64) -> Vec<f64> {
        (0..=self.kmax)
            .map(|k| {
                let zero = ModeProfile::zero(k, self.grid.clone());
                let pk = phi.mode(k).unwrap_or(&zero);
                let b: Vec<f64> = match f.mode(k) {
                    Some(fk) => fk.a.iter().map(|v| -v).collect(),
                    None => vec![0.0; self.grid.len()],
                };
                self.solver
                    .residual_profile(pk, &b)
                    .into_iter()
                    .map(|(res, size)| res.abs() / size.max(scale))
                    .fold(0.0, f64::max)
            })
            .collect()
    }

    /// `max(1, sup |w + φ|^p)` on the tensor grid.
    pub fn residual_scale(&self, phi_field: &PolarField) -> f64 {
        let nt = phi_field.nt;
        let w = self.w();
        let mut m = 1.0f64;
        for (idx, v) in phi_field.f.iter().enumerate() {
            m = m.max((w[idx / nt] + v).abs().powf(self.params.p));
        }
        m
    }

    pub fn norm(&self, kind: NormKind, set: &ModeSet) -> Result<f64> {
        match kind {
            NormKind::X => Ok(x_norm(set, &self.params)?.norm_value),
            NormKind::WHat => {
                let mut radial = 0.0f64;
                if let Some(m0) = set.mode(0) {
                    let ap = m0.a_prime.clone().unwrap_or_else(|| self.grid.derivative(&m0.a));
                    for (a, d) in m0.a.iter().zip(&ap) {
                        radial = radial.max((a.abs() + d.abs()) * self.psi0);
                    }
                }
                let rest = ModeSet {
                    modes: set.modes.iter().filter(|m| m.k >= 1).cloned().collect(),
                };
                let upper = if rest.modes.iter().all(|m| m.a.iter().all(|v| *v == 0.0)) {
                    0.0
                } else {
                    x_norm(&rest, &self.params)?.norm_value
                };
                Ok(radial + upper)
            }
        }
    }

    pub fn positivity(&self, phi: &ModeSet) -> Result<PositivityCertificate> {
        let field = phi.synthesize(&self.rule, true)?;
        let r = self.grid.radii();
        let nt = field.nt;
        let w = self.w();
        let mut min_u = f64::INFINITY;
        let mut grad = 0.0f64;
        for i in 0..r.len() {
            for j in 0..nt {
                let idx = i * nt + j;
                if r[i] < 1.0 {
                    min_u = min_u.min(w[i] + field.f[idx]);
                }
                if r[i] > 0.5 {
                    grad = grad.max(field.grad_sq(idx, r[i]).sqrt());
                }
            }
        }
        let wp1 = self.profile.w_prime_at_one();
        let certified = min_u > 0.0 && grad < 0.5 * wp1.abs();

        let fine = AngularRule::with_nodes(self.params.n, self.kmax, 2 * self.rule.len());
        let mut refined_min = f64::INFINITY;
        for i in 0..r.len() - 1 {
            let rho = (r[i] * r[i + 1]).sqrt();
            let wv = evaluate_w(&self.profile, rho)?.0;
            let coeffs: Vec<(usize, f64)> = phi.modes.iter().map(|m| Ok((m.k, m.eval(rho)?.0))).collect::<Result<_>>()?;
            for j in 0..fine.len() {
                let mut u = wv;
                for (k, a) in &coeffs {
                    u += a * fine.psi[*k][j];
                }
                refined_min = refined_min.min(u);
            }
        }
        Ok(PositivityCertificate {
            min_u,
            grad_sup_outer: grad,
            w_prime_one: wp1,
            certified,
            refined_min,
            implication_holds: !certified || refined_min > 0.0,
        })
    }
}

/// `α·a + β·b` mode by mode over `0..=kmax` (missing modes count as zero).
pub(crate) fn combine_sets(a: &ModeSet, alpha: f64, b: &ModeSet, beta: f64, kmax: usize, grid: &Arc<LogGrid>) -> Result<ModeSet> {
    let modes = (0..=kmax)
        .map(|k| {
            let zero = ModeProfile::zero(k, grid.clone());
            let x = a.mode(k).unwrap_or(&zero);
            let y = b.mode(k).unwrap_or(&zero);
            x.combine(alpha, y, beta)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeSet { modes })
}

/// Output of one application of `J_δ`.
pub(crate) struct Step {
    pub next: ModeSet,
    /// Residual of the input iterate.
    pub residual: f64,
    pub tail: f64,
}

pub(crate) struct Iteration {
    pub phi: ModeSet,
    pub trace: FixedPointTrace,
}

/// Banach iteration from `φ₀ = 0` until the difference norm drops below `tol`.
pub(crate) fn iterate(
    ws: &Workspace,
    kind: NormKind,
    max_iter: usize,
    tol: f64,
    mut step: impl FnMut(&ModeSet) -> Result<Step>,
) -> Result<Iteration> {
    let mut phi = ws.zero_set();
    let mut trace = FixedPointTrace {
        norm_kind: kind,
        iterate_norms: Vec::new(),
        diff_norms: Vec::new(),
        contraction_ratios: Vec::new(),
        iterate_residuals: Vec::new(),
        contraction_bound: None,
        final_residual: f64::NAN,
        mode_residuals: Vec::new(),
        positivity: f64::NAN,
        iterations: 0,
        converged: false,
        tol,
        tail_fraction: 0.0,
    };
    let mut streak = 0;
    for n in 0..max_iter {
        let s = step(&phi)?;
        let diff_set = combine_sets(&s.next, 1.0, &phi, -1.0, ws.kmax, &ws.grid)?;
        let diff = ws.norm(kind, &diff_set)?;
        trace.iterate_norms.push(ws.norm(kind, &s.next)?);
        trace.iterate_residuals.push(s.residual);
        trace.tail_fraction = trace.tail_fraction.max(s.tail);
        if let Some(prev) = trace.diff_norms.last().copied() {
            let ratio = if prev > 0.0 { diff / prev } else { 0.0 };
            trace.contraction_ratios.push(ratio);
            streak = if ratio >= 1.0 { streak + 1 } else { 0 };
        }
        trace.diff_norms.push(diff);
        trace.iterations = n + 1;
        phi = s.next;
        if streak >= NO_CONTRACTION_STREAK {
            return Err(LabError::NoContraction { streak });
        }
        if diff < tol {
            trace.converged = true;
            break;
        }
    }
    if !trace.converged {
        return Err(LabError::NotConverged {
            iterations: trace.iterations,
            diff: trace.diff_norms.last().copied().unwrap_or(f64::NAN),
        });
    }
    trace.contraction_bound = trace
        .contraction_ratios
        .iter()
        .skip(BURN_IN.saturating_sub(1))
        .copied()
        .reduce(f64::max);
    Ok(Iteration { phi, trace })
}
