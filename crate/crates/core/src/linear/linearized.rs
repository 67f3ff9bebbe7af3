use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector, LU};

use super::green::{check_case, interior, k0_apply_raw, GreenKernel, ModeSolveReport, Tail};
use crate::error::{LabError, Result};
use crate::modes::ModeProfile;
use crate::operator::{ProblemParams, TheoremCase};
use crate::quadrature::LogGrid;
use crate::radial::RadialProfile;

/// Pivot ratio below which the collocation matrix counts as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

type Factor = Arc<(LU<f64, nalgebra::Dyn, nalgebra::Dyn>, f64)>;

/// Which Green operator a mode is routed through.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    /// Variation of parameters with the `X`-admissible homogeneous part.
    Green,
    /// The explicit radial formula `u = −∫_r^1 h` (mode 0 only).
    K0,
}

/// Solves `L a = (1+γ)a″ + (N−1)a′/r − λ_k a/r² + p w^{p−1} a = b`, `a(1) = 0`,
/// as the second-kind system `(I + G_k P) a = G_k b` with `P = diag(p w^{p−1})`.
///
/// The dense factorisation is built once per `(k, route)` and cached.
pub struct LinearizedSolver {
    pub params: ProblemParams,
    pub grid: Arc<LogGrid>,
    potential: Vec<f64>,
    cache: Mutex<HashMap<(usize, Route), Factor>>,
}

impl std::fmt::Debug for LinearizedSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearizedSolver")
            .field("params", &self.params)
            .field("nodes", &self.grid.len())
            .finish()
    }
}

impl LinearizedSolver {
    /// `w` is resampled onto `grid` if needed.
    pub fn new(w: &RadialProfile, params: &ProblemParams, grid: Arc<LogGrid>) -> Result<Self> {
        let (wv, _, _) = w.resample(&grid)?;
        let potential = wv.iter().map(|w| params.p * w.max(0.0).powf(params.p - 1.0)).collect();
        Ok(Self {
            params: *params,
            grid,
            potential,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// `p w^{p−1}` at the grid nodes.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    fn factor(&self, k: usize, route: Route) -> Result<Factor> {
        if let Some(f) = self.cache.lock().unwrap().get(&(k, route)) {
            return Ok(f.clone());
        }
        let n = self.grid.len();
        let mut m = match route {
            Route::Green => GreenKernel::new(k, self.grid.clone(), &self.params)?.matrix(),
            Route::K0 => {
                let mut m = DMatrix::zeros(n, n);
                let mut e = vec![0.0; n];
                for j in 0..n {
                    e[j] = 1.0;
                    let (u, _, _) = k0_apply_raw(&e, &self.grid, &self.params, false);
                    m.set_column(j, &DVector::from_vec(u));
                    e[j] = 0.0;
                }
                m
            }
        };
        for j in 0..n {
            let pj = self.potential[j];
            for i in 0..n {
                m[(i, j)] *= pj;
            }
            m[(j, j)] += 1.0;
        }
        let lu = m.lu();
        let u = lu.u();
        let diag: Vec<f64> = (0..n).map(|i| u[(i, i)].abs()).collect();
        let max = diag.iter().cloned().fold(0.0, f64::max);
        let min = diag.iter().cloned().fold(f64::INFINITY, f64::min);
        let ratio = if max > 0.0 { min / max } else { 0.0 };
        if !(ratio > SINGULAR_PIVOT_RATIO) {
            return Err(LabError::NumericalKernel { k, pivot_ratio: ratio });
        }
        let f = Arc::new((lu, ratio));
        self.cache.lock().unwrap().insert((k, route), f.clone());
        Ok(f)
    }

    /// Pivot ratio `min |U_ii| / max |U_ii|` of the factorised system.
    pub fn pivot_ratio(&self, k: usize, route: Route) -> Result<f64> {
        Ok(self.factor(k, route)?.1)
    }

    /// Solution profile with derivatives for data `b` on the solver grid.
    pub fn solve_profile(&self, k: usize, b: &[f64], route: Route) -> Result<ModeProfile> {
        if b.len() != self.grid.len() {
            return Err(LabError::Input("data and grid lengths differ".into()));
        }
        if route == Route::K0 && k != 0 {
            return Err(LabError::Input("the K0 route serves mode 0 only".into()));
        }
        let factor = self.factor(k, route)?;
        let (ga, gap, gapp) = self.green(k, b, route, Tail::FromData)?;
        let a = factor
            .0
            .solve(&DVector::from_column_slice(&ga))
            .ok_or(LabError::NumericalKernel { k, pivot_ratio: factor.1 })?;
        // Derivatives from the Green action on the effective data b − P a.
        let pa: Vec<f64> = a.iter().zip(&self.potential).map(|(a, p)| a * p).collect();
        let (_, cap, capp) = self.green(k, &pa, route, Tail::Linear)?;
        let sub = |x: Vec<f64>, y: Vec<f64>| x.iter().zip(&y).map(|(x, y)| x - y).collect::<Vec<_>>();
        let mut prof = ModeProfile::with_derivatives(k, self.grid.clone(), a.as_slice().to_vec(), sub(gap, cap), sub(gapp, capp))?;
        *prof.a.last_mut().unwrap() = 0.0;
        Ok(prof)
    }

    fn green(&self, k: usize, b: &[f64], route: Route, tail: Tail) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        match route {
            Route::Green => {
                let (a, ap, app, _) = GreenKernel::new(k, self.grid.clone(), &self.params)?.apply(b, tail)?;
                Ok((a, ap, app))
            }
            Route::K0 => Ok(k0_apply_raw(b, &self.grid, &self.params, matches!(tail, Tail::FromData))),
        }
    }

    /// `L a` for a profile with derivatives; `a″` by differencing `a′`.
    pub fn apply_operator(&self, mode: &ModeProfile) -> Vec<f64> {
        let mut out = super::green::apply_mode_operator(mode, &self.params);
        for (o, (p, a)) in out.iter_mut().zip(self.potential.iter().zip(&mode.a)) {
            *o += p * a;
        }
        out
    }

    /// Sup over the grid interior of `L a − b` (derivatives of `a′` by finite
    /// differences), relative to `sup |b|`.
    pub fn residual(&self, mode: &ModeProfile, b: &[f64]) -> f64 {
        let worst = self.residual_abs(mode, b);
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// Pointwise `(L a − b, |(1+γ)a″| + |(N−1)a′/r| + |λ_k a/r²| + |p w^{p−1}a| + |b|)`
    /// on the grid interior, with `a″` by differencing `a′`. The second entry
    /// is the size of the terms being balanced at the node.
    pub fn residual_profile(&self, mode: &ModeProfile, b: &[f64]) -> Vec<(f64, f64)> {
        let ap = mode.a_prime.clone().unwrap_or_else(|| self.grid.derivative(&mode.a));
        let app = self.grid.derivative(&ap);
        let r = self.grid.radii();
        let g1 = 1.0 + self.params.gamma;
        let nm1 = self.params.dim() - 1.0;
        let lambda = crate::operator::mode_eigenvalue(mode.k, self.params.n);
        interior(r.len())
            .map(|i| {
                let t = [
                    g1 * app[i],
                    nm1 * ap[i] / r[i],
                    -lambda * mode.a[i] / (r[i] * r[i]),
                    self.potential[i] * mode.a[i],
                    -b[i],
                ];
                (t.iter().sum(), t.iter().map(|v| v.abs()).sum())
            })
            .collect()
    }

    /// Unnormalised sup over the grid interior of `L a − b`.
    pub fn residual_abs(&self, mode: &ModeProfile, b: &[f64]) -> f64 {
        let ap = mode.a_prime.clone().unwrap_or_else(|| self.grid.derivative(&mode.a));
        let fd = ModeProfile {
            a_double_prime: Some(self.grid.derivative(&ap)),
            a_prime: Some(ap),
            ..mode.clone()
        };
        let lhs = self.apply_operator(&fd);
        interior(lhs.len()).map(|i| (lhs[i] - b[i]).abs()).fold(0.0f64, f64::max)
    }
}

/// One-shot linearised solve with a full report.
pub fn solve_linearized_mode(k: usize, b: &ModeProfile, w: &RadialProfile, params: &ProblemParams) -> Result<ModeSolveReport> {
    if b.k != k {
        return Err(LabError::Input(format!("data is mode {}, requested mode {k}", b.k)));
    }
    check_case(k, params)?;
    let solver = LinearizedSolver::new(w, params, b.grid.clone())?;
    let sol = solver.solve_profile(k, &b.a, Route::Green)?;
    let kernel = GreenKernel::new(k, b.grid.clone(), params)?;
    let mut report = ModeSolveReport::build(sol, &b.a, kernel.roots, None, params)?;
    report.ode_residual_sup = solver.residual(&report.solution, &b.a);
    Ok(report)
}

/// Routing of modes used by the nonlinear iterations: in the regime
/// `0 < γ < N−2` mode 0 goes through `K₀` and the other modes through the
/// `k ≥ 1` theory; otherwise every mode uses the `X`-admissible Green operator.
pub fn route_for(k: usize, params: &ProblemParams) -> Route {
    if k == 0 && params.gap() > 0.0 && TheoremCase::classify(params).map(|c| c == TheoremCase::Case3).unwrap_or(false) {
        Route::K0
    } else {
        Route::Green
    }
}
