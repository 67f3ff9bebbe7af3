use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{bump, iterate, power_remainder, taylor_constant, taylor_remainders_with, FixedPointTrace, NormKind, PositivityCertificate, Step, Workspace};
use crate::error::{LabError, Result};
use crate::linear::{k0_green_apply, operator_norm_probe_on};
use crate::modes::ModeSet;
use crate::norms::y_norm;
use crate::operator::{ProblemParams, TheoremCase};
use crate::quadrature::LogGrid;
use crate::radial::RadialProfile;
use crate::zonal::AngularRule;

/// Axisymmetric forcing profiles `g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    /// `g ≡ 1`.
    One,
    /// `g(x) = η(|x|)` with the standard bump `η`.
    RadialBump,
    /// `g(x) = x_N`.
    Axial,
}

impl ForcingKind {
    pub fn value(self, r: f64, theta: f64) -> f64 {
        match self {
            ForcingKind::One => 1.0,
            ForcingKind::RadialBump => bump(r),
            ForcingKind::Axial => r * theta.cos(),
        }
    }

    /// Zonal modes `0..=kmax` of `g` on `grid`.
    pub fn modes(self, n: usize, grid: &Arc<LogGrid>, kmax: usize) -> Result<ModeSet> {
        let rule = AngularRule::new(n, kmax);
        let values = tensor_values(grid, &rule, |r, th| self.value(r, th));
        Ok(crate::modes::project_field(&values, grid, &rule, kmax)?.modes)
    }
}

fn tensor_values(grid: &LogGrid, rule: &AngularRule, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len() * rule.len());
    for &r in grid.radii() {
        for &th in &rule.theta {
            out.push(f(r, th));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct ZeroOrderConfig {
    pub params: ProblemParams,
    pub delta: f64,
    #[serde(skip)]
    pub g_modes: ModeSet,
    /// Radius `R` of the contraction ball.
    pub radius: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub kmax: usize,
    /// Trials of the operator-norm probe behind the into-condition.
    pub probe_trials: usize,
    pub seed: u64,
}

impl ZeroOrderConfig {
    pub const DEFAULT_RADIUS: f64 = 0.1;

    pub fn new(params: ProblemParams, delta: f64, g_modes: ModeSet) -> Self {
        Self {
            params,
            delta,
            g_modes,
            radius: Self::DEFAULT_RADIUS,
            max_iter: 60,
            tol: 1e-10,
            kmax: 8,
            probe_trials: 8,
            seed: 7,
        }
    }

    pub fn validate(&self) -> Result<NormKind> {
        self.params.validate()?;
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(LabError::Input(format!("R must lie in (0, 1], got {}", self.radius)));
        }
        if !self.delta.is_finite() || !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(LabError::Input("delta must be finite, tol positive and max_iter nonzero".into()));
        }
        if self.g_modes.kmax() > self.kmax {
            return Err(LabError::Input(format!("g has modes above kmax = {}", self.kmax)));
        }
        match TheoremCase::classify(&self.params)? {
            TheoremCase::Case2 => {
                if self.params.sigma > 2.0 / (self.params.p - 1.0) {
                    return Err(LabError::window(format!("sigma <= 2/(p-1) (got sigma = {})", self.params.sigma)));
                }
                Ok(NormKind::X)
            }
            TheoremCase::Case3 => Ok(NormKind::WHat),
            TheoremCase::Case1 => Err(LabError::window(
                "the zero-order iteration needs sigma < 0: gamma > N-2, or 0 < gamma < N-2 with the first-mode window",
            )),
        }
    }
}

/// Projected right side with its truncation tail.
#[derive(Debug, Clone)]
pub struct RhsProjection {
    pub modes: ModeSet,
    pub tail_fraction: f64,
}

/// The into-condition `C(|δ| + R² + R^p) ≤ R` (factor 2 in the `Ŵ` regime)
/// with `C = C_lin · max(1, ‖g w^p‖_Y, C_p)`.
#[derive(Debug, Clone, Serialize)]
pub struct IntoCondition {
    pub c_linear: f64,
    pub g_wp_y_norm: f64,
    pub c_p: f64,
    pub c: f64,
    pub factor: f64,
    pub radius: f64,
    pub delta: f64,
    pub lhs: f64,
    pub holds: bool,
    /// Largest `δ/2^j` meeting the condition, if any.
    pub delta_admissible: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ZeroOrderSolution {
    pub phi: ModeSet,
    pub trace: FixedPointTrace,
    pub positivity: PositivityCertificate,
    pub into: IntoCondition,
}

pub(crate) struct ZeroOrderProblem<'a> {
    pub ws: Workspace,
    pub config: &'a ZeroOrderConfig,
    pub kind: NormKind,
    g_field: Vec<f64>,
    c_p: f64,
}

impl<'a> ZeroOrderProblem<'a> {
    pub fn new(config: &'a ZeroOrderConfig, w: &RadialProfile) -> Result<Self> {
        let kind = config.validate()?;
        let ws = Workspace::new(w, &config.params, config.kmax, None)?;
        if let Some(g) = config.g_modes.grid()? {
            if *g != *ws.grid {
                return Err(LabError::Input("g and w live on different grids".into()));
            }
        }
        let g_field = if config.g_modes.is_empty() {
            vec![0.0; ws.grid.len() * ws.rule.len()]
        } else {
            config.g_modes.synthesize(&ws.rule, false)?.f
        };
        let c_p = if cfg!(debug_assertions) { taylor_constant(config.params.p)? } else { f64::NAN };
        Ok(Self {
            ws,
            config,
            kind,
            g_field,
            c_p,
        })
    }

    fn rhs_at(&self, phi: &ModeSet, delta: f64) -> Result<RhsProjection> {
        let field = phi.synthesize(&self.ws.rule, false)?;
        let nt = self.ws.rule.len();
        let w = self.ws.w();
        let p = self.config.params.p;
        let values: Vec<f64> = field
            .f
            .iter()
            .enumerate()
            .map(|(idx, &ph)| {
                let wi = w[idx / nt];
                let au = (wi + ph).abs().powf(p);
                let rem = power_remainder(wi, ph, p);
                if cfg!(debug_assertions) && wi > 0.0 {
                    let t = taylor_remainders_with(wi, ph, ph, p, self.c_p).expect("w > 0");
                    debug_assert!(t.holds(), "Taylor bound violated at w = {wi}, phi = {ph}");
                }
                delta * self.g_field[idx] * au + rem
            })
            .collect();
        let (modes, tail_fraction) = self.ws.project(&values)?;
        Ok(RhsProjection { modes, tail_fraction })
    }

    fn run(&self, delta: f64) -> Result<(ModeSet, FixedPointTrace)> {
        let it = iterate(&self.ws, self.kind, self.config.max_iter, self.config.tol, |phi| {
            let f = self.rhs_at(phi, delta)?;
            let field = phi.synthesize(&self.ws.rule, false)?;
            let scale = self.ws.residual_scale(&field);
            let residual = self.ws.mode_residuals(phi, &f.modes, scale).into_iter().fold(0.0, f64::max);
            Ok(Step {
                next: self.ws.solve(&f.modes)?,
                residual,
                tail: f.tail_fraction,
            })
        })?;
        let mut trace = it.trace;
        let f = self.rhs_at(&it.phi, delta)?;
        let scale = self.ws.residual_scale(&it.phi.synthesize(&self.ws.rule, false)?);
        trace.mode_residuals = self.ws.mode_residuals(&it.phi, &f.modes, scale);
        trace.final_residual = trace.mode_residuals.iter().copied().fold(0.0, f64::max);
        Ok((it.phi, trace))
    }

    /// `φ_lin` with `−L φ_lin = g w^p`.
    fn linear_response(&self) -> Result<ModeSet> {
        let nt = self.ws.rule.len();
        let w = self.ws.w();
        let p = self.config.params.p;
        let values: Vec<f64> = self.g_field.iter().enumerate().map(|(idx, g)| g * w[idx / nt].powf(p)).collect();
        let (modes, _) = self.ws.project(&values)?;
        self.ws.solve(&modes)
    }

    fn into_condition(&self) -> Result<IntoCondition> {
        let params = &self.config.params;
        let grid = self.ws.grid.clone();
        let first = TheoremCase::classify(params)?.first_mode();
        let level = self.config.kmax.max(first);
        let probe = operator_norm_probe_on(params, &[level], self.config.probe_trials, self.config.seed, grid.spec())?;
        let mut c_linear = probe.estimate(level).unwrap_or(0.0);
        if self.kind == NormKind::WHat {
            let ones = vec![1.0; grid.len()];
            c_linear = c_linear.max(k0_green_apply(&ones, &grid, params)?.c3);
        }
        let nt = self.ws.rule.len();
        let w = self.ws.w();
        let values: Vec<f64> = self.g_field.iter().enumerate().map(|(idx, g)| g * w[idx / nt].powf(params.p)).collect();
        let (gwp, _) = self.ws.project(&values)?;
        let g_wp_y_norm = y_norm(&gwp, params)?.norm_value;
        let c_p = taylor_constant(params.p)?;
        let c = c_linear * 1f64.max(g_wp_y_norm).max(c_p);
        let factor = if self.kind == NormKind::WHat { 2.0 } else { 1.0 };
        let r = self.config.radius;
        let lhs_at = |d: f64| factor * c * (d.abs() + r * r + r.powf(params.p));
        let lhs = lhs_at(self.config.delta);
        let mut delta_admissible = None;
        let mut d = self.config.delta.abs();
        for _ in 0..60 {
            if lhs_at(d) <= r {
                delta_admissible = Some(d);
                break;
            }
            d *= 0.5;
        }
        Ok(IntoCondition {
            c_linear,
            g_wp_y_norm,
            c_p,
            c,
            factor,
            radius: r,
            delta: self.config.delta,
            lhs,
            holds: lhs <= r,
            delta_admissible,
        })
    }
}

/// Evaluates `δ g|w+φ|^p + |w+φ|^p − w^p − p w^{p−1}φ` on the tensor grid and
/// projects it onto modes `0..=kmax`.
pub fn zero_order_rhs(phi: &ModeSet, w: &RadialProfile, config: &ZeroOrderConfig) -> Result<RhsProjection> {
    let problem = ZeroOrderProblem::new(config, w)?;
    problem.rhs_at(phi, config.delta)
}

/// Banach iteration `φ_{n+1} = J_δ(φ_n)` from `φ₀ = 0`.
///
/// The into-condition is evaluated with the probed constant and reported;
/// the iteration runs regardless and its own contraction history decides.
pub fn fixed_point_zero_order(config: &ZeroOrderConfig, w: &RadialProfile) -> Result<ZeroOrderSolution> {
    let problem = ZeroOrderProblem::new(config, w)?;
    let into = problem.into_condition()?;
    let (phi, mut trace) = problem.run(config.delta)?;
    let positivity = problem.ws.positivity(&phi)?;
    trace.positivity = positivity.min_u;
    Ok(ZeroOrderSolution {
        phi,
        trace,
        positivity,
        into,
    })
}

/// Defects `‖φ(δ) − δφ_lin‖` at `δ` and `δ/2` and their ratio (about 4 for
/// a second-order remainder).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LinearizationCheck {
    pub delta: f64,
    pub defect: f64,
    pub defect_half: f64,
    pub ratio: f64,
    pub within: bool,
    pub phi_norm: f64,
    pub phi_half_norm: f64,
}

pub fn linearization_check(config: &ZeroOrderConfig, w: &RadialProfile) -> Result<LinearizationCheck> {
    let problem = ZeroOrderProblem::new(config, w)?;
    let ws = &problem.ws;
    let lin = problem.linear_response()?;
    let d = config.delta;
    let (phi, _) = problem.run(d)?;
    let (phi_half, _) = problem.run(0.5 * d)?;
    let defect_of = |phi: &ModeSet, s: f64| -> Result<f64> {
        let diff = super::combine_sets(phi, 1.0, &lin, -s, ws.kmax, &ws.grid)?;
        ws.norm(problem.kind, &diff)
    };
    let defect = defect_of(&phi, d)?;
    let defect_half = defect_of(&phi_half, 0.5 * d)?;
    let ratio = defect / defect_half;
    Ok(LinearizationCheck {
        delta: d,
        defect,
        defect_half,
        ratio,
        within: (3.0..=5.0).contains(&ratio),
        phi_norm: ws.norm(problem.kind, &phi)?,
        phi_half_norm: ws.norm(problem.kind, &phi_half)?,
    })
}
