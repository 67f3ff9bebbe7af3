use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::barrier::{boundedness_bootstrap, maximum_principle_barrier, BarrierReport, BoundednessReport};
use super::{bump, iterate, power_remainder, FixedPointTrace, NormKind, PositivityCertificate, Step, Workspace};
use crate::error::{LabError, Result};
use crate::modes::{ModeSet, PolarField};
use crate::operator::{ProblemParams, TheoremCase};
use crate::radial::{evaluate_w, RadialProfile};
use crate::zonal::AngularRule;

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_STEPS: usize = 50;

/// Catalog of axisymmetric perturbation fields `ψ` with `ψ(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PsiKind {
    /// `ψ(x) = x`.
    Dilation,
    /// `ψ(x) = |x|² e_N`.
    AxialQuadratic,
    /// `ψ(x) = x η(|x|)`.
    RadialBump,
}

/// `ψ`, `Dψ` and `D²ψ` at a point; `jacobian[m·n + j] = ∂_j ψ^m`,
/// `hessian[(m·n + j)·n + l] = ∂_j ∂_l ψ^m`.
#[derive(Debug, Clone)]
pub struct PsiJet {
    pub value: Vec<f64>,
    pub jacobian: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl PsiKind {
    pub fn jet(self, x: &[f64]) -> PsiJet {
        let n = x.len();
        let mut value = vec![0.0; n];
        let mut jacobian = vec![0.0; n * n];
        let mut hessian = vec![0.0; n * n * n];
        match self {
            PsiKind::Dilation => {
                value.copy_from_slice(x);
                for m in 0..n {
                    jacobian[m * n + m] = 1.0;
                }
            }
            PsiKind::AxialQuadratic => {
                let z = n - 1;
                value[z] = x.iter().map(|v| v * v).sum();
                for j in 0..n {
                    jacobian[z * n + j] = 2.0 * x[j];
                    hessian[(z * n + j) * n + j] = 2.0;
                }
            }
            PsiKind::RadialBump => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let s = 1.0 - 4.0 * r2;
                if s > 0.0 {
                    let eta = bump(r2.sqrt());
                    let q = -8.0 / (s * s);
                    let q2 = q * q - 128.0 / (s * s * s);
                    for m in 0..n {
                        value[m] = x[m] * eta;
                        for j in 0..n {
                            let d = if m == j { 1.0 } else { 0.0 };
                            jacobian[m * n + j] = d * eta + x[m] * x[j] * eta * q;
                            for l in 0..n {
                                let dml = if m == l { 1.0 } else { 0.0 };
                                let djl = if j == l { 1.0 } else { 0.0 };
                                hessian[(m * n + j) * n + l] =
                                    eta * q * (d * x[l] + dml * x[j] + x[m] * djl) + eta * q2 * x[m] * x[j] * x[l];
                            }
                        }
                    }
                }
            }
        }
        PsiJet { value, jacobian, hessian }
    }
}

/// The map `x ↦ x + δψ(x)` from the closed unit ball onto `Ω_δ`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomainMap {
    pub psi: PsiKind,
    pub delta: f64,
    pub n: usize,
}

impl DomainMap {
    /// Checks `ψ(0) = 0` and `det(I + δDψ) > 0` on a sample of the closed ball.
    pub fn new(psi: PsiKind, delta: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(LabError::window(format!("N >= 3 (got N = {n})")));
        }
        if !(delta >= 0.0) || !delta.is_finite() {
            return Err(LabError::Input(format!("delta must be finite and >= 0, got {delta}")));
        }
        let map = Self { psi, delta, n };
        if psi.jet(&vec![0.0; n]).value.iter().any(|v| *v != 0.0) {
            return Err(LabError::Domain("psi(0) must vanish".into()));
        }
        let det = map.min_jacobian_det(33);
        if !(det > 0.0) {
            return Err(LabError::Domain(format!(
                "x + delta psi(x) is not injective on the closed ball (min det = {det:.3e})"
            )));
        }
        Ok(map)
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let j = self.psi.jet(x);
        x.iter().zip(&j.value).map(|(x, p)| x + self.delta * p).collect()
    }

    /// `I + δDψ(x)`.
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let j = self.psi.jet(x);
        DMatrix::from_fn(n, n, |m, c| if m == c { 1.0 } else { 0.0 } + self.delta * j.jacobian[m * n + c])
    }

    /// Smallest `det(I + δDψ)` over a meridian sample with `samples²` points.
    pub fn min_jacobian_det(&self, samples: usize) -> f64 {
        let mut worst = f64::INFINITY;
        for a in 0..samples {
            let r = a as f64 / (samples - 1) as f64;
            for b in 0..samples {
                let th = std::f64::consts::PI * b as f64 / (samples - 1) as f64;
                worst = worst.min(self.jacobian(&meridian_point(self.n, r, th)).determinant());
            }
        }
        worst
    }
}

/// `(r sin θ, 0, …, 0, r cos θ)`.
pub(crate) fn meridian_point(n: usize, r: f64, theta: f64) -> Vec<f64> {
    let (s, c) = theta.sin_cos();
    let mut x = vec![0.0; n];
    x[0] = r * s;
    x[n - 1] = r * c;
    x
}

/// Solves `x + δψ(x) = y` by Newton's method from `x₀ = y`.
pub fn domain_map_invert(map: &DomainMap, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != map.n {
        return Err(LabError::Input(format!("point has {} components, map lives in R^{}", y.len(), map.n)));
    }
    let mut x = y.to_vec();
    let mut res = f64::INFINITY;
    for _ in 0..=NEWTON_STEPS {
        let f: Vec<f64> = map.forward(&x).iter().zip(y).map(|(a, b)| a - b).collect();
        res = f.iter().map(|v| v * v).sum::<f64>().sqrt();
        if res <= NEWTON_TOL {
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1.0 + 1e-9 {
                return Err(LabError::Domain(format!("point lies outside the perturbed domain (|x| = {norm})")));
            }
            return Ok(x);
        }
        let step = map
            .jacobian(&x)
            .lu()
            .solve(&DVector::from_vec(f))
            .ok_or(LabError::NewtonDivergence { iterations: 0, residual: res })?;
        for (xi, s) in x.iter_mut().zip(step.iter()) {
            *xi -= s;
        }
        if !x.iter().all(|v| v.is_finite()) {
            break;
        }
    }
    Err(LabError::NewtonDivergence {
        iterations: NEWTON_STEPS,
        residual: res,
    })
}

/// Pointwise change-of-variables data at the meridian nodes of the tensor
/// grid. With `B = (I + δDψ)⁻¹` the differences from the identity are kept
/// explicitly: `B − I = −δDψB`, `G − I = BBᵀ − I`, `m = (B − I)ŷ` and
/// `d = ŷ − x̂`, so the perturbation terms carry no cancellation of `O(1)`
/// quantities. `c_m = tr(BᵀD²ψ^mB)` and `d_m = eᵀD²ψ^m e` with `e = Bŷ`
/// enter through their contractions with the rows of `B`.
#[derive(Debug, Clone)]
pub(crate) struct MapGeometry {
    pub nt: usize,
    pub theta: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub y_norm: Vec<f64>,
    nodes: Vec<NodeGeometry>,
    pub coefficient_delta: Vec<f64>,
}

/// Plane components are `(ρ, z)` = axes `0` and `N−1`; `_t` entries sum over
/// the transverse axes.
#[derive(Debug, Clone, Copy, Default)]
struct NodeGeometry {
    /// `G − I`: `(00, 0z, zz, Σ_t)`.
    gm: [f64; 4],
    yhat: [f64; 2],
    /// `m = (B − I)ŷ`: `(m_0, m_z, Σ_t m_t ŷ_t, Σ_t m_t²)`.
    m: [f64; 4],
    /// `d = ŷ − x̂`: `(d_0, d_z, Σ_t d_t²)`.
    d: [f64; 3],
    c: [f64; 2],
    dd: [f64; 2],
}

impl MapGeometry {
    pub fn new(map: &DomainMap, radii: &[f64], rule: &AngularRule) -> Result<Self> {
        let n = map.n;
        let z = n - 1;
        let nt = rule.len();
        let delta = map.delta;
        let nodes: Vec<(Vec<f64>, f64, NodeGeometry, f64)> = radii
            .par_iter()
            .flat_map_iter(|&r| rule.theta.iter().map(move |&th| (r, th)))
            .map(|(r, th)| {
                let x = meridian_point(n, r, th);
                let jet = map.psi.jet(&x);
                let dpsi = DMatrix::from_fn(n, n, |m, c| jet.jacobian[m * n + c]);
                let a = DMatrix::identity(n, n) + &dpsi * delta;
                if !(a.determinant() > 0.0) {
                    return Err(LabError::Domain(format!("map Jacobian not positive at r = {r}, theta = {th}")));
                }
                let b = a
                    .try_inverse()
                    .ok_or_else(|| LabError::Domain(format!("singular map Jacobian at r = {r}, theta = {th}")))?;
                let bm = -(&dpsi * &b) * delta;
                let gm = &bm + bm.transpose() + &bm * bm.transpose();
                let psi = DVector::from_column_slice(&jet.value);
                let xv = DVector::from_column_slice(&x);
                let y: Vec<f64> = x.iter().zip(&jet.value).map(|(x, p)| x + delta * p).collect();
                let yn = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let yh = DVector::from_iterator(n, y.iter().map(|v| v / yn));
                // 1/|y| − 1/r = (r² − |y|²) / (r |y| (r + |y|))
                let shift = -(2.0 * delta * xv.dot(&psi) + delta * delta * psi.norm_squared()) / (r * yn * (r + yn));
                let dv = &psi * (delta / yn) + &xv * shift;
                let mv = &bm * &yh;
                let ev = &yh + &mv;
                let mut cm = vec![0.0; n];
                let mut dm = vec![0.0; n];
                for m in 0..n {
                    let h = DMatrix::from_fn(n, n, |j, l| jet.hessian[(m * n + j) * n + l]);
                    if h.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    cm[m] = (b.transpose() * &h * &b).trace();
                    dm[m] = (ev.transpose() * &h * &ev)[(0, 0)];
                }
                let proj = |row: usize, v: &[f64]| (0..n).map(|m| b[(row, m)] * v[m]).sum::<f64>();
                let (s, cth) = th.sin_cos();
                let mut xh = DVector::zeros(n);
                xh[0] = s;
                xh[z] = cth;
                let coef = (&dv * xh.transpose() + &xh * dv.transpose() + &dv * dv.transpose()).norm();
                let node = NodeGeometry {
                    gm: [gm[(0, 0)], gm[(0, z)], gm[(z, z)], (1..z).map(|l| gm[(l, l)]).sum()],
                    yhat: [yh[0], yh[z]],
                    m: [
                        mv[0],
                        mv[z],
                        (1..z).map(|l| mv[l] * yh[l]).sum(),
                        (1..z).map(|l| mv[l] * mv[l]).sum(),
                    ],
                    d: [dv[0], dv[z], (1..z).map(|l| dv[l] * dv[l]).sum()],
                    c: [proj(0, &cm), proj(z, &cm)],
                    dd: [proj(0, &dm), proj(z, &dm)],
                };
                Ok((y, yn, node, coef))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut geo = MapGeometry {
            nt,
            theta: rule.theta.clone(),
            y: Vec::with_capacity(nodes.len()),
            y_norm: Vec::with_capacity(nodes.len()),
            nodes: Vec::with_capacity(nodes.len()),
            coefficient_delta: Vec::with_capacity(nodes.len()),
        };
        for (y, yn, node, coef) in nodes {
            geo.y.push(y);
            geo.y_norm.push(yn);
            geo.nodes.push(node);
            geo.coefficient_delta.push(coef);
        }
        Ok(geo)
    }
}

/// Cartesian gradient and Hessian blocks of a zonal field at a meridian node:
/// `(∇_ρ, ∇_z)`, `(H_ρρ, H_ρz, H_zz)` and the transverse diagonal entry.
struct Cartesian {
    grad: [f64; 2],
    h: [f64; 3],
    h_t: f64,
    lap_gamma: f64,
}

fn cartesian(field: &PolarField, idx: usize, r: f64, theta: f64, n: usize, gamma: f64) -> Cartesian {
    let (s, c) = theta.sin_cos();
    let f_r = field.f_r[idx];
    let h_rr = field.f_rr[idx];
    let h_rt = field.f_rt[idx] / r - field.f_t[idx] / (r * r);
    let h_tt = field.f_tt[idx] / (r * r) + f_r / r;
    let h_t = f_r / r + field.cot_f_t[idx] / (r * r);
    let ft = field.f_t[idx] / r;
    // e_r = (s, c), e_θ = (c, −s)
    let grad = [f_r * s + ft * c, f_r * c - ft * s];
    let h = [
        h_rr * s * s + 2.0 * h_rt * s * c + h_tt * c * c,
        h_rr * s * c + h_rt * (c * c - s * s) - h_tt * s * c,
        h_rr * c * c - 2.0 * h_rt * s * c + h_tt * s * s,
    ];
    let lap_gamma = (1.0 + gamma) * h_rr + h_tt + (n as f64 - 2.0) * h_t;
    Cartesian { grad, h, h_t, lap_gamma }
}

/// Perturbation fields on the tensor grid, row-major in `r`.
#[derive(Debug, Clone)]
pub struct PerturbationFields {
    /// `E_δ(v) = tr D²_y u − Δ_x v`.
    pub e_delta: Vec<f64>,
    /// `ŷᵀ(D²_y u − D²_x v)ŷ`.
    pub e_ij: Vec<f64>,
    /// `ŷᵀD²_x v ŷ − x̂ᵀD²_x v x̂`.
    pub coefficient_term: Vec<f64>,
    /// `|ŷŷᵀ − x̂x̂ᵀ|` (Frobenius).
    pub coefficient_delta: Vec<f64>,
    /// `T(v) − L_γ v = E_δ + γ(e_ij + coefficient_term)`.
    pub total: Vec<f64>,
    /// `L_γ v` in the ball variables.
    pub l_gamma: Vec<f64>,
}

impl PerturbationFields {
    pub fn sup(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

fn perturbation_on(field: &PolarField, geo: &MapGeometry, radii: &[f64], params: &ProblemParams, delta: f64) -> PerturbationFields {
    let nt = geo.nt;
    let size = field.f.len();
    let gamma = params.gamma;
    let mut out = PerturbationFields {
        e_delta: Vec::with_capacity(size),
        e_ij: Vec::with_capacity(size),
        coefficient_term: Vec::with_capacity(size),
        coefficient_delta: geo.coefficient_delta.clone(),
        total: Vec::with_capacity(size),
        l_gamma: Vec::with_capacity(size),
    };
    for idx in 0..size {
        let (i, j) = (idx / nt, idx % nt);
        let cz = cartesian(field, idx, radii[i], geo.theta[j], params.n, gamma);
        let g = &geo.nodes[idx];
        let [h00, h0z, hzz] = cz.h;
        let ht = cz.h_t;
        // u^T H w for plane vectors
        let form = |u: [f64; 2], w: [f64; 2]| u[0] * (h00 * w[0] + h0z * w[1]) + u[1] * (h0z * w[0] + hzz * w[1]);
        let e_delta = g.gm[0] * h00 + 2.0 * g.gm[1] * h0z + g.gm[2] * hzz + g.gm[3] * ht
            - delta * (cz.grad[0] * g.c[0] + cz.grad[1] * g.c[1]);
        let mp = [g.m[0], g.m[1]];
        let e_ij = 2.0 * (form(mp, g.yhat) + ht * g.m[2]) + form(mp, mp) + ht * g.m[3]
            - delta * (cz.grad[0] * g.dd[0] + cz.grad[1] * g.dd[1]);
        let (s, c) = geo.theta[j].sin_cos();
        let dp = [g.d[0], g.d[1]];
        let coef = 2.0 * form(dp, [s, c]) + form(dp, dp) + ht * g.d[2];
        out.e_delta.push(e_delta);
        out.e_ij.push(e_ij);
        out.coefficient_term.push(coef);
        out.total.push(e_delta + gamma * (e_ij + coef));
        out.l_gamma.push(cz.lap_gamma);
    }
    out
}

/// Perturbation fields of `v` (modes with two derivatives) under `map`.
pub fn perturbation_terms(v: &ModeSet, map: &DomainMap, params: &ProblemParams, rule: &AngularRule) -> Result<PerturbationFields> {
    let Some(grid) = v.grid()? else {
        return Err(LabError::Input("empty mode set".into()));
    };
    if map.n != params.n || rule.n != params.n {
        return Err(LabError::Input("map, rule and parameters disagree on N".into()));
    }
    let geo = MapGeometry::new(map, grid.radii(), rule)?;
    let field = v.synthesize(rule, true)?;
    Ok(perturbation_on(&field, &geo, grid.radii(), params, map.delta))
}

/// Sup of `|T(v) + |v|^p|` over the tensor grid relative to `max(1, sup|v|^p)`,
/// where `T` is `L_γ` written in the ball variables.
pub fn transformed_residual(v: &ModeSet, map: &DomainMap, params: &ProblemParams, rule: &AngularRule) -> Result<f64> {
    let fields = perturbation_terms(v, map, params, rule)?;
    let values = v.synthesize(rule, false)?.f;
    Ok(residual_of(&fields, &values, params.p))
}

fn residual_of(fields: &PerturbationFields, values: &[f64], p: f64) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 1.0f64;
    for (idx, v) in values.iter().enumerate() {
        let up = v.abs().powf(p);
        scale = scale.max(up);
        worst = worst.max((fields.l_gamma[idx] + fields.total[idx] + up).abs());
    }
    worst / scale
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomainOptions {
    pub kmax: usize,
    pub angular_nodes: Option<usize>,
    pub max_iter: usize,
    pub tol: f64,
    /// Run the positivity, barrier and boundedness certificates.
    pub certify: bool,
}

impl Default for DomainOptions {
    fn default() -> Self {
        Self {
            kmax: 8,
            angular_nodes: None,
            max_iter: 60,
            tol: 1e-10,
            certify: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DomainSolution {
    pub map: DomainMap,
    pub params: ProblemParams,
    /// `φ` with `v = w + φ` on the ball.
    pub phi: ModeSet,
    /// `v = w + φ`.
    pub v: ModeSet,
    pub trace: FixedPointTrace,
    /// `sup |T(v) + |v|^p| / max(1, sup|v|^p)`.
    pub transformed_residual: f64,
    pub positivity: Option<PositivityCertificate>,
    pub barrier: Option<BarrierReport>,
    pub boundedness: Option<BoundednessReport>,
    pub(crate) rule: AngularRule,
}

impl DomainSolution {
    /// `u(y) = v(x(y))`.
    pub fn u_at(&self, y: &[f64]) -> Result<f64> {
        let x = domain_map_invert(&self.map, y)?;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r == 0.0 {
            return Err(LabError::Domain("u is evaluated away from the origin".into()));
        }
        let rho = x[..self.map.n - 1].iter().map(|v| v * v).sum::<f64>().sqrt();
        let theta = rho.atan2(x[self.map.n - 1]);
        self.v.eval_point(self.map.n, r.min(1.0), theta)
    }

    /// `sup |u − u*| / sup |u*|` over the image of the tensor grid.
    pub fn relative_error(&self, exact: impl Fn(&[f64]) -> f64) -> Result<f64> {
        let grid = self.v.grid()?.ok_or_else(|| LabError::Input("empty solution".into()))?;
        let geo = MapGeometry::new(&self.map, grid.radii(), &self.rule)?;
        let values = self.v.synthesize(&self.rule, false)?.f;
        let (mut diff, mut scale) = (0.0f64, 0.0f64);
        for (v, y) in values.iter().zip(&geo.y) {
            let e = exact(y);
            diff = diff.max((v - e).abs());
            scale = scale.max(e.abs());
        }
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }
}

/// [`fixed_point_domain_with`] with default options.
pub fn fixed_point_domain(map: &DomainMap, params: &ProblemParams, w: &RadialProfile) -> Result<DomainSolution> {
    fixed_point_domain_with(map, params, w, &DomainOptions::default())
}

/// Iterates `φ_{n+1}` with `−L φ_{n+1} = |w+φ_n|^p − w^p − p w^{p−1}φ_n + (T − L_γ)(w + φ_n)`.
pub fn fixed_point_domain_with(map: &DomainMap, params: &ProblemParams, w: &RadialProfile, opts: &DomainOptions) -> Result<DomainSolution> {
    if map.n != params.n {
        return Err(LabError::Input("map and parameters disagree on N".into()));
    }
    let case = TheoremCase::classify(params)?;
    if case == TheoremCase::Case3 {
        return Err(LabError::window(
            "the domain iteration needs sigma > 0 small when 0 < gamma < N-2, or sigma < 0 when gamma > N-2",
        ));
    }
    let ws = Workspace::new(w, params, opts.kmax, opts.angular_nodes)?;
    let radii = ws.grid.radii().to_vec();
    let geo = MapGeometry::new(map, &radii, &ws.rule)?;
    let w_set = ModeSet::single(ws.w_mode());
    let p = params.p;

    let rhs = |phi: &ModeSet| -> Result<(ModeSet, f64, f64)> {
        let v = w_set.plus(phi);
        let field = v.synthesize(&ws.rule, true)?;
        let pert = perturbation_on(&field, &geo, &radii, params, map.delta);
        let nt = ws.rule.len();
        let wv = ws.w();
        let phi_f = phi.synthesize(&ws.rule, false)?;
        let values: Vec<f64> = phi_f
            .f
            .iter()
            .enumerate()
            .map(|(idx, &ph)| {
                let wi = wv[idx / nt];
                power_remainder(wi, ph, p) + pert.total[idx]
            })
            .collect();
        let (modes, tail) = ws.project(&values)?;
        Ok((modes, tail, residual_of(&pert, &field.f, p)))
    };

    let it = iterate(&ws, NormKind::X, opts.max_iter, opts.tol, |phi| {
        let (f, tail, _) = rhs(phi)?;
        let scale = ws.residual_scale(&phi.synthesize(&ws.rule, false)?);
        let residual = ws.mode_residuals(phi, &f, scale).into_iter().fold(0.0, f64::max);
        Ok(Step {
            next: ws.solve(&f)?,
            residual,
            tail,
        })
    })?;
    let phi = it.phi;
    let mut trace = it.trace;
    let (f, _, transformed) = rhs(&phi)?;
    let scale = ws.residual_scale(&phi.synthesize(&ws.rule, false)?);
    trace.mode_residuals = ws.mode_residuals(&phi, &f, scale);
    trace.final_residual = trace.mode_residuals.iter().copied().fold(0.0, f64::max);
    let v = w_set.plus(&phi).normalized()?;

    let mut positivity = None;
    let mut barrier = None;
    let mut boundedness = None;
    let vals = v.synthesize(&ws.rule, false)?.f;
    trace.positivity = radii
        .iter()
        .enumerate()
        .filter(|(_, r)| **r < 1.0)
        .flat_map(|(i, _)| vals[i * ws.rule.len()..(i + 1) * ws.rule.len()].iter().copied())
        .fold(f64::INFINITY, f64::min);
    if opts.certify {
        if case == TheoremCase::Case2 {
            positivity = Some(ws.positivity(&phi)?);
        } else {
            let forcing: Vec<f64> = vals.iter().map(|u| -u.abs().powf(p)).collect();
            let (fm, _) = ws.project(&forcing)?;
            barrier = Some(maximum_principle_barrier(&v, &fm, params, Some(map))?);
            boundedness = Some(boundedness_bootstrap(&v, map, params, opts.kmax)?);
        }
    }
    Ok(DomainSolution {
        map: *map,
        params: *params,
        phi,
        v,
        trace,
        transformed_residual: transformed,
        positivity,
        barrier,
        boundedness,
        rule: ws.rule.clone(),
    })
}

/// `u*(y) = (1+δ)^{−2/(p−1)} w(|y|/(1+δ))`, the exact solution on the
/// dilated ball.
pub fn dilation_oracle(w: &RadialProfile, p: f64, delta: f64) -> impl Fn(&[f64]) -> f64 + '_ {
    let c = (1.0 + delta).powf(-2.0 / (p - 1.0));
    move |y: &[f64]| {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt() / (1.0 + delta);
        c * evaluate_w(w, r.clamp(w.grid.r_min(), 1.0)).map(|v| v.0).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dilation_inverse_is_exact() {
        let map = DomainMap::new(PsiKind::Dilation, 0.25, 4).unwrap();
        let y = [0.3, -0.1, 0.2, 0.5];
        let x = domain_map_invert(&map, &y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b / 1.25).abs() < 1e-14);
        }
    }

    #[test]
    fn zero_delta_inverse_is_identity() {
        let map = DomainMap::new(PsiKind::RadialBump, 0.0, 3).unwrap();
        let y = [0.1, 0.2, -0.3];
        assert_eq!(domain_map_invert(&map, &y).unwrap(), y.to_vec());
    }

    #[test]
    fn round_trip() {
        for psi in [PsiKind::AxialQuadratic, PsiKind::RadialBump] {
            let map = DomainMap::new(psi, 0.05, 3).unwrap();
            for &(r, th) in &[(0.2, 0.3), (0.45, 2.0), (0.9, 1.1), (1.0, 3.0)] {
                let x = meridian_point(3, r, th);
                let back = domain_map_invert(&map, &map.forward(&x)).unwrap();
                for (a, b) in back.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn bump_jet_matches_differences() {
        let x = [0.1, 0.05, 0.2];
        let h = 1e-6;
        let j0 = PsiKind::RadialBump.jet(&x);
        for l in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[l] += h;
            xm[l] -= h;
            let (jp, jm) = (PsiKind::RadialBump.jet(&xp), PsiKind::RadialBump.jet(&xm));
            for m in 0..3 {
                let fd = (jp.value[m] - jm.value[m]) / (2.0 * h);
                assert!((fd - j0.jacobian[m * 3 + l]).abs() < 1e-8);
                for j in 0..3 {
                    let fd2 = (jp.jacobian[m * 3 + j] - jm.jacobian[m * 3 + j]) / (2.0 * h);
                    assert!((fd2 - j0.hessian[(m * 3 + j) * 3 + l]).abs() < 1e-7);
                }
            }
        }
    }

    #[test]
    fn large_delta_loses_injectivity() {
        assert!(DomainMap::new(PsiKind::AxialQuadratic, 5.0, 3).is_err());
    }
}
