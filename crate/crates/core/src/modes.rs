//! Axisymmetric functions `φ(x) = Σ_k a_k(r) ψ_k(θ)` stored mode by mode on a
//! shared radial log grid, plus synthesis onto and projection from the
//! `(r, θ)` tensor grid.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::quadrature::{bracket, quintic_hermite, LogGrid};
use crate::zonal::{zonal_with_derivatives, AngularRule};

/// One zonal mode: radial coefficient `a_k` and, optionally, `a_k′`, `a_k″`.
#[derive(Debug, Clone)]
pub struct ModeProfile {
    pub k: usize,
    pub grid: Arc<LogGrid>,
    pub a: Vec<f64>,
    pub a_prime: Option<Vec<f64>>,
    pub a_double_prime: Option<Vec<f64>>,
}

impl ModeProfile {
    pub fn new(k: usize, grid: Arc<LogGrid>, a: Vec<f64>) -> Result<Self> {
        check_len(&grid, &a, "a")?;
        Ok(Self {
            k,
            grid,
            a,
            a_prime: None,
            a_double_prime: None,
        })
    }

    pub fn with_derivatives(
        k: usize,
        grid: Arc<LogGrid>,
        a: Vec<f64>,
        a_prime: Vec<f64>,
        a_double_prime: Vec<f64>,
    ) -> Result<Self> {
        check_len(&grid, &a, "a")?;
        check_len(&grid, &a_prime, "a'")?;
        check_len(&grid, &a_double_prime, "a''")?;
        Ok(Self {
            k,
            grid,
            a,
            a_prime: Some(a_prime),
            a_double_prime: Some(a_double_prime),
        })
    }

    /// Samples `r ↦ (a, a′, a″)` at the grid nodes.
    pub fn from_fn(k: usize, grid: Arc<LogGrid>, f: impl Fn(f64) -> (f64, f64, f64)) -> Self {
        let n = grid.len();
        let (mut a, mut ap, mut app) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
        for &r in grid.radii() {
            let (x, y, z) = f(r);
            a.push(x);
            ap.push(y);
            app.push(z);
        }
        Self {
            k,
            grid,
            a,
            a_prime: Some(ap),
            a_double_prime: Some(app),
        }
    }

    /// Samples `r ↦ a(r)` only.
    pub fn from_values(k: usize, grid: Arc<LogGrid>, f: impl Fn(f64) -> f64) -> Self {
        let a = grid.radii().iter().map(|r| f(*r)).collect();
        Self {
            k,
            grid,
            a,
            a_prime: None,
            a_double_prime: None,
        }
    }

    pub fn zero(k: usize, grid: Arc<LogGrid>) -> Self {
        let n = grid.len();
        Self {
            k,
            grid,
            a: vec![0.0; n],
            a_prime: Some(vec![0.0; n]),
            a_double_prime: Some(vec![0.0; n]),
        }
    }

    pub fn r_min(&self) -> f64 {
        self.grid.r_min()
    }

    /// `a(1)`.
    pub fn boundary_value(&self) -> f64 {
        *self.a.last().unwrap()
    }

    pub fn has_derivatives(&self) -> bool {
        self.a_prime.is_some() && self.a_double_prime.is_some()
    }

    /// Fills missing derivatives by finite differences on the grid.
    pub fn with_fd_derivatives(mut self) -> Self {
        if self.a_prime.is_none() {
            self.a_prime = Some(self.grid.derivative(&self.a));
        }
        if self.a_double_prime.is_none() {
            self.a_double_prime = Some(self.grid.derivative(self.a_prime.as_ref().unwrap()));
        }
        self
    }

    pub fn scaled(&self, c: f64) -> Self {
        let s = |v: &Vec<f64>| v.iter().map(|x| c * x).collect::<Vec<_>>();
        Self {
            k: self.k,
            grid: self.grid.clone(),
            a: s(&self.a),
            a_prime: self.a_prime.as_ref().map(s),
            a_double_prime: self.a_double_prime.as_ref().map(s),
        }
    }

    /// `α·self + β·other` (same mode, same grid).
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Result<Self> {
        if self.k != other.k || !same_grid(&self.grid, &other.grid) {
            return Err(LabError::Input("combining modes on different grids or indices".into()));
        }
        let lin = |x: &Vec<f64>, y: &Vec<f64>| x.iter().zip(y).map(|(a, b)| alpha * a + beta * b).collect::<Vec<_>>();
        let opt = |x: &Option<Vec<f64>>, y: &Option<Vec<f64>>| match (x, y) {
            (Some(x), Some(y)) => Some(lin(x, y)),
            _ => None,
        };
        Ok(Self {
            k: self.k,
            grid: self.grid.clone(),
            a: lin(&self.a, &other.a),
            a_prime: opt(&self.a_prime, &other.a_prime),
            a_double_prime: opt(&self.a_double_prime, &other.a_double_prime),
        })
    }

    pub fn sup_abs(&self) -> f64 {
        self.a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `(a, a′, a″)` at `r` by quintic Hermite interpolation; needs derivative
    /// samples. Radii slightly below `r_min` are clamped to it.
    pub fn eval(&self, r: f64) -> Result<(f64, f64, f64)> {
        let (Some(ap), Some(app)) = (&self.a_prime, &self.a_double_prime) else {
            return Err(LabError::Input(format!("mode {} is missing derivative samples", self.k)));
        };
        let radii = self.grid.radii();
        let r = if r < radii[0] && r >= 0.9 * radii[0] { radii[0] } else { r };
        let i = bracket(radii, r)?;
        let left = (self.a[i], ap[i], app[i]);
        let right = (self.a[i + 1], ap[i + 1], app[i + 1]);
        Ok(quintic_hermite(radii[i], radii[i + 1], left, right, r))
    }
}

fn check_len(grid: &LogGrid, v: &[f64], what: &str) -> Result<()> {
    if v.len() != grid.len() {
        return Err(LabError::Input(format!(
            "{what} has {} samples, grid has {}",
            v.len(),
            grid.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(LabError::Input(format!("{what} has non-finite samples")));
    }
    Ok(())
}

pub(crate) fn same_grid(a: &Arc<LogGrid>, b: &Arc<LogGrid>) -> bool {
    Arc::ptr_eq(a, b) || a.spec() == b.spec()
}

/// A finite zonal expansion. Modes may appear in any order; repeated indices add.
#[derive(Debug, Clone, Default)]
pub struct ModeSet {
    pub modes: Vec<ModeProfile>,
}

/// Values and polar-coordinate derivatives of a zonal field on the `(r, θ)`
/// tensor grid, stored row-major in `r`.
#[derive(Debug, Clone)]
pub struct PolarField {
    pub nr: usize,
    pub nt: usize,
    pub f: Vec<f64>,
    pub f_r: Vec<f64>,
    pub f_rr: Vec<f64>,
    pub f_t: Vec<f64>,
    pub f_rt: Vec<f64>,
    pub f_tt: Vec<f64>,
    /// `cot θ · f_θ`, finite on the axis.
    pub cot_f_t: Vec<f64>,
}

impl PolarField {
    pub fn has_derivatives(&self) -> bool {
        !self.f_r.is_empty()
    }

    /// `|∇φ|²` at node `(i, j)` with radius `r`.
    pub fn grad_sq(&self, idx: usize, r: f64) -> f64 {
        let ft = self.f_t[idx] / r;
        self.f_r[idx] * self.f_r[idx] + ft * ft
    }

    /// Squared Frobenius norm of the Cartesian Hessian at node `idx`.
    pub fn hess_sq(&self, idx: usize, r: f64, n: usize) -> f64 {
        let h_rr = self.f_rr[idx];
        let h_rt = self.f_rt[idx] / r - self.f_t[idx] / (r * r);
        let h_tt = self.f_tt[idx] / (r * r) + self.f_r[idx] / r;
        let h_ww = self.f_r[idx] / r + self.cot_f_t[idx] / (r * r);
        h_rr * h_rr + 2.0 * h_rt * h_rt + h_tt * h_tt + (n as f64 - 2.0) * h_ww * h_ww
    }
}

impl ModeSet {
    pub fn new(modes: Vec<ModeProfile>) -> Result<Self> {
        let set = Self { modes };
        set.grid()?;
        Ok(set)
    }

    pub fn single(mode: ModeProfile) -> Self {
        Self { modes: vec![mode] }
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    /// The shared grid, or `None` for an empty set.
    pub fn grid(&self) -> Result<Option<Arc<LogGrid>>> {
        let mut it = self.modes.iter();
        let Some(first) = it.next() else {
            return Ok(None);
        };
        for m in it {
            if !same_grid(&first.grid, &m.grid) {
                return Err(LabError::Input(format!(
                    "mode {} is on a different grid than mode {}",
                    m.k, first.k
                )));
            }
        }
        Ok(Some(first.grid.clone()))
    }

    pub fn kmax(&self) -> usize {
        self.modes.iter().map(|m| m.k).max().unwrap_or(0)
    }

    pub fn mode(&self, k: usize) -> Option<&ModeProfile> {
        self.modes.iter().find(|m| m.k == k)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            modes: self.modes.iter().map(|m| m.scaled(c)).collect(),
        }
    }

    /// Concatenation; the expansion of the sum.
    pub fn plus(&self, other: &Self) -> Self {
        let mut modes = self.modes.clone();
        modes.extend(other.modes.iter().cloned());
        Self { modes }
    }

    /// Merges repeated indices and sorts by `k`.
    pub fn normalized(&self) -> Result<Self> {
        let mut out: Vec<ModeProfile> = Vec::new();
        for m in &self.modes {
            if let Some(slot) = out.iter_mut().find(|o| o.k == m.k) {
                *slot = slot.combine(1.0, m, 1.0)?;
            } else {
                out.push(m.clone());
            }
        }
        out.sort_by_key(|m| m.k);
        Ok(Self { modes: out })
    }

    /// Keeps modes with `k ≤ m`.
    pub fn truncated(&self, m: usize) -> Self {
        Self {
            modes: self.modes.iter().filter(|p| p.k <= m).cloned().collect(),
        }
    }

    /// Largest coefficient difference `max_k sup_r |a_k − b_k|` after merging.
    pub fn sup_diff(&self, other: &Self) -> Result<f64> {
        let d = self.plus(&other.scaled(-1.0)).normalized()?;
        Ok(d.modes.iter().map(|m| m.sup_abs()).fold(0.0, f64::max))
    }

    /// Field value at the point with radius `r` and polar angle `theta` in
    /// dimension `n`.
    pub fn eval_point(&self, n: usize, r: f64, theta: f64) -> Result<f64> {
        let z = zonal_with_derivatives(self.kmax(), n, theta.cos());
        let mut out = 0.0;
        for m in &self.modes {
            out += m.eval(r)?.0 * z[m.k][0];
        }
        Ok(out)
    }

    /// Evaluates the field on the `(r, θ)` tensor grid. Derivative arrays are
    /// filled only when `derivatives` is set; missing samples are an error then.
    pub fn synthesize(&self, rule: &AngularRule, derivatives: bool) -> Result<PolarField> {
        let grid = self.grid()?;
        let nt = rule.len();
        let nr = grid.as_ref().map(|g| g.len()).unwrap_or(0);
        if self.kmax() > rule.kmax {
            return Err(LabError::Input(format!(
                "angular rule covers k <= {}, modes reach k = {}",
                rule.kmax,
                self.kmax()
            )));
        }
        if derivatives {
            if let Some(m) = self.modes.iter().find(|m| !m.has_derivatives()) {
                return Err(LabError::Input(format!("mode {} is missing derivative samples", m.k)));
            }
        }
        let size = nr * nt;
        let alloc = |on: bool| if on { vec![0.0; size] } else { Vec::new() };
        let mut field = PolarField {
            nr,
            nt,
            f: vec![0.0; size],
            f_r: alloc(derivatives),
            f_rr: alloc(derivatives),
            f_t: alloc(derivatives),
            f_rt: alloc(derivatives),
            f_tt: alloc(derivatives),
            cot_f_t: alloc(derivatives),
        };
        for m in &self.modes {
            let k = m.k;
            let psi = &rule.psi[k];
            for i in 0..nr {
                let a = m.a[i];
                let row = i * nt;
                for j in 0..nt {
                    field.f[row + j] += a * psi[j];
                }
            }
            if derivatives {
                let ap = m.a_prime.as_ref().unwrap();
                let app = m.a_double_prime.as_ref().unwrap();
                let (pt, ptt, cpt) = (&rule.psi_theta[k], &rule.psi_theta_theta[k], &rule.cot_psi_theta[k]);
                for i in 0..nr {
                    let row = i * nt;
                    for j in 0..nt {
                        let idx = row + j;
                        field.f_r[idx] += ap[i] * psi[j];
                        field.f_rr[idx] += app[i] * psi[j];
                        field.f_t[idx] += m.a[i] * pt[j];
                        field.f_rt[idx] += ap[i] * pt[j];
                        field.f_tt[idx] += m.a[i] * ptt[j];
                        field.cot_f_t[idx] += m.a[i] * cpt[j];
                    }
                }
            }
        }
        Ok(field)
    }
}

/// Result of projecting a tensor-grid field onto zonal modes.
#[derive(Debug, Clone)]
pub struct Projection {
    pub modes: ModeSet,
    /// Energy outside the retained modes relative to the total, worst over radii
    /// with non-negligible energy.
    pub tail_fraction: f64,
}

/// Coefficients below this fraction of the row's `L²(S^{N−1})` norm are
/// quadrature roundoff and are set to zero.
pub const PROJECTION_NOISE: f64 = 1e-12;

/// Projects samples `values[i·nt + j] = F(r_i, θ_j)` onto modes `0..=kmax`.
pub fn project_field(values: &[f64], grid: &Arc<LogGrid>, rule: &AngularRule, kmax: usize) -> Result<Projection> {
    let nt = rule.len();
    let nr = grid.len();
    if values.len() != nr * nt {
        return Err(LabError::Input("field size does not match the tensor grid".into()));
    }
    if kmax > rule.kmax {
        return Err(LabError::Input("projection beyond the angular rule's mode range".into()));
    }
    let rows: Vec<(Vec<f64>, f64, f64)> = (0..nr)
        .into_par_iter()
        .map(|i| {
            let row = &values[i * nt..(i + 1) * nt];
            let mut coeffs: Vec<f64> = rule.project(row)[..=kmax].to_vec();
            let sq: Vec<f64> = row.iter().map(|v| v * v).collect();
            let total = rule.integrate(&sq);
            let floor = PROJECTION_NOISE * total.sqrt();
            for c in coeffs.iter_mut() {
                if c.abs() <= floor {
                    *c = 0.0;
                }
            }
            let kept: f64 = coeffs.iter().map(|c| c * c).sum();
            (coeffs, total, kept)
        })
        .collect();
    let peak = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let mut tail = 0.0f64;
    for (_, total, kept) in &rows {
        if *total > 1e-12 * peak && *total > 0.0 {
            tail = tail.max(((total - kept) / total).max(0.0));
        }
    }
    let modes = (0..=kmax)
        .map(|k| ModeProfile {
            k,
            grid: grid.clone(),
            a: rows.iter().map(|r| r.0[k]).collect(),
            a_prime: None,
            a_double_prime: None,
        })
        .collect();
    Ok(Projection {
        modes: ModeSet { modes },
        tail_fraction: tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::GridSpec;

    #[test]
    fn synthesis_then_projection_is_identity() {
        let grid = Arc::new(GridSpec::new(1.0, 4, 16).build());
        let rule = AngularRule::new(4, 6);
        let set = ModeSet::new(
            (0..=6)
                .map(|k| ModeProfile::from_values(k, grid.clone(), move |r| (k as f64 + 1.0) * r.powi(k as i32) * (1.0 - r)))
                .collect(),
        )
        .unwrap();
        let field = set.synthesize(&rule, false).unwrap();
        let proj = project_field(&field.f, &grid, &rule, 6).unwrap();
        assert!(proj.tail_fraction < 1e-12);
        assert!(proj.modes.sup_diff(&set).unwrap() < 1e-12);
    }

    #[test]
    fn hessian_of_quadratic() {
        // φ = x_N² = r² cos²θ; Hessian has a single entry 2, so |D²φ|² = 4.
        // cos²θ = 1/N + (cos²θ − 1/N) splits into modes 0 and 2.
        for n in [3usize, 4, 5] {
            let grid = Arc::new(GridSpec::new(1.0, 2, 8).build());
            let rule = AngularRule::new(n, 2);
            let values: Vec<f64> = grid
                .radii()
                .iter()
                .flat_map(|r| rule.theta.iter().map(move |t| r * r * t.cos().powi(2)))
                .collect();
            let proj = project_field(&values, &grid, &rule, 2).unwrap();
            let modes: Vec<ModeProfile> = proj
                .modes
                .modes
                .iter()
                .map(|m| {
                    // a_k = c_k r²
                    let c = m.a.last().unwrap();
                    ModeProfile::from_fn(m.k, grid.clone(), |r| (c * r * r, 2.0 * c * r, 2.0 * c))
                })
                .collect();
            let field = ModeSet::new(modes).unwrap().synthesize(&rule, true).unwrap();
            for i in 0..field.nr {
                let r = grid.radii()[i];
                for j in 0..field.nt {
                    let idx = i * field.nt + j;
                    assert!((field.hess_sq(idx, r, n) - 4.0).abs() < 1e-10);
                    // |∇φ|² = 4 x_N² = 4 r² cos²θ
                    let g = 4.0 * r * r * rule.theta[j].cos().powi(2);
                    assert!((field.grad_sq(idx, r) - g).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn mismatched_grids_rejected() {
        let g1 = Arc::new(GridSpec::new(1.0, 4, 16).build());
        let g2 = Arc::new(GridSpec::new(1.0, 5, 16).build());
        let err = ModeSet::new(vec![ModeProfile::zero(0, g1), ModeProfile::zero(1, g2)]).unwrap_err();
        assert!(matches!(err, LabError::Input(_)));
    }
}
