//! Dyadic weighted norms.
//!
//! ```text
//! ‖f‖_Y = sup_s ( s^{(2+σ)t−N} ∫_{A_s} |f|^t )^{1/t}
//! ‖φ‖_X = sup_s ( s^{σt−N} [∫_{A_s} |φ|^t + s^t ∫_{A_s} |∇φ|^t + s^{2t} ∫_{A_s} |D²φ|^t] )^{1/t}
//! ```
//!
//! with `A_s = {s < |x| < 2s}`. The sup runs over a geometric grid of `s`
//! from `1/2` down to twice the inner cutoff. Per-annulus values are reported
//! after the `1/t` root, so the norm is simply their maximum.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::modes::{ModeSet, PolarField};
use crate::operator::ProblemParams;
use crate::quadrature::LogGrid;
use crate::zonal::{default_angular_nodes, AngularRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    /// Number of `s` values per octave (4 gives ratio `2^{1/4}`).
    pub per_octave: usize,
    /// Polar-angle nodes; `None` picks `max(64, 4k+16)`.
    pub angular_nodes: Option<usize>,
    /// Constant of the pointwise imbedding check.
    pub c_embed: f64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self {
            per_octave: 4,
            angular_nodes: None,
            c_embed: 50.0,
        }
    }
}

impl NormOptions {
    pub fn refined(self) -> Self {
        Self {
            per_octave: 2 * self.per_octave,
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusValue {
    pub s: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormReport {
    #[serde(rename = "norm")]
    pub norm_value: f64,
    pub achieving_s: f64,
    #[serde(rename = "annuli")]
    pub per_annulus: Vec<AnnulusValue>,
    /// The sup sits on the innermost annulus and is still growing there.
    pub divergent: bool,
}

impl WeightedNormReport {
    fn from_annuli(per_annulus: Vec<AnnulusValue>) -> Self {
        let mut best = AnnulusValue { s: 0.0, value: 0.0 };
        for a in &per_annulus {
            if a.value > best.value {
                best = *a;
            }
        }
        let divergent = match per_annulus.len() {
            n if n >= 2 => {
                let last = per_annulus[n - 1];
                let prev = per_annulus[n - 2];
                best.value > 0.0 && last.s == best.s && last.value > prev.value * (1.0 + 1e-9)
            }
            _ => false,
        };
        Self {
            norm_value: best.value,
            achieving_s: best.s,
            per_annulus,
            divergent,
        }
    }

    fn zero() -> Self {
        Self {
            norm_value: 0.0,
            achieving_s: 0.0,
            per_annulus: Vec::new(),
            divergent: false,
        }
    }
}

/// Grid indices `j` with `r_j = s` for the dyadic `s` values.
fn s_indices(grid: &LogGrid, per_octave: usize) -> Result<Vec<usize>> {
    let m = grid.per_octave();
    if per_octave == 0 || m % per_octave != 0 {
        return Err(LabError::Input(format!(
            "s-grid with {per_octave} points per octave is not aligned with a {m}-per-octave radial grid"
        )));
    }
    let step = m / per_octave;
    let top = grid
        .node_index(0.5 * grid.r_max())
        .ok_or_else(|| LabError::Input("radial grid must contain r = 1/2".into()))?;
    let mut out = Vec::new();
    let mut j = top as isize;
    while j >= m as isize {
        out.push(j as usize);
        j -= step as isize;
    }
    Ok(out)
}

fn annulus_integrals(grid: &LogGrid, radial: &[f64], idx: &[usize], n: usize) -> Vec<f64> {
    let m = grid.per_octave();
    let weighted: Vec<f64> = radial
        .iter()
        .zip(grid.radii())
        .map(|(v, r)| v * r.powi(n as i32 - 1))
        .collect();
    idx.iter().map(|&j| grid.boole(&weighted, j, j + m)).collect()
}

fn angular_rule(set: &ModeSet, n: usize, opts: &NormOptions) -> AngularRule {
    let kmax = set.kmax();
    AngularRule::with_nodes(n, kmax, opts.angular_nodes.unwrap_or_else(|| default_angular_nodes(kmax)))
}

fn check(set: &ModeSet) -> Result<Option<Arc<LogGrid>>> {
    set.grid()
}

pub fn y_norm(modes: &ModeSet, params: &ProblemParams) -> Result<WeightedNormReport> {
    y_norm_with(modes, params, &NormOptions::default())
}

pub fn y_norm_with(modes: &ModeSet, params: &ProblemParams, opts: &NormOptions) -> Result<WeightedNormReport> {
    let Some(grid) = check(modes)? else {
        return Ok(WeightedNormReport::zero());
    };
    let n = params.n;
    let t = params.t;
    let rule = angular_rule(modes, n, opts);
    let field = modes.synthesize(&rule, false)?;
    let nt = field.nt;
    let radial: Vec<f64> = (0..field.nr)
        .into_par_iter()
        .map(|i| {
            let row: Vec<f64> = field.f[i * nt..(i + 1) * nt].iter().map(|v| v.abs().powf(t)).collect();
            rule.integrate(&row)
        })
        .collect();
    let idx = s_indices(&grid, opts.per_octave)?;
    let ints = annulus_integrals(&grid, &radial, &idx, n);
    let e = (2.0 + params.sigma) * t - n as f64;
    let annuli = idx
        .iter()
        .zip(ints)
        .map(|(&j, v)| {
            let s = grid.radii()[j];
            AnnulusValue {
                s,
                value: (s.powf(e) * v).max(0.0).powf(1.0 / t),
            }
        })
        .collect();
    Ok(WeightedNormReport::from_annuli(annuli))
}

pub fn x_norm(modes: &ModeSet, params: &ProblemParams) -> Result<WeightedNormReport> {
    x_norm_with(modes, params, &NormOptions::default())
}

pub fn x_norm_with(modes: &ModeSet, params: &ProblemParams, opts: &NormOptions) -> Result<WeightedNormReport> {
    let Some(grid) = check(modes)? else {
        return Ok(WeightedNormReport::zero());
    };
    let n = params.n;
    let t = params.t;
    let rule = angular_rule(modes, n, opts);
    let field = modes.synthesize(&rule, true)?;
    let (i0, i1, i2) = x_radial_integrands(&field, &grid, &rule, n, t);
    let idx = s_indices(&grid, opts.per_octave)?;
    let a0 = annulus_integrals(&grid, &i0, &idx, n);
    let a1 = annulus_integrals(&grid, &i1, &idx, n);
    let a2 = annulus_integrals(&grid, &i2, &idx, n);
    let e = params.sigma * t - n as f64;
    let annuli = idx
        .iter()
        .enumerate()
        .map(|(q, &j)| {
            let s = grid.radii()[j];
            let total = a0[q] + s.powf(t) * a1[q] + s.powf(2.0 * t) * a2[q];
            AnnulusValue {
                s,
                value: (s.powf(e) * total).max(0.0).powf(1.0 / t),
            }
        })
        .collect();
    Ok(WeightedNormReport::from_annuli(annuli))
}

fn x_radial_integrands(
    field: &PolarField,
    grid: &LogGrid,
    rule: &AngularRule,
    n: usize,
    t: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let nt = field.nt;
    let rows: Vec<(f64, f64, f64)> = (0..field.nr)
        .into_par_iter()
        .map(|i| {
            let r = grid.radii()[i];
            let mut v0 = Vec::with_capacity(nt);
            let mut v1 = Vec::with_capacity(nt);
            let mut v2 = Vec::with_capacity(nt);
            for j in 0..nt {
                let idx = i * nt + j;
                v0.push(field.f[idx].abs().powf(t));
                v1.push(field.grad_sq(idx, r).powf(0.5 * t));
                v2.push(field.hess_sq(idx, r, n).powf(0.5 * t));
            }
            (rule.integrate(&v0), rule.integrate(&v1), rule.integrate(&v2))
        })
        .collect();
    (
        rows.iter().map(|r| r.0).collect(),
        rows.iter().map(|r| r.1).collect(),
        rows.iter().map(|r| r.2).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointwiseBound {
    /// `sup |x|^σ |φ| + |x|^{σ+1} |∇φ|` over the grid.
    pub c_sup: f64,
    pub x_norm: f64,
    pub c_embed: f64,
    pub ok: bool,
}

pub fn pointwise_bound_check(modes: &ModeSet, params: &ProblemParams) -> Result<PointwiseBound> {
    pointwise_bound_check_with(modes, params, &NormOptions::default())
}

pub fn pointwise_bound_check_with(modes: &ModeSet, params: &ProblemParams, opts: &NormOptions) -> Result<PointwiseBound> {
    let Some(grid) = check(modes)? else {
        return Ok(PointwiseBound {
            c_sup: 0.0,
            x_norm: 0.0,
            c_embed: opts.c_embed,
            ok: true,
        });
    };
    let rule = angular_rule(modes, params.n, opts);
    let field = modes.synthesize(&rule, true)?;
    let sigma = params.sigma;
    let mut c_sup = 0.0f64;
    for i in 0..field.nr {
        let r = grid.radii()[i];
        for j in 0..field.nt {
            let idx = i * field.nt + j;
            let v = r.powf(sigma) * field.f[idx].abs() + r.powf(sigma + 1.0) * field.grad_sq(idx, r).sqrt();
            c_sup = c_sup.max(v);
        }
    }
    let x = x_norm_with(modes, params, opts)?.norm_value;
    Ok(PointwiseBound {
        c_sup,
        x_norm: x,
        c_embed: opts.c_embed,
        ok: c_sup <= opts.c_embed * x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modes::ModeProfile;
    use crate::quadrature::GridSpec;
    use crate::zonal::sphere_area;

    fn params() -> ProblemParams {
        ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap()
    }

    #[test]
    fn zero_field() {
        let grid = Arc::new(GridSpec::default().build());
        let set = ModeSet::single(ModeProfile::zero(0, grid));
        assert_eq!(y_norm(&set, &params()).unwrap().norm_value, 0.0);
        assert_eq!(x_norm(&set, &params()).unwrap().norm_value, 0.0);
        let pb = pointwise_bound_check(&set, &params()).unwrap();
        assert!(pb.ok && pb.c_sup == 0.0);
        assert_eq!(y_norm(&ModeSet::default(), &params()).unwrap().norm_value, 0.0);
    }

    #[test]
    fn power_law_extremal_is_flat() {
        let p = params();
        let grid = Arc::new(GridSpec::default().build());
        let area = sphere_area(p.n - 1);
        let e = 2.0 + p.sigma;
        let set = ModeSet::single(ModeProfile::from_values(0, grid, |r| area.sqrt() * r.powf(-e)));
        let rep = y_norm(&set, &p).unwrap();
        // ω ∫_1^2 ρ^{N−1−(2+σ)t} dρ
        let q = p.n as f64 - e * p.t;
        let expect = (area * (2f64.powf(q) - 1.0) / q).powf(1.0 / p.t);
        for a in &rep.per_annulus {
            assert!((a.value - expect).abs() < 1e-10 * expect, "{} vs {expect}", a.value);
        }
    }

    #[test]
    fn s_grid_alignment() {
        let grid = GridSpec::default().build();
        let idx = s_indices(&grid, 4).unwrap();
        assert_eq!(grid.radii()[idx[0]], 0.5);
        assert_eq!(idx.len(), 4 * 18 + 1);
        assert!((grid.radii()[*idx.last().unwrap()] - 2.0 * grid.r_min()).abs() < 1e-18);
        assert!(s_indices(&grid, 5).is_err());
    }
}
