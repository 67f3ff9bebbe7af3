use serde::Serialize;

use super::domain::{domain_map_invert, meridian_point, DomainMap, MapGeometry};
use crate::error::{LabError, Result};
use crate::linear::{k0_green_apply, solve_cordes_mode};
use crate::modes::{project_field, ModeProfile, ModeSet};
use crate::norms::x_norm;
use crate::operator::{indicial_roots, sigma_window, ProblemParams, TheoremCase};
use crate::zonal::{zonal_with_derivatives, AngularRule};

/// Exhaustion radii `2⁻⁴ … 2⁻¹⁰`.
pub const EXHAUSTION_LEVELS: std::ops::RangeInclusive<i32> = 4..=10;
/// Differences between exhaustion levels are measured on `r ≥ OUTER_RADIUS`.
pub const OUTER_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustionLevel {
    pub eps: f64,
    /// `min u_ε` over nodes with `r ≥ ε`.
    pub min_value: f64,
    /// `sup_{r ≥ 1/2} |u_ε − u_{ε/2}|` (absent on the last level).
    pub diff_to_next: Option<f64>,
    /// `u_{ε/2} ≥ u_ε` on `r ≥ ε`.
    pub monotone_to_next: Option<bool>,
    /// `sup_{r ≥ 1/2} |u_ε − u|` against the full-ball solution.
    pub gap_to_limit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub barrier_ok: bool,
    /// `sup |z|^{2+σ}|f| / (σ(N−1−(σ+1)(1+γ)))`.
    pub bound: f64,
    pub denominator: f64,
    /// `sup |y|^σ u`.
    pub weighted_sup: f64,
    /// `min |y|^σ u`.
    pub weighted_min: f64,
    /// `bound − weighted_sup`.
    pub margin: f64,
    pub exhaustion: Vec<ExhaustionLevel>,
    /// Monotone, nonnegative and with shrinking level differences.
    pub stabilized: Option<bool>,
    /// `sup_{r ≥ 1/2} |u_full − u|` between the full-ball solve and the input.
    pub limit_vs_input: Option<f64>,
}

/// Checks `0 ≤ |y|^σ u ≤ sup |z|^{2+σ}|f| / (σ(N−1−(σ+1)(1+γ)))` on the grid
/// for `L_γ u = f ≤ 0`, and runs the exhaustion by `B₁ ∖ B_ε` in ball
/// variables (skipped for a nontrivial map).
pub fn maximum_principle_barrier(u: &ModeSet, f: &ModeSet, params: &ProblemParams, map: Option<&DomainMap>) -> Result<BarrierReport> {
    let sigma = params.sigma;
    let a = 1.0 + params.gamma;
    let denominator = sigma * (params.dim() - 1.0 - (sigma + 1.0) * a);
    if !(sigma > 0.0) || !(denominator > 0.0) {
        return Err(LabError::window(format!(
            "barrier needs sigma > 0 and sigma (N-1-(sigma+1)(1+gamma)) > 0, got {denominator:.6} at sigma = {sigma}"
        )));
    }
    let grid = match (u.grid()?, f.grid()?) {
        (Some(g), _) | (None, Some(g)) => g,
        (None, None) => {
            return Ok(BarrierReport {
                barrier_ok: true,
                bound: 0.0,
                denominator,
                weighted_sup: 0.0,
                weighted_min: 0.0,
                margin: 0.0,
                exhaustion: Vec::new(),
                stabilized: None,
                limit_vs_input: None,
            })
        }
    };
    let kmax = u.kmax().max(f.kmax());
    let rule = AngularRule::new(params.n, kmax);
    let nt = rule.len();
    let radii = grid.radii();
    let uf = synth_or_zero(u, &rule, radii.len())?;
    let ff = synth_or_zero(f, &rule, radii.len())?;
    let f_sup = ff.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let f_max = ff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if f_max > 1e-10 * f_sup.max(f64::MIN_POSITIVE) {
        return Err(LabError::Domain(format!("forcing must satisfy f <= 0; sampled max is {f_max:.3e}")));
    }
    let y_norm = match map {
        Some(m) => MapGeometry::new(m, radii, &rule)?.y_norm,
        None => radii.iter().flat_map(|r| std::iter::repeat(*r).take(nt)).collect(),
    };
    let mut sup_f = 0.0f64;
    let (mut w_sup, mut w_min) = (0.0f64, 0.0f64);
    for idx in 0..uf.len() {
        let y = y_norm[idx];
        sup_f = sup_f.max(y.powf(2.0 + sigma) * ff[idx].abs());
        let wu = y.powf(sigma) * uf[idx];
        w_sup = w_sup.max(wu);
        w_min = w_min.min(wu);
    }
    let bound = sup_f / denominator;
    let margin = bound - w_sup;
    let scale = w_sup.abs().max(bound).max(f64::MIN_POSITIVE);
    let barrier_ok = margin >= 0.0 && w_min >= -1e-12 * scale;

    let trivial_map = map.map(|m| m.delta == 0.0).unwrap_or(true);
    let (exhaustion, stabilized, limit_vs_input) = if trivial_map && !f.is_empty() {
        let (levels, limit_gap) = exhaustion(u, f, params, &rule)?;
        let ok = levels.iter().all(|l| l.min_value >= -1e-12 * scale && l.monotone_to_next.unwrap_or(true))
            && levels.windows(2).all(|w| match (w[0].diff_to_next, w[1].diff_to_next) {
                (Some(a), Some(b)) => b <= a,
                _ => true,
            });
        (levels, Some(ok), Some(limit_gap))
    } else {
        (Vec::new(), None, None)
    };
    Ok(BarrierReport {
        barrier_ok,
        bound,
        denominator,
        weighted_sup: w_sup,
        weighted_min: w_min,
        margin,
        exhaustion,
        stabilized,
        limit_vs_input,
    })
}

fn synth_or_zero(set: &ModeSet, rule: &AngularRule, nr: usize) -> Result<Vec<f64>> {
    if set.is_empty() {
        Ok(vec![0.0; nr * rule.len()])
    } else {
        Ok(set.synthesize(rule, false)?.f)
    }
}

/// `u_ε = u_full − (u_full(ε)/h(ε)) h` per mode with `h = r^{β⁺} − r^{β⁻}`.
fn exhaustion(u: &ModeSet, f: &ModeSet, params: &ProblemParams, rule: &AngularRule) -> Result<(Vec<ExhaustionLevel>, f64)> {
    let f = f.normalized()?;
    let full: Vec<ModeProfile> = f
        .modes
        .iter()
        .map(|fk| Ok(solve_cordes_mode(fk.k, fk, params)?.solution))
        .collect::<Result<_>>()?;
    let grid = full[0].grid.clone();
    let radii = grid.radii();
    let nt = rule.len();
    let full_set = ModeSet { modes: full.clone() };
    let full_vals = full_set.synthesize(rule, false)?.f;
    let outer: Vec<usize> = (0..radii.len()).filter(|&i| radii[i] >= OUTER_RADIUS).collect();
    let sup_outer = |a: &[f64], b: &[f64]| {
        outer
            .iter()
            .flat_map(|&i| (i * nt..(i + 1) * nt).map(move |idx| (a[idx] - b[idx]).abs()))
            .fold(0.0f64, f64::max)
    };
    let u_vals = synth_or_zero(u, rule, radii.len())?;
    let limit_vs_input = sup_outer(&full_vals, &u_vals);

    let mut fields = Vec::new();
    for j in EXHAUSTION_LEVELS {
        let eps = 2f64.powi(-j);
        let modes = full
            .iter()
            .map(|m| {
                let roots = indicial_roots(m.k, params);
                let h = |r: f64| r.powf(roots.beta_plus) - r.powf(roots.beta_minus);
                let c = m.eval(eps)?.0 / h(eps);
                let a = radii.iter().zip(&m.a).map(|(&r, a)| if r >= eps { a - c * h(r) } else { 0.0 }).collect();
                ModeProfile::new(m.k, grid.clone(), a)
            })
            .collect::<Result<Vec<_>>>()?;
        fields.push((eps, ModeSet { modes }.synthesize(rule, false)?.f));
    }
    let mut levels = Vec::with_capacity(fields.len());
    for (l, (eps, vals)) in fields.iter().enumerate() {
        let inside = |i: usize| radii[i] >= *eps;
        let min_value = (0..radii.len())
            .filter(|&i| inside(i))
            .flat_map(|i| vals[i * nt..(i + 1) * nt].iter().copied())
            .fold(f64::INFINITY, f64::min);
        let (diff_to_next, monotone_to_next) = match fields.get(l + 1) {
            Some((_, next)) => {
                let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
                let mono = (0..radii.len())
                    .filter(|&i| inside(i))
                    .all(|i| (i * nt..(i + 1) * nt).all(|idx| next[idx] >= vals[idx] - 1e-12 * scale));
                (Some(sup_outer(vals, next)), Some(mono))
            }
            None => (None, None),
        };
        levels.push(ExhaustionLevel {
            eps: *eps,
            min_value,
            diff_to_next,
            monotone_to_next,
            gap_to_limit: sup_outer(vals, &full_vals),
        });
    }
    Ok((levels, limit_vs_input))
}

/// Boundedness of `U = uχ` near the origin through the mode split: modes
/// `k ≥ 1` are re-solved in `X` with weight `σ₁ < 0`, mode 0 through the
/// explicit radial formula.
#[derive(Debug, Clone, Serialize)]
pub struct BoundednessReport {
    pub sigma1: f64,
    /// `‖Ũ₁‖_X` with weight `σ₁`.
    pub x1_norm: f64,
    pub x1_divergent: bool,
    /// `sup |Ũ₀|`.
    pub u0_sup: f64,
    /// `max_k sup|Ũ_k − U_k| / max_k sup|U_k|`.
    pub reconstruction_error: f64,
    pub tail_fraction: f64,
    pub bounded: bool,
}

/// Smooth cutoff `χ = 1/(1 + E)`, `E = exp(1/(1−t) − 1/t)`, `t = 4(r − 1/4)`:
/// 1 on `r ≤ 1/4`, 0 on `r ≥ 1/2`. Returns `(χ, χ′, χ″)`.
pub(crate) fn cutoff(r: f64) -> (f64, f64, f64) {
    let t = 4.0 * (r - 0.25);
    if t <= 0.0 {
        return (1.0, 0.0, 0.0);
    }
    if t >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let expo = 1.0 / (1.0 - t) - 1.0 / t;
    if expo > 700.0 {
        return (0.0, 0.0, 0.0);
    }
    if expo < -700.0 {
        return (1.0, 0.0, 0.0);
    }
    let e = expo.exp();
    let l = 1.0 / (t * t) + 1.0 / ((1.0 - t) * (1.0 - t));
    let dl = -2.0 / (t * t * t) + 2.0 / ((1.0 - t) * (1.0 - t) * (1.0 - t));
    let e1 = e * l;
    let e2 = e * (l * l + dl);
    let s = 1.0 + e;
    let chi = 1.0 / s;
    let chi_t = -e1 / (s * s);
    let chi_tt = -e2 / (s * s) + 2.0 * e1 * e1 / (s * s * s);
    (chi, 4.0 * chi_t, 16.0 * chi_tt)
}

/// `U = uχ(|y|)` on the `y` tensor grid and `L_γ U = χ L_γ u + u(χ″(1+γ) + (N−1)χ′/|y|) + 2(1+γ)χ′∂_{|y|}u`
/// with `L_γ u = −|u|^p`, evaluated through `x(y)` without differencing.
fn cutoff_field(v: &ModeSet, map: &DomainMap, params: &ProblemParams, radii: &[f64], rule: &AngularRule) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = params.n;
    let z = n - 1;
    let a = 1.0 + params.gamma;
    let kv = v.kmax();
    let r_min = radii[0];
    let mut values = Vec::with_capacity(radii.len() * rule.len());
    let mut data = Vec::with_capacity(radii.len() * rule.len());
    for &rho in radii {
        let (chi, chi1, chi2) = cutoff(rho);
        for &th in &rule.theta {
            if chi == 0.0 && chi1 == 0.0 && chi2 == 0.0 {
                values.push(0.0);
                data.push(0.0);
                continue;
            }
            let x = domain_map_invert(map, &meridian_point(n, rho, th))?;
            let rx = x.iter().map(|c| c * c).sum::<f64>().sqrt().max(r_min);
            let tx = x[..z].iter().map(|c| c * c).sum::<f64>().sqrt().atan2(x[z]);
            let (sx, cx) = tx.sin_cos();
            let zon = zonal_with_derivatives(kv, n, cx);
            let (mut u, mut f_r, mut f_t) = (0.0, 0.0, 0.0);
            for m in &v.modes {
                let (c0, c1, _) = m.eval(rx)?;
                u += c0 * zon[m.k][0];
                f_r += c1 * zon[m.k][0];
                f_t += c0 * (-sx * zon[m.k][1]);
            }
            let grad = [f_r * sx + f_t / rx * cx, f_r * cx - f_t / rx * sx];
            let b = map
                .jacobian(&x)
                .try_inverse()
                .ok_or_else(|| LabError::Domain("singular map Jacobian".into()))?;
            let (sy, cy) = th.sin_cos();
            let e0 = b[(0, 0)] * sy + b[(0, z)] * cy;
            let ez = b[(z, 0)] * sy + b[(z, z)] * cy;
            let u_rho = e0 * grad[0] + ez * grad[1];
            values.push(chi * u);
            data.push(-chi * u.abs().powf(params.p) + u * (a * chi2 + (params.dim() - 1.0) * chi1 / rho) + 2.0 * a * chi1 * u_rho);
        }
    }
    Ok((values, data))
}

pub fn boundedness_bootstrap(v: &ModeSet, map: &DomainMap, params: &ProblemParams, kmax: usize) -> Result<BoundednessReport> {
    let grid = v.grid()?.ok_or_else(|| LabError::Input("empty solution".into()))?;
    let lower = sigma_window(TheoremCase::Case3, params.n, params.gamma)?
        .lower
        .max(-(2.0 - params.sigma * params.p));
    if !(lower < 0.0) {
        return Err(LabError::window(format!(
            "no sigma1 < 0 with sigma1 + 2 - sigma p > 0 (sigma p = {})",
            params.sigma * params.p
        )));
    }
    let sigma1 = 0.5 * lower;
    let p1 = params.with_sigma(sigma1);

    let rule = AngularRule::new(params.n, kmax);
    let (values, data) = cutoff_field(v, map, params, grid.radii(), &rule)?;
    let proj = project_field(&values, &grid, &rule, kmax)?;
    let gproj = project_field(&data, &grid, &rule, kmax)?;
    let mut rebuilt = Vec::new();
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    let mut u0_sup = 0.0;
    let mut divergent = false;
    for (uk, gk) in proj.modes.modes.iter().zip(&gproj.modes.modes) {
        if gk.a.iter().all(|v| *v == 0.0) && uk.a.iter().all(|v| *v == 0.0) {
            continue;
        }
        let solved = if uk.k == 0 {
            k0_green_apply(&gk.a, &grid, params).map(|s| s.u)
        } else {
            solve_cordes_mode(uk.k, gk, &p1).map(|r| r.solution)
        };
        let sol = match solved {
            Ok(s) => s,
            Err(e) if e.is_hypothesis_violation() || matches!(e, LabError::Integrability { .. }) => {
                divergent = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        scale = scale.max(uk.sup_abs());
        err = err.max(sol.a.iter().zip(&uk.a).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())));
        if uk.k == 0 {
            u0_sup = sol.sup_abs() * rule.psi[0][0];
        } else {
            rebuilt.push(sol);
        }
    }
    let x1_norm = if rebuilt.is_empty() {
        0.0
    } else {
        x_norm(&ModeSet { modes: rebuilt }, &p1)?.norm_value
    };
    let x1_divergent = divergent || !x1_norm.is_finite();
    let reconstruction_error = if scale > 0.0 { err / scale } else { err };
    Ok(BoundednessReport {
        sigma1,
        x1_norm,
        x1_divergent,
        u0_sup,
        reconstruction_error,
        tail_fraction: proj.tail_fraction.max(gproj.tail_fraction),
        bounded: !x1_divergent && u0_sup.is_finite(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn denominator_sign() {
        let ok = ProblemParams::new(4, 1.0, 3.0, 0.4, 5.0).unwrap();
        let bad = ok.with_sigma(0.6);
        let empty = ModeSet::default();
        let r = maximum_principle_barrier(&empty, &empty, &ok, None).unwrap();
        assert!(r.barrier_ok);
        assert!((r.denominator - 0.08).abs() < 1e-12);
        assert_eq!(r.margin, 0.0);
        assert!(matches!(
            maximum_principle_barrier(&empty, &empty, &bad, None),
            Err(LabError::Window { .. })
        ));
    }

    #[test]
    fn cutoff_profile() {
        assert_eq!(cutoff(0.1).0, 1.0);
        assert_eq!(cutoff(0.25).0, 1.0);
        assert_eq!(cutoff(0.5).0, 0.0);
        let (c, d1, d2) = cutoff(0.3);
        assert!(c > 0.0 && c < 1.0);
        let h = 1e-5;
        assert!(((cutoff(0.3 + h).0 - cutoff(0.3 - h).0) / (2.0 * h) - d1).abs() < 1e-6);
        assert!(((cutoff(0.3 + h).1 - cutoff(0.3 - h).1) / (2.0 * h) - d2).abs() < 1e-4);
    }
}
