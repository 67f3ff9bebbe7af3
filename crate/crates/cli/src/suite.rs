//! The invariant suite behind `verify` and the acceptance runner. Each check
//! recomputes its quantities from scratch and compares against an independent
//! oracle or a structural identity.

use std::sync::Arc;
use std::time::{Duration, Instant};

use cordes_core::linear::apply_mode_operator;
use cordes_core::norms::{x_norm_with, y_norm_with};
use cordes_core::perturb::{
    dilation_oracle, fixed_point_domain_with, linearization_check, DomainOptions, FixedPointTrace,
};
use cordes_core::zonal::AngularRule;
use cordes_core::{
    cordes_ratio, critical_exponent, effective_dimension, evaluate_w, fixed_point_zero_order, indicial_roots,
    k0_green_apply, kernel_check, maximum_principle_barrier, mode_eigenvalue, operator_norm_probe, perturbation_terms,
    radial_solution, solve_cordes_mode, x_norm, y_norm, DomainMap, ForcingKind, GridSpec, LabError, LogGrid,
    ModeProfile, ModeSet, NormOptions, ProblemParams, PsiKind, TheoremCase, ZeroOrderConfig,
};
use serde::Serialize;

use crate::oracle;

pub type CheckResult = Result<Check, LabError>;

/// Outcome of one criterion, without timing.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail }
    }

    fn all(parts: Vec<(bool, String)>) -> Self {
        let passed = parts.iter().all(|p| p.0);
        let detail = parts.into_iter().map(|p| p.1).collect::<Vec<_>>().join("; ");
        Self { passed, detail }
    }
}

pub struct Criterion {
    pub id: u8,
    pub name: &'static str,
    pub budget: Option<Duration>,
    pub run: fn() -> CheckResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub elapsed: Duration,
    #[serde(skip)]
    pub within_budget: bool,
}

impl Outcome {
    /// Correct and on time.
    pub fn accepted(&self) -> bool {
        self.passed && self.within_budget
    }
}

pub fn run(c: &Criterion) -> Outcome {
    let start = Instant::now();
    let result = (c.run)();
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok(check) => (check.passed, check.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    Outcome {
        id: c.id,
        name: c.name,
        passed,
        detail,
        elapsed,
        within_budget: c.budget.is_none_or(|b| elapsed <= b),
    }
}

/// Criteria 1 to 9; the determinism criterion lives with the front end.
pub fn criteria() -> Vec<Criterion> {
    let secs = |s: u64| Some(Duration::from_secs(s));
    vec![
        Criterion { id: 1, name: "exponent algebra", budget: secs(1), run: exponent_algebra },
        Criterion { id: 2, name: "radial oracle", budget: secs(10), run: radial_oracle },
        Criterion { id: 3, name: "linear round trips", budget: secs(30), run: linear_round_trips },
        Criterion { id: 4, name: "kernel triviality", budget: secs(10), run: kernel_triviality },
        Criterion { id: 5, name: "norm machinery", budget: secs(30), run: norm_machinery },
        Criterion { id: 6, name: "operator-norm probe", budget: secs(300), run: operator_norm_boundedness },
        Criterion { id: 7, name: "zero-order fixed point", budget: secs(300), run: zero_order_fixed_point },
        Criterion { id: 8, name: "domain dilation oracle", budget: secs(300), run: domain_dilation },
        Criterion { id: 9, name: "maximum-principle barrier", budget: secs(120), run: barrier },
    ]
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64, tol: f64) -> f64 {
    let flo = f(lo) > 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == flo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn exponent_algebra() -> CheckResult {
    let closed = critical_exponent(4, 1.0) == 9.0 && effective_dimension(3, 1.0) == 2.0;
    let mut eig = true;
    for n in 3..=10usize {
        for k in 0..=8usize {
            eig &= mode_eigenvalue(k, n) == (k * (k + n - 2)) as f64;
        }
    }
    let mut worst_root = 0.0f64;
    for n in 3..=10usize {
        for gamma in [0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0] {
            let params = ProblemParams::new(n, gamma, 2.0, 0.0, n as f64 + 1.0)?;
            for k in 0..=8 {
                let r = indicial_roots(k, &params);
                let scale = 1.0 + mode_eigenvalue(k, n) + (1.0 + gamma) * r.beta_minus.abs().max(r.beta_plus.abs()).powi(2);
                for b in [r.beta_plus, r.beta_minus] {
                    worst_root = worst_root.max(r.quadratic(b, n, gamma).abs() / scale);
                }
            }
        }
    }
    let mut worst_cross = 0.0f64;
    for n in 3..=10usize {
        let nf = n as f64;
        let root = bisect(1e-6, 100.0, |g| cordes_ratio(n, g) - (nf - 1.0), 1e-12);
        worst_cross = worst_cross.max((root - nf / (nf - 2.0)).abs());
    }
    Ok(Check::all(vec![
        (closed, format!("p(4,1) = {}, N_eff(3,1) = {}", critical_exponent(4, 1.0), effective_dimension(3, 1.0))),
        (eig, "k(k+N-2) for k <= 8".into()),
        (worst_root <= 1e-12, format!("indicial residual {worst_root:.2e}")),
        (worst_cross <= 1e-10, format!("Cordes crossing error {worst_cross:.2e}")),
    ]))
}

/// Relative sup mismatch between the constructed `γ = 0` profile and the RK4
/// reference.
pub fn classical_mismatch(n: usize, p: f64) -> Result<f64, LabError> {
    let params = ProblemParams::new(n, 0.0, p, 0.0, n as f64 + 1.0)?;
    let prof = radial_solution(&params)?;
    let table = oracle::unit_ball_profile(n, p).ok_or_else(|| LabError::Integration("reference profile has no zero".into()))?;
    let (mut diff, mut scale) = (0.0f64, 0.0f64);
    for &(r, w) in table.iter().skip(1).step_by(13) {
        diff = diff.max((evaluate_w(&prof, r)?.0 - w).abs());
        scale = scale.max(w.abs());
    }
    Ok(diff / scale)
}

pub const RADIAL_SETS: [(usize, f64, f64); 7] =
    [(3, 0.5, 3.0), (4, 1.0, 3.0), (4, 1.0, 4.0), (4, 3.0, 3.0), (3, 2.0, 5.0), (8, 1.0, 2.0), (5, 0.0, 2.0)];

pub fn radial_oracle() -> CheckResult {
    let mut parts = Vec::new();
    for (n, p) in [(3, 3.0), (4, 2.0)] {
        let e = classical_mismatch(n, p)?;
        parts.push((e <= 1e-6, format!("gamma=0 (N={n}, p={p}) mismatch {e:.2e}")));
    }
    let mut worst = 0.0f64;
    let mut monotone = true;
    for (n, gamma, p) in RADIAL_SETS {
        let params = ProblemParams::new(n, gamma, p, 0.0, n as f64 + 1.0)?;
        let prof = radial_solution(&params)?;
        worst = worst.max(prof.residual_sup()?);
        monotone &= prof.is_monotone();
    }
    parts.push((worst <= 1e-8, format!("worst ODE residual {worst:.2e}")));
    parts.push((monotone, format!("w' < 0 on {} sets", RADIAL_SETS.len())));
    Ok(Check::all(parts))
}

pub fn case_sets() -> [(TheoremCase, ProblemParams); 3] {
    [
        (TheoremCase::Case1, ProblemParams { n: 4, gamma: 1.0, p: 3.0, sigma: 0.25, t: 5.0 }),
        (TheoremCase::Case2, ProblemParams { n: 4, gamma: 3.0, p: 3.0, sigma: -0.125, t: 5.0 }),
        (TheoremCase::Case3, ProblemParams { n: 4, gamma: 1.0, p: 3.0, sigma: -0.3, t: 5.0 }),
    ]
}

/// `(apply-then-solve, solve-then-apply)` relative sup errors for mode `k`.
/// The first uses `a = r^{k+2}(1 − r)` with `M_k a` in closed form.
pub fn round_trip(k: usize, params: &ProblemParams, grid: &Arc<LogGrid>) -> Result<(f64, f64), LabError> {
    let e = k as f64 + 2.0;
    let a = ModeProfile::from_fn(k, grid.clone(), |r| {
        (
            r.powf(e) - r.powf(e + 1.0),
            e * r.powf(e - 1.0) - (e + 1.0) * r.powf(e),
            e * (e - 1.0) * r.powf(e - 2.0) - (e + 1.0) * e * r.powf(e - 1.0),
        )
    });
    let lam = mode_eigenvalue(k, params.n);
    let coef = |q: f64| (1.0 + params.gamma) * q * (q - 1.0) + (params.dim() - 1.0) * q - lam;
    let b = ModeProfile::from_values(k, grid.clone(), |r| coef(e) * r.powf(e - 2.0) - coef(e + 1.0) * r.powf(e - 1.0));
    let back = solve_cordes_mode(k, &b, params)?.solution;
    let ats = sup_diff(&back.a, &a.a) / sup(&a.a);

    let data = ModeProfile::from_values(k, grid.clone(), |r| r.powi(k as i32) * (1.0 - 2.0 * r + 3.0 * r * r));
    let sol = solve_cordes_mode(k, &data, params)?.solution;
    let sta = sup_diff(&apply_mode_operator(&sol, params), &data.a) / sup(&data.a);
    Ok((ats, sta))
}

pub fn linear_round_trips() -> CheckResult {
    let grid = Arc::new(GridSpec::default().build());
    let mut worst = (0.0f64, 0.0f64);
    let mut count = 0;
    for (case, params) in case_sets() {
        for k in [0usize, 1, 2, 4].into_iter().filter(|k| *k >= case.first_mode()) {
            let (a, b) = round_trip(k, &params, &grid)?;
            worst = (worst.0.max(a), worst.1.max(b));
            count += 1;
        }
    }
    let mut k0 = 0.0f64;
    for (_, params) in case_sets() {
        let sol = k0_green_apply(&vec![1.0; grid.len()], &grid, &params)?;
        let c = 2.0 * (params.dim() + params.gamma);
        for (r, u) in grid.radii().iter().zip(&sol.u.a) {
            k0 = k0.max((u - (r * r - 1.0) / c).abs());
        }
    }
    Ok(Check::all(vec![
        (worst.0 <= 1e-7, format!("apply-then-solve {:.2e} over {count} (case, k)", worst.0)),
        (worst.1 <= 1e-7, format!("solve-then-apply {:.2e}", worst.1)),
        (k0 <= 1e-10, format!("K0 quadratic error {k0:.2e}")),
    ]))
}

pub fn kernel_triviality() -> CheckResult {
    let mut parts = Vec::new();
    for (n, gamma, p, sigma) in [(4, 1.0, 3.0, 0.25), (3, 2.0, 5.0, -0.15)] {
        let params = ProblemParams::new(n, gamma, p, sigma, n as f64 + 1.0)?;
        let w = radial_solution(&params)?;
        let mut min_bv = f64::INFINITY;
        let mut trivial = true;
        for k in 0..=8 {
            let kc = kernel_check(k, &w, &params)?;
            trivial &= kc.trivial;
            min_bv = min_bv.min(kc.boundary_value);
        }
        parts.push((trivial, format!("(N={n}, gamma={gamma}, p={p}) min |a(1)|/sup|a| = {min_bv:.3e}")));
        let wr = w.w_prime_at_one();
        parts.push((wr.abs() > 1e-6, format!("w_r(1) = {wr:.6}")));
    }
    Ok(Check::all(parts))
}

/// `Σ_k c_k r^{k+1}(1 − r)` on modes `0..3`.
pub fn smooth_field(grid: &Arc<LogGrid>, c: [f64; 3]) -> ModeSet {
    ModeSet {
        modes: (0..3)
            .map(|k| {
                let e = k as f64 + 1.0;
                let ck = c[k];
                ModeProfile::from_fn(k, grid.clone(), move |r| {
                    (
                        ck * (r.powf(e) - r.powf(e + 1.0)),
                        ck * (e * r.powf(e - 1.0) - (e + 1.0) * r.powf(e)),
                        ck * (e * (e - 1.0) * r.powf(e - 2.0) - (e + 1.0) * e * r.powf(e - 1.0)),
                    )
                })
            })
            .collect(),
    }
}

/// Deterministic coefficients in `[−3, 3)`.
fn coefficients(seed: u64) -> [f64; 3] {
    let mut x = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    std::array::from_fn(|_| {
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        6.0 * (x >> 11) as f64 / (1u64 << 53) as f64 - 3.0
    })
}

pub fn norm_machinery() -> CheckResult {
    let params = case_sets()[0].1;
    let grid = Arc::new(GridSpec::default().build());
    let (mut hom, mut tri) = (0.0f64, f64::NEG_INFINITY);
    for trial in 0..8 {
        let f = smooth_field(&grid, coefficients(2 * trial + 1));
        let g = smooth_field(&grid, coefficients(2 * trial + 2));
        let lam = -1.75 + 0.5 * trial as f64;
        for norm in [x_norm, y_norm] {
            let nf = norm(&f, &params)?.norm_value;
            let ng = norm(&g, &params)?.norm_value;
            let nl = norm(&f.scaled(lam), &params)?.norm_value;
            hom = hom.max((nl - lam.abs() * nf).abs() / (1.0 + lam.abs() * nf));
            let ns = norm(&f.plus(&g), &params)?.norm_value;
            tri = tri.max((ns - nf - ng) / (1.0 + nf + ng));
        }
    }
    let mut flat = 0.0f64;
    for sigma in [0.1, 0.25, 0.4] {
        let p = params.with_sigma(sigma);
        let f = ModeSet::single(ModeProfile::from_values(0, grid.clone(), |r| r.powf(-(2.0 + sigma))));
        let vals: Vec<f64> = y_norm(&f, &p)?.per_annulus.iter().map(|a| a.value).collect();
        let max = vals.iter().copied().fold(0.0, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        flat = flat.max(max / min);
    }
    let fine_spec = GridSpec { per_octave: 128, ..GridSpec::default() };
    let fine = Arc::new(fine_spec.build());
    let smooth = |g: &Arc<LogGrid>| smooth_field(g, [1.0, -0.7, 0.4]);
    let opts = NormOptions::default();
    let mut refine = 0.0f64;
    for (a, b) in [
        (x_norm_with(&smooth(&grid), &params, &opts)?, x_norm_with(&smooth(&fine), &params, &opts.refined())?),
        (y_norm_with(&smooth(&grid), &params, &opts)?, y_norm_with(&smooth(&fine), &params, &opts.refined())?),
    ] {
        refine = refine.max((a.norm_value - b.norm_value).abs() / b.norm_value);
    }
    Ok(Check::all(vec![
        (hom <= 1e-10, format!("homogeneity {hom:.2e}")),
        (tri <= 1e-10, format!("triangle excess {tri:.2e}")),
        (flat <= 1.02, format!("extremal annulus max/min {flat:.6}")),
        (refine <= 0.02, format!("refinement change {:.3}%", 100.0 * refine)),
    ]))
}

pub fn operator_norm_boundedness() -> CheckResult {
    let params = case_sets()[0].1;
    let probe = operator_norm_probe(&params, &[8, 16], 64, 2024)?;
    let d8 = probe.estimate(8).unwrap_or(f64::NAN);
    let d16 = probe.estimate(16).unwrap_or(f64::NAN);
    let rel = (d16 - d8).abs() / d8;
    Ok(Check::new(rel <= 0.25, format!("D_8 = {d8:.6}, D_16 = {d16:.6}, relative change {rel:.3}")))
}

/// Zero-order reference sets: `γ > N−2` with `g ≡ 1`, and the supercritical
/// `0 < γ < N−2` set with a radial bump.
pub fn zero_order_sets() -> [(ProblemParams, ForcingKind); 2] {
    [
        (ProblemParams { n: 4, gamma: 3.0, p: 3.0, sigma: -0.125, t: 5.0 }, ForcingKind::One),
        (ProblemParams { n: 4, gamma: 1.0, p: 4.0, sigma: -0.3, t: 5.0 }, ForcingKind::RadialBump),
    ]
}

fn contraction_ok(trace: &FixedPointTrace) -> (bool, f64) {
    match trace.contraction_bound {
        Some(k) => (trace.converged && k < 0.9, k),
        None => (trace.converged, 0.0),
    }
}

pub fn zero_order_fixed_point() -> CheckResult {
    let mut parts = Vec::new();
    for (params, forcing) in zero_order_sets() {
        let w = radial_solution(&params)?;
        let g = forcing.modes(params.n, &w.grid, 8)?;
        let cfg = ZeroOrderConfig::new(params, 0.01, g);
        let sol = fixed_point_zero_order(&cfg, &w)?;
        let (contracts, k0) = contraction_ok(&sol.trace);
        let lin = linearization_check(&cfg, &w)?;
        let tag = format!("(N={}, gamma={}, p={})", params.n, params.gamma, params.p);
        parts.push((contracts, format!("{tag} K0 = {k0:.4} after {} iterations", sol.trace.iterations)));
        let res = sol.trace.final_residual;
        parts.push((res <= 1e-6, format!("{tag} residual {res:.2e}")));
        parts.push((
            sol.positivity.certified && sol.positivity.implication_holds,
            format!("{tag} min u = {:.4}", sol.positivity.min_u),
        ));
        parts.push((lin.within, format!("{tag} linearization ratio {:.3}", lin.ratio)));
    }
    Ok(Check::all(parts))
}

pub fn domain_dilation() -> CheckResult {
    let params = ProblemParams::new(4, 1.0, 4.0, 0.1, 5.0)?;
    let w = radial_solution(&params)?;
    let delta = 0.01;
    let map = DomainMap::new(PsiKind::Dilation, delta, 4)?;
    let sol = fixed_point_domain_with(&map, &params, &w, &DomainOptions::default())?;
    let err = sol.relative_error(dilation_oracle(&w, params.p, delta))?;

    let rule = AngularRule::new(4, 8);
    let mut vanish = true;
    for psi in [PsiKind::Dilation, PsiKind::AxialQuadratic, PsiKind::RadialBump] {
        let f = perturbation_terms(&sol.v, &DomainMap::new(psi, 0.0, 4)?, &params, &rule)?;
        for field in [&f.e_delta, &f.e_ij, &f.coefficient_term, &f.coefficient_delta, &f.total] {
            vanish &= field.iter().all(|x| *x == 0.0);
        }
    }
    let f = perturbation_terms(&sol.v, &map, &params, &rule)?;
    let coef = sup(&f.coefficient_delta);
    Ok(Check::all(vec![
        (sol.trace.converged, format!("{} iterations", sol.trace.iterations)),
        (err <= 1e-6, format!("relative error vs exact {err:.2e}")),
        (vanish, "perturbation terms vanish at delta = 0".into()),
        (coef <= 1e-14, format!("dilation coefficient delta {coef:.1e}")),
    ]))
}

pub fn barrier() -> CheckResult {
    let params = ProblemParams::new(8, 1.0, 2.0, 0.5, 9.0)?;
    let grid = Arc::new(GridSpec::default().build());
    let psi0 = AngularRule::new(params.n, 0).psi[0][0];
    let sp = params.sigma * params.p;
    let f = ModeProfile::from_values(0, grid.clone(), |r| -r.powf(-sp) / psi0);
    let u = solve_cordes_mode(0, &f, &params)?.solution;
    let rep = maximum_principle_barrier(&ModeSet::single(u), &ModeSet::single(f), &params, None)?;
    let n = rep.exhaustion.len();
    let last = if n >= 2 { rep.exhaustion[n - 2].diff_to_next.unwrap_or(f64::NAN) } else { f64::NAN };
    let monotone = rep.exhaustion.iter().filter_map(|l| l.monotone_to_next).all(|m| m);
    Ok(Check::all(vec![
        (rep.barrier_ok && rep.margin > 0.0, format!("bound {:.6}, margin {:.6}", rep.bound, rep.margin)),
        (monotone && rep.stabilized == Some(true), format!("{n} exhaustion levels monotone")),
        (last <= 1e-6, format!("eps = 2^-9 vs 2^-10 difference {last:.2e}")),
    ]))
}
