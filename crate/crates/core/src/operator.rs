//! Closed-form quantities attached to the operator `L_γ = Δ + γ ∂_rr` on the
//! unit ball of `R^N`: critical exponent, effective radial dimension, the
//! Cordes ratio, the spherical-harmonic spectrum, indicial roots of the modal
//! Euler equations and the admissible weight windows for `σ`.
//!
//! Everything here is a pure function of its arguments.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// The tuple `(N, γ, p, σ, t)`.
///
/// `γ = 0` (classical Lane-Emden) is admitted here; the theorem-case checks
/// reject it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Space dimension.
    pub n: usize,
    pub gamma: f64,
    /// Nonlinearity exponent.
    pub p: f64,
    /// Weight exponent of the dyadic norms.
    pub sigma: f64,
    /// Integrability exponent of the dyadic norms.
    pub t: f64,
}

impl ProblemParams {
    pub fn new(n: usize, gamma: f64, p: f64, sigma: f64, t: f64) -> Result<Self> {
        let params = Self {
            n,
            gamma,
            p,
            sigma,
            t,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(LabError::window(format!("N >= 3 (got N = {})", self.n)));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(LabError::window(format!(
                "gamma >= 0 (got gamma = {})",
                self.gamma
            )));
        }
        if !(self.p > 1.0) || !self.p.is_finite() {
            return Err(LabError::window(format!("p > 1 (got p = {})", self.p)));
        }
        if !(self.t > self.n as f64) || !self.t.is_finite() {
            return Err(LabError::window(format!(
                "t > N (got t = {}, N = {})",
                self.t, self.n
            )));
        }
        if !self.sigma.is_finite() {
            return Err(LabError::window("sigma finite"));
        }
        Ok(())
    }

    pub fn dim(&self) -> f64 {
        self.n as f64
    }

    /// `N − 2 − γ`, the quantity that separates the two regimes.
    pub fn gap(&self) -> f64 {
        self.dim() - 2.0 - self.gamma
    }

    pub fn critical_exponent(&self) -> f64 {
        critical_exponent(self.n, self.gamma)
    }

    pub fn effective_dimension(&self) -> f64 {
        effective_dimension(self.n, self.gamma)
    }

    /// `true` when `p` lies strictly below the critical exponent.
    pub fn is_subcritical(&self) -> bool {
        self.p < self.critical_exponent()
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }
}

/// `p_{N,γ} = (N+2+3γ)/(N−2−γ)` for `γ < N−2`, `+∞` otherwise.
pub fn critical_exponent(n: usize, gamma: f64) -> f64 {
    let n = n as f64;
    if gamma < n - 2.0 {
        (n + 2.0 + 3.0 * gamma) / (n - 2.0 - gamma)
    } else {
        f64::INFINITY
    }
}

/// `N_γ = (N+γ)/(1+γ)`, the (possibly fractional) dimension in which the radial
/// equation becomes the classical Lane-Emden ODE.
pub fn effective_dimension(n: usize, gamma: f64) -> f64 {
    (n as f64 + gamma) / (1.0 + gamma)
}

/// `(N+γ)² / (N+2γ+γ²)`; the Cordes condition asks for this to exceed `N−1+ε`.
pub fn cordes_ratio(n: usize, gamma: f64) -> f64 {
    let n = n as f64;
    (n + gamma).powi(2) / (n + 2.0 * gamma + gamma * gamma)
}

/// Eigenvalue `k(k+N−2)` of `−Δ_θ` on `S^{N−1}`.
pub fn mode_eigenvalue(k: usize, n: usize) -> f64 {
    let k = k as f64;
    k * (k + n as f64 - 2.0)
}

/// Roots of `(1+γ)β² + (N−2−γ)β − λ_k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicialPair {
    pub k: usize,
    pub beta_plus: f64,
    pub beta_minus: f64,
}

impl IndicialPair {
    /// Value of the indicial quadratic at `beta`.
    pub fn quadratic(&self, beta: f64, n: usize, gamma: f64) -> f64 {
        (1.0 + gamma) * beta * beta + (n as f64 - 2.0 - gamma) * beta
            - mode_eigenvalue(self.k, n)
    }
}

pub fn indicial_roots(k: usize, params: &ProblemParams) -> IndicialPair {
    indicial_roots_raw(k, params.n, params.gamma)
}

pub(crate) fn indicial_roots_raw(k: usize, n: usize, gamma: f64) -> IndicialPair {
    let b = n as f64 - 2.0 - gamma;
    let a = 1.0 + gamma;
    let lambda = mode_eigenvalue(k, n);
    let disc = (b * b + 4.0 * a * lambda).sqrt();
    // Both roots from the radical formula; for k = 0 one of them is exactly 0.
    let (beta_plus, beta_minus) = if k == 0 {
        let other = -b / a;
        (other.max(0.0), other.min(0.0))
    } else if b >= 0.0 {
        let minus = (-b - disc) / (2.0 * a);
        (-lambda / (a * minus), minus)
    } else {
        let plus = (-b + disc) / (2.0 * a);
        (plus, -lambda / (a * plus))
    };
    IndicialPair {
        k,
        beta_plus,
        beta_minus,
    }
}

/// The three regimes of the weighted isomorphism theorem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheoremCase {
    /// `0 < γ < N−2`, `0 < σ < (N−2−γ)/(1+γ)`.
    Case1,
    /// `γ > N−2`, `(N−2−γ)/(1+γ) < σ < 0`.
    Case2,
    /// `0 < γ < N−2`, negative `σ` above the first-mode bound; modes `k ≥ 1` only.
    Case3,
}

impl TheoremCase {
    /// Picks the case from `(γ, sign σ)` and checks that `σ` lies in its window.
    pub fn classify(params: &ProblemParams) -> Result<Self> {
        let case = if params.gap() > 0.0 {
            if params.sigma >= 0.0 {
                TheoremCase::Case1
            } else {
                TheoremCase::Case3
            }
        } else {
            TheoremCase::Case2
        };
        let window = sigma_window(case, params.n, params.gamma)?;
        if !window.contains(params.sigma) {
            return Err(LabError::window(format!(
                "{case:?} requires sigma in ({:.6}, {:.6}), got sigma = {}",
                window.lower, window.upper, params.sigma
            )));
        }
        Ok(case)
    }

    /// Smallest mode index the case covers.
    pub fn first_mode(self) -> usize {
        match self {
            TheoremCase::Case3 => 1,
            _ => 0,
        }
    }
}

/// Open interval `(lower, upper)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaWindow {
    pub lower: f64,
    pub upper: f64,
}

impl SigmaWindow {
    pub fn contains(&self, sigma: f64) -> bool {
        sigma > self.lower && sigma < self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }
}

pub fn sigma_window(case: TheoremCase, n: usize, gamma: f64) -> Result<SigmaWindow> {
    let nf = n as f64;
    if n < 3 {
        return Err(LabError::window(format!("N >= 3 (got N = {n})")));
    }
    if !(gamma > 0.0) {
        return Err(LabError::window(format!("gamma > 0 (got gamma = {gamma})")));
    }
    let gap = nf - 2.0 - gamma;
    let a = 1.0 + gamma;
    match case {
        TheoremCase::Case1 | TheoremCase::Case3 if !(gap > 0.0) => Err(LabError::window(format!(
            "{case:?} requires 0 < gamma < N-2 (got gamma = {gamma}, N = {n})"
        ))),
        TheoremCase::Case2 if !(gap < 0.0) => Err(LabError::window(format!(
            "Case2 requires gamma > N-2 (got gamma = {gamma}, N = {n})"
        ))),
        TheoremCase::Case1 => Ok(SigmaWindow {
            lower: 0.0,
            upper: gap / a,
        }),
        TheoremCase::Case2 => Ok(SigmaWindow {
            lower: gap / a,
            upper: 0.0,
        }),
        TheoremCase::Case3 => Ok(SigmaWindow {
            lower: gap / (2.0 * a) - (gap * gap + 4.0 * a * (nf - 2.0)).sqrt() / (2.0 * a),
            upper: 0.0,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_exponent_examples() {
        assert_eq!(critical_exponent(4, 1.0), 9.0);
        assert_eq!(critical_exponent(3, 0.0), 5.0);
        assert!(critical_exponent(3, 1.0).is_infinite());
        // Extended-real comparison: every finite p is below +inf.
        assert!(1e300 < critical_exponent(3, 2.0));
    }

    #[test]
    fn effective_dimension_examples() {
        assert_eq!(effective_dimension(3, 1.0), 2.0);
        for n in 3..9 {
            assert_eq!(effective_dimension(n, 0.0), n as f64);
        }
        assert!((effective_dimension(3, 2.0) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(effective_dimension(4, 1.0), 2.5);
    }

    #[test]
    fn effective_dimension_at_most_two_iff_gamma_large() {
        for n in 3..8 {
            for i in 0..80 {
                let gamma = 0.1 * i as f64;
                let nf = n as f64;
                if (gamma - (nf - 2.0)).abs() < 1e-12 {
                    continue;
                }
                assert_eq!(effective_dimension(n, gamma) <= 2.0, gamma >= nf - 2.0);
            }
        }
    }

    #[test]
    fn cordes_ratio_examples() {
        assert!((cordes_ratio(3, 1.0) - 16.0 / 6.0).abs() < 1e-15);
        assert!((cordes_ratio(3, 3.0) - 2.0).abs() < 1e-15);
        assert_eq!(cordes_ratio(5, 0.0), 5.0);
        assert!((cordes_ratio(4, 1.0) - 25.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues() {
        for n in 3..7 {
            assert_eq!(mode_eigenvalue(0, n), 0.0);
            assert_eq!(mode_eigenvalue(1, n), n as f64 - 1.0);
            assert_eq!(mode_eigenvalue(2, n), 2.0 * n as f64);
        }
    }

    #[test]
    fn indicial_root_examples() {
        let p = ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap();
        let r = indicial_roots(0, &p);
        assert_eq!((r.beta_plus, r.beta_minus), (0.0, -0.5));

        let p = ProblemParams::new(3, 1.0, 3.0, 0.1, 5.0).unwrap();
        let r = indicial_roots(1, &p);
        assert!((r.beta_plus - 1.0).abs() < 1e-15);
        assert!((r.beta_minus + 1.0).abs() < 1e-15);
    }

    #[test]
    fn mode_zero_roots_above_threshold() {
        // gamma > N-2: the nonzero root of the k = 0 quadratic is positive.
        let p = ProblemParams::new(3, 2.0, 3.0, -0.1, 5.0).unwrap();
        let r = indicial_roots(0, &p);
        assert_eq!(r.beta_minus, 0.0);
        assert!((r.beta_plus - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_windows() {
        let w = sigma_window(TheoremCase::Case1, 4, 1.0).unwrap();
        assert_eq!((w.lower, w.upper), (0.0, 0.5));
        let w = sigma_window(TheoremCase::Case2, 3, 2.0).unwrap();
        assert!((w.lower + 1.0 / 3.0).abs() < 1e-15 && w.upper == 0.0);
        let w = sigma_window(TheoremCase::Case3, 4, 1.0).unwrap();
        assert!((w.lower - (1.0 - 17f64.sqrt()) / 4.0).abs() < 1e-15);
        assert!((w.lower + 0.7807764064).abs() < 1e-9);
    }

    #[test]
    fn sigma_window_rejects_mismatched_case() {
        let err = sigma_window(TheoremCase::Case1, 3, 1.0).unwrap_err();
        assert!(matches!(err, LabError::Window { .. }));
        assert!(err.to_string().contains("gamma < N-2"));
        assert!(sigma_window(TheoremCase::Case2, 4, 1.0).is_err());
        // The boundary gamma = N-2 belongs to no case.
        for case in [TheoremCase::Case1, TheoremCase::Case2, TheoremCase::Case3] {
            assert!(sigma_window(case, 4, 2.0).is_err());
        }
    }

    #[test]
    fn classify_cases() {
        let p = ProblemParams::new(4, 1.0, 3.0, 0.25, 5.0).unwrap();
        assert_eq!(TheoremCase::classify(&p).unwrap(), TheoremCase::Case1);
        let p = ProblemParams::new(4, 1.0, 3.0, -0.25, 5.0).unwrap();
        assert_eq!(TheoremCase::classify(&p).unwrap(), TheoremCase::Case3);
        let p = ProblemParams::new(3, 2.0, 3.0, -0.2, 5.0).unwrap();
        assert_eq!(TheoremCase::classify(&p).unwrap(), TheoremCase::Case2);
        let p = ProblemParams::new(4, 1.0, 3.0, 0.6, 5.0).unwrap();
        assert!(TheoremCase::classify(&p).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(ProblemParams::new(2, 1.0, 3.0, 0.1, 5.0).is_err());
        assert!(ProblemParams::new(4, 1.0, 3.0, 0.1, 4.0).is_err());
        assert!(ProblemParams::new(4, 1.0, 1.0, 0.1, 5.0).is_err());
        assert!(ProblemParams::new(4, -1.0, 3.0, 0.1, 5.0).is_err());
    }
}
