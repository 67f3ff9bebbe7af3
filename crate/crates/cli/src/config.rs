use std::path::Path;

use cordes_core::perturb::{DomainOptions, ForcingKind, PsiKind};
use cordes_core::{sigma_window, ProblemParams, TheoremCase};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One run configuration. Every field is optional; command-line flags
/// override values read from a file, and missing values fall back to the
/// per-command defaults below.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(rename = "N", alias = "n", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Mode indices for `linear` (`kmax` bounds the others).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forcing: Option<ForcingKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<PsiKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angular_nodes: Option<usize>,
    /// Seeded trials of the operator-norm probe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    /// Mode truncation levels of the probe.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<usize>>,
    /// `linearized` selects `L_γ + p w^{p−1}` in `linear`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linearized: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certify: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linearization: Option<bool>,
    /// Test field of `norms`: `power_law` or `smooth`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<NormField>,
    /// Baseline CSV (`r,w`) for `radial`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormField {
    PowerLaw,
    Smooth,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.extension().and_then(|e| e.to_str()))
    }

    pub fn parse(text: &str, extension: Option<&str>) -> Result<Self, CliError> {
        match extension {
            Some("toml") => toml::from_str(text).map_err(|e| CliError::Config(e.to_string())),
            Some("json") => serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string())),
            _ => serde_json::from_str(text)
                .or_else(|_| toml::from_str(text))
                .map_err(|e: toml::de::Error| CliError::Config(e.to_string())),
        }
    }

    /// Fields set in `other` replace those in `self`.
    pub fn merged(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            n, gamma, p, sigma, t, modes, kmax, delta, forcing, psi, radius, max_iter, tol, angular_nodes, trials, levels,
            linearized, certify, linearization, field, baseline, seed
        );
        self
    }

    fn require<T: Copy>(v: Option<T>, name: &str) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::Config(format!("missing required field `{name}`")))
    }

    pub fn n(&self) -> Result<usize, CliError> {
        Self::require(self.n, "N")
    }

    pub fn gamma(&self) -> Result<f64, CliError> {
        Self::require(self.gamma, "gamma")
    }

    /// Parameters with `σ` defaulting to the midpoint of `preferred`'s window
    /// (or of the window matching `γ` when `preferred` does not apply).
    pub fn params(&self, preferred: Option<TheoremCase>) -> Result<ProblemParams, CliError> {
        let n = self.n()?;
        let gamma = self.gamma()?;
        let sigma = match self.sigma {
            Some(s) => s,
            None => default_sigma(n, gamma, preferred),
        };
        let params = ProblemParams {
            n,
            gamma,
            p: self.p.unwrap_or(3.0),
            sigma,
            t: self.t.unwrap_or(n as f64 + 1.0),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn domain_options(&self) -> DomainOptions {
        let d = DomainOptions::default();
        DomainOptions {
            kmax: self.kmax.unwrap_or(d.kmax),
            angular_nodes: self.angular_nodes.or(d.angular_nodes),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            tol: self.tol.unwrap_or(d.tol),
            certify: self.certify.unwrap_or(d.certify),
        }
    }
}

fn default_sigma(n: usize, gamma: f64, preferred: Option<TheoremCase>) -> f64 {
    let gap = n as f64 - 2.0 - gamma;
    let fallback = if gap > 0.0 { TheoremCase::Case1 } else { TheoremCase::Case2 };
    let case = match preferred {
        Some(TheoremCase::Case2) if gap > 0.0 => TheoremCase::Case3,
        Some(TheoremCase::Case3) | Some(TheoremCase::Case1) if gap <= 0.0 => TheoremCase::Case2,
        Some(c) => c,
        None => fallback,
    };
    sigma_window(case, n, gamma).map(|w| w.midpoint()).unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_and_toml_agree() {
        let j = RunConfig::parse(r#"{"N": 4, "gamma": 1.0, "psi": "axial_quadratic", "levels": [8, 16]}"#, Some("json")).unwrap();
        let t = RunConfig::parse("N = 4\ngamma = 1.0\npsi = \"axial_quadratic\"\nlevels = [8, 16]\n", Some("toml")).unwrap();
        assert_eq!(j, t);
        assert_eq!(j.psi, Some(PsiKind::AxialQuadratic));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(RunConfig::parse(r#"{"N": 4, "gama": 1.0}"#, None).is_err());
    }

    #[test]
    fn flags_override_file() {
        let file = RunConfig {
            n: Some(4),
            gamma: Some(1.0),
            ..Default::default()
        };
        let flags = RunConfig {
            gamma: Some(3.0),
            ..Default::default()
        };
        let m = file.merged(flags);
        assert_eq!((m.n, m.gamma), (Some(4), Some(3.0)));
    }

    #[test]
    fn sigma_defaults_to_window_midpoint() {
        let c = RunConfig {
            n: Some(4),
            gamma: Some(1.0),
            ..Default::default()
        };
        assert_eq!(c.params(None).unwrap().sigma, 0.25);
        assert!(c.params(Some(TheoremCase::Case2)).unwrap().sigma < 0.0);
    }
}
