use thiserror::Error;

/// Errors raised by the solvers.
///
/// The variants split into two families that the CLI maps to different exit
/// codes: hypothesis violations (`Window`, `Domain`, `Input`) and numerical
/// failures (everything else).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    /// A parameter set violates a hypothesis of the theorem case it was used with.
    #[error("parameter window violated: {hypothesis}")]
    Window { hypothesis: String },

    /// An argument lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Malformed input data (mismatched grids, missing samples, ...).
    #[error("invalid input: {0}")]
    Input(String),

    /// The shooting solve never crossed zero.
    #[error("no sign change before r = {r_max}; parameters likely outside existence window")]
    NoSignChange { r_max: f64 },

    /// A weighted integral near the origin diverges at the discretisation scale.
    #[error("mode {k}: integrand decays like r^{exponent:.4} at the origin; requires {condition}")]
    Integrability {
        k: usize,
        exponent: f64,
        condition: String,
    },

    /// The collocation matrix of the linearised operator is singular.
    #[error("numerical kernel encountered in mode {k} (pivot ratio {pivot_ratio:.3e})")]
    NumericalKernel { k: usize, pivot_ratio: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (|F| = {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("no contraction at this (delta, R): ratio >= 1 for {streak} consecutive iterations")]
    NoContraction { streak: usize },

    #[error("fixed point not reached in {iterations} iterations (last difference {diff:.3e})")]
    NotConverged { iterations: usize, diff: f64 },

    #[error("mode budget exceeded: truncation tail is {tail_fraction:.3} of the projected energy")]
    ModeBudget { tail_fraction: f64 },

    #[error("integration failed: {0}")]
    Integration(String),
}

impl LabError {
    pub(crate) fn window(hypothesis: impl Into<String>) -> Self {
        LabError::Window {
            hypothesis: hypothesis.into(),
        }
    }

    /// `true` for errors caused by the caller's parameters rather than by the
    /// numerics.
    pub fn is_hypothesis_violation(&self) -> bool {
        matches!(
            self,
            LabError::Window { .. } | LabError::Domain(_) | LabError::Input(_)
        )
    }

    /// Stable machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Window { .. } => "window",
            LabError::Domain(_) => "domain",
            LabError::Input(_) => "input",
            LabError::NoSignChange { .. } => "no_sign_change",
            LabError::Integrability { .. } => "integrability",
            LabError::NumericalKernel { .. } => "numerical_kernel",
            LabError::NewtonDivergence { .. } => "newton_divergence",
            LabError::NoContraction { .. } => "no_contraction",
            LabError::NotConverged { .. } => "not_converged",
            LabError::ModeBudget { .. } => "mode_budget",
            LabError::Integration(_) => "integration",
        }
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
