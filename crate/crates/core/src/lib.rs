//! Numerical laboratory for the Cordes-type operator `L_γ = Δ + γ ∂_rr` on
//! the unit ball of `R^N`.
//!
//! The crate builds the positive radial solution of `−L_γ w = w^p`, solves the
//! linear and linearised problems mode by mode in zonal spherical harmonics,
//! measures the dyadic weighted norms `‖·‖_X`, `‖·‖_Y`, and runs the two
//! perturbative fixed-point constructions (perturbed nonlinearity, perturbed
//! domain) with full diagnostics.

pub mod error;
pub mod linear;
pub mod modes;
pub mod norms;
pub mod ode;
pub mod operator;
pub mod perturb;
pub mod quadrature;
pub mod radial;
pub mod zonal;

pub use error::{LabError, Result};
pub use linear::{
    k0_green_apply, kernel_check, operator_norm_probe, solve_cordes_mode, solve_linearized_mode,
    K0Solution, KernelCheck, LinearizedSolver, ModeSolveReport, OperatorNormProbe,
};
pub use modes::{ModeProfile, ModeSet};
pub use norms::{pointwise_bound_check, x_norm, y_norm, AnnulusValue, NormOptions, PointwiseBound, WeightedNormReport};
pub use operator::{
    cordes_ratio, critical_exponent, effective_dimension, indicial_roots, mode_eigenvalue,
    sigma_window, IndicialPair, ProblemParams, SigmaWindow, TheoremCase,
};
pub use perturb::{
    domain_map_invert, fixed_point_domain, fixed_point_zero_order, maximum_principle_barrier,
    perturbation_terms, taylor_remainders, zero_order_rhs, DomainMap, FixedPointTrace, ForcingKind,
    PsiKind, ZeroOrderConfig,
};
pub use quadrature::{GridSpec, LogGrid};
pub use radial::{evaluate_w, radial_solution, rescale_to_unit_ball, solve_ivp_unit_height, RadialProfile, RawProfile};
