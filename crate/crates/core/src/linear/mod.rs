//! Mode-by-mode linear theory: the explicit variation-of-parameters solution
//! of `L_γ φ = f`, the explicit radial operator `K₀`, the linearised operator
//! `L = L_γ + p w^{p−1}` solved as a dense second-kind system, kernel checks
//! and empirical operator-norm probes.

mod green;
mod kernel;
mod linearized;
mod probe;

pub use green::{apply_mode_operator, fd_residual, k0_green_apply, solve_cordes_mode, K0Solution, ModeSolveReport};
pub use kernel::{kernel_check, KernelCheck, KERNEL_THRESHOLD};
pub use linearized::{route_for, solve_linearized_mode, LinearizedSolver, Route};
pub use probe::{operator_norm_probe, operator_norm_probe_on, random_mode, solve_ratio, OperatorNormProbe, ProbeEstimate};
