use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::green::green_profile;
use crate::error::Result;
use crate::modes::{ModeProfile, ModeSet};
use crate::norms::{x_norm, y_norm};
use crate::operator::{ProblemParams, TheoremCase};
use crate::quadrature::{GridSpec, LogGrid};

/// Polynomial degree of the random radial coefficients.
const DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProbeEstimate {
    pub m: usize,
    /// `D_m`: the largest observed `‖φ‖_X / ‖f‖_Y` over data with modes `≤ m`.
    pub d_m: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorNormProbe {
    pub trials: usize,
    pub seed: u64,
    pub estimates: Vec<ProbeEstimate>,
}

impl OperatorNormProbe {
    pub fn estimate(&self, m: usize) -> Option<f64> {
        self.estimates.iter().find(|e| e.m == m).map(|e| e.d_m)
    }
}

/// Random smooth radial coefficient for `(trial, k)`: a cubic with uniform
/// coefficients in `[−1, 1]`.
pub fn random_mode(k: usize, trial: usize, seed: u64, grid: &Arc<LogGrid>) -> ModeProfile {
    let stream = seed ^ ((trial as u64) << 32) ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(stream);
    let c: Vec<f64> = (0..=DEGREE).map(|_| rng.random_range(-1.0..1.0)).collect();
    ModeProfile::from_values(k, grid.clone(), move |r| c.iter().rev().fold(0.0, |acc, ci| acc * r + ci))
}

/// `‖φ‖_X / ‖f‖_Y` where `φ` solves `L_γ φ = f` mode by mode.
pub fn solve_ratio(data: &ModeSet, params: &ProblemParams) -> Result<f64> {
    let grid = match data.grid()? {
        Some(g) => g,
        None => return Ok(0.0),
    };
    let sol = data
        .modes
        .iter()
        .map(|b| green_profile(b.k, &grid, &b.a, params))
        .collect::<Result<Vec<_>>>()?;
    let x = x_norm(&ModeSet::new(sol)?, params)?.norm_value;
    let y = y_norm(data, params)?.norm_value;
    Ok(if y > 0.0 { x / y } else { 0.0 })
}

/// Empirical `D_m` for each `m` in `levels`.
///
/// Every trial draws data up to the largest level; each level evaluates the
/// truncation of that data, and `D_m` is the max over trials and over all
/// levels `≤ m`, so the estimates are non-decreasing in `m`.
pub fn operator_norm_probe(params: &ProblemParams, levels: &[usize], trials: usize, seed: u64) -> Result<OperatorNormProbe> {
    operator_norm_probe_on(params, levels, trials, seed, GridSpec::default())
}

pub fn operator_norm_probe_on(
    params: &ProblemParams,
    levels: &[usize],
    trials: usize,
    seed: u64,
    grid: GridSpec,
) -> Result<OperatorNormProbe> {
    let case = TheoremCase::classify(params)?;
    let first = case.first_mode();
    let mut levels: Vec<usize> = levels.iter().copied().filter(|m| *m >= first).collect();
    levels.sort_unstable();
    levels.dedup();
    let top = levels.last().copied().unwrap_or(first);
    let grid = Arc::new(grid.build());

    let per_trial: Vec<Vec<f64>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let data = ModeSet {
                modes: (first..=top).map(|k| random_mode(k, trial, seed, &grid)).collect(),
            };
            levels
                .iter()
                .map(|&m| solve_ratio(&data.truncated(m), params))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut estimates = Vec::with_capacity(levels.len());
    let mut running = 0.0f64;
    for (q, &m) in levels.iter().enumerate() {
        let level_max = per_trial.iter().map(|t| t[q]).fold(0.0, f64::max);
        running = running.max(level_max);
        estimates.push(ProbeEstimate { m, d_m: running });
    }
    Ok(OperatorNormProbe {
        trials,
        seed,
        estimates,
    })
}
