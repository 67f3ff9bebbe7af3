//! Adaptive Dormand-Prince 5(4) integrator for small fixed-size systems, with
//! step storage and terminal event location.

use crate::error::{LabError, Result};

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            h_init: 1e-4,
            h_max: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

/// Accepted steps: times, states and right-hand sides.
#[derive(Debug, Clone)]
pub struct Trajectory<const D: usize> {
    pub t: Vec<f64>,
    pub y: Vec<[f64; D]>,
    pub dy: Vec<[f64; D]>,
}

impl<const D: usize> Trajectory<D> {
    pub fn last_t(&self) -> f64 {
        *self.t.last().unwrap()
    }

    pub fn last_y(&self) -> [f64; D] {
        *self.y.last().unwrap()
    }
}

/// Outcome of [`integrate`]: the trajectory and, if the event fired, its time.
#[derive(Debug, Clone)]
pub struct Solution<const D: usize> {
    pub trajectory: Trajectory<D>,
    pub event: Option<f64>,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn axpy<const D: usize>(y: &[f64; D], h: f64, terms: &[(f64, &[f64; D])]) -> [f64; D] {
    let mut out = *y;
    for (c, k) in terms {
        for i in 0..D {
            out[i] += h * c * k[i];
        }
    }
    out
}

/// One Dormand-Prince step; returns `(y_new, f(t+h, y_new), error estimate)`.
pub fn dp_step<const D: usize, F>(f: &F, t: f64, y: &[f64; D], k1: &[f64; D], h: f64) -> ([f64; D], [f64; D], [f64; D])
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let k2 = f(t + C2 * h, &axpy(y, h, &[(A21, k1)]));
    let k3 = f(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]));
    let k4 = f(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]));
    let k5 = f(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    );
    let k6 = f(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
    );
    let y_new = axpy(y, h, &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)]);
    let k7 = f(t + h, &y_new);
    let mut err = [0.0; D];
    for i in 0..D {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    (y_new, k7, err)
}

/// Integrates `y' = f(t, y)` from `t0` to `t_end`, stopping early at the first
/// sign change of `event(y)` if one is supplied.
pub fn integrate<const D: usize, F>(
    f: F,
    t0: f64,
    y0: [f64; D],
    t_end: f64,
    opts: &OdeOptions,
    event: Option<&dyn Fn(&[f64; D]) -> f64>,
) -> Result<Solution<D>>
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y);
    let mut traj = Trajectory {
        t: vec![t],
        y: vec![y],
        dy: vec![k1],
    };
    let mut h = opts.h_init.min(opts.h_max).min(t_end - t0);
    let mut g_prev = event.map(|g| g(&y));
    let mut steps = 0usize;

    while t < t_end {
        steps += 1;
        if steps > opts.max_steps {
            return Err(LabError::Integration(format!(
                "step budget {} exhausted at t = {t}",
                opts.max_steps
            )));
        }
        let h_try = h.min(t_end - t);
        let (y_new, k_new, err) = dp_step(&f, t, &y, &k1, h_try);
        let mut err_norm = 0.0f64;
        for i in 0..D {
            let sc = opts.atol + opts.rtol * y[i].abs().max(y_new[i].abs());
            err_norm = err_norm.max((err[i] / sc).abs());
        }
        if !err_norm.is_finite() {
            h = h_try * 0.1;
            if h < 1e-14 * t.abs().max(1.0) {
                return Err(LabError::Integration(format!("step size underflow at t = {t}")));
            }
            continue;
        }
        if err_norm <= 1.0 {
            let t_new = if h_try == t_end - t { t_end } else { t + h_try };
            if let (Some(g), Some(gp)) = (event, g_prev) {
                let g_new = g(&y_new);
                if gp != 0.0 && g_new.signum() != gp.signum() {
                    let (te, ye, ke) = locate_event(&f, g, t, &y, &k1, h_try, gp, g_new);
                    traj.t.push(te);
                    traj.y.push(ye);
                    traj.dy.push(ke);
                    return Ok(Solution {
                        trajectory: traj,
                        event: Some(te),
                    });
                }
                g_prev = Some(g_new);
            }
            t = t_new;
            y = y_new;
            k1 = k_new;
            traj.t.push(t);
            traj.y.push(y);
            traj.dy.push(k1);
        }
        let factor = if err_norm == 0.0 {
            5.0
        } else {
            (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
        };
        h = (h_try * factor).min(opts.h_max);
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(LabError::Integration(format!("step size underflow at t = {t}")));
        }
    }
    Ok(Solution {
        trajectory: traj,
        event: None,
    })
}

#[allow(clippy::too_many_arguments)]
fn locate_event<const D: usize, F>(
    f: &F,
    g: &dyn Fn(&[f64; D]) -> f64,
    t: f64,
    y: &[f64; D],
    k1: &[f64; D],
    h_full: f64,
    g0: f64,
    g1: f64,
) -> (f64, [f64; D], [f64; D])
where
    F: Fn(f64, &[f64; D]) -> [f64; D],
{
    // Illinois regula falsi on the step length, each evaluation an exact step.
    let (mut a, mut fa) = (0.0, g0);
    let (mut b, mut fb) = (h_full, g1);
    let mut side = 0i32;
    let mut best = (h_full, fb);
    for _ in 0..100 {
        let c = (a * fb - b * fa) / (fb - fa);
        let (yc, _, _) = dp_step(f, t, y, k1, c);
        let fc = g(&yc);
        if fc.abs() < best.1.abs() {
            best = (c, fc);
        }
        if fc == 0.0 || (b - a).abs() < 1e-15 * (t + h_full).abs() {
            break;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if fc.abs() < 1e-300 {
            break;
        }
    }
    let h = best.0;
    let (ye, ke, _) = dp_step(f, t, y, k1, h);
    (t + h, ye, ke)
}
