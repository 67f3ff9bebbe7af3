//! Independent classical Lane-Emden reference: fixed-step RK4 in the physical
//! dimension, first zero by secant refinement on the step length, then the
//! unit-ball rescaling.

const STEPS: usize = 40_000;

fn rk4(n: f64, p: f64, h: f64, steps: usize) -> Vec<f64> {
    let f = |r: f64, y: [f64; 2]| [y[1], -(n - 1.0) * y[1] / r - y[0].max(0.0).powf(p)];
    let c2 = -1.0 / (2.0 * n);
    let c4 = p / (8.0 * n * (n + 2.0));
    let mut y = [1.0 + c2 * h * h + c4 * h.powi(4), 2.0 * c2 * h + 4.0 * c4 * h.powi(3)];
    let mut out = Vec::with_capacity(steps + 1);
    out.extend([1.0, y[0]]);
    let mut r = h;
    for _ in 1..steps {
        let k1 = f(r, y);
        let k2 = f(r + 0.5 * h, [y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
        let k3 = f(r + 0.5 * h, [y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
        let k4 = f(r + h, [y[0] + h * k3[0], y[1] + h * k3[1]]);
        for i in 0..2 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        r += h;
        out.push(y[0]);
    }
    out
}

/// First zero of `w″ + (N−1)w′/r + w^p = 0`, `w(0) = 1`.
pub fn first_zero(n: f64, p: f64) -> Option<f64> {
    let h = 1e-3;
    let coarse = rk4(n, p, h, 100_000);
    let j = coarse.iter().position(|w| *w <= 0.0)?;
    let end = |r: f64| *rk4(n, p, r / STEPS as f64, STEPS).last().unwrap();
    let (mut a, mut b) = ((j - 1) as f64 * h, j as f64 * h);
    let (mut fa, mut fb) = (end(a), end(b));
    for _ in 0..40 {
        if fb == fa {
            break;
        }
        let c = b - fb * (b - a) / (fb - fa);
        (a, fa) = (b, fb);
        b = c;
        fb = end(b);
        if fb.abs() < 1e-15 || (b - a).abs() < 1e-15 {
            break;
        }
    }
    Some(b)
}

/// `(r_j, w(r_j))` at `r_j = j/STEPS` for the solution rescaled to vanish at `r = 1`.
pub fn unit_ball_profile(n: usize, p: f64) -> Option<Vec<(f64, f64)>> {
    let r0 = first_zero(n as f64, p)?;
    let amp = r0.powf(2.0 / (p - 1.0));
    let path = rk4(n as f64, p, r0 / STEPS as f64, STEPS);
    Some(
        path.iter()
            .enumerate()
            .map(|(j, w)| (j as f64 / STEPS as f64, amp * w))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_limit_zero_is_pi() {
        let r = first_zero(3.0, 1.0 + 1e-9).unwrap();
        assert!((r - std::f64::consts::PI).abs() < 1e-6);
    }

    #[test]
    fn tabulated_first_zero_for_index_three() {
        // ξ₁ = 6.89684862 for the n = 3 polytrope.
        assert!((first_zero(3.0, 3.0).unwrap() - 6.896_848_62).abs() < 1e-7);
    }
}
