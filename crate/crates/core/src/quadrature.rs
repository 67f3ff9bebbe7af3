//! Quadrature and differentiation on the dyadic logarithmic radial grid.
//!
//! Radial data live on `r_j = r_max · 2^{(j − J)/m}`, `j = 0..=J`, `J = m·octaves`,
//! so the grid is uniform in `u = ln r` with step `h = ln 2 / m`. Each octave
//! `[s, 2s]` with `s` on the grid is spanned by exactly `m` intervals, which is
//! what the dyadic norms need.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n.
        let mut x = ((i as f64 + 0.75) / (nf + 0.5) * std::f64::consts::PI).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Description of a dyadic log grid; cheap to copy and compare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Outer radius (1 for the unit ball).
    pub r_max: f64,
    /// Number of octaves below `r_max`; the inner cutoff is `r_max · 2^{-octaves}`.
    pub octaves: usize,
    /// Nodes per octave.
    pub per_octave: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            r_max: 1.0,
            octaves: 20,
            per_octave: 64,
        }
    }
}

impl GridSpec {
    pub fn new(r_max: f64, octaves: usize, per_octave: usize) -> Self {
        Self {
            r_max,
            octaves,
            per_octave,
        }
    }

    pub fn build(self) -> LogGrid {
        LogGrid::new(self)
    }
}

const STENCIL: usize = 6;

/// Uniform-in-`ln r` grid with precomputed quadrature and differentiation
/// stencils.
#[derive(Debug, Clone)]
pub struct LogGrid {
    spec: GridSpec,
    r: Vec<f64>,
    h: f64,
    // Interval rules: for interval [j, j+1], weights over STENCIL nodes
    // starting at interval_start[j].
    interval_start: Vec<usize>,
    interval_weights: Vec<[f64; STENCIL]>,
    // Seven-point first-derivative stencils in u, one per node.
    diff_start: Vec<usize>,
    diff_weights: Vec<[f64; 7]>,
}

impl PartialEq for LogGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl LogGrid {
    pub fn new(spec: GridSpec) -> Self {
        assert!(spec.per_octave >= 4 && spec.per_octave % 4 == 0);
        assert!(spec.octaves >= 1 && spec.r_max > 0.0);
        let total = spec.octaves * spec.per_octave;
        let h = std::f64::consts::LN_2 / spec.per_octave as f64;
        let r: Vec<f64> = (0..=total)
            .map(|j| {
                let e = (j as f64 - total as f64) / spec.per_octave as f64;
                spec.r_max * e.exp2()
            })
            .collect();
        let n = r.len();

        let mut interval_start = Vec::with_capacity(n - 1);
        let mut interval_weights = Vec::with_capacity(n - 1);
        let mut cache = std::collections::HashMap::new();
        for j in 0..n - 1 {
            let start = (j as isize - 2).clamp(0, (n - STENCIL) as isize) as usize;
            let offset = j - start;
            let w = *cache.entry(offset).or_insert_with(|| {
                let nodes: Vec<f64> = (0..STENCIL).map(|i| i as f64).collect();
                let ws = lagrange_integral_weights(&nodes, offset as f64, offset as f64 + 1.0);
                let mut arr = [0.0; STENCIL];
                for (a, b) in arr.iter_mut().zip(ws) {
                    *a = b * h;
                }
                arr
            });
            interval_start.push(start);
            interval_weights.push(w);
        }

        let mut diff_start = Vec::with_capacity(n);
        let mut diff_weights = Vec::with_capacity(n);
        let mut dcache = std::collections::HashMap::new();
        for j in 0..n {
            let start = (j as isize - 3).clamp(0, (n - 7) as isize) as usize;
            let offset = j - start;
            let w = *dcache.entry(offset).or_insert_with(|| {
                let nodes: Vec<f64> = (0..7).map(|i| i as f64).collect();
                let ws = node_derivative_weights(&nodes, offset);
                let mut arr = [0.0; 7];
                for (a, b) in arr.iter_mut().zip(ws) {
                    *a = b / h;
                }
                arr
            });
            diff_start.push(start);
            diff_weights.push(w);
        }

        Self {
            spec,
            r,
            h,
            interval_start,
            interval_weights,
            diff_start,
            diff_weights,
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    pub fn r_min(&self) -> f64 {
        self.r[0]
    }

    pub fn r_max(&self) -> f64 {
        *self.r.last().unwrap()
    }

    /// Step in `ln r`.
    pub fn log_step(&self) -> f64 {
        self.h
    }

    pub fn per_octave(&self) -> usize {
        self.spec.per_octave
    }

    /// Index of the node equal to `r` (to rounding), if any.
    pub fn node_index(&self, r: f64) -> Option<usize> {
        let x = (r / self.spec.r_max).log2() * self.spec.per_octave as f64
            + (self.len() - 1) as f64;
        let j = x.round();
        if (x - j).abs() < 1e-6 && j >= 0.0 && (j as usize) < self.len() {
            Some(j as usize)
        } else {
            None
        }
    }

    /// Integral over `[r_i, r_{i+1}]` of a function given by its samples
    /// `g_j = F(r_j)·r_j` (the integrand against `du`).
    fn interval_integral(&self, g: &[f64], i: usize) -> f64 {
        let s = self.interval_start[i];
        let w = &self.interval_weights[i];
        let mut acc = 0.0;
        for (l, wl) in w.iter().enumerate() {
            acc += wl * g[s + l];
        }
        acc
    }

    /// Running integrals `∫_{r_min}^{r_i} F(r) dr` from samples of `F`.
    pub fn cumulative_from_inner(&self, f: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = f.iter().zip(&self.r).map(|(v, r)| v * r).collect();
        let mut out = vec![0.0; self.len()];
        for i in 0..self.len() - 1 {
            out[i + 1] = out[i] + self.interval_integral(&g, i);
        }
        out
    }

    /// Running integrals `∫_{r_i}^{r_max} F(r) dr`, accumulated from the outer
    /// end.
    pub fn cumulative_from_outer(&self, f: &[f64]) -> Vec<f64> {
        let g: Vec<f64> = f.iter().zip(&self.r).map(|(v, r)| v * r).collect();
        let n = self.len();
        let mut out = vec![0.0; n];
        for i in (0..n - 1).rev() {
            out[i] = out[i + 1] + self.interval_integral(&g, i);
        }
        out
    }

    /// [`cumulative_from_outer`] carried in two-sum arithmetic: returns the
    /// rounded sums and their rounding errors.
    pub fn cumulative_from_outer_compensated(&self, f: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let g: Vec<f64> = f.iter().zip(&self.r).map(|(v, r)| v * r).collect();
        let n = self.len();
        let mut hi = vec![0.0; n];
        let mut lo = vec![0.0; n];
        for i in (0..n - 1).rev() {
            let (s, e) = two_sum(hi[i + 1], self.interval_integral(&g, i));
            hi[i] = s;
            lo[i] = lo[i + 1] + e;
        }
        (hi, lo)
    }

    /// Dense weight rows of [`cumulative_from_inner`]: `W[i][j]` multiplies `F(r_j)`.
    pub fn cumulative_inner_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n - 1 {
            let (head, tail) = rows.split_at_mut(i + 1);
            let next = &mut tail[0];
            next.copy_from_slice(&head[i]);
            let s = self.interval_start[i];
            for (l, w) in self.interval_weights[i].iter().enumerate() {
                next[s + l] += w * self.r[s + l];
            }
        }
        rows
    }

    /// Dense weight rows of [`cumulative_from_outer`].
    pub fn cumulative_outer_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut rows = vec![vec![0.0; n]; n];
        for i in (0..n - 1).rev() {
            let (head, tail) = rows.split_at_mut(i + 1);
            let cur = &mut head[i];
            cur.copy_from_slice(&tail[0]);
            let s = self.interval_start[i];
            for (l, w) in self.interval_weights[i].iter().enumerate() {
                cur[s + l] += w * self.r[s + l];
            }
        }
        rows
    }

    /// Composite Boole rule for `∫_{r_i0}^{r_i1} F(r) dr`; `i1 − i0` must be a
    /// multiple of 4. All weights are positive.
    pub fn boole(&self, f: &[f64], i0: usize, i1: usize) -> f64 {
        debug_assert!(i1 > i0 && (i1 - i0) % 4 == 0);
        const W: [f64; 5] = [7.0, 32.0, 12.0, 32.0, 7.0];
        let mut acc = 0.0;
        let mut j = i0;
        while j < i1 {
            for (l, w) in W.iter().enumerate() {
                acc += w * f[j + l] * self.r[j + l];
            }
            j += 4;
        }
        acc * 2.0 * self.h / 45.0
    }

    /// `dF/dr` at every node from samples of `F`, via seven-point stencils in `u`.
    pub fn derivative(&self, f: &[f64]) -> Vec<f64> {
        (0..self.len())
            .map(|j| {
                let s = self.diff_start[j];
                let mut acc = 0.0;
                for (l, w) in self.diff_weights[j].iter().enumerate() {
                    acc += w * f[s + l];
                }
                acc / self.r[j]
            })
            .collect()
    }
}

/// Integrals over `[a, b]` of the Lagrange basis polynomials on `nodes`.
pub(crate) fn lagrange_integral_weights(nodes: &[f64], a: f64, b: f64) -> Vec<f64> {
    (0..nodes.len())
        .map(|i| {
            let coeffs = lagrange_basis_coeffs(nodes, i);
            coeffs
                .iter()
                .enumerate()
                .map(|(d, c)| {
                    let e = (d + 1) as i32;
                    c * (b.powi(e) - a.powi(e)) / e as f64
                })
                .sum()
        })
        .collect()
}

/// Derivative weights at the node `nodes[j]` in barycentric form; they sum to
/// zero exactly so constants differentiate to zero.
pub(crate) fn node_derivative_weights(nodes: &[f64], j: usize) -> Vec<f64> {
    let bary: Vec<f64> = (0..nodes.len())
        .map(|i| {
            let prod: f64 = (0..nodes.len()).filter(|&k| k != i).map(|k| nodes[i] - nodes[k]).product();
            1.0 / prod
        })
        .collect();
    let mut w: Vec<f64> = (0..nodes.len())
        .map(|i| if i == j { 0.0 } else { bary[i] / bary[j] / (nodes[j] - nodes[i]) })
        .collect();
    w[j] = -w.iter().sum::<f64>();
    w
}

fn lagrange_basis_coeffs(nodes: &[f64], i: usize) -> Vec<f64> {
    // Monomial coefficients of Π_{k≠i} (x − x_k)/(x_i − x_k), lowest degree first.
    let mut coeffs = vec![1.0];
    let mut denom = 1.0;
    for (k, xk) in nodes.iter().enumerate() {
        if k == i {
            continue;
        }
        let mut next = vec![0.0; coeffs.len() + 1];
        for (d, c) in coeffs.iter().enumerate() {
            next[d + 1] += c;
            next[d] -= c * xk;
        }
        coeffs = next;
        denom *= nodes[i] - xk;
    }
    coeffs.iter().map(|c| c / denom).collect()
}

/// Quintic Hermite interpolation on `[x0, x1]` from values, first and second
/// derivatives at both ends. Returns `(f, f', f'')` at `x`.
pub fn quintic_hermite(
    x0: f64,
    x1: f64,
    left: (f64, f64, f64),
    right: (f64, f64, f64),
    x: f64,
) -> (f64, f64, f64) {
    let h = x1 - x0;
    let s = (x - x0) / h;
    let (f0, d0, c0) = left;
    let (f1, d1, c1) = right;
    let (d0, d1) = (d0 * h, d1 * h);
    let (c0, c1) = (c0 * h * h, c1 * h * h);
    let s2 = s * s;
    let s3 = s2 * s;
    let s4 = s3 * s;
    let s5 = s4 * s;
    let df = f1 - f0;
    let h1 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
    let h2 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
    let h3 = 0.5 * (s3 - 2.0 * s4 + s5);
    let h4 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
    let h5 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
    let value = f0 + h1 * d0 + h2 * c0 + h3 * c1 + h4 * d1 + h5 * df;

    let dh1 = 1.0 - 18.0 * s2 + 32.0 * s3 - 15.0 * s4;
    let dh2 = 0.5 * (2.0 * s - 9.0 * s2 + 12.0 * s3 - 5.0 * s4);
    let dh3 = 0.5 * (3.0 * s2 - 8.0 * s3 + 5.0 * s4);
    let dh4 = -12.0 * s2 + 28.0 * s3 - 15.0 * s4;
    let dh5 = 30.0 * s2 - 60.0 * s3 + 30.0 * s4;
    let deriv = (dh1 * d0 + dh2 * c0 + dh3 * c1 + dh4 * d1 + dh5 * df) / h;

    let ddh1 = -36.0 * s + 96.0 * s2 - 60.0 * s3;
    let ddh2 = 0.5 * (2.0 - 18.0 * s + 36.0 * s2 - 20.0 * s3);
    let ddh3 = 0.5 * (6.0 * s - 24.0 * s2 + 20.0 * s3);
    let ddh4 = -24.0 * s + 84.0 * s2 - 60.0 * s3;
    let ddh5 = 60.0 * s - 180.0 * s2 + 120.0 * s3;
    let second = (ddh1 * d0 + ddh2 * c0 + ddh3 * c1 + ddh4 * d1 + ddh5 * df) / (h * h);
    (value, deriv, second)
}

/// Locates `x` in a strictly increasing table: returns `i` with
/// `xs[i] <= x <= xs[i+1]`.
/// Error-free sum: `a + b = s + e` exactly.
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

pub(crate) fn bracket(xs: &[f64], x: f64) -> Result<usize> {
    let n = xs.len();
    if n < 2 || x < xs[0] || x > xs[n - 1] || x.is_nan() {
        return Err(LabError::Domain(format!(
            "r = {x} outside [{}, {}]",
            xs.first().copied().unwrap_or(f64::NAN),
            xs.last().copied().unwrap_or(f64::NAN)
        )));
    }
    let i = xs.partition_point(|v| *v <= x);
    Ok(i.saturating_sub(1).min(n - 2))
}
