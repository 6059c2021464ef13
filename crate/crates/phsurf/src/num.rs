//! Small numerical kernel: stencils, deterministic summation, quadrature
//! tables, root finding, and 3x3 solves.
//!
//! Everything downstream differentiates closed-form fields up to three times,
//! so the default stencil is the 5-point centered rule (4th order) and the
//! chart step never drops below 1e-5.

use crate::error::{Error, Result};

/// Step size for chart-coordinate stencils: h = max(1e-5, 1e-5 |x|).
pub fn chart_step(x: f64) -> f64 {
    (1e-5 * x.abs()).max(1e-5)
}

/// 5-point centered first derivative, error O(h^4).
pub fn deriv5(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Deterministic pairwise summation; bit-for-bit reproducible for a fixed
/// input order and faster-growing error bound than naive left-to-right.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        let mut acc = 0.0;
        for &x in xs {
            acc += x;
        }
        return acc;
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Bisection to a bracket width of `tol`; requires a sign change on [a, b].
pub fn bisect(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket { a, b });
    }
    for _ in 0..max_iter {
        let mid = 0.5 * (lo + hi);
        if hi - lo < tol {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Newton iteration with value-and-derivative callback.
pub fn newton(
    f_df: impl Fn(f64) -> (f64, f64),
    x0: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut x = x0;
    for _ in 0..max_iter {
        let (v, d) = f_df(x);
        if d == 0.0 {
            return Err(Error::Numeric { what: "Newton derivative vanished".into() });
        }
        let step = v / d;
        x -= step;
        if step.abs() < tol {
            return Ok(x);
        }
    }
    Err(Error::Numeric { what: format!("Newton did not converge from {x0}") })
}

/// Cumulative Simpson table of F(x) = integral of f from a to x on n panels.
/// Returns n+1 pairs (x_k, F(x_k)); each panel uses the midpoint sample.
pub fn cumulative_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> Vec<(f64, f64)> {
    let h = (b - a) / n as f64;
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push((a, 0.0));
    for k in 0..n {
        let x0 = a + k as f64 * h;
        let x1 = x0 + h;
        acc += h / 6.0 * (f(x0) + 4.0 * f(0.5 * (x0 + x1)) + f(x1));
        table.push((x1, acc));
    }
    table
}

/// Monotone cubic (Fritsch-Carlson) interpolant through strictly increasing
/// data. Used to invert arclength tables without overshoot.
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ms: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::Numeric { what: "monotone cubic needs >= 2 matched nodes".into() });
        }
        let mut deltas = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let dx = xs[i + 1] - xs[i];
            if dx <= 0.0 {
                return Err(Error::Numeric { what: "monotone cubic abscissae must increase".into() });
            }
            deltas.push((ys[i + 1] - ys[i]) / dx);
        }
        let mut ms = vec![0.0; n];
        ms[0] = deltas[0];
        ms[n - 1] = deltas[n - 2];
        for i in 1..n - 1 {
            if deltas[i - 1] * deltas[i] <= 0.0 {
                ms[i] = 0.0;
            } else {
                ms[i] = 0.5 * (deltas[i - 1] + deltas[i]);
            }
        }
        // Fritsch-Carlson limiter keeps the interpolant monotone per panel.
        for i in 0..n - 1 {
            if deltas[i] == 0.0 {
                ms[i] = 0.0;
                ms[i + 1] = 0.0;
                continue;
            }
            let a = ms[i] / deltas[i];
            let b = ms[i + 1] / deltas[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                ms[i] = tau * a * deltas[i];
                ms[i + 1] = tau * b * deltas[i];
            }
        }
        Ok(MonotoneCubic { xs, ys, ms })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        let x = x.clamp(self.xs[0], self.xs[n - 1]);
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.xs[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = self.xs[lo + 1] - self.xs[lo];
        let t = (x - self.xs[lo]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[lo] + h10 * h * self.ms[lo] + h01 * self.ys[lo + 1] + h11 * h * self.ms[lo + 1]
    }
}

/// Solve the 3x3 system with the given columns: cols[0]*x0 + cols[1]*x1 + cols[2]*x2 = rhs.
pub fn solve3(cols: [[f64; 3]; 3], rhs: [f64; 3]) -> Result<[f64; 3]> {
    let det = det3(cols[0], cols[1], cols[2]);
    if det.abs() < 1e-300 {
        return Err(Error::Numeric { what: "singular 3x3 solve".into() });
    }
    Ok([
        det3(rhs, cols[1], cols[2]) / det,
        det3(cols[0], rhs, cols[2]) / det,
        det3(cols[0], cols[1], rhs) / det,
    ])
}

/// Determinant of the matrix with the given columns.
pub fn det3(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1])
        + c[0] * (a[1] * b[2] - a[2] * b[1])
}
