//! Composite trapezoid on the circle and Gauss-Legendre on intervals.

use std::f64::consts::PI;

use super::KernelError;

pub const MIN_CIRCLE_NODES: usize = 64;
pub const MAX_CIRCLE_NODES: usize = 1 << 16;
const MIN_GL_NODES: usize = 16;
// Node generation is quadratic in the order; zonal integrands of the
// supported families converge far below this.
const MAX_GL_NODES: usize = 2048;

/// Trapezoid rule over one period `[0, 2pi)` with `n` equispaced nodes.
pub fn circle(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 2.0 * PI / n as f64;
    (0..n).map(|k| f(k as f64 * h)).sum::<f64>() * h
}

/// Trapezoid on the circle, doubling the node count until two successive
/// estimates agree to `tol` (relative to `max(1, |I|)`).
pub fn circle_adaptive(f: impl Fn(f64) -> f64, tol: f64) -> Result<f64, KernelError> {
    let mut n = MIN_CIRCLE_NODES;
    let mut prev = circle(&f, n);
    let mut change = f64::INFINITY;
    while n < MAX_CIRCLE_NODES {
        n *= 2;
        let next = circle(&f, n);
        change = (next - prev).abs();
        if change <= tol * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(KernelError::QuadratureNotConverged {
        tol,
        change,
        nodes: n,
    })
}

/// `int_0^{2pi} h(cos s, |sin s|) ds` for integrands even in the sine.
///
/// Nodes `s` and `pi - s` are summed in pairs as `F(s) = h(c, s) + h(-c, s)`,
/// so odd moments of symmetric profiles cancel exactly. The pairing is a
/// rearrangement of the full-circle trapezoid rule and keeps its accuracy.
pub fn circle_even_adaptive(h: impl Fn(f64, f64) -> f64, tol: f64) -> Result<f64, KernelError> {
    let folded = |m: usize| {
        let step = 0.5 * PI / m as f64;
        let f = |k: usize| {
            let (s, c) = if k == m { (1.0, 0.0) } else { (k as f64 * step).sin_cos() };
            h(c, s) + h(-c, s)
        };
        let inner: f64 = (1..m).map(f).sum();
        2.0 * step * (0.5 * f(0) + inner + 0.5 * f(m))
    };
    let mut m = MIN_CIRCLE_NODES / 4;
    let mut prev = folded(m);
    let mut change = f64::INFINITY;
    while 4 * m < MAX_CIRCLE_NODES {
        m *= 2;
        let next = folded(m);
        change = (next - prev).abs();
        if change <= tol * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(KernelError::QuadratureNotConverged {
        tol,
        change,
        nodes: 4 * m,
    })
}

/// Composite Gauss-Legendre with `n` nodes on each panel `[breaks[i], breaks[i+1]]`.
pub fn panels(f: impl Fn(f64) -> f64, breaks: &[f64], n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    breaks
        .windows(2)
        .map(|ab| {
            let (mid, half) = (0.5 * (ab[0] + ab[1]), 0.5 * (ab[1] - ab[0]));
            half * x.iter().zip(&w).map(|(&xi, &wi)| wi * f(mid + half * xi)).sum::<f64>()
        })
        .sum()
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

// P_n(z) and P_n'(z) by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss-Legendre estimate of `int_{-1}^{1} f(u) du`.
pub fn interval(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    x.iter().zip(&w).map(|(&xi, &wi)| wi * f(xi)).sum()
}

/// Gauss-Legendre on `[-1, 1]` with order doubling until convergence.
pub fn interval_adaptive(f: impl Fn(f64) -> f64, tol: f64) -> Result<f64, KernelError> {
    let mut n = MIN_GL_NODES;
    let mut prev = interval(&f, n);
    let mut change = f64::INFINITY;
    while n < MAX_GL_NODES {
        n *= 2;
        let next = interval(&f, n);
        change = (next - prev).abs();
        if change <= tol * next.abs().max(1.0) {
            return Ok(next);
        }
        prev = next;
    }
    Err(KernelError::QuadratureNotConverged {
        tol,
        change,
        nodes: n,
    })
}

/// Product rule on the unit sphere in R^3: Gauss-Legendre in the polar
/// cosine times trapezoid in azimuth. Returns `(direction, weight)` pairs
/// whose weights sum to `4 pi`.
pub fn sphere_nodes(n_polar: usize, n_azimuth: usize) -> Vec<([f64; 3], f64)> {
    let (u, wu) = gauss_legendre(n_polar);
    let h = 2.0 * PI / n_azimuth as f64;
    let mut out = Vec::with_capacity(n_polar * n_azimuth);
    for (&c, &wc) in u.iter().zip(&wu) {
        let s = (1.0 - c * c).max(0.0).sqrt();
        for k in 0..n_azimuth {
            let phi = k as f64 * h;
            out.push(([s * phi.cos(), s * phi.sin(), c], wc * h));
        }
    }
    out
}
