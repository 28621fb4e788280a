//! Conservative finite-volume building blocks.
//!
//! Face fluxes are evaluated by one function of the two adjacent cells, so the
//! value leaving one cell is bit-identical to the value entering the other.
//! Faces on the edge of an outflow grid carry no flux.

use crate::exec::{self, Parallelism};
use crate::fields::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Axis {
    X,
    Y,
}

/// Neighbors `(LL, L, R, RR)` around the face between `l` and `r` along `axis`.
pub(crate) fn stencil(grid: &Grid, axis: Axis, l: usize, r: usize) -> (Option<usize>, Option<usize>) {
    let step = |k: usize, d: i64| {
        let (i, j) = grid.coords(k);
        match axis {
            Axis::X => grid.shift_x(i, d).map(|ii| grid.index(ii, j)),
            Axis::Y => grid.shift_y(j, d).map(|jj| grid.index(i, jj)),
        }
    };
    (step(l, -1), step(r, 1))
}

/// `-div F` where `flux(axis, left, right)` is the flux through the face
/// from `left` to its `+axis` neighbor `right`.
pub(crate) fn flux_divergence<F>(grid: &Grid, par: Parallelism, flux: F) -> Vec<f64>
where
    F: Fn(Axis, usize, usize) -> f64 + Sync + Send,
{
    let (hx, hy) = (grid.hx(), grid.hy());
    exec::map(par, grid.len(), |k| {
        let (i, j) = grid.coords(k);
        let mut acc = 0.0;
        if let Some(ii) = grid.shift_x(i, 1) {
            acc -= flux(Axis::X, k, grid.index(ii, j)) / hx;
        }
        if let Some(ii) = grid.shift_x(i, -1) {
            acc += flux(Axis::X, grid.index(ii, j), k) / hx;
        }
        if let Some(jj) = grid.shift_y(j, 1) {
            acc -= flux(Axis::Y, k, grid.index(i, jj)) / hy;
        }
        if let Some(jj) = grid.shift_y(j, -1) {
            acc += flux(Axis::Y, grid.index(i, jj), k) / hy;
        }
        acc
    })
}

fn minmod(a: f64, b: f64) -> f64 {
    if a * b <= 0.0 {
        0.0
    } else if a.abs() < b.abs() {
        a
    } else {
        b
    }
}

/// Upwind value at the face between `l` and `r` for face velocity `u`, with
/// cell values read through `get`.
pub(crate) fn upwind_value(
    grid: &Grid,
    axis: Axis,
    l: usize,
    r: usize,
    u: f64,
    get: impl Fn(usize) -> f64,
    limiter: bool,
) -> f64 {
    if !limiter {
        return if u >= 0.0 { get(l) } else { get(r) };
    }
    let (ll, rr) = stencil(grid, axis, l, r);
    let (vl, vr) = (get(l), get(r));
    if u >= 0.0 {
        match ll {
            Some(ll) => vl + 0.5 * minmod(vl - get(ll), vr - vl),
            None => vl,
        }
    } else {
        match rr {
            Some(rr) => vr - 0.5 * minmod(vr - vl, get(rr) - vr),
            None => vr,
        }
    }
}

/// `-div(v rho)` with face velocities averaged from the cell values of `v`.
pub(crate) fn advection(
    grid: &Grid,
    rho: &[f64],
    vx: &[f64],
    vy: &[f64],
    limiter: bool,
    par: Parallelism,
) -> Vec<f64> {
    flux_divergence(grid, par, |axis, l, r| {
        let u = match axis {
            Axis::X => 0.5 * (vx[l] + vx[r]),
            Axis::Y => 0.5 * (vy[l] + vy[r]),
        };
        u * upwind_value(grid, axis, l, r, u, |c| rho[c], limiter)
    })
}

/// `div(kappa grad rho)` with face coefficients averaged from cells.
pub(crate) fn diffusion(grid: &Grid, rho: &[f64], kappa: &[f64], par: Parallelism) -> Vec<f64> {
    let (hx, hy) = (grid.hx(), grid.hy());
    flux_divergence(grid, par, |axis, l, r| {
        let h = if axis == Axis::X { hx } else { hy };
        -0.5 * (kappa[l] + kappa[r]) * (rho[r] - rho[l]) / h
    })
}

/// Centered derivative of `q` along `axis` at cell `k` (one-sided at walls).
pub(crate) fn cell_derivative(grid: &Grid, axis: Axis, k: usize, q: &[f64]) -> f64 {
    let (i, j) = grid.coords(k);
    let (h, lo, hi) = match axis {
        Axis::X => (
            grid.hx(),
            grid.shift_x(i, -1).map(|ii| grid.index(ii, j)),
            grid.shift_x(i, 1).map(|ii| grid.index(ii, j)),
        ),
        Axis::Y => (
            grid.hy(),
            grid.shift_y(j, -1).map(|jj| grid.index(i, jj)),
            grid.shift_y(j, 1).map(|jj| grid.index(i, jj)),
        ),
    };
    match (lo, hi) {
        (Some(a), Some(b)) => (q[b] - q[a]) / (2.0 * h),
        (None, Some(b)) => (q[b] - q[k]) / h,
        (Some(a), None) => (q[k] - q[a]) / h,
        (None, None) => 0.0,
    }
}

/// `div(div(D rho))` for a symmetric cell-wise tensor `D = [[dxx, dxy], [dxy, dyy]]`,
/// in flux form `q = div(D rho)` with `q . n = 0` on walls.
pub(crate) fn tensor_diffusion(
    grid: &Grid,
    rho: &[f64],
    dxx: &[f64],
    dxy: &[f64],
    dyy: &[f64],
    par: Parallelism,
) -> Vec<f64> {
    let pxx: Vec<f64> = rho.iter().zip(dxx).map(|(r, d)| r * d).collect();
    let pxy: Vec<f64> = rho.iter().zip(dxy).map(|(r, d)| r * d).collect();
    let pyy: Vec<f64> = rho.iter().zip(dyy).map(|(r, d)| r * d).collect();
    let (hx, hy) = (grid.hx(), grid.hy());
    flux_divergence(grid, par, |axis, l, r| {
        // flux = -q . n, q_x = d_x(Dxx rho) + d_y(Dxy rho)
        match axis {
            Axis::X => {
                let normal = (pxx[r] - pxx[l]) / hx;
                let cross = 0.5
                    * (cell_derivative(grid, Axis::Y, l, &pxy) + cell_derivative(grid, Axis::Y, r, &pxy));
                -(normal + cross)
            }
            Axis::Y => {
                let normal = (pyy[r] - pyy[l]) / hy;
                let cross = 0.5
                    * (cell_derivative(grid, Axis::X, l, &pxy) + cell_derivative(grid, Axis::X, r, &pxy));
                -(normal + cross)
            }
        }
    })
}
