//! Gaussian kernel density estimation of particle positions on a grid.

use super::{FieldError, Grid, ScalarField};
use crate::exec::{self, Parallelism};

pub const DEFAULT_BANDWIDTH_CELLS: f64 = 3.0;
const TRUNCATION: f64 = 4.0;

struct Footprint {
    i0: i64,
    j0: i64,
    wx: Vec<f64>,
    wy: Vec<f64>,
    scale: f64,
}

fn axis_weights(x: f64, lo: f64, h: f64, n: usize, reach: i64, bw: f64, periodic: bool) -> (i64, Vec<f64>) {
    let c = ((x - lo) / h).floor() as i64;
    let i0 = c - reach;
    let w = (0..=2 * reach)
        .map(|d| {
            let i = i0 + d;
            if !periodic && !(0..n as i64).contains(&i) {
                return 0.0;
            }
            let dx = lo + (i as f64 + 0.5) * h - x;
            if dx.abs() > TRUNCATION * bw {
                0.0
            } else {
                (-0.5 * (dx / bw).powi(2)).exp()
            }
        })
        .collect();
    (i0, w)
}

/// Density of `weights[p]`-weighted particles at `points[p]`.
///
/// Each particle's truncated Gaussian is renormalized on the grid, so the
/// field integrates to `sum(weights)` up to rounding on every boundary type.
pub fn kde_weighted(
    points: &[[f64; 2]],
    weights: &[f64],
    bandwidth: f64,
    grid: &Grid,
    mode: Parallelism,
) -> Result<ScalarField, FieldError> {
    let floor = 2.0 * grid.hx().max(grid.hy());
    if !(bandwidth >= floor) {
        return Err(FieldError::BandwidthTooSmall { bandwidth, floor });
    }
    if points.len() != weights.len() {
        return Err(FieldError::GridMismatch(format!(
            "{} points but {} weights",
            points.len(),
            weights.len()
        )));
    }
    let mut out = ScalarField::zeros(*grid);
    if points.is_empty() {
        return Ok(out);
    }
    let periodic = grid.boundary == super::Boundary::Periodic;
    let rx = (TRUNCATION * bandwidth / grid.hx()).ceil() as i64;
    let ry = (TRUNCATION * bandwidth / grid.hy()).ceil() as i64;
    let area = grid.cell_area();
    let feet: Vec<Footprint> = exec::map(mode, points.len(), |p| {
        let q = grid.wrap(points[p]);
        let (i0, wx) = axis_weights(q[0], grid.x_min, grid.hx(), grid.nx, rx, bandwidth, periodic);
        let (j0, wy) = axis_weights(q[1], grid.y_min, grid.hy(), grid.ny, ry, bandwidth, periodic);
        let norm = wx.iter().sum::<f64>() * wy.iter().sum::<f64>();
        let scale = if norm > 0.0 { weights[p] / (norm * area) } else { 0.0 };
        Footprint { i0, j0, wx, wy, scale }
    });

    // Row-wise gather lists: (particle, offset into wy), in particle order.
    let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); grid.ny];
    for (p, f) in feet.iter().enumerate() {
        for (d, w) in f.wy.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let j = (f.j0 + d as i64).rem_euclid(grid.ny as i64) as usize;
            rows[j].push((p, d));
        }
    }
    let nx = grid.nx as i64;
    exec::for_chunks(mode, &mut out.data, grid.nx, |j, row| {
        for &(p, d) in &rows[j] {
            let f = &feet[p];
            let wy = f.wy[d] * f.scale;
            for (e, wx) in f.wx.iter().enumerate() {
                if *wx != 0.0 {
                    row[(f.i0 + e as i64).rem_euclid(nx) as usize] += wy * wx;
                }
            }
        }
    });
    Ok(out)
}

/// Number density of the particles: every particle carries unit mass.
pub fn kde_density(
    points: &[[f64; 2]],
    bandwidth: f64,
    grid: &Grid,
    mode: Parallelism,
) -> Result<ScalarField, FieldError> {
    kde_weighted(points, &vec![1.0; points.len()], bandwidth, grid, mode)
}
