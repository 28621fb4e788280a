//! Nonlocal alignment flux `J` and its direction `Lambda`.

use super::{nest::STREAKER_HEADING_SIGN, Boundary, FieldError, Grid, ScalarField, VectorField};
use crate::exec::{self, Parallelism};
use crate::kernels::InteractionKernel;

/// Below this fraction of the kernel-weighted source magnitude the flux is
/// treated as zero and `Lambda` is left undefined.
const DEGENERATE_FLUX: f64 = 1e-12;

/// How streakers are weighted relative to the other populations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AlignmentMode {
    /// Every individual counts once.
    Total,
    /// Streakers count `lambda` times.
    #[default]
    StreakerWeighted,
}

impl AlignmentMode {
    pub fn streaker_weight(self, lambda: f64) -> f64 {
        match self {
            AlignmentMode::Total => 1.0,
            AlignmentMode::StreakerWeighted => lambda,
        }
    }
}

/// Gridded inputs of the flux. `heading_flux` is the per-individual flux
/// density `(1/|S|) int theta (sigma_f + sigma_p) d theta` of the
/// velocity-jumping populations.
#[derive(Clone, Copy, Debug)]
pub struct FluxSources<'a> {
    pub heading_flux: Option<&'a VectorField>,
    pub rho_s: Option<&'a ScalarField>,
    pub b: &'a VectorField,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FluxOutput {
    pub j: VectorField,
    /// `J / |J|` where defined, zero elsewhere.
    pub lambda: VectorField,
    pub defined: Vec<bool>,
}

impl FluxOutput {
    fn from_sums(grid: Grid, j: Vec<[f64; 2]>, magnitude: Vec<f64>) -> Self {
        let mut out = FluxOutput {
            j: VectorField::zeros(grid),
            lambda: VectorField::zeros(grid),
            defined: vec![false; grid.len()],
        };
        for k in 0..grid.len() {
            out.j.set(k, j[k]);
            let n = j[k][0].hypot(j[k][1]);
            if magnitude[k] > 0.0 && n > DEGENERATE_FLUX * magnitude[k] {
                out.lambda.set(k, [j[k][0] / n, j[k][1] / n]);
                out.defined[k] = true;
            }
        }
        out
    }

    /// `nu * J`, the magnitude-carrying direction of the inhomogeneous model.
    pub fn scaled(&self, nu: f64) -> VectorField {
        let mut v = self.j.clone();
        v.x.iter_mut().chain(v.y.iter_mut()).for_each(|c| *c *= nu);
        v
    }
}

fn check_lambda(lambda: f64) -> Result<(), FieldError> {
    if lambda < 0.0 || lambda.is_nan() {
        return Err(FieldError::NegativeLambda(lambda));
    }
    Ok(())
}

/// `J(x) = int K(|y - x|) [heading flux + w rho_s (-b)](y) dy` on the grid.
pub fn alignment_flux_grid(
    src: FluxSources<'_>,
    kernel: &InteractionKernel,
    lambda: f64,
    mode: AlignmentMode,
    par: Parallelism,
) -> Result<FluxOutput, FieldError> {
    check_lambda(lambda)?;
    let grid = src.b.grid;
    for g in [src.heading_flux.map(|v| v.grid), src.rho_s.map(|f| f.grid)].into_iter().flatten() {
        grid.check_same(&g)?;
    }
    let w = mode.streaker_weight(lambda) * STREAKER_HEADING_SIGN;
    let source: Vec<[f64; 2]> = (0..grid.len())
        .map(|k| {
            let mut s = src.heading_flux.map_or([0.0; 2], |v| v.at(k));
            if let Some(rho) = src.rho_s {
                s[0] += w * rho.data[k] * src.b.x[k];
                s[1] += w * rho.data[k] * src.b.y[k];
            }
            s
        })
        .collect();
    let stencil = kernel.stencil(grid.hx(), grid.hy());
    let sums = exec::map(par, grid.len(), |k| {
        let (i, j) = grid.coords(k);
        let mut acc = [0.0; 2];
        let mut mag = 0.0;
        for &(di, dj, wt) in &stencil {
            let (Some(ii), Some(jj)) = (grid.shift_x(i, di), grid.shift_y(j, dj)) else {
                continue;
            };
            let s = source[grid.index(ii, jj)];
            acc[0] += wt * s[0];
            acc[1] += wt * s[1];
            mag += wt * s[0].hypot(s[1]);
        }
        (acc, mag)
    });
    Ok(FluxOutput::from_sums(
        grid,
        sums.iter().map(|s| s.0).collect(),
        sums.iter().map(|s| s.1).collect(),
    ))
}

/// Particles sorted by cell, for neighbor gathers.
pub(crate) struct CellBins {
    pub start: Vec<usize>,
    pub order: Vec<usize>,
}

impl CellBins {
    pub fn new(grid: &Grid, points: &[[f64; 2]]) -> Self {
        let cells: Vec<usize> = points
            .iter()
            .map(|p| {
                let (i, j) = grid.locate(*p);
                grid.index(i, j)
            })
            .collect();
        let mut start = vec![0usize; grid.len() + 1];
        for &c in &cells {
            start[c + 1] += 1;
        }
        for k in 0..grid.len() {
            start[k + 1] += start[k];
        }
        let mut fill = start.clone();
        let mut order = vec![0usize; points.len()];
        for (p, &c) in cells.iter().enumerate() {
            order[fill[c]] = p;
            fill[c] += 1;
        }
        CellBins { start, order }
    }

    pub fn in_cell(&self, k: usize) -> &[usize] {
        &self.order[self.start[k]..self.start[k + 1]]
    }
}

// Distinct neighbor indices within `r` of `i` along an axis.
pub(crate) fn axis_neighbors(i: usize, r: i64, n: usize, boundary: Boundary) -> Vec<usize> {
    if boundary == Boundary::Periodic && 2 * r + 1 >= n as i64 {
        return (0..n).collect();
    }
    (-r..=r)
        .filter_map(|d| {
            let t = i as i64 + d;
            match boundary {
                Boundary::Periodic => Some(t.rem_euclid(n as i64) as usize),
                Boundary::Outflow => (0..n as i64).contains(&t).then_some(t as usize),
            }
        })
        .collect()
}

/// Flux at cell centers from individual contributions `v[p]` at `points[p]`:
/// `J(x) = sum_p K(|x_p - x|) v_p`. Callers pass `theta` for velocity-jumping
/// individuals and `w (-b)` for streakers.
pub fn alignment_flux_particles(
    points: &[[f64; 2]],
    v: &[[f64; 2]],
    grid: &Grid,
    kernel: &InteractionKernel,
    par: Parallelism,
) -> Result<FluxOutput, FieldError> {
    if points.len() != v.len() {
        return Err(FieldError::GridMismatch(format!(
            "{} points but {} contributions",
            points.len(),
            v.len()
        )));
    }
    let bins = CellBins::new(grid, points);
    let rc = kernel.cutoff();
    let rx = (rc / grid.hx()).ceil() as i64 + 1;
    let ry = (rc / grid.hy()).ceil() as i64 + 1;
    let sums = exec::map(par, grid.len(), |k| {
        let (i, j) = grid.coords(k);
        let c = grid.center(i, j);
        let mut acc = [0.0; 2];
        let mut mag = 0.0;
        for jj in axis_neighbors(j, ry, grid.ny, grid.boundary) {
            for ii in axis_neighbors(i, rx, grid.nx, grid.boundary) {
                for &p in bins.in_cell(grid.index(ii, jj)) {
                    let d = grid.displacement(c, points[p]);
                    let r = d[0].hypot(d[1]);
                    if r > rc {
                        continue;
                    }
                    let w = kernel.value(r);
                    acc[0] += w * v[p][0];
                    acc[1] += w * v[p][1];
                    mag += w * v[p][0].hypot(v[p][1]);
                }
            }
        }
        (acc, mag)
    });
    Ok(FluxOutput::from_sums(
        *grid,
        sums.iter().map(|s| s.0).collect(),
        sums.iter().map(|s| s.1).collect(),
    ))
}
