//! Finite-difference gradient and divergence.

use super::{Grid, ScalarField, VectorField};
use crate::exec::{self, Parallelism};

// Derivative along one axis at index `i` of a line accessed through `at`.
// Centered inside, second-order one-sided at outflow edges.
fn derivative(grid: &Grid, along_x: bool, i: usize, n: usize, h: f64, at: impl Fn(usize) -> f64) -> f64 {
    let shift = |d: i64| {
        if along_x {
            grid.shift_x(i, d)
        } else {
            grid.shift_y(i, d)
        }
    };
    match (shift(-1), shift(1)) {
        (Some(a), Some(b)) => (at(b) - at(a)) / (2.0 * h),
        (None, _) => (-3.0 * at(i) + 4.0 * at(i + 1) - at(i + 2)) / (2.0 * h),
        (_, None) => {
            debug_assert_eq!(i, n - 1);
            (3.0 * at(i) - 4.0 * at(i - 1) + at(i - 2)) / (2.0 * h)
        }
    }
}

fn partials(grid: &Grid, k: usize, f: &[f64]) -> (f64, f64) {
    let (i, j) = grid.coords(k);
    let dx = derivative(grid, true, i, grid.nx, grid.hx(), |ii| f[grid.index(ii, j)]);
    let dy = derivative(grid, false, j, grid.ny, grid.hy(), |jj| f[grid.index(i, jj)]);
    (dx, dy)
}

/// Second-order gradient; exact on affine fields.
pub fn gradient(field: &ScalarField, mode: Parallelism) -> VectorField {
    let g = field.grid;
    let both = exec::map(mode, g.len(), |k| partials(&g, k, &field.data));
    VectorField {
        grid: g,
        x: both.iter().map(|p| p.0).collect(),
        y: both.iter().map(|p| p.1).collect(),
    }
}

/// Second-order divergence with the stencils of [`gradient`].
pub fn divergence(v: &VectorField, mode: Parallelism) -> ScalarField {
    let g = v.grid;
    let data = exec::map(mode, g.len(), |k| {
        let (i, j) = g.coords(k);
        let dx = derivative(&g, true, i, g.nx, g.hx(), |ii| v.x[g.index(ii, j)]);
        let dy = derivative(&g, false, j, g.ny, g.hy(), |jj| v.y[g.index(i, jj)]);
        dx + dy
    });
    ScalarField { grid: g, data }
}
