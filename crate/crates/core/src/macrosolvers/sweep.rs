//! Stationary streaker balance `div(v rho) = s - a rho`, solved by
//! Gauss-Seidel sweeps ordered along the streaker velocity.

use super::transport::Axis;
use super::SolverError;
use crate::fields::{Grid, NestField, NestKind};

const MAX_SWEEPS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepReport {
    pub sweeps: usize,
    pub change: f64,
}

/// Solves the first-order upwind discretization of `div(v rho) + a rho = s`.
///
/// `v` is given at cell centers; face velocities are averages as in the
/// time-dependent transport, so a converged sweep is a steady state of it.
/// Cells are visited from upstream to downstream (streakers fly against
/// `b`), which makes one sweep exact when characteristics do not wrap.
#[allow(clippy::too_many_arguments)]
pub fn sweep_stationary(
    grid: &Grid,
    nest: &NestField,
    vx: &[f64],
    vy: &[f64],
    absorb: &[f64],
    source: &[f64],
    tol: f64,
    initial: Option<&[f64]>,
) -> Result<(Vec<f64>, SweepReport), SolverError> {
    let n = grid.len();
    let mut order: Vec<usize> = (0..n).collect();
    let potential: Vec<f64> = (0..n)
        .map(|k| {
            let c = grid.center_of(k);
            match nest.kind {
                NestKind::Point(x) => {
                    let d = grid.displacement(x, c);
                    d[0].hypot(d[1])
                }
                NestKind::Uniform(d) => c[0] * d[0] + c[1] * d[1],
            }
        })
        .collect();
    order.sort_by(|&a, &b| potential[b].total_cmp(&potential[a]).then(a.cmp(&b)));

    let (hx, hy) = (grid.hx(), grid.hy());
    // outward face velocities and neighbor per cell: (neighbor, u_out / h)
    let faces: Vec<Vec<(usize, f64)>> = (0..n)
        .map(|k| {
            let (i, j) = grid.coords(k);
            let mut f = Vec::with_capacity(4);
            for (axis, d) in [(Axis::X, 1i64), (Axis::X, -1), (Axis::Y, 1), (Axis::Y, -1)] {
                let nb = match axis {
                    Axis::X => grid.shift_x(i, d).map(|ii| grid.index(ii, j)),
                    Axis::Y => grid.shift_y(j, d).map(|jj| grid.index(i, jj)),
                };
                if let Some(nb) = nb {
                    let (u, h) = match axis {
                        Axis::X => (0.5 * (vx[k] + vx[nb]), hx),
                        Axis::Y => (0.5 * (vy[k] + vy[nb]), hy),
                    };
                    f.push((nb, d as f64 * u / h));
                }
            }
            f
        })
        .collect();
    for k in 0..n {
        let out: f64 = faces[k].iter().map(|f| f.1.max(0.0)).sum();
        if absorb[k] + out <= 0.0 && source[k] > 0.0 {
            return Err(SolverError::InvalidSetup(format!(
                "cell {k} has a source but neither absorption nor outflow"
            )));
        }
    }

    let mut rho = initial.map_or_else(|| vec![0.0; n], |r| r.to_vec());
    let mut change = f64::INFINITY;
    for sweep in 1..=MAX_SWEEPS {
        change = 0.0;
        let mut scale = 0.0f64;
        for &k in &order {
            let mut diag = absorb[k];
            let mut rhs = source[k];
            for &(nb, u) in &faces[k] {
                if u > 0.0 {
                    diag += u;
                } else {
                    rhs -= u * rho[nb];
                }
            }
            let new = if diag > 0.0 { rhs / diag } else { 0.0 };
            change = change.max((new - rho[k]).abs());
            scale = scale.max(new.abs());
            rho[k] = new;
        }
        if change <= tol * scale.max(f64::MIN_POSITIVE) {
            return Ok((rho, SweepReport { sweeps: sweep, change }));
        }
    }
    Err(SolverError::SweepNonConvergence {
        iterations: MAX_SWEEPS,
        change,
    })
}
