//! Front/rear conversion rates between streakers and passive leaders.

use crate::exec::{self, Parallelism};
use crate::fields::{gradient, ScalarField, VectorField};
use crate::params::ModelParams;

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchRates {
    /// Streaker to passive, concentrated at the front edge.
    pub r_sp: ScalarField,
    /// Passive to streaker, concentrated at the rear edge.
    pub r_ps: ScalarField,
    pub grad_rho_f: VectorField,
}

/// `R_sp = r0 + r_peak ramp(+(grad rho_f . b)/s) inside`, `R_ps` mirrored.
///
/// `s = gradient_scale * max |grad rho_f . b|` and a cell is inside the swarm
/// when `rho_f >= inside_fraction * max rho_f`. Both thresholds are relative,
/// so rates do not change when all densities are scaled.
pub fn build_switch_rates(
    rho_f: &ScalarField,
    b: &VectorField,
    params: &ModelParams,
    par: Parallelism,
) -> SwitchRates {
    let grid = rho_f.grid;
    let grad = gradient(rho_f, par);
    let along: Vec<f64> = (0..grid.len())
        .map(|k| grad.x[k] * b.x[k] + grad.y[k] * b.y[k])
        .collect();
    let shape = &params.rates;
    let scale = shape.gradient_scale * along.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cut = shape.inside_fraction * rho_f.max().max(0.0);
    let rate = |k: usize, sign: f64| {
        let inside = rho_f.data[k] > 0.0 && rho_f.data[k] >= cut;
        if !inside || scale <= 0.0 {
            return params.r0;
        }
        params.r0 + shape.r_peak * (sign * along[k] / scale).clamp(0.0, 1.0)
    };
    SwitchRates {
        r_sp: ScalarField {
            grid,
            data: exec::map(par, grid.len(), |k| rate(k, 1.0)),
        },
        r_ps: ScalarField {
            grid,
            data: exec::map(par, grid.len(), |k| rate(k, -1.0)),
        },
        grad_rho_f: grad,
    }
}
