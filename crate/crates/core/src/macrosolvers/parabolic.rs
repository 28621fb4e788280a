//! Drift-diffusion limit.
//!
//! Streakers are slaved to the stationary balance along the nest field,
//! computed by a characteristic sweep each step. The total leader density
//! `rho_l = rho_p + rho_s` is the evolved leader unknown, so leader mass is
//! conserved by construction; `rho_p = rho_l - rho_s`.

use super::sweep::sweep_stationary;
use super::transport::{advection, diffusion, tensor_diffusion};
use super::{check_dt, turn_onto, AlignmentSource, KernelMode, MacroState, SolverError, SolverSetup, StepDiagnostics};
use crate::exec;
use crate::fields::{ScalarField, VectorField, STREAKER_HEADING_SIGN};
use crate::kernels::coefficients_inhomogeneous_fixed;
use crate::microsim::build_switch_rates;

/// Quadrature nodes for the per-cell inhomogeneous coefficients.
pub(crate) const INHOMOGENEOUS_NODES: usize = 256;

const SWEEP_TOL: f64 = 1e-14;

pub struct ParabolicSolver {
    pub setup: SolverSetup,
    /// `B0` mean direction turned onto `b`, per cell.
    b0_mean: Vec<[f64; 2]>,
    /// Mean direction of the streaker re-entry density, per cell.
    switch_mean: Vec<[f64; 2]>,
    /// `n c_p D` per cell as `(xx, xy, yy)`.
    dxx: Vec<f64>,
    dxy: Vec<f64>,
    dyy: Vec<f64>,
    max_diffusion: f64,
}

impl ParabolicSolver {
    pub fn new(setup: SolverSetup) -> Result<Self, SolverError> {
        setup.validate()?;
        let g = setup.grid;
        let c = &setup.coeffs;
        let n = c.dim.n() as f64;
        let c_p = setup.params.c_p;
        let area = c.dim.surface_area();
        let h = &c.hyperbolic;
        // int theta A = |S| B0_mean - streaker drift per rate
        let a_mean = [
            area * c.b0.mean[0] - h.streaker_drift_per_rate[0],
            area * c.b0.mean[1] - h.streaker_drift_per_rate[1],
        ];
        let trace = c.b0.d_tensor[0][0] + c.b0.d_tensor[1][1] + c.b0.d_tensor[2][2];
        let mut out = ParabolicSolver {
            b0_mean: Vec::with_capacity(g.len()),
            switch_mean: Vec::with_capacity(g.len()),
            dxx: Vec::with_capacity(g.len()),
            dxy: Vec::with_capacity(g.len()),
            dyy: Vec::with_capacity(g.len()),
            max_diffusion: 0.0,
            setup,
        };
        for k in 0..g.len() {
            let b = out.setup.nest.b.at(k);
            let (m, d) = if b[0].hypot(b[1]) > 0.0 {
                out.switch_mean.push(turn_onto(a_mean, b));
                out.setup.coeffs.b0.rotated(b)
            } else {
                // no preferred axis inside the nest exclusion: isotropic
                out.switch_mean.push([0.0; 2]);
                ([0.0; 2], [[0.5 * trace, 0.0], [0.0, 0.5 * trace]])
            };
            out.b0_mean.push(m);
            out.dxx.push(n * c_p * d[0][0]);
            out.dxy.push(n * c_p * d[0][1]);
            out.dyy.push(n * c_p * d[1][1]);
        }
        out.max_diffusion = n * c_p * out.setup.coeffs.b0.max_diffusion().max(0.5 * trace);
        Ok(out)
    }

    /// Follower drift velocity and the alignment field behind it.
    fn follower_drift(&self, state: &MacroState) -> Result<(VectorField, VectorField), SolverError> {
        let s = &self.setup;
        let g = s.grid;
        let p = &s.params;
        let c = &s.coeffs;
        let mut lambda = VectorField::zeros(g);
        match s.alignment {
            AlignmentSource::Zero => {}
            AlignmentSource::Fixed(d) => {
                let l = d[0].hypot(d[1]);
                if l > 0.0 {
                    lambda = VectorField::constant(g, [d[0] / l, d[1] / l]);
                }
            }
            AlignmentSource::Flux => {
                // leading-order flux density of the passive leaders; the
                // followers are isotropic at leading order
                let mut heading = VectorField::zeros(g);
                for k in 0..g.len() {
                    let m = self.b0_mean[k];
                    let r = state.rho_p.data[k];
                    heading.set(k, [m[0] * r, m[1] * r]);
                }
                let flux = s.flux(Some(&heading), Some(&state.rho_s))?;
                lambda = match s.scaling.kernel_mode {
                    KernelMode::Homogeneous => flux.lambda,
                    KernelMode::Inhomogeneous => flux.scaled(s.scaling.nu),
                };
            }
        }
        let drift = match s.scaling.kernel_mode {
            KernelMode::Homogeneous => {
                let u = p.c_f * c.d_align;
                VectorField {
                    grid: g,
                    x: lambda.x.iter().map(|v| u * v).collect(),
                    y: lambda.y.iter().map(|v| u * v).collect(),
                }
            }
            KernelMode::Inhomogeneous => {
                let n = c.dim.n() as f64;
                let base = p.c_f * (1.0 - p.zeta) / (n * (1.0 - p.zeta * c.nu1));
                let phi = &s.kernels.alignment;
                let z: Vec<f64> = exec::map(s.par, g.len(), |k| {
                    let l = lambda.at(k);
                    coefficients_inhomogeneous_fixed(phi, l[0].hypot(l[1]), INHOMOGENEOUS_NODES).z_bar
                });
                VectorField {
                    grid: g,
                    x: (0..g.len()).map(|k| base * z[k] * lambda.x[k]).collect(),
                    y: (0..g.len()).map(|k| base * z[k] * lambda.y[k]).collect(),
                }
            }
        };
        Ok((drift, lambda))
    }

    fn max_rate(&self) -> f64 {
        let p = &self.setup.params;
        p.r0 + p.rates.r_peak
    }

    /// Largest stable step for the given state.
    pub fn stable_dt(&self, state: &MacroState) -> Result<f64, SolverError> {
        let (drift, _) = self.follower_drift(state)?;
        Ok(self.stable_dt_with(&drift))
    }

    fn stable_dt_with(&self, drift: &VectorField) -> f64 {
        let s = &self.setup;
        let g = &s.grid;
        let p = &s.params;
        let n = s.coeffs.dim.n() as f64;
        let u_f = drift.norm().max();
        let passive = n * p.c_p * self.max_rate();
        let u = u_f.max(p.c_s).max(passive);
        let kappa = (p.c_f * s.coeffs.c_f_diff).max(self.max_diffusion);
        let lim = if s.limiter { 2.0 } else { 1.0 };
        let inv = lim * u * (1.0 / g.hx() + 1.0 / g.hy()) + 2.0 * kappa * (1.0 / g.hx().powi(2) + 1.0 / g.hy().powi(2));
        if inv > 0.0 {
            1.0 / inv
        } else {
            f64::INFINITY
        }
    }

    /// Stationary streaker density for the leader density `rho_l`.
    pub fn streakers(&self, rho_f: &ScalarField, rho_l: &ScalarField, initial: Option<&[f64]>) -> Result<ScalarField, SolverError> {
        let s = &self.setup;
        let g = s.grid;
        let rates = build_switch_rates(s.frozen_rho_f.as_ref().unwrap_or(rho_f), &s.nest.b, &s.params, s.par);
        let c_s = STREAKER_HEADING_SIGN * s.params.c_s;
        let vx: Vec<f64> = s.nest.b.x.iter().map(|b| c_s * b).collect();
        let vy: Vec<f64> = s.nest.b.y.iter().map(|b| c_s * b).collect();
        let absorb: Vec<f64> = (0..g.len()).map(|k| rates.r_sp.data[k] + rates.r_ps.data[k]).collect();
        let source: Vec<f64> = (0..g.len()).map(|k| rates.r_ps.data[k] * rho_l.data[k]).collect();
        let (rho, _) = sweep_stationary(&g, &s.nest, &vx, &vy, &absorb, &source, SWEEP_TOL, initial)?;
        Ok(ScalarField { grid: g, data: rho })
    }

    /// One explicit step.
    pub fn step(&self, state: &mut MacroState, dt: f64) -> Result<StepDiagnostics, SolverError> {
        let s = &self.setup;
        let g = s.grid;
        g.check_same(&state.rho_f.grid)?;
        let p = &s.params;
        let n = s.coeffs.dim.n() as f64;
        let par = s.par;

        let mut rho_l = state.rho_p.clone();
        rho_l.data.iter_mut().zip(&state.rho_s.data).for_each(|(a, b)| *a += b);
        let has_leaders = rho_l.data.iter().any(|v| *v != 0.0);
        if has_leaders {
            state.rho_s = self.streakers(&state.rho_f, &rho_l, Some(&state.rho_s.data))?;
            for k in 0..g.len() {
                state.rho_p.data[k] = rho_l.data[k] - state.rho_s.data[k];
            }
        }

        let (drift, lambda) = self.follower_drift(state)?;
        let limit = self.stable_dt_with(&drift);
        check_dt(dt, limit)?;

        let kappa = vec![p.c_f * s.coeffs.c_f_diff; g.len()];
        let adv = advection(&g, &state.rho_f.data, &drift.x, &drift.y, s.limiter, par);
        let dif = diffusion(&g, &state.rho_f.data, &kappa, par);
        for k in 0..g.len() {
            state.rho_f.data[k] += dt * (adv[k] + dif[k]);
        }

        if has_leaders {
            let rates = build_switch_rates(s.frozen_rho_f.as_ref().unwrap_or(&state.rho_f), &s.nest.b, p, par);
            let c_s = STREAKER_HEADING_SIGN * p.c_s;
            let sx: Vec<f64> = s.nest.b.x.iter().map(|b| c_s * b).collect();
            let sy: Vec<f64> = s.nest.b.y.iter().map(|b| c_s * b).collect();
            let streak = advection(&g, &state.rho_s.data, &sx, &sy, s.limiter, par);
            let rx: Vec<f64> = (0..g.len()).map(|k| n * p.c_p * rates.r_sp.data[k] * self.switch_mean[k][0]).collect();
            let ry: Vec<f64> = (0..g.len()).map(|k| n * p.c_p * rates.r_sp.data[k] * self.switch_mean[k][1]).collect();
            let turning = advection(&g, &state.rho_s.data, &rx, &ry, s.limiter, par);
            let bx: Vec<f64> = (0..g.len()).map(|k| n * p.c_p * rates.r_ps.data[k] * self.b0_mean[k][0]).collect();
            let by: Vec<f64> = (0..g.len()).map(|k| n * p.c_p * rates.r_ps.data[k] * self.b0_mean[k][1]).collect();
            let back = advection(&g, &state.rho_p.data, &bx, &by, s.limiter, par);
            let spread = tensor_diffusion(&g, &state.rho_p.data, &self.dxx, &self.dxy, &self.dyy, par);
            for k in 0..g.len() {
                rho_l.data[k] += dt * (streak[k] + turning[k] + back[k] + spread[k]);
                state.rho_p.data[k] = rho_l.data[k] - state.rho_s.data[k];
            }
        }
        state.lambda = lambda;
        state.t += dt;

        // The follower update is positive under the step bound. The leader
        // split rho_l - rho_s is not, so leaders are only reported.
        let min = state.rho_f.min().min(rho_l.min());
        let f_min = state.rho_f.min();
        let tol = 1e-12 * state.rho_f.max().max(f64::MIN_POSITIVE);
        if f_min < -tol {
            let cell = state.rho_f.data.iter().position(|v| *v == f_min).unwrap_or(0);
            return Err(SolverError::NegativeDensity { value: f_min, cell, tol });
        }
        Ok(StepDiagnostics {
            t: state.t,
            mass_f: state.follower_mass(),
            mass_l: state.leader_mass(),
            min_density: min,
            cfl: dt / limit,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Parallelism;
    use crate::fields::{build_nest_field, Boundary, Grid, NestKind};
    use crate::kernels::{A1Variant, FollowerClosure, KernelSet};
    use crate::macrosolvers::ScalingParams;
    use crate::params::ModelParams;

    fn setup(grid: Grid, alignment: AlignmentSource, mode: KernelMode) -> SolverSetup {
        let params = ModelParams::default();
        let kernels = KernelSet::planar_default();
        let coeffs = kernels
            .coefficients(&params, FollowerClosure::KineticConsistent, A1Variant::default())
            .unwrap();
        SolverSetup {
            grid,
            nest: build_nest_field(&grid, NestKind::Point([0.0, -3.5]), None).unwrap(),
            params,
            kernels,
            coeffs,
            scaling: ScalingParams { kernel_mode: mode, ..Default::default() },
            alignment_mode: Default::default(),
            alignment,
            frozen_rho_f: None,
            limiter: false,
            par: Parallelism::Rayon,
        }
    }

    fn blob(g: Grid, c: [f64; 2], s: f64, a: f64) -> ScalarField {
        ScalarField::from_fn(g, |p| a * (-((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)) / (2.0 * s * s)).exp())
    }

    #[test]
    fn constant_density_with_constant_drift_is_stationary() {
        let g = Grid::square(16, 2.0, Boundary::Periodic).unwrap();
        let solver = ParabolicSolver::new(setup(g, AlignmentSource::Fixed([1.0, 1.0]), KernelMode::Homogeneous)).unwrap();
        let z = ScalarField::zeros(g);
        let mut st = MacroState::new(ScalarField::constant(g, 0.7), z.clone(), z);
        let dt = solver.stable_dt(&st).unwrap();
        for _ in 0..10 {
            solver.step(&mut st, dt).unwrap();
        }
        assert!(st.rho_f.data.iter().all(|v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn masses_are_conserved_with_leaders() {
        for boundary in [Boundary::Periodic, Boundary::Outflow] {
            let g = Grid::square(32, 4.0, boundary).unwrap();
            let solver = ParabolicSolver::new(setup(g, AlignmentSource::Flux, KernelMode::Homogeneous)).unwrap();
            let mut st = MacroState::new(
                blob(g, [0.0, 0.5], 1.0, 1.0),
                blob(g, [0.0, 0.5], 0.8, 0.04),
                ScalarField::zeros(g),
            );
            let (mf, ml) = (st.follower_mass(), st.leader_mass());
            let dt = 0.9 * solver.stable_dt(&st).unwrap();
            for _ in 0..40 {
                solver.step(&mut st, dt).unwrap();
            }
            assert!(((st.follower_mass() - mf) / mf).abs() < 1e-12);
            assert!(((st.leader_mass() - ml) / ml).abs() < 1e-12);
            assert!(st.rho_s.total() > 0.0);
        }
    }

    #[test]
    fn inhomogeneous_without_flux_is_pure_diffusion() {
        let g = Grid::square(24, 3.0, Boundary::Periodic).unwrap();
        let z = ScalarField::zeros(g);
        let rho = blob(g, [0.3, 0.0], 0.7, 1.0);
        let a = ParabolicSolver::new(setup(g, AlignmentSource::Flux, KernelMode::Inhomogeneous)).unwrap();
        let b = ParabolicSolver::new(setup(g, AlignmentSource::Zero, KernelMode::Homogeneous)).unwrap();
        let mut sa = MacroState::new(rho.clone(), z.clone(), z.clone());
        let mut sb = MacroState::new(rho, z.clone(), z);
        let dt = 0.5 * b.stable_dt(&sb).unwrap();
        for _ in 0..20 {
            a.step(&mut sa, dt).unwrap();
            b.step(&mut sb, dt).unwrap();
        }
        assert_eq!(sa.rho_f, sb.rho_f);
    }

    #[test]
    fn rejects_steps_above_the_stability_bound() {
        let g = Grid::square(16, 2.0, Boundary::Periodic).unwrap();
        let solver = ParabolicSolver::new(setup(g, AlignmentSource::Zero, KernelMode::Homogeneous)).unwrap();
        let z = ScalarField::zeros(g);
        let mut st = MacroState::new(ScalarField::constant(g, 1.0), z.clone(), z);
        let dt = solver.stable_dt(&st).unwrap();
        assert!(matches!(solver.step(&mut st, 1.5 * dt), Err(SolverError::Cfl { .. })));
    }
}
