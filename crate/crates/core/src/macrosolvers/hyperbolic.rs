//! Hyperbolic limit: transport of leaders and followers plus the evolution
//! of the follower direction field.

use super::parabolic::INHOMOGENEOUS_NODES;
use super::transport::{advection, cell_derivative, diffusion, Axis};
use super::{check_dt, turn_onto, AlignmentSource, KernelMode, MacroState, SolverError, SolverSetup, StepDiagnostics};
use crate::exec;
use crate::fields::{Grid, ScalarField, VectorField, STREAKER_HEADING_SIGN};
use crate::kernels::{coefficients_inhomogeneous_fixed, InhomogeneousCoefficients};
use crate::microsim::build_switch_rates;

/// The direction update is frozen where `rho_f` is below this fraction of its mean.
pub const RHO_FLOOR_FRACTION: f64 = 1e-12;

pub struct HyperbolicSolver {
    pub setup: SolverSetup,
    /// `n c_p B0_mean` turned onto `b`, per cell.
    passive_velocity: Vec<[f64; 2]>,
    /// Streaker drift per rate of the first-order correction, per cell.
    correction_drift: Vec<[f64; 2]>,
}

// Per-cell coefficients of the follower system.
#[derive(Clone, Copy)]
struct Local {
    /// Multiplies `(1 - zeta)` in the time derivative and the transport speed.
    z: f64,
    c1: f64,
    c2: f64,
}

impl HyperbolicSolver {
    pub fn new(setup: SolverSetup) -> Result<Self, SolverError> {
        setup.validate()?;
        let c = &setup.coeffs;
        let p = &setup.params;
        if setup.scaling.kernel_mode == KernelMode::Homogeneous && c.z * (1.0 - p.zeta) == 0.0 {
            return Err(SolverError::InvalidSetup(
                "z (1 - zeta) vanishes: the direction equation is singular".into(),
            ));
        }
        if setup.scaling.epsilon_corrections && c.hyperbolic.q1 < 0.0 {
            return Err(SolverError::InvalidSetup(format!(
                "first-order correction has negative diffusivity Q1 = {}",
                c.hyperbolic.q1
            )));
        }
        let n = c.dim.n() as f64;
        let m = [n * p.c_p * c.b0.mean[0], n * p.c_p * c.b0.mean[1]];
        let d = c.hyperbolic.streaker_drift_per_rate;
        let b = &setup.nest.b;
        let passive_velocity = (0..b.grid.len()).map(|k| turn_onto(m, b.at(k))).collect();
        let correction_drift = (0..b.grid.len()).map(|k| turn_onto([d[0], d[1]], b.at(k))).collect();
        Ok(HyperbolicSolver {
            setup,
            passive_velocity,
            correction_drift,
        })
    }

    fn local(&self, lambda: [f64; 2]) -> Local {
        let s = &self.setup;
        let c = &s.coeffs;
        match s.scaling.kernel_mode {
            KernelMode::Homogeneous => Local { z: c.z, c1: c.c1, c2: c.c2 },
            KernelMode::Inhomogeneous => {
                let p = &s.params;
                let InhomogeneousCoefficients { z_bar, a1_bar, a3_bar, .. } = coefficients_inhomogeneous_fixed(
                    &s.kernels.alignment,
                    lambda[0].hypot(lambda[1]),
                    INHOMOGENEOUS_NODES,
                );
                let n = c.dim.n() as f64;
                Local {
                    z: z_bar,
                    c1: p.c_f * (1.0 - p.zeta) * a3_bar,
                    c2: p.c_f * (1.0 - p.zeta) * a1_bar + p.c_f * p.zeta * c.dim.surface_area() / n,
                }
            }
        }
    }

    /// Direction field the step starts from: prescribed for `Fixed` and
    /// `Zero`, taken from the state for `Flux` once it has been initialized.
    pub fn initial_lambda(&self, state: &MacroState) -> Result<VectorField, SolverError> {
        let s = &self.setup;
        let g = s.grid;
        match s.alignment {
            AlignmentSource::Zero => Ok(VectorField::zeros(g)),
            AlignmentSource::Fixed(d) => {
                let l = d[0].hypot(d[1]);
                Ok(if l > 0.0 {
                    VectorField::constant(g, [d[0] / l, d[1] / l])
                } else {
                    VectorField::zeros(g)
                })
            }
            AlignmentSource::Flux => {
                if state.lambda.x.iter().chain(&state.lambda.y).any(|v| *v != 0.0) {
                    return Ok(state.lambda.clone());
                }
                let mut heading = VectorField::zeros(g);
                for k in 0..g.len() {
                    let m = self.passive_velocity[k];
                    // passive flux density per individual, B0_mean rho_p
                    let n = s.coeffs.dim.n() as f64 * s.params.c_p;
                    let r = if n > 0.0 { state.rho_p.data[k] / n } else { 0.0 };
                    heading.set(k, [m[0] * r, m[1] * r]);
                }
                let flux = s.flux(Some(&heading), Some(&state.rho_s))?;
                match s.scaling.kernel_mode {
                    KernelMode::Inhomogeneous => Ok(flux.scaled(s.scaling.nu)),
                    KernelMode::Homogeneous => {
                        let mut l = flux.lambda;
                        // fill cells without a flux direction with the mean direction
                        let (mut sx, mut sy) = (0.0, 0.0);
                        for k in 0..g.len() {
                            if flux.defined[k] {
                                sx += l.x[k];
                                sy += l.y[k];
                            }
                        }
                        let n = sx.hypot(sy);
                        if n == 0.0 {
                            return Err(SolverError::InvalidSetup(
                                "alignment flux vanishes everywhere; no initial direction".into(),
                            ));
                        }
                        for k in 0..g.len() {
                            if !flux.defined[k] {
                                l.set(k, [sx / n, sy / n]);
                            }
                        }
                        Ok(l)
                    }
                }
            }
        }
    }

    fn max_rate(&self) -> f64 {
        let p = &self.setup.params;
        p.r0 + p.rates.r_peak
    }

    /// Largest stable step for the given state.
    pub fn stable_dt(&self, state: &MacroState) -> Result<f64, SolverError> {
        let lambda = self.initial_lambda(state)?;
        Ok(self.stable_dt_with(&lambda))
    }

    fn stable_dt_with(&self, lambda: &VectorField) -> f64 {
        let s = &self.setup;
        let g = &s.grid;
        let p = &s.params;
        let mut u = p.c_s;
        for v in &self.passive_velocity {
            u = u.max(v[0].hypot(v[1]));
        }
        let evolve = s.alignment == AlignmentSource::Flux;
        let speeds: Vec<f64> = exec::map(s.par, g.len(), |k| {
            let l = lambda.at(k);
            let ln = l[0].hypot(l[1]);
            let c = self.local(l);
            let zf = c.z * (1.0 - p.zeta);
            let mut v = p.c_f * zf * ln;
            if evolve && zf > 0.0 {
                v = v.max(c.c1.abs() * ln / zf).max((p.c_f * c.c2.abs() * ln.max(1.0)).sqrt());
            }
            v
        });
        u = speeds.into_iter().fold(u, f64::max);
        let lim = if s.limiter { 2.0 } else { 1.0 };
        let mut inv = lim * u * (1.0 / g.hx() + 1.0 / g.hy()) + self.max_rate();
        if s.scaling.epsilon_corrections {
            let n = s.coeffs.dim.n() as f64;
            let e = s.scaling.epsilon * n * p.c_p;
            let kappa = e * s.coeffs.hyperbolic.q1;
            let d = self.correction_drift.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
            inv += 2.0 * kappa * (1.0 / g.hx().powi(2) + 1.0 / g.hy().powi(2))
                + e * d * self.max_rate() * (1.0 / g.hx() + 1.0 / g.hy());
        }
        if inv > 0.0 {
            1.0 / inv
        } else {
            f64::INFINITY
        }
    }

    // Upwind derivative of `q` along `axis` for transport speed `a`.
    fn upwind_derivative(g: &Grid, axis: Axis, k: usize, a: f64, q: &[f64]) -> f64 {
        let (i, j) = g.coords(k);
        let (h, lo, hi) = match axis {
            Axis::X => (
                g.hx(),
                g.shift_x(i, -1).map(|ii| g.index(ii, j)),
                g.shift_x(i, 1).map(|ii| g.index(ii, j)),
            ),
            Axis::Y => (
                g.hy(),
                g.shift_y(j, -1).map(|jj| g.index(i, jj)),
                g.shift_y(j, 1).map(|jj| g.index(i, jj)),
            ),
        };
        match (a >= 0.0, lo, hi) {
            (true, Some(l), _) => (q[k] - q[l]) / h,
            (false, _, Some(r)) => (q[r] - q[k]) / h,
            _ => 0.0,
        }
    }

    /// One explicit step.
    pub fn step(&self, state: &mut MacroState, dt: f64) -> Result<StepDiagnostics, SolverError> {
        let s = &self.setup;
        let g = s.grid;
        g.check_same(&state.rho_f.grid)?;
        let p = &s.params;
        let par = s.par;
        let lambda = self.initial_lambda(state)?;
        let limit = self.stable_dt_with(&lambda);
        check_dt(dt, limit)?;

        let rates = build_switch_rates(s.frozen_rho_f.as_ref().unwrap_or(&state.rho_f), &s.nest.b, p, par);
        let locals: Vec<Local> = exec::map(par, g.len(), |k| self.local(lambda.at(k)));

        // followers
        let speed: Vec<f64> = locals.iter().map(|c| p.c_f * c.z * (1.0 - p.zeta)).collect();
        let fx: Vec<f64> = (0..g.len()).map(|k| speed[k] * lambda.x[k]).collect();
        let fy: Vec<f64> = (0..g.len()).map(|k| speed[k] * lambda.y[k]).collect();
        let adv_f = advection(&g, &state.rho_f.data, &fx, &fy, s.limiter, par);

        // direction field
        let new_lambda = if s.alignment == AlignmentSource::Flux {
            let floor = RHO_FLOOR_FRACTION * state.rho_f.total() / (g.width() * g.height());
            let homogeneous = s.scaling.kernel_mode == KernelMode::Homogeneous;
            let rho = &state.rho_f.data;
            let cells = exec::map(par, g.len(), |k| {
                let l = lambda.at(k);
                let c = locals[k];
                let zf = c.z * (1.0 - p.zeta);
                if rho[k] < floor || zf <= 0.0 {
                    return l;
                }
                let a = [c.c1 * l[0] / zf, c.c1 * l[1] / zf];
                let mut convect = [0.0; 2];
                for (comp, q) in [&lambda.x, &lambda.y].into_iter().enumerate() {
                    convect[comp] = a[0] * Self::upwind_derivative(&g, Axis::X, k, a[0], q)
                        + a[1] * Self::upwind_derivative(&g, Axis::Y, k, a[1], q);
                }
                let grad = [
                    cell_derivative(&g, Axis::X, k, rho) / rho[k],
                    cell_derivative(&g, Axis::Y, k, rho) / rho[k],
                ];
                let mut d = [
                    -dt * (convect[0] + c.c2 * grad[0] / zf),
                    -dt * (convect[1] + c.c2 * grad[1] / zf),
                ];
                let ln = l[0].hypot(l[1]);
                if ln > 0.0 {
                    let e = [l[0] / ln, l[1] / ln];
                    let along = d[0] * e[0] + d[1] * e[1];
                    d = [d[0] - along * e[0], d[1] - along * e[1]];
                }
                let v = [l[0] + d[0], l[1] + d[1]];
                if homogeneous {
                    let vn = v[0].hypot(v[1]);
                    if vn > 0.0 { [v[0] / vn, v[1] / vn] } else { l }
                } else {
                    v
                }
            });
            let mut out = VectorField::zeros(g);
            for (k, v) in cells.into_iter().enumerate() {
                out.set(k, v);
            }
            out
        } else {
            lambda
        };

        // leaders
        let c_s = STREAKER_HEADING_SIGN * p.c_s;
        let sx: Vec<f64> = s.nest.b.x.iter().map(|b| c_s * b).collect();
        let sy: Vec<f64> = s.nest.b.y.iter().map(|b| c_s * b).collect();
        let adv_s = advection(&g, &state.rho_s.data, &sx, &sy, s.limiter, par);
        let px: Vec<f64> = self.passive_velocity.iter().map(|v| v[0]).collect();
        let py: Vec<f64> = self.passive_velocity.iter().map(|v| v[1]).collect();
        let adv_p = advection(&g, &state.rho_p.data, &px, &py, s.limiter, par);
        let correction = if s.scaling.epsilon_corrections {
            let e = s.scaling.epsilon * s.coeffs.dim.n() as f64 * p.c_p;
            let kappa = vec![e * s.coeffs.hyperbolic.q1; g.len()];
            let spread = diffusion(&g, &state.rho_p.data, &kappa, par);
            // +div(X rho_s) is transport with velocity -X
            let cx: Vec<f64> = (0..g.len())
                .map(|k| -e * rates.r_sp.data[k] * self.correction_drift[k][0])
                .collect();
            let cy: Vec<f64> = (0..g.len())
                .map(|k| -e * rates.r_sp.data[k] * self.correction_drift[k][1])
                .collect();
            let drift = advection(&g, &state.rho_s.data, &cx, &cy, s.limiter, par);
            spread.iter().zip(&drift).map(|(a, b)| a + b).collect()
        } else {
            vec![0.0; g.len()]
        };
        for k in 0..g.len() {
            let exch = rates.r_sp.data[k] * state.rho_s.data[k] - rates.r_ps.data[k] * state.rho_p.data[k];
            state.rho_s.data[k] += dt * (adv_s[k] - exch);
            state.rho_p.data[k] += dt * (adv_p[k] + exch + correction[k]);
            state.rho_f.data[k] += dt * adv_f[k];
        }
        state.lambda = new_lambda;
        state.t += dt;

        let all: [&ScalarField; 3] = [&state.rho_f, &state.rho_p, &state.rho_s];
        let min = super::min_of(&all);
        // first-order upwind with exchange is positive under the step bound;
        // the correction moves streaker mass into the passive equation and is not
        let checked = if s.scaling.epsilon_corrections { &all[..1] } else { &all[..] };
        let low = super::min_of(checked);
        let tol = 1e-12 * checked.iter().map(|f| f.max()).fold(f64::MIN_POSITIVE, f64::max);
        if low < -tol {
            let cell = checked
                .iter()
                .find_map(|f| f.data.iter().position(|v| *v == low))
                .unwrap_or(0);
            return Err(SolverError::NegativeDensity { value: low, cell, tol });
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
    use crate::fields::{build_nest_field, Boundary, NestKind};
    use crate::kernels::{A1Variant, FollowerClosure, KernelSet};
    use crate::macrosolvers::ScalingParams;
    use crate::params::ModelParams;

    fn setup(grid: Grid, alignment: AlignmentSource, scaling: ScalingParams) -> SolverSetup {
        let params = ModelParams::default();
        let kernels = KernelSet::planar_default();
        let coeffs = kernels
            .coefficients(&params, FollowerClosure::default(), A1Variant::default())
            .unwrap();
        SolverSetup {
            grid,
            nest: build_nest_field(&grid, NestKind::Uniform([0.0, 1.0]), None).unwrap(),
            params,
            kernels,
            coeffs,
            scaling,
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
    fn constant_state_is_stationary() {
        let g = Grid::square(16, 2.0, Boundary::Periodic).unwrap();
        let solver = HyperbolicSolver::new(setup(g, AlignmentSource::Fixed([0.6, 0.8]), ScalingParams::default())).unwrap();
        let z = ScalarField::zeros(g);
        let mut st = MacroState::new(ScalarField::constant(g, 2.0), z.clone(), z);
        let dt = solver.stable_dt(&st).unwrap();
        solver.step(&mut st, dt).unwrap();
        assert!(st.rho_f.data.iter().all(|v| (v - 2.0).abs() < 1e-14));
        assert!((st.lambda.at(5)[0] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn direction_stays_normalized_and_masses_are_conserved() {
        let g = Grid::square(32, 4.0, Boundary::Periodic).unwrap();
        let scaling = ScalingParams { epsilon: 0.1, epsilon_corrections: true, ..Default::default() };
        let solver = HyperbolicSolver::new(setup(g, AlignmentSource::Flux, scaling)).unwrap();
        let mut st = MacroState::new(
            ScalarField::from_fn(g, |p| 0.1 + (-(p[0] * p[0] + p[1] * p[1])).exp()),
            blob(g, [0.5, 0.0], 0.8, 0.05),
            blob(g, [0.0, 1.0], 0.5, 0.02),
        );
        let (mf, ml) = (st.follower_mass(), st.leader_mass());
        let dt = 0.9 * solver.stable_dt(&st).unwrap();
        for _ in 0..50 {
            solver.step(&mut st, dt).unwrap();
            let n = st.lambda.norm();
            assert!(n.data.iter().all(|v| (v - 1.0).abs() <= 1e-12));
        }
        assert!(((st.follower_mass() - mf) / mf).abs() < 1e-12);
        assert!(((st.leader_mass() - ml) / ml).abs() < 1e-12);
    }

    #[test]
    fn inhomogeneous_mode_carries_magnitude() {
        let g = Grid::square(16, 2.0, Boundary::Periodic).unwrap();
        let scaling = ScalingParams { kernel_mode: KernelMode::Inhomogeneous, nu: 3.0, ..Default::default() };
        let solver = HyperbolicSolver::new(setup(g, AlignmentSource::Flux, scaling)).unwrap();
        let z = ScalarField::zeros(g);
        let st = MacroState::new(ScalarField::constant(g, 1.0), ScalarField::constant(g, 0.2), z);
        let l = solver.initial_lambda(&st).unwrap();
        let base = HyperbolicSolver::new(setup(
            g,
            AlignmentSource::Flux,
            ScalingParams { kernel_mode: KernelMode::Inhomogeneous, nu: 1.0, ..Default::default() },
        ))
        .unwrap()
        .initial_lambda(&st)
        .unwrap();
        assert!((l.at(0)[1] / base.at(0)[1] - 3.0).abs() < 1e-12);
    }
}
