//! Discrete-ordinates solver for the kinetic system.

use std::f64::consts::PI;

use super::transport::{advection, upwind_value, Axis};
use super::{check_dt, AlignmentSource, KernelMode, Limit, SolverError, SolverSetup, StepDiagnostics};
use crate::exec::{self, Parallelism};
use crate::fields::{FieldSet, Grid, ScalarField, VectorField, STREAKER_HEADING_SIGN};
use crate::kernels::{AngularDensity, AngularFamily, AngularGrid, DiscreteTurn};
use crate::microsim::build_switch_rates;

/// Angle-resolved follower and passive densities plus the streaker density.
///
/// Storage is cell-major: `sigma[k * m + i]` for cell `k` and direction `i`.
/// Densities are per unit angle normalized so that `rho = mean_i sigma_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct KineticState {
    pub t: f64,
    pub grid: Grid,
    pub angles: AngularGrid,
    pub sigma_f: Vec<f64>,
    pub sigma_p: Vec<f64>,
    pub rho_s: ScalarField,
}

impl KineticState {
    /// Direction-independent densities with the given moments.
    pub fn isotropic(rho_f: &ScalarField, rho_p: &ScalarField, rho_s: &ScalarField, angles: AngularGrid) -> Self {
        let m = angles.len();
        let spread = |r: &ScalarField| r.data.iter().flat_map(|&v| std::iter::repeat_n(v, m)).collect();
        KineticState {
            t: 0.0,
            grid: rho_f.grid,
            angles,
            sigma_f: spread(rho_f),
            sigma_p: spread(rho_p),
            rho_s: rho_s.clone(),
        }
    }

    pub fn follower_mass(&self) -> f64 {
        self.mean_total(&self.sigma_f)
    }

    pub fn leader_mass(&self) -> f64 {
        self.mean_total(&self.sigma_p) + self.rho_s.total()
    }

    fn mean_total(&self, sigma: &[f64]) -> f64 {
        exec::sum(sigma) / self.angles.len() as f64 * self.grid.cell_area()
    }
}

fn cell_moments(sigma: &[f64], dirs: &[[f64; 2]]) -> (f64, [f64; 2]) {
    let m = dirs.len() as f64;
    let mut rho = 0.0;
    let mut w = [0.0; 2];
    for (s, d) in sigma.iter().zip(dirs) {
        rho += s;
        w[0] += s * d[0];
        w[1] += s * d[1];
    }
    (rho / m, [w[0] / m, w[1] / m])
}

/// `rho = (1/|S|) int sigma` and `w = (1/(n|S|)) int theta sigma` per species.
pub fn moments(state: &KineticState, par: Parallelism) -> FieldSet {
    let g = state.grid;
    let m = state.angles.len();
    let dirs: Vec<[f64; 2]> = (0..m).map(|i| state.angles.direction(i)).collect();
    let mut out = FieldSet::zeros(g);
    for (sigma, rho, w) in [
        (&state.sigma_f, &mut out.rho_f, &mut out.w_f),
        (&state.sigma_p, &mut out.rho_p, &mut out.w_p),
    ] {
        let cells = exec::map(par, g.len(), |k| cell_moments(&sigma[k * m..(k + 1) * m], &dirs));
        for (k, (r, v)) in cells.into_iter().enumerate() {
            rho.data[k] = r;
            // the 1/n of the mean direction, n = 2
            w.set(k, [0.5 * v[0], 0.5 * v[1]]);
        }
    }
    out.rho_s = state.rho_s.clone();
    out
}

/// Speeds and rates after the limit-dependent rescaling.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Effective {
    pub c_f: f64,
    pub c_p: f64,
    pub c_s: f64,
    pub beta: f64,
    pub rate_scale: f64,
    /// Weight of the anisotropic part of the alignment and passive turning densities.
    pub mix: f64,
}

impl Effective {
    pub fn new(setup: &SolverSetup) -> Self {
        let p = &setup.params;
        let e = setup.scaling.epsilon;
        match setup.scaling.limit {
            Limit::Kinetic => Effective {
                c_f: p.c_f,
                c_p: p.c_p,
                c_s: p.c_s,
                beta: p.beta,
                rate_scale: 1.0,
                mix: 1.0,
            },
            Limit::Parabolic => Effective {
                c_f: p.c_f / e,
                c_p: p.c_p / e,
                c_s: p.c_s / e,
                beta: p.beta / (e * e),
                rate_scale: 1.0 / e,
                mix: e,
            },
            Limit::Hyperbolic => Effective {
                c_f: p.c_f,
                c_p: p.c_p,
                c_s: p.c_s,
                beta: p.beta / e,
                rate_scale: 1.0,
                mix: 1.0,
            },
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Align {
    /// Homogeneous alignment about a unit direction.
    Dir([f64; 2]),
    /// Un-normalized direction of the inhomogeneous kernel.
    Vector([f64; 2]),
    /// No alignment direction: aligning followers keep their heading.
    Keep,
}

pub struct KineticSolver {
    pub setup: SolverSetup,
    angles: AngularGrid,
    dirs: Vec<[f64; 2]>,
    turn: DiscreteTurn,
    mirror_x: Vec<usize>,
    mirror_y: Vec<usize>,
    /// Base passive turning density about `b`, per cell (cell-major).
    b0_table: Vec<f64>,
    /// Re-entry density of converted streakers, per cell.
    switch_table: Vec<f64>,
    eff: Effective,
}

fn tabulate_about(angles: &AngularGrid, density: &AngularDensity, axis: [f64; 2]) -> Vec<f64> {
    let n = axis[0].hypot(axis[1]);
    if n > 0.0 {
        angles.tabulate(density, [axis[0] / n, axis[1] / n])
    } else {
        vec![1.0 / (2.0 * PI); angles.len()]
    }
}

// g(Lambda* . theta_i), evaluated through the rescaled family when the
// family is closed under scaling of its argument.
fn inhomogeneous_profile(fam: &AngularFamily, l: [f64; 2], dirs: &[[f64; 2]]) -> Vec<f64> {
    let n = l[0].hypot(l[1]);
    if n == 0.0 {
        return vec![1.0; dirs.len()];
    }
    let e = [l[0] / n, l[1] / n];
    let scaled = fam.scaled_argument(n);
    dirs.iter()
        .map(|d| {
            let c = e[0] * d[0] + e[1] * d[1];
            match &scaled {
                Some(f) => f.profile(c),
                None => fam.profile(n * c),
            }
        })
        .collect()
}

impl KineticSolver {
    pub fn new(setup: SolverSetup, angles: AngularGrid) -> Result<Self, SolverError> {
        setup.validate()?;
        let m = angles.len();
        if !m.is_multiple_of(2) {
            return Err(SolverError::InvalidSetup(format!("angular grid needs an even size, got {m}")));
        }
        let turn = DiscreteTurn::new(&setup.kernels.turn, angles)?;
        let dirs: Vec<[f64; 2]> = (0..m).map(|i| angles.direction(i)).collect();
        let mirror_x = (0..m).map(|i| (m / 2 + m - i) % m).collect();
        let mirror_y = (0..m).map(|i| (m - i) % m).collect();
        let g = setup.grid;
        let mut b0_table = Vec::with_capacity(g.len() * m);
        let mut switch_table = Vec::with_capacity(g.len() * m);
        for k in 0..g.len() {
            let b = setup.nest.b.at(k);
            b0_table.extend(tabulate_about(&angles, &setup.kernels.b0, b));
            switch_table.extend(tabulate_about(&angles, &setup.kernels.switch_angular, b));
        }
        let eff = Effective::new(&setup);
        Ok(KineticSolver {
            setup,
            angles,
            dirs,
            turn,
            mirror_x,
            mirror_y,
            b0_table,
            switch_table,
            eff,
        })
    }

    pub fn angles(&self) -> AngularGrid {
        self.angles
    }

    /// Largest step keeping the explicit update positive.
    pub fn stable_dt(&self) -> f64 {
        let g = &self.setup.grid;
        let e = &self.eff;
        let p = &self.setup.params;
        let c = e.c_f.max(e.c_p).max(e.c_s);
        let lim = if self.setup.limiter { 2.0 } else { 1.0 };
        let r_max = (p.r0 + p.rates.r_peak) * e.rate_scale;
        0.9 / (lim * c * (1.0 / g.hx() + 1.0 / g.hy()) + e.beta + r_max)
    }

    fn alignment(&self, state: &KineticState, fields: &FieldSet) -> Result<Vec<Align>, SolverError> {
        let n = state.grid.len();
        match self.setup.alignment {
            AlignmentSource::Fixed(d) => {
                let l = d[0].hypot(d[1]);
                Ok(vec![
                    if l > 0.0 { Align::Dir([d[0] / l, d[1] / l]) } else { Align::Vector([0.0; 2]) };
                    n
                ])
            }
            AlignmentSource::Zero => Ok(vec![Align::Vector([0.0; 2]); n]),
            AlignmentSource::Flux => {
                // per-individual flux density (1/|S|) int theta (sigma_f + sigma_p)
                let mut heading = VectorField::zeros(state.grid);
                for k in 0..n {
                    heading.x[k] = 2.0 * (fields.w_f.x[k] + fields.w_p.x[k]);
                    heading.y[k] = 2.0 * (fields.w_f.y[k] + fields.w_p.y[k]);
                }
                let flux = self.setup.flux(Some(&heading), Some(&state.rho_s))?;
                Ok(match self.setup.scaling.kernel_mode {
                    KernelMode::Homogeneous => (0..n)
                        .map(|k| {
                            if flux.defined[k] {
                                Align::Dir(flux.lambda.at(k))
                            } else {
                                Align::Keep
                            }
                        })
                        .collect(),
                    KernelMode::Inhomogeneous => {
                        let l = flux.scaled(self.setup.scaling.nu);
                        (0..n).map(|k| Align::Vector(l.at(k))).collect()
                    }
                })
            }
        }
    }

    // Transport of direction `i` at cell `k` with speed `c`, with specular
    // reflection on walls.
    fn transport(&self, sigma: &[f64], k: usize, i: usize, c: f64) -> f64 {
        let g = &self.setup.grid;
        let m = self.dirs.len();
        let lim = self.setup.limiter;
        let (ci, cj) = g.coords(k);
        let d = self.dirs[i];
        let mut acc = 0.0;
        for (axis, h, u, mirror) in [
            (Axis::X, g.hx(), c * d[0], &self.mirror_x),
            (Axis::Y, g.hy(), c * d[1], &self.mirror_y),
        ] {
            let nb = |s: i64| match axis {
                Axis::X => g.shift_x(ci, s).map(|ii| g.index(ii, cj)),
                Axis::Y => g.shift_y(cj, s).map(|jj| g.index(ci, jj)),
            };
            let get = |cell: usize| sigma[cell * m + i];
            match nb(1) {
                Some(r) => acc -= u * upwind_value(g, axis, k, r, u, get, lim) / h,
                None => {
                    if u > 0.0 {
                        acc -= u * get(k) / h;
                    } else {
                        let j = mirror[i];
                        let uj = c * self.dirs[j][if axis == Axis::X { 0 } else { 1 }];
                        acc += uj * sigma[k * m + j] / h;
                    }
                }
            }
            match nb(-1) {
                Some(l) => acc += u * upwind_value(g, axis, l, k, u, get, lim) / h,
                None => {
                    if u < 0.0 {
                        acc += u * get(k) / h;
                    } else {
                        let j = mirror[i];
                        let uj = c * self.dirs[j][if axis == Axis::X { 0 } else { 1 }];
                        acc -= uj * sigma[k * m + j] / h;
                    }
                }
            }
        }
        acc
    }

    /// One explicit Euler step.
    pub fn step(&self, state: &mut KineticState, dt: f64) -> Result<StepDiagnostics, SolverError> {
        let limit = self.stable_dt();
        check_dt(dt, limit)?;
        let s = &self.setup;
        let g = s.grid;
        g.check_same(&state.grid)?;
        let m = self.dirs.len();
        if state.angles != self.angles {
            return Err(crate::kernels::KernelError::GridMismatch {
                expected: m,
                got: state.angles.len(),
            }
            .into());
        }
        let par = s.par;
        let e = self.eff;
        let p = &s.params;
        let fields = moments(state, par);
        let rho_for_rates = s.frozen_rho_f.as_ref().unwrap_or(&fields.rho_f);
        let rates = build_switch_rates(rho_for_rates, &s.nest.b, p, par);
        let gmax = (0..g.len())
            .map(|k| rates.grad_rho_f.x[k].hypot(rates.grad_rho_f.y[k]))
            .fold(0.0, f64::max);
        let align = if p.zeta < 1.0 { self.alignment(state, &fields)? } else { vec![Align::Keep; g.len()] };
        let dtheta = self.angles.spacing();
        let area = 2.0 * PI;

        let old_f = &state.sigma_f;
        let mut new_f = vec![0.0; old_f.len()];
        exec::for_chunks(par, &mut new_f, m, |k, out| {
            let cell = &old_f[k * m..(k + 1) * m];
            let rho = fields.rho_f.data[k];
            let mut turned = vec![0.0; m];
            self.turn.apply_into(cell, &mut turned).expect("grid sizes match");
            let gain: Vec<f64> = match align[k] {
                Align::Keep => cell.to_vec(),
                Align::Dir(l) => {
                    let phi = self.angles.tabulate(&s.kernels.alignment, l);
                    phi.iter().map(|v| area * ((1.0 - e.mix) / area + e.mix * v) * rho).collect()
                }
                Align::Vector(l) => {
                    let raw = inhomogeneous_profile(s.kernels.alignment.family(), l, &self.dirs);
                    let norm = raw.iter().sum::<f64>() * dtheta;
                    raw.iter()
                        .map(|v| area * ((1.0 - e.mix) / area + e.mix * v / norm) * rho)
                        .collect()
                }
            };
            for i in 0..m {
                let relax = e.beta * (-cell[i] + p.zeta * turned[i] + (1.0 - p.zeta) * gain[i]);
                out[i] = cell[i] + dt * (self.transport(old_f, k, i, e.c_f) + relax);
            }
        });

        let old_p = &state.sigma_p;
        let r_sp = &rates.r_sp.data;
        let r_ps = &rates.r_ps.data;
        let mut new_p = vec![0.0; old_p.len()];
        exec::for_chunks(par, &mut new_p, m, |k, out| {
            let cell = &old_p[k * m..(k + 1) * m];
            let rho = fields.rho_p.data[k];
            let b = s.nest.b.at(k);
            // tilt of the passive turning density at the front edge
            let gr = if gmax > 0.0 {
                [rates.grad_rho_f.x[k] / gmax, rates.grad_rho_f.y[k] / gmax]
            } else {
                [0.0; 2]
            };
            let gn = gr[0].hypot(gr[1]);
            let amp = p.rates.tilt_weight * (b[0] * gr[0] + b[1] * gr[1]).max(0.0) * gn;
            let base = &self.b0_table[k * m..(k + 1) * m];
            let mut turn_b: Vec<f64> = if amp > 0.0 {
                let e_hat = [gr[0] / gn, gr[1] / gn];
                base.iter()
                    .zip(&self.dirs)
                    .map(|(v, d)| v + amp * (e_hat[0] * d[0] + e_hat[1] * d[1]).max(0.0))
                    .collect()
            } else {
                base.to_vec()
            };
            let norm = turn_b.iter().sum::<f64>() * dtheta;
            turn_b.iter_mut().for_each(|v| *v = (1.0 - e.mix) / area + e.mix * *v / norm);
            let sw = &self.switch_table[k * m..(k + 1) * m];
            let (rsp, rps) = (r_sp[k] * e.rate_scale, r_ps[k] * e.rate_scale);
            let rho_s = state.rho_s.data[k];
            for i in 0..m {
                let relax = e.beta * (-cell[i] + area * turn_b[i] * rho) + area * sw[i] * rsp * rho_s
                    - rps * cell[i];
                out[i] = cell[i] + dt * (self.transport(old_p, k, i, e.c_p) + relax);
            }
        });

        let vx: Vec<f64> = s.nest.b.x.iter().map(|b| STREAKER_HEADING_SIGN * e.c_s * b).collect();
        let vy: Vec<f64> = s.nest.b.y.iter().map(|b| STREAKER_HEADING_SIGN * e.c_s * b).collect();
        let adv = advection(&g, &state.rho_s.data, &vx, &vy, s.limiter, par);
        let rho_s_new: Vec<f64> = (0..g.len())
            .map(|k| {
                let exch = -r_sp[k] * state.rho_s.data[k] + r_ps[k] * fields.rho_p.data[k];
                state.rho_s.data[k] + dt * (adv[k] + e.rate_scale * exch)
            })
            .collect();

        state.sigma_f = new_f;
        state.sigma_p = new_p;
        state.rho_s.data = rho_s_new;
        state.t += dt;

        let scale = fields.rho_f.max().max(fields.rho_p.max()).max(state.rho_s.max()).max(1e-300);
        let min_sigma = state
            .sigma_f
            .iter()
            .chain(&state.sigma_p)
            .cloned()
            .fold(f64::INFINITY, f64::min)
            .min(state.rho_s.min());
        let tol = 1e-12 * scale;
        if min_sigma < -tol {
            let cell = state
                .sigma_f
                .iter()
                .chain(&state.sigma_p)
                .position(|v| *v == min_sigma)
                .map_or(0, |q| (q % state.sigma_f.len()) / m);
            return Err(SolverError::NegativeDensity {
                value: min_sigma,
                cell,
                tol,
            });
        }
        Ok(StepDiagnostics {
            t: state.t,
            mass_f: state.follower_mass(),
            mass_l: state.leader_mass(),
            min_density: min_sigma,
            cfl: dt / limit,
        })
    }
}
