//! Time stepping of an agent ensemble.

use std::io::Write;

use rand::Rng;

use super::{agent_rng, build_switch_rates, follower_reorient, passive_reorient, rotate};
use super::{Agent, SimError, SimParams, Species, SwitchRates};
use crate::exec::{self, Parallelism};
use crate::fields::{
    alignment_flux_particles, kde_density, Boundary, FluxOutput, Grid, NestField, ScalarField,
    VectorField,
};
use crate::kernels::KernelSet;

/// Fields the agents read during a step.
#[derive(Clone, Debug)]
pub struct MicroFields {
    pub rho_f: Option<ScalarField>,
    pub rates: Option<SwitchRates>,
    /// Follower-density gradient divided by its maximum norm.
    pub grad_scaled: Option<VectorField>,
    pub flux: Option<FluxOutput>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SpeciesCounts {
    pub followers: usize,
    pub passive: usize,
    pub streakers: usize,
}

impl SpeciesCounts {
    pub fn leaders(&self) -> usize {
        self.passive + self.streakers
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameSummary {
    pub t: f64,
    pub center_of_mass: [f64; 2],
    /// Mean of `theta . (-b)` over followers.
    pub order: f64,
    pub counts: SpeciesCounts,
}

#[derive(Clone)]
pub struct MicroSim {
    pub params: SimParams,
    pub kernels: KernelSet,
    pub grid: Grid,
    pub nest: NestField,
    pub agents: Vec<Agent>,
    pub step_index: u64,
    fields: MicroFields,
    frozen_rho_f: Option<ScalarField>,
    par: Parallelism,
}

impl MicroSim {
    pub fn new(
        params: SimParams,
        kernels: KernelSet,
        grid: Grid,
        nest: NestField,
        agents: Vec<Agent>,
        par: Parallelism,
    ) -> Result<Self, SimError> {
        params.validate()?;
        grid.check_same(&nest.b.grid)?;
        let floor = 2.0 * grid.hx().max(grid.hy());
        if params.bandwidth < floor {
            return Err(crate::fields::FieldError::BandwidthTooSmall {
                bandwidth: params.bandwidth,
                floor,
            }
            .into());
        }
        let mut sim = MicroSim {
            params,
            kernels,
            grid,
            nest,
            agents,
            step_index: 0,
            fields: MicroFields {
                rho_f: None,
                rates: None,
                grad_scaled: None,
                flux: None,
            },
            frozen_rho_f: None,
            par,
        };
        sim.refresh_fields()?;
        Ok(sim)
    }

    /// Uses `rho` as the follower density for the switching rates and the
    /// passive tilt from now on, instead of the KDE of the followers.
    pub fn freeze_follower_density(&mut self, rho: ScalarField) -> Result<(), SimError> {
        self.grid.check_same(&rho.grid)?;
        self.frozen_rho_f = Some(rho);
        self.fields.rates = None;
        self.refresh_fields()
    }

    pub fn fields(&self) -> &MicroFields {
        &self.fields
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.params.dt
    }

    pub fn counts(&self) -> SpeciesCounts {
        let mut c = SpeciesCounts::default();
        for a in &self.agents {
            match a.species {
                Species::Follower => c.followers += 1,
                Species::Passive => c.passive += 1,
                Species::Streaker => c.streakers += 1,
            }
        }
        c
    }

    pub fn positions(&self, species: Species) -> Vec<[f64; 2]> {
        self.agents
            .iter()
            .filter(|a| a.species == species)
            .map(|a| a.pos)
            .collect()
    }

    /// KDE of one population on the simulation grid.
    pub fn density(&self, species: Species) -> Result<ScalarField, SimError> {
        Ok(kde_density(
            &self.positions(species),
            self.params.bandwidth,
            &self.grid,
            self.par,
        )?)
    }

    fn refresh_fields(&mut self) -> Result<(), SimError> {
        let counts = self.counts();
        let m = &self.params.model;
        let need_rho = counts.leaders() > 0;
        let rho_f = match (&self.frozen_rho_f, need_rho) {
            (Some(r), _) => Some(r.clone()),
            (None, true) => Some(self.density(Species::Follower)?),
            (None, false) => None,
        };
        let cached = self.frozen_rho_f.is_some() && self.fields.rates.is_some();
        let (rates, grad_scaled) = match &rho_f {
            // frozen rates never change once built
            Some(_) if need_rho && cached => (self.fields.rates.take(), self.fields.grad_scaled.take()),
            Some(rho) if need_rho => {
                let rates = build_switch_rates(rho, &self.nest.b, m, self.par);
                let g = &rates.grad_rho_f;
                let gmax = (0..self.grid.len())
                    .map(|k| g.x[k].hypot(g.y[k]))
                    .fold(0.0, f64::max);
                let mut scaled = g.clone();
                if gmax > 0.0 {
                    scaled.x.iter_mut().chain(scaled.y.iter_mut()).for_each(|v| *v /= gmax);
                }
                (Some(rates), Some(scaled))
            }
            _ => (None, None),
        };
        let flux = if m.zeta < 1.0 && counts.followers > 0 {
            let w = self.params.alignment_mode.streaker_weight(m.lambda);
            let v: Vec<[f64; 2]> = self
                .agents
                .iter()
                .map(|a| match a.species {
                    Species::Streaker => {
                        let h = self.nest.streaker_heading(a.pos);
                        [w * h[0], w * h[1]]
                    }
                    _ => a.heading,
                })
                .collect();
            let pts: Vec<[f64; 2]> = self.agents.iter().map(|a| a.pos).collect();
            Some(alignment_flux_particles(
                &pts,
                &v,
                &self.grid,
                &self.kernels.interaction,
                self.par,
            )?)
        } else {
            None
        };
        self.fields = MicroFields {
            rho_f,
            rates,
            grad_scaled,
            flux,
        };
        Ok(())
    }

    fn alignment_at(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let flux = self.fields.flux.as_ref()?;
        let (i, j) = self.grid.locate(p);
        if !flux.defined[self.grid.index(i, j)] {
            return None;
        }
        let v = flux.j.sample(p);
        let n = v[0].hypot(v[1]);
        (n > 0.0).then(|| [v[0] / n, v[1] / n])
    }

    fn confine(&self, a: &mut Agent) {
        let g = &self.grid;
        match g.boundary {
            Boundary::Periodic => a.pos = g.wrap(a.pos),
            Boundary::Outflow => {
                let lims = [(g.x_min, g.x_max), (g.y_min, g.y_max)];
                for (d, &(lo, hi)) in lims.iter().enumerate() {
                    // a single reflection suffices since speed * dt is below a cell
                    if a.pos[d] < lo {
                        a.pos[d] = 2.0 * lo - a.pos[d];
                        a.heading[d] = -a.heading[d];
                    } else if a.pos[d] > hi {
                        a.pos[d] = 2.0 * hi - a.pos[d];
                        a.heading[d] = -a.heading[d];
                    }
                    a.pos[d] = a.pos[d].clamp(lo, hi);
                }
            }
        }
    }

    fn advance_agent(&self, mut a: Agent) -> Agent {
        let m = &self.params.model;
        let dt = self.params.dt;
        let mut rng = agent_rng(self.params.seed, a.id, self.step_index);
        let jump = 1.0 - (-m.beta * dt).exp();
        let rate_at = |f: Option<&ScalarField>| f.map_or(m.r0, |r| r.sample(a.pos));
        match a.species {
            Species::Follower => {
                if rng.random::<f64>() < jump {
                    let l = self.alignment_at(a.pos);
                    a.heading = follower_reorient(a.heading, l, m.zeta, &self.kernels, &mut rng);
                }
                a.pos = [a.pos[0] + m.c_f * a.heading[0] * dt, a.pos[1] + m.c_f * a.heading[1] * dt];
            }
            Species::Passive => {
                let r_ps = rate_at(self.fields.rates.as_ref().map(|r| &r.r_ps));
                let b = self.nest.direction_at(a.pos);
                if rng.random::<f64>() < jump {
                    let g = self.fields.grad_scaled.as_ref().map_or([0.0; 2], |g| g.sample(a.pos));
                    a.heading = passive_reorient(b, g, m.rates.tilt_weight, &self.kernels.b0, &mut rng);
                }
                a.pos = [a.pos[0] + m.c_p * a.heading[0] * dt, a.pos[1] + m.c_p * a.heading[1] * dt];
                if rng.random::<f64>() < 1.0 - (-r_ps * dt).exp() {
                    a.species = Species::Streaker;
                }
            }
            Species::Streaker => {
                let r_sp = rate_at(self.fields.rates.as_ref().map(|r| &r.r_sp));
                let h = self.nest.streaker_heading(a.pos);
                a.heading = h;
                a.pos = [a.pos[0] + m.c_s * h[0] * dt, a.pos[1] + m.c_s * h[1] * dt];
                if rng.random::<f64>() < 1.0 - (-r_sp * dt).exp() {
                    a.species = Species::Passive;
                    let b = self.nest.direction_at(a.pos);
                    let n = b[0].hypot(b[1]);
                    let axis = if n > 0.0 { [b[0] / n, b[1] / n] } else { [1.0, 0.0] };
                    a.heading = rotate(axis, self.kernels.switch_angular.sample_offset(&mut rng));
                }
            }
        }
        self.confine(&mut a);
        a
    }

    /// One step of every agent against the current field snapshot.
    pub fn step(&mut self) -> Result<(), SimError> {
        let next = exec::map(self.par, self.agents.len(), |i| self.advance_agent(self.agents[i]));
        if let Some(bad) = next
            .iter()
            .find(|a| !(a.pos.iter().chain(&a.heading).all(|v| v.is_finite())))
        {
            return Err(SimError::NonFinite {
                id: bad.id,
                step: self.step_index,
            });
        }
        self.agents = next;
        self.step_index += 1;
        if self.step_index.is_multiple_of(self.params.field_stride as u64) {
            self.refresh_fields()?;
        }
        Ok(())
    }

    pub fn run(&mut self, steps: usize) -> Result<(), SimError> {
        for _ in 0..steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn summary(&self) -> FrameSummary {
        let n = self.agents.len().max(1) as f64;
        let cx = self.agents.iter().map(|a| a.pos[0]).sum::<f64>() / n;
        let cy = self.agents.iter().map(|a| a.pos[1]).sum::<f64>() / n;
        let (mut order, mut nf) = (0.0, 0usize);
        for a in self.agents.iter().filter(|a| a.species == Species::Follower) {
            let h = self.nest.streaker_heading(a.pos);
            order += a.heading[0] * h[0] + a.heading[1] * h[1];
            nf += 1;
        }
        FrameSummary {
            t: self.time(),
            center_of_mass: [cx, cy],
            order: if nf > 0 { order / nf as f64 } else { 0.0 },
            counts: self.counts(),
        }
    }

    /// Appends one frame of `t,id,species,x,y,theta_x,theta_y` rows.
    pub fn write_frame(&self, w: &mut impl Write) -> Result<(), SimError> {
        let t = self.time();
        for a in &self.agents {
            writeln!(
                w,
                "{t:?},{},{},{:?},{:?},{:?},{:?}",
                a.id,
                a.species.code(),
                a.pos[0],
                a.pos[1],
                a.heading[0],
                a.heading[1]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_nest_field, NestKind, DEFAULT_BANDWIDTH_CELLS};
    use crate::params::ModelParams;

    fn params(model: ModelParams, grid: &Grid) -> SimParams {
        SimParams {
            model,
            dt: 0.01,
            seed: 42,
            bandwidth: DEFAULT_BANDWIDTH_CELLS * grid.hx(),
            field_stride: 1,
            alignment_mode: Default::default(),
        }
    }

    fn sim(model: ModelParams, agents: Vec<Agent>, par: Parallelism) -> MicroSim {
        let g = Grid::square(32, 4.0, Boundary::Periodic).unwrap();
        let nest = build_nest_field(&g, NestKind::Uniform([1.0, 0.0]), None).unwrap();
        MicroSim::new(params(model, &g), KernelSet::planar_default(), g, nest, agents, par).unwrap()
    }

    #[test]
    fn single_streaker_moves_ballistically() {
        let model = ModelParams {
            r0: 0.0,
            ..ModelParams::default()
        };
        let a = Agent {
            id: 0,
            pos: [1.0, 0.5],
            heading: [1.0, 0.0],
            species: Species::Streaker,
        };
        let mut s = sim(model.clone(), vec![a], Parallelism::Sequential);
        s.step().unwrap();
        let p = s.agents[0].pos;
        assert!((p[0] - (1.0 - model.c_s * 0.01)).abs() < 1e-15 && p[1] == 0.5);
    }

    #[test]
    fn follower_without_jumps_moves_straight() {
        let model = ModelParams {
            beta: 0.0,
            ..ModelParams::default()
        };
        let h = [0.6, 0.8];
        let a = Agent {
            id: 3,
            pos: [0.0, 0.0],
            heading: h,
            species: Species::Follower,
        };
        let mut s = sim(model, vec![a], Parallelism::Sequential);
        s.run(100).unwrap();
        let p = s.agents[0].pos;
        assert!((p[0] - 0.6).abs() < 1e-12 && (p[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn counts_are_conserved_and_runs_are_reproducible() {
        let agents: Vec<Agent> = (0..400)
            .map(|i| {
                let a = i as f64 * 0.7;
                Agent {
                    id: i,
                    pos: [a.cos() * (i % 13) as f64 * 0.1, a.sin() * (i % 7) as f64 * 0.1],
                    heading: [a.cos(), a.sin()],
                    species: match i % 25 {
                        0 => Species::Streaker,
                        1 => Species::Passive,
                        _ => Species::Follower,
                    },
                }
            })
            .collect();
        let mut a = sim(ModelParams::default(), agents.clone(), Parallelism::Sequential);
        let mut b = sim(ModelParams::default(), agents, Parallelism::Rayon);
        let c0 = a.counts();
        for _ in 0..30 {
            a.step().unwrap();
            b.step().unwrap();
            let c = a.counts();
            assert_eq!(c.followers, c0.followers);
            assert_eq!(c.leaders(), c0.leaders());
        }
        assert_eq!(a.agents, b.agents);
    }

    #[test]
    fn guards_reject_coarse_steps() {
        let g = Grid::square(32, 4.0, Boundary::Periodic).unwrap();
        let nest = build_nest_field(&g, NestKind::Uniform([1.0, 0.0]), None).unwrap();
        let mut p = params(ModelParams::default(), &g);
        p.dt = 0.1;
        assert!(matches!(
            MicroSim::new(p, KernelSet::planar_default(), g, nest, vec![], Parallelism::Sequential),
            Err(SimError::DtGuard(_))
        ));
    }
}
