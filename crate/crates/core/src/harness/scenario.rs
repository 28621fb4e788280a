//! Initial conditions shared by every level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::{InitialKind, Scenario};
use super::ConfigError;
use crate::fields::{Boundary, Grid, NestField, ScalarField};
use crate::microsim::{Agent, Species};

/// Initial densities; each integrates to the matching agent count.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialFields {
    pub rho_f: ScalarField,
    pub rho_p: ScalarField,
    pub rho_s: ScalarField,
}

/// Agent counts per species.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Headcount {
    pub followers: usize,
    pub passive: usize,
    pub streakers: usize,
}

impl Scenario {
    pub fn headcount(&self) -> Headcount {
        let s = &self.config.scenario;
        let leaders = (s.leader_fraction * s.agents as f64).round() as usize;
        let streakers = (s.streaker_share * leaders as f64).round() as usize;
        Headcount {
            followers: s.agents - leaders,
            passive: leaders - streakers,
            streakers,
        }
    }

    /// Blob centers. The two blobs of `dual-blob` sit on the line through
    /// `center` along the nest direction there.
    pub fn blob_centers(&self, nest: &NestField) -> Vec<[f64; 2]> {
        let s = &self.config.scenario;
        match s.name {
            InitialKind::GaussianBlob | InitialKind::UniformDisk => vec![s.center],
            InitialKind::DualBlob => {
                let mut d = nest.direction_at(s.center);
                let n = d[0].hypot(d[1]);
                d = if n > 0.0 { [d[0] / n, d[1] / n] } else { [1.0, 0.0] };
                let h = 0.5 * s.separation;
                vec![
                    [s.center[0] - h * d[0], s.center[1] - h * d[1]],
                    [s.center[0] + h * d[0], s.center[1] + h * d[1]],
                ]
            }
        }
    }

    /// Unnormalized shape of the initial distribution.
    fn shape(&self, grid: &Grid, centers: &[[f64; 2]], p: [f64; 2]) -> f64 {
        let w = self.config.scenario.width;
        centers
            .iter()
            .map(|&c| {
                let d = grid.displacement(c, p);
                let r2 = d[0] * d[0] + d[1] * d[1];
                match self.config.scenario.name {
                    InitialKind::UniformDisk => f64::from(r2 <= w * w),
                    _ => (-0.5 * r2 / (w * w)).exp(),
                }
            })
            .sum()
    }

    pub fn initial_fields(&self) -> Result<InitialFields, ConfigError> {
        let grid = self.grid()?;
        let nest = self.nest()?;
        let centers = self.blob_centers(&nest);
        let shape = ScalarField::from_fn(grid, |p| self.shape(&grid, &centers, p));
        let total = shape.total();
        if !(total > 0.0) {
            return Err(ConfigError::Range("initial distribution covers no grid cell".into()));
        }
        let count = self.headcount();
        let scaled = |n: usize| {
            let mut f = shape.clone();
            f.scale(n as f64 / total);
            f
        };
        Ok(InitialFields {
            rho_f: scaled(count.followers),
            rho_p: scaled(count.passive),
            rho_s: scaled(count.streakers),
        })
    }

    /// Agents drawn from the initial distribution with uniform headings;
    /// streakers start on their nest heading.
    pub fn agents(&self) -> Result<Vec<Agent>, ConfigError> {
        let grid = self.grid()?;
        let nest = self.nest()?;
        let centers = self.blob_centers(&nest);
        let s = &self.config.scenario;
        let count = self.headcount();
        // a stream no agent id uses
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.output.seed);
        rng.set_stream(u64::MAX);
        let mut agents = Vec::with_capacity(s.agents);
        for id in 0..s.agents {
            let species = if id < count.followers {
                Species::Follower
            } else if id < count.followers + count.passive {
                Species::Passive
            } else {
                Species::Streaker
            };
            let pos = loop {
                let c = centers[if centers.len() > 1 { rng.random_range(0..centers.len()) } else { 0 }];
                let offset = match s.name {
                    InitialKind::UniformDisk => {
                        let r = s.width * rng.random::<f64>().sqrt();
                        let a = rng.random::<f64>() * std::f64::consts::TAU;
                        [r * a.cos(), r * a.sin()]
                    }
                    _ => {
                        let x: f64 = rng.sample(StandardNormal);
                        let y: f64 = rng.sample(StandardNormal);
                        [s.width * x, s.width * y]
                    }
                };
                let p = [c[0] + offset[0], c[1] + offset[1]];
                match grid.boundary {
                    Boundary::Periodic => break grid.wrap(p),
                    Boundary::Outflow if grid.contains(p) => break p,
                    Boundary::Outflow => {}
                }
            };
            let heading = if species == Species::Streaker {
                nest.streaker_heading(pos)
            } else {
                let a = rng.random::<f64>() * std::f64::consts::TAU;
                [a.cos(), a.sin()]
            };
            agents.push(Agent {
                id: id as u64,
                pos,
                heading,
                species,
            });
        }
        Ok(agents)
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_config;
    use approx::assert_relative_eq;

    #[test]
    fn fields_integrate_to_agent_counts() {
        for name in ["gaussian-blob", "dual-blob", "uniform-disk"] {
            let s = parse_config(&format!("[scenario]\nname = \"{name}\"\nagents = 500\nwidth = 1.5\n")).unwrap();
            let f = s.initial_fields().unwrap();
            let c = s.headcount();
            assert_eq!(c.followers + c.passive + c.streakers, 500);
            assert_relative_eq!(f.rho_f.total(), c.followers as f64, max_relative = 1e-12);
            assert_relative_eq!(f.rho_p.total() + f.rho_s.total(), (c.passive + c.streakers) as f64, max_relative = 1e-12);
        }
    }

    #[test]
    fn dual_blobs_lie_along_the_nest_direction() {
        let s = parse_config(
            "[scenario]\nname = \"dual-blob\"\nseparation = 6.0\nnest_kind = \"uniform\"\nnest = [0.0, 2.0]\n",
        )
        .unwrap();
        let c = s.blob_centers(&s.nest().unwrap());
        assert_eq!(c, vec![[0.0, -3.0], [0.0, 3.0]]);
    }

    #[test]
    fn agents_are_reproducible_and_inside() {
        let s = parse_config("[grid]\nboundary = \"outflow\"\n[scenario]\nwidth = 3.0\nagents = 400\n").unwrap();
        let a = s.agents().unwrap();
        assert_eq!(a, s.agents().unwrap());
        let g = s.grid().unwrap();
        assert!(a.iter().all(|x| g.contains(x.pos)));
        assert_eq!(a.iter().filter(|x| x.species.is_leader()).count(), 16);
    }
}
