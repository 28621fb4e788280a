//! Nest guidance field `b`: unit vectors pointing away from the nest.

use super::{Boundary, FieldError, Grid, VectorField};

/// Streakers fly along `STREAKER_HEADING_SIGN * b`, i.e. towards the nest.
pub const STREAKER_HEADING_SIGN: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NestKind {
    /// Nest at a point.
    Point([f64; 2]),
    /// Nest infinitely far away; `b` is the constant unit vector `dir`.
    Uniform([f64; 2]),
}

#[derive(Clone, Debug, PartialEq)]
pub struct NestField {
    pub kind: NestKind,
    pub exclusion_radius: f64,
    /// Tabulated `b` at cell centers.
    pub b: VectorField,
}

// C1 ramp: 0 on [0, 1/2], smoothstep up to 1 at s = 1.
fn mollifier(s: f64) -> f64 {
    if s <= 0.5 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let t = 2.0 * (s - 0.5);
        t * t * (3.0 - 2.0 * t)
    }
}

impl NestField {
    /// Analytic `b` at an arbitrary point (no boundary adjustment).
    pub fn direction_at(&self, p: [f64; 2]) -> [f64; 2] {
        analytic(self.kind, self.exclusion_radius, &self.b.grid, p)
    }

    /// Streaker velocity direction at `p`.
    pub fn streaker_heading(&self, p: [f64; 2]) -> [f64; 2] {
        let b = self.direction_at(p);
        [STREAKER_HEADING_SIGN * b[0], STREAKER_HEADING_SIGN * b[1]]
    }
}

fn analytic(kind: NestKind, r_excl: f64, grid: &Grid, p: [f64; 2]) -> [f64; 2] {
    match kind {
        NestKind::Uniform(d) => {
            let n = d[0].hypot(d[1]);
            [d[0] / n, d[1] / n]
        }
        NestKind::Point(x) => {
            let d = grid.displacement(x, p);
            let r = d[0].hypot(d[1]);
            if r == 0.0 {
                return [0.0, 0.0];
            }
            let m = mollifier(r / r_excl);
            [m * d[0] / r, m * d[1] / r]
        }
    }
}

/// Tabulates `b` on the grid.
///
/// `exclusion_radius` defaults to three cells. On outflow grids the normal
/// component is removed in edge cells so that streakers cannot leave.
pub fn build_nest_field(
    grid: &Grid,
    kind: NestKind,
    exclusion_radius: Option<f64>,
) -> Result<NestField, FieldError> {
    let r_excl = exclusion_radius.unwrap_or(3.0 * grid.hx().max(grid.hy()));
    let size = grid.width().max(grid.height());
    if !(r_excl > 0.0) || r_excl > size {
        return Err(FieldError::ExclusionTooLarge {
            radius: r_excl,
            size,
        });
    }
    if let NestKind::Uniform(d) = kind {
        if !(d[0].hypot(d[1]) > 0.0) {
            return Err(FieldError::InvalidGrid("uniform nest direction is zero".into()));
        }
    }
    let mut b = VectorField::from_fn(*grid, |p| analytic(kind, r_excl, grid, p));
    if grid.boundary == Boundary::Outflow {
        for k in 0..grid.len() {
            let (i, j) = grid.coords(k);
            let mut v = b.at(k);
            let edge_x = i == 0 || i == grid.nx - 1;
            let edge_y = j == 0 || j == grid.ny - 1;
            if !(edge_x || edge_y) {
                continue;
            }
            let before = v[0].hypot(v[1]);
            if edge_x {
                v[0] = 0.0;
            }
            if edge_y {
                v[1] = 0.0;
            }
            let after = v[0].hypot(v[1]);
            if after > 0.0 {
                v = [v[0] * before / after, v[1] * before / after];
            }
            b.set(k, v);
        }
    }
    Ok(NestField {
        kind,
        exclusion_radius: r_excl,
        b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Parallelism;
    use crate::fields::divergence;

    #[test]
    fn far_field_is_radial() {
        let g = Grid::square(40, 10.0, Boundary::Periodic).unwrap();
        let nest = build_nest_field(&g, NestKind::Point([0.0, 0.0]), None).unwrap();
        let h = g.hx();
        let b = nest.direction_at([3.0 * h, 4.0 * h]);
        assert!((b[0] - 0.6).abs() < 1e-15 && (b[1] - 0.8).abs() < 1e-15);
        let b = nest.direction_at([7.0, 0.0]);
        assert_eq!(b, [1.0, 0.0]);
    }

    #[test]
    fn unit_length_outside_exclusion_zone() {
        let g = Grid::square(32, 4.0, Boundary::Periodic).unwrap();
        let nest = build_nest_field(&g, NestKind::Point([0.3, -0.2]), None).unwrap();
        for k in 0..g.len() {
            let c = g.center_of(k);
            let d = g.displacement([0.3, -0.2], c);
            if d[0].hypot(d[1]) >= nest.exclusion_radius {
                let v = nest.b.at(k);
                assert!((v[0].hypot(v[1]) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn divergence_free_at_the_nest() {
        let g = Grid::square(64, 8.0, Boundary::Outflow).unwrap();
        let r_excl = 2.0;
        let nest = build_nest_field(&g, NestKind::Point([0.0, 0.0]), Some(r_excl)).unwrap();
        let div = divergence(&nest.b, Parallelism::Sequential);
        let h = g.hx();
        let mut checked = 0;
        for k in 0..g.len() {
            let c = g.center_of(k);
            if c[0].hypot(c[1]) + 1.5 * h < 0.5 * r_excl {
                assert!(div.data[k].abs() < 1e-8);
                checked += 1;
            }
        }
        assert!(checked > 4);
    }

    #[test]
    fn outflow_edges_are_tangential() {
        let g = Grid::square(16, 2.0, Boundary::Outflow).unwrap();
        let nest = build_nest_field(&g, NestKind::Point([0.0, 0.3]), None).unwrap();
        for j in 0..g.ny {
            assert_eq!(nest.b.x[g.index(0, j)], 0.0);
            assert_eq!(nest.b.x[g.index(g.nx - 1, j)], 0.0);
        }
    }

    #[test]
    fn oversized_exclusion_is_rejected() {
        let g = Grid::square(16, 1.0, Boundary::Periodic).unwrap();
        assert!(build_nest_field(&g, NestKind::Point([0.0, 0.0]), Some(5.0)).is_err());
    }
}
