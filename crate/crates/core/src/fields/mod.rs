//! Rectangular cell-centered grids, scalar and vector fields on them, and the
//! spatial operators shared by the solvers and the particle simulator.

mod flux;
mod io;
mod kde;
mod nest;
mod ops;

use thiserror::Error;

use crate::exec;

pub use flux::{alignment_flux_grid, alignment_flux_particles, AlignmentMode, FluxOutput, FluxSources};
pub use kde::{kde_density, kde_weighted, DEFAULT_BANDWIDTH_CELLS};
pub use nest::{build_nest_field, NestField, NestKind, STREAKER_HEADING_SIGN};
pub use ops::{divergence, gradient};

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("bandwidth {bandwidth} is below the floor of two cells ({floor})")]
    BandwidthTooSmall { bandwidth: f64, floor: f64 },
    #[error("nest exclusion radius {radius} exceeds the domain size {size}")]
    ExclusionTooLarge { radius: f64, size: f64 },
    #[error("visibility weight must be >= 0, got {0}")]
    NegativeLambda(f64),
    #[error("malformed field file: {0}")]
    Format(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Boundary {
    #[default]
    Periodic,
    Outflow,
}

/// Uniform cell-centered grid on `[x_min, x_max] x [y_min, y_max]`.
///
/// Cells are stored row-major: `k = j * nx + i`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub boundary: Boundary,
}

impl Grid {
    pub fn new(
        nx: usize,
        ny: usize,
        x: [f64; 2],
        y: [f64; 2],
        boundary: Boundary,
    ) -> Result<Grid, FieldError> {
        if nx < 4 || ny < 4 {
            return Err(FieldError::InvalidGrid(format!(
                "need at least 4 cells per axis, got {nx} x {ny}"
            )));
        }
        if !(x[1] > x[0]) || !(y[1] > y[0]) || !x.iter().chain(&y).all(|v| v.is_finite()) {
            return Err(FieldError::InvalidGrid(format!(
                "extent must be finite and increasing, got x {x:?}, y {y:?}"
            )));
        }
        Ok(Grid {
            nx,
            ny,
            x_min: x[0],
            x_max: x[1],
            y_min: y[0],
            y_max: y[1],
            boundary,
        })
    }

    /// Square grid of `n x n` cells on `[-half, half]^2`.
    pub fn square(n: usize, half: f64, boundary: Boundary) -> Result<Grid, FieldError> {
        Grid::new(n, n, [-half, half], [-half, half], boundary)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, k: usize) -> (usize, usize) {
        (k % self.nx, k / self.nx)
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [
            self.x_min + (i as f64 + 0.5) * self.hx(),
            self.y_min + (j as f64 + 0.5) * self.hy(),
        ]
    }

    pub fn center_of(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.coords(k);
        self.center(i, j)
    }

    /// Neighbor index along x at offset `d`; `None` past an outflow edge.
    pub fn shift_x(&self, i: usize, d: i64) -> Option<usize> {
        shift(i, d, self.nx, self.boundary)
    }

    pub fn shift_y(&self, j: usize, d: i64) -> Option<usize> {
        shift(j, d, self.ny, self.boundary)
    }

    /// Maps a point back into the domain on periodic grids.
    pub fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        match self.boundary {
            Boundary::Periodic => [
                self.x_min + (p[0] - self.x_min).rem_euclid(self.width()),
                self.y_min + (p[1] - self.y_min).rem_euclid(self.height()),
            ],
            Boundary::Outflow => p,
        }
    }

    /// Displacement `b - a`, using the minimum image on periodic grids.
    pub fn displacement(&self, a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
        let mut d = [b[0] - a[0], b[1] - a[1]];
        if self.boundary == Boundary::Periodic {
            let (w, h) = (self.width(), self.height());
            d[0] -= w * (d[0] / w).round();
            d[1] -= h * (d[1] / h).round();
        }
        d
    }

    /// Cell containing `p` (clamped to the domain).
    pub fn locate(&self, p: [f64; 2]) -> (usize, usize) {
        let p = self.wrap(p);
        let fi = ((p[0] - self.x_min) / self.hx()).floor();
        let fj = ((p[1] - self.y_min) / self.hy()).floor();
        (
            (fi.max(0.0) as usize).min(self.nx - 1),
            (fj.max(0.0) as usize).min(self.ny - 1),
        )
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x_min && p[0] <= self.x_max && p[1] >= self.y_min && p[1] <= self.y_max
    }

    pub fn check_same(&self, other: &Grid) -> Result<(), FieldError> {
        if self != other {
            return Err(FieldError::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

fn shift(i: usize, d: i64, n: usize, boundary: Boundary) -> Option<usize> {
    let t = i as i64 + d;
    match boundary {
        Boundary::Periodic => Some(t.rem_euclid(n as i64) as usize),
        Boundary::Outflow => (0..n as i64).contains(&t).then_some(t as usize),
    }
}

// Bilinear weights of the four cell centers around `p`.
fn bilinear(grid: &Grid, p: [f64; 2]) -> [(usize, f64); 4] {
    let p = grid.wrap(p);
    let fx = (p[0] - grid.x_min) / grid.hx() - 0.5;
    let fy = (p[1] - grid.y_min) / grid.hy() - 0.5;
    let axis = |f: f64, n: usize| -> (usize, usize, f64) {
        match grid.boundary {
            Boundary::Periodic => {
                let i0 = f.floor();
                let t = f - i0;
                let a = (i0 as i64).rem_euclid(n as i64) as usize;
                (a, (a + 1) % n, t)
            }
            Boundary::Outflow => {
                let f = f.clamp(0.0, (n - 1) as f64);
                let a = (f.floor() as usize).min(n - 2);
                (a, a + 1, f - a as f64)
            }
        }
    };
    let (i0, i1, tx) = axis(fx, grid.nx);
    let (j0, j1, ty) = axis(fy, grid.ny);
    [
        (grid.index(i0, j0), (1.0 - tx) * (1.0 - ty)),
        (grid.index(i1, j0), tx * (1.0 - ty)),
        (grid.index(i0, j1), (1.0 - tx) * ty),
        (grid.index(i1, j1), tx * ty),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    pub data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Grid) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, v: f64) -> Self {
        ScalarField {
            grid,
            data: vec![v; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        ScalarField {
            grid,
            data: (0..grid.len()).map(|k| f(grid.center_of(k))).collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[self.grid.index(i, j)]
    }

    /// `int f dx` by the midpoint rule, with deterministic summation.
    pub fn total(&self) -> f64 {
        exec::sum(&self.data) * self.grid.cell_area()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    /// `int |f - g| dx`.
    pub fn l1_distance(&self, other: &ScalarField) -> Result<f64, FieldError> {
        self.grid.check_same(&other.grid)?;
        let d: Vec<f64> = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .collect();
        Ok(exec::sum(&d) * self.grid.cell_area())
    }

    pub fn linf_distance(&self, other: &ScalarField) -> Result<f64, FieldError> {
        self.grid.check_same(&other.grid)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Bilinear interpolation between cell centers.
    pub fn sample(&self, p: [f64; 2]) -> f64 {
        bilinear(&self.grid, p)
            .iter()
            .map(|&(k, w)| w * self.data[k])
            .sum()
    }

    /// Center of mass `int x f / int f`; `None` for zero mass.
    pub fn center_of_mass(&self) -> Option<[f64; 2]> {
        let m = exec::sum(&self.data);
        if m == 0.0 {
            return None;
        }
        let g = &self.grid;
        let wx: Vec<f64> = (0..g.len()).map(|k| g.center_of(k)[0] * self.data[k]).collect();
        let wy: Vec<f64> = (0..g.len()).map(|k| g.center_of(k)[1] * self.data[k]).collect();
        Some([exec::sum(&wx) / m, exec::sum(&wy) / m])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            x: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: Grid, v: [f64; 2]) -> Self {
        VectorField {
            grid,
            x: vec![v[0]; grid.len()],
            y: vec![v[1]; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut out = VectorField::zeros(grid);
        for k in 0..grid.len() {
            let v = f(grid.center_of(k));
            out.x[k] = v[0];
            out.y[k] = v[1];
        }
        out
    }

    pub fn at(&self, k: usize) -> [f64; 2] {
        [self.x[k], self.y[k]]
    }

    pub fn set(&mut self, k: usize, v: [f64; 2]) {
        self.x[k] = v[0];
        self.y[k] = v[1];
    }

    pub fn norm(&self) -> ScalarField {
        ScalarField {
            grid: self.grid,
            data: self.x.iter().zip(&self.y).map(|(a, b)| a.hypot(*b)).collect(),
        }
    }

    pub fn sample(&self, p: [f64; 2]) -> [f64; 2] {
        let mut v = [0.0; 2];
        for (k, w) in bilinear(&self.grid, p) {
            v[0] += w * self.x[k];
            v[1] += w * self.y[k];
        }
        v
    }
}

/// Gridded macroscopic state of all three populations.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldSet {
    pub rho_f: ScalarField,
    pub rho_p: ScalarField,
    pub rho_s: ScalarField,
    /// Alignment flux.
    pub j: VectorField,
    /// Normalized flux, or the magnitude-carrying variant.
    pub lambda: VectorField,
    pub w_f: VectorField,
    pub w_p: VectorField,
}

impl FieldSet {
    pub fn zeros(grid: Grid) -> Self {
        FieldSet {
            rho_f: ScalarField::zeros(grid),
            rho_p: ScalarField::zeros(grid),
            rho_s: ScalarField::zeros(grid),
            j: VectorField::zeros(grid),
            lambda: VectorField::zeros(grid),
            w_f: VectorField::zeros(grid),
            w_p: VectorField::zeros(grid),
        }
    }

    /// `rho_p + rho_s`.
    pub fn rho_leaders(&self) -> ScalarField {
        ScalarField {
            grid: self.rho_p.grid,
            data: self
                .rho_p
                .data
                .iter()
                .zip(&self.rho_s.data)
                .map(|(p, s)| p + s)
                .collect(),
        }
    }

    /// Total mean direction `W = (rho_f w_f + rho_p w_p) / (rho_f + rho_l)`.
    pub fn total_mean_direction(&self) -> VectorField {
        let g = self.rho_f.grid;
        let mut out = VectorField::zeros(g);
        for k in 0..g.len() {
            let rho = self.rho_f.data[k] + self.rho_p.data[k] + self.rho_s.data[k];
            if rho > 0.0 {
                out.x[k] = (self.rho_f.data[k] * self.w_f.x[k] + self.rho_p.data[k] * self.w_p.x[k]) / rho;
                out.y[k] = (self.rho_f.data[k] * self.w_f.y[k] + self.rho_p.data[k] * self.w_p.y[k]) / rho;
            }
        }
        out
    }
}
