//! Deterministic solvers for the angle-resolved kinetic system and for its
//! parabolic and hyperbolic macroscopic limits.
//!
//! All schemes are explicit finite-volume schemes on the cell-centered grid
//! of [`crate::fields`]. Fluxes through the edges of an outflow grid are
//! closed (kinetic densities are specularly reflected), so every stepper
//! conserves follower and leader mass on both boundary types.

mod hyperbolic;
mod kinetic;
mod parabolic;
mod sweep;
mod transport;

use thiserror::Error;

use crate::exec::Parallelism;
use crate::fields::{
    alignment_flux_grid, AlignmentMode, FieldError, FluxOutput, FluxSources, Grid, NestField,
    ScalarField, VectorField,
};
use crate::kernels::{CoefficientSet, KernelError, KernelSet};
use crate::params::ModelParams;

pub use hyperbolic::HyperbolicSolver;
pub use kinetic::{moments, KineticSolver, KineticState};
pub use parabolic::ParabolicSolver;
pub use sweep::{sweep_stationary, SweepReport};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("CFL violated: dt = {dt:e} exceeds the stable step {limit:e}")]
    Cfl { dt: f64, limit: f64 },
    #[error("density {value:e} below -{tol:e} at cell {cell}")]
    NegativeDensity { value: f64, cell: usize, tol: f64 },
    #[error("streaker sweep did not converge after {iterations} sweeps (last change {change:e})")]
    SweepNonConvergence { iterations: usize, change: f64 },
    #[error("invalid solver setup: {0}")]
    InvalidSetup(String),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Limit {
    #[default]
    Kinetic,
    Parabolic,
    Hyperbolic,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum KernelMode {
    /// Alignment along the normalized flux `Lambda = J / |J|`.
    #[default]
    Homogeneous,
    /// Alignment along `Lambda* = nu J`, without normalization.
    Inhomogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingParams {
    /// Scale separation; used by the kinetic solver to rescale speeds and
    /// rates, and by the hyperbolic correction terms.
    pub epsilon: f64,
    /// Which scaling the kinetic solver applies; `Kinetic` leaves it unscaled.
    pub limit: Limit,
    pub kernel_mode: KernelMode,
    /// Relaxation frequency in `Lambda* = nu J`.
    pub nu: f64,
    pub epsilon_corrections: bool,
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            epsilon: 1.0,
            limit: Limit::Kinetic,
            kernel_mode: KernelMode::Homogeneous,
            nu: 1.0,
            epsilon_corrections: false,
        }
    }
}

impl ScalingParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(SolverError::InvalidSetup(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(SolverError::InvalidSetup(format!("nu must be > 0, got {}", self.nu)));
        }
        Ok(())
    }
}

/// Where the follower alignment direction comes from.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum AlignmentSource {
    /// Nonlocal flux of the current state.
    #[default]
    Flux,
    /// A prescribed constant direction (normalized on use).
    Fixed([f64; 2]),
    /// No alignment drift.
    Zero,
}

/// Everything a stepper needs besides the evolving state.
#[derive(Clone, Debug)]
pub struct SolverSetup {
    pub grid: Grid,
    pub nest: NestField,
    pub params: ModelParams,
    pub kernels: KernelSet,
    pub coeffs: CoefficientSet,
    pub scaling: ScalingParams,
    pub alignment_mode: AlignmentMode,
    pub alignment: AlignmentSource,
    /// Replaces the evolving follower density in the switching rates.
    pub frozen_rho_f: Option<ScalarField>,
    /// Minmod-limited linear reconstruction instead of first-order upwind.
    pub limiter: bool,
    pub par: Parallelism,
}

impl SolverSetup {
    pub fn validate(&self) -> Result<(), SolverError> {
        self.scaling.validate()?;
        self.grid.check_same(&self.nest.b.grid)?;
        if let Some(r) = &self.frozen_rho_f {
            self.grid.check_same(&r.grid)?;
        }
        let p = &self.params;
        if !(0.0..=1.0).contains(&p.zeta) {
            return Err(SolverError::InvalidSetup(format!("zeta must lie in [0, 1], got {}", p.zeta)));
        }
        if p.lambda < 0.0 {
            return Err(FieldError::NegativeLambda(p.lambda).into());
        }
        if !(p.beta > 0.0) {
            return Err(SolverError::InvalidSetup(format!("beta must be > 0, got {}", p.beta)));
        }
        Ok(())
    }

    /// Alignment flux from gridded sources.
    pub(crate) fn flux(
        &self,
        heading_flux: Option<&VectorField>,
        rho_s: Option<&ScalarField>,
    ) -> Result<FluxOutput, SolverError> {
        let src = FluxSources {
            heading_flux,
            rho_s,
            b: &self.nest.b,
        };
        Ok(alignment_flux_grid(
            src,
            &self.kernels.interaction,
            self.params.lambda,
            self.alignment_mode,
            self.par,
        )?)
    }
}

/// Macroscopic densities plus the evolved direction field.
#[derive(Clone, Debug, PartialEq)]
pub struct MacroState {
    pub t: f64,
    pub rho_f: ScalarField,
    pub rho_p: ScalarField,
    pub rho_s: ScalarField,
    /// `Lambda` (unit) or `Lambda*` in inhomogeneous mode; zero where undefined.
    pub lambda: VectorField,
}

impl MacroState {
    pub fn new(rho_f: ScalarField, rho_p: ScalarField, rho_s: ScalarField) -> Self {
        let grid = rho_f.grid;
        MacroState {
            t: 0.0,
            rho_f,
            rho_p,
            rho_s,
            lambda: VectorField::zeros(grid),
        }
    }

    pub fn follower_mass(&self) -> f64 {
        self.rho_f.total()
    }

    pub fn leader_mass(&self) -> f64 {
        self.rho_p.total() + self.rho_s.total()
    }
}

/// One row of the per-step diagnostics stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub t: f64,
    pub mass_f: f64,
    pub mass_l: f64,
    pub min_density: f64,
    /// `dt` divided by the stable step.
    pub cfl: f64,
}

pub(crate) fn check_dt(dt: f64, limit: f64) -> Result<(), SolverError> {
    if !(dt > 0.0) || dt > limit * (1.0 + 1e-12) {
        return Err(SolverError::Cfl { dt, limit });
    }
    Ok(())
}

pub(crate) fn min_of(fields: &[&ScalarField]) -> f64 {
    fields.iter().map(|f| f.min()).fold(f64::INFINITY, f64::min)
}

/// Turns a vector given in the frame whose first axis is `e1` onto the unit vector `b`.
pub(crate) fn turn_onto(v: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [v[0] * b[0] - v[1] * b[1], v[0] * b[1] + v[1] * b[0]]
}
