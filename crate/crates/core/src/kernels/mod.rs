//! Angular and spatial kernels, and the closure coefficients of the
//! macroscopic equations.
//!
//! All coefficients are computed by quadrature from the kernel definitions;
//! nothing is evaluated in closed form. Objects are immutable once built and
//! may be shared freely across threads.

mod angular;
mod coefficients;
mod interaction;
pub mod quadrature;
mod turn;

use std::f64::consts::PI;

use thiserror::Error;

pub use angular::{AlignmentDistribution, AngularDensity, AngularFamily, TurnKernel};
pub use coefficients::{
    b0_moments, coefficient_z, coefficients_a, coefficients_inhomogeneous,
    coefficients_inhomogeneous_fixed, eigenvalue_nu1, hyperbolic_corrections, A1Variant,
    ACoefficients, B0Moments, CoefficientSet, FollowerClosure, HyperbolicCorrections,
    InhomogeneousCoefficients,
};
pub use interaction::{InteractionFamily, InteractionKernel};
pub use turn::{AngularGrid, DiscreteTurn};

use crate::params::ModelParams;

/// Default tolerance for adaptive quadrature and normalization checks.
pub const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("kernel is not normalized: integral = {integral}")]
    NotNormalized { integral: f64 },
    #[error("quadrature did not converge to {tol:e} (last change {change:e} at {nodes} nodes)")]
    QuadratureNotConverged { tol: f64, change: f64, nodes: usize },
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("angular grid mismatch: expected {expected} nodes, got {got}")]
    GridMismatch { expected: usize, got: usize },
}

/// Dimension of the velocity sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Dim {
    Two,
    Three,
}

impl Dim {
    pub fn from_usize(n: usize) -> Result<Dim, KernelError> {
        match n {
            2 => Ok(Dim::Two),
            3 => Ok(Dim::Three),
            other => Err(KernelError::UnsupportedDimension(other)),
        }
    }

    pub fn n(self) -> usize {
        match self {
            Dim::Two => 2,
            Dim::Three => 3,
        }
    }

    /// Surface area `|S|` of the unit sphere.
    pub fn surface_area(self) -> f64 {
        match self {
            Dim::Two => 2.0 * PI,
            Dim::Three => 4.0 * PI,
        }
    }
}

/// The kernels of one model instance.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSet {
    pub turn: TurnKernel,
    pub alignment: AlignmentDistribution,
    /// Base turning density of passive leaders, about `+b`.
    pub b0: AngularDensity,
    /// Direction density of a streaker that turns passive, about `+b`.
    pub switch_angular: AngularDensity,
    pub interaction: InteractionKernel,
}

impl KernelSet {
    /// Planar von Mises kernels (turn 2, alignment 4, passive base 2), uniform
    /// re-entry and a Gaussian interaction of width 0.25.
    pub fn planar_default() -> Self {
        KernelSet {
            turn: TurnKernel::new(AngularFamily::VonMises { kappa: 2.0 }, Dim::Two).expect("valid"),
            alignment: AlignmentDistribution::new(AngularFamily::VonMises { kappa: 4.0 }, Dim::Two)
                .expect("valid"),
            b0: AngularDensity::von_mises(2.0, Dim::Two).expect("valid"),
            switch_angular: AngularDensity::uniform(Dim::Two),
            interaction: InteractionKernel::new(InteractionFamily::Gaussian { sigma: 0.25 })
                .expect("valid"),
        }
    }

    pub fn coefficients(
        &self,
        params: &ModelParams,
        closure: FollowerClosure,
        a1: A1Variant,
    ) -> Result<CoefficientSet, KernelError> {
        CoefficientSet::compute(
            &self.turn,
            &self.alignment,
            &self.b0,
            &self.switch_angular,
            params,
            closure,
            a1,
        )
    }
}
