//! Closure coefficients of the macroscopic equations, by quadrature.

use std::f64::consts::PI;

use super::quadrature::{circle, circle_adaptive, sphere_nodes};
use super::{AlignmentDistribution, AngularDensity, Dim, KernelError, TurnKernel, QUAD_TOL};
use crate::params::ModelParams;

const NORMALIZATION_TOL: f64 = 1e-8;

/// Second eigenvalue `nu1 = int_S k(|eta - e1|) eta_1 d eta` of the turn operator.
pub fn eigenvalue_nu1(k: &TurnKernel) -> Result<f64, KernelError> {
    k.check_normalized(NORMALIZATION_TOL)?;
    first_moment(k)
}

/// `z` with `int_S theta Phi(Lambda . theta) d theta = z Lambda`.
pub fn coefficient_z(phi: &AlignmentDistribution) -> Result<f64, KernelError> {
    phi.check_normalized(NORMALIZATION_TOL)?;
    first_moment(phi)
}

fn first_moment(d: &AngularDensity) -> Result<f64, KernelError> {
    d.integrate(|c, _| d.value(c) * c, QUAD_TOL)
}

/// Weight used for `a1` in three dimensions.
///
/// `SinCubed` is the surface-element-consistent `pi int Phi(cos s) sin^3 s ds`;
/// `AsPrinted` keeps an extra `sin s` factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum A1Variant {
    #[default]
    SinCubed,
    AsPrinted,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ACoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a3: f64,
}

/// Second angular moments of `Phi` along and across the mean direction.
pub fn coefficients_a(
    phi: &AlignmentDistribution,
    variant: A1Variant,
) -> Result<ACoefficients, KernelError> {
    phi.check_normalized(NORMALIZATION_TOL)?;
    let (a0, a1) = match phi.dim() {
        Dim::Two => (
            phi.integrate(|c, _| phi.value(c) * c * c, QUAD_TOL)?,
            phi.integrate(|c, s| phi.value(c) * s * s, QUAD_TOL)?,
        ),
        Dim::Three => {
            // integrate() supplies the 2 pi sin s surface element.
            let a0 = phi.integrate(|c, _| phi.value(c) * c * c, QUAD_TOL)?;
            let a1 = match variant {
                A1Variant::SinCubed => 0.5 * phi.integrate(|c, s| phi.value(c) * s * s, QUAD_TOL)?,
                A1Variant::AsPrinted => {
                    0.5 * phi.integrate(|c, s| phi.value(c) * s * s * s, QUAD_TOL)?
                }
            };
            (a0, a1)
        }
    };
    Ok(ACoefficients {
        a0,
        a1,
        a3: a0 - a1,
    })
}

/// Coefficients of the inhomogeneous (un-normalized) alignment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InhomogeneousCoefficients {
    pub z_bar: f64,
    pub a0_bar: f64,
    pub a1_bar: f64,
    pub a3_bar: f64,
}

impl InhomogeneousCoefficients {
    const ZERO: InhomogeneousCoefficients = InhomogeneousCoefficients {
        z_bar: 0.0,
        a0_bar: 0.0,
        a1_bar: 0.0,
        a3_bar: 0.0,
    };
}

fn inhomogeneous_from(
    phi: &AlignmentDistribution,
    lambda_norm: f64,
    integrate: impl Fn(&dyn Fn(f64) -> f64) -> Result<f64, KernelError>,
) -> Result<InhomogeneousCoefficients, KernelError> {
    if lambda_norm == 0.0 {
        return Ok(InhomogeneousCoefficients::ZERO);
    }
    let scaled = phi.family().scaled_argument(lambda_norm);
    let g = |c: f64| match &scaled {
        Some(f) => f.profile(c),
        None => phi.family().profile(lambda_norm * c),
    };
    let mass = integrate(&|s: f64| g(s.cos()))?;
    if mass <= 0.0 || !mass.is_finite() {
        return Err(KernelError::InvalidParameter(format!(
            "renormalized alignment has mass {mass} at |Lambda*| = {lambda_norm}"
        )));
    }
    // subtracting g(0) keeps the odd moment accurate when |Lambda*| is tiny
    let g0 = g(0.0);
    let m1 = integrate(&|s: f64| (g(s.cos()) - g0) * s.cos())?;
    let m2c = integrate(&|s: f64| g(s.cos()) * s.cos().powi(2))?;
    let m2s = integrate(&|s: f64| g(s.cos()) * s.sin().powi(2))?;
    let l2 = lambda_norm * lambda_norm;
    let a0_bar = l2 * m2c / mass;
    let a1_bar = l2 * m2s / mass;
    Ok(InhomogeneousCoefficients {
        z_bar: lambda_norm * m1 / mass,
        a0_bar,
        a1_bar,
        a3_bar: a0_bar - a1_bar,
    })
}

/// `z_bar`, `a0_bar`, `a1_bar`, `a3_bar` as functions of `|Lambda*|` (planar only).
pub fn coefficients_inhomogeneous(
    phi: &AlignmentDistribution,
    lambda_norm: f64,
) -> Result<InhomogeneousCoefficients, KernelError> {
    if phi.dim() != Dim::Two {
        return Err(KernelError::UnsupportedDimension(phi.dim().n()));
    }
    if !(lambda_norm >= 0.0 && lambda_norm.is_finite()) {
        return Err(KernelError::InvalidParameter(format!(
            "|Lambda*| must be finite and >= 0, got {lambda_norm}"
        )));
    }
    phi.check_normalized(NORMALIZATION_TOL)?;
    inhomogeneous_from(phi, lambda_norm, |f| circle_adaptive(f, QUAD_TOL))
}

/// Fixed-node variant for per-cell evaluation inside the solvers.
pub fn coefficients_inhomogeneous_fixed(
    phi: &AlignmentDistribution,
    lambda_norm: f64,
    nodes: usize,
) -> InhomogeneousCoefficients {
    inhomogeneous_from(phi, lambda_norm.max(0.0), |f| Ok(circle(f, nodes)))
        .unwrap_or(InhomogeneousCoefficients::ZERO)
}

/// First and second angular moments of the passive base turning distribution.
///
/// The distribution is taken about the first coordinate axis; use
/// [`B0Moments::rotated`] to orient it along the nest field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct B0Moments {
    pub dim: Dim,
    /// `int_S theta B0 d theta`.
    pub mean: [f64; 3],
    /// `int_S theta theta^T B0 d theta`.
    pub second: [[f64; 3]; 3],
    /// `c_p / (|S| beta) int_S theta theta^T B0 d theta`.
    pub d_tensor: [[f64; 3]; 3],
}

impl B0Moments {
    /// Planar mean and diffusion tensor with the axis turned onto `dir`.
    pub fn rotated(&self, dir: [f64; 2]) -> ([f64; 2], [[f64; 2]; 2]) {
        let (c, s) = (dir[0], dir[1]);
        let m = [self.mean[0] * c - self.mean[1] * s, self.mean[0] * s + self.mean[1] * c];
        let d = &self.d_tensor;
        let r = [[c, -s], [s, c]];
        let mut out = [[0.0; 2]; 2];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, o) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        acc += r[i][k] * d[k][l] * r[j][l];
                    }
                }
                *o = acc;
            }
        }
        (m, out)
    }

    /// Largest eigenvalue of the planar diffusion tensor.
    pub fn max_diffusion(&self) -> f64 {
        let d = &self.d_tensor;
        let tr = d[0][0] + d[1][1];
        let det = d[0][0] * d[1][1] - d[0][1] * d[1][0];
        0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt()
    }
}

// Integrates every component of a vector-valued integrand over S, refining
// until all components settle.
fn sphere_components<const K: usize>(
    dim: Dim,
    f: impl Fn(&[f64; 3]) -> [f64; K],
) -> Result<[f64; K], KernelError> {
    let eval = |level: usize| -> [f64; K] {
        let mut acc = [0.0; K];
        match dim {
            Dim::Two => {
                let n = 64usize << level;
                let h = 2.0 * PI / n as f64;
                for k in 0..n {
                    let a = k as f64 * h;
                    let v = f(&[a.cos(), a.sin(), 0.0]);
                    for (o, x) in acc.iter_mut().zip(v) {
                        *o += x * h;
                    }
                }
            }
            Dim::Three => {
                let np = 16usize << level;
                for (d, w) in sphere_nodes(np, 2 * np) {
                    let v = f(&d);
                    for (o, x) in acc.iter_mut().zip(v) {
                        *o += x * w;
                    }
                }
            }
        }
        acc
    };
    let max_level = match dim {
        Dim::Two => 10,
        Dim::Three => 5,
    };
    let mut prev = eval(0);
    let mut change = f64::INFINITY;
    for level in 1..=max_level {
        let next = eval(level);
        change = prev
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let scale = next.iter().map(|x| x.abs()).fold(1.0, f64::max);
        if change <= QUAD_TOL * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(KernelError::QuadratureNotConverged {
        tol: QUAD_TOL,
        change,
        nodes: 64 << max_level,
    })
}

/// Mean direction and diffusion tensor of the passive base turning density.
pub fn b0_moments(b0: &AngularDensity, c_p: f64, beta: f64) -> Result<B0Moments, KernelError> {
    b0.check_normalized(NORMALIZATION_TOL)?;
    if !(beta > 0.0) {
        return Err(KernelError::InvalidParameter(format!("beta must be > 0, got {beta}")));
    }
    let dim = b0.dim();
    let v = sphere_components::<9>(dim, |t| {
        let w = b0.value(t[0]);
        [
            w * t[0],
            w * t[1],
            w * t[2],
            w * t[0] * t[0],
            w * t[0] * t[1],
            w * t[0] * t[2],
            w * t[1] * t[1],
            w * t[1] * t[2],
            w * t[2] * t[2],
        ]
    })?;
    let second = [[v[3], v[4], v[5]], [v[4], v[6], v[7]], [v[5], v[7], v[8]]];
    let scale = c_p / (dim.surface_area() * beta);
    let mut d_tensor = second;
    d_tensor
        .iter_mut()
        .flatten()
        .for_each(|x| *x *= scale);
    Ok(B0Moments {
        dim,
        mean: [v[0], v[1], v[2]],
        second,
        d_tensor,
    })
}

/// First-order corrections of the hyperbolic passive-leader equation for a
/// spatially homogeneous, stationary base distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbolicCorrections {
    /// `Q1 = (1/beta) int_S theta . q1 d theta`, `q1 = c_p B0 (theta - n B0_mean)`.
    pub q1: f64,
    /// `Q2 = -(1/beta) int_S theta q2 d theta`; zero because `B0` has no
    /// gradient and no time dependence.
    pub q2: [f64; 3],
    /// `|S| B0_mean - int_S theta A(theta) d theta`, to be multiplied by the
    /// local streaker-to-passive rate. `A` is the normalized angular factor of
    /// that rate.
    pub streaker_drift_per_rate: [f64; 3],
}

pub fn hyperbolic_corrections(
    b0: &AngularDensity,
    angular_factor: &AngularDensity,
    c_p: f64,
    beta: f64,
) -> Result<HyperbolicCorrections, KernelError> {
    let moments = b0_moments(b0, c_p, beta)?;
    angular_factor.check_normalized(NORMALIZATION_TOL)?;
    let dim = b0.dim();
    let n = dim.n() as f64;
    let m = moments.mean;
    let [q1_int] = sphere_components::<1>(dim, |t| {
        let dot = t[0] * m[0] + t[1] * m[1] + t[2] * m[2];
        [c_p * b0.value(t[0]) * (1.0 - n * dot)]
    })?;
    let a = sphere_components::<3>(dim, |t| {
        let w = angular_factor.value(t[0]);
        [w * t[0], w * t[1], w * t[2]]
    })?;
    let area = dim.surface_area();
    Ok(HyperbolicCorrections {
        q1: q1_int / beta,
        q2: [0.0; 3],
        streaker_drift_per_rate: [
            area * m[0] - a[0],
            area * m[1] - a[1],
            area * m[2] - a[2],
        ],
    })
}

/// How the drift and diffusion coefficients of the parabolic follower
/// equation are normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FollowerClosure {
    /// `D = z(1-zeta)/(1-zeta nu1)`, `C_f = c_f/(beta(1-zeta nu1))`.
    #[default]
    FinalSystem,
    /// Both coefficients carry the `1/n` of the mean-direction expansion.
    MeanDirection,
    /// `D` without and `C_f` with the `1/n`; matches the Chapman-Enskog
    /// expansion of the kinetic solver and the velocity-jump diffusion constant.
    KineticConsistent,
}

impl FollowerClosure {
    /// `(D_align, C_f)`.
    pub fn coefficients(self, z: f64, zeta: f64, nu1: f64, c_f: f64, beta: f64, n: f64) -> (f64, f64) {
        let denom = 1.0 - zeta * nu1;
        let d = z * (1.0 - zeta) / denom;
        let c = c_f / (beta * denom);
        match self {
            FollowerClosure::FinalSystem => (d, c),
            FollowerClosure::MeanDirection => (d / n, c / n),
            FollowerClosure::KineticConsistent => (d, c / n),
        }
    }
}

/// Every coefficient the macroscopic solvers need.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub dim: Dim,
    pub nu1: f64,
    pub z: f64,
    pub a: ACoefficients,
    pub b0: B0Moments,
    /// Follower alignment drift coefficient.
    pub d_align: f64,
    /// Follower diffusion coefficient (multiplied by `c_f` in the equation).
    pub c_f_diff: f64,
    /// `c_f (1 - zeta) a3`.
    pub c1: f64,
    /// `c_f (1 - zeta) a1 + c_f zeta |S| / n`.
    pub c2: f64,
    pub hyperbolic: HyperbolicCorrections,
    pub closure: FollowerClosure,
}

impl CoefficientSet {
    pub fn compute(
        turn: &TurnKernel,
        alignment: &AlignmentDistribution,
        b0: &AngularDensity,
        switch_angular: &AngularDensity,
        params: &ModelParams,
        closure: FollowerClosure,
        a1_variant: A1Variant,
    ) -> Result<Self, KernelError> {
        let dim = alignment.dim();
        let n = dim.n() as f64;
        let nu1 = eigenvalue_nu1(turn)?;
        let z = coefficient_z(alignment)?;
        let a = coefficients_a(alignment, a1_variant)?;
        let b0m = b0_moments(b0, params.c_p, params.beta)?;
        let hyperbolic = hyperbolic_corrections(b0, switch_angular, params.c_p, params.beta)?;
        let zeta = params.zeta;
        let (d_align, c_f_diff) = closure.coefficients(z, zeta, nu1, params.c_f, params.beta, n);
        Ok(CoefficientSet {
            dim,
            nu1,
            z,
            a,
            b0: b0m,
            d_align,
            c_f_diff,
            c1: params.c_f * (1.0 - zeta) * a.a3,
            c2: params.c_f * (1.0 - zeta) * a.a1 + params.c_f * zeta * dim.surface_area() / n,
            hyperbolic,
            closure,
        })
    }

    /// Speed `c_f z (1 - zeta)` of the hyperbolic follower transport.
    pub fn hyperbolic_follower_speed(&self, params: &ModelParams) -> f64 {
        params.c_f * self.z * (1.0 - params.zeta)
    }
}
