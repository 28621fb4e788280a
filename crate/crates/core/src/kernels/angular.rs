//! Angular densities on the unit sphere that depend only on the cosine
//! between a direction and a reference axis.

use std::f64::consts::PI;
use std::ops::Deref;

use rand::Rng;

use super::quadrature::{circle_even_adaptive, interval_adaptive, panels};
use super::{Dim, KernelError, QUAD_TOL};

const TABULATED_PANEL_NODES: usize = 48;

/// Functional form of an angular profile `g(cos angle)`.
#[derive(Clone, Debug, PartialEq)]
pub enum AngularFamily {
    Uniform,
    /// `exp(kappa cos)`, the von Mises (n = 2) or von Mises-Fisher (n = 3) shape.
    VonMises { kappa: f64 },
    /// `((1 + cos) / 2)^power`; tends to a point mass as `power` grows.
    DeltaApproximant { power: f64 },
    /// Profile values at equispaced angles on `[0, pi]` measured from the
    /// reference axis, linearly interpolated in angle.
    Tabulated { values: Vec<f64> },
}

impl AngularFamily {
    fn validate(&self) -> Result<(), KernelError> {
        let bad = |m: String| Err(KernelError::InvalidParameter(m));
        match self {
            AngularFamily::Uniform => Ok(()),
            AngularFamily::VonMises { kappa } => {
                if !(kappa.is_finite() && *kappa >= 0.0) {
                    return bad(format!("concentration must be finite and >= 0, got {kappa}"));
                }
                Ok(())
            }
            AngularFamily::DeltaApproximant { power } => {
                if !(power.is_finite() && *power >= 0.0) {
                    return bad(format!("power must be finite and >= 0, got {power}"));
                }
                Ok(())
            }
            AngularFamily::Tabulated { values } => {
                if values.len() < 2 {
                    return bad("tabulated profile needs at least two values".into());
                }
                if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return bad("tabulated profile must be finite and non-negative".into());
                }
                if values.iter().all(|v| *v == 0.0) {
                    return bad("tabulated profile is identically zero".into());
                }
                Ok(())
            }
        }
    }

    /// Unnormalized profile. Defined for any real argument so that the
    /// inhomogeneous kernel can evaluate `g(|L| cos s)` with `|L| > 1`.
    pub fn profile(&self, x: f64) -> f64 {
        match self {
            AngularFamily::Uniform => 1.0,
            AngularFamily::VonMises { kappa } => (kappa * (x - 1.0)).exp(),
            AngularFamily::DeltaApproximant { power } => {
                let base = (0.5 * (1.0 + x)).max(0.0);
                if *power == 0.0 {
                    1.0
                } else {
                    base.powf(*power)
                }
            }
            AngularFamily::Tabulated { values } => {
                let angle = x.clamp(-1.0, 1.0).acos();
                let pos = angle / PI * (values.len() - 1) as f64;
                let i = (pos.floor() as usize).min(values.len() - 2);
                let t = pos - i as f64;
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    /// Upper bound of the profile on `[-1, 1]`.
    fn envelope(&self) -> f64 {
        match self {
            AngularFamily::Tabulated { values } => values.iter().cloned().fold(0.0, f64::max),
            _ => 1.0,
        }
    }

    /// The family whose profile is proportional to `x -> g(scale * x)` on
    /// `[-1, 1]`, when that family is closed under scaling.
    pub(crate) fn scaled_argument(&self, scale: f64) -> Option<AngularFamily> {
        match self {
            AngularFamily::Uniform => Some(AngularFamily::Uniform),
            AngularFamily::VonMises { kappa } => Some(AngularFamily::VonMises {
                kappa: kappa * scale,
            }),
            _ => None,
        }
    }
}

/// A normalized angular density `x -> g(x . e) / N` on the unit sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularDensity {
    family: AngularFamily,
    dim: Dim,
    normalizer: f64,
}

impl AngularDensity {
    /// Builds the density, computing the normalizer by quadrature.
    pub fn new(family: AngularFamily, dim: Dim) -> Result<Self, KernelError> {
        family.validate()?;
        let raw = AngularDensity {
            family,
            dim,
            normalizer: 1.0,
        };
        let normalizer = raw.integrate(|c, _| raw.family.profile(c), QUAD_TOL)?;
        Ok(AngularDensity { normalizer, ..raw })
    }

    /// Uses the profile as given, without normalizing. Operations that need a
    /// probability density reject it unless it already integrates to one.
    pub fn unnormalized(family: AngularFamily, dim: Dim) -> Result<Self, KernelError> {
        family.validate()?;
        Ok(AngularDensity {
            family,
            dim,
            normalizer: 1.0,
        })
    }

    pub fn uniform(dim: Dim) -> Self {
        AngularDensity {
            family: AngularFamily::Uniform,
            dim,
            normalizer: dim.surface_area(),
        }
    }

    pub fn von_mises(kappa: f64, dim: Dim) -> Result<Self, KernelError> {
        Self::new(AngularFamily::VonMises { kappa }, dim)
    }

    pub fn family(&self) -> &AngularFamily {
        &self.family
    }

    pub fn dim(&self) -> Dim {
        self.dim
    }

    /// Density value at cosine `c` to the reference axis.
    pub fn value(&self, c: f64) -> f64 {
        self.family.profile(c) / self.normalizer
    }

    /// `int_S h(theta . e, |theta x e|) d theta` for a zonal integrand `h(cos, sin)`.
    pub fn integrate(
        &self,
        h: impl Fn(f64, f64) -> f64,
        tol: f64,
    ) -> Result<f64, KernelError> {
        if let AngularFamily::Tabulated { values } = &self.family {
            // piecewise linear in angle: integrate panel by panel in the polar angle
            let breaks: Vec<f64> = (0..values.len())
                .map(|i| PI * i as f64 / (values.len() - 1) as f64)
                .collect();
            let (sc, n) = match self.dim {
                Dim::Two => (2.0, 0.0),
                Dim::Three => (2.0 * PI, 1.0),
            };
            let f = |s: f64| {
                let (sn, c) = s.sin_cos();
                h(c, sn) * sn.powf(n)
            };
            return Ok(sc * panels(f, &breaks, TABULATED_PANEL_NODES));
        }
        match self.dim {
            Dim::Two => circle_even_adaptive(h, tol),
            Dim::Three => Ok(2.0
                * PI
                * interval_adaptive(|u| h(u, (1.0 - u * u).max(0.0).sqrt()), tol)?),
        }
    }

    /// Total mass `int_S density`.
    pub fn mass(&self) -> Result<f64, KernelError> {
        self.integrate(|c, _| self.value(c), QUAD_TOL)
    }

    /// Rejects densities whose mass differs from one by more than `tol`.
    pub fn check_normalized(&self, tol: f64) -> Result<(), KernelError> {
        let integral = self.mass()?;
        if (integral - 1.0).abs() > tol {
            return Err(KernelError::NotNormalized { integral });
        }
        Ok(())
    }

    /// Draws a signed angle `phi` in `(-pi, pi]` from the axis, with density
    /// proportional to `g(cos phi)` on the circle.
    pub fn sample_offset<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        debug_assert_eq!(self.dim, Dim::Two, "angular sampling is planar");
        match &self.family {
            AngularFamily::Uniform => uniform_angle(rng),
            AngularFamily::VonMises { kappa } => sample_von_mises(*kappa, rng),
            family => {
                let env = family.envelope();
                loop {
                    let phi = uniform_angle(rng);
                    if rng.random::<f64>() * env <= family.profile(phi.cos()) {
                        return phi;
                    }
                }
            }
        }
    }
}

fn uniform_angle<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    PI * (2.0 * rng.random::<f64>() - 1.0)
}

/// Best-Fisher rejection sampler for the von Mises distribution.
fn sample_von_mises<R: Rng + ?Sized>(kappa: f64, rng: &mut R) -> f64 {
    if kappa < 1e-8 {
        return uniform_angle(rng);
    }
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let angle = f.clamp(-1.0, 1.0).acos();
            return if rng.random::<bool>() { angle } else { -angle };
        }
    }
}

/// Turning kernel `k(|eta - theta|)` of the random reorientation.
#[derive(Clone, Debug, PartialEq)]
pub struct TurnKernel(pub AngularDensity);

impl TurnKernel {
    pub fn new(family: AngularFamily, dim: Dim) -> Result<Self, KernelError> {
        match family {
            AngularFamily::DeltaApproximant { .. } => Err(KernelError::InvalidParameter(
                "turn kernels are uniform, von Mises or tabulated".into(),
            )),
            f => AngularDensity::new(f, dim).map(TurnKernel),
        }
    }
}

impl Deref for TurnKernel {
    type Target = AngularDensity;
    fn deref(&self) -> &AngularDensity {
        &self.0
    }
}

/// Distribution `Phi(Lambda . eta)` of the new direction after alignment.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentDistribution(pub AngularDensity);

impl AlignmentDistribution {
    pub fn new(family: AngularFamily, dim: Dim) -> Result<Self, KernelError> {
        AngularDensity::new(family, dim).map(AlignmentDistribution)
    }
}

impl Deref for AlignmentDistribution {
    type Target = AngularDensity;
    fn deref(&self) -> &AngularDensity {
        &self.0
    }
}
