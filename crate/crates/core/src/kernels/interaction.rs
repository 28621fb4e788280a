//! Radial spatial interaction kernel `K(|x - y|)` used in the alignment flux.

use std::f64::consts::PI;

use super::quadrature::interval_adaptive;
use super::{KernelError, QUAD_TOL};

#[derive(Clone, Debug, PartialEq)]
pub enum InteractionFamily {
    /// Constant inside `radius`.
    TopHat { radius: f64 },
    /// Gaussian of width `sigma`, truncated at `4 sigma`.
    Gaussian { sigma: f64 },
    /// Profile values at equispaced radii on `[0, r_max]`, linear in between.
    Tabulated { r_max: f64, values: Vec<f64> },
}

impl InteractionFamily {
    fn cutoff(&self) -> f64 {
        match self {
            InteractionFamily::TopHat { radius } => *radius,
            InteractionFamily::Gaussian { sigma } => 4.0 * sigma,
            InteractionFamily::Tabulated { r_max, .. } => *r_max,
        }
    }

    fn profile(&self, r: f64) -> f64 {
        if r > self.cutoff() {
            return 0.0;
        }
        match self {
            InteractionFamily::TopHat { .. } => 1.0,
            InteractionFamily::Gaussian { sigma } => (-0.5 * (r / sigma).powi(2)).exp(),
            InteractionFamily::Tabulated { r_max, values } => {
                let pos = r / r_max * (values.len() - 1) as f64;
                let i = (pos.floor() as usize).min(values.len() - 2);
                let t = pos - i as f64;
                values[i] * (1.0 - t) + values[i + 1] * t
            }
        }
    }

    fn validate(&self) -> Result<(), KernelError> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(KernelError::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        match self {
            InteractionFamily::TopHat { radius } => positive("interaction radius", *radius),
            InteractionFamily::Gaussian { sigma } => positive("interaction width", *sigma),
            InteractionFamily::Tabulated { r_max, values } => {
                positive("interaction range", *r_max)?;
                if values.len() < 2 || values.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(KernelError::InvalidParameter(
                        "tabulated interaction needs >= 2 finite non-negative values".into(),
                    ));
                }
                Ok(())
            }
        }
    }
}

/// Planar radial kernel normalized to `int_R2 K = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionKernel {
    family: InteractionFamily,
    normalizer: f64,
}

impl InteractionKernel {
    pub fn new(family: InteractionFamily) -> Result<Self, KernelError> {
        family.validate()?;
        let rc = family.cutoff();
        // 2 pi int_0^rc K(r) r dr, mapped to [-1, 1]
        let mass = match &family {
            InteractionFamily::TopHat { radius } => PI * radius * radius,
            _ => {
                let half = 0.5 * rc;
                2.0 * PI
                    * half
                    * interval_adaptive(
                        |u| {
                            let r = half * (u + 1.0);
                            family.profile(r) * r
                        },
                        QUAD_TOL,
                    )?
            }
        };
        if !(mass > 0.0) {
            return Err(KernelError::InvalidParameter(
                "interaction kernel has zero mass".into(),
            ));
        }
        Ok(InteractionKernel {
            family,
            normalizer: mass,
        })
    }

    pub fn family(&self) -> &InteractionFamily {
        &self.family
    }

    pub fn cutoff(&self) -> f64 {
        self.family.cutoff()
    }

    pub fn value(&self, r: f64) -> f64 {
        self.family.profile(r) / self.normalizer
    }

    /// Cell offsets and weights for a grid with spacings `hx`, `hy`.
    ///
    /// Weights include the cell area and are rescaled to sum to one, so a
    /// constant field is reproduced exactly.
    pub fn stencil(&self, hx: f64, hy: f64) -> Vec<(i64, i64, f64)> {
        let rc = self.cutoff();
        let ix = (rc / hx).floor() as i64;
        let iy = (rc / hy).floor() as i64;
        let mut out = Vec::new();
        for j in -iy..=iy {
            for i in -ix..=ix {
                let r = ((i as f64 * hx).powi(2) + (j as f64 * hy).powi(2)).sqrt();
                let w = self.value(r);
                if w > 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        let total: f64 = out.iter().map(|t| t.2).sum();
        if total > 0.0 {
            out.iter_mut().for_each(|t| t.2 /= total);
        } else {
            out = vec![(0, 0, 1.0)];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::quadrature::interval;

    #[test]
    fn kernels_have_unit_mass() {
        for fam in [
            InteractionFamily::TopHat { radius: 0.7 },
            InteractionFamily::Gaussian { sigma: 0.3 },
            InteractionFamily::Tabulated {
                r_max: 2.0,
                values: vec![1.0, 0.5, 0.0],
            },
        ] {
            let k = InteractionKernel::new(fam).unwrap();
            let rc = k.cutoff();
            let mass = 2.0 * PI * 0.5 * rc * interval(|u| {
                let r = 0.5 * rc * (u + 1.0);
                k.value(r) * r
            }, 2000);
            assert!((mass - 1.0).abs() < 1e-3, "mass {mass}");
        }
    }

    #[test]
    fn stencil_is_normalized_and_symmetric() {
        let k = InteractionKernel::new(InteractionFamily::Gaussian { sigma: 0.25 }).unwrap();
        let s = k.stencil(0.1, 0.1);
        let total: f64 = s.iter().map(|t| t.2).sum();
        assert!((total - 1.0).abs() < 1e-14);
        let first: f64 = s.iter().map(|t| t.0 as f64 * t.2).sum();
        assert!(first.abs() < 1e-14);
        let tiny = InteractionKernel::new(InteractionFamily::TopHat { radius: 0.01 }).unwrap();
        assert_eq!(tiny.stencil(0.1, 0.1), vec![(0, 0, 1.0)]);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(InteractionKernel::new(InteractionFamily::TopHat { radius: 0.0 }).is_err());
        assert!(InteractionKernel::new(InteractionFamily::Gaussian { sigma: f64::NAN }).is_err());
    }
}
