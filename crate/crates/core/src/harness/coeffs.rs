//! Kernel coefficient tables.

use std::io::Write;

use super::config::FamilyKind;
use crate::kernels::{
    coefficient_z, coefficients_a, eigenvalue_nu1, A1Variant, AlignmentDistribution, AngularFamily, Dim, KernelError,
    TurnKernel,
};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoefficientRow {
    pub family: FamilyKind,
    pub dim: Dim,
    pub kappa: f64,
    pub nu1: f64,
    pub z: f64,
    pub a0: f64,
    pub a1: f64,
    pub a3: f64,
}

/// `nu1` of the turn kernel and `z, a0, a1, a3` of the alignment
/// distribution, both of the given family, for each shape parameter.
pub fn coefficient_table(
    family: FamilyKind,
    kappas: &[f64],
    dim: Dim,
    variant: A1Variant,
) -> Result<Vec<CoefficientRow>, KernelError> {
    kappas
        .iter()
        .map(|&kappa| {
            let f = match family {
                FamilyKind::Uniform => AngularFamily::Uniform,
                FamilyKind::VonMises => AngularFamily::VonMises { kappa },
                FamilyKind::DeltaApproximant => AngularFamily::DeltaApproximant { power: kappa },
            };
            let phi = AlignmentDistribution::new(f.clone(), dim)?;
            let a = coefficients_a(&phi, variant)?;
            Ok(CoefficientRow {
                family,
                dim,
                kappa,
                nu1: eigenvalue_nu1(&TurnKernel::new(f, dim)?)?,
                z: coefficient_z(&phi)?,
                a0: a.a0,
                a1: a.a1,
                a3: a.a3,
            })
        })
        .collect()
}

fn family_name(f: FamilyKind) -> &'static str {
    match f {
        FamilyKind::Uniform => "uniform",
        FamilyKind::VonMises => "von-mises",
        FamilyKind::DeltaApproximant => "delta-approximant",
    }
}

/// CSV with 12 significant digits.
pub fn write_coefficient_csv(rows: &[CoefficientRow], w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "family,n,kappa,nu1,z,a0,a1,a3")?;
    for r in rows {
        write!(w, "{},{}", family_name(r.family), r.dim.n())?;
        for v in [r.kappa, r.nu1, r.z, r.a0, r.a1, r.a3] {
            write!(w, ",{v:.11e}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}
