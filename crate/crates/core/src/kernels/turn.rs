//! Discrete turn operator on an equispaced angular grid of the circle.

use std::f64::consts::PI;

use super::{AngularDensity, Dim, KernelError};

/// `m` equispaced directions `theta_i = 2 pi i / m` on the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AngularGrid {
    m: usize,
}

impl AngularGrid {
    pub fn new(m: usize) -> Result<Self, KernelError> {
        if m < 4 {
            return Err(KernelError::InvalidParameter(format!(
                "angular grid needs at least 4 directions, got {m}"
            )));
        }
        Ok(AngularGrid { m })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.m as f64
    }

    pub fn angle(&self, i: usize) -> f64 {
        i as f64 * self.spacing()
    }

    pub fn direction(&self, i: usize) -> [f64; 2] {
        let a = self.angle(i);
        [a.cos(), a.sin()]
    }

    /// Tabulates `g(theta_i . axis)` and rescales so that `sum_i g_i dtheta = 1`.
    pub fn tabulate(&self, density: &AngularDensity, axis: [f64; 2]) -> Vec<f64> {
        let mut out: Vec<f64> = (0..self.m)
            .map(|i| {
                let d = self.direction(i);
                density.value(d[0] * axis[0] + d[1] * axis[1])
            })
            .collect();
        let total: f64 = out.iter().sum::<f64>() * self.spacing();
        if total > 0.0 {
            out.iter_mut().for_each(|v| *v /= total);
        }
        out
    }
}

/// Turn operator `(T f)(eta) = int k(|eta - theta|) f(theta) d theta` as a
/// circulant matrix whose rows sum to one. Discrete row normalization makes
/// `T` preserve constants and total angular mass exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteTurn {
    weights: Vec<f64>,
}

impl DiscreteTurn {
    pub fn new(kernel: &AngularDensity, grid: AngularGrid) -> Result<Self, KernelError> {
        if kernel.dim() != Dim::Two {
            return Err(KernelError::UnsupportedDimension(kernel.dim().n()));
        }
        let raw: Vec<f64> = (0..grid.len())
            .map(|j| kernel.value(grid.angle(j).cos()))
            .collect();
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(KernelError::InvalidParameter(
                "turn kernel vanishes on the angular grid".into(),
            ));
        }
        Ok(DiscreteTurn {
            weights: raw.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Weight of a turn by `j` grid steps.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Discrete first eigenvalue `sum_j w_j cos(2 pi j / m)`.
    pub fn nu1(&self) -> f64 {
        let m = self.weights.len() as f64;
        self.weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * (2.0 * PI * j as f64 / m).cos())
            .sum()
    }

    /// Applies `T` to a function tabulated on the grid.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>, KernelError> {
        let mut out = vec![0.0; f.len()];
        self.apply_into(f, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, f: &[f64], out: &mut [f64]) -> Result<(), KernelError> {
        let m = self.weights.len();
        if f.len() != m || out.len() != m {
            return Err(KernelError::GridMismatch {
                expected: m,
                got: f.len().min(out.len()),
            });
        }
        if self.weights[1..].iter().all(|&w| w == self.weights[1]) {
            // Uniform kernel: every row is the mean.
            let mean = f.iter().sum::<f64>() / m as f64;
            out.iter_mut().for_each(|o| *o = mean);
            return Ok(());
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, fj) in f.iter().enumerate() {
                acc += self.weights[(j + m - i) % m] * fj;
            }
            *o = acc;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn vm_turn(kappa: f64, m: usize) -> DiscreteTurn {
        let k = AngularDensity::von_mises(kappa, Dim::Two).unwrap();
        DiscreteTurn::new(&k, AngularGrid::new(m).unwrap()).unwrap()
    }

    #[test]
    fn constants_are_fixed_points() {
        let t = vm_turn(2.0, 32);
        let out = t.apply(&[3.5; 32]).unwrap();
        for v in out {
            assert!((v - 3.5).abs() < 1e-13);
        }
    }

    #[test]
    fn first_harmonic_is_an_eigenfunction() {
        let m = 64;
        let t = vm_turn(2.0, m);
        let g = AngularGrid::new(m).unwrap();
        let f: Vec<f64> = (0..m).map(|i| g.direction(i)[0]).collect();
        let tf = t.apply(&f).unwrap();
        // I1(2)/I0(2)
        let nu1 = 0.697774657964008;
        assert!((t.nu1() - nu1).abs() < 1e-12);
        for (a, b) in tf.iter().zip(&f) {
            assert!((a - nu1 * b).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let t = vm_turn(1.0, 16);
        assert!(matches!(
            t.apply(&[1.0; 8]),
            Err(KernelError::GridMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn mass_is_preserved(values in proptest::collection::vec(0.0f64..10.0, 24), kappa in 0.0f64..20.0) {
            let t = vm_turn(kappa, 24);
            let out = t.apply(&values).unwrap();
            let before: f64 = values.iter().sum();
            let after: f64 = out.iter().sum();
            prop_assert!((before - after).abs() <= 1e-12 * before.max(1.0));
        }
    }
}
