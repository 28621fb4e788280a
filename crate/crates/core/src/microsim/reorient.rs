//! Heading updates at reorientation events.

use std::f64::consts::PI;

use rand::Rng;

use crate::kernels::{AngularDensity, KernelSet};

/// `axis` turned counter-clockwise by `phi`.
pub fn rotate(axis: [f64; 2], phi: f64) -> [f64; 2] {
    let (s, c) = phi.sin_cos();
    [axis[0] * c - axis[1] * s, axis[0] * s + axis[1] * c]
}

/// New follower heading: a random turn about `theta` with probability `zeta`,
/// otherwise a draw from the alignment distribution about `lambda`. Without a
/// defined alignment direction the aligning follower keeps `theta`.
pub fn follower_reorient<R: Rng + ?Sized>(
    theta: [f64; 2],
    lambda: Option<[f64; 2]>,
    zeta: f64,
    kernels: &KernelSet,
    rng: &mut R,
) -> [f64; 2] {
    if rng.random::<f64>() < zeta {
        return rotate(theta, kernels.turn.sample_offset(rng));
    }
    match lambda {
        Some(l) => rotate(l, kernels.alignment.sample_offset(rng)),
        None => theta,
    }
}

/// New passive-leader heading drawn from `B0(. about b) + tilt`, normalized.
///
/// The tilt is `w (b . g)+ |g| (g_hat . eta)+` with `g` the follower-density
/// gradient scaled by its maximum over the domain. The incoming heading plays
/// no role.
pub fn passive_reorient<R: Rng + ?Sized>(
    b: [f64; 2],
    grad_scaled: [f64; 2],
    tilt_weight: f64,
    b0: &AngularDensity,
    rng: &mut R,
) -> [f64; 2] {
    let gn = grad_scaled[0].hypot(grad_scaled[1]);
    let front = (b[0] * grad_scaled[0] + b[1] * grad_scaled[1]).max(0.0);
    let amplitude = tilt_weight * front * gn;
    // the clipped cosine has mass 2 on the circle; B0 has mass 1
    let tilt_mass = 2.0 * amplitude;
    if tilt_mass > 0.0 && rng.random::<f64>() * (1.0 + tilt_mass) >= 1.0 {
        let e = [grad_scaled[0] / gn, grad_scaled[1] / gn];
        // density cos(phi) on (-pi/2, pi/2)
        let phi = (2.0 * rng.random::<f64>() - 1.0).asin();
        return rotate(e, phi);
    }
    let axis = if b[0].hypot(b[1]) > 0.0 {
        let n = b[0].hypot(b[1]);
        [b[0] / n, b[1] / n]
    } else {
        // at the nest core b vanishes and B0 has no preferred axis
        rotate([1.0, 0.0], PI * (2.0 * rng.random::<f64>() - 1.0))
    };
    rotate(axis, b0.sample_offset(rng))
}
