//! Scalar model constants shared by every level of description.

/// Rates, speeds and weights of the swarm model.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Stopping (reorientation) rate of followers and passive leaders, 1/time.
    pub beta: f64,
    /// Probability that a reorienting follower turns randomly instead of aligning.
    pub zeta: f64,
    /// Follower speed.
    pub c_f: f64,
    /// Passive leader speed.
    pub c_p: f64,
    /// Streaker speed.
    pub c_s: f64,
    /// Visibility weight of streakers in the alignment flux.
    pub lambda: f64,
    /// Minimal leader conversion rate outside the swarm, 1/time.
    pub r0: f64,
    pub rates: RateShape,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            beta: 5.0,
            zeta: 0.3,
            c_f: 1.0,
            c_p: 1.0,
            c_s: 2.0,
            lambda: 5.0,
            r0: 1.0,
            rates: RateShape::default(),
        }
    }
}

impl ModelParams {
    pub fn max_speed(&self) -> f64 {
        self.c_f.max(self.c_p).max(self.c_s)
    }
}

/// Shape of the front/rear leader conversion rates.
///
/// Thresholds are relative to the current follower field, which makes the
/// rates invariant under a rescaling of all densities.
#[derive(Clone, Debug, PartialEq)]
pub struct RateShape {
    /// Peak extra conversion rate at the swarm edges, 1/time.
    pub r_peak: f64,
    /// A cell is inside the swarm when `rho_f >= inside_fraction * max(rho_f)`.
    pub inside_fraction: f64,
    /// The ramp saturates at `gradient_scale * max |grad rho_f . b|`.
    pub gradient_scale: f64,
    /// Weight of the follower-gradient tilt in the passive turning distribution.
    pub tilt_weight: f64,
}

impl Default for RateShape {
    fn default() -> Self {
        RateShape {
            r_peak: 10.0,
            inside_fraction: 0.05,
            gradient_scale: 0.5,
            tilt_weight: 1.0,
        }
    }
}
