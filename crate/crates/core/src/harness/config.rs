//! Plain-text scenario configuration.
//!
//! The file has five sections, `[model]`, `[grid]`, `[kernels]`, `[scenario]`
//! and `[output]`, with `key = value` entries in TOML syntax. Every key has a
//! default; unknown keys are rejected.

use serde::{Deserialize, Serialize};

use super::ConfigError;
use crate::exec::Parallelism;
use crate::fields::{build_nest_field, AlignmentMode, Boundary, Grid, NestField, NestKind};
use crate::kernels::{
    A1Variant, AlignmentDistribution, AngularDensity, AngularFamily, CoefficientSet, Dim,
    FollowerClosure, InteractionFamily, InteractionKernel, KernelSet, TurnKernel,
};
use crate::macrosolvers::{AlignmentSource, KernelMode, Limit, ScalingParams, SolverSetup};
use crate::params::{ModelParams, RateShape};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub beta: f64,
    pub zeta: f64,
    pub c_f: f64,
    pub c_p: f64,
    pub c_s: f64,
    pub lambda: f64,
    pub nu: f64,
    pub r0: f64,
    pub epsilon: f64,
    pub r_peak: f64,
    pub inside_fraction: f64,
    pub gradient_scale: f64,
    pub tilt_weight: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelParams::default();
        let s = ScalingParams::default();
        ModelSection {
            beta: m.beta,
            zeta: m.zeta,
            c_f: m.c_f,
            c_p: m.c_p,
            c_s: m.c_s,
            lambda: m.lambda,
            nu: s.nu,
            r0: m.r0,
            epsilon: s.epsilon,
            r_peak: m.rates.r_peak,
            inside_fraction: m.rates.inside_fraction,
            gradient_scale: m.rates.gradient_scale,
            tilt_weight: m.rates.tilt_weight,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Periodic,
    Outflow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub boundary: BoundaryKind,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            nx: 64,
            ny: 64,
            x_min: -8.0,
            x_max: 8.0,
            y_min: -8.0,
            y_max: 8.0,
            boundary: BoundaryKind::Periodic,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyKind {
    Uniform,
    VonMises,
    DeltaApproximant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InteractionKind {
    TopHat,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClosureKind {
    FinalSystem,
    MeanDirection,
    KineticConsistent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum A1Kind {
    SinCubed,
    AsPrinted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentModeKind {
    Total,
    StreakerWeighted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelsSection {
    pub turn: FamilyKind,
    /// Concentration (von Mises) or power (delta approximant).
    pub turn_kappa: f64,
    pub alignment: FamilyKind,
    pub alignment_kappa: f64,
    pub b0: FamilyKind,
    pub b0_kappa: f64,
    pub switch: FamilyKind,
    pub switch_kappa: f64,
    pub interaction: InteractionKind,
    /// Radius (top hat) or standard deviation (Gaussian), length.
    pub interaction_scale: f64,
    pub alignment_mode: AlignmentModeKind,
    pub closure: ClosureKind,
    pub a1_variant: A1Kind,
    /// Directions of the kinetic solver.
    pub angular_nodes: usize,
}

impl Default for KernelsSection {
    fn default() -> Self {
        KernelsSection {
            turn: FamilyKind::VonMises,
            turn_kappa: 2.0,
            alignment: FamilyKind::VonMises,
            alignment_kappa: 4.0,
            b0: FamilyKind::VonMises,
            b0_kappa: 2.0,
            switch: FamilyKind::Uniform,
            switch_kappa: 0.0,
            interaction: InteractionKind::Gaussian,
            interaction_scale: 0.25,
            alignment_mode: AlignmentModeKind::StreakerWeighted,
            closure: ClosureKind::FinalSystem,
            a1_variant: A1Kind::SinCubed,
            angular_nodes: 32,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    GaussianBlob,
    DualBlob,
    UniformDisk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NestKindConfig {
    Point,
    Uniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LimitKind {
    Kinetic,
    Parabolic,
    Hyperbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelModeKind {
    Homogeneous,
    Inhomogeneous,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentKind {
    Flux,
    Fixed,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: InitialKind,
    /// Follower blob center (the midpoint for `dual-blob`).
    pub center: [f64; 2],
    /// Standard deviation of each blob, or the disk radius.
    pub width: f64,
    /// Distance between the two blob centers along `b` (`dual-blob`).
    pub separation: f64,
    pub leader_fraction: f64,
    /// Share of the leaders that start as streakers.
    pub streaker_share: f64,
    /// Total number of individuals (micro) and total mass (macro levels).
    pub agents: usize,
    pub nest_kind: NestKindConfig,
    /// Nest position (`point`) or the direction of `b` (`uniform`).
    pub nest: [f64; 2],
    /// Nest exclusion radius; 0 selects three cell sizes.
    pub exclusion_radius: f64,
    /// Scaling applied by the kinetic solver.
    pub kinetic_limit: LimitKind,
    pub kernel_mode: KernelModeKind,
    pub epsilon_corrections: bool,
    pub limiter: bool,
    pub alignment: AlignmentKind,
    pub alignment_direction: [f64; 2],
    /// Switching rates use the initial follower density throughout.
    pub freeze_followers: bool,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            name: InitialKind::GaussianBlob,
            center: [0.0, 0.0],
            width: 1.0,
            separation: 4.0,
            leader_fraction: 0.04,
            streaker_share: 0.5,
            agents: 1000,
            nest_kind: NestKindConfig::Point,
            nest: [0.0, -6.0],
            exclusion_radius: 0.0,
            kinetic_limit: LimitKind::Kinetic,
            kernel_mode: KernelModeKind::Homogeneous,
            epsilon_corrections: false,
            limiter: false,
            alignment: AlignmentKind::Flux,
            alignment_direction: [1.0, 0.0],
            freeze_followers: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub t_end: f64,
    /// Diagnostic frames after the initial one.
    pub frames: usize,
    /// Field snapshots every `stride` frames; 0 writes the final frame only.
    pub stride: usize,
    pub seed: u64,
    /// Time step; 0 picks `cfl` times the stable step of the level.
    pub dt: f64,
    pub cfl: f64,
    /// KDE bandwidth in cell sizes.
    pub bandwidth_cells: f64,
    /// Micro field refresh every this many steps.
    pub field_stride: usize,
    pub write_fields: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            t_end: 2.0,
            frames: 20,
            stride: 0,
            seed: 1,
            dt: 0.0,
            cfl: 0.9,
            bandwidth_cells: crate::fields::DEFAULT_BANDWIDTH_CELLS,
            field_stride: 1,
            write_fields: true,
        }
    }
}

/// A complete configuration; every field is bound after parsing.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: ModelSection,
    pub grid: GridSection,
    pub kernels: KernelsSection,
    pub scenario: ScenarioSection,
    pub output: OutputSection,
}

/// A validated configuration plus the non-fatal findings of validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub config: Config,
    pub warnings: Vec<String>,
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    let config: Config = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    Scenario::new(config)
}

fn family(kind: FamilyKind, k: f64) -> AngularFamily {
    match kind {
        FamilyKind::Uniform => AngularFamily::Uniform,
        FamilyKind::VonMises => AngularFamily::VonMises { kappa: k },
        FamilyKind::DeltaApproximant => AngularFamily::DeltaApproximant { power: k },
    }
}

impl Scenario {
    pub fn new(config: Config) -> Result<Self, ConfigError> {
        let mut warnings = Vec::new();
        let range = |name: &str, v: f64, ok: bool, want: &str| {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(ConfigError::Range(format!("{name} = {v}: must be {want}")))
            }
        };
        let m = &config.model;
        range("model.beta", m.beta, m.beta > 0.0, "> 0")?;
        range("model.zeta", m.zeta, (0.0..=1.0).contains(&m.zeta), "in [0, 1]")?;
        for (n, v) in [("model.c_f", m.c_f), ("model.c_p", m.c_p), ("model.c_s", m.c_s)] {
            range(n, v, v >= 0.0, ">= 0")?;
        }
        range("model.lambda", m.lambda, m.lambda >= 0.0, ">= 0")?;
        range("model.nu", m.nu, m.nu > 0.0, "> 0")?;
        range("model.r0", m.r0, m.r0 > 0.0, "> 0")?;
        range("model.epsilon", m.epsilon, m.epsilon > 0.0 && m.epsilon <= 1.0, "in (0, 1]")?;
        range("model.r_peak", m.r_peak, m.r_peak >= 0.0, ">= 0")?;
        range("model.inside_fraction", m.inside_fraction, (0.0..1.0).contains(&m.inside_fraction), "in [0, 1)")?;
        range("model.gradient_scale", m.gradient_scale, m.gradient_scale > 0.0, "> 0")?;
        range("model.tilt_weight", m.tilt_weight, m.tilt_weight >= 0.0, ">= 0")?;
        if m.c_f > m.c_s {
            warnings.push(format!("c_f = {} exceeds c_s = {}; followers should not outrun streakers", m.c_f, m.c_s));
        }
        if m.c_p > m.c_s {
            warnings.push(format!("c_p = {} exceeds c_s = {}", m.c_p, m.c_s));
        }
        let s = &config.scenario;
        range(
            "scenario.leader_fraction",
            s.leader_fraction,
            s.leader_fraction > 0.0 && s.leader_fraction < 0.5,
            "in (0, 0.5)",
        )?;
        range("scenario.streaker_share", s.streaker_share, (0.0..=1.0).contains(&s.streaker_share), "in [0, 1]")?;
        range("scenario.width", s.width, s.width > 0.0, "> 0")?;
        range("scenario.separation", s.separation, s.separation >= 0.0, ">= 0")?;
        if s.agents == 0 {
            return Err(ConfigError::Range("scenario.agents must be >= 1".into()));
        }
        if s.nest_kind == NestKindConfig::Uniform && s.nest[0].hypot(s.nest[1]) == 0.0 {
            return Err(ConfigError::Range("scenario.nest must be a nonzero direction".into()));
        }
        let o = &config.output;
        range("output.t_end", o.t_end, o.t_end > 0.0, "> 0")?;
        range("output.dt", o.dt, o.dt >= 0.0, ">= 0")?;
        range("output.cfl", o.cfl, o.cfl > 0.0 && o.cfl <= 1.0, "in (0, 1]")?;
        if o.frames == 0 || o.field_stride == 0 {
            return Err(ConfigError::Range("output.frames and output.field_stride must be >= 1".into()));
        }
        let k = &config.kernels;
        if k.angular_nodes < 4 || !k.angular_nodes.is_multiple_of(2) {
            return Err(ConfigError::Range(format!(
                "kernels.angular_nodes = {}: must be even and >= 4",
                k.angular_nodes
            )));
        }
        let scenario = Scenario { config, warnings };
        // resolve everything once so that errors surface at parse time
        scenario.grid()?;
        scenario.kernels()?;
        scenario.coefficients()?;
        scenario.nest()?;
        Ok(scenario)
    }

    /// Every bound key, in the input syntax.
    pub fn echo(&self) -> String {
        toml::to_string(&self.config).expect("configuration serializes")
    }

    pub fn model_params(&self) -> ModelParams {
        let m = &self.config.model;
        ModelParams {
            beta: m.beta,
            zeta: m.zeta,
            c_f: m.c_f,
            c_p: m.c_p,
            c_s: m.c_s,
            lambda: m.lambda,
            r0: m.r0,
            rates: RateShape {
                r_peak: m.r_peak,
                inside_fraction: m.inside_fraction,
                gradient_scale: m.gradient_scale,
                tilt_weight: m.tilt_weight,
            },
        }
    }

    pub fn scaling(&self) -> ScalingParams {
        let s = &self.config.scenario;
        ScalingParams {
            epsilon: self.config.model.epsilon,
            limit: match s.kinetic_limit {
                LimitKind::Kinetic => Limit::Kinetic,
                LimitKind::Parabolic => Limit::Parabolic,
                LimitKind::Hyperbolic => Limit::Hyperbolic,
            },
            kernel_mode: match s.kernel_mode {
                KernelModeKind::Homogeneous => KernelMode::Homogeneous,
                KernelModeKind::Inhomogeneous => KernelMode::Inhomogeneous,
            },
            nu: self.config.model.nu,
            epsilon_corrections: s.epsilon_corrections,
        }
    }

    pub fn grid(&self) -> Result<Grid, ConfigError> {
        let g = &self.config.grid;
        let boundary = match g.boundary {
            BoundaryKind::Periodic => Boundary::Periodic,
            BoundaryKind::Outflow => Boundary::Outflow,
        };
        Ok(Grid::new(g.nx, g.ny, [g.x_min, g.x_max], [g.y_min, g.y_max], boundary)?)
    }

    pub fn nest(&self) -> Result<NestField, ConfigError> {
        let s = &self.config.scenario;
        let kind = match s.nest_kind {
            NestKindConfig::Point => NestKind::Point(s.nest),
            NestKindConfig::Uniform => NestKind::Uniform(s.nest),
        };
        let r = (s.exclusion_radius > 0.0).then_some(s.exclusion_radius);
        Ok(build_nest_field(&self.grid()?, kind, r)?)
    }

    pub fn kernels(&self) -> Result<KernelSet, ConfigError> {
        let k = &self.config.kernels;
        let dim = Dim::Two;
        Ok(KernelSet {
            turn: TurnKernel::new(family(k.turn, k.turn_kappa), dim)?,
            alignment: AlignmentDistribution::new(family(k.alignment, k.alignment_kappa), dim)?,
            b0: AngularDensity::new(family(k.b0, k.b0_kappa), dim)?,
            switch_angular: AngularDensity::new(family(k.switch, k.switch_kappa), dim)?,
            interaction: InteractionKernel::new(match k.interaction {
                InteractionKind::TopHat => InteractionFamily::TopHat {
                    radius: k.interaction_scale,
                },
                InteractionKind::Gaussian => InteractionFamily::Gaussian {
                    sigma: k.interaction_scale,
                },
            })?,
        })
    }

    pub fn closure(&self) -> FollowerClosure {
        match self.config.kernels.closure {
            ClosureKind::FinalSystem => FollowerClosure::FinalSystem,
            ClosureKind::MeanDirection => FollowerClosure::MeanDirection,
            ClosureKind::KineticConsistent => FollowerClosure::KineticConsistent,
        }
    }

    pub fn a1_variant(&self) -> A1Variant {
        match self.config.kernels.a1_variant {
            A1Kind::SinCubed => A1Variant::SinCubed,
            A1Kind::AsPrinted => A1Variant::AsPrinted,
        }
    }

    pub fn alignment_mode(&self) -> AlignmentMode {
        match self.config.kernels.alignment_mode {
            AlignmentModeKind::Total => AlignmentMode::Total,
            AlignmentModeKind::StreakerWeighted => AlignmentMode::StreakerWeighted,
        }
    }

    pub fn coefficients(&self) -> Result<CoefficientSet, ConfigError> {
        Ok(self.kernels()?.coefficients(&self.model_params(), self.closure(), self.a1_variant())?)
    }

    pub fn alignment_source(&self) -> AlignmentSource {
        let s = &self.config.scenario;
        match s.alignment {
            AlignmentKind::Flux => AlignmentSource::Flux,
            AlignmentKind::Fixed => AlignmentSource::Fixed(s.alignment_direction),
            AlignmentKind::Zero => AlignmentSource::Zero,
        }
    }

    /// Solver setup shared by the deterministic levels.
    pub fn solver_setup(&self, par: Parallelism) -> Result<SolverSetup, ConfigError> {
        Ok(SolverSetup {
            grid: self.grid()?,
            nest: self.nest()?,
            params: self.model_params(),
            kernels: self.kernels()?,
            coeffs: self.coefficients()?,
            scaling: self.scaling(),
            alignment_mode: self.alignment_mode(),
            alignment: self.alignment_source(),
            frozen_rho_f: None,
            limiter: self.config.scenario.limiter,
            par,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_binds_every_default() {
        let s = parse_config("[scenario]\nname = \"gaussian-blob\"\n").unwrap();
        assert_eq!(s.config, Config::default());
        let echo = s.echo();
        for key in ["beta", "zeta", "c_f", "c_p", "c_s", "lambda", "nu", "r0", "epsilon", "leader_fraction", "t_end"] {
            assert!(echo.contains(&format!("{key} = ")), "missing {key}");
        }
    }

    #[test]
    fn out_of_range_zeta_is_rejected() {
        let e = parse_config("[model]\nzeta = 1.5\n").unwrap_err();
        assert!(matches!(e, ConfigError::Range(_)), "{e}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse_config("[model]\nbeat = 1.0\n"), Err(ConfigError::Parse(_))));
        assert!(matches!(parse_config("[extra]\nx = 1\n"), Err(ConfigError::Parse(_))));
    }

    #[test]
    fn fast_followers_only_warn() {
        let s = parse_config("[model]\nc_f = 3.0\n").unwrap();
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn echo_round_trips() {
        let text = "[model]\nbeta = 3.5\nzeta = 0.25\n[grid]\nnx = 32\nboundary = \"outflow\"\n\
                    [scenario]\nname = \"dual-blob\"\nseparation = 7.5\nnest_kind = \"uniform\"\nnest = [0.0, 1.0]\n\
                    [output]\nseed = 99\n";
        let a = parse_config(text).unwrap();
        let b = parse_config(&a.echo()).unwrap();
        assert_eq!(a, b);
    }
}
