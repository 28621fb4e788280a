//! Level runners, reports and cross-level comparison.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::analysis::{conversion_profile, count_peaks, front_decay_fit, pulse_speed_fit, Fit};
use super::config::Scenario;
use super::ConfigError;
use crate::error::{Error, Result};
use crate::exec::Parallelism;
use crate::fields::{FieldError, ScalarField, VectorField};
use crate::kernels::AngularGrid;
use crate::macrosolvers::{
    moments, AlignmentSource, HyperbolicSolver, KernelMode, KineticSolver, KineticState, MacroState, ParabolicSolver,
    SolverSetup, StepDiagnostics,
};
use crate::microsim::{MicroSim, SimParams, Species};

/// Relative mass residual above which a deterministic run fails its audit.
pub const AUDIT_TOL: f64 = 1e-10;

/// Prominence threshold, relative to the largest value, for a conversion zone.
const ZONE_PROMINENCE: f64 = 0.25;

/// Bins skipped past the front edge before the decay fit.
const DECAY_SKIP_CELLS: f64 = 2.0;
const DECAY_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Level {
    Micro,
    Kinetic,
    Parabolic,
    Hyperbolic,
}

impl Level {
    pub const ALL: [Level; 4] = [Level::Micro, Level::Kinetic, Level::Parabolic, Level::Hyperbolic];
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Micro => "micro",
            Level::Kinetic => "kinetic",
            Level::Parabolic => "parabolic",
            Level::Hyperbolic => "hyperbolic",
        })
    }
}

impl FromStr for Level {
    type Err = ConfigError;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Level::ALL
            .into_iter()
            .find(|l| l.to_string() == s)
            .ok_or_else(|| ConfigError::Range(format!("unknown level {s:?}")))
    }
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Output directory; nothing is written when unset.
    pub out: Option<PathBuf>,
    pub par: Parallelism,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out: None,
            par: Parallelism::Rayon,
        }
    }
}

/// Diagnostics of one output frame.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameRow {
    pub frame: usize,
    pub t: f64,
    /// Steps taken since the previous frame.
    pub steps: usize,
    pub mass_f: f64,
    pub mass_l: f64,
    pub min_density: f64,
    /// Largest ratio of the step to the stable step within the frame.
    pub cfl: f64,
    /// Follower center of mass.
    pub com: [f64; 2],
    /// Mean follower heading along the streaker heading (micro only).
    pub order: Option<f64>,
    /// Follower, passive and streaker counts (micro only).
    pub counts: Option<[usize; 3]>,
    pub decay_rate: Option<f64>,
}

/// Gridded state at one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub rho_f: ScalarField,
    pub rho_p: ScalarField,
    pub rho_s: ScalarField,
    pub lambda: VectorField,
}

impl Snapshot {
    pub fn rho_l(&self) -> ScalarField {
        let mut l = self.rho_p.clone();
        l.data.iter_mut().zip(&self.rho_s.data).for_each(|(a, b)| *a += b);
        l
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let stem = format!("fields_{:.6}", self.t);
        let g = self.rho_f.grid;
        let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?);
        writeln!(w, "x,y,rho_f,rho_p,rho_s,lambda_x,lambda_y")?;
        for k in 0..g.len() {
            let c = g.center_of(k);
            writeln!(
                w,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                c[0], c[1], self.rho_f.data[k], self.rho_p.data[k], self.rho_s.data[k], self.lambda.x[k], self.lambda.y[k]
            )?;
        }
        w.flush()?;
        let mut bytes = Vec::new();
        let lx = ScalarField { grid: g, data: self.lambda.x.clone() };
        let ly = ScalarField { grid: g, data: self.lambda.y.clone() };
        for f in [&self.rho_f, &self.rho_p, &self.rho_s, &lx, &ly] {
            bytes.extend_from_slice(&f.to_bytes());
        }
        fs::write(dir.join(format!("{stem}.bin")), bytes)?;
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub level: Level,
    pub config_echo: String,
    pub warnings: Vec<String>,
    pub frames: Vec<FrameRow>,
    pub total_steps: usize,
    /// Largest relative follower and leader mass drift over all frames.
    pub residual_f: f64,
    pub residual_l: f64,
    /// Change in follower and leader counts (micro only).
    pub count_residual: Option<[i64; 2]>,
    pub decay: Option<Fit>,
    pub pulse_speed: Option<Fit>,
    pub conversion_zones: usize,
    /// Relative L1 follower error against another level, set by [`compare`].
    pub l1: Option<f64>,
    pub snapshots: Vec<Snapshot>,
}

impl RunReport {
    pub fn audit_passed(&self) -> bool {
        let finite = self.residual_f.is_finite() && self.residual_l.is_finite();
        match self.count_residual {
            Some(c) => finite && c == [0, 0],
            None => finite && self.residual_f <= AUDIT_TOL && self.residual_l <= AUDIT_TOL,
        }
    }

    pub fn final_snapshot(&self) -> &Snapshot {
        self.snapshots.last().expect("a run keeps at least one snapshot")
    }

    /// `key=value` lines of the conservation audit.
    pub fn audit_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| s.push_str(&format!("{k}={v}\n"));
        kv("level", self.level.to_string());
        kv("frames", self.frames.len().to_string());
        kv("steps", self.total_steps.to_string());
        kv("t_end", format!("{:?}", self.frames.last().map_or(0.0, |f| f.t)));
        kv("residual_f", format!("{:e}", self.residual_f));
        kv("residual_l", format!("{:e}", self.residual_l));
        if let Some([f, l]) = self.count_residual {
            kv("count_residual_f", f.to_string());
            kv("count_residual_l", l.to_string());
        }
        kv("tolerance", format!("{AUDIT_TOL:e}"));
        let fit = |f: &Option<Fit>| f.map_or("none".to_string(), |f| format!("{:?} [{:?}, {:?}]", f.value, f.ci_low, f.ci_high));
        kv("decay_rate", fit(&self.decay));
        kv("pulse_speed", fit(&self.pulse_speed));
        kv("conversion_zones", self.conversion_zones.to_string());
        if let Some(l1) = self.l1 {
            kv("l1", format!("{l1:e}"));
        }
        kv("warnings", self.warnings.len().to_string());
        kv("audit", if self.audit_passed() { "pass" } else { "fail" }.to_string());
        s
    }

    fn write_report_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(
            w,
            "frame,t,steps,mass_f,mass_l,min_density,cfl,com_x,com_y,order,followers,passive,streakers,decay_rate"
        )?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:?}"));
        for r in &self.frames {
            let c = r.counts.map_or([String::new(), String::new(), String::new()], |c| c.map(|v| v.to_string()));
            writeln!(
                w,
                "{},{:?},{},{:?},{:?},{:?},{:?},{:?},{:?},{},{},{},{},{}",
                r.frame,
                r.t,
                r.steps,
                r.mass_f,
                r.mass_l,
                r.min_density,
                r.cfl,
                r.com[0],
                r.com[1],
                opt(r.order),
                c[0],
                c[1],
                c[2],
                opt(r.decay_rate)
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

fn direction_field(setup: &SolverSetup, heading: &VectorField, rho_s: &ScalarField) -> Result<VectorField> {
    let g = setup.grid;
    Ok(match setup.alignment {
        AlignmentSource::Zero => VectorField::zeros(g),
        AlignmentSource::Fixed(d) => {
            let n = d[0].hypot(d[1]);
            if n > 0.0 {
                VectorField::constant(g, [d[0] / n, d[1] / n])
            } else {
                VectorField::zeros(g)
            }
        }
        AlignmentSource::Flux => {
            let flux = setup.flux(Some(heading), Some(rho_s))?;
            match setup.scaling.kernel_mode {
                KernelMode::Homogeneous => flux.lambda,
                KernelMode::Inhomogeneous => flux.scaled(setup.scaling.nu),
            }
        }
    })
}

enum Engine {
    Micro {
        sim: Box<MicroSim>,
        dt: f64,
    },
    Kinetic {
        solver: Box<KineticSolver>,
        state: KineticState,
        setup: Box<SolverSetup>,
    },
    Parabolic {
        solver: Box<ParabolicSolver>,
        state: MacroState,
    },
    Hyperbolic {
        solver: Box<HyperbolicSolver>,
        state: MacroState,
    },
}

/// Per-frame extremes of the step diagnostics.
struct FrameStats {
    steps: usize,
    min_density: f64,
    cfl: f64,
}

impl FrameStats {
    fn new() -> Self {
        FrameStats {
            steps: 0,
            min_density: f64::INFINITY,
            cfl: 0.0,
        }
    }

    fn add(&mut self, d: &StepDiagnostics) {
        self.steps += 1;
        self.min_density = self.min_density.min(d.min_density);
        self.cfl = self.cfl.max(d.cfl);
    }
}

fn substeps(span: f64, fixed: f64, stable: f64, cfl: f64) -> usize {
    let dt = if fixed > 0.0 { fixed } else { cfl * stable };
    if !(dt > 0.0) || !dt.is_finite() {
        return 1;
    }
    ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

impl Engine {
    fn new(scenario: &Scenario, level: Level, par: Parallelism) -> Result<Self> {
        let cfg = &scenario.config;
        let init = scenario.initial_fields()?;
        let mut setup = scenario.solver_setup(par)?;
        if cfg.scenario.freeze_followers {
            setup.frozen_rho_f = Some(init.rho_f.clone());
        }
        let frame_dt = cfg.output.t_end / cfg.output.frames as f64;
        Ok(match level {
            Level::Micro => {
                let grid = setup.grid;
                let h = grid.hx().max(grid.hy());
                let bandwidth = cfg.output.bandwidth_cells * h;
                let v = setup.params.max_speed().max(f64::MIN_POSITIVE);
                let stable = (0.2 / setup.params.beta).min(0.5 * bandwidth / v).min(grid.hx().min(grid.hy()) / v);
                let n = substeps(frame_dt, cfg.output.dt, stable, cfg.output.cfl);
                let dt = frame_dt / n as f64;
                let params = SimParams {
                    model: setup.params.clone(),
                    dt,
                    seed: cfg.output.seed,
                    bandwidth,
                    field_stride: cfg.output.field_stride,
                    alignment_mode: setup.alignment_mode,
                };
                let mut sim = MicroSim::new(params, setup.kernels.clone(), grid, setup.nest.clone(), scenario.agents()?, par)?;
                if let Some(r) = setup.frozen_rho_f.take() {
                    sim.freeze_follower_density(r)?;
                }
                Engine::Micro { sim: Box::new(sim), dt }
            }
            Level::Kinetic => {
                let angles = AngularGrid::new(cfg.kernels.angular_nodes)?;
                let state = KineticState::isotropic(&init.rho_f, &init.rho_p, &init.rho_s, angles);
                let solver = KineticSolver::new(setup.clone(), angles)?;
                Engine::Kinetic {
                    solver: Box::new(solver),
                    state,
                    setup: Box::new(setup),
                }
            }
            Level::Parabolic => {
                let solver = ParabolicSolver::new(setup)?;
                let mut state = MacroState::new(init.rho_f, init.rho_p, init.rho_s);
                let mut rho_l = state.rho_p.clone();
                rho_l.data.iter_mut().zip(&state.rho_s.data).for_each(|(a, b)| *a += b);
                if rho_l.data.iter().any(|v| *v != 0.0) {
                    state.rho_s = solver.streakers(&state.rho_f, &rho_l, None)?;
                    for k in 0..rho_l.data.len() {
                        state.rho_p.data[k] = rho_l.data[k] - state.rho_s.data[k];
                    }
                }
                Engine::Parabolic {
                    solver: Box::new(solver),
                    state,
                }
            }
            Level::Hyperbolic => {
                let solver = HyperbolicSolver::new(setup)?;
                let mut state = MacroState::new(init.rho_f, init.rho_p, init.rho_s);
                state.lambda = solver.initial_lambda(&state)?;
                Engine::Hyperbolic {
                    solver: Box::new(solver),
                    state,
                }
            }
        })
    }

    fn advance(&mut self, span: f64, fixed: f64, cfl: f64) -> Result<FrameStats> {
        let mut stats = FrameStats::new();
        match self {
            Engine::Micro { sim, dt } => {
                let n = (span / *dt).round().max(1.0) as usize;
                sim.run(n)?;
                stats.steps = n;
                stats.min_density = 0.0;
                stats.cfl = *dt * sim.params.model.max_speed() / sim.grid.hx().min(sim.grid.hy());
            }
            Engine::Kinetic { solver, state, .. } => {
                let n = substeps(span, fixed, solver.stable_dt(), cfl);
                for _ in 0..n {
                    stats.add(&solver.step(state, span / n as f64)?);
                }
            }
            Engine::Parabolic { solver, state } => {
                let n = substeps(span, fixed, solver.stable_dt(state)?, cfl);
                for _ in 0..n {
                    stats.add(&solver.step(state, span / n as f64)?);
                }
            }
            Engine::Hyperbolic { solver, state } => {
                let n = substeps(span, fixed, solver.stable_dt(state)?, cfl);
                for _ in 0..n {
                    stats.add(&solver.step(state, span / n as f64)?);
                }
            }
        }
        Ok(stats)
    }

    fn masses(&self) -> (f64, f64) {
        match self {
            Engine::Micro { sim, .. } => {
                let c = sim.counts();
                (c.followers as f64, c.leaders() as f64)
            }
            Engine::Kinetic { state, .. } => (state.follower_mass(), state.leader_mass()),
            Engine::Parabolic { state, .. } | Engine::Hyperbolic { state, .. } => {
                (state.follower_mass(), state.leader_mass())
            }
        }
    }

    fn snapshot(&self, par: Parallelism) -> Result<Snapshot> {
        Ok(match self {
            Engine::Micro { sim, .. } => Snapshot {
                t: sim.time(),
                rho_f: sim.density(Species::Follower)?,
                rho_p: sim.density(Species::Passive)?,
                rho_s: sim.density(Species::Streaker)?,
                lambda: sim
                    .fields()
                    .flux
                    .as_ref()
                    .map_or_else(|| VectorField::zeros(sim.grid), |f| f.lambda.clone()),
            },
            Engine::Kinetic { state, setup, .. } => {
                let m = moments(state, par);
                let g = state.grid;
                let mut heading = VectorField::zeros(g);
                for k in 0..g.len() {
                    heading.set(k, [2.0 * (m.w_f.x[k] + m.w_p.x[k]), 2.0 * (m.w_f.y[k] + m.w_p.y[k])]);
                }
                let lambda = direction_field(setup, &heading, &m.rho_s)?;
                Snapshot {
                    t: state.t,
                    rho_f: m.rho_f,
                    rho_p: m.rho_p,
                    rho_s: m.rho_s,
                    lambda,
                }
            }
            Engine::Parabolic { state, .. } | Engine::Hyperbolic { state, .. } => Snapshot {
                t: state.t,
                rho_f: state.rho_f.clone(),
                rho_p: state.rho_p.clone(),
                rho_s: state.rho_s.clone(),
                lambda: state.lambda.clone(),
            },
        })
    }

    fn follower_com(&self, snap: &Snapshot) -> [f64; 2] {
        if let Engine::Micro { sim, .. } = self {
            let p = sim.positions(Species::Follower);
            let n = p.len().max(1) as f64;
            return [p.iter().map(|x| x[0]).sum::<f64>() / n, p.iter().map(|x| x[1]).sum::<f64>() / n];
        }
        snap.rho_f.center_of_mass().unwrap_or([f64::NAN; 2])
    }

    fn write_trajectory(&self, w: &mut Option<BufWriter<File>>) -> Result<()> {
        if let (Engine::Micro { sim, .. }, Some(w)) = (self, w.as_mut()) {
            sim.write_frame(w)?;
        }
        Ok(())
    }
}

fn at_frame(frame: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtFrame {
        frame,
        source: Box::new(e),
    }
}

/// Runs one level of the scenario.
///
/// Output files are written to `opts.out` when it is set. A failed audit is
/// reported through [`RunReport::audit_passed`], not as an error.
pub fn run(scenario: &Scenario, level: Level, opts: &RunOptions) -> Result<RunReport> {
    let cfg = &scenario.config;
    let out = &cfg.output;
    let par = opts.par;
    let mut engine = Engine::new(scenario, level, par)?;
    let nest = scenario.nest()?;
    let params = scenario.model_params();
    let grid = scenario.grid()?;
    let skip = DECAY_SKIP_CELLS * grid.hx().min(grid.hy());
    let has_leaders = scenario.headcount().passive + scenario.headcount().streakers > 0;

    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("config.toml"), scenario.echo())?;
    }
    let mut trajectory = match (&opts.out, level) {
        (Some(dir), Level::Micro) => {
            let mut w = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
            writeln!(w, "t,id,species,x,y,theta_x,theta_y")?;
            Some(w)
        }
        _ => None,
    };
    let written = |frame: usize| {
        frame == out.frames || (out.stride > 0 && frame.is_multiple_of(out.stride))
    };

    let (m0_f, m0_l) = engine.masses();
    let initial_counts = if let Engine::Micro { sim, .. } = &engine {
        let c = sim.counts();
        Some([c.followers as i64, c.leaders() as i64])
    } else {
        None
    };
    let rel = |m: f64, m0: f64| if m0 != 0.0 { ((m - m0) / m0).abs() } else { m.abs() };
    let frame_dt = out.t_end / out.frames as f64;
    let mut report = RunReport {
        level,
        config_echo: scenario.echo(),
        warnings: scenario.warnings.clone(),
        frames: Vec::with_capacity(out.frames + 1),
        total_steps: 0,
        residual_f: 0.0,
        residual_l: 0.0,
        count_residual: None,
        decay: None,
        pulse_speed: None,
        conversion_zones: 0,
        l1: None,
        snapshots: Vec::with_capacity(out.frames + 1),
    };
    for w in &scenario.warnings {
        log::warn!("{w}");
    }

    for frame in 0..=out.frames {
        let stats = if frame == 0 {
            FrameStats {
                steps: 0,
                min_density: f64::NAN,
                cfl: 0.0,
            }
        } else {
            engine.advance(frame_dt, out.dt, out.cfl).map_err(at_frame(frame))?
        };
        let snap = engine.snapshot(par).map_err(at_frame(frame))?;
        let (mf, ml) = engine.masses();
        report.residual_f = report.residual_f.max(rel(mf, m0_f));
        report.residual_l = report.residual_l.max(rel(ml, m0_l));
        let decay_rate = if has_leaders {
            front_decay_fit(&snap.rho_f, &snap.rho_s, &nest, &params, skip, DECAY_FLOOR).map(|f| f.value)
        } else {
            None
        };
        let (order, counts) = match &engine {
            Engine::Micro { sim, .. } => {
                let s = sim.summary();
                (Some(s.order), Some([s.counts.followers, s.counts.passive, s.counts.streakers]))
            }
            _ => (None, None),
        };
        let min_density = if frame == 0 {
            snap.rho_f.min().min(snap.rho_p.min()).min(snap.rho_s.min())
        } else {
            stats.min_density
        };
        let row = FrameRow {
            frame,
            t: frame as f64 * frame_dt,
            steps: stats.steps,
            mass_f: mf,
            mass_l: ml,
            min_density,
            cfl: stats.cfl,
            com: engine.follower_com(&snap),
            order,
            counts,
            decay_rate,
        };
        log::info!(
            "{level} frame {frame}: t={:.4} mass_f={:.12e} mass_l={:.12e} min={:.3e} cfl={:.3}",
            row.t,
            row.mass_f,
            row.mass_l,
            row.min_density,
            row.cfl
        );
        report.total_steps += stats.steps;
        report.frames.push(row);
        if let Some(dir) = &opts.out {
            if frame == 0 || written(frame) {
                snap.write(dir)?;
                engine.write_trajectory(&mut trajectory)?;
            }
        }
        report.snapshots.push(snap);
    }

    if let (Engine::Micro { sim, .. }, Some(c0)) = (&engine, initial_counts) {
        let c = sim.counts();
        report.count_residual = Some([c.followers as i64 - c0[0], c.leaders() as i64 - c0[1]]);
    }
    if has_leaders {
        let last = report.final_snapshot();
        let decay = front_decay_fit(&last.rho_f, &last.rho_s, &nest, &params, skip, DECAY_FLOOR);
        let profile: Vec<f64> = conversion_profile(&last.rho_f, &last.rho_s, &nest, &params, par)
            .into_iter()
            .map(|p| p.1)
            .collect();
        report.decay = decay;
        report.conversion_zones = count_peaks(&profile, ZONE_PROMINENCE);
    }
    let times: Vec<f64> = report.frames.iter().map(|r| r.t).collect();
    let coms: Vec<[f64; 2]> = report.frames.iter().map(|r| r.com).collect();
    report.pulse_speed = pulse_speed_fit(&times, &coms);

    if let Some(dir) = &opts.out {
        if let Some(mut w) = trajectory {
            w.flush()?;
        }
        report.write_report_csv(&dir.join("report.csv"))?;
        fs::write(dir.join("audit.txt"), report.audit_text())?;
    }
    Ok(report)
}

/// Errors between two levels at one common frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompareRow {
    pub frame: usize,
    pub t: f64,
    pub l1_f: f64,
    pub linf_f: f64,
    pub l1_l: f64,
    pub linf_l: f64,
    /// `l1_f` divided by the follower mass of the second level.
    pub rel_l1_f: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub levels: (Level, Level),
    pub rows: Vec<CompareRow>,
    /// First minus second.
    pub pulse_speed_delta: Option<f64>,
    pub decay_rate_delta: Option<f64>,
    pub reports: (RunReport, RunReport),
}

impl Comparison {
    pub fn final_row(&self) -> &CompareRow {
        self.rows.last().expect("runs share the initial frame")
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "frame,t,l1_f,linf_f,l1_l,linf_l,rel_l1_f")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:?},{:?},{:?},{:?},{:?},{:?}",
                r.frame, r.t, r.l1_f, r.linf_f, r.l1_l, r.linf_l, r.rel_l1_f
            )?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Errors between the frames of two levels run from the same initial state.
pub fn compare(scenario: &Scenario, levels: (Level, Level), opts: &RunOptions) -> Result<Comparison> {
    let sub = |l: Level| RunOptions {
        out: opts.out.as_ref().map(|d| d.join(l.to_string())),
        par: opts.par,
    };
    let mut a = run(scenario, levels.0, &sub(levels.0))?;
    let mut b = run(scenario, levels.1, &sub(levels.1))?;
    let mut rows = Vec::new();
    for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
        if (sa.t - sb.t).abs() > 1e-9 * sa.t.abs().max(1.0) {
            continue;
        }
        if sa.rho_f.grid != sb.rho_f.grid {
            return Err(FieldError::GridMismatch("levels use different grids".into()).into());
        }
        let l1_f = sa.rho_f.l1_distance(&sb.rho_f)?;
        let mass = sb.rho_f.total().abs();
        rows.push(CompareRow {
            frame: rows.len(),
            t: sb.t,
            l1_f,
            linf_f: sa.rho_f.linf_distance(&sb.rho_f)?,
            l1_l: sa.rho_l().l1_distance(&sb.rho_l())?,
            linf_l: sa.rho_l().linf_distance(&sb.rho_l())?,
            rel_l1_f: if mass > 0.0 { l1_f / mass } else { l1_f },
        });
    }
    if rows.is_empty() {
        return Err(FieldError::GridMismatch("levels share no frame".into()).into());
    }
    let last = rows[rows.len() - 1].rel_l1_f;
    a.l1 = Some(last);
    b.l1 = Some(last);
    let delta = |x: Option<Fit>, y: Option<Fit>| x.zip(y).map(|(x, y)| x.value - y.value);
    let cmp = Comparison {
        levels,
        pulse_speed_delta: delta(a.pulse_speed, b.pulse_speed),
        decay_rate_delta: delta(a.decay, b.decay),
        rows,
        reports: (a, b),
    };
    if let Some(dir) = &opts.out {
        fs::create_dir_all(dir)?;
        cmp.write_csv(&dir.join("compare.csv"))?;
    }
    Ok(cmp)
}
