use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use swarm_core::exec::{self, Parallelism};
use swarm_core::harness::{
    self, coefficient_table, exit, parse_config, write_coefficient_csv, ConfigError, FamilyKind, Level, RunOptions,
    Scenario,
};
use swarm_core::kernels::{A1Variant, Dim};

#[derive(Parser)]
#[command(name = "swarm", version, about = "Follower-leader swarm simulations across scales")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Micro,
    Kinetic,
    Parabolic,
    Hyperbolic,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Level {
        match l {
            LevelArg::Micro => Level::Micro,
            LevelArg::Kinetic => Level::Kinetic,
            LevelArg::Parabolic => Level::Parabolic,
            LevelArg::Hyperbolic => Level::Hyperbolic,
        }
    }
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Field snapshot stride in frames.
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Worker threads; 0 uses the rayon default, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run one level and write report, fields, trajectory and audit files.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        level: LevelArg,
    },
    /// Run two levels from the same initial state and tabulate their errors.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Two levels, e.g. `--level kinetic,parabolic`.
        #[arg(long, value_enum, value_delimiter = ',', required = true)]
        level: Vec<LevelArg>,
    },
    /// Print the kernel coefficient table as CSV.
    Coeffs {
        #[arg(long, value_enum, default_value = "von-mises")]
        family: FamilyArg,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0, 5.0, 10.0])]
        kappa: Vec<f64>,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Use the `a1` weight with the extra sine factor in three dimensions.
        #[arg(long)]
        as_printed: bool,
    },
    /// Parse and validate a configuration, then print every bound value.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Uniform,
    VonMises,
    DeltaApproximant,
}

fn load(path: &Path) -> Result<Scenario, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Parse(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn load_with_overrides(c: &Common) -> Result<Scenario, ConfigError> {
    let mut config = load(&c.config)?.config;
    if let Some(s) = c.seed {
        config.output.seed = s;
    }
    if let Some(s) = c.stride {
        config.output.stride = s;
    }
    if let Some(e) = c.epsilon {
        config.model.epsilon = e;
    }
    Scenario::new(config)
}

fn options(c: &Common) -> RunOptions {
    RunOptions {
        out: Some(c.out.clone()),
        par: if c.threads == 1 {
            Parallelism::Sequential
        } else {
            Parallelism::Rayon
        },
    }
}

fn threaded<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    if threads == 0 {
        op()
    } else {
        exec::with_threads(threads, op)
    }
}

fn fail(code: i32, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run { common, level } => {
            let scenario = match load_with_overrides(&common) {
                Ok(s) => s,
                Err(e) => return fail(exit::CONFIG, e),
            };
            let opts = options(&common);
            match threaded(common.threads, || harness::run(&scenario, level.into(), &opts)) {
                Ok(r) => {
                    print!("{}", r.audit_text());
                    if r.audit_passed() {
                        ExitCode::SUCCESS
                    } else {
                        fail(exit::AUDIT, "conservation audit failed")
                    }
                }
                Err(e) => fail(harness::exit_code(&e), e),
            }
        }
        Command::Compare { common, level } => {
            if level.len() != 2 {
                return fail(exit::CONFIG, format!("--level takes exactly two levels, got {}", level.len()));
            }
            let scenario = match load_with_overrides(&common) {
                Ok(s) => s,
                Err(e) => return fail(exit::CONFIG, e),
            };
            let opts = options(&common);
            let pair = (level[0].into(), level[1].into());
            match threaded(common.threads, || harness::compare(&scenario, pair, &opts)) {
                Ok(c) => {
                    println!("frame,t,l1_f,linf_f,l1_l,linf_l,rel_l1_f");
                    for r in &c.rows {
                        println!(
                            "{},{:?},{:?},{:?},{:?},{:?},{:?}",
                            r.frame, r.t, r.l1_f, r.linf_f, r.l1_l, r.linf_l, r.rel_l1_f
                        );
                    }
                    let delta = |d: Option<f64>| d.map_or("none".to_string(), |d| format!("{d:?}"));
                    println!("pulse_speed_delta={}", delta(c.pulse_speed_delta));
                    println!("decay_rate_delta={}", delta(c.decay_rate_delta));
                    if c.reports.0.audit_passed() && c.reports.1.audit_passed() {
                        ExitCode::SUCCESS
                    } else {
                        fail(exit::AUDIT, "conservation audit failed")
                    }
                }
                Err(e) => fail(harness::exit_code(&e), e),
            }
        }
        Command::Coeffs {
            family,
            kappa,
            dim,
            as_printed,
        } => {
            let dim = match Dim::from_usize(dim) {
                Ok(d) => d,
                Err(e) => return fail(exit::CONFIG, e),
            };
            let family = match family {
                FamilyArg::Uniform => FamilyKind::Uniform,
                FamilyArg::VonMises => FamilyKind::VonMises,
                FamilyArg::DeltaApproximant => FamilyKind::DeltaApproximant,
            };
            let variant = if as_printed { A1Variant::AsPrinted } else { A1Variant::SinCubed };
            let rows = match coefficient_table(family, &kappa, dim, variant) {
                Ok(r) => r,
                Err(e) => return fail(exit::CONFIG, e),
            };
            match write_coefficient_csv(&rows, &mut std::io::stdout().lock()) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => fail(1, e),
            }
        }
        Command::Validate { config } => match load(&config) {
            Ok(s) => {
                for w in &s.warnings {
                    log::warn!("{w}");
                }
                print!("{}", s.echo());
                ExitCode::SUCCESS
            }
            Err(e) => fail(exit::CONFIG, e),
        },
    }
}
