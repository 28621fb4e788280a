use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
[grid]
nx = 24
ny = 24
x_min = -4.0
x_max = 4.0
y_min = -4.0
y_max = 4.0
[kernels]
angular_nodes = 8
[scenario]
name = "gaussian-blob"
agents = 300
nest = [0.0, -3.0]
[output]
t_end = 0.2
frames = 2
"#;

fn swarm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_swarm")).args(args).output().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_every_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    for level in ["micro", "kinetic", "parabolic", "hyperbolic"] {
        let out = dir.path().join(level);
        let o = swarm(&["run", "--config", &cfg, "--level", level, "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{level}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("audit=pass"));
        for f in ["report.csv", "audit.txt", "config.toml", "fields_0.000000.csv", "fields_0.200000.bin"] {
            assert!(out.join(f).exists(), "{level}: missing {f}");
        }
        assert_eq!(out.join("trajectory.csv").exists(), level == "micro");
    }
}

#[test]
fn seed_and_threads_do_not_change_outputs_but_seed_does() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let traj = |name: &str, seed: &str, threads: &str| {
        let out = dir.path().join(name);
        let o = swarm(&[
            "run", "--config", &cfg, "--level", "micro", "--seed", seed, "--threads", threads, "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    let a = traj("a", "5", "1");
    assert_eq!(a, traj("b", "5", "3"));
    assert_ne!(a, traj("c", "6", "1"));
}

#[test]
fn compare_prints_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("cmp");
    let o = swarm(&[
        "compare", "--config", &cfg, "--level", "parabolic,parabolic", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("frame,t,l1_f"));
    assert!(s.lines().nth(1).unwrap().contains(",0.0,0.0,"));
    assert!(out.join("compare.csv").exists());
}

#[test]
fn coeffs_prints_a_table() {
    let o = swarm(&["coeffs", "--family", "von-mises", "--kappa", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert_eq!(s.lines().next().unwrap(), "family,n,kappa,nu1,z,a0,a1,a3");
    assert!(s.lines().nth(1).unwrap().contains("6.97774657964e-1"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for bad in ["[model]\nzeta = 1.5\n", "[model]\nspeed = 1.0\n", "[grid\n"] {
        let cfg = write_config(dir.path(), bad);
        let o = swarm(&["validate", "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
        let o = swarm(&["run", "--config", &cfg, "--level", "kinetic"]);
        assert_eq!(o.status.code(), Some(2));
    }
    let o = swarm(&["validate", "--config", "/nonexistent/swarm.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn validate_echo_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = swarm(&["validate", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0));
    let echo = stdout(&o);
    let again = write_config(dir.path(), &echo);
    let o2 = swarm(&["validate", "--config", &again]);
    assert_eq!(stdout(&o2), echo);
}

#[test]
fn solver_abort_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    // a fixed step far above the stability bound
    let cfg = write_config(dir.path(), &SMALL.replace("frames = 2", "frames = 2\ndt = 0.1"));
    let o = swarm(&["run", "--config", &cfg, "--level", "kinetic", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
