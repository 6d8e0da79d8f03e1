use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn slqwave(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slqwave"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> Output {
    let out = slqwave(args);
    assert!(
        out.status.success(),
        "slqwave {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read_csv(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn write_config(dir: &TempDir, text: &str) -> String {
    let path = dir.path().join("exp.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn out_dir(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

#[test]
fn simulate_writes_three_surfaces_with_boundary_zeros() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "sim");
    run_ok(&[
        "simulate", "--preset", "example1", "--seed", "42", "--out", &out,
    ]);
    for name in ["surface_control.csv", "surface_x1.csv", "surface_x2.csv"] {
        let (header, rows) = read_csv(&Path::new(&out).join(name));
        assert_eq!(header, "t,x,value");
        assert_eq!(rows.len(), 61 * 101, "{name}");
        assert!(rows.iter().all(|r| r.len() == 3));
        for r in rows.iter().filter(|r| r[1] == 0.0 || r[1] == 1.0) {
            assert_eq!(r[2], 0.0, "{name} boundary at t = {}", r[0]);
        }
        assert_eq!(rows[0][0], 0.0);
        assert_eq!(rows.last().unwrap()[0], 1.0);
    }
    // Initial displacement x²(1 − x) at x = 0.5.
    let (_, x1) = read_csv(&Path::new(&out).join("surface_x1.csv"));
    assert!((x1[50][2] - 0.125).abs() < 1e-15);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (out_dir(&dir, "a"), out_dir(&dir, "b"));
    run_ok(&["simulate", "--seed", "5", "--out", &a]);
    run_ok(&["simulate", "--seed", "5", "--out", &b]);
    for name in ["surface_control.csv", "surface_x1.csv", "surface_x2.csv"] {
        assert_eq!(
            fs::read(Path::new(&a).join(name)).unwrap(),
            fs::read(Path::new(&b).join(name)).unwrap()
        );
    }
}

#[test]
fn zero_noise_ignores_the_seed() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (out_dir(&dir, "a"), out_dir(&dir, "b"), out_dir(&dir, "c"));
    run_ok(&["simulate", "--noise-scale", "0", "--seed", "1", "--out", &a]);
    run_ok(&["simulate", "--noise-scale", "0", "--seed", "2", "--out", &b]);
    run_ok(&["simulate", "--noise-scale", "1", "--seed", "2", "--out", &c]);
    let read = |d: &str| fs::read(Path::new(d).join("surface_control.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&b), read(&c));
}

#[test]
fn optimize_with_one_sample_has_one_histogram_row() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "opt");
    run_ok(&["optimize", "--samples", "1", "--out", &out]);
    let dir = Path::new(&out);
    let (header, rows) = read_csv(&dir.join("histogram.csv"));
    assert_eq!(header, "sample_index,value");
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 0.0);
    let (header, costs) = read_csv(&dir.join("cost_decay.csv"));
    assert_eq!(header, "iter,cost");
    assert_eq!(costs.len(), 11);
    let (header, res) = read_csv(&dir.join("residuals.csv"));
    assert_eq!(header, "iter,residual");
    assert_eq!(res.len(), 11);
}

#[test]
fn optimize_cost_decays_and_residual_contracts() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "opt");
    run_ok(&["optimize", "--samples", "6", "--seed", "3", "--out", &out]);
    let (_, costs) = read_csv(&Path::new(&out).join("cost_decay.csv"));
    assert!(costs.windows(2).all(|w| w[1][1] < w[0][1]), "{costs:?}");
    let (_, res) = read_csv(&Path::new(&out).join("residuals.csv"));
    let envelope = 1.0 - 0.01 / 2.8 + 0.02;
    for w in res.windows(2) {
        assert!(w[1][1] <= envelope * w[0][1], "{w:?}");
    }
}

#[test]
fn output_does_not_depend_on_worker_count() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (out_dir(&dir, "a"), out_dir(&dir, "b"));
    run_ok(&[
        "optimize",
        "--samples",
        "5",
        "--iters",
        "3",
        "--workers",
        "1",
        "--out",
        &a,
    ]);
    run_ok(&[
        "optimize",
        "--samples",
        "5",
        "--iters",
        "3",
        "--workers",
        "3",
        "--out",
        &b,
    ]);
    for name in ["cost_decay.csv", "histogram.csv", "residuals.csv"] {
        assert_eq!(
            fs::read(Path::new(&a).join(name)).unwrap(),
            fs::read(Path::new(&b).join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn kappa_below_the_bound_is_a_config_error_before_solving() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "# step too small\n\nkappa = 1.5\n");
    for cmd in ["simulate", "optimize", "oracle-check"] {
        let out = out_dir(&dir, cmd);
        let res = slqwave(&[cmd, "--config", &cfg, "--out", &out]);
        assert_eq!(res.status.code(), Some(2), "{cmd}");
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains("exp.cfg:3:") && err.contains("kappa"), "{err}");
        assert!(!Path::new(&out).exists(), "{cmd} wrote output");
    }
}

#[test]
fn config_errors_cite_the_line() {
    let dir = TempDir::new().unwrap();
    let cases = [
        ("steps = 10\nwobble = 3\n", "exp.cfg:2:"),
        ("steps = 10\ncells = \"many\"\n", "exp.cfg:2:"),
        ("\n\nsteps = 0\n", "exp.cfg:3:"),
        (
            "noise_dim = 3\nsamples = 2\ngamma = [0.0, 0.0]\n",
            "exp.cfg:3:",
        ),
        ("alpha = [1\n", "exp.cfg:1:"),
    ];
    for (text, want) in cases {
        let cfg = write_config(&dir, text);
        let res = slqwave(&["simulate", "--config", &cfg, "--out", &out_dir(&dir, "x")]);
        assert_eq!(res.status.code(), Some(2), "{text}");
        let err = String::from_utf8_lossy(&res.stderr);
        assert!(err.contains(want), "{text:?}: {err}");
    }
}

#[test]
fn bad_flags_are_config_errors() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "x");
    assert_eq!(
        slqwave(&["simulate", "--preset", "nope", "--out", &out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        slqwave(&["simulate", "--samples", "-1"]).status.code(),
        Some(2)
    );
    assert_eq!(
        slqwave(&["optimize", "--samples", "0", "--out", &out])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        slqwave(&["optimize", "--workers", "0", "--out", &out])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn multiplicative_noise_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "noise_dim = 1\ngamma = [0.5]\n");
    let res = slqwave(&["optimize", "--config", &cfg, "--out", &out_dir(&dir, "x")]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("multiplicative"));
}

#[test]
fn oracle_check_passes_on_the_default_instance() {
    let dir = TempDir::new().unwrap();
    let out = out_dir(&dir, "oracle");
    run_ok(&["oracle-check", "--out", &out]);
    let text = fs::read_to_string(Path::new(&out).join("oracle_summary.csv")).unwrap();
    let value = |key: &str| -> f64 {
        text.lines()
            .find_map(|l| l.strip_prefix(&format!("{key},")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!(value("max_abs") <= 1e-8);
    assert!(value("first_order_residual") <= 1e-10);
    assert_eq!(value("scenarios"), 8.0);
    let (header, res) = read_csv(&Path::new(&out).join("residuals.csv"));
    assert_eq!(header, "iter,residual");
    assert_eq!(res.len() as f64, value("iterations") + 1.0);
    assert!(res.last().unwrap()[1] <= 1e-11);
}

#[test]
fn oracle_check_without_noise_matches_tightly() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "sigma = \"zero\"\nresidual_tol = 1e-13\noracle_tol = 1e-10\n",
    );
    run_ok(&[
        "oracle-check",
        "--config",
        &cfg,
        "--out",
        &out_dir(&dir, "o"),
    ]);
}

#[test]
fn oracle_check_breach_exits_with_3() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "iters = 50\nresidual_tol = 0\n");
    let res = slqwave(&[
        "oracle-check",
        "--config",
        &cfg,
        "--out",
        &out_dir(&dir, "o"),
    ]);
    assert_eq!(
        res.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}

#[test]
fn oracle_check_refuses_oversized_trees() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "steps = 15\n");
    let res = slqwave(&[
        "oracle-check",
        "--config",
        &cfg,
        "--out",
        &out_dir(&dir, "o"),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn convergence_writes_rates_and_slopes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "cells = 8\nsteps = 8\ntau_levels = [2, 4]\ntau_reference = 16\nh_levels = [2, 4]\nh_reference = 16\n",
    );
    let out = out_dir(&dir, "conv");
    run_ok(&[
        "convergence",
        "--config",
        &cfg,
        "--samples",
        "2",
        "--out",
        &out,
    ]);
    let (header, rows) = read_csv(&Path::new(&out).join("rates.csv"));
    assert_eq!(header, "h,tau,err2_control,err2_state");
    assert_eq!(rows.len(), 4);
    assert_eq!((rows[0][0], rows[0][1]), (0.125, 0.5));
    assert_eq!((rows[3][0], rows[3][1]), (0.25, 0.125));
    assert!(rows.iter().all(|r| r[2] > 0.0 && r[3] > 0.0));
    let slopes = fs::read_to_string(Path::new(&out).join("rate_slopes.csv")).unwrap();
    assert!(slopes.starts_with("study,quantity,slope\n"));
    assert_eq!(slopes.lines().count(), 6);
}

#[test]
fn convergence_rejects_non_nested_levels() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "cells = 8\nsteps = 8\ntau_levels = [3]\ntau_reference = 16\n",
    );
    let res = slqwave(&[
        "convergence",
        "--config",
        &cfg,
        "--samples",
        "1",
        "--out",
        &out_dir(&dir, "c"),
    ]);
    assert_eq!(res.status.code(), Some(2));
}
