//! Subcommand drivers. Every artifact is a function of the configuration
//! and seed only.

use std::path::{Path, PathBuf};

use slqwave::experiments::{
    fit_geometric_ratio, fit_slope, h_study, run_batch, run_single, tau_study, RateRow,
    StudySettings,
};
use slqwave::{
    build_tree, compare_with_descent, DiscreteProblem, FemSpace, FemVector, GradientConfig,
    SlqError,
};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{fmt_f, CsvArtifact};

/// Paths written by a subcommand, in creation order.
pub type Written = Vec<PathBuf>;

fn discrete(cfg: &ExperimentConfig) -> Result<DiscreteProblem, CliError> {
    Ok(DiscreteProblem::new(
        cfg.problem_data(),
        cfg.cells,
        cfg.steps,
    )?)
}

/// Rejects multiplicative noise before the step check, whose bound it inflates.
fn gradient_config(
    problem: &DiscreteProblem,
    cfg: &ExperimentConfig,
) -> Result<GradientConfig, CliError> {
    if !problem.data().is_additive() {
        return Err(CliError::Config {
            origin: cfg.origin("gamma"),
            msg: format!("gamma: {}", SlqError::MultiplicativeNoise),
        });
    }
    let config = GradientConfig::new(problem, cfg.kappa).map_err(|e| match e {
        SlqError::StepTooLarge { .. } => CliError::Config {
            origin: cfg.origin("kappa"),
            msg: format!("kappa: {e}"),
        },
        e => e.into(),
    })?;
    Ok(config
        .with_max_iters(cfg.iters)
        .with_residual_tol(cfg.residual_tol))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

/// Nodal values including the two boundary zeros.
fn with_boundary(v: &FemVector) -> impl Iterator<Item = f64> + '_ {
    std::iter::once(0.0)
        .chain(v.iter().copied())
        .chain(std::iter::once(0.0))
}

fn surface(space: &FemSpace, times: &[f64], values: &[&FemVector]) -> CsvArtifact {
    let mut art = CsvArtifact::new(&["t", "x", "value"]);
    let mesh = space.mesh();
    for (t, v) in times.iter().zip(values) {
        for (j, value) in with_boundary(v).enumerate() {
            art.push(vec![fmt_f(*t), fmt_f(mesh.node(j)), fmt_f(value)]);
        }
    }
    art
}

/// One seeded path (sample index 0): surfaces of the final control and
/// state iterates. The control is piecewise constant on `[t_n, t_{n+1})`; its
/// row at `t_N` repeats the last interval's value.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Written, CliError> {
    let problem = discrete(cfg)?;
    let config = gradient_config(&problem, cfg)?;
    prepare_out(&cfg.out)?;
    let out = run_single(&problem, &config, cfg.seed, 0)?;
    let grid = problem.grid();
    let times: Vec<f64> = (0..=grid.steps()).map(|n| grid.time(n)).collect();
    let u = &out.control.u;
    let controls: Vec<&FemVector> = (0..=grid.steps()).map(|n| &u[n.min(u.len() - 1)]).collect();
    let x1: Vec<&FemVector> = out.state.x1.iter().collect();
    let x2: Vec<&FemVector> = out.state.x2.iter().collect();

    let mut written = Vec::new();
    for (name, values) in [
        ("surface_control.csv", controls),
        ("surface_x1.csv", x1),
        ("surface_x2.csv", x2),
    ] {
        written.push(surface(problem.space(), &times, &values).write(&cfg.out.join(name))?);
    }
    Ok(written)
}

/// `samples` independent paths: the Monte Carlo cost decay, the histogram
/// sample `U(t_{N-1}, probe_x)` per path and the largest fixed-point
/// residual over paths per iteration.
pub fn optimize(cfg: &ExperimentConfig) -> Result<Written, CliError> {
    let problem = discrete(cfg)?;
    let config = gradient_config(&problem, cfg)?;
    prepare_out(&cfg.out)?;
    let batch = run_batch(&problem, &config, cfg.seed, cfg.samples, cfg.probe_x)?;

    let mut costs = CsvArtifact::new(&["iter", "cost"]);
    for (l, c) in batch
        .mean_costs(cfg.report_terminal)?
        .into_iter()
        .enumerate()
    {
        costs.push(vec![l.to_string(), fmt_f(c)]);
    }
    let mut histogram = CsvArtifact::new(&["sample_index", "value"]);
    for (k, v) in batch.probes() {
        histogram.push(vec![k.to_string(), fmt_f(v)]);
    }
    let mut residuals = CsvArtifact::new(&["iter", "residual"]);
    for (l, r) in batch.max_residuals()?.into_iter().enumerate() {
        residuals.push(vec![l.to_string(), fmt_f(r)]);
    }
    Ok(vec![
        costs.write(&cfg.out.join("cost_decay.csv"))?,
        histogram.write(&cfg.out.join("histogram.csv"))?,
        residuals.write(&cfg.out.join("residuals.csv"))?,
    ])
}

/// Time refinement at the configured mesh, then mesh refinement at the
/// configured time grid. `rates.csv` holds one row per level;
/// `rate_slopes.csv` the fitted log-log slopes of the squared errors.
pub fn convergence(cfg: &ExperimentConfig) -> Result<Written, CliError> {
    let data = cfg.problem_data();
    // Validates kappa and the data before the (long) study starts.
    let probe = discrete(cfg)?;
    gradient_config(&probe, cfg)?;
    prepare_out(&cfg.out)?;

    let settings = StudySettings {
        samples: cfg.samples,
        seed: cfg.seed,
        max_iters: cfg.iters,
        residual_tol: cfg.residual_tol,
    };
    let tau_rows = tau_study(
        &data,
        cfg.cells,
        &cfg.tau_levels,
        cfg.tau_reference,
        &settings,
    )?;
    let h_rows = h_study(&data, &cfg.h_levels, cfg.h_reference, cfg.steps, &settings)?;

    let mut rates = CsvArtifact::new(&["h", "tau", "err2_control", "err2_state"]);
    for r in tau_rows.iter().chain(&h_rows) {
        rates.push(vec![
            fmt_f(r.h),
            fmt_f(r.tau),
            fmt_f(r.err2_control),
            fmt_f(r.err2_state),
        ]);
    }
    let slope = |rows: &[RateRow], x: fn(&RateRow) -> f64, y: fn(&RateRow) -> f64| -> Option<f64> {
        let xs: Vec<f64> = rows.iter().map(x).collect();
        let ys: Vec<f64> = rows.iter().map(y).collect();
        fit_slope(&xs, &ys).ok()
    };
    let mut slopes = CsvArtifact::new(&["study", "quantity", "slope"]);
    let entries = [
        (
            "tau",
            "err2_control",
            slope(&tau_rows, |r| r.tau, |r| r.err2_control),
        ),
        (
            "tau",
            "err2_state",
            slope(&tau_rows, |r| r.tau, |r| r.err2_state),
        ),
        (
            "h",
            "err2_control",
            slope(&h_rows, |r| r.h, |r| r.err2_control),
        ),
        ("h", "err2_state", slope(&h_rows, |r| r.h, |r| r.err2_state)),
    ];
    for (study, quantity, s) in entries {
        // A single level (or zero error) has no slope.
        let s = s.map_or_else(|| "nan".to_string(), fmt_f);
        slopes.push(vec![study.to_string(), quantity.to_string(), s]);
    }
    slopes.push(vec![
        "iterate".to_string(),
        "err2_control".to_string(),
        iterate_ratio(&probe, cfg)?.map_or_else(|| "nan".to_string(), fmt_f),
    ]);
    Ok(vec![
        rates.write(&cfg.out.join("rates.csv"))?,
        slopes.write(&cfg.out.join("rate_slopes.csv"))?,
    ])
}

/// Fitted geometric ratio of `‖U^(ℓ) − U^(2L)‖²` on sample 0, with `U^(2L)`
/// the iterate after `2L` updates, `L = min(iters, 200)`, and the fit over
/// `ℓ < L`.
fn iterate_ratio(
    problem: &DiscreteProblem,
    cfg: &ExperimentConfig,
) -> Result<Option<f64>, CliError> {
    let horizon = cfg.iters.min(200);
    if horizon < 2 {
        return Ok(None);
    }
    let config = gradient_config(problem, cfg)?
        .with_max_iters(2 * horizon)
        .with_residual_tol(0.0);
    let noise = slqwave::experiments::sample_path(problem, cfg.seed, 0);
    let mut iterates = Vec::with_capacity(2 * horizon + 1);
    let out = slqwave::run_gradient_descent_with(problem, &noise, &config, |_, u| {
        iterates.push(u.clone())
    })?;
    let tau = problem.tau();
    let gaps: Vec<f64> = iterates[..horizon]
        .iter()
        .map(|u| {
            u.combine(1.0, &out.control, -1.0)
                .norm_sq(problem.space(), tau)
        })
        .take_while(|&g| g > 1e-26)
        .collect();
    Ok(fit_geometric_ratio(&gaps).ok())
}

/// Runs the descent on every scenario of the two-point tree and compares
/// with the exact tree optimum; a breach of either tolerance exits with 3.
pub fn oracle_check(cfg: &ExperimentConfig) -> Result<(Written, OracleSummary), CliError> {
    let problem = discrete(cfg)?;
    let config = gradient_config(&problem, cfg)?;
    let tree = build_tree(problem.grid(), problem.noise_dim())?;
    prepare_out(&cfg.out)?;
    let cmp = compare_with_descent(&problem, &tree, &config)?;

    let mut residuals = CsvArtifact::new(&["iter", "residual"]);
    for (l, r) in cmp.residual_history.iter().enumerate() {
        residuals.push(vec![l.to_string(), fmt_f(*r)]);
    }
    let summary = OracleSummary {
        max_abs: cmp.max_abs,
        max_l2: cmp.max_l2,
        descent_residual: cmp.descent_residual,
        first_order_residual: cmp.exact.first_order_residual,
        iterations: cmp.iterations,
        scenarios: tree.scenario_count(),
    };
    let mut table = CsvArtifact::new(&["metric", "value"]);
    for (k, v) in [
        ("max_abs", summary.max_abs),
        ("max_l2", summary.max_l2),
        ("descent_residual", summary.descent_residual),
        ("first_order_residual", summary.first_order_residual),
    ] {
        table.push(vec![k.to_string(), fmt_f(v)]);
    }
    table.push(vec![
        "iterations".to_string(),
        summary.iterations.to_string(),
    ]);
    table.push(vec!["scenarios".to_string(), summary.scenarios.to_string()]);
    let written = vec![
        residuals.write(&cfg.out.join("residuals.csv"))?,
        table.write(&cfg.out.join("oracle_summary.csv"))?,
    ];
    Ok((written, summary))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleSummary {
    pub max_abs: f64,
    pub max_l2: f64,
    pub descent_residual: f64,
    pub first_order_residual: f64,
    pub iterations: usize,
    pub scenarios: usize,
}

impl OracleSummary {
    pub fn check(&self, cfg: &ExperimentConfig) -> Result<(), CliError> {
        if !(self.max_abs <= cfg.oracle_tol) {
            return Err(CliError::Breach(format!(
                "descent differs from the exact tree optimum by {:e} (tolerance {:e})",
                self.max_abs, cfg.oracle_tol
            )));
        }
        if !(self.first_order_residual <= cfg.foc_tol) {
            return Err(CliError::Breach(format!(
                "exact solution violates the first-order condition by {:e} (tolerance {:e})",
                self.first_order_residual, cfg.foc_tol
            )));
        }
        Ok(())
    }
}
