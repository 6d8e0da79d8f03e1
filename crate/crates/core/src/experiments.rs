//! Monte Carlo batches and refinement studies built on the optimizer.

use rayon::prelude::*;

use crate::cost::{mean_cost, CostBreakdown};
use crate::error::{Result, SlqError};
use crate::fem::FemSpace;
use crate::forward::{ControlPath, StatePath};
use crate::optimizer::{run_gradient_descent, DescentOutcome, GradientConfig};
use crate::problem::{DiscreteProblem, ProblemData};
use crate::stochastics::{coarsen_path, sample_gaussian_path, NoisePath, RngConfig};

/// Per-path record kept by a batch; full iterates are too large to retain
/// for every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    pub sample_index: u64,
    pub costs: Vec<CostBreakdown>,
    pub residuals: Vec<f64>,
    /// Final control at `t_{N−1}` evaluated at the probe point.
    pub probe: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    /// Ordered by sample index.
    pub samples: Vec<SampleSummary>,
}

impl BatchResult {
    /// `J^M` for every iterate; `terminal = false` drops the terminal term.
    pub fn mean_costs(&self, terminal: bool) -> Result<Vec<f64>> {
        let iters = self.iterations()?;
        (0..iters)
            .map(|l| {
                let values: Vec<f64> = self
                    .samples
                    .iter()
                    .map(|s| {
                        let c = &s.costs[l];
                        if terminal {
                            c.total
                        } else {
                            c.without_terminal()
                        }
                    })
                    .collect();
                mean_cost(&values)
            })
            .collect()
    }

    /// Largest fixed-point residual over samples, per iterate.
    pub fn max_residuals(&self) -> Result<Vec<f64>> {
        let iters = self.iterations()?;
        Ok((0..iters)
            .map(|l| {
                self.samples
                    .iter()
                    .map(|s| s.residuals[l])
                    .fold(0.0, f64::max)
            })
            .collect())
    }

    pub fn probes(&self) -> Vec<(u64, f64)> {
        self.samples
            .iter()
            .map(|s| (s.sample_index, s.probe))
            .collect()
    }

    /// Common number of evaluated iterates.
    fn iterations(&self) -> Result<usize> {
        let first = self.samples.first().ok_or(SlqError::NoSamples)?.costs.len();
        if self.samples.iter().any(|s| s.costs.len() != first) {
            return Err(SlqError::InvalidData(
                "samples stopped after different numbers of iterations".into(),
            ));
        }
        Ok(first)
    }
}

/// Brownian path of sample `index` under `seed` on the problem's grid.
pub fn sample_path(problem: &DiscreteProblem, seed: u64, index: u64) -> NoisePath {
    sample_gaussian_path(
        RngConfig::new(seed, index),
        problem.grid(),
        problem.noise_dim(),
    )
}

/// Descent on the single path `(seed, index)`.
pub fn run_single(
    problem: &DiscreteProblem,
    config: &GradientConfig,
    seed: u64,
    index: u64,
) -> Result<DescentOutcome> {
    run_gradient_descent(problem, &sample_path(problem, seed, index), config)
}

/// Runs `samples` independent paths on the current rayon pool.
pub fn run_batch(
    problem: &DiscreteProblem,
    config: &GradientConfig,
    seed: u64,
    samples: usize,
    probe_x: f64,
) -> Result<BatchResult> {
    if samples == 0 {
        return Err(SlqError::NoSamples);
    }
    let probe_step = problem.steps() - 1;
    let samples = (0..samples as u64)
        .into_par_iter()
        .map(|k| {
            let out = run_single(problem, config, seed, k)?;
            Ok(SampleSummary {
                sample_index: k,
                probe: problem
                    .space()
                    .evaluate(&out.control.u[probe_step], probe_x),
                costs: out.report.costs,
                residuals: out.report.residuals,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BatchResult { samples })
}

/// Optimizer settings shared by all levels of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudySettings {
    pub samples: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub residual_tol: f64,
}

/// One level of a refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateRow {
    pub h: f64,
    pub tau: f64,
    /// `E‖U − U_ref‖²_{L²_{t,x}}`.
    pub err2_control: f64,
    /// `max_n E[‖∇(X₁ − X₁,ref)(t_n)‖² + ‖(X₂ − X₂,ref)(t_n)‖²]` over common nodes.
    pub err2_state: f64,
}

fn solve_level(
    problem: &DiscreteProblem,
    noise: &NoisePath,
    s: &StudySettings,
) -> Result<(ControlPath, StatePath)> {
    let config = GradientConfig::new(problem, None)?
        .with_max_iters(s.max_iters)
        .with_residual_tol(s.residual_tol);
    let out = run_gradient_descent(problem, noise, &config)?;
    Ok((out.control, out.state))
}

fn check_levels(levels: &[usize], reference: usize) -> Result<()> {
    if levels.is_empty() {
        return Err(SlqError::InvalidData("no refinement levels".into()));
    }
    match levels
        .iter()
        .find(|&&l| l == 0 || !reference.is_multiple_of(l) || l >= reference)
    {
        Some(l) => Err(SlqError::NotNested(format!(
            "level {l} does not divide the reference {reference}"
        ))),
        None => Ok(()),
    }
}

fn energy_sq(space: &FemSpace, e1: &[f64], e2: &[f64]) -> f64 {
    space.stiffness().quad(e1) + space.mass().quad(e2)
}

/// Time refinement at fixed mesh: levels `steps` against `reference_steps`,
/// with every coarse path the sum of the reference increments.
pub fn tau_study(
    data: &ProblemData,
    cells: usize,
    steps: &[usize],
    reference_steps: usize,
    settings: &StudySettings,
) -> Result<Vec<RateRow>> {
    check_levels(steps, reference_steps)?;
    let reference = DiscreteProblem::new(data.clone(), cells, reference_steps)?;
    let coarse = steps
        .iter()
        .map(|&n| DiscreteProblem::new(data.clone(), cells, n))
        .collect::<Result<Vec<_>>>()?;
    let space = reference.space();
    let tau_ref = reference.tau();

    // per sample, per level: (control error², state error² per coarse node)
    let per_sample = (0..settings.samples as u64)
        .into_par_iter()
        .map(|k| {
            let fine_noise = sample_path(&reference, settings.seed, k);
            let (u_ref, x_ref) = solve_level(&reference, &fine_noise, settings)?;
            coarse
                .iter()
                .map(|p| {
                    let factor = reference_steps / p.steps();
                    let noise = coarsen_path(&fine_noise, factor)?;
                    let (u, x) = solve_level(p, &noise, settings)?;
                    let control = tau_ref
                        * (0..reference_steps)
                            .map(|nf| space.mass().quad(&u.u[nf / factor].sub(&u_ref.u[nf])))
                            .sum::<f64>();
                    let state: Vec<f64> = (0..=p.steps())
                        .map(|n| {
                            let e1 = x.x1[n].sub(&x_ref.x1[n * factor]);
                            let e2 = x.x2[n].sub(&x_ref.x2[n * factor]);
                            energy_sq(space, &e1, &e2)
                        })
                        .collect();
                    Ok((control, state))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(
        &per_sample,
        coarse.iter().map(|p| (p.space().mesh().h(), p.tau())),
    ))
}

/// Mesh refinement at fixed time grid: levels `cells` against
/// `reference_cells`, coarse solutions prolongated to the reference mesh.
pub fn h_study(
    data: &ProblemData,
    cells: &[usize],
    reference_cells: usize,
    steps: usize,
    settings: &StudySettings,
) -> Result<Vec<RateRow>> {
    check_levels(cells, reference_cells)?;
    let reference = DiscreteProblem::new(data.clone(), reference_cells, steps)?;
    let coarse = cells
        .iter()
        .map(|&c| DiscreteProblem::new(data.clone(), c, steps))
        .collect::<Result<Vec<_>>>()?;
    let fine = reference.space();
    let tau = reference.tau();

    let per_sample = (0..settings.samples as u64)
        .into_par_iter()
        .map(|k| {
            let noise = sample_path(&reference, settings.seed, k);
            let (u_ref, x_ref) = solve_level(&reference, &noise, settings)?;
            coarse
                .iter()
                .map(|p| {
                    let (u, x) = solve_level(p, &noise, settings)?;
                    let lift = |v: &[f64]| p.space().prolongate(v, fine);
                    let mut control = 0.0;
                    for n in 0..steps {
                        control += tau * fine.mass().quad(&lift(&u.u[n])?.sub(&u_ref.u[n]));
                    }
                    let state = (0..=steps)
                        .map(|n| {
                            let e1 = lift(&x.x1[n])?.sub(&x_ref.x1[n]);
                            let e2 = lift(&x.x2[n])?.sub(&x_ref.x2[n]);
                            Ok(energy_sq(fine, &e1, &e2))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((control, state))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(
        &per_sample,
        coarse.iter().map(|p| (p.space().mesh().h(), p.tau())),
    ))
}

fn aggregate(
    per_sample: &[Vec<(f64, Vec<f64>)>],
    levels: impl Iterator<Item = (f64, f64)>,
) -> Vec<RateRow> {
    let m = per_sample.len() as f64;
    levels
        .enumerate()
        .map(|(l, (h, tau))| {
            let err2_control = per_sample.iter().map(|s| s[l].0).sum::<f64>() / m;
            let nodes = per_sample[0][l].1.len();
            let err2_state = (0..nodes)
                .map(|n| per_sample.iter().map(|s| s[l].1[n]).sum::<f64>() / m)
                .fold(0.0, f64::max);
            RateRow {
                h,
                tau,
                err2_control,
                err2_state,
            }
        })
        .collect()
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.iter().any(|&v| !(v > 0.0)) {
        return Err(SlqError::InvalidData(
            "slope fit needs positive data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    log_linear_slope(&lx, ys)
}

/// Least-squares ratio `q` of a geometric sequence `y_ℓ ≈ C·q^ℓ`.
pub fn fit_geometric_ratio(ys: &[f64]) -> Result<f64> {
    let ls: Vec<f64> = (0..ys.len()).map(|l| l as f64).collect();
    log_linear_slope(&ls, ys).map(f64::exp)
}

fn log_linear_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(SlqError::InvalidData(
            "slope fit needs at least two matching points".into(),
        ));
    }
    if ys.iter().any(|&v| !(v > 0.0)) {
        return Err(SlqError::InvalidData(
            "slope fit needs positive data".into(),
        ));
    }
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}
