//! Quadratic cost of the fully discrete problem, its Monte Carlo estimator and
//! directional derivatives of the reduced cost.
//!
//! All time integrands are step processes, so left-endpoint sums are exact:
//!
//! ```text
//! tracking = τ Σ_{n<N} ‖x1[n] − x̃[n]‖²,  control = α τ Σ_{n<N} ‖u[n]‖²,  terminal = β ‖x1[N] − x̃[N]‖²
//! ```

use crate::error::{check_len, Result, SlqError};
use crate::forward::{solve_auxiliary, solve_forward, ControlPath, StatePath};
use crate::linalg::pairwise_sum;
use crate::problem::DiscreteProblem;
use crate::stochastics::NoisePath;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostBreakdown {
    pub tracking: f64,
    pub control: f64,
    pub terminal: f64,
    /// `(tracking + control + terminal) / 2`.
    pub total: f64,
}

impl CostBreakdown {
    /// Total with the terminal misfit dropped.
    pub fn without_terminal(&self) -> f64 {
        0.5 * (self.tracking + self.control)
    }
}

pub fn cost_per_path(
    problem: &DiscreteProblem,
    state: &StatePath,
    control: &ControlPath,
) -> Result<CostBreakdown> {
    let steps = problem.steps();
    check_len("state length", steps + 1, state.x1.len())?;
    check_len("control steps", steps, control.steps())?;
    let tau = problem.tau();
    let space = problem.space();
    let mass = space.mass();
    let misfit_sq = |n: usize| mass.quad(&state.x1[n].sub(problem.target_h(n)));
    let tracking = tau * (0..steps).map(misfit_sq).sum::<f64>();
    let control_term =
        problem.data().alpha * tau * control.u.iter().map(|u| mass.quad(u)).sum::<f64>();
    let terminal = problem.data().beta * misfit_sq(steps);
    Ok(CostBreakdown {
        tracking,
        control: control_term,
        terminal,
        total: 0.5 * (tracking + control_term + terminal),
    })
}

/// Sample mean of per-path costs, reduced pairwise in index order.
pub fn mean_cost(totals: &[f64]) -> Result<f64> {
    if totals.is_empty() {
        return Err(SlqError::NoSamples);
    }
    Ok(pairwise_sum(totals) / totals.len() as f64)
}

/// `J^M`: mean total cost over `M` (state, control) samples.
pub fn monte_carlo_cost(
    problem: &DiscreteProblem,
    samples: &[(StatePath, ControlPath)],
) -> Result<f64> {
    let totals = samples
        .iter()
        .map(|(x, u)| cost_per_path(problem, x, u).map(|c| c.total))
        .collect::<Result<Vec<_>>>()?;
    mean_cost(&totals)
}

/// Empirical reduced cost: mean over paths of the cost of `solve_forward(controls[k], noises[k])`.
pub fn empirical_cost(
    problem: &DiscreteProblem,
    controls: &[ControlPath],
    noises: &[NoisePath],
) -> Result<f64> {
    check_len("controls per noise path", noises.len(), controls.len())?;
    let totals = controls
        .iter()
        .zip(noises)
        .map(|(u, w)| {
            let x = solve_forward(problem, u, w)?;
            cost_per_path(problem, &x, u).map(|c| c.total)
        })
        .collect::<Result<Vec<_>>>()?;
    mean_cost(&totals)
}

/// `⟨D_U Ĵ(u), v⟩` estimated over the given noise paths, with
/// `x1⁰ = solve_auxiliary(v)` on the same path:
///
/// ```text
/// τ Σ_{n<N} ⟨x1[n] − x̃[n], x1⁰[n]⟩ + α τ Σ_{n<N} ⟨u[n], v[n]⟩ + β ⟨x1[N] − x̃[N], x1⁰[N]⟩
/// ```
///
/// `controls[k]` and `directions[k]` are the realizations on `noises[k]`.
pub fn directional_derivative(
    problem: &DiscreteProblem,
    controls: &[ControlPath],
    directions: &[ControlPath],
    noises: &[NoisePath],
) -> Result<f64> {
    check_len("controls per noise path", noises.len(), controls.len())?;
    check_len("directions per noise path", noises.len(), directions.len())?;
    let steps = problem.steps();
    let tau = problem.tau();
    let alpha = problem.data().alpha;
    let beta = problem.data().beta;
    let mass = problem.space().mass();
    let values = controls
        .iter()
        .zip(directions)
        .zip(noises)
        .map(|((u, v), w)| {
            let x = solve_forward(problem, u, w)?;
            let x0 = solve_auxiliary(problem, v, w)?;
            let pair = |n: usize| mass.bilinear(&x.x1[n].sub(problem.target_h(n)), &x0.x1[n]);
            let tracking = tau * (0..steps).map(pair).sum::<f64>();
            let control = alpha
                * tau
                * u.u
                    .iter()
                    .zip(&v.u)
                    .map(|(a, b)| mass.bilinear(a, b))
                    .sum::<f64>();
            Ok(tracking + control + beta * pair(steps))
        })
        .collect::<Result<Vec<_>>>()?;
    mean_cost(&values)
}
