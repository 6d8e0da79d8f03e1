//! Gradient descent with exact conditional expectations via artificial iterates.
//!
//! For additive noise, conditioning every quantity of a gradient step on
//! `F_{t_m}` gives closed recursions: the conditioned state `𝔛_m` solves the
//! forward scheme with control row `𝔘_m` and the noise truncated after step
//! `m`, and the conditioned adjoint `𝔜_m` solves the backward scheme driven
//! by `𝔛_m` on `t_m..=t_N`. The control rows are then updated by
//!
//! ```text
//! 𝔘_m(t_n) ← (1 − α/κ)·𝔘_m(t_n) + (1/κ)·E[Y_2(t_{n+1}) | F_{t_min(m,n)}]
//! ```
//!
//! where the conditional adjoint is `𝔜_{2,m}(t_{n+1})` for `m ≤ n` and the
//! subdiagonal value `𝔜_{2,n}(t_{n+1})` for `m > n` (the control at `t_n` is
//! `F_{t_n}`-measurable, so further conditioning leaves it unchanged). The
//! realized iterate is read off the diagonals:
//! `U(t_n) = 𝔘_n(t_n)`, `X(t_n) = 𝔛_n(t_n)`, `Y(t_n) = 𝔜_n(t_n)`.

use crate::backward::{solve_artificial_backward, AdjointPath};
use crate::cost::{cost_per_path, CostBreakdown};
use crate::error::{check_len, Result, SlqError};
use crate::fem::{FemSpace, FemVector};
use crate::forward::{solve_forward, ControlPath, StatePath};
use crate::problem::DiscreteProblem;
use crate::stochastics::{truncate_noise, NoisePath};

/// Upper bound `K ≤ (T + β)·c_P·c₁·e^{c₂T} + α` on the Lipschitz constant of
/// the reduced gradient, with `c_P = (L/π)²`,
/// `c₁ = c_P|γ|² + (|γ|²τ/4)(2c_P + 1) + 1` and `c₂ = 1`.
pub fn lipschitz_bound(problem: &DiscreteProblem) -> f64 {
    let data = problem.data();
    let cp = problem.space().poincare_constant();
    let g2 = data.gamma_sq();
    let tau = problem.tau();
    let c1 = cp * g2 + 0.25 * g2 * tau * (2.0 * cp + 1.0) + 1.0;
    let c2 = 1.0;
    (data.horizon + data.beta) * cp * c1 * (c2 * data.horizon).exp() + data.alpha
}

/// Margin applied to the Lipschitz bound when no step parameter is given.
pub const DEFAULT_KAPPA_FACTOR: f64 = 1.02;

#[derive(Debug, Clone)]
pub struct GradientConfig {
    kappa: f64,
    pub max_iters: usize,
    /// Stop once the fixed-point residual drops to this value; `0` runs all iterations.
    pub residual_tol: f64,
    /// Deterministic starting control; all-zero when `None`.
    pub initial_control: Option<ControlPath>,
}

impl GradientConfig {
    /// `kappa = None` selects `1.02 × lipschitz_bound`.
    pub fn new(problem: &DiscreteProblem, kappa: Option<f64>) -> Result<Self> {
        let bound = lipschitz_bound(problem);
        let kappa = kappa.unwrap_or(DEFAULT_KAPPA_FACTOR * bound);
        if !(kappa > bound) {
            return Err(SlqError::StepTooLarge { kappa, bound });
        }
        Ok(Self {
            kappa,
            max_iters: 10,
            residual_tol: 0.0,
            initial_control: None,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn with_residual_tol(mut self, tol: f64) -> Self {
        self.residual_tol = tol;
        self
    }

    pub fn with_initial_control(mut self, u0: ControlPath) -> Self {
        self.initial_control = Some(u0);
        self
    }
}

/// Doubly indexed artificial iterates of the last evaluated gradient step.
///
/// Rows `m = 0..N−1` of `controls` are the conditioned controls `𝔘_m`; rows
/// `m = 0..=N` of `states` and `adjoints` are `𝔛_m` and `𝔜_m` (row `N`
/// conditions on the whole path).
#[derive(Debug, Clone)]
pub struct ArtificialGrid {
    pub controls: Vec<ControlPath>,
    pub states: Vec<StatePath>,
    pub adjoints: Vec<AdjointPath>,
}

impl ArtificialGrid {
    /// `max |𝔘_m(t_n) − 𝔘_n(t_n)|` over `m ≥ n`; zero when conditioning on
    /// later information leaves adapted controls unchanged.
    pub fn diagonal_defect(&self) -> f64 {
        let rows = self.controls.len();
        let mut worst = 0.0_f64;
        for n in 0..rows {
            for m in n..rows {
                worst = worst.max(self.controls[m].u[n].sub(&self.controls[n].u[n]).max_abs());
            }
        }
        worst
    }

    /// `max |𝔛_{i,m}(t_n) − 𝔛_{i,N}(t_n)|` over `m ≥ n`.
    pub fn state_defect(&self) -> f64 {
        let full = self.states.last().expect("grid has rows");
        let mut worst = 0.0_f64;
        for (m, row) in self.states.iter().enumerate() {
            for n in 0..=m {
                worst = worst
                    .max(row.x1[n].sub(&full.x1[n]).max_abs())
                    .max(row.x2[n].sub(&full.x2[n]).max_abs());
            }
        }
        worst
    }
}

/// Diagnostics of every evaluated iterate `ℓ = 0, 1, ...`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IterationReport {
    pub costs: Vec<CostBreakdown>,
    /// `max_n ‖α·U(t_n) − E[Y_2(t_{n+1}) | F_{t_n}]‖`.
    pub residuals: Vec<f64>,
    /// `‖U^{(ℓ)} − U^{(ℓ−1)}‖_{L²_{t,x}}`, zero for `ℓ = 0`.
    pub control_changes: Vec<f64>,
}

impl IterationReport {
    pub fn len(&self) -> usize {
        self.residuals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residuals.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub control: ControlPath,
    pub state: StatePath,
    /// Realized adjoint `Y(t_n) = 𝔜_n(t_n)`.
    pub adjoint: AdjointPath,
    /// `E[Y_2(t_{n+1}) | F_{t_n}] = 𝔜_{2,n}(t_{n+1})` for `n < N`.
    pub conditional_adjoint: Vec<FemVector>,
    pub report: IterationReport,
    pub grid: ArtificialGrid,
    /// Whether the residual tolerance stopped the run.
    pub converged: bool,
}

impl DescentOutcome {
    /// Gradient updates performed.
    pub fn iterations(&self) -> usize {
        self.report.len() - 1
    }
}

/// `max_n ‖α·u[n] − conditional_adjoint[n]‖_{L²}`.
pub fn fixed_point_residual(
    space: &FemSpace,
    control: &ControlPath,
    conditional_adjoint: &[FemVector],
    alpha: f64,
) -> Result<f64> {
    check_len(
        "conditional adjoint",
        control.steps(),
        conditional_adjoint.len(),
    )?;
    let mut worst = 0.0_f64;
    for (u, y) in control.u.iter().zip(conditional_adjoint) {
        check_len("conditional adjoint vector", u.len(), y.len())?;
        let r: Vec<f64> = u.iter().zip(y.iter()).map(|(a, b)| alpha * a - b).collect();
        worst = worst.max(space.l2_norm(&r));
    }
    Ok(worst)
}

pub fn run_gradient_descent(
    problem: &DiscreteProblem,
    noise: &NoisePath,
    config: &GradientConfig,
) -> Result<DescentOutcome> {
    run_gradient_descent_with(problem, noise, config, |_, _| {})
}

/// As [`run_gradient_descent`], calling `observe(ℓ, U^{(ℓ)})` on every evaluated iterate.
pub fn run_gradient_descent_with(
    problem: &DiscreteProblem,
    noise: &NoisePath,
    config: &GradientConfig,
    mut observe: impl FnMut(usize, &ControlPath),
) -> Result<DescentOutcome> {
    if !problem.data().is_additive() {
        return Err(SlqError::MultiplicativeNoise);
    }
    let bound = lipschitz_bound(problem);
    if !(config.kappa > bound) {
        return Err(SlqError::StepTooLarge {
            kappa: config.kappa,
            bound,
        });
    }
    let steps = problem.steps();
    let dofs = problem.dofs();
    check_len("noise steps", steps, noise.steps())?;
    check_len("noise dimension", problem.noise_dim(), noise.dim())?;
    let u0 = match &config.initial_control {
        Some(u) => {
            check_len("initial control steps", steps, u.steps())?;
            u.clone()
        }
        None => ControlPath::zeros(steps, dofs),
    };
    let alpha = problem.data().alpha;
    let kappa = config.kappa;
    let keep = 1.0 - alpha / kappa;
    let space = problem.space();
    let truncated: Vec<NoisePath> = (0..=steps).map(|m| truncate_noise(noise, m)).collect();

    let mut rows: Vec<ControlPath> = vec![u0; steps];
    let mut report = IterationReport::default();
    let mut previous: Option<ControlPath> = None;
    let mut ell = 0;
    loop {
        let control = ControlPath {
            u: (0..steps).map(|n| rows[n].u[n].clone()).collect(),
        };
        let mut states = Vec::with_capacity(steps + 1);
        for (m, w) in truncated.iter().enumerate() {
            let row = if m < steps { &rows[m] } else { &control };
            states.push(solve_forward(problem, row, w)?);
        }
        let adjoints = states
            .iter()
            .enumerate()
            .map(|(m, x)| solve_artificial_backward(problem, &x.x1, m))
            .collect::<Result<Vec<_>>>()?;

        let conditional_adjoint: Vec<FemVector> =
            (0..steps).map(|n| adjoints[n].y2[n + 1].clone()).collect();
        let state = StatePath {
            x1: (0..=steps).map(|n| states[n].x1[n].clone()).collect(),
            x2: (0..=steps).map(|n| states[n].x2[n].clone()).collect(),
        };
        let cost = cost_per_path(problem, &state, &control)?;
        let residual = fixed_point_residual(space, &control, &conditional_adjoint, alpha)?;
        let change = previous.as_ref().map_or(0.0, |p| {
            control
                .combine(1.0, p, -1.0)
                .norm_sq(space, problem.tau())
                .sqrt()
        });
        observe(ell, &control);
        report.costs.push(cost);
        report.residuals.push(residual);
        report.control_changes.push(change);

        let converged = config.residual_tol > 0.0 && residual <= config.residual_tol;
        if converged || ell >= config.max_iters {
            let adjoint = AdjointPath {
                y1: (0..=steps).map(|n| adjoints[n].y1[n].clone()).collect(),
                y2: (0..=steps).map(|n| adjoints[n].y2[n].clone()).collect(),
                start: 0,
            };
            return Ok(DescentOutcome {
                control,
                state,
                adjoint,
                conditional_adjoint,
                report,
                grid: ArtificialGrid {
                    controls: rows,
                    states,
                    adjoints,
                },
                converged,
            });
        }

        for (m, row) in rows.iter_mut().enumerate() {
            for (n, u) in row.u.iter_mut().enumerate() {
                let source = &adjoints[m.min(n)].y2[n + 1];
                for (a, b) in u.iter_mut().zip(source.iter()) {
                    *a = keep * *a + b / kappa;
                }
            }
        }
        previous = Some(control);
        ell += 1;
    }
}
