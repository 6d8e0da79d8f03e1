//! Implicit midpoint rule for the controlled stochastic wave system.
//!
//! Substituting the kinematic line `x1' = x1 + (τ/2)(x2' + x2)` into the
//! velocity line yields one SPD tridiagonal solve per step:
//!
//! ```text
//! A·x2' = (M − τ²/4·K)·x2 − τ·K·x1 + M·(τ·u + Σ_i (σ_i + γ_i·x1)·ΔW_i),   A = M + τ²/4·K
//! ```
//!
//! The noise factor is evaluated at the left endpoint of each step.

use crate::error::{check_len, Result, SlqError};
use crate::fem::{FemSpace, FemVector};
use crate::problem::DiscreteProblem;
use crate::stochastics::NoisePath;

/// Displacement and velocity coefficients at `t_0..=t_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub x1: Vec<FemVector>,
    pub x2: Vec<FemVector>,
}

impl StatePath {
    pub fn zeros(steps: usize, dofs: usize) -> Self {
        Self {
            x1: vec![FemVector::zeros(dofs); steps + 1],
            x2: vec![FemVector::zeros(dofs); steps + 1],
        }
    }

    pub fn steps(&self) -> usize {
        self.x1.len() - 1
    }

    /// Largest violation of `x1[n+1] − x1[n] = (τ/2)(x2[n+1] + x2[n])`.
    pub fn kinematic_defect(&self, tau: f64) -> f64 {
        (0..self.steps())
            .flat_map(|n| {
                (0..self.x1[n].len()).map(move |j| {
                    (self.x1[n + 1][j]
                        - self.x1[n][j]
                        - 0.5 * tau * (self.x2[n + 1][j] + self.x2[n][j]))
                        .abs()
                })
            })
            .fold(0.0, f64::max)
    }
}

/// Piecewise-constant control, `u[n]` acting on `[t_n, t_{n+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPath {
    pub u: Vec<FemVector>,
}

impl ControlPath {
    pub fn zeros(steps: usize, dofs: usize) -> Self {
        Self {
            u: vec![FemVector::zeros(dofs); steps],
        }
    }

    pub fn steps(&self) -> usize {
        self.u.len()
    }

    /// `‖u‖²_{L²_{t,x}} = τ Σ_n ‖u[n]‖²`.
    pub fn norm_sq(&self, space: &FemSpace, tau: f64) -> f64 {
        tau * self.u.iter().map(|v| space.mass().quad(v)).sum::<f64>()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &ControlPath, b: f64) -> ControlPath {
        ControlPath {
            u: self
                .u
                .iter()
                .zip(&other.u)
                .map(|(x, y)| {
                    x.iter()
                        .zip(y.iter())
                        .map(|(p, q)| a * p + b * q)
                        .collect::<Vec<_>>()
                        .into()
                })
                .collect(),
        }
    }
}

fn check_shapes(problem: &DiscreteProblem, control: &ControlPath, noise: &NoisePath) -> Result<()> {
    let steps = problem.steps();
    check_len("control steps", steps, control.steps())?;
    check_len("noise steps", steps, noise.steps())?;
    check_len("noise dimension", problem.noise_dim(), noise.dim())?;
    for u in &control.u {
        check_len("control vector", problem.dofs(), u.len())?;
    }
    Ok(())
}

/// Runs the recursion from `(x1_0, x2_0)`; `with_sigma = false` drops the additive term.
fn advance(
    problem: &DiscreteProblem,
    x1_0: &FemVector,
    x2_0: &FemVector,
    control: &ControlPath,
    noise: &NoisePath,
    with_sigma: bool,
) -> StatePath {
    let steps = problem.steps();
    let dofs = problem.dofs();
    let tau = problem.tau();
    let gamma = &problem.data().gamma;
    let space = problem.space();
    let mut x1 = Vec::with_capacity(steps + 1);
    let mut x2 = Vec::with_capacity(steps + 1);
    x1.push(x1_0.clone());
    x2.push(x2_0.clone());
    let mut forcing = vec![0.0; dofs];
    for n in 0..steps {
        let (x1n, x2n) = (&x1[n], &x2[n]);
        for (f, u) in forcing.iter_mut().zip(control.u[n].iter()) {
            *f = tau * u;
        }
        for (i, &dw) in noise.increment(n).iter().enumerate() {
            if dw == 0.0 {
                continue;
            }
            if with_sigma {
                for (f, s) in forcing.iter_mut().zip(problem.sigma_h(n, i).iter()) {
                    *f += dw * s;
                }
            }
            if gamma[i] != 0.0 {
                let g = gamma[i] * dw;
                for (f, x) in forcing.iter_mut().zip(x1n.iter()) {
                    *f += g * x;
                }
            }
        }
        let mut rhs = vec![0.0; dofs];
        problem.explicit_matrix().mul_into(x2n, &mut rhs);
        space.stiffness().mul_add_into(-tau, x1n, &mut rhs);
        space.mass().mul_add_into(1.0, &forcing, &mut rhs);
        problem.step_factor().solve_in_place(&mut rhs);
        let next_x2 = FemVector::from_vec(rhs);
        let next_x1: FemVector = x1n
            .iter()
            .zip(x2n.iter().zip(next_x2.iter()))
            .map(|(a, (b, c))| a + 0.5 * tau * (b + c))
            .collect::<Vec<_>>()
            .into();
        x1.push(next_x1);
        x2.push(next_x2);
    }
    StatePath { x1, x2 }
}

/// Fully discrete state for `control` along `noise`, started from the
/// Ritz-projected initial data.
pub fn solve_forward(
    problem: &DiscreteProblem,
    control: &ControlPath,
    noise: &NoisePath,
) -> Result<StatePath> {
    check_shapes(problem, control, noise)?;
    Ok(advance(
        problem,
        problem.x10_h(),
        problem.x20_h(),
        control,
        noise,
        true,
    ))
}

/// Auxiliary state: zero initial data, no additive noise, multiplicative term
/// kept. Linear in `control` for a fixed noise path.
pub fn solve_auxiliary(
    problem: &DiscreteProblem,
    control: &ControlPath,
    noise: &NoisePath,
) -> Result<StatePath> {
    check_shapes(problem, control, noise)?;
    let zero = problem.space().zeros();
    Ok(advance(problem, &zero, &zero, control, noise, false))
}

/// Discrete energy `‖∇x1[n]‖² + ‖x2[n]‖²`.
pub fn energy(state: &StatePath, n: usize, space: &FemSpace) -> Result<f64> {
    if n >= state.x1.len() {
        return Err(SlqError::IndexOutOfRange {
            index: n as u64,
            limit: state.x1.len() as u64,
        });
    }
    Ok(space.stiffness().quad(&state.x1[n]) + space.mass().quad(&state.x2[n]))
}
