//! Artificial backward (adjoint) recursion.
//!
//! For a conditioned state trajectory `x1_art` the pair `(y1, y2)` satisfies,
//! for `n = N−1 .. m`,
//!
//! ```text
//! y1[n] = y1[n+1] + (τ/2)·Δ_h(y2[n+1] + y2[n]) + τ·(x̃[n] − x1_art[n])
//! y2[n] = y2[n+1] + (τ/2)·(y1[n+1] + y1[n])
//! y1[N] = (τ/2)·Δ_h y2[N] + β·(x̃[N] − x1_art[N]),   y2[N] = (τ/2)·y1[N]
//! ```
//!
//! Eliminating `y1[n]` from the second line leaves one solve with the shared
//! step matrix `A` per step, followed by a mass solve for `y1[n]`.

use crate::error::{check_len, Result, SlqError};
use crate::fem::FemVector;
use crate::problem::DiscreteProblem;

/// Adjoint coefficients at `t_0..=t_N`. Entries before `start` are not
/// computed and hold zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointPath {
    pub y1: Vec<FemVector>,
    pub y2: Vec<FemVector>,
    pub start: usize,
}

impl AdjointPath {
    pub fn steps(&self) -> usize {
        self.y1.len() - 1
    }
}

/// Solves the artificial backward equations driven by `x1_art`, from `t_N`
/// down to `t_start`.
pub fn solve_artificial_backward(
    problem: &DiscreteProblem,
    x1_art: &[FemVector],
    start: usize,
) -> Result<AdjointPath> {
    let steps = problem.steps();
    let dofs = problem.dofs();
    check_len("artificial state length", steps + 1, x1_art.len())?;
    if start > steps {
        return Err(SlqError::IndexOutOfRange {
            index: start as u64,
            limit: steps as u64 + 1,
        });
    }
    for x in x1_art {
        check_len("artificial state vector", dofs, x.len())?;
    }
    let tau = problem.tau();
    let beta = problem.data().beta;
    let space = problem.space();
    let mass = space.mass();
    let stiffness = space.stiffness();
    let q = 0.25 * tau * tau;

    let mut y1 = vec![FemVector::zeros(dofs); steps + 1];
    let mut y2 = vec![FemVector::zeros(dofs); steps + 1];

    // Terminal pair: A·y2[N] = (τβ/2)·M·e[N], y1[N] = (2/τ)·y2[N].
    let misfit = problem.target_h(steps).sub(&x1_art[steps]);
    let mut rhs = vec![0.0; dofs];
    mass.mul_add_into(0.5 * tau * beta, &misfit, &mut rhs);
    problem.step_factor().solve_in_place(&mut rhs);
    y1[steps] = FemVector::from_vec(rhs.iter().map(|v| 2.0 * v / tau).collect());
    y2[steps] = FemVector::from_vec(rhs);

    let mut combo = vec![0.0; dofs];
    for n in (start..steps).rev() {
        let misfit = problem.target_h(n).sub(&x1_art[n]);
        let (y1n1, y2n1) = (&y1[n + 1], &y2[n + 1]);

        // A·y2[n] = M·(y2[n+1] + τ·y1[n+1] + (τ²/2)·e[n]) − (τ²/4)·K·y2[n+1]
        for j in 0..dofs {
            combo[j] = y2n1[j] + tau * y1n1[j] + 0.5 * tau * tau * misfit[j];
        }
        let mut rhs = mass.mul(&combo);
        stiffness.mul_add_into(-q, y2n1, &mut rhs);
        problem.step_factor().solve_in_place(&mut rhs);
        let y2n = FemVector::from_vec(rhs);

        // M·y1[n] = M·(y1[n+1] + τ·e[n]) − (τ/2)·K·(y2[n+1] + y2[n])
        for j in 0..dofs {
            combo[j] = y1n1[j] + tau * misfit[j];
        }
        let mut rhs = mass.mul(&combo);
        let ysum: Vec<f64> = y2n1.iter().zip(y2n.iter()).map(|(a, b)| a + b).collect();
        stiffness.mul_add_into(-0.5 * tau, &ysum, &mut rhs);
        space.mass_factor().solve_in_place(&mut rhs);
        y1[n] = FemVector::from_vec(rhs);
        y2[n] = y2n;
    }
    Ok(AdjointPath { y1, y2, start })
}

/// Largest mass-norm residual of the unreduced backward equations (both
/// lines and both terminal conditions) over `n ≥ adjoint.start`.
pub fn residual_check(
    adjoint: &AdjointPath,
    x1_art: &[FemVector],
    problem: &DiscreteProblem,
) -> Result<f64> {
    let steps = problem.steps();
    check_len("adjoint length", steps + 1, adjoint.y1.len())?;
    check_len("artificial state length", steps + 1, x1_art.len())?;
    let tau = problem.tau();
    let beta = problem.data().beta;
    let space = problem.space();
    let mass = space.mass();
    let stiffness = space.stiffness();
    let dofs = problem.dofs();
    // A residual given in weak form `r = M·v` has L² norm sqrt(rᵀ M⁻¹ r).
    let weak_norm = |r: Vec<f64>| {
        let v = space.mass_factor().solve(&r);
        crate::linalg::dot(&r, &v).max(0.0).sqrt()
    };
    let (y1, y2) = (&adjoint.y1, &adjoint.y2);
    let mut worst = 0.0_f64;

    let misfit = problem.target_h(steps).sub(&x1_art[steps]);
    let mut r = vec![0.0; dofs];
    for j in 0..dofs {
        r[j] = y1[steps][j] - beta * misfit[j];
    }
    let mut weak = mass.mul(&r);
    stiffness.mul_add_into(0.5 * tau, &y2[steps], &mut weak);
    worst = worst.max(weak_norm(weak));
    let r2: Vec<f64> = (0..dofs)
        .map(|j| y2[steps][j] - 0.5 * tau * y1[steps][j])
        .collect();
    worst = worst.max(space.l2_norm(&r2));

    for n in adjoint.start..steps {
        let misfit = problem.target_h(n).sub(&x1_art[n]);
        for j in 0..dofs {
            r[j] = y1[n][j] - y1[n + 1][j] - tau * misfit[j];
        }
        let mut weak = mass.mul(&r);
        let ysum: Vec<f64> = (0..dofs).map(|j| y2[n + 1][j] + y2[n][j]).collect();
        stiffness.mul_add_into(0.5 * tau, &ysum, &mut weak);
        worst = worst.max(weak_norm(weak));
        let r2: Vec<f64> = (0..dofs)
            .map(|j| y2[n][j] - y2[n + 1][j] - 0.5 * tau * (y1[n + 1][j] + y1[n][j]))
            .collect();
        worst = worst.max(space.l2_norm(&r2));
    }
    Ok(worst)
}
