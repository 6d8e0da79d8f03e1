//! Continuous problem data and its fully discrete realization.

use std::fmt;
use std::sync::Arc;

use crate::error::{Result, SlqError};
use crate::fem::{FemSpace, FemVector};
use crate::linalg::{SymTridiag, TridiagFactor};
use crate::stochastics::TimeGrid;

/// Function of space only.
pub type SpaceFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// Function of `(t, x)`.
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Cost weights, noise coefficients, target and initial data of the control problem.
#[derive(Clone)]
pub struct ProblemData {
    /// Domain length `L` of `D = (0, L)`.
    pub length: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Control weight, `> 0`.
    pub alpha: f64,
    /// Terminal weight, `≥ 0`.
    pub beta: f64,
    /// Multiplicative noise coefficients, one per Wiener component.
    pub gamma: Vec<f64>,
    /// Additive noise coefficients `σ_i(t, x)`, one per Wiener component.
    pub sigma: Vec<SpaceTimeFn>,
    pub target: SpaceTimeFn,
    /// Initial displacement.
    pub x10: SpaceFn,
    /// Initial velocity.
    pub x20: SpaceFn,
}

impl fmt::Debug for ProblemData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemData")
            .field("length", &self.length)
            .field("horizon", &self.horizon)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("gamma", &self.gamma)
            .field("noise_dim", &self.sigma.len())
            .finish_non_exhaustive()
    }
}

impl ProblemData {
    /// Wiener dimension `m_w`.
    pub fn noise_dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_additive(&self) -> bool {
        self.gamma.iter().all(|&g| g == 0.0)
    }

    /// `|γ|² = Σ γ_i²`.
    pub fn gamma_sq(&self) -> f64 {
        self.gamma.iter().map(|g| g * g).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(SlqError::InvalidData(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.beta >= 0.0) {
            return Err(SlqError::InvalidData(format!(
                "beta must be non-negative, got {}",
                self.beta
            )));
        }
        if self.sigma.is_empty() {
            return Err(SlqError::InvalidData(
                "at least one noise component is required".into(),
            ));
        }
        if self.gamma.len() != self.sigma.len() {
            return Err(SlqError::ShapeMismatch {
                what: "gamma",
                expected: self.sigma.len(),
                got: self.gamma.len(),
            });
        }
        if !(self.length > 0.0) || !(self.horizon > 0.0) {
            return Err(SlqError::InvalidData(
                "length and horizon must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Fully discrete problem on `(space, grid)`: projected data plus the
/// factorized step matrix `A = mass + (τ²/4)·stiffness` shared by the forward
/// and backward recursions.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    space: FemSpace,
    grid: TimeGrid,
    data: ProblemData,
    x10_h: FemVector,
    x20_h: FemVector,
    /// `R_h σ_i(t_n)` for `n < N`, indexed `[n][i]`.
    sigma_h: Vec<Vec<FemVector>>,
    /// `R_h X̃(t_n)` for `n ≤ N`.
    target_h: Vec<FemVector>,
    step_matrix: SymTridiag,
    step_factor: TridiagFactor,
    /// `mass − (τ²/4)·stiffness`.
    explicit_matrix: SymTridiag,
}

impl DiscreteProblem {
    pub fn new(data: ProblemData, cells: usize, steps: usize) -> Result<Self> {
        data.validate()?;
        let space = FemSpace::uniform(data.length, cells)?;
        let grid = TimeGrid::new(data.horizon, steps)?;
        Self::from_parts(data, space, grid)
    }

    pub fn from_parts(data: ProblemData, space: FemSpace, grid: TimeGrid) -> Result<Self> {
        data.validate()?;
        let x10_h = ritz(&space, &*data.x10, "initial displacement")?;
        let x20_h = ritz(&space, &*data.x20, "initial velocity")?;
        let sigma_h = (0..grid.steps())
            .map(|n| {
                let t = grid.time(n);
                data.sigma
                    .iter()
                    .enumerate()
                    .map(|(i, s)| ritz(&space, &|x| s(t, x), &format!("noise coefficient {i}")))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let target_h = (0..=grid.steps())
            .map(|n| {
                let t = grid.time(n);
                ritz(&space, &|x| (data.target)(t, x), "target")
            })
            .collect::<Result<Vec<_>>>()?;
        let q = 0.25 * grid.tau() * grid.tau();
        let step_matrix = space.mass().combine(1.0, space.stiffness(), q);
        let explicit_matrix = space.mass().combine(1.0, space.stiffness(), -q);
        let step_factor = step_matrix.factor()?;
        Ok(Self {
            space,
            grid,
            data,
            x10_h,
            x20_h,
            sigma_h,
            target_h,
            step_matrix,
            step_factor,
            explicit_matrix,
        })
    }

    pub fn space(&self) -> &FemSpace {
        &self.space
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn data(&self) -> &ProblemData {
        &self.data
    }

    pub fn tau(&self) -> f64 {
        self.grid.tau()
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn dofs(&self) -> usize {
        self.space.dofs()
    }

    pub fn noise_dim(&self) -> usize {
        self.data.noise_dim()
    }

    pub fn x10_h(&self) -> &FemVector {
        &self.x10_h
    }

    pub fn x20_h(&self) -> &FemVector {
        &self.x20_h
    }

    pub fn sigma_h(&self, n: usize, i: usize) -> &FemVector {
        &self.sigma_h[n][i]
    }

    pub fn target_h(&self, n: usize) -> &FemVector {
        &self.target_h[n]
    }

    pub fn target_path(&self) -> &[FemVector] {
        &self.target_h
    }

    pub fn step_matrix(&self) -> &SymTridiag {
        &self.step_matrix
    }

    pub fn step_factor(&self) -> &TridiagFactor {
        &self.step_factor
    }

    pub fn explicit_matrix(&self) -> &SymTridiag {
        &self.explicit_matrix
    }
}

fn ritz(space: &FemSpace, f: &dyn Fn(f64) -> f64, what: &str) -> Result<FemVector> {
    space.ritz_project(f).map_err(|e| match e {
        SlqError::BoundaryViolation { x, value, .. } => SlqError::BoundaryViolation {
            what: what.to_string(),
            x,
            value,
        },
        other => other,
    })
}
