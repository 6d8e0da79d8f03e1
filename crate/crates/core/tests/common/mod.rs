#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slqwave::{ControlPath, DiscreteProblem, FemVector, ProblemData, SlqError};

/// Smooth data on `(0, 1)` with `noise_dim` components scaled by `sigma_scale`.
pub fn smooth_data(
    alpha: f64,
    beta: f64,
    noise_dim: usize,
    sigma_scale: f64,
    gamma: f64,
) -> ProblemData {
    let sigma = (0..noise_dim)
        .map(|i| {
            let k = (i + 1) as f64;
            Arc::new(move |t: f64, x: f64| sigma_scale * (k * PI * x).sin() * (1.0 + 0.5 * t))
                as slqwave::problem::SpaceTimeFn
        })
        .collect();
    ProblemData {
        length: 1.0,
        horizon: 1.0,
        alpha,
        beta,
        gamma: vec![gamma; noise_dim],
        sigma,
        target: Arc::new(|t, x| (PI * x).sin() * (1.0 - t) + (2.0 * PI * x).sin() * t),
        x10: Arc::new(|x| x * (1.0 - x)),
        x20: Arc::new(|x| 0.5 * (PI * x).sin()),
    }
}

pub fn problem(data: ProblemData, cells: usize, steps: usize) -> DiscreteProblem {
    DiscreteProblem::new(data, cells, steps).expect("valid problem")
}

pub fn random_control(rng: &mut ChaCha8Rng, steps: usize, dofs: usize) -> ControlPath {
    ControlPath {
        u: (0..steps)
            .map(|_| FemVector::from_vec((0..dofs).map(|_| rng.random_range(-1.0..1.0)).collect()))
            .collect(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn max_diff(a: &[FemVector], b: &[FemVector]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.sub(y).max_abs())
        .fold(0.0, f64::max)
}

pub fn is_shape_error<T>(r: Result<T, SlqError>) -> bool {
    matches!(r, Err(SlqError::ShapeMismatch { .. }))
}
