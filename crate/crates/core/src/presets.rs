//! Named problem instances.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::problem::{ProblemData, SpaceTimeFn};

/// Wiener dimension of the `example1` noise.
pub const EXAMPLE1_NOISE_DIM: usize = 10;

/// Discretization and optimizer settings that accompany [`example1`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example1Settings {
    pub cells: usize,
    pub steps: usize,
    pub iters: usize,
    pub kappa: f64,
    pub samples: usize,
}

pub const EXAMPLE1_SETTINGS: Example1Settings = Example1Settings {
    cells: 100,
    steps: 60,
    iters: 10,
    kappa: 2.8,
    samples: 1000,
};

/// `σ_i(t, x) = 2·sin((i+1)πx)·cos(0.5(i+1)πt)·(1 + x)` for `i = 1..=count`,
/// multiplied by `scale`.
pub fn example1_sigma(count: usize, scale: f64) -> Vec<SpaceTimeFn> {
    (1..=count)
        .map(|i| {
            let k = (i + 1) as f64;
            Arc::new(move |t: f64, x: f64| {
                scale * 2.0 * (k * PI * x).sin() * (0.5 * k * PI * t).cos() * (1.0 + x)
            }) as SpaceTimeFn
        })
        .collect()
}

/// `X̃(t, x) = sin(3πx)·(0.5 + cos(2πt))`.
pub fn example1_target() -> SpaceTimeFn {
    Arc::new(|t, x| (3.0 * PI * x).sin() * (0.5 + (2.0 * PI * t).cos()))
}

/// Controlled wave on `(0, 1)`, `T = 1`, `α = 0.01`, `β = 9`, ten additive
/// noise components scaled by `noise_scale` (`0`, `0.1`, `1` give the zero,
/// small and large regimes).
pub fn example1(noise_scale: f64) -> ProblemData {
    ProblemData {
        length: 1.0,
        horizon: 1.0,
        alpha: 0.01,
        beta: 9.0,
        gamma: vec![0.0; EXAMPLE1_NOISE_DIM],
        sigma: example1_sigma(EXAMPLE1_NOISE_DIM, noise_scale),
        target: example1_target(),
        x10: Arc::new(|x| x * x * (1.0 - x)),
        x20: Arc::new(|_| 0.0),
    }
}

/// Settings of the scenario-tree instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeSettings {
    pub cells: usize,
    pub steps: usize,
    pub iters: usize,
    pub residual_tol: f64,
}

pub const TREE_SETTINGS: TreeSettings = TreeSettings {
    cells: 5,
    steps: 3,
    iters: 20_000,
    residual_tol: 1e-11,
};

/// Small additive-noise instance for the exact scenario-tree comparison:
/// one Wiener component, `T = 1` and the `example1` weights `α = 0.01`, `β = 9`.
pub fn tree_instance() -> ProblemData {
    ProblemData {
        length: 1.0,
        horizon: 1.0,
        alpha: 0.01,
        beta: 9.0,
        gamma: vec![0.0],
        sigma: vec![Arc::new(|t: f64, x: f64| {
            (PI * x).sin() * (1.0 + t) + 0.5 * (2.0 * PI * x).sin()
        })],
        target: Arc::new(|t, x| (PI * x).sin() * (1.0 - t) + 0.5 * (3.0 * PI * x).sin() * t),
        x10: Arc::new(|x| x * (1.0 - x)),
        x20: Arc::new(|x| (2.0 * PI * x).sin()),
    }
}

/// Additive-noise instance for refinement studies: the `example1` noise
/// shape with `count` components and a control weight large enough that the
/// descent converges to the discrete optimum in a few dozen iterations.
pub fn rate_instance(count: usize, alpha: f64, beta: f64) -> ProblemData {
    ProblemData {
        alpha,
        beta,
        gamma: vec![0.0; count],
        sigma: example1_sigma(count, 1.0),
        ..example1(1.0)
    }
}
