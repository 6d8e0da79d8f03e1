//! Time grids and Wiener increments.
//!
//! Gaussian paths come from a counter-style generator: every `(seed,
//! sample_index)` pair owns an independent ChaCha stream, so a Monte Carlo
//! batch produces the same paths no matter how it is scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SlqError};

/// Uniform time grid `t_n = n·τ`, `n = 0..=N`, with `τ < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(SlqError::InvalidTimeGrid(format!("horizon {horizon}")));
        }
        if steps == 0 {
            return Err(SlqError::InvalidTimeGrid("zero steps".into()));
        }
        let tau = horizon / steps as f64;
        if tau >= 1.0 {
            return Err(SlqError::InvalidTimeGrid(format!(
                "step size {tau} must be below 1"
            )));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.tau()
        }
    }

    /// Grid with `steps / factor` steps over the same horizon.
    pub fn coarsen(&self, factor: usize) -> Result<TimeGrid> {
        if factor == 0 || !self.steps.is_multiple_of(factor) {
            return Err(SlqError::NotDivisible {
                factor,
                steps: self.steps,
            });
        }
        TimeGrid::new(self.horizon, self.steps / factor)
    }
}

/// Seed and sample index identifying one reproducible noise stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngConfig {
    pub seed: u64,
    pub sample_index: u64,
}

impl RngConfig {
    pub fn new(seed: u64, sample_index: u64) -> Self {
        Self { seed, sample_index }
    }
}

/// Wiener increments `ΔW_{n+1} = W(t_{n+1}) − W(t_n)`, stored row-major `[N][m_w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    steps: usize,
    dim: usize,
    data: Vec<f64>,
}

impl NoisePath {
    pub fn zeros(steps: usize, dim: usize) -> Self {
        Self {
            steps,
            dim,
            data: vec![0.0; steps * dim],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let steps = rows.len();
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(steps * dim);
        for r in &rows {
            crate::error::check_len("noise row", dim, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self { steps, dim, data })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Wiener dimension `m_w`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Increment over `[t_n, t_{n+1}]`.
    pub fn increment(&self, n: usize) -> &[f64] {
        &self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn increment_mut(&mut self, n: usize) -> &mut [f64] {
        &mut self.data[n * self.dim..(n + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// I.i.d. `N(0, τ)` increments, a pure function of `(seed, sample_index, N, m_w)`.
pub fn sample_gaussian_path(rng: RngConfig, grid: &TimeGrid, dim: usize) -> NoisePath {
    let mut gen = ChaCha8Rng::seed_from_u64(rng.seed);
    gen.set_stream(rng.sample_index);
    let sd = grid.tau().sqrt();
    let data = (0..grid.steps() * dim)
        .map(|_| sd * gen.sample::<f64, _>(StandardNormal))
        .collect();
    NoisePath {
        steps: grid.steps(),
        dim,
        data,
    }
}

/// Number of equiprobable two-point paths, `2^(N·m_w)`, if it fits in 63 bits.
pub fn two_point_path_count(steps: usize, dim: usize) -> Option<u64> {
    let bits = steps.checked_mul(dim)?;
    (bits < 63).then(|| 1u64 << bits)
}

/// Two-point path number `index`: entry `k = n·m_w + i` is `+√τ` when bit `k`
/// of `index` is set and `−√τ` otherwise. Paths sharing the low `n·m_w` bits
/// share their history up to `t_n`.
pub fn sample_two_point_path(index: u64, grid: &TimeGrid, dim: usize) -> Result<NoisePath> {
    let limit = two_point_path_count(grid.steps(), dim)
        .ok_or_else(|| SlqError::TreeTooLarge(format!("2^({}·{}) paths", grid.steps(), dim)))?;
    if index >= limit {
        return Err(SlqError::IndexOutOfRange { index, limit });
    }
    let sd = grid.tau().sqrt();
    let data = (0..grid.steps() * dim)
        .map(|k| if (index >> k) & 1 == 1 { sd } else { -sd })
        .collect();
    Ok(NoisePath {
        steps: grid.steps(),
        dim,
        data,
    })
}

/// Noise seen by the artificial iterate conditioned on `F_{t_m}`: increments
/// `n` with `n + 1 ≤ m` are kept, later ones replaced by their zero mean.
pub fn truncate_noise(path: &NoisePath, m: usize) -> NoisePath {
    let mut out = path.clone();
    let keep = m.min(path.steps) * path.dim;
    out.data[keep..].iter_mut().for_each(|v| *v = 0.0);
    out
}

/// Restriction of the same Brownian path to a grid `factor` times coarser.
pub fn coarsen_path(path: &NoisePath, factor: usize) -> Result<NoisePath> {
    if factor == 0 || !path.steps.is_multiple_of(factor) {
        return Err(SlqError::NotDivisible {
            factor,
            steps: path.steps,
        });
    }
    let steps = path.steps / factor;
    let mut out = NoisePath::zeros(steps, path.dim);
    for k in 0..steps {
        let dst = out.increment_mut(k);
        for j in k * factor..(k + 1) * factor {
            for (d, s) in dst.iter_mut().zip(path.increment(j)) {
                *d += s;
            }
        }
    }
    Ok(out)
}
