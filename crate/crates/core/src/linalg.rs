//! Symmetric tridiagonal matrices and their LDLᵀ (Thomas) factorization.

use crate::error::{Result, SlqError};

/// Symmetric tridiagonal matrix stored by its diagonal and first off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Self {
        assert!(
            diag.len() == off.len() + 1 || (diag.is_empty() && off.is_empty()),
            "off-diagonal must be one shorter than the diagonal"
        );
        Self { diag, off }
    }

    /// Constant-stencil matrix `[lower, centre, lower]` of size `n`.
    pub fn from_stencil(n: usize, centre: f64, side: f64) -> Self {
        Self::new(vec![centre; n], vec![side; n.saturating_sub(1)])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    /// Entry (i, j); zero outside the band.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i + 1 == j {
            self.off[i]
        } else if j + 1 == i {
            self.off[j]
        } else {
            0.0
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &SymTridiag, b: f64) -> SymTridiag {
        assert_eq!(self.dim(), other.dim());
        let diag = self
            .diag
            .iter()
            .zip(&other.diag)
            .map(|(x, y)| a * x + b * y)
            .collect();
        let off = self
            .off
            .iter()
            .zip(&other.off)
            .map(|(x, y)| a * x + b * y)
            .collect();
        SymTridiag::new(diag, off)
    }

    /// `out = self · x`.
    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    /// `out += scale · self · x`.
    pub fn mul_add_into(&self, scale: f64, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            out[i] += scale * acc;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_into(x, &mut out);
        out
    }

    /// Bilinear form `xᵀ · self · y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut row = self.diag[i] * y[i];
            if i > 0 {
                row += self.off[i - 1] * y[i - 1];
            }
            if i + 1 < n {
                row += self.off[i] * y[i + 1];
            }
            acc += x[i] * row;
        }
        acc
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn factor(&self) -> Result<TridiagFactor> {
        TridiagFactor::new(self)
    }
}

/// LDLᵀ factorization of an SPD tridiagonal matrix; each solve is O(n).
#[derive(Debug, Clone)]
pub struct TridiagFactor {
    /// Pivots of D.
    pivots: Vec<f64>,
    /// Sub-diagonal multipliers of the unit lower factor, `lower[i]` sits at (i+1, i).
    lower: Vec<f64>,
}

impl TridiagFactor {
    pub fn new(m: &SymTridiag) -> Result<Self> {
        let n = m.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut lower = Vec::with_capacity(n.saturating_sub(1));
        for i in 0..n {
            let mut p = m.diag[i];
            if i > 0 {
                let l = m.off[i - 1] / pivots[i - 1];
                p -= l * m.off[i - 1];
                lower.push(l);
            }
            if !(p > 0.0) || !p.is_finite() {
                return Err(SlqError::NotPositiveDefinite { row: i, pivot: p });
            }
            pivots.push(p);
        }
        Ok(Self { pivots, lower })
    }

    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    /// Solves in place: `b` is overwritten by the solution.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(b.len(), n);
        for i in 1..n {
            b[i] -= self.lower[i - 1] * b[i - 1];
        }
        for (bi, p) in b.iter_mut().zip(&self.pivots) {
            *bi /= p;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            b[i] -= self.lower[i] * b[i + 1];
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Pairwise summation in index order; fixed reduction tree for reproducibility.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}
