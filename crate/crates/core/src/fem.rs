//! P1 finite elements on a uniform mesh of `(0, L)` with homogeneous Dirichlet
//! boundary conditions.
//!
//! Only interior nodes carry degrees of freedom; boundary values are zero by
//! construction, so every coefficient vector is an element of `H¹₀`.
//! Inner products are realized by the mass matrix `(h/6)·[1, 4, 1]` and the
//! stiffness matrix `(1/h)·[-1, 2, -1]`.

use std::ops::{Deref, DerefMut};

use crate::error::{check_len, Result, SlqError};
use crate::linalg::{SymTridiag, TridiagFactor};

/// Five-point Gauss–Legendre rule on `[-1, 1]`.
const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Uniform mesh of `(0, length)` with `cells` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mesh1D {
    length: f64,
    cells: usize,
}

impl Mesh1D {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(SlqError::InvalidLength(length));
        }
        if cells < 2 {
            return Err(SlqError::TooFewCells { cells });
        }
        Ok(Self { length, cells })
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn h(&self) -> f64 {
        self.length / self.cells as f64
    }

    /// Number of interior nodes `d_h`.
    pub fn dofs(&self) -> usize {
        self.cells - 1
    }

    /// Coordinate of mesh node `j` (0 and `cells` are the boundary nodes).
    pub fn node(&self, j: usize) -> f64 {
        if j == self.cells {
            self.length
        } else {
            j as f64 * self.h()
        }
    }

    /// Interior node coordinates `x_1 .. x_{d_h}`.
    pub fn interior_nodes(&self) -> Vec<f64> {
        (1..self.cells).map(|j| self.node(j)).collect()
    }
}

/// Mass and stiffness matrices of the P1 space.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub mass: SymTridiag,
    pub stiffness: SymTridiag,
}

/// Nodal coefficients of a function in the P1 space (interior nodes only).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FemVector(Vec<f64>);

impl FemVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(v)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// `self += a·x`.
    pub fn axpy(&mut self, a: f64, x: &[f64]) {
        for (s, xi) in self.0.iter_mut().zip(x) {
            *s += a * xi;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self(self.0.iter().map(|v| a * v).collect())
    }

    pub fn sub(&self, other: &[f64]) -> Self {
        Self(self.0.iter().zip(other).map(|(a, b)| a - b).collect())
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Deref for FemVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for FemVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for FemVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Assembles the mass and stiffness matrices by exact integration of hat functions.
pub fn assemble(mesh: &Mesh1D) -> Result<FemMatrices> {
    if mesh.cells() < 2 {
        return Err(SlqError::TooFewCells {
            cells: mesh.cells(),
        });
    }
    let h = mesh.h();
    let n = mesh.dofs();
    // Element matrices: mass (h/6)[[2,1],[1,2]], stiffness (1/h)[[1,-1],[-1,1]].
    let mut md = vec![0.0; n];
    let mut mo = vec![0.0; n - 1];
    let mut kd = vec![0.0; n];
    let mut ko = vec![0.0; n - 1];
    for cell in 0..mesh.cells() {
        // Cell spans nodes `cell` and `cell + 1`; interior index is node - 1.
        let left = cell.checked_sub(1);
        let right = (cell < n).then_some(cell);
        if let Some(l) = left {
            md[l] += 2.0 * h / 6.0;
            kd[l] += 1.0 / h;
        }
        if let Some(r) = right {
            md[r] += 2.0 * h / 6.0;
            kd[r] += 1.0 / h;
        }
        if let (Some(l), Some(_)) = (left, right) {
            mo[l] += h / 6.0;
            ko[l] -= 1.0 / h;
        }
    }
    Ok(FemMatrices {
        mass: SymTridiag::new(md, mo),
        stiffness: SymTridiag::new(kd, ko),
    })
}

/// The P1 space with its matrices and factorizations, immutable after construction.
#[derive(Debug, Clone)]
pub struct FemSpace {
    mesh: Mesh1D,
    matrices: FemMatrices,
    mass_factor: TridiagFactor,
    stiffness_factor: TridiagFactor,
}

impl FemSpace {
    pub fn new(mesh: Mesh1D) -> Result<Self> {
        let matrices = assemble(&mesh)?;
        let mass_factor = matrices.mass.factor()?;
        let stiffness_factor = matrices.stiffness.factor()?;
        Ok(Self {
            mesh,
            matrices,
            mass_factor,
            stiffness_factor,
        })
    }

    pub fn uniform(length: f64, cells: usize) -> Result<Self> {
        Self::new(Mesh1D::new(length, cells)?)
    }

    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn dofs(&self) -> usize {
        self.mesh.dofs()
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.matrices.mass
    }

    pub fn stiffness(&self) -> &SymTridiag {
        &self.matrices.stiffness
    }

    pub fn matrices(&self) -> &FemMatrices {
        &self.matrices
    }

    pub fn mass_factor(&self) -> &TridiagFactor {
        &self.mass_factor
    }

    pub fn zeros(&self) -> FemVector {
        FemVector::zeros(self.dofs())
    }

    /// Poincaré constant `(L/π)²` of the domain.
    pub fn poincare_constant(&self) -> f64 {
        let r = self.mesh.length() / std::f64::consts::PI;
        r * r
    }

    /// Applies `f` at every Gauss point of every cell, passing
    /// `(cell, x, weight, local coordinate in [0, 1])`.
    fn for_each_quad_point(&self, mut f: impl FnMut(usize, f64, f64, f64)) {
        let h = self.mesh.h();
        for cell in 0..self.mesh.cells() {
            let a = cell as f64 * h;
            for (xi, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                let s = 0.5 * (xi + 1.0);
                f(cell, a + s * h, 0.5 * h * w, s);
            }
        }
    }

    /// Value of the P1 function with coefficients `v` at node `j` of the mesh.
    fn nodal(&self, v: &[f64], j: usize) -> f64 {
        if j == 0 || j == self.mesh.cells() {
            0.0
        } else {
            v[j - 1]
        }
    }

    /// L² projection: solves `mass·c = (∫ f φ_j)_j`.
    pub fn l2_project(&self, f: impl Fn(f64) -> f64) -> FemVector {
        let n = self.dofs();
        let mut load = vec![0.0; n];
        self.for_each_quad_point(|cell, x, w, s| {
            let fx = f(x) * w;
            // Left node of the cell is `cell`, right node `cell + 1`.
            if cell >= 1 {
                load[cell - 1] += fx * (1.0 - s);
            }
            if cell < n {
                load[cell] += fx * s;
            }
        });
        self.mass_factor.solve_in_place(&mut load);
        FemVector(load)
    }

    /// Ritz projection: solves `stiffness·c = (∫ f′ φ_j′)_j`.
    ///
    /// `φ_j′` is piecewise constant, so the load only needs `f` at the nodes.
    /// In 1D the result reproduces the nodal interpolant.
    pub fn ritz_project(&self, f: impl Fn(f64) -> f64) -> Result<FemVector> {
        let cells = self.mesh.cells();
        let values: Vec<f64> = (0..=cells).map(|j| f(self.mesh.node(j))).collect();
        let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for &j in &[0, cells] {
            if values[j].abs() > 1e-10 * scale {
                return Err(SlqError::BoundaryViolation {
                    what: "Ritz projection argument".into(),
                    x: self.mesh.node(j),
                    value: values[j],
                });
            }
        }
        let h = self.mesh.h();
        let mut load: Vec<f64> = (1..cells)
            .map(|j| (2.0 * values[j] - values[j - 1] - values[j + 1]) / h)
            .collect();
        self.stiffness_factor.solve_in_place(&mut load);
        Ok(FemVector(load))
    }

    /// Discrete Laplacian: `w` with `mass·w = −stiffness·v`.
    pub fn apply_discrete_laplacian(&self, v: &[f64]) -> Result<FemVector> {
        check_len("discrete Laplacian argument", self.dofs(), v.len())?;
        let mut w = self.matrices.stiffness.mul(v);
        w.iter_mut().for_each(|x| *x = -*x);
        self.mass_factor.solve_in_place(&mut w);
        Ok(FemVector(w))
    }

    /// `(‖v‖_{L²}, ‖∇v‖_{L²})`.
    pub fn norms(&self, v: &[f64]) -> (f64, f64) {
        (self.l2_norm(v), self.h1_seminorm(v))
    }

    pub fn l2_norm(&self, v: &[f64]) -> f64 {
        self.matrices.mass.quad(v).max(0.0).sqrt()
    }

    pub fn h1_seminorm(&self, v: &[f64]) -> f64 {
        self.matrices.stiffness.quad(v).max(0.0).sqrt()
    }

    /// L² inner product of two P1 functions.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.matrices.mass.bilinear(a, b)
    }

    /// Point evaluation of the P1 function `v` at `x ∈ [0, L]`.
    pub fn evaluate(&self, v: &[f64], x: f64) -> f64 {
        let h = self.mesh.h();
        let cells = self.mesh.cells();
        let pos = (x / h).clamp(0.0, cells as f64);
        let cell = (pos.floor() as usize).min(cells - 1);
        let s = pos - cell as f64;
        (1.0 - s) * self.nodal(v, cell) + s * self.nodal(v, cell + 1)
    }

    /// Coefficients with the two boundary zeros attached: length `cells + 1`.
    pub fn with_boundary(&self, v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len() + 2);
        out.push(0.0);
        out.extend_from_slice(v);
        out.push(0.0);
        out
    }

    /// `‖f − v‖_{L²}` by Gauss quadrature.
    pub fn l2_error(&self, v: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        self.for_each_quad_point(|cell, x, w, s| {
            let vh = (1.0 - s) * self.nodal(v, cell) + s * self.nodal(v, cell + 1);
            let e = f(x) - vh;
            acc += w * e * e;
        });
        acc.sqrt()
    }

    /// `‖f′ − v′‖_{L²}` by Gauss quadrature, given the derivative `df`.
    pub fn h1_error(&self, v: &[f64], df: impl Fn(f64) -> f64) -> f64 {
        let h = self.mesh.h();
        let mut acc = 0.0;
        self.for_each_quad_point(|cell, x, w, _| {
            let slope = (self.nodal(v, cell + 1) - self.nodal(v, cell)) / h;
            let e = df(x) - slope;
            acc += w * e * e;
        });
        acc.sqrt()
    }

    fn refinement_ratio(&self, fine: &FemSpace) -> Result<usize> {
        let (c, f) = (self.mesh.cells(), fine.mesh.cells());
        if (self.mesh.length() - fine.mesh.length()).abs() > 1e-12 * self.mesh.length()
            || f < c
            || f % c != 0
        {
            return Err(SlqError::NotNested(format!(
                "{c} cells cannot be embedded in {f} cells"
            )));
        }
        Ok(f / c)
    }

    /// Embeds a function of this (coarse) space into the nested `fine` space.
    pub fn prolongate(&self, v: &[f64], fine: &FemSpace) -> Result<FemVector> {
        check_len("prolongation argument", self.dofs(), v.len())?;
        let r = self.refinement_ratio(fine)?;
        let out = (1..fine.mesh.cells())
            .map(|j| {
                let cell = j / r;
                let s = (j % r) as f64 / r as f64;
                (1.0 - s) * self.nodal(v, cell) + s * self.nodal(v, cell + 1)
            })
            .collect();
        Ok(FemVector(out))
    }

    /// Nodal restriction of a `fine`-space function onto this (coarse) space.
    pub fn restrict(&self, v: &[f64], fine: &FemSpace) -> Result<FemVector> {
        check_len("restriction argument", fine.dofs(), v.len())?;
        let r = self.refinement_ratio(fine)?;
        Ok(FemVector(
            (1..self.mesh.cells()).map(|j| v[j * r - 1]).collect(),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn space(cells: usize) -> FemSpace {
        FemSpace::uniform(1.0, cells).unwrap()
    }

    #[test]
    fn two_cell_mesh_matrices() {
        let m = assemble(&Mesh1D::new(1.0, 2).unwrap()).unwrap();
        assert!((m.mass.get(0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.stiffness.get(0, 0) - 4.0).abs() < 1e-15);
    }

    #[test]
    fn four_cell_stiffness_stencil() {
        let m = assemble(&Mesh1D::new(1.0, 4).unwrap()).unwrap();
        assert_eq!(m.stiffness.get(1, 0), -4.0);
        assert_eq!(m.stiffness.get(1, 1), 8.0);
        assert_eq!(m.stiffness.get(1, 2), -4.0);
        let h = 0.25;
        assert!((m.mass.get(1, 1) - 4.0 * h / 6.0).abs() < 1e-15);
        assert!((m.mass.get(1, 2) - h / 6.0).abs() < 1e-15);
    }

    #[test]
    fn mass_matches_quadrature_of_hat_products() {
        // Brute force: integrate φ_i φ_j by midpoint sums on a fine grid.
        let s = space(5);
        let n = s.dofs();
        let hat = |j: usize, x: f64| {
            let xj = (j + 1) as f64 * 0.2;
            (1.0 - (x - xj).abs() / 0.2).max(0.0)
        };
        let samples = 200_000;
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..samples {
                    let x = (k as f64 + 0.5) / samples as f64;
                    acc += hat(i, x) * hat(j, x);
                }
                acc /= samples as f64;
                assert!((acc - s.mass().get(i, j)).abs() < 1e-8, "({i},{j})");
            }
        }
    }

    #[test]
    fn too_few_cells_rejected() {
        assert_eq!(
            Mesh1D::new(1.0, 1).unwrap_err(),
            SlqError::TooFewCells { cells: 1 }
        );
    }

    #[test]
    fn projections_of_zero_and_of_space_members() {
        let s = space(8);
        assert!(s.l2_project(|_| 0.0).iter().all(|&v| v == 0.0));
        // Hat-shaped member of V_h: nodal values j·(8-j)/16.
        let coeffs: Vec<f64> = (1..8).map(|j| (j * (8 - j)) as f64 / 16.0).collect();
        let f = |x: f64| s.evaluate(&coeffs, x);
        let p = s.l2_project(f);
        let r = s.ritz_project(f).unwrap();
        for j in 0..7 {
            assert!((p[j] - coeffs[j]).abs() < 1e-13);
            assert!((r[j] - coeffs[j]).abs() < 1e-13);
        }
    }

    #[test]
    fn l2_projection_second_order() {
        let err = |cells| {
            let s = space(cells);
            let p = s.l2_project(|x| (PI * x).sin());
            s.l2_error(&p, |x| (PI * x).sin())
        };
        let (e1, e2, e3) = (err(8), err(16), err(32));
        assert!((e1 / e2) > 3.8 && (e2 / e3) > 3.8, "{e1} {e2} {e3}");
        let order = (e2 / e3).log2();
        assert!(order >= 1.9);
    }

    #[test]
    fn ritz_projection_first_order_in_energy() {
        let f = |x: f64| x * x * (1.0 - x);
        let df = |x: f64| 2.0 * x - 3.0 * x * x;
        let err = |cells| {
            let s = space(cells);
            let r = s.ritz_project(f).unwrap();
            s.h1_error(&r, df)
        };
        let (e1, e2) = (err(16), err(32));
        assert!((e1 / e2).log2() >= 0.9);
        // ‖∇R_h f‖ ≤ ‖∇f‖, with ‖∇f‖² = ∫(2x−3x²)² = 2/15.
        let s = space(16);
        let r = s.ritz_project(f).unwrap();
        assert!(s.h1_seminorm(&r) <= (2.0_f64 / 15.0).sqrt());
    }

    #[test]
    fn ritz_rejects_nonvanishing_boundary() {
        let s = space(4);
        assert!(matches!(
            s.ritz_project(|x| 1.0 + x),
            Err(SlqError::BoundaryViolation { .. })
        ));
    }

    #[test]
    fn discrete_laplacian_negative_and_zero() {
        let s = space(10);
        assert!(s
            .apply_discrete_laplacian(&s.zeros())
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
        let v = s.l2_project(|x| (PI * x).sin());
        let w = s.apply_discrete_laplacian(&v).unwrap();
        let pairing = s.inner(&w, &v);
        assert!(pairing < 0.0);
        assert!((pairing + s.stiffness().quad(&v)).abs() < 1e-12);
    }

    #[test]
    fn interpolant_norm_of_sine() {
        let s = space(400);
        let v: Vec<f64> = s
            .mesh()
            .interior_nodes()
            .iter()
            .map(|x| (PI * x).sin())
            .collect();
        let (l2, _) = s.norms(&v);
        assert!((l2 - 0.5_f64.sqrt()).abs() < 1e-4);
        assert_eq!(s.norms(&s.zeros()), (0.0, 0.0));
    }

    #[test]
    fn prolongation_preserves_norms_and_restriction_inverts_it() {
        let coarse = space(4);
        let fine = space(16);
        let v = FemVector::from_vec(vec![0.3, -1.0, 0.7]);
        let p = coarse.prolongate(&v, &fine).unwrap();
        assert!((coarse.l2_norm(&v) - fine.l2_norm(&p)).abs() < 1e-13);
        assert!((coarse.h1_seminorm(&v) - fine.h1_seminorm(&p)).abs() < 1e-12);
        assert_eq!(coarse.restrict(&p, &fine).unwrap(), v);
        assert!(matches!(
            space(3).prolongate(&[0.0, 0.0], &fine),
            Err(SlqError::NotNested(_))
        ));
    }

    proptest! {
        #[test]
        fn poincare_inequality(cells in 2usize..40, seed in proptest::collection::vec(-1.0f64..1.0, 40)) {
            let s = space(cells);
            let v = &seed[..s.dofs()];
            prop_assert!(s.mass().quad(v) <= s.poincare_constant() * s.stiffness().quad(v) * (1.0 + 1e-12) + 1e-300);
        }

        #[test]
        fn laplacian_self_adjoint(a in proptest::collection::vec(-1.0f64..1.0, 9), b in proptest::collection::vec(-1.0f64..1.0, 9)) {
            let s = space(10);
            let la = s.apply_discrete_laplacian(&a).unwrap();
            let lb = s.apply_discrete_laplacian(&b).unwrap();
            prop_assert!((s.inner(&la, &b) - s.inner(&a, &lb)).abs() < 1e-10);
        }

        #[test]
        fn projections_idempotent(v in proptest::collection::vec(-1.0f64..1.0, 11)) {
            let s = space(12);
            let f = |x: f64| s.evaluate(&v, x);
            let p = s.l2_project(f);
            let r = s.ritz_project(f).unwrap();
            for j in 0..11 {
                prop_assert!((p[j] - v[j]).abs() < 1e-12);
                prop_assert!((r[j] - v[j]).abs() < 1e-12);
            }
        }
    }
}
