//! Nodal coefficient vectors of P1 fields.
//!
//! Pressures and displacements are stored over all nodal dofs with zero
//! values on Dirichlet dofs. Fluid-content fields (`ζ`, `z`, `d₀`) live in
//! the unconstrained P1 space and carry boundary values.

use nalgebra::DVector;

use crate::mesh::{DofMap, Mesh, Point};

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub values: DVector<f64>,
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    /// Interleaved `vertex * dim + component` coefficients.
    pub values: DVector<f64>,
    pub time: Option<f64>,
}

impl ScalarField {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: DVector::zeros(n),
            time: None,
        }
    }

    pub fn new(values: DVector<f64>) -> Self {
        Self { values, time: None }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    /// Nodal interpolant of `f` on every vertex.
    pub fn interpolate(mesh: &Mesh, f: impl Fn(Point) -> f64) -> Self {
        Self::new(DVector::from_iterator(
            mesh.n_vertices(),
            mesh.vertices().iter().map(|&x| f(x)),
        ))
    }

    /// Nodal interpolant with Dirichlet values forced to zero.
    pub fn interpolate_constrained(mesh: &Mesh, dofs: &DofMap, f: impl Fn(Point) -> f64) -> Self {
        let mut field = Self::interpolate(mesh, f);
        field.constrain(dofs);
        field
    }

    /// Expand interior coefficients into a full field, zero on Dirichlet dofs.
    pub fn from_interior(dofs: &DofMap, interior: &DVector<f64>) -> Self {
        let mut values = DVector::zeros(dofs.n_dofs());
        for (k, &d) in dofs.interior_dofs().iter().enumerate() {
            values[d] = interior[k];
        }
        Self::new(values)
    }

    pub fn interior(&self, dofs: &DofMap) -> DVector<f64> {
        restrict(&self.values, dofs)
    }

    pub fn constrain(&mut self, dofs: &DofMap) {
        for &d in dofs.dirichlet_dofs() {
            self.values[d] = 0.0;
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at the centroid of every cell.
    pub fn cell_midpoint_values(&self, mesh: &Mesh) -> Vec<f64> {
        let w = 1.0 / (mesh.dim() + 1) as f64;
        mesh.cells()
            .map(|cell| cell.iter().map(|&v| self.values[v]).sum::<f64>() * w)
            .collect()
    }

    /// Constant gradient on every cell.
    pub fn cell_gradients(&self, mesh: &Mesh) -> Vec<[f64; 2]> {
        (0..mesh.n_cells())
            .map(|c| {
                let g = mesh.cell_geometry(c);
                let mut grad = [0.0; 2];
                for (a, &v) in mesh.cell(c).iter().enumerate() {
                    grad[0] += self.values[v] * g.grads[a][0];
                    grad[1] += self.values[v] * g.grads[a][1];
                }
                grad
            })
            .collect()
    }

    /// Evaluate the P1 function at barycentric coordinates of cell `c`.
    pub fn eval_in_cell(&self, mesh: &Mesh, c: usize, bary: &[f64]) -> f64 {
        mesh.cell(c)
            .iter()
            .zip(bary)
            .map(|(&v, &l)| self.values[v] * l)
            .sum()
    }
}

impl VectorField {
    pub fn zeros(n: usize) -> Self {
        Self {
            values: DVector::zeros(n),
            time: None,
        }
    }

    pub fn new(values: DVector<f64>) -> Self {
        Self { values, time: None }
    }

    pub fn at_time(mut self, t: f64) -> Self {
        self.time = Some(t);
        self
    }

    pub fn interpolate_constrained(
        mesh: &Mesh,
        dofs: &DofMap,
        f: impl Fn(Point) -> [f64; 2],
    ) -> Self {
        let d = mesh.dim();
        let mut values = DVector::zeros(dofs.n_dofs());
        for (v, &x) in mesh.vertices().iter().enumerate() {
            let fx = f(x);
            for c in 0..d {
                values[v * d + c] = fx[c];
            }
        }
        for &dof in dofs.dirichlet_dofs() {
            values[dof] = 0.0;
        }
        Self::new(values)
    }

    pub fn from_interior(dofs: &DofMap, interior: &DVector<f64>) -> Self {
        let mut values = DVector::zeros(dofs.n_dofs());
        for (k, &d) in dofs.interior_dofs().iter().enumerate() {
            values[d] = interior[k];
        }
        Self::new(values)
    }

    pub fn interior(&self, dofs: &DofMap) -> DVector<f64> {
        restrict(&self.values, dofs)
    }

    /// Jacobian `(∂_j u^i)` on every cell; unused entries are zero in 1D.
    pub fn cell_jacobians(&self, mesh: &Mesh) -> Vec<[[f64; 2]; 2]> {
        let d = mesh.dim();
        (0..mesh.n_cells())
            .map(|c| {
                let g = mesh.cell_geometry(c);
                let mut jac = [[0.0; 2]; 2];
                for (a, &v) in mesh.cell(c).iter().enumerate() {
                    for (i, row) in jac.iter_mut().enumerate().take(d) {
                        for (j, entry) in row.iter_mut().enumerate().take(d) {
                            *entry += self.values[v * d + i] * g.grads[a][j];
                        }
                    }
                }
                jac
            })
            .collect()
    }

    pub fn cell_divergences(&self, mesh: &Mesh) -> Vec<f64> {
        self.cell_jacobians(mesh)
            .iter()
            .map(|j| j[0][0] + j[1][1])
            .collect()
    }

    pub fn eval_in_cell(&self, mesh: &Mesh, c: usize, bary: &[f64]) -> [f64; 2] {
        let d = mesh.dim();
        let mut out = [0.0; 2];
        for (&v, &l) in mesh.cell(c).iter().zip(bary) {
            for (comp, o) in out.iter_mut().enumerate().take(d) {
                *o += self.values[v * d + comp] * l;
            }
        }
        out
    }
}

pub(crate) fn restrict(full: &DVector<f64>, dofs: &DofMap) -> DVector<f64> {
    DVector::from_iterator(
        dofs.n_interior(),
        dofs.interior_dofs().iter().map(|&d| full[d]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_dofmap, build_unit_mesh, SpaceKind};

    #[test]
    fn gradients_of_linear_functions_are_exact() {
        let mesh = build_unit_mesh(2, 3).unwrap();
        let f = ScalarField::interpolate(&mesh, |x| 2.0 * x[0] - 0.5 * x[1] + 1.0);
        for g in f.cell_gradients(&mesh) {
            assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn divergence_of_linear_displacement() {
        let mesh = build_unit_mesh(2, 2).unwrap();
        let dofs = build_dofmap(&mesh, SpaceKind::Vector);
        let mut u = VectorField::zeros(dofs.n_dofs());
        for (v, x) in mesh.vertices().iter().enumerate() {
            u.values[2 * v] = 3.0 * x[0];
            u.values[2 * v + 1] = -x[1];
        }
        for div in u.cell_divergences(&mesh) {
            assert!((div - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn interior_round_trip() {
        let mesh = build_unit_mesh(1, 5).unwrap();
        let dofs = build_dofmap(&mesh, SpaceKind::Scalar);
        let f = ScalarField::interpolate_constrained(&mesh, &dofs, |x| x[0] * (1.0 - x[0]));
        let back = ScalarField::from_interior(&dofs, &f.interior(&dofs));
        assert_eq!(f, back);
    }
}
