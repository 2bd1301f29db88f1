//! Structured simplicial meshes of the unit interval and unit square, together
//! with the degree-of-freedom maps of the conforming P1 spaces built on them.
//!
//! Vertices of the 2D grid are numbered row by row, `v = j * (n + 1) + i` for
//! the point `(i / n, j / n)`. Every grid square is split along its
//! lower-left to upper-right diagonal into two counter-clockwise triangles.

use std::fmt::Write as _;

use crate::error::{config, Result};

/// Coordinates of a point. In 1D the second entry is always zero.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    dim: usize,
    n: usize,
    vertices: Vec<Point>,
    /// Flat cell connectivity, `dim + 1` vertex indices per cell.
    cells: Vec<usize>,
    boundary: Vec<usize>,
    on_boundary: Vec<bool>,
}

/// Per-cell geometric data for P1 elements: measure, centroid and the
/// (constant) gradients of the local barycentric basis functions.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub measure: f64,
    pub centroid: Point,
    pub grads: [[f64; 2]; 3],
}

/// Build the structured mesh of `(0,1)^dim` with `n` cells per axis.
pub fn build_unit_mesh(dim: usize, n: usize) -> Result<Mesh> {
    if n == 0 {
        return config("mesh resolution n must be at least 1");
    }
    let coord = |i: usize| i as f64 / n as f64;
    match dim {
        1 => {
            let vertices: Vec<Point> = (0..=n).map(|i| [coord(i), 0.0]).collect();
            let cells = (0..n).flat_map(|i| [i, i + 1]).collect();
            Ok(Mesh::from_parts(1, n, vertices, cells))
        }
        2 => {
            let stride = n + 1;
            let mut vertices = Vec::with_capacity(stride * stride);
            for j in 0..=n {
                for i in 0..=n {
                    vertices.push([coord(i), coord(j)]);
                }
            }
            let mut cells = Vec::with_capacity(6 * n * n);
            for j in 0..n {
                for i in 0..n {
                    let v00 = j * stride + i;
                    let v10 = v00 + 1;
                    let v01 = v00 + stride;
                    let v11 = v01 + 1;
                    cells.extend_from_slice(&[v00, v10, v11]);
                    cells.extend_from_slice(&[v00, v11, v01]);
                }
            }
            Ok(Mesh::from_parts(2, n, vertices, cells))
        }
        d => config(format!("mesh dimension must be 1 or 2, got {d}")),
    }
}

impl Mesh {
    fn from_parts(dim: usize, n: usize, vertices: Vec<Point>, cells: Vec<usize>) -> Self {
        let on_boundary: Vec<bool> = vertices
            .iter()
            .map(|x| x[..dim].iter().any(|&c| c == 0.0 || c == 1.0))
            .collect();
        let boundary = (0..vertices.len()).filter(|&v| on_boundary[v]).collect();
        Mesh {
            dim,
            n,
            vertices,
            cells,
            boundary,
            on_boundary,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    pub fn cells(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks_exact(self.dim + 1)
    }

    pub fn boundary_vertices(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn cell_geometry(&self, c: usize) -> CellGeometry {
        let cell = self.cell(c);
        match self.dim {
            1 => {
                let a = self.vertices[cell[0]][0];
                let b = self.vertices[cell[1]][0];
                let len = b - a;
                CellGeometry {
                    measure: len,
                    centroid: [0.5 * (a + b), 0.0],
                    grads: [[-1.0 / len, 0.0], [1.0 / len, 0.0], [0.0, 0.0]],
                }
            }
            _ => {
                let [p0, p1, p2] = [
                    self.vertices[cell[0]],
                    self.vertices[cell[1]],
                    self.vertices[cell[2]],
                ];
                let det = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
                let grads = [
                    [(p1[1] - p2[1]) / det, (p2[0] - p1[0]) / det],
                    [(p2[1] - p0[1]) / det, (p0[0] - p2[0]) / det],
                    [(p0[1] - p1[1]) / det, (p1[0] - p0[0]) / det],
                ];
                CellGeometry {
                    measure: 0.5 * det,
                    centroid: [
                        (p0[0] + p1[0] + p2[0]) / 3.0,
                        (p0[1] + p1[1] + p2[1]) / 3.0,
                    ],
                    grads,
                }
            }
        }
    }

    pub fn geometries(&self) -> Vec<CellGeometry> {
        (0..self.n_cells()).map(|c| self.cell_geometry(c)).collect()
    }

    /// Plain-text dump: header `dim n_vertices n_cells`, then one vertex per
    /// line, then one cell per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} {} {}", self.dim, self.n_vertices(), self.n_cells());
        for x in &self.vertices {
            match self.dim {
                1 => {
                    let _ = writeln!(out, "{:.16e}", x[0]);
                }
                _ => {
                    let _ = writeln!(out, "{:.16e} {:.16e}", x[0], x[1]);
                }
            }
        }
        for cell in self.cells() {
            let line: Vec<String> = cell.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    Scalar,
    Vector,
}

/// Degree-of-freedom map of a P1 space with homogeneous Dirichlet data on
/// the whole boundary. Vector dofs are interleaved: `vertex * dim + component`.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    kind: SpaceKind,
    components: usize,
    n_dofs: usize,
    interior: Vec<usize>,
    dirichlet: Vec<usize>,
    is_dirichlet: Vec<bool>,
    /// Position of each dof in `interior`, `usize::MAX` for Dirichlet dofs.
    reduced: Vec<usize>,
}

pub fn build_dofmap(mesh: &Mesh, kind: SpaceKind) -> DofMap {
    let components = match kind {
        SpaceKind::Scalar => 1,
        SpaceKind::Vector => mesh.dim(),
    };
    let n_dofs = mesh.n_vertices() * components;
    let is_dirichlet: Vec<bool> = (0..n_dofs)
        .map(|d| mesh.is_boundary(d / components))
        .collect();
    let interior: Vec<usize> = (0..n_dofs).filter(|&d| !is_dirichlet[d]).collect();
    let dirichlet = (0..n_dofs).filter(|&d| is_dirichlet[d]).collect();
    let mut reduced = vec![usize::MAX; n_dofs];
    for (k, &d) in interior.iter().enumerate() {
        reduced[d] = k;
    }
    DofMap {
        kind,
        components,
        n_dofs,
        interior,
        dirichlet,
        is_dirichlet,
        reduced,
    }
}

impl DofMap {
    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn n_dofs(&self) -> usize {
        self.n_dofs
    }

    pub fn n_interior(&self) -> usize {
        self.interior.len()
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior
    }

    pub fn dirichlet_dofs(&self) -> &[usize] {
        &self.dirichlet
    }

    pub fn is_dirichlet(&self, dof: usize) -> bool {
        self.is_dirichlet[dof]
    }

    /// Index of `dof` among the interior dofs.
    pub fn reduced_index(&self, dof: usize) -> Option<usize> {
        match self.reduced[dof] {
            usize::MAX => None,
            k => Some(k),
        }
    }

    /// Global dof of the `component`-th component at `vertex`.
    pub fn dof(&self, vertex: usize, component: usize) -> usize {
        vertex * self.components + component
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_with_four_cells() {
        let m = build_unit_mesh(1, 4).unwrap();
        assert_eq!(m.n_vertices(), 5);
        assert_eq!(m.n_cells(), 4);
        assert_eq!(m.boundary_vertices(), &[0, 4]);
    }

    #[test]
    fn single_square_has_all_vertices_on_boundary() {
        let m = build_unit_mesh(2, 1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.boundary_vertices(), &[0, 1, 2, 3]);
    }

    #[test]
    fn cell_measures_partition_the_unit_square() {
        let m = build_unit_mesh(2, 32).unwrap();
        let total: f64 = m.geometries().iter().map(|g| g.measure).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(m.geometries().iter().all(|g| g.measure > 0.0));
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        assert!(build_unit_mesh(3, 4).is_err());
        assert!(build_unit_mesh(1, 0).is_err());
        assert!(build_unit_mesh(2, 0).is_err());
    }

    #[test]
    fn dofmap_examples() {
        let m = build_unit_mesh(1, 4).unwrap();
        assert_eq!(build_dofmap(&m, SpaceKind::Scalar).interior_dofs(), &[1, 2, 3]);
        let m = build_unit_mesh(2, 1).unwrap();
        assert!(build_dofmap(&m, SpaceKind::Scalar).interior_dofs().is_empty());
        let m = build_unit_mesh(2, 2).unwrap();
        let vd = build_dofmap(&m, SpaceKind::Vector);
        assert_eq!(vd.interior_dofs(), &[8, 9]);
        assert_eq!(vd.reduced_index(9), Some(1));
        assert_eq!(vd.reduced_index(0), None);
    }

    #[test]
    fn dofmap_partitions_all_dofs() {
        for dim in 1..=2 {
            for n in 1..=64 {
                let m = build_unit_mesh(dim, n).unwrap();
                for kind in [SpaceKind::Scalar, SpaceKind::Vector] {
                    let dm = build_dofmap(&m, kind);
                    assert_eq!(dm.n_interior() + dm.dirichlet_dofs().len(), dm.n_dofs());
                    for &v in m.boundary_vertices() {
                        for c in 0..dm.components() {
                            assert!(dm.is_dirichlet(dm.dof(v, c)));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn refinement_is_nested() {
        for dim in 1..=2 {
            let coarse = build_unit_mesh(dim, 3).unwrap();
            let fine = build_unit_mesh(dim, 6).unwrap();
            for x in coarse.vertices() {
                assert!(fine
                    .vertices()
                    .iter()
                    .any(|y| (x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14));
            }
        }
    }

    #[test]
    fn dump_header() {
        let m = build_unit_mesh(2, 2).unwrap();
        let dump = m.dump();
        assert_eq!(dump.lines().next(), Some("2 9 8"));
        assert_eq!(dump.lines().count(), 1 + 9 + 8);
    }
}
