//! P1 assembly of the mass, stiffness, weighted stiffness, elasticity and
//! coupling matrices, and of load vectors.
//!
//! Square matrices on a constrained space use the identity convention: rows
//! and columns of Dirichlet dofs are dropped and a unit diagonal is inserted.
//! Mass and stiffness are integrated exactly; the permeability weight and
//! loads use the cell-midpoint rule.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use rayon::prelude::*;

use crate::field::ScalarField;
use crate::mesh::{CellGeometry, DofMap, Mesh, Point};
use crate::permeability::PermeabilityLaw;

/// Sparse matrix of an assembled bilinear form.
#[derive(Debug, Clone)]
pub struct LinearOperatorMatrix {
    csr: CsrMatrix<f64>,
    symmetric: bool,
}

impl LinearOperatorMatrix {
    pub fn from_csr(csr: CsrMatrix<f64>, symmetric: bool) -> Self {
        Self { csr, symmetric }
    }

    pub fn from_dense(dense: &DMatrix<f64>, symmetric: bool) -> Self {
        let mut coo = CooMatrix::new(dense.nrows(), dense.ncols());
        for j in 0..dense.ncols() {
            for i in 0..dense.nrows() {
                if dense[(i, j)] != 0.0 {
                    coo.push(i, j, dense[(i, j)]);
                }
            }
        }
        Self::from_csr(CsrMatrix::from(&coo), symmetric)
    }

    pub fn rows(&self) -> usize {
        self.csr.nrows()
    }

    pub fn cols(&self) -> usize {
        self.csr.ncols()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn csr(&self) -> &CsrMatrix<f64> {
        &self.csr
    }

    pub fn to_csc(&self) -> CscMatrix<f64> {
        CscMatrix::from(&self.csr)
    }

    pub fn nnz(&self) -> usize {
        self.csr.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = self.csr.row(i);
        match row.col_indices().binary_search(&j) {
            Ok(k) => row.values()[k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.cols(), "dimension mismatch in mul_vec");
        DVector::from_iterator(
            self.rows(),
            self.csr.row_iter().map(|row| {
                row.col_indices()
                    .iter()
                    .zip(row.values())
                    .map(|(&j, &v)| v * x[j])
                    .sum::<f64>()
            }),
        )
    }

    pub fn transpose_mul_vec(&self, y: &DVector<f64>) -> DVector<f64> {
        assert_eq!(y.len(), self.rows(), "dimension mismatch in transpose_mul_vec");
        let mut out = DVector::zeros(self.cols());
        for (i, row) in self.csr.row_iter().enumerate() {
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                out[j] += v * y[i];
            }
        }
        out
    }

    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&self.mul_vec(x))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.rows(), self.cols());
        for (i, j, &v) in self.csr.triplet_iter() {
            d[(i, j)] += v;
        }
        d
    }

    /// Dense submatrix on the given row and column index sets.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
        let mut col_pos = vec![usize::MAX; self.cols()];
        for (k, &c) in cols.iter().enumerate() {
            col_pos[c] = k;
        }
        let mut d = DMatrix::zeros(rows.len(), cols.len());
        for (r, &i) in rows.iter().enumerate() {
            let row = self.csr.row(i);
            for (&j, &v) in row.col_indices().iter().zip(row.values()) {
                if col_pos[j] != usize::MAX {
                    d[(r, col_pos[j])] += v;
                }
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.csr.values().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |K_ij - K_ji|` over stored entries.
    pub fn max_asymmetry(&self) -> f64 {
        if self.rows() != self.cols() {
            return f64::INFINITY;
        }
        self.csr
            .triplet_iter()
            .map(|(i, j, &v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut csr = self.csr.clone();
        csr.values_mut().iter_mut().for_each(|v| *v *= alpha);
        Self::from_csr(csr, self.symmetric)
    }

    /// Coordinate dump `row col value`, sorted by (row, col).
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (i, j, v) in self.csr.triplet_iter() {
            let _ = writeln!(out, "{i} {j} {v:.16e}");
        }
        out
    }
}

type Local = [[f64; 6]; 6];

/// Assemble a square form from per-cell local matrices over `dofs`.
fn assemble_square(
    mesh: &Mesh,
    dofs: Option<&DofMap>,
    components: usize,
    local: impl Fn(usize, &CellGeometry) -> Local + Sync,
) -> LinearOperatorMatrix {
    let n = mesh.n_vertices() * components;
    let locals: Vec<Local> = (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| local(c, &mesh.cell_geometry(c)))
        .collect();
    let mut coo = CooMatrix::new(n, n);
    let k = mesh.dim() + 1;
    for (c, loc) in locals.iter().enumerate() {
        let cell = mesh.cell(c);
        for a in 0..k * components {
            let i = cell[a / components] * components + a % components;
            if dofs.is_some_and(|d| d.is_dirichlet(i)) {
                continue;
            }
            for b in 0..k * components {
                let j = cell[b / components] * components + b % components;
                if dofs.is_some_and(|d| d.is_dirichlet(j)) {
                    continue;
                }
                coo.push(i, j, loc[a][b]);
            }
        }
    }
    if let Some(d) = dofs {
        for &i in d.dirichlet_dofs() {
            coo.push(i, i, 1.0);
        }
    }
    LinearOperatorMatrix::from_csr(CsrMatrix::from(&coo), true)
}

fn mass_local(dim: usize, g: &CellGeometry) -> Local {
    let mut m = [[0.0; 6]; 6];
    let (diag, off) = match dim {
        1 => (g.measure / 3.0, g.measure / 6.0),
        _ => (g.measure / 6.0, g.measure / 12.0),
    };
    for (a, row) in m.iter_mut().enumerate().take(dim + 1) {
        for (b, v) in row.iter_mut().enumerate().take(dim + 1) {
            *v = if a == b { diag } else { off };
        }
    }
    m
}

fn stiffness_local(dim: usize, g: &CellGeometry, weight: f64) -> Local {
    let mut m = [[0.0; 6]; 6];
    for a in 0..=dim {
        for b in 0..=dim {
            let dot = g.grads[a][0] * g.grads[b][0] + g.grads[a][1] * g.grads[b][1];
            m[a][b] = weight * g.measure * dot;
        }
    }
    m
}

/// `|T| (∂_i ψ_a ∂_j ψ_b + δ_ij ∇ψ_a·∇ψ_b + ∂_j ψ_a ∂_i ψ_b)`.
fn elasticity_local(dim: usize, g: &CellGeometry) -> Local {
    let mut m = [[0.0; 6]; 6];
    for a in 0..=dim {
        for i in 0..dim {
            for b in 0..=dim {
                for j in 0..dim {
                    let ga = g.grads[a];
                    let gb = g.grads[b];
                    let dot = ga[0] * gb[0] + ga[1] * gb[1];
                    let delta = if i == j { dot } else { 0.0 };
                    m[a * dim + i][b * dim + j] =
                        g.measure * (ga[i] * gb[j] + delta + ga[j] * gb[i]);
                }
            }
        }
    }
    m
}

/// L² Gram matrix with the identity convention on Dirichlet dofs.
pub fn assemble_mass(mesh: &Mesh, dofs: &DofMap) -> LinearOperatorMatrix {
    let d = mesh.dim();
    assemble_square(mesh, Some(dofs), 1, |_, g| mass_local(d, g))
}

/// L² Gram matrix of the unconstrained P1 space.
pub fn assemble_mass_full(mesh: &Mesh) -> LinearOperatorMatrix {
    let d = mesh.dim();
    assemble_square(mesh, None, 1, |_, g| mass_local(d, g))
}

/// Gram matrix of `(∇·, ∇·)`, the V inner product.
pub fn assemble_stiffness_v(mesh: &Mesh, dofs: &DofMap) -> LinearOperatorMatrix {
    let d = mesh.dim();
    assemble_square(mesh, Some(dofs), 1, |_, g| stiffness_local(d, g, 1.0))
}

pub fn assemble_stiffness_full(mesh: &Mesh) -> LinearOperatorMatrix {
    let d = mesh.dim();
    assemble_square(mesh, None, 1, |_, g| stiffness_local(d, g, 1.0))
}

/// `(k(z) ∇p, ∇q)` with `k` sampled at the cell midpoint value of `z`.
pub fn assemble_weighted_stiffness(
    mesh: &Mesh,
    dofs: &DofMap,
    z: &ScalarField,
    law: &PermeabilityLaw,
) -> LinearOperatorMatrix {
    let weights = cell_permeabilities(mesh, z, law, None);
    assemble_weighted_stiffness_cells(mesh, dofs, &weights)
}

/// Weighted stiffness from one weight per cell.
pub fn assemble_weighted_stiffness_cells(
    mesh: &Mesh,
    dofs: &DofMap,
    weights: &[f64],
) -> LinearOperatorMatrix {
    assert_eq!(weights.len(), mesh.n_cells());
    let d = mesh.dim();
    assemble_square(mesh, Some(dofs), 1, |c, g| stiffness_local(d, g, weights[c]))
}

/// Per-cell `k(z_mid + shift)`.
pub fn cell_permeabilities(
    mesh: &Mesh,
    z: &ScalarField,
    law: &PermeabilityLaw,
    shift: Option<&[f64]>,
) -> Vec<f64> {
    let mids = z.cell_midpoint_values(mesh);
    mids.iter()
        .enumerate()
        .map(|(c, &m)| law.eval(m + shift.map_or(0.0, |s| s[c])))
        .collect()
}

/// Matrix of the form `e(u, w)` over the vector space.
pub fn assemble_elasticity(mesh: &Mesh, dofs: &DofMap) -> LinearOperatorMatrix {
    let d = mesh.dim();
    assemble_square(mesh, Some(dofs), d, |_, g| elasticity_local(d, g))
}

/// Rectangular coupling `G[q, (a,i)] = (∂_i ψ_a, ψ_q)`, shape
/// `n_scalar × n_vector`. Columns of constrained displacement dofs are zero;
/// every scalar row is kept so that `G u` tests the divergence against the
/// whole P1 space.
pub fn assemble_coupling(
    mesh: &Mesh,
    scalar: &DofMap,
    vector: &DofMap,
) -> LinearOperatorMatrix {
    let d = mesh.dim();
    let mut coo = CooMatrix::new(scalar.n_dofs(), vector.n_dofs());
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_geometry(c);
        let cell = mesh.cell(c);
        let w = g.measure / (d + 1) as f64;
        for &q in cell {
            for (a, &va) in cell.iter().enumerate() {
                for i in 0..d {
                    let col = vector.dof(va, i);
                    if vector.is_dirichlet(col) {
                        continue;
                    }
                    coo.push(q, col, w * g.grads[a][i]);
                }
            }
        }
    }
    LinearOperatorMatrix::from_csr(CsrMatrix::from(&coo), false)
}

/// Midpoint-rule load vector `(f, φ)` with Dirichlet entries zeroed. The
/// source returns one value per component of `dofs`.
pub fn assemble_load(mesh: &Mesh, dofs: &DofMap, f: impl Fn(Point) -> [f64; 2]) -> DVector<f64> {
    let comps = dofs.components();
    let mut out = DVector::zeros(dofs.n_dofs());
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_geometry(c);
        let fx = f(g.centroid);
        let w = g.measure / (mesh.dim() + 1) as f64;
        for &v in mesh.cell(c) {
            for (i, fi) in fx.iter().enumerate().take(comps) {
                out[v * comps + i] += w * fi;
            }
        }
    }
    for &d in dofs.dirichlet_dofs() {
        out[d] = 0.0;
    }
    out
}

/// Load of a nodal P1 source, sampled at cell midpoints.
pub fn assemble_nodal_load(mesh: &Mesh, dofs: &DofMap, values: &DVector<f64>) -> DVector<f64> {
    let comps = dofs.components();
    let k = mesh.dim() + 1;
    let mut out = DVector::zeros(dofs.n_dofs());
    for c in 0..mesh.n_cells() {
        let g = mesh.cell_geometry(c);
        let cell = mesh.cell(c);
        let w = g.measure / k as f64;
        for i in 0..comps {
            let mid = cell.iter().map(|&v| values[v * comps + i]).sum::<f64>() / k as f64;
            for &v in cell {
                out[v * comps + i] += w * mid;
            }
        }
    }
    for &d in dofs.dirichlet_dofs() {
        out[d] = 0.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_dofmap, build_unit_mesh, SpaceKind};
    use proptest::prelude::*;

    fn setup(dim: usize, n: usize) -> (Mesh, DofMap, DofMap) {
        let m = build_unit_mesh(dim, n).unwrap();
        let s = build_dofmap(&m, SpaceKind::Scalar);
        let v = build_dofmap(&m, SpaceKind::Vector);
        (m, s, v)
    }

    #[test]
    fn mass_of_constant_is_domain_measure() {
        for (dim, n) in [(1, 2), (2, 1), (2, 5)] {
            let m = build_unit_mesh(dim, n).unwrap();
            let mass = assemble_mass_full(&m);
            let one = DVector::from_element(m.n_vertices(), 1.0);
            assert!((mass.quadratic_form(&one) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn mass_entries_1d_n4() {
        // exact: ∫φ_i² = 2h/3, ∫φ_iφ_{i+1} = h/6
        let (m, s, _) = setup(1, 4);
        let mass = assemble_mass(&m, &s);
        let h = 0.25;
        assert!((mass.get(2, 2) - 2.0 * h / 3.0).abs() < 1e-15);
        assert!((mass.get(2, 1) - h / 6.0).abs() < 1e-15);
        assert_eq!(mass.get(2, 0), 0.0);
        assert_eq!(mass.get(0, 0), 1.0);
    }

    #[test]
    fn stiffness_1d_n2_center() {
        let (m, s, _) = setup(1, 2);
        let k = assemble_stiffness_v(&m, &s);
        assert!((k.get(1, 1) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn stiffness_annihilates_constants() {
        let m = build_unit_mesh(2, 4).unwrap();
        let k = assemble_stiffness_full(&m);
        let one = DVector::from_element(m.n_vertices(), 1.0);
        assert!(k.mul_vec(&one).amax() < 1e-13);
    }

    #[test]
    fn stiffness_2d_n1_is_identity() {
        // all four vertices constrained
        let (m, s, _) = setup(2, 1);
        let k = assemble_stiffness_v(&m, &s);
        assert_eq!(k.to_dense(), DMatrix::identity(4, 4));
    }

    #[test]
    fn stiffness_2d_center_is_five_point_stencil() {
        let (m, s, _) = setup(2, 2);
        let k = assemble_stiffness_v(&m, &s);
        assert!((k.get(4, 4) - 4.0).abs() < 1e-14);
    }

    #[test]
    fn elasticity_in_1d_is_three_times_stiffness() {
        let (m, s, v) = setup(1, 6);
        let k = assemble_stiffness_v(&m, &s).to_dense();
        let e = assemble_elasticity(&m, &v).to_dense();
        for &i in s.interior_dofs() {
            for &j in s.interior_dofs() {
                assert!((e[(i, j)] - 3.0 * k[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rigid_translation_has_zero_energy() {
        let m = build_unit_mesh(2, 3).unwrap();
        let e = assemble_square(&m, None, 2, |_, g| elasticity_local(2, g));
        let mut u = DVector::zeros(2 * m.n_vertices());
        for v in 0..m.n_vertices() {
            u[2 * v] = 0.7;
            u[2 * v + 1] = -1.3;
        }
        assert!(e.quadratic_form(&u).abs() < 1e-12);
    }

    #[test]
    fn constant_law_gives_scaled_stiffness() {
        let (m, s, _) = setup(2, 3);
        let law = PermeabilityLaw::constant(2.5).unwrap();
        let z = ScalarField::interpolate(&m, |x| x[0] + x[1]);
        let a = assemble_weighted_stiffness(&m, &s, &z, &law).to_dense();
        let k = assemble_stiffness_v(&m, &s).to_dense();
        for &i in s.interior_dofs() {
            for &j in s.interior_dofs() {
                assert_eq!(a[(i, j)], 2.5 * k[(i, j)]);
            }
        }
    }

    #[test]
    fn coupling_with_constant_pressure_vanishes() {
        let (m, s, v) = setup(2, 4);
        let g = assemble_coupling(&m, &s, &v);
        let one = DVector::from_element(s.n_dofs(), 1.0);
        assert!(g.transpose_mul_vec(&one).amax() < 1e-13);
    }

    #[test]
    fn load_examples() {
        let (m, s, _) = setup(1, 2);
        let l = assemble_load(&m, &s, |_| [1.0, 0.0]);
        assert_eq!(l.as_slice(), &[0.0, 0.5, 0.0]);
        assert_eq!(assemble_load(&m, &s, |_| [0.0, 0.0]).amax(), 0.0);
    }

    #[test]
    fn dump_is_sorted() {
        let (m, s, _) = setup(2, 2);
        let dump = assemble_mass(&m, &s).dump();
        let keys: Vec<(usize, usize)> = dump
            .lines()
            .map(|l| {
                let mut it = l.split_whitespace();
                (it.next().unwrap().parse().unwrap(), it.next().unwrap().parse().unwrap())
            })
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
    }

    proptest! {
        #[test]
        fn load_is_linear(a in -3f64..3.0, b in -3f64..3.0) {
            let (m, s, _) = setup(2, 3);
            let f = |x: Point| [x[0] * x[1], 0.0];
            let g = |x: Point| [(x[0] - x[1]).sin(), 0.0];
            let lhs = assemble_load(&m, &s, |x| [a * f(x)[0] + b * g(x)[0], 0.0]);
            let rhs = assemble_load(&m, &s, f) * a + assemble_load(&m, &s, g) * b;
            prop_assert!((lhs - rhs).amax() < 1e-14);
        }

        #[test]
        fn weighted_stiffness_sandwich(
            xs in proptest::collection::vec(-1f64..1.0, 25),
            zs in proptest::collection::vec(-5f64..5.0, 25),
        ) {
            let (m, s, _) = setup(2, 4);
            let law = PermeabilityLaw::clamped_exponential(1.0, 1.0, 0.3, 4.0).unwrap();
            let mut x = DVector::from_vec(xs);
            for &d in s.dirichlet_dofs() { x[d] = 0.0; }
            let z = ScalarField::new(DVector::from_vec(zs));
            let a = assemble_weighted_stiffness(&m, &s, &z, &law).quadratic_form(&x);
            let k = assemble_stiffness_v(&m, &s).quadratic_form(&x);
            prop_assert!(a >= law.k1() * k * (1.0 - 1e-12));
            prop_assert!(a <= law.k2() * k * (1.0 + 1e-12));
        }
    }
}
