//! Dense brute-force element loop used as an independent reference for the
//! sparse assemblers. Basis functions come from inverting the local
//! Vandermonde matrix and every integral uses the degree-5 quadrature rule.

use nalgebra::{DMatrix, Matrix3};

use crate::mesh::{DofMap, Mesh, Point};
use crate::quadrature;

/// Affine basis `φ_a(x) = c[a][0] + c[a][1] x + c[a][2] y` on one cell.
struct LocalBasis {
    coeffs: Vec<[f64; 3]>,
    points: Vec<Point>,
    measure: f64,
}

impl LocalBasis {
    fn new(mesh: &Mesh, cell: usize) -> Self {
        let d = mesh.dim();
        let verts: Vec<Point> = mesh.cell(cell).iter().map(|&v| mesh.vertex(v)).collect();
        let coeffs = if d == 1 {
            let (x0, x1) = (verts[0][0], verts[1][0]);
            let h = x1 - x0;
            vec![[x1 / h, -1.0 / h, 0.0], [-x0 / h, 1.0 / h, 0.0]]
        } else {
            let v = Matrix3::from_fn(|r, c| match c {
                0 => 1.0,
                _ => verts[r][c - 1],
            });
            let inv = v.try_inverse().expect("degenerate cell");
            (0..3).map(|a| [inv[(0, a)], inv[(1, a)], inv[(2, a)]]).collect()
        };
        let measure = if d == 1 {
            (verts[1][0] - verts[0][0]).abs()
        } else {
            let (a, b, c) = (verts[0], verts[1], verts[2]);
            0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
        };
        Self { coeffs, points: verts, measure }
    }

    fn value(&self, a: usize, x: Point) -> f64 {
        let c = self.coeffs[a];
        c[0] + c[1] * x[0] + c[2] * x[1]
    }

    fn grad(&self, a: usize) -> [f64; 2] {
        [self.coeffs[a][1], self.coeffs[a][2]]
    }

    /// Physical quadrature points and weights.
    fn quadrature(&self) -> Vec<(Point, f64)> {
        quadrature::rule(self.points.len() - 1)
            .into_iter()
            .map(|(bary, w)| {
                let mut x = [0.0; 2];
                for (k, p) in self.points.iter().enumerate() {
                    x[0] += bary[k] * p[0];
                    x[1] += bary[k] * p[1];
                }
                (x, w * self.measure)
            })
            .collect()
    }
}

fn constrain(mut m: DMatrix<f64>, dofs: Option<&DofMap>) -> DMatrix<f64> {
    if let Some(d) = dofs {
        for &i in d.dirichlet_dofs() {
            m.row_mut(i).fill(0.0);
            m.column_mut(i).fill(0.0);
            m[(i, i)] = 1.0;
        }
    }
    m
}

pub fn mass(mesh: &Mesh, dofs: Option<&DofMap>) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(mesh.n_vertices(), mesh.n_vertices());
    for c in 0..mesh.n_cells() {
        let lb = LocalBasis::new(mesh, c);
        let cell = mesh.cell(c);
        for (x, w) in lb.quadrature() {
            for (a, &i) in cell.iter().enumerate() {
                for (b, &j) in cell.iter().enumerate() {
                    m[(i, j)] += w * lb.value(a, x) * lb.value(b, x);
                }
            }
        }
    }
    constrain(m, dofs)
}

/// `(w_c ∇φ, ∇ψ)` with one weight per cell.
pub fn weighted_stiffness(mesh: &Mesh, dofs: Option<&DofMap>, weights: &[f64]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(mesh.n_vertices(), mesh.n_vertices());
    for c in 0..mesh.n_cells() {
        let lb = LocalBasis::new(mesh, c);
        let cell = mesh.cell(c);
        for (a, &i) in cell.iter().enumerate() {
            for (b, &j) in cell.iter().enumerate() {
                let (ga, gb) = (lb.grad(a), lb.grad(b));
                m[(i, j)] += weights[c] * lb.measure * (ga[0] * gb[0] + ga[1] * gb[1]);
            }
        }
    }
    constrain(m, dofs)
}

/// `2(ε(u), ε(w)) + (∇·u, ∇·w)` from the full displacement gradients.
pub fn elasticity(mesh: &Mesh, dofs: &DofMap) -> DMatrix<f64> {
    let d = mesh.dim();
    let n = mesh.n_vertices() * d;
    let mut m = DMatrix::zeros(n, n);
    let strain = |g: [f64; 2], comp: usize| -> [[f64; 2]; 2] {
        let mut grad_u = [[0.0; 2]; 2];
        grad_u[comp] = g;
        let mut e = [[0.0; 2]; 2];
        for r in 0..2 {
            for s in 0..2 {
                e[r][s] = 0.5 * (grad_u[r][s] + grad_u[s][r]);
            }
        }
        e
    };
    for c in 0..mesh.n_cells() {
        let lb = LocalBasis::new(mesh, c);
        let cell = mesh.cell(c);
        for (a, &va) in cell.iter().enumerate() {
            for i in 0..d {
                for (b, &vb) in cell.iter().enumerate() {
                    for j in 0..d {
                        let ea = strain(lb.grad(a), i);
                        let eb = strain(lb.grad(b), j);
                        let mut contraction = 0.0;
                        for r in 0..2 {
                            for s in 0..2 {
                                contraction += ea[r][s] * eb[r][s];
                            }
                        }
                        let div = lb.grad(a)[i] * lb.grad(b)[j];
                        m[(va * d + i, vb * d + j)] += lb.measure * (2.0 * contraction + div);
                    }
                }
            }
        }
    }
    constrain(m, Some(dofs))
}

/// `(∇·ψ_(a,i), φ_q)` with zero columns on constrained displacement dofs.
pub fn coupling(mesh: &Mesh, vector: &DofMap) -> DMatrix<f64> {
    let d = mesh.dim();
    let mut m = DMatrix::zeros(mesh.n_vertices(), mesh.n_vertices() * d);
    for c in 0..mesh.n_cells() {
        let lb = LocalBasis::new(mesh, c);
        let cell = mesh.cell(c);
        for (x, w) in lb.quadrature() {
            for (qi, &q) in cell.iter().enumerate() {
                for (a, &va) in cell.iter().enumerate() {
                    for i in 0..d {
                        m[(q, va * d + i)] += w * lb.value(qi, x) * lb.grad(a)[i];
                    }
                }
            }
        }
    }
    for &j in vector.dirichlet_dofs() {
        m.column_mut(j).fill(0.0);
    }
    m
}

/// `M_full⁻¹ G K⁻¹ Ĝᵀ` with `Ĝ` the interior scalar rows, by dense LU.
pub fn b_matrix(mesh: &Mesh, scalar: &DofMap, vector: &DofMap) -> DMatrix<f64> {
    let g = coupling(mesh, vector);
    let k = elasticity(mesh, vector);
    let ids = scalar.interior_dofs();
    let gt = DMatrix::from_fn(g.ncols(), ids.len(), |r, c| g[(ids[c], r)]);
    let x = k.lu().solve(&gt).expect("singular elasticity oracle");
    mass(mesh, None).lu().solve(&(g * x)).expect("singular mass oracle")
}
