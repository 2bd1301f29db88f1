//! Cellwise Darcy velocity and total stress.

use crate::evolution::TrajectoryRecord;
use crate::field::{ScalarField, VectorField};
use crate::mesh::Mesh;
use crate::permeability::PermeabilityLaw;

/// Per-step, per-cell derived quantities. In 1D only the first component
/// (and the `[0][0]` stress entry) is meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub darcy: Vec<Vec<[f64; 2]>>,
    pub stress: Vec<Vec<[[f64; 2]; 2]>>,
}

/// `v = −k(ζ)∇p` with `ζ` at the cell centroid.
pub fn darcy_velocity(mesh: &Mesh, p: &ScalarField, zeta: &ScalarField, law: &PermeabilityLaw) -> Vec<[f64; 2]> {
    let z = zeta.cell_midpoint_values(mesh);
    p.cell_gradients(mesh)
        .iter()
        .zip(&z)
        .map(|(g, &zc)| {
            let k = law.eval(zc);
            [-k * g[0], -k * g[1]]
        })
        .collect()
}

/// `T = 2ε(u) + (∇·u)I − pI` with `p` at the cell centroid.
pub fn total_stress(mesh: &Mesh, u: &VectorField, p: &ScalarField) -> Vec<[[f64; 2]; 2]> {
    let d = mesh.dim();
    let pc = p.cell_midpoint_values(mesh);
    u.cell_jacobians(mesh)
        .iter()
        .zip(&pc)
        .map(|(j, &pm)| {
            let div = j[0][0] + j[1][1];
            let mut t = [[0.0; 2]; 2];
            for a in 0..d {
                for b in 0..d {
                    t[a][b] = j[a][b] + j[b][a];
                }
                t[a][a] += div - pm;
            }
            t
        })
        .collect()
}

pub fn postprocess_fields(mesh: &Mesh, tr: &TrajectoryRecord, law: &PermeabilityLaw) -> DerivedFields {
    DerivedFields {
        darcy: tr
            .p
            .iter()
            .zip(&tr.zeta)
            .map(|(p, z)| darcy_velocity(mesh, p, z, law))
            .collect(),
        stress: tr
            .u
            .iter()
            .zip(&tr.p)
            .map(|(u, p)| total_stress(mesh, u, p))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_unit_mesh;
    use nalgebra::DVector;

    #[test]
    fn darcy_velocity_on_linear_pressure() {
        let mesh = build_unit_mesh(1, 4).unwrap();
        let p = ScalarField::interpolate(&mesh, |x| 3.0 * x[0]);
        let z = ScalarField::interpolate(&mesh, |_| 0.5);
        let law = PermeabilityLaw::clamped_exponential(1.0, 1.0, 0.1, 10.0).unwrap();
        let v = darcy_velocity(&mesh, &p, &z, &law);
        let want = -law.eval(0.5) * 3.0;
        for c in v {
            assert!((c[0] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_fields_give_zero_stress_and_velocity() {
        let mesh = build_unit_mesh(2, 3).unwrap();
        let p = ScalarField::zeros(mesh.n_vertices());
        let u = VectorField::zeros(2 * mesh.n_vertices());
        let law = PermeabilityLaw::constant(2.0).unwrap();
        assert!(darcy_velocity(&mesh, &p, &p, &law).iter().all(|v| *v == [0.0, 0.0]));
        assert!(total_stress(&mesh, &u, &p).iter().all(|t| *t == [[0.0; 2]; 2]));
    }

    #[test]
    fn stress_of_affine_displacement() {
        // u = (x, 2y) → ε = diag(1, 2), div = 3, p = 1 → T = diag(2+3-1, 4+3-1)
        let mesh = build_unit_mesh(2, 2).unwrap();
        let mut vals = DVector::zeros(2 * mesh.n_vertices());
        for (i, x) in mesh.vertices().iter().enumerate() {
            vals[2 * i] = x[0];
            vals[2 * i + 1] = 2.0 * x[1];
        }
        let u = VectorField::new(vals);
        let p = ScalarField::interpolate(&mesh, |_| 1.0);
        for t in total_stress(&mesh, &u, &p) {
            assert!((t[0][0] - 4.0).abs() < 1e-12);
            assert!((t[1][1] - 6.0).abs() < 1e-12);
            assert!(t[0][1].abs() < 1e-12);
        }
    }
}
