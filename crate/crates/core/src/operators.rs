//! Operator calculus on the discrete spaces: the elasticity solve, the
//! pressure-to-dilation operator `B`, the regularized inverse of `c₀I + B`
//! and discrete dual norms through the Riesz map of the V inner product.
//!
//! Pressure-side algebra is dense in interior coordinates. The pairing
//! matrix `P = Ĝ K_e⁻¹ Ĝᵀ` (restricted to interior pressure dofs) equals
//! `M B` in the notation `B = M⁻¹ G K_e⁻¹ Gᵀ`, so `(Bp, q)_{L²} = qᵀ P p`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use nalgebra_sparse::factorization::CscCholesky;

use crate::assembly::{
    assemble_coupling, assemble_elasticity, assemble_mass, assemble_mass_full,
    assemble_stiffness_full, assemble_stiffness_v, LinearOperatorMatrix,
};
use crate::error::{BiotError, Result};
use crate::field::{restrict, ScalarField, VectorField};
use crate::mesh::{build_dofmap, build_unit_mesh, DofMap, Mesh, SpaceKind};

/// Smallest storage coefficient accepted by the direct `(c₀I + B)` inverse.
pub const C0_MIN: f64 = 1e-12;

pub type DenseCholesky = Cholesky<f64, Dyn>;

pub fn dense_cholesky(m: DMatrix<f64>, what: &str) -> Result<DenseCholesky> {
    Cholesky::new(m).ok_or_else(|| BiotError::Solver(format!("{what} is not positive definite")))
}

fn solve_sparse(chol: &CscCholesky<f64>, b: &DVector<f64>) -> DVector<f64> {
    let x = chol.solve(&DMatrix::from_column_slice(b.len(), 1, b.as_slice()));
    DVector::from_column_slice(x.as_slice())
}

/// Factorized elasticity operator `ℰ` with the coupling `G`.
pub struct ElasticitySolver {
    factor: CscCholesky<f64>,
    matrix: LinearOperatorMatrix,
    coupling: LinearOperatorMatrix,
    vector: DofMap,
    /// Scalar stiffness (unconstrained), used for vector V-norms.
    stiffness_full: LinearOperatorMatrix,
    components: usize,
}

impl ElasticitySolver {
    pub fn new(
        matrix: LinearOperatorMatrix,
        coupling: LinearOperatorMatrix,
        vector: DofMap,
        stiffness_full: LinearOperatorMatrix,
    ) -> Result<Self> {
        let factor = CscCholesky::factor(&matrix.to_csc())
            .map_err(|e| BiotError::Solver(format!("elasticity factorization failed: {e:?}")))?;
        let components = vector.components();
        Ok(Self {
            factor,
            matrix,
            coupling,
            vector,
            stiffness_full,
            components,
        })
    }

    pub fn matrix(&self) -> &LinearOperatorMatrix {
        &self.matrix
    }

    pub fn coupling(&self) -> &LinearOperatorMatrix {
        &self.coupling
    }

    /// Solve `K_e u = rhs` with Dirichlet entries of `rhs` ignored.
    pub fn solve_rhs(&self, rhs: &DVector<f64>) -> VectorField {
        let mut b = rhs.clone();
        for &d in self.vector.dirichlet_dofs() {
            b[d] = 0.0;
        }
        VectorField::new(solve_sparse(&self.factor, &b))
    }

    pub fn solve_many(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.factor.solve(rhs)
    }

    /// Elasticity right-hand side `Gᵀp + f`.
    pub fn rhs(&self, p: &ScalarField, load: &DVector<f64>) -> DVector<f64> {
        let mut b = self.coupling.transpose_mul_vec(&p.values) + load;
        for &d in self.vector.dirichlet_dofs() {
            b[d] = 0.0;
        }
        b
    }

    /// `u` with `e(u, w) = (p, ∇·w) + (F, w)` for all discrete `w`.
    pub fn solve_elasticity(&self, p: &ScalarField, load: &DVector<f64>) -> VectorField {
        let mut u = self.solve_rhs(&self.rhs(p, load));
        u.time = p.time;
        u
    }

    /// `√(bᵀ K_e⁻¹ b)`, the dual norm induced by the elastic energy.
    pub fn energy_dual_norm(&self, b: &DVector<f64>) -> f64 {
        let x = self.solve_rhs(b);
        let mut bi = b.clone();
        for &d in self.vector.dirichlet_dofs() {
            bi[d] = 0.0;
        }
        bi.dot(&x.values).max(0.0).sqrt()
    }

    /// Residual `K_e u − Gᵀp − f` measured in the energy dual norm.
    pub fn residual_norm(&self, u: &VectorField, p: &ScalarField, load: &DVector<f64>) -> f64 {
        let mut r = self.matrix.mul_vec(&u.values) - self.rhs(p, load);
        for &d in self.vector.dirichlet_dofs() {
            r[d] = 0.0;
        }
        self.energy_dual_norm(&r)
    }

    /// `‖∇u‖_{L²}` summed over components.
    pub fn v_norm(&self, u: &VectorField) -> f64 {
        let d = self.components;
        (0..d)
            .map(|c| {
                let comp = DVector::from_iterator(
                    u.values.len() / d,
                    u.values.iter().skip(c).step_by(d).copied(),
                );
                self.stiffness_full.quadratic_form(&comp)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Discrete Riesz map of the V inner product on interior scalar dofs.
pub struct RieszNormer {
    stiffness_ii: DMatrix<f64>,
    factor: DenseCholesky,
    scalar: DofMap,
}

impl RieszNormer {
    pub fn new(stiffness: &LinearOperatorMatrix, scalar: &DofMap) -> Result<Self> {
        let ids = scalar.interior_dofs();
        let stiffness_ii = stiffness.submatrix(ids, ids);
        let factor = dense_cholesky(stiffness_ii.clone(), "stiffness matrix")?;
        Ok(Self {
            stiffness_ii,
            factor,
            scalar: scalar.clone(),
        })
    }

    /// `√(fᵀK⁻¹f)` of a load vector over all scalar dofs.
    pub fn dual_norm(&self, f: &DVector<f64>) -> f64 {
        self.dual_norm_interior(&restrict(f, &self.scalar))
    }

    pub fn dual_norm_interior(&self, fi: &DVector<f64>) -> f64 {
        if fi.is_empty() {
            return 0.0;
        }
        fi.dot(&self.factor.solve(fi)).max(0.0).sqrt()
    }

    /// `‖∇x‖_{L²}` of a constrained scalar field.
    pub fn v_norm(&self, x: &DVector<f64>) -> f64 {
        self.v_norm_interior(&restrict(x, &self.scalar))
    }

    pub fn v_norm_interior(&self, xi: &DVector<f64>) -> f64 {
        xi.dot(&(&self.stiffness_ii * xi)).max(0.0).sqrt()
    }

    pub fn stiffness_interior(&self) -> &DMatrix<f64> {
        &self.stiffness_ii
    }
}

/// Pressure-to-dilation operator `B`, materialized densely.
pub struct BOperator {
    /// `G K_e⁻¹ Ĝᵀ`: all scalar rows, interior pressure columns.
    coupled: DMatrix<f64>,
    /// Interior rows of `coupled`, i.e. the pairing matrix `M B`.
    pairing: DMatrix<f64>,
    mass_ii: DMatrix<f64>,
    mass_full_factor: CscCholesky<f64>,
    scalar: DofMap,
}

impl BOperator {
    pub fn new(
        elasticity: &ElasticitySolver,
        mass: &LinearOperatorMatrix,
        mass_full: &LinearOperatorMatrix,
        scalar: &DofMap,
    ) -> Result<Self> {
        let ids = scalar.interior_dofs();
        let g = elasticity.coupling();
        let gt = g.to_dense().transpose();
        let mut rhs = DMatrix::zeros(gt.nrows(), ids.len());
        for (k, &q) in ids.iter().enumerate() {
            rhs.set_column(k, &gt.column(q));
        }
        let x = elasticity.solve_many(&rhs);
        let coupled = g.to_dense() * x;
        let pairing = DMatrix::from_fn(ids.len(), ids.len(), |i, j| coupled[(ids[i], j)]);
        let mass_full_factor = CscCholesky::factor(&mass_full.to_csc())
            .map_err(|e| BiotError::Solver(format!("mass factorization failed: {e:?}")))?;
        Ok(Self {
            coupled,
            pairing,
            mass_ii: mass.submatrix(ids, ids),
            mass_full_factor,
            scalar: scalar.clone(),
        })
    }

    /// `M B` restricted to interior pressure dofs.
    pub fn pairing(&self) -> &DMatrix<f64> {
        &self.pairing
    }

    /// `G K_e⁻¹ Ĝᵀ` with all scalar rows.
    pub fn coupled(&self) -> &DMatrix<f64> {
        &self.coupled
    }

    pub fn mass_interior(&self) -> &DMatrix<f64> {
        &self.mass_ii
    }

    /// `B_mat = M⁻¹ G K_e⁻¹ Gᵀ` as a full-P1 by interior-pressure matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.mass_full_factor.solve(&self.coupled)
    }

    /// Full-P1 field of `Bp`, the L² projection of `∇·u_p`.
    pub fn apply(&self, p: &ScalarField) -> ScalarField {
        let pi = p.interior(&self.scalar);
        let mut out = ScalarField::new(self.project(&(&self.coupled * pi)));
        out.time = p.time;
        out
    }

    /// Solve `M_full x = b` over the unconstrained P1 space.
    pub fn project(&self, b: &DVector<f64>) -> DVector<f64> {
        solve_sparse(&self.mass_full_factor, b)
    }

    /// `(Bp, p)_{L²}`; fails if the form is negative beyond roundoff.
    pub fn sqrt_b_diag(&self, p: &ScalarField) -> Result<f64> {
        let pi = p.interior(&self.scalar);
        let v = pi.dot(&(&self.pairing * &pi));
        if v < -1e-10 {
            return Err(BiotError::Invariant(format!(
                "negative B quadratic form {v:.3e}"
            )));
        }
        Ok(v.max(0.0))
    }

    /// `(c₀M + P)` over interior dofs.
    pub fn regularized(&self, c0: f64) -> DMatrix<f64> {
        &self.mass_ii * c0 + &self.pairing
    }

    /// `p` with `(c₀M + MB) p = M rhs`, tested against interior dofs.
    pub fn solve_c0_plus_b(&self, rhs: &ScalarField, mass_full: &LinearOperatorMatrix, c0: f64) -> Result<ScalarField> {
        let b = restrict(&mass_full.mul_vec(&rhs.values), &self.scalar);
        let p = self.solve_c0_plus_b_pairing(&b, c0)?;
        let mut out = ScalarField::from_interior(&self.scalar, &p);
        out.time = rhs.time;
        Ok(out)
    }

    /// Same as [`Self::solve_c0_plus_b`] with the pairing vector given directly.
    pub fn solve_c0_plus_b_pairing(&self, b: &DVector<f64>, c0: f64) -> Result<DVector<f64>> {
        if !(c0 >= C0_MIN) {
            return Err(BiotError::Precondition(format!(
                "c0 = {c0:e} below the direct-inversion guard {C0_MIN:e}"
            )));
        }
        Ok(dense_cholesky(self.regularized(c0), "c0 M + M B")?.solve(b))
    }

    /// Eigenvalues of the pencil `(P, M)`, ascending.
    pub fn pencil_spectrum(&self) -> Result<Vec<f64>> {
        let l = dense_cholesky(self.mass_ii.clone(), "mass matrix")?.l();
        let linv = l
            .clone()
            .try_inverse()
            .ok_or_else(|| BiotError::Solver("singular mass factor".into()))?;
        let s = &linv * &self.pairing * linv.transpose();
        let s = (&s + s.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        Ok(ev)
    }
}

/// Meshes, dof maps, assembled matrices and factorized operators for one
/// resolution.
pub struct Discretization {
    pub mesh: Mesh,
    pub scalar: DofMap,
    pub vector: DofMap,
    pub mass: LinearOperatorMatrix,
    pub mass_full: LinearOperatorMatrix,
    pub stiffness: LinearOperatorMatrix,
    pub stiffness_full: LinearOperatorMatrix,
    pub elasticity: ElasticitySolver,
    pub b: BOperator,
    pub riesz: RieszNormer,
}

impl Discretization {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        let mesh = build_unit_mesh(dim, n)?;
        Self::from_mesh(mesh)
    }

    pub fn from_mesh(mesh: Mesh) -> Result<Self> {
        let scalar = build_dofmap(&mesh, SpaceKind::Scalar);
        let vector = build_dofmap(&mesh, SpaceKind::Vector);
        let mass = assemble_mass(&mesh, &scalar);
        let mass_full = assemble_mass_full(&mesh);
        let stiffness = assemble_stiffness_v(&mesh, &scalar);
        let stiffness_full = assemble_stiffness_full(&mesh);
        let elasticity = ElasticitySolver::new(
            assemble_elasticity(&mesh, &vector),
            assemble_coupling(&mesh, &scalar, &vector),
            vector.clone(),
            stiffness_full.clone(),
        )?;
        let b = BOperator::new(&elasticity, &mass, &mass_full, &scalar)?;
        let riesz = RieszNormer::new(&stiffness, &scalar)?;
        Ok(Self {
            mesh,
            scalar,
            vector,
            mass,
            mass_full,
            stiffness,
            stiffness_full,
            elasticity,
            b,
            riesz,
        })
    }

    pub fn n_interior(&self) -> usize {
        self.scalar.n_interior()
    }

    /// Full-P1 L² projection of `∇·u`.
    pub fn project_divergence(&self, u: &VectorField) -> ScalarField {
        let g = self.elasticity.coupling().mul_vec(&u.values);
        let mut out = ScalarField::new(self.b.project(&g));
        out.time = u.time;
        out
    }

    /// Fluid content `ζ = c₀p + Π ∇·u`.
    pub fn fluid_content(&self, p: &ScalarField, u: &VectorField, c0: f64) -> ScalarField {
        let mut z = self.project_divergence(u);
        z.values += &p.values * c0;
        z.time = p.time;
        z
    }

    pub fn l2_norm(&self, f: &ScalarField) -> f64 {
        self.mass_full.quadratic_form(&f.values).max(0.0).sqrt()
    }

    /// `‖u‖_{L²}` summed over components.
    pub fn vector_l2_norm(&self, u: &VectorField) -> f64 {
        let d = self.mesh.dim();
        (0..d)
            .map(|i| {
                let comp = DVector::from_fn(self.mesh.n_vertices(), |v, _| u.values[v * d + i]);
                self.mass_full.quadratic_form(&comp)
            })
            .sum::<f64>()
            .max(0.0)
            .sqrt()
    }

    /// `√(ζᵀ(M + K)ζ)` over the unconstrained space.
    pub fn h1_norm(&self, f: &ScalarField) -> f64 {
        (self.mass_full.quadratic_form(&f.values) + self.stiffness_full.quadratic_form(&f.values))
            .max(0.0)
            .sqrt()
    }

    pub fn v_norm(&self, p: &ScalarField) -> f64 {
        self.riesz.v_norm(&p.values)
    }

    /// Pairing vector `(f, φ_q)` over interior dofs.
    pub fn pairing_vector(&self, f: &ScalarField) -> DVector<f64> {
        restrict(&self.mass_full.mul_vec(&f.values), &self.scalar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_load;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pressure(d: &Discretization, rng: &mut ChaCha8Rng) -> ScalarField {
        let vals = DVector::from_fn(d.n_interior(), |_, _| rng.random_range(-1.0..1.0));
        ScalarField::from_interior(&d.scalar, &vals)
    }

    #[test]
    fn zero_pressure_gives_zero_displacement() {
        let d = Discretization::new(2, 3).unwrap();
        let u = d.elasticity.solve_elasticity(
            &ScalarField::zeros(d.mesh.n_vertices()),
            &DVector::zeros(d.vector.n_dofs()),
        );
        assert_eq!(u.values.amax(), 0.0);
    }

    #[test]
    fn elasticity_solve_reproduces_rhs() {
        let d = Discretization::new(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = random_pressure(&d, &mut rng);
        let f = assemble_load(&d.mesh, &d.vector, |x| [x[0].sin(), x[1]]);
        let u = d.elasticity.solve_elasticity(&p, &f);
        let b = d.elasticity.rhs(&p, &f);
        let r = d.elasticity.matrix().mul_vec(&u.values) - &b;
        assert!(r.norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn b_invariants() {
        for (dim, n) in [(1, 8), (2, 4)] {
            let d = Discretization::new(dim, n).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let p = random_pressure(&d, &mut rng);
            let q = random_pressure(&d, &mut rng);
            let bp = d.b.apply(&p);
            let bq = d.b.apply(&q);
            let lhs = d.mass_full.mul_vec(&bp.values).dot(&q.values);
            let rhs = d.mass_full.mul_vec(&bq.values).dot(&p.values);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-300));
            let one = DVector::from_element(d.mesh.n_vertices(), 1.0);
            assert!(d.mass_full.mul_vec(&bp.values).dot(&one).abs() < 1e-10);
            assert!(d.b.sqrt_b_diag(&p).unwrap() >= 0.0);
        }
    }

    #[test]
    fn sqrt_b_matches_two_solve_path() {
        let d = Discretization::new(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_pressure(&d, &mut rng);
        let u = d.elasticity.solve_elasticity(&p, &DVector::zeros(d.vector.n_dofs()));
        let gtp = d.elasticity.coupling().transpose_mul_vec(&p.values);
        let direct = gtp.dot(&u.values);
        assert!((d.b.sqrt_b_diag(&p).unwrap() - direct).abs() < 1e-12 * direct.abs().max(1.0));
        let scaled = ScalarField::new(&p.values * 3.0);
        assert!((d.b.sqrt_b_diag(&scaled).unwrap() - 9.0 * direct).abs() < 1e-11);
    }

    #[test]
    fn c0_plus_b_round_trip_and_guard() {
        let d = Discretization::new(1, 8).unwrap();
        let rhs = ScalarField::interpolate(&d.mesh, |x| (3.0 * x[0]).cos());
        assert!(matches!(
            d.b.solve_c0_plus_b(&rhs, &d.mass_full, 0.0),
            Err(BiotError::Precondition(_))
        ));
        let p = d.b.solve_c0_plus_b(&rhs, &d.mass_full, 0.5).unwrap();
        let back = d.b.regularized(0.5) * p.interior(&d.scalar);
        let want = d.pairing_vector(&rhs);
        assert!((back - &want).norm() <= 1e-10 * want.norm());
    }

    #[test]
    fn large_c0_tends_to_scaled_rhs() {
        let d = Discretization::new(1, 8).unwrap();
        let rhs = ScalarField::interpolate_constrained(&d.mesh, &d.scalar, |x| x[0] * (1.0 - x[0]));
        let mut prev = f64::INFINITY;
        for c0 in [1e1, 1e2, 1e3] {
            let p = d.b.solve_c0_plus_b(&rhs, &d.mass_full, c0).unwrap();
            let gap = (&p.values - &rhs.values / c0).norm() * c0;
            assert!(gap < prev);
            prev = gap;
        }
    }

    #[test]
    fn riesz_isometry() {
        let d = Discretization::new(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_pressure(&d, &mut rng);
        let kx = d.stiffness.mul_vec(&x.values);
        assert!((d.riesz.dual_norm(&kx) - d.v_norm(&x)).abs() < 1e-10 * d.v_norm(&x));
        assert_eq!(d.riesz.dual_norm(&DVector::zeros(d.mesh.n_vertices())), 0.0);
    }

    #[test]
    fn dual_norm_of_unit_source_1d_n2() {
        // single interior dof: f = 1/2, K = 4, so ‖f‖² = 1/16
        let d = Discretization::new(1, 2).unwrap();
        let f = assemble_load(&d.mesh, &d.scalar, |_| [1.0, 0.0]);
        assert!((d.riesz.dual_norm(&f) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn pencil_spectrum_is_nonnegative() {
        let d = Discretization::new(2, 4).unwrap();
        let ev = d.b.pencil_spectrum().unwrap();
        assert!(ev[0] >= -1e-10);
        assert!(ev.last().unwrap().is_finite());
    }
}
