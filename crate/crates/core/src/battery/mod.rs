//! Randomized property battery over the assembled operators.

pub mod oracle;

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assembly::{
    assemble_coupling, assemble_elasticity, assemble_mass, assemble_mass_full, assemble_stiffness_full,
    assemble_stiffness_v, assemble_weighted_stiffness_cells, cell_permeabilities, LinearOperatorMatrix,
};
use crate::error::Result;
use crate::field::ScalarField;
use crate::operators::Discretization;
use crate::permeability::PermeabilityLaw;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.3e} (tol {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

/// Random trials per randomized check.
pub const TRIALS: usize = 100;

pub const ORACLE_TOL: f64 = 1e-12;
pub const SYMMETRY_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const MEAN_ZERO_TOL: f64 = 1e-10;
pub const SANDWICH_TOL: f64 = 1e-12;

fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    (a - b).amax()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// Assembled matrices against the dense oracle, and the structural
/// properties of `B`: M-symmetry, semi-definiteness, mean-zero range and
/// coercivity of `c₀M + MB`.
pub fn operator_battery(dim: usize, n: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = Discretization::new(dim, n)?;
    let mesh = &disc.mesh;
    let tag = |s: &str| format!("{dim}D n={n} {s}");
    let mut out = Vec::new();

    let pairs: Vec<(&str, LinearOperatorMatrix, DMatrix<f64>)> = vec![
        ("mass", assemble_mass(mesh, &disc.scalar), oracle::mass(mesh, Some(&disc.scalar))),
        ("mass_full", assemble_mass_full(mesh), oracle::mass(mesh, None)),
        (
            "stiffness",
            assemble_stiffness_v(mesh, &disc.scalar),
            oracle::weighted_stiffness(mesh, Some(&disc.scalar), &vec![1.0; mesh.n_cells()]),
        ),
        (
            "stiffness_full",
            assemble_stiffness_full(mesh),
            oracle::weighted_stiffness(mesh, None, &vec![1.0; mesh.n_cells()]),
        ),
        ("elasticity", assemble_elasticity(mesh, &disc.vector), oracle::elasticity(mesh, &disc.vector)),
        ("coupling", assemble_coupling(mesh, &disc.scalar, &disc.vector), oracle::coupling(mesh, &disc.vector)),
    ];
    for (name, sparse, dense) in pairs {
        out.push(CheckResult::at_most(tag(&format!("oracle {name}")), max_diff(&sparse.to_dense(), &dense), ORACLE_TOL));
    }

    let law = PermeabilityLaw::clamped_exponential(1.0, 1.0, 0.2, 5.0)?;
    let z = ScalarField::new(random_vec(&mut rng, mesh.n_vertices(), -2.0, 2.0));
    let weights = cell_permeabilities(mesh, &z, &law, None);
    let a = assemble_weighted_stiffness_cells(mesh, &disc.scalar, &weights);
    let a_oracle = oracle::weighted_stiffness(mesh, Some(&disc.scalar), &weights);
    out.push(CheckResult::at_most(tag("oracle weighted_stiffness"), max_diff(&a.to_dense(), &a_oracle), ORACLE_TOL));

    let b_oracle = oracle::b_matrix(mesh, &disc.scalar, &disc.vector);
    let scale = b_oracle.amax().max(1.0);
    out.push(CheckResult::at_most(tag("oracle B"), max_diff(&disc.b.matrix(), &b_oracle) / scale, ORACLE_TOL));

    let p = disc.b.pairing();
    let p_scale = p.amax().max(f64::MIN_POSITIVE);
    out.push(CheckResult::at_most(tag("B M-symmetric"), (p - p.transpose()).amax() / p_scale, SYMMETRY_TOL));

    let min_ev = disc.b.pencil_spectrum()?.first().copied().unwrap_or(0.0);
    out.push(CheckResult::at_most(tag("B positive semi-definite"), (-min_ev).max(0.0), PSD_TOL));

    let coupled = disc.b.coupled();
    let mut mean = 0.0f64;
    for _ in 0..TRIALS {
        let x = random_vec(&mut rng, disc.n_interior(), -1.0, 1.0);
        let v = coupled * &x;
        mean = mean.max(v.sum().abs() / v.amax().max(1.0));
    }
    out.push(CheckResult::at_most(tag("B mean-zero range"), mean, MEAN_ZERO_TOL));

    let m = disc.b.mass_interior();
    let mut worst = 0.0f64;
    for c0 in [0.0, 1e-3, 1.0] {
        let q = disc.b.regularized(c0);
        for _ in 0..TRIALS {
            let x = random_vec(&mut rng, disc.n_interior(), -1.0, 1.0);
            let lhs = x.dot(&(&q * &x));
            let rhs = c0 * x.dot(&(m * &x));
            worst = worst.max((rhs - lhs) / lhs.abs().max(1e-300));
        }
    }
    out.push(CheckResult::at_most(tag("c0 M + M B coercive"), worst.max(0.0), PSD_TOL));
    Ok(out)
}

/// `k₁ xᵀKx ≤ xᵀA(z)x ≤ k₂ xᵀKx` for random `(x, z)` and every law.
pub fn sandwich_battery(dim: usize, n: usize, seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let disc = Discretization::new(dim, n)?;
    let mut out = Vec::new();
    for (name, law) in PermeabilityLaw::library() {
        let mut worst = 0.0f64;
        for _ in 0..TRIALS {
            let x = ScalarField::from_interior(&disc.scalar, &random_vec(&mut rng, disc.n_interior(), -1.0, 1.0));
            let z = ScalarField::new(random_vec(&mut rng, disc.mesh.n_vertices(), -10.0, 10.0));
            let w = cell_permeabilities(&disc.mesh, &z, &law, None);
            let a = assemble_weighted_stiffness_cells(&disc.mesh, &disc.scalar, &w);
            let xi = x.interior(&disc.scalar);
            let base = xi.dot(&(disc.riesz.stiffness_interior() * &xi));
            let ax = a.quadratic_form(&x.values);
            let lo = (law.k1() * base - ax) / base;
            let hi = (ax - law.k2() * base) / base;
            worst = worst.max(lo).max(hi);
        }
        out.push(CheckResult::at_most(format!("{dim}D n={n} sandwich {name}"), worst.max(0.0), SANDWICH_TOL));
    }
    Ok(out)
}

/// Both batteries on the given meshes.
pub fn check_ops(meshes: &[(usize, usize)], seed: u64) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for (i, &(dim, n)) in meshes.iter().enumerate() {
        let s = seed.wrapping_add(i as u64);
        out.extend(operator_battery(dim, n, s)?);
        out.extend(sandwich_battery(dim, n, s)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_on_small_meshes() {
        let results = check_ops(&[(1, 4), (2, 2)], 42).unwrap();
        for r in &results {
            assert!(r.passed, "{}", r.line());
        }
        assert!(results.len() > 10);
    }

    #[test]
    fn battery_is_deterministic() {
        assert_eq!(check_ops(&[(1, 5)], 7).unwrap(), check_ops(&[(1, 5)], 7).unwrap());
    }
}
