//! Implicit Euler integration of the frozen-permeability linear problem
//! `[(c₀I + B)p]_t − ∇·(k(z)∇p) = S` and its elastic reconstruction.
//!
//! The stepper carries the pairing vector `bⁿ = ((c₀p + ∇·u)ⁿ, φ_q)` of the
//! fluid content rather than the pressure, so `c₀ = 0` needs no special
//! treatment: each step solves
//!
//! ```text
//! [(c₀M + P)/dt + A(zⁿ)] pⁿ = b̃ⁿ⁻¹/dt + S̃ⁿ,    b̃ⁿ = (c₀M + P) pⁿ.
//! ```

use nalgebra::{DMatrix, DVector};

use crate::assembly::{
    assemble_load, assemble_weighted_stiffness_cells, cell_permeabilities,
};
use crate::error::{BiotError, Result};
use crate::field::{restrict, ScalarField, VectorField};
use crate::operators::{dense_cholesky, DenseCholesky, Discretization};
use crate::permeability::PermeabilityLaw;
use crate::scenario::{Formulation, InitialContent, InitialGuess, Scenario, TranslationMode};

/// Problem with the body force eliminated by the elastic lift `u_F = ℰ⁻¹F`.
#[derive(Debug, Clone)]
pub struct TranslatedProblem {
    /// Elastic lift at every time node.
    pub u_f: Vec<VectorField>,
    /// Full-P1 projection of `∇·u_F` at every time node.
    pub div_u_f: Vec<ScalarField>,
    /// Per-cell midpoint values of `∇·u_F`, the argument shift of `k_F`.
    pub shift: Vec<Vec<f64>>,
    /// Interior pairing vectors of `S̃ = S − ∂_t ∇·u_F`; entry 0 holds `S(0)`.
    pub s_tilde: Vec<DVector<f64>>,
    /// `d̃₀ = d₀ − ∇·u_F(0)` as a full-P1 field.
    pub d0_tilde: ScalarField,
    /// Interior pairing vector of `d̃₀`.
    pub b0_tilde: DVector<f64>,
}

impl TranslatedProblem {
    /// `k_F(x) = k(x + ∇·u_F)` evaluated per cell at time node `n`.
    pub fn shifted_permeabilities(
        &self,
        disc: &Discretization,
        n: usize,
        z: &ScalarField,
        law: &PermeabilityLaw,
    ) -> Vec<f64> {
        cell_permeabilities(&disc.mesh, z, law, Some(&self.shift[n]))
    }
}

/// Precomputed loads, initial data and the translation for one scenario.
pub struct EvolutionContext<'a> {
    pub disc: &'a Discretization,
    pub sc: &'a Scenario,
    pub times: Vec<f64>,
    /// Interior pairing vectors of `S` at every time node.
    pub s_loads: Vec<DVector<f64>>,
    /// Vector load of `F` at every time node.
    pub f_loads: Vec<DVector<f64>>,
    /// Nodal interpolant of `d₀`.
    pub d0: ScalarField,
    /// Interior pairing vector of `d₀`.
    pub b0: DVector<f64>,
    pub translated: TranslatedProblem,
    /// `c₀ M + P` over interior pressure dofs.
    pub q: DMatrix<f64>,
    pub data_functional: f64,
}

pub fn initial_content(disc: &Discretization, sc: &Scenario) -> ScalarField {
    match &sc.d0 {
        InitialContent::Analytic(e) => ScalarField::interpolate(&disc.mesh, |x| e.eval(x[0], x[1], 0.0)),
        InitialContent::Nodal(v) => ScalarField::new(v.clone()),
    }
    .at_time(0.0)
}

/// Build the elastic lift of `F` and the shifted data.
pub fn translate_problem(disc: &Discretization, sc: &Scenario) -> Result<TranslatedProblem> {
    let ctx = EvolutionContext::new(disc, sc)?;
    Ok(ctx.translated)
}

fn build_translation(
    disc: &Discretization,
    sc: &Scenario,
    times: &[f64],
    s_loads: &[DVector<f64>],
    f_loads: &[DVector<f64>],
    d0: &ScalarField,
) -> Result<TranslatedProblem> {
    let g = disc.elasticity.coupling();
    let u_f: Vec<VectorField> = f_loads
        .iter()
        .zip(times)
        .map(|(f, &t)| disc.elasticity.solve_rhs(f).at_time(t))
        .collect();
    let g_u_f: Vec<DVector<f64>> = u_f.iter().map(|u| g.mul_vec(&u.values)).collect();
    let div_u_f: Vec<ScalarField> = g_u_f
        .iter()
        .zip(times)
        .map(|(gu, &t)| ScalarField::new(disc.b.project(gu)).at_time(t))
        .collect();
    let shift = div_u_f
        .iter()
        .map(|d| d.cell_midpoint_values(&disc.mesh))
        .collect();
    let mut s_tilde = Vec::with_capacity(times.len());
    s_tilde.push(s_loads[0].clone());
    for n in 1..times.len() {
        let rate = match sc.translation {
            TranslationMode::BackwardDifference => (&g_u_f[n] - &g_u_f[n - 1]) / sc.dt,
            TranslationMode::Analytic => {
                let ft = sc.force_t.as_ref().ok_or_else(|| {
                    BiotError::Config("analytic translation requires force_t".into())
                })?;
                let t = times[n];
                let load = assemble_load(&disc.mesh, &disc.vector, |x| {
                    [
                        ft[0].eval(x[0], x[1], t),
                        if sc.dim > 1 { ft[1].eval(x[0], x[1], t) } else { 0.0 },
                    ]
                });
                g.mul_vec(&disc.elasticity.solve_rhs(&load).values)
            }
        };
        s_tilde.push(&s_loads[n] - restrict(&rate, &disc.scalar));
    }
    let mut d0_tilde = d0.clone();
    d0_tilde.values -= &div_u_f[0].values;
    let b0_tilde = disc.pairing_vector(&d0_tilde);
    Ok(TranslatedProblem {
        u_f,
        div_u_f,
        shift,
        s_tilde,
        d0_tilde,
        b0_tilde,
    })
}

impl<'a> EvolutionContext<'a> {
    pub fn new(disc: &'a Discretization, sc: &'a Scenario) -> Result<Self> {
        sc.validate()?;
        if disc.mesh.dim() != sc.dim || disc.mesh.resolution() != sc.n {
            return Err(BiotError::Config(format!(
                "scenario mesh ({}D, n = {}) does not match the discretization ({}D, n = {})",
                sc.dim,
                sc.n,
                disc.mesh.dim(),
                disc.mesh.resolution()
            )));
        }
        let times = sc.times();
        let s_loads: Vec<DVector<f64>> = times
            .iter()
            .map(|&t| {
                let l = assemble_load(&disc.mesh, &disc.scalar, |x| {
                    [sc.source.eval(x, t), 0.0]
                });
                restrict(&l, &disc.scalar)
            })
            .collect();
        let f_loads: Vec<DVector<f64>> = times
            .iter()
            .map(|&t| assemble_load(&disc.mesh, &disc.vector, |x| sc.eval_force(x, t)))
            .collect();
        let d0 = initial_content(disc, sc);
        let b0 = disc.pairing_vector(&d0);
        let translated = build_translation(disc, sc, &times, &s_loads, &f_loads, &d0)?;
        let q = disc.b.regularized(sc.c0);
        let data_functional = data_functional(disc, sc, &times, &s_loads, &f_loads);
        Ok(Self {
            disc,
            sc,
            times,
            s_loads,
            f_loads,
            d0,
            b0,
            translated,
            q,
            data_functional,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Picard starting trajectory in the variables of the active formulation.
    pub fn initial_guess(&self, kind: InitialGuess) -> Vec<ScalarField> {
        let base = match kind {
            InitialGuess::InitialContent => self.d0.clone(),
            InitialGuess::Zero => ScalarField::zeros(self.d0.len()),
        };
        (0..self.times.len())
            .map(|n| self.to_formulation(n, &base).at_time(self.times[n]))
            .collect()
    }

    /// Map an original fluid-content field to the active formulation.
    pub fn to_formulation(&self, n: usize, zeta: &ScalarField) -> ScalarField {
        match self.sc.formulation {
            Formulation::Direct => zeta.clone(),
            Formulation::Translated => {
                ScalarField::new(&zeta.values - &self.translated.div_u_f[n].values)
            }
        }
    }

    /// Per-cell permeability at node `n` for the argument `z` given in the
    /// active formulation.
    pub fn permeabilities(&self, n: usize, z: &ScalarField) -> Vec<f64> {
        match self.sc.formulation {
            Formulation::Direct => cell_permeabilities(&self.disc.mesh, z, &self.sc.law, None),
            Formulation::Translated => {
                self.translated
                    .shifted_permeabilities(self.disc, n, z, &self.sc.law)
            }
        }
    }

    /// Interior weighted stiffness from per-cell weights.
    pub fn stiffness_matrix(&self, weights: &[f64]) -> DMatrix<f64> {
        let ids = self.disc.scalar.interior_dofs();
        assemble_weighted_stiffness_cells(&self.disc.mesh, &self.disc.scalar, weights)
            .submatrix(ids, ids)
    }

    /// Displacement from a pressure field at node `n`.
    pub fn displacement(&self, n: usize, p: &ScalarField) -> VectorField {
        self.disc
            .elasticity
            .solve_elasticity(p, &self.f_loads[n])
            .at_time(self.times[n])
    }
}

/// `dt Σ (‖S‖²_{V′} + ‖F_t‖²_{V′} + ‖F‖²_{V′})` over steps `1..=N`.
fn data_functional(
    disc: &Discretization,
    sc: &Scenario,
    times: &[f64],
    s_loads: &[DVector<f64>],
    f_loads: &[DVector<f64>],
) -> f64 {
    let mut total = 0.0;
    for n in 1..times.len() {
        let s = disc.riesz.dual_norm_interior(&s_loads[n]);
        let f = disc.elasticity.energy_dual_norm(&f_loads[n]);
        let ft_load = match &sc.force_t {
            Some(ft) => {
                let t = times[n];
                assemble_load(&disc.mesh, &disc.vector, |x| {
                    [
                        ft[0].eval(x[0], x[1], t),
                        if sc.dim > 1 { ft[1].eval(x[0], x[1], t) } else { 0.0 },
                    ]
                })
            }
            None => (&f_loads[n] - &f_loads[n - 1]) / sc.dt,
        };
        let ft = disc.elasticity.energy_dual_norm(&ft_load);
        total += sc.dt * (s * s + ft * ft + f * f);
    }
    total
}

/// Per-step diagnostics of a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub t: f64,
    pub l2_p: f64,
    pub v_p: f64,
    /// `‖B^{1/2}p‖²`.
    pub b_p_sq: f64,
    pub l2_zeta: f64,
    pub h1_zeta: f64,
    /// `‖(ζⁿ − ζⁿ⁻¹)/dt‖_{V′}`; zero at the initial node.
    pub vprime_dzeta: f64,
    pub linf_grad_p: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub p: Vec<ScalarField>,
    /// Total displacement, including the elastic lift of `F`.
    pub u: Vec<VectorField>,
    /// Fluid content in the original variable; entry 0 is `d₀`.
    pub zeta: Vec<ScalarField>,
    /// Interior pairing vectors of `ζ`.
    pub pairing: Vec<DVector<f64>>,
    pub ledger: Vec<LedgerEntry>,
    pub data_functional: f64,
    /// `p(0) = (c₀I + B)⁻¹ d̃₀` is available only for `c₀ > 0`.
    pub initial_pressure_recovered: bool,
    /// Set when the permeability argument lagged one step behind.
    pub lagged: bool,
}

impl TrajectoryRecord {
    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    /// Rebuild displacement, fluid content and ledger from pressures alone.
    pub fn from_pressures(ctx: &EvolutionContext, p: Vec<ScalarField>, initial_pressure_recovered: bool) -> Self {
        let disc = ctx.disc;
        let c0 = ctx.sc.c0;
        let mut u = Vec::with_capacity(p.len());
        let mut zeta = Vec::with_capacity(p.len());
        let mut pairing = Vec::with_capacity(p.len());
        for (n, pn) in p.iter().enumerate() {
            let un = ctx.displacement(n, pn);
            if n == 0 {
                zeta.push(ctx.d0.clone());
                pairing.push(ctx.b0.clone());
            } else {
                let z = disc.fluid_content(pn, &un, c0).at_time(ctx.times[n]);
                let mut b = restrict(&disc.elasticity.coupling().mul_vec(&un.values), &disc.scalar);
                b += disc.b.mass_interior() * pn.interior(&disc.scalar) * c0;
                zeta.push(z);
                pairing.push(b);
            }
            u.push(un);
        }
        let mut rec = Self {
            times: ctx.times.clone(),
            p,
            u,
            zeta,
            pairing,
            ledger: Vec::new(),
            data_functional: ctx.data_functional,
            initial_pressure_recovered,
            lagged: false,
        };
        rec.ledger = compute_ledger(disc, &rec, ctx.sc.dt);
        rec
    }
}

fn compute_ledger(disc: &Discretization, tr: &TrajectoryRecord, dt: f64) -> Vec<LedgerEntry> {
    (0..tr.times.len())
        .map(|n| {
            let p = &tr.p[n];
            let z = &tr.zeta[n];
            let vprime_dzeta = if n == 0 {
                0.0
            } else {
                disc.riesz
                    .dual_norm_interior(&((&tr.pairing[n] - &tr.pairing[n - 1]) / dt))
            };
            let linf_grad_p = p
                .cell_gradients(&disc.mesh)
                .iter()
                .map(|g| g[0].hypot(g[1]))
                .fold(0.0, f64::max);
            LedgerEntry {
                t: tr.times[n],
                l2_p: disc.l2_norm(p),
                v_p: disc.v_norm(p),
                b_p_sq: disc.b.sqrt_b_diag(p).unwrap_or(f64::NAN),
                l2_zeta: disc.l2_norm(z),
                h1_zeta: disc.h1_norm(z),
                vprime_dzeta,
                linf_grad_p,
            }
        })
        .collect()
}

/// Factorization of `(c₀M + P)/dt + A`, reused while the cell weights repeat.
struct StepSolver {
    weights: Vec<f64>,
    matrix: DMatrix<f64>,
    factor: DenseCholesky,
}

fn step_solver(
    ctx: &EvolutionContext,
    weights: Vec<f64>,
    cache: &mut Option<StepSolver>,
) -> Result<()> {
    if cache.as_ref().is_some_and(|c| c.weights == weights) {
        return Ok(());
    }
    let matrix = &ctx.q / ctx.sc.dt + ctx.stiffness_matrix(&weights);
    let factor = dense_cholesky(matrix.clone(), "implicit Euler system")?;
    *cache = Some(StepSolver {
        weights,
        matrix,
        factor,
    });
    Ok(())
}

fn checked_solve(solver: &StepSolver, rhs: &DVector<f64>, tol: f64) -> Result<DVector<f64>> {
    let p = solver.factor.solve(rhs);
    let r = &solver.matrix * &p - rhs;
    let scale = rhs.norm().max(f64::MIN_POSITIVE);
    if r.norm() > tol * scale {
        let ev = solver.matrix.clone().symmetric_eigenvalues();
        let cond = ev.max() / ev.min();
        return Err(BiotError::Solver(format!(
            "implicit Euler residual {:.3e} exceeds tolerance {tol:.1e} (condition number {cond:.3e})",
            r.norm() / scale
        )));
    }
    Ok(p)
}

/// Source of the permeability argument during a sweep.
pub enum ZSource<'z> {
    /// One field per time node, in the variables of the active formulation.
    Given(&'z [ScalarField]),
    /// `z` at step `n` is the fluid content at step `n − 1`.
    Lagged,
}

/// March implicit Euler over all steps for a frozen (or lagged) `z`.
pub fn solve_linear_trajectory(ctx: &EvolutionContext, z: ZSource) -> Result<TrajectoryRecord> {
    let disc = ctx.disc;
    let sc = ctx.sc;
    let n_steps = ctx.n_steps();
    if let ZSource::Given(zs) = &z {
        if zs.len() != n_steps + 1 {
            return Err(BiotError::Precondition(format!(
                "z trajectory has {} fields, expected {}",
                zs.len(),
                n_steps + 1
            )));
        }
    }
    let ids = disc.scalar.interior_dofs();
    let c0 = sc.c0;
    let tp = &ctx.translated;

    let (p0, recovered) = if c0 > 0.0 {
        let pi = disc.b.solve_c0_plus_b_pairing(&tp.b0_tilde, c0)?;
        (ScalarField::from_interior(&disc.scalar, &pi), true)
    } else {
        (ScalarField::zeros(ids.len() + disc.scalar.dirichlet_dofs().len()), false)
    };
    let mut p = vec![p0.at_time(0.0)];
    // Pairing vector carried by the stepper, in the formulation's variables.
    let mut carried = match sc.formulation {
        Formulation::Translated => tp.b0_tilde.clone(),
        Formulation::Direct => ctx.b0.clone(),
    };
    let mut previous_zeta = ctx.to_formulation(0, &ctx.d0);
    let mut cache: Option<StepSolver> = None;
    for n in 1..=n_steps {
        let zn = match &z {
            ZSource::Given(zs) => zs[n].clone(),
            ZSource::Lagged => previous_zeta.clone(),
        };
        step_solver(ctx, ctx.permeabilities(n, &zn), &mut cache)?;
        let solver = cache.as_ref().expect("step solver initialized");
        let pn_i = match sc.formulation {
            Formulation::Translated => {
                let rhs = &carried / sc.dt + &tp.s_tilde[n];
                let pn = checked_solve(solver, &rhs, sc.linear_tol)?;
                carried = &ctx.q * &pn;
                pn
            }
            Formulation::Direct => {
                let gk_f = restrict(
                    &disc.elasticity.coupling().mul_vec(&tp.u_f[n].values),
                    &disc.scalar,
                );
                let rhs = (&carried - &gk_f) / sc.dt + &ctx.s_loads[n];
                let pn = checked_solve(solver, &rhs, sc.linear_tol)?;
                let pf = ScalarField::from_interior(&disc.scalar, &pn);
                let un = ctx.displacement(n, &pf);
                carried = restrict(&disc.elasticity.coupling().mul_vec(&un.values), &disc.scalar)
                    + disc.b.mass_interior() * &pn * c0;
                pn
            }
        };
        let pn = ScalarField::from_interior(&disc.scalar, &pn_i).at_time(ctx.times[n]);
        if let ZSource::Lagged = z {
            let mut zeta = disc.b.apply(&pn);
            zeta.values += &pn.values * c0;
            previous_zeta = match sc.formulation {
                Formulation::Translated => zeta,
                Formulation::Direct => {
                    ScalarField::new(&zeta.values + &tp.div_u_f[n].values)
                }
            };
        }
        p.push(pn);
    }
    let mut rec = TrajectoryRecord::from_pressures(ctx, p, recovered);
    rec.lagged = matches!(z, ZSource::Lagged);
    Ok(rec)
}

/// Whether `B` enters the step (a test harness toggle).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    Full,
    Decoupled,
}

/// One implicit Euler step in pressure form:
/// `[(c₀M + MB)/dt + A(z)] pⁿ = (c₀M + MB)/dt pⁿ⁻¹ + S`.
#[allow(clippy::too_many_arguments)]
pub fn step_linear(
    disc: &Discretization,
    p_prev: &ScalarField,
    z_now: &ScalarField,
    s_now: &DVector<f64>,
    c0: f64,
    dt: f64,
    law: &PermeabilityLaw,
    coupling: Coupling,
) -> Result<ScalarField> {
    law.validate()?;
    let ids = disc.scalar.interior_dofs();
    let q = match coupling {
        Coupling::Full => disc.b.regularized(c0),
        Coupling::Decoupled => disc.b.mass_interior() * c0,
    };
    let weights = cell_permeabilities(&disc.mesh, z_now, law, None);
    let a = assemble_weighted_stiffness_cells(&disc.mesh, &disc.scalar, &weights).submatrix(ids, ids);
    let matrix = &q / dt + a;
    let factor = dense_cholesky(matrix.clone(), "implicit Euler system")?;
    let rhs = &q * p_prev.interior(&disc.scalar) / dt + restrict(s_now, &disc.scalar);
    let solver = StepSolver {
        weights,
        matrix,
        factor,
    };
    let p = checked_solve(&solver, &rhs, 1e-10)?;
    Ok(ScalarField::from_interior(&disc.scalar, &p))
}

/// Result of the discrete energy inequality check.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyAudit {
    /// `(d̃₀, (c₀I + B)⁻¹ d̃₀)`, pseudo-inverse when `c₀ = 0`.
    pub initial_energy: f64,
    /// Right minus left side of the inequality at each step `1..=N`.
    pub slack: Vec<f64>,
    /// Largest violation relative to the right-hand side (0 if none).
    pub max_violation: f64,
    pub passed: bool,
    /// `‖ζ̃_t‖_{L²V′} / (‖p‖_{L²V} + ‖S̃‖_{L²V′})`.
    pub dual_estimate_constant: f64,
    /// `maxₙ ‖ζ̃ⁿ‖_{H¹} / ‖pⁿ‖_V`.
    pub regularity_constant: f64,
}

/// `bᵀ Q⁺ b` through the eigendecomposition of a symmetric PSD `Q`.
pub fn pseudo_inverse_form(q: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let sym = (q + q.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = 1e-10 * lmax.max(f64::MIN_POSITIVE);
    let coeffs = eig.eigenvectors.transpose() * b;
    coeffs
        .iter()
        .zip(eig.eigenvalues.iter())
        .filter(|(_, &l)| l > cutoff)
        .map(|(c, l)| c * c / l)
        .sum()
}

pub fn energy_audit_linear(ctx: &EvolutionContext, tr: &TrajectoryRecord) -> Result<EnergyAudit> {
    let disc = ctx.disc;
    let sc = ctx.sc;
    let k1 = sc.law.k1();
    let tp = &ctx.translated;
    let initial_energy = if sc.c0 > 0.0 {
        let chol = dense_cholesky(ctx.q.clone(), "c0 M + M B")?;
        tp.b0_tilde.dot(&chol.solve(&tp.b0_tilde))
    } else {
        pseudo_inverse_form(&ctx.q, &tp.b0_tilde)
    };
    let mut slack = Vec::with_capacity(ctx.n_steps());
    let mut max_violation = 0.0f64;
    let mut dissipation = 0.0;
    let mut forcing = 0.0;
    let mut zeta_t_sq = 0.0;
    let mut p_v_sq = 0.0;
    let mut s_sq = 0.0;
    let mut regularity = 0.0f64;
    let mut prev_b = tp.b0_tilde.clone();
    for n in 1..=ctx.n_steps() {
        let pi = tr.p[n].interior(&disc.scalar);
        let qp = &ctx.q * &pi;
        let energy = pi.dot(&qp);
        let v = disc.riesz.v_norm_interior(&pi);
        let s = disc.riesz.dual_norm_interior(&tp.s_tilde[n]);
        dissipation += k1 * sc.dt * v * v;
        forcing += sc.dt / k1 * s * s;
        let lhs = energy + dissipation;
        let rhs = initial_energy + forcing;
        slack.push(rhs - lhs);
        if lhs > rhs {
            max_violation = max_violation.max((lhs - rhs) / rhs.abs().max(f64::MIN_POSITIVE));
        }
        let dz = disc.riesz.dual_norm_interior(&((&qp - &prev_b) / sc.dt));
        zeta_t_sq += sc.dt * dz * dz;
        p_v_sq += sc.dt * v * v;
        s_sq += sc.dt * s * s;
        if v > 0.0 {
            let mut zt = disc.b.apply(&tr.p[n]);
            zt.values += &tr.p[n].values * sc.c0;
            regularity = regularity.max(disc.h1_norm(&zt) / v);
        }
        prev_b = qp;
    }
    let denom = p_v_sq.sqrt() + s_sq.sqrt();
    let dual_estimate_constant = if denom > 0.0 { zeta_t_sq.sqrt() / denom } else { 0.0 };
    Ok(EnergyAudit {
        initial_energy,
        slack,
        max_violation,
        passed: max_violation <= 1e-8,
        dual_estimate_constant,
        regularity_constant: regularity,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Expr;
    use crate::scenario::Scenario;

    fn run(sc: &Scenario) -> (Discretization, TrajectoryRecord) {
        let disc = Discretization::new(sc.dim, sc.n).unwrap();
        let tr = {
            let ctx = EvolutionContext::new(&disc, sc).unwrap();
            let z = ctx.initial_guess(InitialGuess::InitialContent);
            solve_linear_trajectory(&ctx, ZSource::Given(&z)).unwrap()
        };
        (disc, tr)
    }

    fn constant_law() -> PermeabilityLaw {
        PermeabilityLaw::constant(1.0).unwrap()
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let sc = Scenario::new(2, 3, 1.0, 0.25, 1.0, constant_law());
        let (_, tr) = run(&sc);
        assert!(tr.p.iter().all(|p| p.values.amax() == 0.0));
        assert!(tr.u.iter().all(|u| u.values.amax() == 0.0));
        assert_eq!(tr.data_functional, 0.0);
    }

    #[test]
    fn zeta_matches_pressure_and_dilation() {
        let sc = Scenario::new(1, 8, 1.0, 0.125, 0.5, constant_law())
            .with_source(Expr::parse("sin(pi*x)*(1+t)").unwrap())
            .with_force([Expr::parse("x*t").unwrap(), Expr::num(0.0)])
            .with_d0(InitialContent::Analytic(Expr::parse("x*(1-x)").unwrap()));
        let (disc, tr) = run(&sc);
        for n in 1..tr.times.len() {
            let z = disc.fluid_content(&tr.p[n], &tr.u[n], sc.c0);
            assert!((&z.values - &tr.zeta[n].values).amax() < 1e-10);
        }
        assert!(tr.initial_pressure_recovered);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn decoupled_step_matches_heat_equation() {
        // 1D n = 4, c0 = 1, k = 1: (M/dt + K) p = M p_prev / dt + s
        let disc = Discretization::new(1, 4).unwrap();
        let p_prev = ScalarField::interpolate_constrained(&disc.mesh, &disc.scalar, |x| {
            (std::f64::consts::PI * x[0]).sin()
        });
        let s = assemble_load(&disc.mesh, &disc.scalar, |_| [1.0, 0.0]);
        let dt = 0.1;
        let p = step_linear(
            &disc,
            &p_prev,
            &ScalarField::zeros(5),
            &s,
            1.0,
            dt,
            &constant_law(),
            Coupling::Decoupled,
        )
        .unwrap();
        // hand-assembled tridiagonal system, h = 1/4
        let h = 0.25;
        let mut a = DMatrix::zeros(3, 3);
        let mut m = DMatrix::zeros(3, 3);
        for i in 0..3 {
            a[(i, i)] = 2.0 / h;
            m[(i, i)] = 2.0 * h / 3.0;
            if i + 1 < 3 {
                a[(i, i + 1)] = -1.0 / h;
                a[(i + 1, i)] = -1.0 / h;
                m[(i, i + 1)] = h / 6.0;
                m[(i + 1, i)] = h / 6.0;
            }
        }
        let lhs = &m / dt + a;
        let rhs = &m * p_prev.interior(&disc.scalar) / dt + DVector::from_element(3, h);
        let want = lhs.lu().solve(&rhs).unwrap();
        assert!((p.interior(&disc.scalar) - want).amax() < 1e-13);
    }

    #[test]
    fn steady_forcing_reaches_stationary_solution() {
        let disc = Discretization::new(1, 8).unwrap();
        let law = constant_law();
        let s = assemble_load(&disc.mesh, &disc.scalar, |x| [x[0], 0.0]);
        let mut p = ScalarField::zeros(9);
        for _ in 0..200 {
            p = step_linear(&disc, &p, &p, &s, 1.0, 0.5, &law, Coupling::Full).unwrap();
        }
        let k = disc.riesz.stiffness_interior();
        let stationary = k.clone().lu().solve(&restrict(&s, &disc.scalar)).unwrap();
        assert!((p.interior(&disc.scalar) - stationary).amax() < 1e-10);
    }

    #[test]
    fn energy_audit_holds_for_smooth_source() {
        let sc = Scenario::new(1, 8, 1.0, 0.0625, 1.0, constant_law())
            .with_source(Expr::parse("sin(3*x)*cos(2*t) + x").unwrap());
        let disc = Discretization::new(1, 8).unwrap();
        let ctx = EvolutionContext::new(&disc, &sc).unwrap();
        let z = ctx.initial_guess(InitialGuess::InitialContent);
        let tr = solve_linear_trajectory(&ctx, ZSource::Given(&z)).unwrap();
        let audit = energy_audit_linear(&ctx, &tr).unwrap();
        assert!(audit.passed);
        assert!(audit.slack.iter().all(|&s| s > 0.0));
        assert!(audit.dual_estimate_constant.is_finite());
    }

    #[test]
    fn translation_of_zero_force_is_identity() {
        let sc = Scenario::new(2, 3, 1.0, 0.5, 1.0, constant_law())
            .with_source(Expr::parse("x*y").unwrap())
            .with_d0(InitialContent::Analytic(Expr::parse("x+y").unwrap()));
        let disc = Discretization::new(2, 3).unwrap();
        let ctx = EvolutionContext::new(&disc, &sc).unwrap();
        let tp = &ctx.translated;
        assert_eq!(tp.d0_tilde, ctx.d0);
        for n in 0..ctx.times.len() {
            assert_eq!(tp.s_tilde[n], ctx.s_loads[n]);
            assert!(tp.shift[n].iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn time_constant_force_leaves_source_unchanged() {
        let sc = Scenario::new(1, 6, 1.0, 0.25, 1.0, constant_law())
            .with_force([Expr::parse("sin(pi*x)").unwrap(), Expr::num(0.0)]);
        let disc = Discretization::new(1, 6).unwrap();
        let ctx = EvolutionContext::new(&disc, &sc).unwrap();
        for n in 1..ctx.times.len() {
            assert!((&ctx.translated.s_tilde[n] - &ctx.s_loads[n]).amax() < 1e-14);
        }
        assert!((&ctx.translated.d0_tilde.values + &ctx.translated.div_u_f[0].values).amax() < 1e-14);
    }

    #[test]
    fn linear_in_time_force_rate_is_lift_of_profile() {
        let mut sc = Scenario::new(2, 3, 1.0, 0.25, 1.0, constant_law())
            .with_force([Expr::parse("t*x*y").unwrap(), Expr::parse("t*(1-x)").unwrap()]);
        let disc = Discretization::new(2, 3).unwrap();
        let ctx = EvolutionContext::new(&disc, &sc).unwrap();
        let g_load = assemble_load(&disc.mesh, &disc.vector, |x| [x[0] * x[1], 1.0 - x[0]]);
        let rate = restrict(
            &disc.elasticity.coupling().mul_vec(&disc.elasticity.solve_rhs(&g_load).values),
            &disc.scalar,
        );
        for n in 1..ctx.times.len() {
            assert!((&ctx.s_loads[n] - &ctx.translated.s_tilde[n] - &rate).amax() < 1e-12);
        }
        let backward = ctx.translated.s_tilde.clone();
        drop(ctx);
        sc.translation = TranslationMode::Analytic;
        sc.force_t = Some([Expr::parse("x*y").unwrap(), Expr::parse("1-x").unwrap()]);
        let ctx2 = EvolutionContext::new(&disc, &sc).unwrap();
        for n in 1..ctx2.times.len() {
            assert!((&ctx2.translated.s_tilde[n] - &backward[n]).amax() < 1e-12);
        }
    }
}
